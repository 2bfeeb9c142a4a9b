#![allow(dead_code)]

use itinmod::ingest::{profile_corpus, Corpus};
use itinmod::model::{Intent, IntentSet, Itinerary, Poi, PoiCatalog};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// O(n²) pair classification: (n_c − n_d, n0 − n1, n0 − n2).
pub fn naive_tau_parts(x: &[i8], y: &[i8]) -> (i64, u64, u64) {
    let n = x.len();
    let (mut nc, mut nd, mut tx, mut ty) = (0i64, 0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).signum();
            let dy = (y[i] - y[j]).signum();
            if dx == 0 {
                tx += 1;
            }
            if dy == 0 {
                ty += 1;
            }
            if dx != 0 && dy != 0 {
                if dx == dy {
                    nc += 1;
                } else {
                    nd += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    (nc - nd, n0 - tx, n0 - ty)
}

pub fn naive_tau(x: &[i8], y: &[i8]) -> Option<f64> {
    let (s, ux, uy) = naive_tau_parts(x, y);
    if ux == 0 || uy == 0 {
        return None;
    }
    Some(s as f64 / ((ux as f64) * (uy as f64)).sqrt())
}

pub fn all_intent_sets() -> Vec<IntentSet> {
    (1u8..8)
        .map(|mask| {
            let picked: Vec<Intent> = Intent::ALL
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, i)| *i)
                .collect();
            IntentSet::new(&picked).unwrap()
        })
        .collect()
}

const CATEGORIES: [&str; 7] = [
    "museum", "park", "beach", "cafe", "church", "market", "gallery",
];

/// Random city: `n_pois` POIs spread over a few km, `n_itineraries`
/// itineraries of length 3..=max_len with distinct seq ids.
pub fn synthetic_corpus(
    name: &str,
    n_pois: usize,
    n_itineraries: usize,
    max_len: usize,
    seed: u64,
) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pois: Vec<Poi> = (0..n_pois)
        .map(|k| {
            Poi::new(
                format!("p{k:03}"),
                *CATEGORIES.choose(&mut rng).unwrap(),
                41.88 + rng.gen_range(0.0..0.05),
                12.47 + rng.gen_range(0.0..0.07),
                rng.gen_range(1..500),
            )
            .unwrap()
        })
        .collect();
    let catalog: PoiCatalog = pois.iter().map(|p| (p.id.clone(), p.clone())).collect();
    let itineraries: Vec<Itinerary> = (0..n_itineraries)
        .map(|s| {
            let len = rng.gen_range(3..=max_len);
            let picks = pois.choose_multiple(&mut rng, len).cloned().collect();
            Itinerary::new(format!("s{s:05}"), format!("u{}", s % 97), picks)
        })
        .collect();
    let profile = profile_corpus(name, &catalog, &itineraries).unwrap();
    Corpus {
        name: name.into(),
        pois: catalog,
        itineraries,
        profile,
    }
}
