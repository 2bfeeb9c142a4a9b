//! In-context example retrieval: random, BM25 over hints, and embedding cosine.

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchTask;
use crate::error::{Error, Result};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const HASH_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RagStrategy {
    Random,
    Sparse,
    Dense,
}

impl std::str::FromStr for RagStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(RagStrategy::Random),
            "sparse" => Ok(RagStrategy::Sparse),
            "dense" => Ok(RagStrategy::Dense),
            other => Err(Error::Parameter(format!("unknown RAG strategy {other:?}"))),
        }
    }
}

pub trait Embedder {
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Character-trigram feature hashing into a fixed-size, L2-normalized vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: HASH_DIM }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> Vec<f64> {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        let mut v = vec![0.0; self.dim];
        let mut buf = String::new();
        for w in chars.windows(3) {
            buf.clear();
            buf.extend(w);
            v[(fnv1a(buf.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// BM25 score of each document against the query.
pub fn bm25_scores(query: &str, docs: &[&str]) -> Vec<f64> {
    let docs: Vec<Vec<String>> = docs.iter().map(|d| tokens(d)).collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n.max(1.0);
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in &docs {
        let mut seen: Vec<&str> = d.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let query = tokens(query);
    docs.iter()
        .map(|d| {
            let len = d.len() as f64;
            query
                .iter()
                .map(|q| {
                    let f = d.iter().filter(|t| *t == q).count() as f64;
                    if f == 0.0 {
                        return 0.0;
                    }
                    let n_q = *df.get(q.as_str()).unwrap_or(&0) as f64;
                    let idf = ((n - n_q + 0.5) / (n_q + 0.5) + 1.0).ln();
                    let norm = if avgdl > 0.0 { len / avgdl } else { 0.0 };
                    idf * f * (BM25_K1 + 1.0) / (f + BM25_K1 * (1.0 - BM25_B + BM25_B * norm))
                })
                .sum()
        })
        .collect()
}

/// Text used for dense retrieval: everything the model sees as task input.
pub fn task_text(task: &BenchTask) -> String {
    let stops: Vec<String> = task
        .need_to_modify
        .pois
        .iter()
        .map(|p| format!("{} {}", p.id, p.category.trim()))
        .collect();
    let candidates: Vec<String> = task
        .candidates
        .iter()
        .flatten()
        .map(|p| format!("{} {}", p.id, p.category.trim()))
        .collect();
    format!(
        "{} | {} | {} | {}",
        task.op.as_str(),
        task.hint,
        stops.join(", "),
        candidates.join(", ")
    )
}

fn top_k(scored: Vec<(f64, &BenchTask)>, k: usize) -> Vec<&BenchTask> {
    let mut scored = scored;
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.1.id.cmp(&b.1.id))
    });
    scored.into_iter().take(k).map(|(_, t)| t).collect()
}

/// Picks `k` in-context examples from `train`, never the query itself.
pub fn retrieve_examples<'a>(
    query: &BenchTask,
    train: &'a [BenchTask],
    strategy: RagStrategy,
    k: usize,
    seed: u64,
    embedder: Option<&dyn Embedder>,
) -> Result<Vec<&'a BenchTask>> {
    let pool: Vec<&BenchTask> = train.iter().filter(|t| t.id != query.id).collect();
    if k > pool.len() {
        return Err(Error::Parameter(format!(
            "k = {k} exceeds the {} available training examples",
            pool.len()
        )));
    }
    Ok(match strategy {
        RagStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, pool.len(), k)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        }
        RagStrategy::Sparse => {
            let docs: Vec<&str> = pool.iter().map(|t| t.hint.as_str()).collect();
            let scores = bm25_scores(&query.hint, &docs);
            top_k(scores.into_iter().zip(pool).collect(), k)
        }
        RagStrategy::Dense => {
            let fallback = HashEmbedder::default();
            let embedder = embedder.unwrap_or_else(|| {
                log::info!("no embedder configured; using the hashed trigram fallback");
                &fallback
            });
            let q = embedder.embed(&task_text(query));
            let scored = pool
                .into_iter()
                .map(|t| (cosine(&q, &embedder.embed(&task_text(t))), t))
                .collect();
            top_k(scored, k)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::tests::{catalog, record};
    use crate::bench::{build_task, Split};
    use crate::model::{Intent, IntentSet, Operation};

    fn tasks() -> Vec<BenchTask> {
        let mut out = Vec::new();
        let sets = [
            IntentSet::single(Intent::Popularity),
            IntentSet::single(Intent::Diversity),
            IntentSet::new(&[Intent::Popularity, Intent::Diversity]).unwrap(),
        ];
        for (k, z) in sets.iter().enumerate() {
            for op in [Operation::Delete, Operation::Replace] {
                let rec = record(op, *z, k as u64);
                let mut t = build_task(&rec, &catalog(), Split::Train, 0).unwrap();
                t.id = format!("{}-{k}", t.id);
                out.push(t);
            }
        }
        out
    }

    #[test]
    fn exhaustion_and_overflow() {
        let train = tasks();
        let mut query = train[0].clone();
        query.id = "query".into();
        for s in [RagStrategy::Random, RagStrategy::Sparse, RagStrategy::Dense] {
            let got = retrieve_examples(&query, &train, s, train.len(), 1, None).unwrap();
            assert_eq!(got.len(), train.len());
            assert!(retrieve_examples(&query, &train, s, train.len() + 1, 1, None).is_err());
        }
    }

    #[test]
    fn sparse_prefers_identical_hint() {
        let train = tasks();
        let mut query = train[3].clone();
        query.id = "query".into();
        let top = retrieve_examples(&query, &train, RagStrategy::Sparse, 1, 0, None).unwrap();
        assert_eq!(top[0].hint, query.hint);
    }

    #[test]
    fn dense_duplicate_ranks_first() {
        let train = tasks();
        let mut query = train[4].clone();
        query.id = "query".into();
        let e = HashEmbedder::default();
        let sim = cosine(
            &e.embed(&task_text(&query)),
            &e.embed(&task_text(&train[4])),
        );
        assert!((sim - 1.0).abs() < 1e-12);
        let top = retrieve_examples(&query, &train, RagStrategy::Dense, 1, 0, Some(&e)).unwrap();
        assert_eq!(task_text(top[0]), task_text(&query));
    }

    #[test]
    fn never_returns_query() {
        let train = tasks();
        let query = train[2].clone();
        for s in [RagStrategy::Random, RagStrategy::Sparse, RagStrategy::Dense] {
            let got = retrieve_examples(&query, &train, s, train.len() - 1, 3, None).unwrap();
            assert!(got.iter().all(|t| t.id != query.id));
        }
    }

    #[test]
    fn bm25_matches_hand_computation() {
        // two docs, query term present once in the first only
        let s = bm25_scores("alpha", &["alpha beta", "beta gamma delta"]);
        let idf = ((2.0 - 1.0 + 0.5) / (1.0 + 0.5) + 1.0_f64).ln();
        let avgdl = 2.5;
        let expect = idf * 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * 2.0 / avgdl));
        assert!((s[0] - expect).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn hash_embedding_is_unit_norm() {
        let v = HashEmbedder::default().embed("modify the category diversity");
        assert_eq!(v.len(), HASH_DIM);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
