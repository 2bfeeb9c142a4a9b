//! Numeric kernels: category diversity, level histograms, distribution
//! distances (Hellinger, JSD, TVD), Kendall's tau-b and haversine distance.
//!
//! Histograms keep integer counts so component fractions are exact
//! rationals; conversion to `f64` happens only inside the distance
//! functions.

use std::collections::HashSet;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Level;

/// Mean earth radius used by [`haversine_km`].
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Unique-category ratio of a category list: 0 when a single category
/// remains after case folding, `#unique / len` otherwise.
pub fn category_diversity<S: AsRef<str>>(categories: &[S]) -> Result<Ratio<u64>> {
    if categories.is_empty() {
        return Err(Error::Domain("category diversity of an empty list".into()));
    }
    let unique: HashSet<String> = categories
        .iter()
        .map(|c| c.as_ref().trim().to_lowercase())
        .collect();
    if unique.len() == 1 {
        return Ok(Ratio::from_integer(0));
    }
    Ok(Ratio::new(unique.len() as u64, categories.len() as u64))
}

pub fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// (low, medium, high) distribution over a label sequence, stored as counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelHistogram {
    low: u64,
    medium: u64,
    high: u64,
}

impl LevelHistogram {
    pub fn from_labels(labels: &[Level]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Domain("level histogram of an empty list".into()));
        }
        let mut hist = LevelHistogram {
            low: 0,
            medium: 0,
            high: 0,
        };
        for level in labels {
            match level {
                Level::Low => hist.low += 1,
                Level::Medium => hist.medium += 1,
                Level::High => hist.high += 1,
            }
        }
        Ok(hist)
    }

    pub fn from_counts(low: u64, medium: u64, high: u64) -> Result<Self> {
        if low + medium + high == 0 {
            return Err(Error::Domain("level histogram with zero total".into()));
        }
        Ok(LevelHistogram { low, medium, high })
    }

    pub fn total(&self) -> u64 {
        self.low + self.medium + self.high
    }

    pub fn count(&self, level: Level) -> u64 {
        match level {
            Level::Low => self.low,
            Level::Medium => self.medium,
            Level::High => self.high,
        }
    }

    /// Exact fraction of `level`.
    pub fn fraction(&self, level: Level) -> Ratio<u64> {
        Ratio::new(self.count(level), self.total())
    }

    /// `[p_low, p_med, p_high]` as floats.
    pub fn to_f64(&self) -> [f64; 3] {
        Level::ALL.map(|l| ratio_f64(self.fraction(l)))
    }
}

/// Hellinger distance `(1/√2)·√Σ(√p_k − √q_k)²`, in `[0, 1]`.
pub fn hellinger(p: &LevelHistogram, q: &LevelHistogram) -> f64 {
    let (p, q) = (p.to_f64(), q.to_f64());
    let sum: f64 = p
        .iter()
        .zip(q.iter())
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    (sum.sqrt() / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    /// Bits. Reproduces the 0.0474 golden value.
    #[default]
    Two,
    Natural,
}

/// Jensen–Shannon divergence; `0·log 0` is taken as 0.
pub fn jsd(p: &LevelHistogram, q: &LevelHistogram, base: LogBase) -> f64 {
    let (p, q) = (p.to_f64(), q.to_f64());
    let log = |x: f64| match base {
        LogBase::Two => x.log2(),
        LogBase::Natural => x.ln(),
    };
    let mut total = 0.0;
    for k in 0..3 {
        let m = 0.5 * (p[k] + q[k]);
        if p[k] > 0.0 {
            total += 0.5 * p[k] * log(p[k] / m);
        }
        if q[k] > 0.0 {
            total += 0.5 * q[k] * log(q[k] / m);
        }
    }
    total.max(0.0)
}

/// Total variation distance `½·Σ|p_k − q_k|`, evaluated exactly.
pub fn tvd(p: &LevelHistogram, q: &LevelHistogram) -> f64 {
    let sum = Level::ALL
        .iter()
        .map(|&l| {
            let (a, b) = (p.fraction(l), q.fraction(l));
            if a > b {
                a - b
            } else {
                b - a
            }
        })
        .fold(Ratio::from_integer(0u64), |acc, d| acc + d);
    ratio_f64(sum / 2)
}

/// Exact pieces of Kendall's tau-b: `(n_c − n_d) / √((n_0 − n_1)(n_0 − n_2))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TauB {
    /// `n_c − n_d`
    pub score: i64,
    /// `n_0 − n_1`
    pub untied_x: u64,
    /// `n_0 − n_2`
    pub untied_y: u64,
}

impl TauB {
    pub fn value(&self) -> f64 {
        let v = self.score as f64 / ((self.untied_x as f64) * (self.untied_y as f64)).sqrt();
        v.clamp(-1.0, 1.0)
    }

    /// Exact `τ_b = 1` test: `n_c − n_d = √((n_0−n_1)(n_0−n_2))`.
    pub fn is_perfect(&self) -> bool {
        self.score > 0
            && (self.score as u128).pow(2) == self.untied_x as u128 * self.untied_y as u128
    }
}

/// Pairs with equal neighbours in an already sorted slice: Σ t(t−1)/2.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort by value, returning the number of inversions (swaps).
fn sort_counting_swaps<T: Ord + Copy>(values: &mut [T]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps =
        sort_counting_swaps(&mut values[..mid]) + sort_counting_swaps(&mut values[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if values[j] < values[i] {
            merged.push(values[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(values[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&values[i..mid]);
    merged.extend_from_slice(&values[j..n]);
    values.copy_from_slice(&merged);
    swaps
}

/// Kendall's tau-b with the standard tie correction, computed with Knight's
/// O(n log n) algorithm.
///
/// Returns [`Error::UndefinedCorrelation`] when either variable is all-tied.
pub fn kendall_tau_b<T: Ord + Copy>(x: &[T], y: &[T]) -> Result<TauB> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "tau-b length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as u64;
    if n < 2 {
        return Err(Error::Domain("tau-b needs at least two pairs".into()));
    }
    let mut pairs: Vec<(T, T)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_unstable();

    let n0 = n * (n - 1) / 2;
    let xs: Vec<T> = pairs.iter().map(|p| p.0).collect();
    let n1 = tied_pairs(&xs);
    let n3 = tied_pairs(&pairs);

    let mut ys: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let swaps = sort_counting_swaps(&mut ys);
    let n2 = tied_pairs(&ys);

    let untied_x = n0 - n1;
    let untied_y = n0 - n2;
    if untied_x == 0 || untied_y == 0 {
        return Err(Error::UndefinedCorrelation(format!(
            "all-tied variable (n0={n0}, n1={n1}, n2={n2})"
        )));
    }
    // n_c + n_d = n0 - n1 - n2 + n3; n_d = swaps
    let score = (n0 + n3) as i64 - n1 as i64 - n2 as i64 - 2 * swaps as i64;
    Ok(TauB {
        score,
        untied_x,
        untied_y,
    })
}

/// Great-circle distance in kilometres between two `(lat, lon)` points in degrees.
pub fn haversine_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Level::{High as H, Low as L, Medium as M};

    fn hist(l: u64, m: u64, h: u64) -> LevelHistogram {
        LevelHistogram::from_counts(l, m, h).unwrap()
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(
            category_diversity(&["museum", "museum", "museum"]).unwrap(),
            Ratio::from_integer(0)
        );
        assert_eq!(
            category_diversity(&["museum", "park", "museum"]).unwrap(),
            Ratio::new(2, 3)
        );
        assert_eq!(
            category_diversity(&["a", "b", "c", "d"]).unwrap(),
            Ratio::from_integer(1)
        );
        assert_eq!(
            category_diversity(&["Park", " park", "Museum"]).unwrap(),
            Ratio::new(2, 3)
        );
        assert!(category_diversity::<&str>(&[]).is_err());
    }

    #[test]
    fn histogram_examples() {
        let h = LevelHistogram::from_labels(&[H, H, H, H, H, M, M, M, M, M, L]).unwrap();
        assert_eq!(h.fraction(L), Ratio::new(1, 11));
        assert_eq!(h.fraction(M), Ratio::new(5, 11));
        assert_eq!(h.fraction(H), Ratio::new(5, 11));
        let h = LevelHistogram::from_labels(&[L]).unwrap();
        assert_eq!(h.to_f64(), [1.0, 0.0, 0.0]);
        let h = LevelHistogram::from_labels(&[H, H, H, H, H, M, L, L, L, L, L]).unwrap();
        assert_eq!(
            Level::ALL.map(|l| h.fraction(l)),
            [Ratio::new(5, 11), Ratio::new(1, 11), Ratio::new(5, 11)]
        );
        assert!(LevelHistogram::from_labels(&[]).is_err());
    }

    #[test]
    fn golden_comparison_values() {
        let p = hist(1, 5, 5);
        let q = hist(0, 1, 1);
        assert!((hellinger(&p, &q) - 0.216).abs() <= 0.001);
        assert!((tvd(&p, &q) - 0.0909).abs() <= 0.0005);
        assert!((jsd(&p, &q, LogBase::Two) - 0.0474).abs() <= 0.0005);
        // natural log does not reproduce the golden value
        assert!((jsd(&p, &q, LogBase::Natural) - 0.0474).abs() > 0.01);
        let p = hist(5, 1, 5);
        let q = hist(4, 1, 5);
        assert!((hellinger(&p, &q) - 0.039).abs() <= 0.001);
    }

    #[test]
    fn distance_extremes() {
        let p = hist(1, 0, 0);
        let q = hist(0, 1, 0);
        assert!((jsd(&p, &q, LogBase::Natural) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((jsd(&p, &q, LogBase::Two) - 1.0).abs() < 1e-12);
        assert_eq!(tvd(&p, &q), 1.0);
        assert!((hellinger(&p, &q) - 1.0).abs() < 1e-12);
        let r = hist(2, 3, 4);
        assert_eq!(hellinger(&r, &r), 0.0);
        assert_eq!(tvd(&r, &r), 0.0);
        assert_eq!(jsd(&r, &r, LogBase::Two), 0.0);
    }

    #[test]
    fn tau_b_examples() {
        assert_eq!(kendall_tau_b(&[0, 1, 2], &[0, 1, 2]).unwrap().value(), 1.0);
        assert_eq!(kendall_tau_b(&[0, 1, 2], &[2, 1, 0]).unwrap().value(), -1.0);
        let t = kendall_tau_b(&[1, 1, 2], &[1, 2, 2]).unwrap();
        // n_c=1, n_d=0, n_0=3, n_1=1, n_2=1
        assert_eq!(
            t,
            TauB {
                score: 1,
                untied_x: 2,
                untied_y: 2
            }
        );
        assert_eq!(t.value(), 0.5);
        assert!(kendall_tau_b(&[0, 1, 2], &[0, 1, 2]).unwrap().is_perfect());
        assert!(!t.is_perfect());
    }

    #[test]
    fn tau_b_errors() {
        assert!(matches!(
            kendall_tau_b(&[1, 1, 1], &[0, 1, 2]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(kendall_tau_b(&[1], &[1]), Err(Error::Domain(_))));
        assert!(matches!(
            kendall_tau_b(&[1, 2], &[1]),
            Err(Error::Domain(_))
        ));
    }

    /// Spherical law of cosines, an independent route to the same distance.
    fn cosine_law_km(a: (f64, f64), b: (f64, f64)) -> f64 {
        let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
        let dl = (b.1 - a.1).to_radians();
        let c = (p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos()).clamp(-1.0, 1.0);
        EARTH_RADIUS_KM * c.acos()
    }

    #[test]
    fn haversine_examples() {
        let a = (-37.8136, 144.9631);
        assert_eq!(haversine_km(a, a), 0.0);
        let anti = haversine_km((0.0, 0.0), (0.0, 180.0));
        assert!((anti - 20015.1).abs() < 0.1);
        let b = (-37.8183, 144.9671);
        let d = haversine_km(a, b);
        // frozen from the cosine-law oracle
        assert!((d - cosine_law_km(a, b)).abs() < 1e-3);
        assert!((d - 0.629_752).abs() < 1e-3, "{d}");
    }
}
