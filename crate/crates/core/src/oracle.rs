//! Brute-force perturbation search and checks of the closed-form Hellinger
//! bounds for single-edit extreme cases.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disruption::Detectors;
use crate::error::{Error, Result};
use crate::ingest::CorpusProfile;
use crate::metrics::{hellinger, LevelHistogram};
use crate::model::{CandidatePool, IntentSet, Itinerary, Level, Operation, Perturbation};
use crate::record::PerturbationRecord;

/// Checks that `op` can be applied to `itinerary` with `pool`.
pub fn check_feasible(itinerary: &Itinerary, pool: &CandidatePool, op: Operation) -> Result<()> {
    let fail = |reason: String| {
        Err(Error::Feasibility {
            op: op.to_string(),
            reason,
        })
    };
    match op {
        Operation::Delete if itinerary.len() < 3 => {
            fail(format!("DELETE needs |i| >= 3, got {}", itinerary.len()))
        }
        Operation::Add | Operation::Replace if pool.is_empty() => {
            fail("candidate pool is empty".into())
        }
        Operation::Replace if itinerary.is_empty() => fail("itinerary is empty".into()),
        _ => Ok(()),
    }
}

/// Size of the draft space for `op`.
pub fn draft_count(itinerary: &Itinerary, pool: &CandidatePool, op: Operation) -> usize {
    match op {
        Operation::Delete => itinerary.len(),
        Operation::Replace => itinerary.len() * pool.len(),
        Operation::Add => (itinerary.len() + 1) * pool.len(),
    }
}

/// The `index`-th draft in position-major, then pool-order enumeration.
fn draft_at(
    itinerary: &Itinerary,
    pool: &CandidatePool,
    op: Operation,
    index: usize,
) -> Perturbation {
    let built = match op {
        Operation::Delete => Perturbation::delete(itinerary, index),
        Operation::Replace | Operation::Add => {
            let (position, k) = (index / pool.len(), index % pool.len());
            Perturbation::apply(itinerary, op, position, Some(pool.pois[k].clone()))
        }
    };
    built.expect("drafts are in range and drawn from the candidate pool")
}

/// Every single-edit draft of `op`, at most `limit` of them.
pub fn enumerate_perturbations<'a>(
    itinerary: &'a Itinerary,
    pool: &'a CandidatePool,
    op: Operation,
    limit: usize,
) -> Result<impl Iterator<Item = Perturbation> + 'a> {
    check_feasible(itinerary, pool, op)?;
    let total = draft_count(itinerary, pool, op);
    Ok((0..total.min(limit)).map(move |idx| draft_at(itinerary, pool, op, idx)))
}

/// Finds a draft that disrupts every intent in `intents`, scanning the
/// draft space in an order shuffled by `seed`. Returns `None` when no draft
/// qualifies.
#[allow(clippy::too_many_arguments)]
pub fn find_satisfying(
    corpus: &str,
    itinerary: &Itinerary,
    pool: &CandidatePool,
    op: Operation,
    intents: IntentSet,
    profile: &CorpusProfile,
    theta: f64,
    seed: u64,
) -> Result<Option<PerturbationRecord>> {
    check_feasible(itinerary, pool, op)?;
    let mut order: Vec<usize> = (0..draft_count(itinerary, pool, op)).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let detectors = Detectors::new(profile, theta);
    let found = order.par_iter().find_map_first(|&idx| {
        let draft = draft_at(itinerary, pool, op, idx);
        match detectors.assess(&draft.original, &draft.perturbed) {
            Ok(assessment) if assessment.satisfies(intents) => Some(Ok((draft, assessment))),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        }
    });
    found.transpose().map(|hit| {
        hit.map(|(perturbation, assessment)| PerturbationRecord {
            corpus: corpus.to_string(),
            perturbation,
            intents,
            assessment,
        })
    })
}

/// Extreme-case histograms `(P, Q)` for a single edit.
///
/// The three components map onto levels as (high, medium, low): the
/// removed/added category sits in the LOW slot, as in the popularity
/// example where the lone low-popularity POI is deleted.
pub fn lemma_case(op: Operation, n: u64, a: u64) -> Result<(LevelHistogram, LevelHistogram)> {
    let bad = || {
        Err(Error::Parameter(format!(
            "lemma case {op} out of range: n={n}, a={a}"
        )))
    };
    // (high, medium, low) counts
    let (p, q) = match op {
        Operation::Delete => {
            if n < 2 || a > n - 1 {
                return bad();
            }
            ((a, n - a - 1, 1), (a, n - a - 1, 0))
        }
        Operation::Add => {
            if n < 1 || a > n {
                return bad();
            }
            ((a, n - a, 0), (a, n - a, 1))
        }
        Operation::Replace => {
            if n < 2 || a < 1 || a > n {
                return bad();
            }
            ((a, n - a, 0), (a - 1, n - a, 1))
        }
    };
    let hist = |(h, m, l): (u64, u64, u64)| LevelHistogram::from_counts(l, m, h);
    Ok((hist(p)?, hist(q)?))
}

/// Components in the (high, medium, low) order used by [`lemma_case`].
pub fn lemma_vector(h: &LevelHistogram) -> [num_rational::Ratio<u64>; 3] {
    [Level::High, Level::Medium, Level::Low].map(|l| h.fraction(l))
}

/// Closed-form Hellinger distance of [`lemma_case`].
pub fn lemma_closed_form(op: Operation, n: u64, a: u64) -> f64 {
    let (n, a) = (n as f64, a as f64);
    match op {
        Operation::Delete => (1.0 - ((n - 1.0) / n).sqrt()).sqrt(),
        Operation::Add => (1.0 - (n / (n + 1.0)).sqrt()).sqrt(),
        Operation::Replace => ((a - (a * (a - 1.0)).sqrt()) / n).sqrt(),
    }
}

/// Lower bound on the Hellinger distance of every [`lemma_case`] with length `n`.
pub fn lemma_lower_bound(op: Operation, n: u64) -> f64 {
    let n = n as f64;
    match op {
        Operation::Delete | Operation::Replace => 1.0 / (2.0 * n).sqrt(),
        Operation::Add => 1.0 / (2.0 * (n + 1.0)).sqrt(),
    }
}

fn admissible(op: Operation, n: u64) -> std::ops::RangeInclusive<u64> {
    match op {
        Operation::Delete => 0..=n - 1,
        Operation::Add => 0..=n,
        Operation::Replace => 1..=n,
    }
}

fn min_n(op: Operation) -> u64 {
    match op {
        Operation::Add => 1,
        Operation::Delete | Operation::Replace => 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaViolation {
    pub n: u64,
    pub a: u64,
    pub numeric: f64,
    pub closed_form: f64,
    pub bound: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub op: Operation,
    pub n_max: u64,
    pub theta: f64,
    pub tolerance: f64,
    pub cases: u64,
    pub max_abs_deviation: f64,
    /// Smallest `H − bound` over all cases.
    pub min_slack: f64,
    /// Largest `n` whose lower bound is still at least θ.
    pub bound_coverage_n: u64,
    /// Largest `n` such that every case up to `n` has `H > θ`.
    pub empirical_coverage_n: u64,
    pub violations: Vec<LemmaViolation>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const LEMMA_TOLERANCE: f64 = 1e-12;

/// Checks numeric vs closed-form Hellinger and the lower bound for every
/// admissible `(n, a)` with `n ≤ n_max`.
pub fn verify_lemma_bounds(op: Operation, n_max: u64, theta: f64) -> Result<LemmaReport> {
    if n_max < 2 {
        return Err(Error::Parameter(format!("n_max must be >= 2, got {n_max}")));
    }
    let mut report = LemmaReport {
        op,
        n_max,
        theta,
        tolerance: LEMMA_TOLERANCE,
        cases: 0,
        max_abs_deviation: 0.0,
        min_slack: f64::INFINITY,
        bound_coverage_n: 0,
        empirical_coverage_n: 0,
        violations: Vec::new(),
    };
    let mut empirical_open = true;
    for n in min_n(op)..=n_max {
        let bound = lemma_lower_bound(op, n);
        if bound >= theta {
            report.bound_coverage_n = n;
        }
        let mut all_above = true;
        for a in admissible(op, n) {
            let (p, q) = lemma_case(op, n, a)?;
            let numeric = hellinger(&p, &q);
            let closed = lemma_closed_form(op, n, a);
            let deviation = (numeric - closed).abs();
            report.cases += 1;
            report.max_abs_deviation = report.max_abs_deviation.max(deviation);
            report.min_slack = report.min_slack.min(numeric - bound);
            all_above &= numeric > theta;
            let reason = if deviation > LEMMA_TOLERANCE {
                Some("closed form mismatch")
            } else if numeric < bound {
                Some("below lower bound")
            } else {
                None
            };
            if let Some(reason) = reason {
                report.violations.push(LemmaViolation {
                    n,
                    a,
                    numeric,
                    closed_form: closed,
                    bound,
                    reason: reason.into(),
                });
            }
        }
        if empirical_open && all_above {
            report.empirical_coverage_n = n;
        } else {
            empirical_open = false;
        }
    }
    Ok(report)
}
