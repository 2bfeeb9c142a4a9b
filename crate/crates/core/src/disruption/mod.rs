//! Intent verification: per-aspect disruption detectors and the
//! function-calling toolbox that exposes them to a model.
//!
//! Popularity and distance use the hybrid rule "H > θ or τ_b < 1" over
//! level labels; diversity compares the exact unique-category ratio.

pub mod toolbox;

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CorpusProfile;
use crate::metrics::{category_diversity, hellinger, kendall_tau_b, ratio_f64, LevelHistogram};
use crate::model::{Intent, IntentSet, Itinerary, Level, Perturbation, PoiId};

pub const DEFAULT_THETA: f64 = 0.1;

/// Ordinal used for the unmatched side of an aligned pair; below LOW.
pub const SENTINEL: i8 = -1;

/// Outcome of one disruption detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionVerdict {
    pub aspect: Intent,
    pub disrupted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diversity_before: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diversity_after: Option<f64>,
    pub threshold_used: f64,
}

/// Categories in visit order, trimmed, case preserved.
pub fn categories_from_itinerary(itinerary: &Itinerary) -> Vec<String> {
    itinerary
        .pois
        .iter()
        .map(|p| p.category.trim().to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiversityChange {
    pub before: Ratio<u64>,
    pub after: Ratio<u64>,
    pub disrupted: bool,
}

pub fn cd_from_categories<S: AsRef<str>>(
    original: &[S],
    perturbed: &[S],
) -> Result<DiversityChange> {
    let before = category_diversity(original)?;
    let after = category_diversity(perturbed)?;
    Ok(DiversityChange {
        before,
        after,
        disrupted: before != after,
    })
}

/// Per-segment kilometres and levels of one itinerary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segments {
    pub km: Vec<f64>,
    pub levels: Vec<Level>,
    /// `(from, to)` POI ids, used as alignment keys.
    #[serde(skip)]
    pub keys: Vec<(PoiId, PoiId)>,
}

fn segments(itinerary: &Itinerary, profile: &CorpusProfile) -> Result<Segments> {
    if itinerary.len() < 2 {
        return Err(Error::Domain(format!(
            "itinerary {} has fewer than 2 POIs; no segments",
            itinerary.seq_id
        )));
    }
    let km: Vec<f64> = itinerary
        .pois
        .windows(2)
        .map(|w| crate::metrics::haversine_km(w[0].coords(), w[1].coords()))
        .collect();
    let levels = km.iter().map(|&d| profile.distance_level(d)).collect();
    let keys = itinerary
        .pois
        .windows(2)
        .map(|w| (w[0].id.clone(), w[1].id.clone()))
        .collect();
    Ok(Segments { km, levels, keys })
}

/// Segment distances and levels for both itineraries.
pub fn geo_distance_segments(
    original: &Itinerary,
    perturbed: &Itinerary,
    profile: &CorpusProfile,
) -> Result<(Segments, Segments)> {
    Ok((segments(original, profile)?, segments(perturbed, profile)?))
}

pub fn popularity_labels(itinerary: &Itinerary, profile: &CorpusProfile) -> Vec<Level> {
    itinerary
        .pois
        .iter()
        .map(|p| profile.popularity_level(p))
        .collect()
}

/// How label sequences of different length are paired for τ_b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentPolicy {
    /// Common prefix and suffix are matched by identity; the differing
    /// middle is paired positionally and any leftover element is paired
    /// with [`SENTINEL`] on the other side.
    #[default]
    Union,
    /// Position-wise pairing truncated to the shorter sequence.
    Prefix,
    /// Only identity-matched prefix and suffix elements are kept.
    Shared,
}

/// Aligns two label sequences into equal-length ordinal vectors.
pub fn align_label_sequences<K: PartialEq>(
    orig: &[Level],
    pert: &[Level],
    orig_keys: &[K],
    pert_keys: &[K],
    policy: AlignmentPolicy,
) -> Result<(Vec<i8>, Vec<i8>)> {
    if orig.len() != orig_keys.len() || pert.len() != pert_keys.len() {
        return Err(Error::Domain(
            "alignment keys must be parallel to the label lists".into(),
        ));
    }
    let (n, m) = (orig.len(), pert.len());
    if policy == AlignmentPolicy::Prefix {
        let k = n.min(m);
        return Ok((
            orig[..k].iter().map(|l| l.ordinal()).collect(),
            pert[..k].iter().map(|l| l.ordinal()).collect(),
        ));
    }
    let prefix = orig_keys
        .iter()
        .zip(pert_keys)
        .take_while(|(a, b)| a == b)
        .count();
    let max_suffix = n.min(m) - prefix;
    let suffix = orig_keys[prefix..]
        .iter()
        .rev()
        .zip(pert_keys[prefix..].iter().rev())
        .take(max_suffix)
        .take_while(|(a, b)| a == b)
        .count();

    let mut x = Vec::with_capacity(n.max(m));
    let mut y = Vec::with_capacity(n.max(m));
    for k in 0..prefix {
        x.push(orig[k].ordinal());
        y.push(pert[k].ordinal());
    }
    if policy == AlignmentPolicy::Union {
        let mid_orig = &orig[prefix..n - suffix];
        let mid_pert = &pert[prefix..m - suffix];
        for k in 0..mid_orig.len().max(mid_pert.len()) {
            x.push(mid_orig.get(k).map_or(SENTINEL, |l| l.ordinal()));
            y.push(mid_pert.get(k).map_or(SENTINEL, |l| l.ordinal()));
        }
    }
    for k in 0..suffix {
        x.push(orig[n - suffix + k].ordinal());
        y.push(pert[m - suffix + k].ordinal());
    }
    Ok((x, y))
}

/// Hellinger shift plus τ_b rank stability over two label sequences.
///
/// An undefined τ_b (an all-tied side) leaves the decision to the
/// Hellinger clause.
#[allow(clippy::too_many_arguments)]
pub fn stats_from_categories<K: PartialEq>(
    aspect: Intent,
    orig: &[Level],
    pert: &[Level],
    orig_keys: &[K],
    pert_keys: &[K],
    theta: f64,
    policy: AlignmentPolicy,
) -> Result<DisruptionVerdict> {
    if theta.is_nan() || theta <= 0.0 {
        return Err(Error::Parameter(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let h = hellinger(
        &LevelHistogram::from_labels(orig)?,
        &LevelHistogram::from_labels(pert)?,
    );
    let (x, y) = align_label_sequences(orig, pert, orig_keys, pert_keys, policy)?;
    let tau = match kendall_tau_b(&x, &y) {
        Ok(t) => Some(t),
        Err(Error::UndefinedCorrelation(_)) | Err(Error::Domain(_)) => None,
        Err(e) => return Err(e),
    };
    let rank_shift = tau.is_some_and(|t| !t.is_perfect());
    Ok(DisruptionVerdict {
        aspect,
        disrupted: h > theta || rank_shift,
        h_value: Some(h),
        tau_b: tau.map(|t| t.value()),
        diversity_before: None,
        diversity_after: None,
        threshold_used: theta,
    })
}

/// Detector settings shared by every aspect.
#[derive(Debug, Clone, Copy)]
pub struct Detectors<'a> {
    pub profile: &'a CorpusProfile,
    pub theta: f64,
    pub policy: AlignmentPolicy,
}

impl<'a> Detectors<'a> {
    pub fn new(profile: &'a CorpusProfile, theta: f64) -> Self {
        Detectors {
            profile,
            theta,
            policy: AlignmentPolicy::Union,
        }
    }

    pub fn with_policy(mut self, policy: AlignmentPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn popularity(&self, before: &Itinerary, after: &Itinerary) -> Result<DisruptionVerdict> {
        stats_from_categories(
            Intent::Popularity,
            &popularity_labels(before, self.profile),
            &popularity_labels(after, self.profile),
            &before.ids(),
            &after.ids(),
            self.theta,
            self.policy,
        )
    }

    pub fn distance(&self, before: &Itinerary, after: &Itinerary) -> Result<DisruptionVerdict> {
        let (a, b) = geo_distance_segments(before, after, self.profile)?;
        stats_from_categories(
            Intent::Distance,
            &a.levels,
            &b.levels,
            &a.keys,
            &b.keys,
            self.theta,
            self.policy,
        )
    }

    pub fn diversity(&self, before: &Itinerary, after: &Itinerary) -> Result<DisruptionVerdict> {
        let change = cd_from_categories(
            &categories_from_itinerary(before),
            &categories_from_itinerary(after),
        )?;
        Ok(DisruptionVerdict {
            aspect: Intent::Diversity,
            disrupted: change.disrupted,
            h_value: None,
            tau_b: None,
            diversity_before: Some(ratio_f64(change.before)),
            diversity_after: Some(ratio_f64(change.after)),
            threshold_used: self.theta,
        })
    }

    pub fn aspect(
        &self,
        aspect: Intent,
        before: &Itinerary,
        after: &Itinerary,
    ) -> Result<DisruptionVerdict> {
        match aspect {
            Intent::Popularity => self.popularity(before, after),
            Intent::Distance => self.distance(before, after),
            Intent::Diversity => self.diversity(before, after),
        }
    }

    /// Runs all three detectors.
    pub fn assess(&self, before: &Itinerary, after: &Itinerary) -> Result<Assessment> {
        let verdicts = Intent::ALL
            .into_iter()
            .map(|aspect| Ok((aspect, self.aspect(aspect, before, after)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Assessment { verdicts })
    }
}

/// Verdicts for all three aspects of one itinerary pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub verdicts: BTreeMap<Intent, DisruptionVerdict>,
}

impl Assessment {
    pub fn disrupted(&self, aspect: Intent) -> bool {
        self.verdicts.get(&aspect).is_some_and(|v| v.disrupted)
    }

    /// True iff every intent in `intents` is disrupted.
    pub fn satisfies(&self, intents: IntentSet) -> bool {
        intents.iter().all(|i| self.disrupted(i))
    }

    pub fn flags(&self) -> BTreeMap<Intent, bool> {
        self.verdicts
            .iter()
            .map(|(k, v)| (*k, v.disrupted))
            .collect()
    }
}

/// Evaluates all aspects of a perturbation; satisfaction is judged on `intents`.
pub fn verify_intents(
    perturbation: &Perturbation,
    intents: IntentSet,
    profile: &CorpusProfile,
    theta: f64,
) -> Result<(Assessment, bool)> {
    let assessment =
        Detectors::new(profile, theta).assess(&perturbation.original, &perturbation.perturbed)?;
    let ok = assessment.satisfies(intents);
    Ok((assessment, ok))
}

/// `true` for every aspect the detectors consider unchanged.
pub fn aspect_invariance(
    before: &Itinerary,
    after: &Itinerary,
    profile: &CorpusProfile,
    theta: f64,
) -> Result<BTreeMap<Intent, bool>> {
    let assessment = Detectors::new(profile, theta).assess(before, after)?;
    Ok(assessment
        .verdicts
        .iter()
        .map(|(k, v)| (*k, !v.disrupted))
        .collect())
}
