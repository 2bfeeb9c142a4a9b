//! Modification benchmark: task construction, splits, Mod/APR scoring,
//! example retrieval and Borda aggregation.

pub mod borda;
pub mod harness;
pub mod retrieval;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disruption::Detectors;
use crate::error::{Error, Result};
use crate::ingest::CorpusProfile;
use crate::model::{Intent, IntentSet, Itinerary, Operation, Perturbation, Poi, PoiCatalog, PoiId};
use crate::record::PerturbationRecord;

pub use borda::{borda_aggregate, BordaTable, ScoreCell};
pub use harness::{run_benchmark, BenchSetting};
pub use retrieval::{retrieve_examples, Embedder, HashEmbedder, RagStrategy};

pub const NEGATIVES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Default for Splits<T> {
    fn default() -> Self {
        Splits {
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
        }
    }
}

/// Seeded shuffle, then `floor(n * r / sum)` items to valid and test and the
/// remainder to train.
pub fn split_dataset<T: Clone>(
    items: &[T],
    ratios: (usize, usize, usize),
    seed: u64,
) -> Result<Splits<T>> {
    if items.is_empty() {
        return Err(Error::Parameter("cannot split an empty dataset".into()));
    }
    let total = ratios.0 + ratios.1 + ratios.2;
    if total == 0 {
        return Err(Error::Parameter("split ratios sum to zero".into()));
    }
    let n = items.len();
    if n < 10 {
        log::warn!("splitting only {n} records; some splits may be empty");
    }
    let n_valid = n * ratios.1 / total;
    let n_test = n * ratios.2 / total;
    let n_train = n - n_valid - n_test;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick =
        |range: std::ops::Range<usize>| order[range].iter().map(|&i| items[i].clone()).collect();
    Ok(Splits {
        train: pick(0..n_train),
        valid: pick(n_train..n_train + n_valid),
        test: pick(n_train + n_valid..n),
    })
}

/// The edit that turns i* back into i.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub op: Operation,
    pub position: usize,
    pub poi: Option<PoiId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTask {
    pub id: String,
    pub corpus: String,
    pub split: Split,
    /// The modification operation, inverse of the perturbation that made i*.
    pub op: Operation,
    pub intents: IntentSet,
    pub hint: String,
    pub need_to_modify: Itinerary,
    /// Four negatives and the ground truth, shuffled. `None` for DELETE.
    pub candidates: Option<Vec<Poi>>,
    pub ground_truth: Itinerary,
    pub action: Action,
}

pub fn hint_for(intent: Intent) -> &'static str {
    match intent {
        Intent::Popularity => "modify the popularity distribution",
        Intent::Distance => "modify the spatial-distance distribution",
        Intent::Diversity => "modify the category diversity",
    }
}

pub fn hint_text(intents: IntentSet) -> String {
    intents
        .iter()
        .map(hint_for)
        .collect::<Vec<_>>()
        .join(" and ")
}

pub fn task_id(record: &PerturbationRecord) -> String {
    format!(
        "{}:{}:{}",
        record.corpus,
        record.perturbation.op.as_str(),
        record.perturbation.original.seq_id
    )
}

/// Inverts a record into a modification task.
pub fn build_task(
    record: &PerturbationRecord,
    catalog: &PoiCatalog,
    split: Split,
    seed: u64,
) -> Result<BenchTask> {
    let p = &record.perturbation;
    let skip = |reason: String| Error::Feasibility {
        op: p.op.inverse().to_string(),
        reason: format!("task {} skipped: {reason}", task_id(record)),
    };
    let action = match p.op {
        Operation::Add => Action {
            op: Operation::Delete,
            position: p.position,
            poi: None,
        },
        Operation::Delete | Operation::Replace => Action {
            op: p.op.inverse(),
            position: p.position,
            poi: p.poi_out.as_ref().map(|x| x.id.clone()),
        },
    };
    let restore = Perturbation::apply(
        &p.perturbed,
        action.op,
        action.position,
        action.poi.as_ref().and_then(|id| catalog.get(id).cloned()),
    )
    .map_err(|e| skip(e.to_string()))?;
    if restore.perturbed.ids() != p.original.ids() {
        return Err(skip(
            "ground-truth action does not restore the original".into(),
        ));
    }

    let candidates = match &action.poi {
        None => None,
        Some(truth) => {
            let used: BTreeSet<&PoiId> = p.perturbed.pois.iter().map(|x| &x.id).collect();
            let eligible: Vec<&Poi> = catalog
                .values()
                .filter(|x| &x.id != truth && !used.contains(&x.id))
                .collect();
            if eligible.len() < NEGATIVES {
                return Err(skip(format!(
                    "only {} negatives available, need {NEGATIVES}",
                    eligible.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<Poi> =
                rand::seq::index::sample(&mut rng, eligible.len(), NEGATIVES)
                    .into_iter()
                    .map(|i| eligible[i].clone())
                    .collect();
            picked.push(catalog[truth].clone());
            picked.shuffle(&mut rng);
            Some(picked)
        }
    };
    Ok(BenchTask {
        id: task_id(record),
        corpus: record.corpus.clone(),
        split,
        op: action.op,
        intents: record.intents,
        hint: hint_text(record.intents),
        need_to_modify: p.perturbed.clone(),
        candidates,
        ground_truth: p.original.clone(),
        action,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskSet {
    pub tasks: Splits<BenchTask>,
    /// (task id, reason) for records that could not become tasks.
    pub skipped: Vec<(String, String)>,
}

/// Splits records 7:1:2 and builds one task per record. Each task's
/// negatives are drawn with a seed derived from `seed` and its position.
pub fn build_tasks(
    records: &[PerturbationRecord],
    catalog: &PoiCatalog,
    seed: u64,
) -> Result<TaskSet> {
    let splits = split_dataset(records, (7, 1, 2), seed)?;
    let mut out = TaskSet::default();
    for (split, part) in [
        (Split::Train, &splits.train),
        (Split::Valid, &splits.valid),
        (Split::Test, &splits.test),
    ] {
        for (k, record) in part.iter().enumerate() {
            let task_seed = crate::pipeline::stream_seed(seed, k as u64, split as u64 + 16);
            match build_task(record, catalog, split, task_seed) {
                Ok(task) => match split {
                    Split::Train => out.tasks.train.push(task),
                    Split::Valid => out.tasks.valid.push(task),
                    Split::Test => out.tasks.test.push(task),
                },
                Err(e) => out.skipped.push((task_id(record), e.to_string())),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScoreReason {
    Ok,
    Mismatch,
    Parse,
    Structural,
    Missing,
    Transport,
}

/// Exact-match score: 1 iff the answer equals the ground-truth id sequence.
pub fn score_mod(task: &BenchTask, answer: Option<&[PoiId]>) -> (u8, ScoreReason) {
    match answer {
        None => (0, ScoreReason::Parse),
        Some(ids) if ids == task.ground_truth.ids().as_slice() => (1, ScoreReason::Ok),
        Some(_) => (0, ScoreReason::Mismatch),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AprScore {
    pub value: u8,
    pub hinted_ok: bool,
    pub invariant_ok: bool,
    pub reason: ScoreReason,
}

impl AprScore {
    fn fail(reason: ScoreReason) -> Self {
        AprScore {
            value: 0,
            hinted_ok: false,
            invariant_ok: false,
            reason,
        }
    }
}

/// All-pass score: every hinted aspect disrupted between i* and the answer,
/// every other aspect invariant.
pub fn score_apr(
    task: &BenchTask,
    answer: Option<&[PoiId]>,
    catalog: &PoiCatalog,
    profile: &CorpusProfile,
    theta: f64,
) -> AprScore {
    let Some(ids) = answer else {
        return AprScore::fail(ScoreReason::Parse);
    };
    let expected_len = task.need_to_modify.len() as isize + task.op.length_delta();
    if ids.len() as isize != expected_len {
        return AprScore::fail(ScoreReason::Structural);
    }
    let Ok(after) = Itinerary::resolve(
        &task.ground_truth.seq_id,
        &task.ground_truth.user_id,
        ids,
        catalog,
    ) else {
        return AprScore::fail(ScoreReason::Structural);
    };
    let Ok(assessment) = Detectors::new(profile, theta).assess(&task.need_to_modify, &after) else {
        return AprScore::fail(ScoreReason::Structural);
    };
    let hinted_ok = task.intents.iter().all(|i| assessment.disrupted(i));
    let invariant_ok = Intent::ALL
        .iter()
        .filter(|i| !task.intents.contains(**i))
        .all(|i| !assessment.disrupted(*i));
    let pass = hinted_ok && invariant_ok;
    AprScore {
        value: pass as u8,
        hinted_ok,
        invariant_ok,
        reason: if pass {
            ScoreReason::Ok
        } else {
            ScoreReason::Mismatch
        },
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::disruption::tests::toy_profile;
    use crate::model::candidate_pool;
    use crate::oracle::find_satisfying;

    /// Ten POIs on a line, mixed levels and categories; itinerary uses p0..p4.
    pub(crate) fn catalog() -> PoiCatalog {
        let freqs = [1, 5, 100, 1, 5, 100, 1, 5, 100, 5];
        let cats = [
            "museum", "park", "museum", "beach", "park", "cafe", "museum", "park", "beach", "cafe",
        ];
        (0..10)
            .map(|k| {
                let p = Poi::new(
                    format!("p{k}"),
                    cats[k],
                    0.0,
                    0.004 * (k * k) as f64,
                    freqs[k],
                )
                .unwrap();
                (p.id.clone(), p)
            })
            .collect()
    }

    pub(crate) fn record(op: Operation, intents: IntentSet, seed: u64) -> PerturbationRecord {
        let cat = catalog();
        let it = Itinerary::resolve(
            "s1",
            "u1",
            &["p0", "p1", "p2", "p3", "p4"].map(PoiId::from),
            &cat,
        )
        .unwrap();
        let pool = candidate_pool(&cat, &it).unwrap();
        find_satisfying("toy", &it, &pool, op, intents, &toy_profile(), 0.1, seed)
            .unwrap()
            .expect("toy catalog admits a satisfying draft")
    }

    #[test]
    fn split_sizes() {
        let ten: Vec<u32> = (0..10).collect();
        let s = split_dataset(&ten, (7, 1, 2), 0).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (7, 1, 2));
        let eleven: Vec<u32> = (0..11).collect();
        let s = split_dataset(&eleven, (7, 1, 2), 0).unwrap();
        assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (8, 1, 2));
        assert_eq!(s, split_dataset(&eleven, (7, 1, 2), 0).unwrap());
        let mut all: Vec<u32> = s
            .train
            .iter()
            .chain(&s.valid)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, eleven);
        let tiny = split_dataset(&[1u8, 2], (7, 1, 2), 0).unwrap();
        assert_eq!(tiny.train.len(), 2);
        assert!(split_dataset::<u8>(&[], (7, 1, 2), 0).is_err());
    }

    #[test]
    fn delete_record_becomes_add_task() {
        let rec = record(Operation::Delete, IntentSet::single(Intent::Popularity), 1);
        let task = build_task(&rec, &catalog(), Split::Test, 7).unwrap();
        assert_eq!(task.op, Operation::Add);
        let cands = task.candidates.as_ref().unwrap();
        assert_eq!(cands.len(), 5);
        let truth = task.action.poi.clone().unwrap();
        assert_eq!(cands.iter().filter(|p| p.id == truth).count(), 1);
        assert!(cands.iter().all(|c| !task.need_to_modify.contains(&c.id)));
        assert_eq!(task, build_task(&rec, &catalog(), Split::Test, 7).unwrap());
        assert_eq!(task.hint, "modify the popularity distribution");
    }

    #[test]
    fn add_record_becomes_delete_task_without_candidates() {
        let rec = record(Operation::Add, IntentSet::single(Intent::Diversity), 2);
        let task = build_task(&rec, &catalog(), Split::Train, 0).unwrap();
        assert_eq!(task.op, Operation::Delete);
        assert!(task.candidates.is_none());
    }

    #[test]
    fn small_pool_skips() {
        let rec = record(Operation::Replace, IntentSet::single(Intent::Diversity), 0);
        let mut tiny = catalog();
        tiny.retain(|id, _| {
            ["p0", "p1", "p2", "p3", "p4"].contains(&id.as_str())
                || rec.perturbation.target().map(|t| &t.id) == Some(id)
                || rec.perturbation.poi_out.as_ref().map(|t| &t.id) == Some(id)
        });
        assert!(matches!(
            build_task(&rec, &tiny, Split::Test, 0),
            Err(Error::Feasibility { .. })
        ));
    }

    #[test]
    fn mod_scoring() {
        let rec = record(Operation::Delete, IntentSet::single(Intent::Popularity), 1);
        let task = build_task(&rec, &catalog(), Split::Test, 7).unwrap();
        let truth = task.ground_truth.ids();
        assert_eq!(score_mod(&task, Some(&truth)), (1, ScoreReason::Ok));
        let mut swapped = truth.clone();
        swapped.swap(0, 1);
        assert_eq!(score_mod(&task, Some(&swapped)), (0, ScoreReason::Mismatch));
        assert_eq!(score_mod(&task, None), (0, ScoreReason::Parse));
    }

    #[test]
    fn apr_scoring() {
        let cat = catalog();
        let profile = toy_profile();
        let rec = record(Operation::Replace, IntentSet::single(Intent::Diversity), 4);
        let task = build_task(&rec, &cat, Split::Test, 0).unwrap();
        let unchanged = task.need_to_modify.ids();
        let s = score_apr(&task, Some(&unchanged), &cat, &profile, 0.1);
        assert_eq!(s.value, 0);
        assert!(!s.hinted_ok);
        let truth = task.ground_truth.ids();
        let s = score_apr(&task, Some(&truth), &cat, &profile, 0.1);
        assert!(s.hinted_ok);
        let short = &unchanged[..2];
        assert_eq!(
            score_apr(&task, Some(short), &cat, &profile, 0.1).reason,
            ScoreReason::Structural
        );
    }
}
