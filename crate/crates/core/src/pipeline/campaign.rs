//! Dataset generation over a whole corpus for one operation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::client::{ModelClient, Usage};
use super::memory::{record_memory, MemoryLog, DEFAULT_MEMORY_WINDOW};
use super::prompt::{PromptOptions, PromptTemplate, DEFAULT_MAX_CANDIDATES};
use super::runner::{
    run_perturbation, Limits, RejectReason, Rejection, RunContext, RunOutcome, RunRequest,
    TranscriptEvent,
};
use super::{sample_intents, stream_seed};
use crate::disruption::DEFAULT_THETA;
use crate::error::{Error, Result};
use crate::ingest::{write_json, write_jsonl, Corpus};
use crate::model::{candidate_pool, IntentSet, Operation};
use crate::oracle::{check_feasible, find_satisfying};
use crate::record::PerturbationRecord;

const INTENT_SALT: u64 = 0x1;
const SEARCH_SALT: u64 = 0x2;
const PROMPT_SALT: u64 = 0x3;

/// Intents requested for the `index`-th itinerary of a campaign.
pub fn campaign_intents(seed: u64, index: usize) -> IntentSet {
    sample_intents(stream_seed(seed, index as u64, INTENT_SALT))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignConfig {
    pub op: Operation,
    pub seed: u64,
    pub theta: f64,
    pub limits: Limits,
    pub max_candidates: usize,
    pub memory_window: usize,
    /// Only the first `max_itineraries` itineraries are processed.
    pub max_itineraries: Option<usize>,
}

impl CampaignConfig {
    pub fn new(op: Operation, seed: u64) -> Self {
        CampaignConfig {
            op,
            seed,
            theta: DEFAULT_THETA,
            limits: Limits::default(),
            max_candidates: DEFAULT_MAX_CANDIDATES,
            memory_window: DEFAULT_MEMORY_WINDOW,
            max_itineraries: None,
        }
    }
}

pub enum Backend<'a> {
    Oracle,
    Model(&'a mut dyn ModelClient),
}

impl Backend<'_> {
    fn name(&self) -> &'static str {
        match self {
            Backend::Oracle => "oracle",
            Backend::Model(_) => "model",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub total_secs: f64,
    pub mean_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub corpus: String,
    pub op: Operation,
    pub backend: String,
    pub seed: u64,
    pub theta: f64,
    pub attempted: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
    /// accepted / (accepted + intent failures); `None` when neither occurred.
    pub pert_acc: Option<f64>,
    /// Distinct target POIs / accepted records.
    pub poi_div: Option<f64>,
    pub positions: BTreeMap<usize, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<Latency>,
}

impl Diagnostics {
    pub fn from_results(
        corpus: &str,
        config: &CampaignConfig,
        backend: &str,
        records: &[PerturbationRecord],
        rejections: &[Rejection],
    ) -> Self {
        let mut rejected = BTreeMap::new();
        for r in rejections {
            *rejected.entry(r.reason).or_insert(0) += 1;
        }
        let intent_failures = rejected.get(&RejectReason::Intent).copied().unwrap_or(0);
        let accepted = records.len();
        let pert_acc = (accepted + intent_failures > 0)
            .then(|| accepted as f64 / (accepted + intent_failures) as f64);
        let targets: BTreeSet<_> = records
            .iter()
            .filter_map(|r| r.perturbation.target().map(|p| p.id.clone()))
            .collect();
        let poi_div = (accepted > 0).then(|| targets.len() as f64 / accepted as f64);
        let mut positions = BTreeMap::new();
        for r in records {
            *positions.entry(r.perturbation.position).or_insert(0) += 1;
        }
        Diagnostics {
            corpus: corpus.to_string(),
            op: config.op,
            backend: backend.to_string(),
            seed: config.seed,
            theta: config.theta,
            attempted: accepted + rejections.len(),
            accepted,
            rejected,
            pert_acc,
            poi_div,
            positions,
            usage: None,
            latency: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutput {
    pub records: Vec<PerturbationRecord>,
    pub rejections: Vec<Rejection>,
    pub diagnostics: Diagnostics,
    pub transcript: Vec<TranscriptEvent>,
    pub memory: MemoryLog,
}

/// Paths of the files written next to a campaign's dataset file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignFiles {
    pub dataset: PathBuf,
    pub diagnostics: PathBuf,
    pub rejects: PathBuf,
    pub positions: PathBuf,
    pub transcript: PathBuf,
    pub memory: PathBuf,
}

impl CampaignFiles {
    pub fn beside(dataset: &Path) -> Self {
        let stem = dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        let sibling = |suffix: &str| dataset.with_file_name(format!("{stem}.{suffix}"));
        CampaignFiles {
            dataset: dataset.to_path_buf(),
            diagnostics: sibling("diagnostics.json"),
            rejects: sibling("rejects.jsonl"),
            positions: sibling("positions.csv"),
            transcript: sibling("transcript.jsonl"),
            memory: sibling("memory.json"),
        }
    }
}

impl CampaignOutput {
    /// Writes the dataset JSONL and its companion files.
    pub fn write(&self, dataset: &Path) -> Result<CampaignFiles> {
        let files = CampaignFiles::beside(dataset);
        if let Some(dir) = dataset.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_jsonl(&files.dataset, self.records.iter().map(|r| r.to_row()))?;
        write_jsonl(&files.rejects, &self.rejections)?;
        write_jsonl(&files.transcript, &self.transcript)?;
        write_json(&files.diagnostics, &self.diagnostics)?;
        write_json(&files.memory, &self.memory)?;
        let mut csv = String::from("op,position,count\n");
        for (pos, count) in &self.diagnostics.positions {
            csv.push_str(&format!("{},{pos},{count}\n", self.diagnostics.op.as_str()));
        }
        fs::write(&files.positions, csv).map_err(|e| Error::io(&files.positions, e))?;
        Ok(files)
    }
}

/// Perturbs every itinerary of `corpus` with `config.op`, in order, so the
/// memory log is consistent with the sequence of accepted records.
pub fn run_campaign(
    corpus: &Corpus,
    config: &CampaignConfig,
    mut backend: Backend<'_>,
) -> Result<CampaignOutput> {
    if config.theta.is_nan() || config.theta <= 0.0 {
        return Err(Error::Parameter(format!(
            "theta must be > 0, got {}",
            config.theta
        )));
    }
    let template = PromptTemplate::for_operation(config.op);
    let mut memory = MemoryLog::new(&corpus.name, config.op, config.memory_window);
    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut transcript = Vec::new();
    let mut usage = Usage::default();
    let mut live_secs: Option<f64> = None;
    let take = config.max_itineraries.unwrap_or(usize::MAX);

    for (index, itinerary) in corpus.itineraries.iter().take(take).enumerate() {
        let intents = campaign_intents(config.seed, index);
        let reject = |reason: RejectReason, detail: String| Rejection {
            corpus: corpus.name.clone(),
            seq_id: itinerary.seq_id.clone(),
            op: config.op,
            intents,
            reason,
            detail,
            rounds: 0,
        };
        let pool = match candidate_pool(&corpus.pois, itinerary)
            .and_then(|pool| check_feasible(itinerary, &pool, config.op).map(|_| pool))
        {
            Ok(pool) => pool,
            Err(e) => {
                rejections.push(reject(RejectReason::Infeasible, e.to_string()));
                continue;
            }
        };
        let outcome = match &mut backend {
            Backend::Oracle => match find_satisfying(
                &corpus.name,
                itinerary,
                &pool,
                config.op,
                intents,
                &corpus.profile,
                config.theta,
                stream_seed(config.seed, index as u64, SEARCH_SALT),
            ) {
                Ok(Some(record)) => RunOutcome::Accepted(record),
                Ok(None) => RunOutcome::Rejected(reject(
                    RejectReason::Exhausted,
                    "no draft disrupts every requested intent".into(),
                )),
                Err(e) => RunOutcome::Rejected(reject(RejectReason::Error, e.to_string())),
            },
            Backend::Model(client) => {
                let ctx = RunContext {
                    corpus: &corpus.name,
                    catalog: &corpus.pois,
                    profile: &corpus.profile,
                    template: &template,
                    prompt: PromptOptions {
                        max_candidates: config.max_candidates,
                        seed: stream_seed(config.seed, index as u64, PROMPT_SALT),
                        theta: config.theta,
                    },
                    limits: config.limits,
                };
                let request = RunRequest {
                    itinerary,
                    pool: &pool,
                    intents,
                    op: config.op,
                };
                let started = client.is_live().then(Instant::now);
                let report = run_perturbation(&mut **client, &ctx, &request, &memory)?;
                if let Some(t) = started {
                    *live_secs.get_or_insert(0.0) += t.elapsed().as_secs_f64();
                }
                usage += report.usage;
                transcript.extend(report.transcript);
                report.outcome
            }
        };
        match outcome {
            RunOutcome::Accepted(record) => {
                record_memory(&mut memory, &record);
                records.push(record);
            }
            RunOutcome::Rejected(r) => {
                log::info!(
                    "{}: rejected {} ({})",
                    r.seq_id,
                    r.reason.as_str(),
                    r.detail
                );
                rejections.push(r);
            }
        }
    }

    let mut diagnostics =
        Diagnostics::from_results(&corpus.name, config, backend.name(), &records, &rejections);
    if let Some(total) = live_secs {
        diagnostics.usage = Some(usage);
        diagnostics.latency = Some(Latency {
            total_secs: total,
            mean_secs: total / diagnostics.attempted.max(1) as f64,
        });
    }
    Ok(CampaignOutput {
        records,
        rejections,
        diagnostics,
        transcript,
        memory,
    })
}
