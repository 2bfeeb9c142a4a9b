//! Runs modification tasks against scripted answers or a model and tabulates
//! Mod / APR per (model, dataset, op, setting).

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::borda::ScoreCell;
use super::retrieval::{retrieve_examples, Embedder, RagStrategy};
use super::{score_apr, score_mod, BenchTask, ScoreReason};
use crate::error::{Error, Result};
use crate::ingest::{write_jsonl, Corpus};
use crate::model::PoiId;
use crate::pipeline::client::{ChatMessage, ChatReply, ModelClient};
use crate::pipeline::stream_seed;

pub const ZERO_SHOT: &str = "zero-shot";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSetting {
    pub name: String,
    pub rag: Option<RagStrategy>,
    pub k: usize,
}

impl BenchSetting {
    pub fn zero_shot() -> Self {
        BenchSetting {
            name: ZERO_SHOT.into(),
            rag: None,
            k: 0,
        }
    }

    pub fn rag(strategy: RagStrategy, k: usize) -> Self {
        let name = match strategy {
            RagStrategy::Random => "random",
            RagStrategy::Sparse => "sparse",
            RagStrategy::Dense => "dense",
        };
        BenchSetting {
            name: name.into(),
            rag: Some(strategy),
            k,
        }
    }
}

/// One line of a scripted-answer file. Without `setting` the answer applies
/// to every setting. `itinerary` takes precedence over free `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedAnswer {
    pub task_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub itinerary: Option<Vec<PoiId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

pub enum AnswerSource<'a> {
    Scripted(&'a [ScriptedAnswer]),
    Model(&'a mut dyn ModelClient),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub model: String,
    pub theta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVerdict {
    pub task_id: String,
    pub model: String,
    pub dataset: String,
    pub op: String,
    pub setting: String,
    #[serde(rename = "mod")]
    pub mod_score: u8,
    pub apr: u8,
    pub hinted_ok: bool,
    pub invariant_ok: bool,
    pub reason: ScoreReason,
    pub examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub dataset: String,
    pub op: String,
    pub setting: String,
    #[serde(rename = "mod")]
    pub mod_acc: f64,
    pub apr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchOutput {
    pub verdicts: Vec<TaskVerdict>,
    pub rows: Vec<ResultRow>,
}

impl BenchOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("verdicts.jsonl"), &self.verdicts)?;
        write_results(&dir.join("results.csv"), &self.rows)
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mod,
    Apr,
}

pub fn score_cells(rows: &[ResultRow], metric: Metric) -> Vec<ScoreCell> {
    rows.iter()
        .map(|r| ScoreCell {
            model: r.model.clone(),
            dataset: r.dataset.clone(),
            op: r.op.clone(),
            setting: r.setting.clone(),
            score: match metric {
                Metric::Mod => r.mod_acc,
                Metric::Apr => r.apr,
            },
        })
        .collect()
}

/// Reads a POI-id sequence out of a reply: a JSON array, or an object with
/// an `itinerary` array.
pub fn parse_itinerary_answer(text: &str) -> Option<Vec<PoiId>> {
    let start = text.find(['{', '['])?;
    let end = text.rfind(['}', ']'])?;
    let value: serde_json::Value = serde_json::from_str(text.get(start..=end)?).ok()?;
    let list = match &value {
        serde_json::Value::Array(_) => value,
        serde_json::Value::Object(m) => m.get("itinerary")?.clone(),
        _ => return None,
    };
    serde_json::from_value(list).ok()
}

fn describe(task: &BenchTask) -> String {
    let mut out = format!("Operation: {}\nHint: {}\nItinerary:\n", task.op, task.hint);
    for (k, p) in task.need_to_modify.pois.iter().enumerate() {
        out.push_str(&format!(
            "{k} | {} | {} | {:.6} | {:.6}\n",
            p.id,
            p.category.trim(),
            p.lat,
            p.lon
        ));
    }
    if let Some(cands) = &task.candidates {
        out.push_str("Candidates:\n");
        for p in cands {
            out.push_str(&format!(
                "{} | {} | {:.6} | {:.6}\n",
                p.id,
                p.category.trim(),
                p.lat,
                p.lon
            ));
        }
    }
    out
}

/// Chat messages for one modification attempt with in-context examples.
pub fn modification_messages(task: &BenchTask, examples: &[&BenchTask]) -> Vec<ChatMessage> {
    let system = "You repair travel itineraries. Apply exactly one edit of the stated operation \
                  so that the itinerary changes as the hint asks and nothing else. ADD and REPLACE \
                  must use one of the listed candidates. Reply with JSON only: \
                  {\"itinerary\": [<poi ids in visit order>]}";
    let mut user = String::new();
    for (k, ex) in examples.iter().enumerate() {
        user.push_str(&format!(
            "Example {}:\n{}Answer: {}\n\n",
            k + 1,
            describe(ex),
            serde_json::json!({ "itinerary": ex.ground_truth.ids() })
        ));
    }
    user.push_str("Task:\n");
    user.push_str(&describe(task));
    vec![ChatMessage::system(system), ChatMessage::user(user)]
}

/// Scores every task under every setting.
pub fn run_benchmark(
    tasks: &[BenchTask],
    train: &[BenchTask],
    settings: &[BenchSetting],
    mut source: AnswerSource<'_>,
    corpora: &[Corpus],
    config: &BenchConfig,
    embedder: Option<&dyn Embedder>,
) -> Result<BenchOutput> {
    let by_name: HashMap<&str, &Corpus> = corpora.iter().map(|c| (c.name.as_str(), c)).collect();
    let scripted: HashMap<(Option<&str>, &str), &ScriptedAnswer> = match &source {
        AnswerSource::Scripted(rows) => rows
            .iter()
            .map(|a| ((a.setting.as_deref(), a.task_id.as_str()), a))
            .collect(),
        AnswerSource::Model(_) => HashMap::new(),
    };
    let mut verdicts = Vec::new();
    for setting in settings {
        for (index, task) in tasks.iter().enumerate() {
            let corpus = by_name.get(task.corpus.as_str()).ok_or_else(|| {
                Error::Corpus(format!("no bundle loaded for corpus {}", task.corpus))
            })?;
            let examples = match setting.rag {
                None => Vec::new(),
                Some(strategy) => retrieve_examples(
                    task,
                    train,
                    strategy,
                    setting.k,
                    stream_seed(config.seed, index as u64, 32),
                    embedder,
                )?,
            };
            let (answer, transport) = match &mut source {
                AnswerSource::Scripted(_) => {
                    let hit = scripted
                        .get(&(Some(setting.name.as_str()), task.id.as_str()))
                        .or_else(|| scripted.get(&(None, task.id.as_str())));
                    match hit {
                        None => (None, Some(ScoreReason::Missing)),
                        Some(a) => (
                            a.itinerary
                                .clone()
                                .or_else(|| a.text.as_deref().and_then(parse_itinerary_answer)),
                            None,
                        ),
                    }
                }
                AnswerSource::Model(client) => {
                    match client.chat(&modification_messages(task, &examples), &[]) {
                        Ok(turn) => match turn.reply {
                            ChatReply::Text(t) => (parse_itinerary_answer(&t), None),
                            ChatReply::ToolCalls(_) => (None, None),
                        },
                        Err(e) => {
                            log::warn!("{}: {e}", task.id);
                            (None, Some(ScoreReason::Transport))
                        }
                    }
                }
            };
            let (m, mod_reason) = score_mod(task, answer.as_deref());
            let apr = score_apr(
                task,
                answer.as_deref(),
                &corpus.pois,
                &corpus.profile,
                config.theta,
            );
            let reason = match (transport, apr.reason) {
                (Some(r), _) => r,
                (None, ScoreReason::Structural) => ScoreReason::Structural,
                (None, _) => mod_reason,
            };
            verdicts.push(TaskVerdict {
                task_id: task.id.clone(),
                model: config.model.clone(),
                dataset: task.corpus.clone(),
                op: task.op.as_str().to_string(),
                setting: setting.name.clone(),
                mod_score: m,
                apr: apr.value,
                hinted_ok: apr.hinted_ok,
                invariant_ok: apr.invariant_ok,
                reason,
                examples: examples.iter().map(|e| e.id.clone()).collect(),
            });
        }
    }
    Ok(BenchOutput {
        rows: tabulate(&verdicts),
        verdicts,
    })
}

type GroupKey<'a> = (&'a str, &'a str, &'a str, &'a str);

pub fn tabulate(verdicts: &[TaskVerdict]) -> Vec<ResultRow> {
    let mut groups: BTreeMap<GroupKey<'_>, (u64, u64, usize)> = BTreeMap::new();
    for v in verdicts {
        let g = groups
            .entry((&v.model, &v.dataset, &v.op, &v.setting))
            .or_insert((0, 0, 0));
        g.0 += u64::from(v.mod_score);
        g.1 += u64::from(v.apr);
        g.2 += 1;
    }
    groups
        .into_iter()
        .map(|((model, dataset, op, setting), (m, a, n))| ResultRow {
            model: model.into(),
            dataset: dataset.into(),
            op: op.into(),
            setting: setting.into(),
            mod_acc: m as f64 / n as f64,
            apr: a as f64 / n as f64,
            n,
        })
        .collect()
}
