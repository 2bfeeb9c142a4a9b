//! Perturbation prompt templates, one per operation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::memory::MemoryLog;
use crate::disruption::toolbox::tool_specs;
use crate::disruption::DEFAULT_THETA;
use crate::error::{Error, Result};
use crate::ingest::CorpusProfile;
use crate::model::{CandidatePool, IntentSet, Itinerary, Operation, Poi};

pub const TEMPLATE_VERSION: &str = "perturb-v1";
pub const DEFAULT_MAX_CANDIDATES: usize = 100;

const SYSTEM_TEXT: &str = "\
You perturb real travel itineraries to create need-to-modify itineraries.
Apply exactly one {OPERATION} operation to the given itinerary. {OPERATION_RULES}

The perturbation must disrupt every requested intent, judged by these metrics:
- diversity: category diversity is 0 when the itinerary has a single (case-insensitive) category, \
otherwise #unique categories / itinerary length. Disrupted iff the value changes.
- popularity: every POI has a popularity level (low/medium/high) from corpus visit-frequency \
tertiles. Disrupted iff the Hellinger distance between the level distributions of the original \
and perturbed itinerary exceeds {THETA}, or Kendall's tau-b between the aligned level sequences \
is below 1.
- distance: each pair of adjacent POIs forms a segment whose haversine length is labelled \
low/medium/high (thresholds {DIST_T1} km and {DIST_T2} km). Disrupted by the same Hellinger/tau-b \
rule over segment labels.

Do not estimate numbers. Call the tools to compute them exactly:
{TOOLS}

When you are done, reply with a single JSON object and nothing else:
{ANSWER_FORMAT}";

const USER_TEXT: &str = "\
Itinerary {SEQ_ID} (visit order):
{ITINERARY}

Candidate POIs:
{CANDIDATES}

Intents to disrupt: {INTENTS}

{MEMORY}";

/// Prompt template bound to one operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub operation: Operation,
    pub version: String,
    pub system_text: String,
    pub user_text: String,
}

impl PromptTemplate {
    pub fn for_operation(operation: Operation) -> Self {
        PromptTemplate {
            operation,
            version: TEMPLATE_VERSION.to_string(),
            system_text: SYSTEM_TEXT.to_string(),
            user_text: USER_TEXT.to_string(),
        }
    }
}

fn operation_rules(op: Operation) -> &'static str {
    match op {
        Operation::Add => {
            "Insert one candidate POI before position `position` (0 = before the first POI, \
             |i| = after the last). The POI must come from the candidate list."
        }
        Operation::Delete => {
            "Remove the POI at zero-based index `position`. No candidate POI is used."
        }
        Operation::Replace => {
            "Replace the POI at zero-based index `position` with one candidate POI."
        }
    }
}

fn answer_format(op: Operation) -> &'static str {
    match op {
        Operation::Add => r#"{"operation": "add", "position": <int>, "poi_in": "<candidate id>"}"#,
        Operation::Delete => {
            r#"{"operation": "delete", "position": <int>, "poi_out": "<removed id>"}"#
        }
        Operation::Replace => {
            r#"{"operation": "replace", "position": <int>, "poi_in": "<candidate id>", "poi_out": "<replaced id>"}"#
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptOptions {
    pub max_candidates: usize,
    pub seed: u64,
    pub theta: f64,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            max_candidates: DEFAULT_MAX_CANDIDATES,
            seed: 0,
            theta: DEFAULT_THETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

/// Candidates shown to the model: the whole pool, or a seeded sample of
/// `max_candidates` kept in id order.
pub fn visible_candidates(pool: &CandidatePool, options: PromptOptions) -> Vec<&Poi> {
    if pool.len() <= options.max_candidates {
        return pool.pois.iter().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut picked =
        rand::seq::index::sample(&mut rng, pool.len(), options.max_candidates).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| &pool.pois[i]).collect()
}

fn poi_row(index: Option<usize>, poi: &Poi, profile: &CorpusProfile) -> String {
    let prefix = index.map_or(String::new(), |i| format!("{i} | "));
    format!(
        "{prefix}{} | {} | {:.6} | {:.6} | {}",
        poi.id,
        poi.category.trim(),
        poi.lat,
        poi.lon,
        profile.popularity_level(poi)
    )
}

#[allow(clippy::too_many_arguments)]
pub fn build_prompt(
    template: &PromptTemplate,
    op: Operation,
    itinerary: &Itinerary,
    pool: &CandidatePool,
    intents: IntentSet,
    memory: &MemoryLog,
    profile: &CorpusProfile,
    options: PromptOptions,
) -> Result<RenderedPrompt> {
    if template.operation != op {
        return Err(Error::TemplateMismatch {
            template: template.operation.to_string(),
            requested: op.to_string(),
        });
    }
    let tools: Vec<String> = tool_specs()
        .iter()
        .map(|t| format!("- {}: {}", t.name, t.description))
        .collect();
    let system = template
        .system_text
        .replace("{OPERATION_RULES}", operation_rules(op))
        .replace("{OPERATION}", &op.to_string())
        .replace("{THETA}", &format!("{}", options.theta))
        .replace("{DIST_T1}", &format!("{:.4}", profile.dist_thresholds[0]))
        .replace("{DIST_T2}", &format!("{:.4}", profile.dist_thresholds[1]))
        .replace("{TOOLS}", &tools.join("\n"))
        .replace("{ANSWER_FORMAT}", answer_format(op));

    let mut itinerary_table = String::from("position | id | category | lat | lon | popularity\n");
    for (k, poi) in itinerary.pois.iter().enumerate() {
        itinerary_table.push_str(&poi_row(Some(k), poi, profile));
        itinerary_table.push('\n');
    }
    let candidates = if op == Operation::Delete {
        "(not used for DELETE)".to_string()
    } else {
        let shown = visible_candidates(pool, options);
        let mut table = format!(
            "{} of {} candidates\nid | category | lat | lon | popularity\n",
            shown.len(),
            pool.len()
        );
        for poi in shown {
            table.push_str(&poi_row(None, poi, profile));
            table.push('\n');
        }
        table
    };
    let intents_text: Vec<&str> = intents.iter().map(|i| i.as_str()).collect();
    let user = template
        .user_text
        .replace("{SEQ_ID}", &itinerary.seq_id)
        .replace("{ITINERARY}", itinerary_table.trim_end())
        .replace("{CANDIDATES}", candidates.trim_end())
        .replace("{INTENTS}", &intents_text.join(", "))
        .replace("{MEMORY}", memory.render().trim_end());
    Ok(RenderedPrompt { system, user })
}
