//! The function-calling conversation loop for one perturbation request.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::client::{ChatMessage, ChatReply, ModelClient, Usage};
use super::memory::MemoryLog;
use super::prompt::{build_prompt, PromptOptions, PromptTemplate};
use crate::disruption::toolbox::{tool_specs, Toolbox};
use crate::disruption::verify_intents;
use crate::error::Result;
use crate::ingest::CorpusProfile;
use crate::model::{
    CandidatePool, IntentSet, Itinerary, Operation, Perturbation, PoiCatalog, PoiId,
};
use crate::record::PerturbationRecord;

pub const DEFAULT_MAX_TOOL_ROUNDS: usize = 12;
pub const DEFAULT_MAX_RETRIES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Model turns allowed per request, tool calls and answers alike.
    pub max_tool_rounds: usize,
    /// Corrective turns after a rejected answer, and resends after a
    /// transport failure.
    pub max_retries: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_tool_rounds: DEFAULT_MAX_TOOL_ROUNDS,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    Parse,
    Structural,
    Intent,
    Budget,
    Transport,
    /// The operation cannot be applied to the itinerary at all.
    Infeasible,
    /// The oracle found no draft disrupting the requested intents.
    Exhausted,
    Error,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Parse => "PARSE",
            RejectReason::Structural => "STRUCTURAL",
            RejectReason::Intent => "INTENT",
            RejectReason::Budget => "BUDGET",
            RejectReason::Transport => "TRANSPORT",
            RejectReason::Infeasible => "INFEASIBLE",
            RejectReason::Exhausted => "EXHAUSTED",
            RejectReason::Error => "ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub corpus: String,
    pub seq_id: String,
    pub op: Operation,
    pub intents: IntentSet,
    pub reason: RejectReason,
    pub detail: String,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub seq_id: String,
    pub index: usize,
    pub message: ChatMessage,
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Accepted(PerturbationRecord),
    Rejected(Rejection),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub outcome: RunOutcome,
    pub transcript: Vec<TranscriptEvent>,
    pub usage: Usage,
    pub rounds: usize,
}

/// Everything a request shares with the rest of its campaign.
#[derive(Debug, Clone, Copy)]
pub struct RunContext<'a> {
    pub corpus: &'a str,
    pub catalog: &'a PoiCatalog,
    pub profile: &'a CorpusProfile,
    pub template: &'a PromptTemplate,
    pub prompt: PromptOptions,
    pub limits: Limits,
}

impl RunContext<'_> {
    pub fn theta(&self) -> f64 {
        self.prompt.theta
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunRequest<'a> {
    pub itinerary: &'a Itinerary,
    pub pool: &'a CandidatePool,
    pub intents: IntentSet,
    pub op: Operation,
}

/// The model's final structured answer.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct FinalAnswer {
    #[serde(default)]
    pub operation: Option<String>,
    pub position: usize,
    #[serde(default)]
    pub poi_in: Option<String>,
    #[serde(default)]
    pub poi_out: Option<String>,
}

/// Pulls the outermost JSON object out of a reply, tolerating prose or code
/// fences around it.
pub fn parse_answer(text: &str) -> std::result::Result<FinalAnswer, String> {
    let start = text.find('{').ok_or("no JSON object in the answer")?;
    let end = text.rfind('}').ok_or("no JSON object in the answer")?;
    if end < start {
        return Err("no JSON object in the answer".into());
    }
    serde_json::from_str(&text[start..=end]).map_err(|e| format!("invalid answer JSON: {e}"))
}

/// Turns an answer into a perturbation, enforcing the structural rules.
pub fn materialize(
    answer: &FinalAnswer,
    request: &RunRequest<'_>,
) -> std::result::Result<Perturbation, String> {
    if let Some(op) = &answer.operation {
        let parsed: Operation = op.parse().map_err(|e: crate::Error| e.to_string())?;
        if parsed != request.op {
            return Err(format!("expected a {} operation, got {parsed}", request.op));
        }
    }
    let poi_in = match (request.op, &answer.poi_in) {
        (Operation::Delete, Some(id)) => {
            return Err(format!("DELETE takes no poi_in, got {id}"));
        }
        (Operation::Delete, None) => None,
        (_, None) => return Err(format!("{} requires poi_in", request.op)),
        (_, Some(id)) => Some(
            request
                .pool
                .get(&PoiId::from(id.as_str()))
                .cloned()
                .ok_or_else(|| format!("poi_in {id} is not in the candidate pool"))?,
        ),
    };
    let p = Perturbation::apply(request.itinerary, request.op, answer.position, poi_in)
        .map_err(|e| e.to_string())?;
    if let Some(out) = &answer.poi_out {
        let actual = p.poi_out.as_ref().map(|x| x.id.as_str());
        if actual != Some(out.as_str()) {
            return Err(format!(
                "poi_out {out} does not match the POI at position {} ({})",
                answer.position,
                actual.unwrap_or("none")
            ));
        }
    }
    p.check().map_err(|e| e.to_string())?;
    Ok(p)
}

struct Conversation {
    seq_id: String,
    messages: Vec<ChatMessage>,
    transcript: Vec<TranscriptEvent>,
}

impl Conversation {
    fn push(&mut self, message: ChatMessage) {
        self.transcript.push(TranscriptEvent {
            seq_id: self.seq_id.clone(),
            index: self.transcript.len(),
            message: message.clone(),
        });
        self.messages.push(message);
    }
}

fn dispatch_call(toolbox: &Toolbox<'_>, name: &str, raw_args: &str) -> Value {
    let args: Value = match serde_json::from_str(raw_args) {
        Ok(v) => v,
        Err(e) => return json!({"error": format!("malformed tool arguments: {e}")}),
    };
    match toolbox.dispatch(name, &args) {
        Ok(v) => v,
        Err(msg) => json!({"error": msg}),
    }
}

/// Runs one request to completion. Only setup errors (a template that does
/// not match the operation) are returned as `Err`; every model-side failure
/// becomes a rejection.
pub fn run_perturbation(
    client: &mut dyn ModelClient,
    ctx: &RunContext<'_>,
    request: &RunRequest<'_>,
    memory: &MemoryLog,
) -> Result<RunReport> {
    let prompt = build_prompt(
        ctx.template,
        request.op,
        request.itinerary,
        request.pool,
        request.intents,
        memory,
        ctx.profile,
        ctx.prompt,
    )?;
    let toolbox = Toolbox::new(ctx.catalog, ctx.profile, ctx.theta());
    let tools = if client.supports_tools() {
        tool_specs()
    } else {
        Vec::new()
    };
    let mut conv = Conversation {
        seq_id: request.itinerary.seq_id.clone(),
        messages: Vec::new(),
        transcript: Vec::new(),
    };
    conv.push(ChatMessage::system(prompt.system));
    conv.push(ChatMessage::user(prompt.user));

    let mut usage = Usage::default();
    let mut rounds = 0;
    let mut retries = 0;
    let mut transport_failures = 0;
    let reject = |reason: RejectReason, detail: String, rounds: usize| {
        RunOutcome::Rejected(Rejection {
            corpus: ctx.corpus.to_string(),
            seq_id: request.itinerary.seq_id.clone(),
            op: request.op,
            intents: request.intents,
            reason,
            detail,
            rounds,
        })
    };

    let outcome = loop {
        if rounds >= ctx.limits.max_tool_rounds {
            break reject(
                RejectReason::Budget,
                format!("no accepted answer within {rounds} rounds"),
                rounds,
            );
        }
        let turn = match client.chat(&conv.messages, &tools) {
            Ok(t) => t,
            Err(e) => {
                transport_failures += 1;
                log::warn!(
                    "{}: transport failure {transport_failures}: {e}",
                    conv.seq_id
                );
                if transport_failures > ctx.limits.max_retries {
                    break reject(RejectReason::Transport, e.to_string(), rounds);
                }
                continue;
            }
        };
        transport_failures = 0;
        rounds += 1;
        usage += turn.usage;
        let text = match turn.reply {
            ChatReply::ToolCalls(calls) => {
                conv.push(ChatMessage::assistant_calls(calls.clone()));
                for call in &calls {
                    let result = dispatch_call(&toolbox, &call.name, &call.arguments);
                    conv.push(ChatMessage::tool_result(
                        call.id.clone(),
                        result.to_string(),
                    ));
                }
                continue;
            }
            ChatReply::Text(t) => t,
        };
        conv.push(ChatMessage::assistant(text.clone()));
        let failure = match parse_answer(&text) {
            Err(detail) => (RejectReason::Parse, detail),
            Ok(answer) => match materialize(&answer, request) {
                Err(detail) => (RejectReason::Structural, detail),
                Ok(p) => match verify_intents(&p, request.intents, ctx.profile, ctx.theta()) {
                    Err(e) => (RejectReason::Structural, e.to_string()),
                    Ok((assessment, true)) => {
                        break RunOutcome::Accepted(PerturbationRecord {
                            corpus: ctx.corpus.to_string(),
                            perturbation: p,
                            intents: request.intents,
                            assessment,
                        });
                    }
                    Ok((assessment, false)) => {
                        let missed: Vec<&str> = request
                            .intents
                            .iter()
                            .filter(|i| !assessment.disrupted(*i))
                            .map(|i| i.as_str())
                            .collect();
                        let diagnostics =
                            serde_json::to_string(&assessment.verdicts).unwrap_or_default();
                        (
                            RejectReason::Intent,
                            format!(
                                "not disrupted: {}; diagnostics {diagnostics}",
                                missed.join(", ")
                            ),
                        )
                    }
                },
            },
        };
        if retries >= ctx.limits.max_retries {
            break reject(failure.0, failure.1, rounds);
        }
        retries += 1;
        conv.push(ChatMessage::user(format!(
            "Your answer was rejected ({}): {}. Reply with a corrected JSON answer.",
            failure.0.as_str(),
            failure.1
        )));
    };
    Ok(RunReport {
        outcome,
        transcript: conv.transcript,
        usage,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disruption::tests::{itinerary_with_levels, toy_profile};
    use crate::model::{candidate_pool, Intent, Level, Poi};
    use crate::oracle::find_satisfying;
    use crate::pipeline::client::{ChatTurn, ScriptStep, ScriptedClient};
    use Level::{High as H, Low as L, Medium as M};

    struct Fixture {
        catalog: PoiCatalog,
        itinerary: Itinerary,
        pool: CandidatePool,
        profile: CorpusProfile,
        template: PromptTemplate,
    }

    fn fixture(op: Operation) -> Fixture {
        let itinerary = itinerary_with_levels(&[H, M, L, L, M]);
        let mut catalog: PoiCatalog = itinerary
            .pois
            .iter()
            .map(|p| (p.id.clone(), p.clone()))
            .collect();
        for (k, (freq, cat)) in [(100, "park"), (1, "museum"), (5, "beach")]
            .iter()
            .enumerate()
        {
            let p = Poi::new(format!("c{k}"), *cat, 0.01 * (k as f64 + 1.0), 0.3, *freq).unwrap();
            catalog.insert(p.id.clone(), p);
        }
        let pool = candidate_pool(&catalog, &itinerary).unwrap();
        Fixture {
            catalog,
            itinerary,
            pool,
            profile: toy_profile(),
            template: PromptTemplate::for_operation(op),
        }
    }

    fn run(
        f: &Fixture,
        op: Operation,
        intents: IntentSet,
        client: &mut ScriptedClient,
    ) -> RunReport {
        let ctx = RunContext {
            corpus: "toy",
            catalog: &f.catalog,
            profile: &f.profile,
            template: &f.template,
            prompt: PromptOptions::default(),
            limits: Limits::default(),
        };
        let req = RunRequest {
            itinerary: &f.itinerary,
            pool: &f.pool,
            intents,
            op,
        };
        run_perturbation(client, &ctx, &req, &MemoryLog::new("toy", op, 50)).unwrap()
    }

    fn answer_for(p: &Perturbation) -> String {
        json!({
            "operation": p.op,
            "position": p.position,
            "poi_in": p.poi_in.as_ref().map(|x| x.id.to_string()),
            "poi_out": p.poi_out.as_ref().map(|x| x.id.to_string()),
        })
        .to_string()
    }

    #[test]
    fn oracle_draft_is_accepted() {
        let f = fixture(Operation::Replace);
        let intents = IntentSet::new(&[Intent::Popularity, Intent::Diversity]).unwrap();
        let rec = find_satisfying(
            "toy",
            &f.itinerary,
            &f.pool,
            Operation::Replace,
            intents,
            &f.profile,
            0.1,
            3,
        )
        .unwrap()
        .expect("toy corpus has a satisfying draft");
        let mut client = ScriptedClient::from_turns([ChatTurn::text(format!(
            "```json\n{}\n```",
            answer_for(&rec.perturbation)
        ))]);
        let report = run(&f, Operation::Replace, intents, &mut client);
        match report.outcome {
            RunOutcome::Accepted(r) => {
                assert_eq!(r, rec);
                assert!(r
                    .assessment
                    .flags()
                    .iter()
                    .filter(|(i, _)| intents.contains(**i))
                    .all(|(_, v)| *v));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stats_tool_result_is_appended() {
        let f = fixture(Operation::Delete);
        let args = json!({
            "original": ["low", "medium", "medium", "medium", "medium", "medium",
                         "high", "high", "high", "high", "high"],
            "perturbed": ["medium", "medium", "medium", "medium", "medium",
                          "high", "high", "high", "high", "high"],
        });
        let mut client = ScriptedClient::from_turns([
            ChatTurn::tool_call("call-1", "stats_from_categories", &args),
            ChatTurn::text("{\"operation\": \"delete\", \"position\": 2}"),
        ]);
        let report = run(
            &f,
            Operation::Delete,
            IntentSet::single(Intent::Popularity),
            &mut client,
        );
        let tool_msg = report
            .transcript
            .iter()
            .find(|e| e.message.role == crate::pipeline::client::Role::Tool)
            .unwrap();
        let v: Value = serde_json::from_str(tool_msg.message.content.as_deref().unwrap()).unwrap();
        assert!((v["hellinger"].as_f64().unwrap() - 0.216).abs() < 1e-3);
    }

    #[test]
    fn foreign_poi_is_rejected_after_retries() {
        let f = fixture(Operation::Add);
        let bad = "{\"operation\": \"add\", \"position\": 1, \"poi_in\": \"p0\"}";
        let mut client = ScriptedClient::from_turns((0..3).map(|_| ChatTurn::text(bad)));
        let report = run(
            &f,
            Operation::Add,
            IntentSet::single(Intent::Diversity),
            &mut client,
        );
        match report.outcome {
            RunOutcome::Rejected(r) => {
                assert_eq!(r.reason, RejectReason::Structural);
                assert_eq!(r.rounds, 3);
            }
            other => panic!("{other:?}"),
        }
        // the corrective turns carried the failure reason
        assert!(client.seen[1]
            .last()
            .unwrap()
            .content
            .as_deref()
            .unwrap()
            .contains("STRUCTURAL"));
    }

    #[test]
    fn unparseable_answer_is_parse_rejection() {
        let f = fixture(Operation::Delete);
        let mut client =
            ScriptedClient::from_turns((0..3).map(|_| ChatTurn::text("I would delete the museum")));
        let report = run(
            &f,
            Operation::Delete,
            IntentSet::single(Intent::Popularity),
            &mut client,
        );
        assert!(matches!(
            report.outcome,
            RunOutcome::Rejected(Rejection {
                reason: RejectReason::Parse,
                ..
            })
        ));
    }

    #[test]
    fn malformed_and_unknown_tools_do_not_crash() {
        let f = fixture(Operation::Delete);
        let mut client = ScriptedClient::new([
            ScriptStep::Turn(ChatTurn {
                reply: ChatReply::ToolCalls(vec![crate::pipeline::client::ToolCall {
                    id: "a".into(),
                    name: "cd_from_categories".into(),
                    arguments: "{not json".into(),
                }]),
                usage: Usage::default(),
            }),
            ScriptStep::Turn(ChatTurn::tool_call("b", "teleport", &json!({}))),
        ]);
        let report = run(
            &f,
            Operation::Delete,
            IntentSet::single(Intent::Popularity),
            &mut client,
        );
        let errors: Vec<String> = report
            .transcript
            .iter()
            .filter_map(|e| {
                e.message
                    .tool_call_id
                    .as_ref()
                    .and(e.message.content.clone())
            })
            .collect();
        assert!(errors[0].contains("malformed tool arguments"));
        assert!(errors[1].contains("unknown tool"));
        // script runs dry afterwards
        assert!(matches!(
            report.outcome,
            RunOutcome::Rejected(Rejection {
                reason: RejectReason::Transport,
                ..
            })
        ));
    }

    #[test]
    fn round_budget() {
        let f = fixture(Operation::Delete);
        let args = json!({"itinerary": ["p0"]});
        let mut client = ScriptedClient::from_turns(
            (0..20)
                .map(|k| ChatTurn::tool_call(format!("c{k}"), "categories_from_itinerary", &args)),
        );
        let report = run(
            &f,
            Operation::Delete,
            IntentSet::single(Intent::Popularity),
            &mut client,
        );
        assert_eq!(report.rounds, DEFAULT_MAX_TOOL_ROUNDS);
        assert!(matches!(
            report.outcome,
            RunOutcome::Rejected(Rejection {
                reason: RejectReason::Budget,
                ..
            })
        ));
    }

    #[test]
    fn transport_failure_is_retried() {
        let f = fixture(Operation::Delete);
        let intents = IntentSet::single(Intent::Popularity);
        let rec = find_satisfying(
            "toy",
            &f.itinerary,
            &f.pool,
            Operation::Delete,
            intents,
            &f.profile,
            0.1,
            0,
        )
        .unwrap()
        .unwrap();
        let mut client = ScriptedClient::new([
            ScriptStep::Fail {
                transport_error: "reset".into(),
            },
            ScriptStep::Turn(ChatTurn::text(answer_for(&rec.perturbation))),
        ]);
        let report = run(&f, Operation::Delete, intents, &mut client);
        assert!(matches!(report.outcome, RunOutcome::Accepted(_)));
    }
}
