//! Function-calling surface over the disruption detectors.
//!
//! Four tools are registered: `geo_distance_segments`,
//! `stats_from_categories`, `cd_from_categories` and
//! `categories_from_itinerary`. Arguments arrive as JSON objects and
//! results are returned as JSON; bad arguments produce an error object for
//! the model instead of failing the run.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    categories_from_itinerary, cd_from_categories, geo_distance_segments, stats_from_categories,
    AlignmentPolicy,
};
use crate::ingest::CorpusProfile;
use crate::metrics::ratio_f64;
use crate::model::{Intent, Itinerary, Level, PoiCatalog, PoiId};

pub const TOOL_NAMES: [&str; 4] = [
    "geo_distance_segments",
    "stats_from_categories",
    "cd_from_categories",
    "categories_from_itinerary",
];

/// Function declaration in the chat-completions `tools` format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

impl ToolSpec {
    pub fn to_openai(&self) -> Value {
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            }
        })
    }
}

fn id_list(description: &str) -> Value {
    json!({"type": "array", "items": {"type": "string"}, "description": description})
}

fn level_list(description: &str) -> Value {
    json!({
        "type": "array",
        "items": {"type": "string", "enum": ["low", "medium", "high"]},
        "description": description,
    })
}

pub fn tool_specs() -> Vec<ToolSpec> {
    vec![
        ToolSpec {
            name: "geo_distance_segments".into(),
            description: "Computes haversine distances (km) between adjacent POIs of the original \
                          and perturbed itineraries and labels each segment low/medium/high using \
                          the corpus distance thresholds."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "original": id_list("POI ids of the original itinerary, in visit order"),
                    "perturbed": id_list("POI ids of the perturbed itinerary, in visit order"),
                },
                "required": ["original", "perturbed"],
            }),
        },
        ToolSpec {
            name: "stats_from_categories".into(),
            description: "Given level label sequences (popularity labels or distance segment \
                          labels) of the original and perturbed itineraries, returns the Hellinger \
                          distance between their level distributions, Kendall's tau-b between the \
                          aligned sequences, and the disruption decision (H > threshold or tau_b < 1)."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "original": level_list("labels of the original itinerary"),
                    "perturbed": level_list("labels of the perturbed itinerary"),
                    "original_ids": id_list("optional identity keys parallel to `original` (POI ids, or 'a>b' for segments)"),
                    "perturbed_ids": id_list("optional identity keys parallel to `perturbed`"),
                },
                "required": ["original", "perturbed"],
            }),
        },
        ToolSpec {
            name: "cd_from_categories".into(),
            description: "Computes category diversity (0 if one unique category, otherwise \
                          unique/length; case-insensitive) for both itineraries and reports whether \
                          it changed."
                .into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "original": {"type": "array", "items": {"type": "string"}},
                    "perturbed": {"type": "array", "items": {"type": "string"}},
                },
                "required": ["original", "perturbed"],
            }),
        },
        ToolSpec {
            name: "categories_from_itinerary".into(),
            description: "Returns the category of each POI of an itinerary, in visit order.".into(),
            parameters: json!({
                "type": "object",
                "properties": {
                    "itinerary": id_list("POI ids in visit order"),
                },
                "required": ["itinerary"],
            }),
        },
    ]
}

#[derive(Deserialize)]
struct PairArgs {
    original: Vec<String>,
    perturbed: Vec<String>,
}

#[derive(Deserialize)]
struct StatsArgs {
    original: Vec<String>,
    perturbed: Vec<String>,
    #[serde(default)]
    original_ids: Option<Vec<String>>,
    #[serde(default)]
    perturbed_ids: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct ItineraryArgs {
    itinerary: Vec<String>,
}

/// Dispatch context: the corpus the model is perturbing.
#[derive(Debug, Clone, Copy)]
pub struct Toolbox<'a> {
    pub catalog: &'a PoiCatalog,
    pub profile: &'a CorpusProfile,
    pub theta: f64,
    pub policy: AlignmentPolicy,
}

impl<'a> Toolbox<'a> {
    pub fn new(catalog: &'a PoiCatalog, profile: &'a CorpusProfile, theta: f64) -> Self {
        Toolbox {
            catalog,
            profile,
            theta,
            policy: AlignmentPolicy::Union,
        }
    }

    /// Runs one tool call. `Err` carries a message to hand back to the model.
    pub fn dispatch(&self, name: &str, args: &Value) -> Result<Value, String> {
        match name {
            "geo_distance_segments" => {
                let args: PairArgs = parse(args)?;
                let a = self.resolve(&args.original)?;
                let b = self.resolve(&args.perturbed)?;
                let (sa, sb) =
                    geo_distance_segments(&a, &b, self.profile).map_err(|e| e.to_string())?;
                Ok(json!({
                    "original": {"km": sa.km, "levels": sa.levels},
                    "perturbed": {"km": sb.km, "levels": sb.levels},
                    "thresholds_km": self.profile.dist_thresholds,
                }))
            }
            "stats_from_categories" => {
                let args: StatsArgs = parse(args)?;
                let orig = levels(&args.original)?;
                let pert = levels(&args.perturbed)?;
                let orig_ids = keys(args.original_ids, orig.len(), "original_ids")?;
                let pert_ids = keys(args.perturbed_ids, pert.len(), "perturbed_ids")?;
                let v = stats_from_categories(
                    Intent::Popularity,
                    &orig,
                    &pert,
                    &orig_ids,
                    &pert_ids,
                    self.theta,
                    self.policy,
                )
                .map_err(|e| e.to_string())?;
                Ok(json!({
                    "hellinger": v.h_value,
                    "tau_b": v.tau_b,
                    "threshold": v.threshold_used,
                    "disrupted": v.disrupted,
                }))
            }
            "cd_from_categories" => {
                let args: PairArgs = parse(args)?;
                let c = cd_from_categories(&args.original, &args.perturbed)
                    .map_err(|e| e.to_string())?;
                Ok(json!({
                    "cd_original": ratio_f64(c.before),
                    "cd_perturbed": ratio_f64(c.after),
                    "disrupted": c.disrupted,
                }))
            }
            "categories_from_itinerary" => {
                let args: ItineraryArgs = parse(args)?;
                let it = self.resolve(&args.itinerary)?;
                Ok(json!({"categories": categories_from_itinerary(&it)}))
            }
            other => Err(format!(
                "unknown tool {other:?}; available: {}",
                TOOL_NAMES.join(", ")
            )),
        }
    }

    fn resolve(&self, ids: &[String]) -> Result<Itinerary, String> {
        let ids: Vec<PoiId> = ids.iter().map(|s| PoiId::from(s.as_str())).collect();
        Itinerary::resolve("tool", "tool", &ids, self.catalog).map_err(|e| e.to_string())
    }
}

fn parse<T: for<'de> Deserialize<'de>>(args: &Value) -> Result<T, String> {
    serde_json::from_value(args.clone()).map_err(|e| format!("invalid arguments: {e}"))
}

fn levels(raw: &[String]) -> Result<Vec<Level>, String> {
    raw.iter()
        .map(|s| s.parse::<Level>().map_err(|e| e.to_string()))
        .collect()
}

/// Identity keys, defaulting to positions when the model omits them.
fn keys(given: Option<Vec<String>>, len: usize, field: &str) -> Result<Vec<String>, String> {
    match given {
        Some(k) if k.len() == len => Ok(k),
        Some(k) => Err(format!(
            "{field} has {} entries, labels have {len}",
            k.len()
        )),
        None => Ok((0..len).map(|i| i.to_string()).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disruption::tests::{itinerary_with_levels, toy_profile};
    use crate::model::Level::{High as H, Low as L, Medium as M};

    fn catalog() -> PoiCatalog {
        itinerary_with_levels(&[H, M, L, L])
            .pois
            .into_iter()
            .map(|p| (p.id.clone(), p))
            .collect()
    }

    #[test]
    fn specs_cover_exactly_the_toolbox() {
        let names: Vec<String> = tool_specs().into_iter().map(|s| s.name).collect();
        assert_eq!(names, TOOL_NAMES);
    }

    #[test]
    fn stats_surfaces_known_hellinger() {
        let (cat, profile) = (catalog(), toy_profile());
        let tb = Toolbox::new(&cat, &profile, 0.1);
        let orig: Vec<&str> = [vec!["high"; 5], vec!["medium"; 5], vec!["low"]].concat();
        let pert: Vec<&str> = [vec!["high"; 5], vec!["medium"; 5]].concat();
        let out = tb
            .dispatch(
                "stats_from_categories",
                &json!({"original": orig, "perturbed": pert}),
            )
            .unwrap();
        let h = out["hellinger"].as_f64().unwrap();
        assert!((h - 0.216).abs() < 0.001);
        assert_eq!(out["disrupted"], json!(true));
    }

    #[test]
    fn categories_and_segments() {
        let (cat, profile) = (catalog(), toy_profile());
        let tb = Toolbox::new(&cat, &profile, 0.1);
        let out = tb
            .dispatch(
                "categories_from_itinerary",
                &json!({"itinerary": ["p0", "p1"]}),
            )
            .unwrap();
        assert_eq!(out["categories"], json!(["museum", "museum"]));
        let out = tb
            .dispatch(
                "geo_distance_segments",
                &json!({"original": ["p0", "p1", "p2"], "perturbed": ["p0", "p2"]}),
            )
            .unwrap();
        assert_eq!(out["original"]["levels"], json!(["low", "low"]));
        assert_eq!(out["perturbed"]["km"].as_array().unwrap().len(), 1);
        let out = tb
            .dispatch(
                "cd_from_categories",
                &json!({"original": ["a", "b"], "perturbed": ["a", "a"]}),
            )
            .unwrap();
        assert_eq!(out["disrupted"], json!(true));
    }

    #[test]
    fn errors_are_messages_not_panics() {
        let (cat, profile) = (catalog(), toy_profile());
        let tb = Toolbox::new(&cat, &profile, 0.1);
        assert!(tb
            .dispatch("teleport", &json!({}))
            .unwrap_err()
            .contains("unknown tool"));
        assert!(tb
            .dispatch("categories_from_itinerary", &json!({"itinerary": ["nope"]}))
            .is_err());
        assert!(tb
            .dispatch(
                "stats_from_categories",
                &json!({"original": ["huge"], "perturbed": ["low"]})
            )
            .is_err());
        assert!(tb
            .dispatch("cd_from_categories", &json!({"original": 3}))
            .is_err());
    }
}
