//! Perturbation records and their JSONL row format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::disruption::{Assessment, DisruptionVerdict};
use crate::error::{Error, Result};
use crate::model::{Intent, IntentSet, Itinerary, Operation, Perturbation, PoiCatalog, PoiId};

pub const SCHEMA_VERSION: u32 = 1;

/// One verified row of the synthesized dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRecord {
    pub corpus: String,
    pub perturbation: Perturbation,
    pub intents: IntentSet,
    pub assessment: Assessment,
}

impl PerturbationRecord {
    /// True iff every requested intent was disrupted.
    pub fn satisfied(&self) -> bool {
        self.assessment.satisfies(self.intents)
    }

    pub fn to_row(&self) -> RecordRow {
        let p = &self.perturbation;
        RecordRow {
            schema_version: SCHEMA_VERSION,
            corpus: self.corpus.clone(),
            seq_id: p.original.seq_id.clone(),
            user_id: p.original.user_id.clone(),
            op: p.op,
            intents: self.intents,
            position: p.position,
            poi_in: p.poi_in.as_ref().map(|x| x.id.clone()),
            poi_out: p.poi_out.as_ref().map(|x| x.id.clone()),
            original: p.original.ids(),
            perturbed: p.perturbed.ids(),
            verdicts: self.assessment.flags(),
            diagnostics: self.assessment.verdicts.clone(),
        }
    }

    /// Rebuilds a record from its row, re-deriving the perturbed itinerary
    /// from the edit and checking it against the stored one.
    pub fn from_row(row: &RecordRow, catalog: &PoiCatalog) -> Result<Self> {
        if row.schema_version > SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "record schema_version {} is newer than supported {SCHEMA_VERSION}",
                row.schema_version
            )));
        }
        let original = Itinerary::resolve(&row.seq_id, &row.user_id, &row.original, catalog)?;
        let poi_in = row
            .poi_in
            .as_ref()
            .map(|id| {
                catalog
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::Domain(format!("unknown poi_in {id}")))
            })
            .transpose()?;
        let perturbation = Perturbation::apply(&original, row.op, row.position, poi_in)?;
        if perturbation.perturbed.ids() != row.perturbed {
            return Err(Error::Structural(format!(
                "record {}: stored perturbed itinerary does not match the edit",
                row.seq_id
            )));
        }
        if perturbation.poi_out.as_ref().map(|p| &p.id) != row.poi_out.as_ref() {
            return Err(Error::Structural(format!(
                "record {}: poi_out does not match the edit",
                row.seq_id
            )));
        }
        Ok(PerturbationRecord {
            corpus: row.corpus.clone(),
            perturbation,
            intents: row.intents,
            assessment: Assessment {
                verdicts: row.diagnostics.clone(),
            },
        })
    }
}

/// JSONL row. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub schema_version: u32,
    pub corpus: String,
    pub seq_id: String,
    #[serde(default)]
    pub user_id: String,
    pub op: Operation,
    pub intents: IntentSet,
    pub position: usize,
    pub poi_in: Option<PoiId>,
    pub poi_out: Option<PoiId>,
    pub original: Vec<PoiId>,
    pub perturbed: Vec<PoiId>,
    pub verdicts: BTreeMap<Intent, bool>,
    pub diagnostics: BTreeMap<Intent, DisruptionVerdict>,
}
