use serde::{Deserialize, Serialize};

use crate::model::{Operation, PoiId};
use crate::record::PerturbationRecord;

pub const DEFAULT_MEMORY_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub seq_id: String,
    pub position: usize,
    pub poi_in: Option<PoiId>,
    pub poi_out: Option<PoiId>,
}

/// Append-only history of accepted perturbations for one (corpus, operation)
/// stream. Only the newest `window` entries are rendered into prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryLog {
    pub corpus: String,
    pub op: Operation,
    pub window: usize,
    pub entries: Vec<MemoryEntry>,
}

impl MemoryLog {
    pub fn new(corpus: impl Into<String>, op: Operation, window: usize) -> Self {
        MemoryLog {
            corpus: corpus.into(),
            op,
            window,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: MemoryEntry) {
        self.entries.push(entry);
    }

    pub fn recent(&self) -> &[MemoryEntry] {
        let start = self.entries.len().saturating_sub(self.window);
        &self.entries[start..]
    }

    pub fn render(&self) -> String {
        let recent = self.recent();
        if recent.is_empty() {
            return "Memory: no prior perturbations.".to_string();
        }
        let mut out = format!(
            "Memory: {} earlier {} perturbations (most recent last). Avoid reusing these \
             positions and POIs; prefer different positions and different candidate POIs.\n",
            recent.len(),
            self.op
        );
        for e in recent {
            let fmt = |id: &Option<PoiId>| id.as_ref().map_or("-".to_string(), |p| p.to_string());
            out.push_str(&format!(
                "- itinerary {} | position {} | poi_in {} | poi_out {}\n",
                e.seq_id,
                e.position,
                fmt(&e.poi_in),
                fmt(&e.poi_out)
            ));
        }
        out
    }
}

/// Appends an accepted record to the log.
pub fn record_memory(memory: &mut MemoryLog, record: &PerturbationRecord) {
    let p = &record.perturbation;
    memory.push(MemoryEntry {
        seq_id: p.original.seq_id.clone(),
        position: p.position,
        poi_in: p.poi_in.as_ref().map(|x| x.id.clone()),
        poi_out: p.poi_out.as_ref().map(|x| x.id.clone()),
    });
}
