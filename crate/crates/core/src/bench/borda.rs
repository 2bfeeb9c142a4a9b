//! Borda-count aggregation of per-case setting scores.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One score: a setting evaluated on one (model, dataset, op) case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub model: String,
    pub dataset: String,
    pub op: String,
    pub setting: String,
    pub score: f64,
}

pub type CaseKey = (String, String, String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: String,
    pub rank: usize,
    pub borda: f64,
    /// Mean of (score - baseline score) over cases, when a baseline is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePoints {
    pub model: String,
    pub dataset: String,
    pub op: String,
    pub points: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BordaTable {
    pub settings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    pub cases: Vec<CasePoints>,
    pub summary: Vec<SettingSummary>,
}

impl BordaTable {
    pub fn total(&self, setting: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.setting == setting)
            .map(|s| s.borda)
    }
}

/// Points `S-1 .. 0` by descending score; tied settings share the mean of
/// the points their positions span.
pub fn case_points(scores: &[(String, f64)]) -> BTreeMap<String, f64> {
    let s = scores.len();
    let mut order: Vec<&(String, f64)> = scores.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut points = BTreeMap::new();
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && order[j + 1].1 == order[i].1 {
            j += 1;
        }
        let span: f64 = (i..=j).map(|r| (s - 1 - r) as f64).sum();
        let mean = span / (j - i + 1) as f64;
        for entry in &order[i..=j] {
            points.insert(entry.0.clone(), mean);
        }
        i = j + 1;
    }
    points
}

/// Aggregates `cells` over every (model, dataset, op) case. The baseline, if
/// given, need not be one of the ranked settings but must be scored in every
/// case.
pub fn borda_aggregate(
    cells: &[ScoreCell],
    settings: &[String],
    baseline: Option<&str>,
) -> Result<BordaTable> {
    if settings.len() < 2 {
        return Err(Error::Aggregation(
            "need at least two settings to rank".into(),
        ));
    }
    let mut grid: BTreeMap<CaseKey, BTreeMap<&str, f64>> = BTreeMap::new();
    for c in cells {
        let key = (c.model.clone(), c.dataset.clone(), c.op.clone());
        if grid
            .entry(key)
            .or_default()
            .insert(&c.setting, c.score)
            .is_some()
        {
            return Err(Error::Aggregation(format!(
                "duplicate score for ({}, {}, {}, {})",
                c.model, c.dataset, c.op, c.setting
            )));
        }
    }
    if grid.is_empty() {
        return Err(Error::Aggregation("no scores to aggregate".into()));
    }
    let mut required: BTreeSet<&str> = settings.iter().map(String::as_str).collect();
    if let Some(b) = baseline {
        required.insert(b);
    }
    let mut totals: BTreeMap<&str, f64> = settings.iter().map(|s| (s.as_str(), 0.0)).collect();
    let mut deltas: BTreeMap<&str, f64> = totals.clone();
    let mut cases = Vec::new();
    for ((model, dataset, op), row) in &grid {
        if let Some(missing) = required.iter().find(|s| !row.contains_key(**s)) {
            return Err(Error::Aggregation(format!(
                "missing score for setting {missing} in case ({model}, {dataset}, {op})"
            )));
        }
        let scores: Vec<(String, f64)> = settings
            .iter()
            .map(|s| (s.clone(), row[s.as_str()]))
            .collect();
        let points = case_points(&scores);
        for (s, p) in &points {
            *totals.get_mut(s.as_str()).expect("ranked setting") += p;
        }
        if let Some(b) = baseline {
            for s in settings {
                *deltas.get_mut(s.as_str()).expect("ranked setting") += row[s.as_str()] - row[b];
            }
        }
        cases.push(CasePoints {
            model: model.clone(),
            dataset: dataset.clone(),
            op: op.clone(),
            points,
        });
    }
    let n_cases = cases.len() as f64;
    let mut summary: Vec<SettingSummary> = settings
        .iter()
        .map(|s| SettingSummary {
            setting: s.clone(),
            rank: 0,
            borda: totals[s.as_str()],
            delta: baseline.map(|_| deltas[s.as_str()] / n_cases),
        })
        .collect();
    // competition ranking: equal totals share the best rank
    let by_total: Vec<f64> = summary.iter().map(|s| s.borda).collect();
    for s in &mut summary {
        s.rank = 1 + by_total.iter().filter(|t| **t > s.borda).count();
    }
    Ok(BordaTable {
        settings: settings.to_vec(),
        baseline: baseline.map(str::to_string),
        cases,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(scores: &[f64]) -> Vec<(String, f64)> {
        scores
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("s{i}"), *s))
            .collect()
    }

    #[test]
    fn distinct_scores() {
        let p = case_points(&named(&[0.1, 0.5, 0.3, 0.9, 0.0]));
        let got: Vec<f64> = (0..5).map(|i| p[&format!("s{i}")]).collect();
        assert_eq!(got, vec![1.0, 3.0, 2.0, 4.0, 0.0]);
    }

    #[test]
    fn tie_for_second() {
        let p = case_points(&named(&[0.9, 0.5, 0.5, 0.2, 0.1]));
        let got: Vec<f64> = (0..5).map(|i| p[&format!("s{i}")]).collect();
        assert_eq!(got, vec![4.0, 2.5, 2.5, 1.0, 0.0]);
        assert_eq!(got.iter().sum::<f64>(), 10.0);
    }

    #[test]
    fn all_equal_cases() {
        let settings: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let mut cells = Vec::new();
        for case in 0..72 {
            for s in &settings {
                cells.push(ScoreCell {
                    model: format!("m{}", case / 9),
                    dataset: format!("d{}", case % 3),
                    op: format!("o{}", (case / 3) % 3),
                    setting: s.clone(),
                    score: 0.5,
                });
            }
        }
        let t = borda_aggregate(&cells, &settings, None).unwrap();
        assert_eq!(t.cases.len(), 72);
        assert!(t.summary.iter().all(|s| s.borda == 144.0 && s.rank == 1));
    }

    #[test]
    fn missing_cell_is_named() {
        let settings = vec!["a".to_string(), "b".to_string()];
        let cells = vec![ScoreCell {
            model: "m".into(),
            dataset: "d".into(),
            op: "add".into(),
            setting: "a".into(),
            score: 1.0,
        }];
        let err = borda_aggregate(&cells, &settings, None)
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("setting b") && err.contains("(m, d, add)"),
            "{err}"
        );
    }

    #[test]
    fn delta_against_unranked_baseline() {
        let settings = vec!["rag".to_string(), "few".to_string()];
        let cell = |setting: &str, op: &str, score: f64| ScoreCell {
            model: "m".into(),
            dataset: "d".into(),
            op: op.into(),
            setting: setting.into(),
            score,
        };
        let cells = vec![
            cell("zero", "add", 0.1),
            cell("rag", "add", 0.3),
            cell("few", "add", 0.2),
            cell("zero", "delete", 0.5),
            cell("rag", "delete", 0.5),
            cell("few", "delete", 0.6),
        ];
        let t = borda_aggregate(&cells, &settings, Some("zero")).unwrap();
        let rag = t.summary.iter().find(|s| s.setting == "rag").unwrap();
        assert!((rag.delta.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(rag.borda, 1.0);
        assert_eq!(rag.rank, 1);
        assert_eq!(t.total("few"), Some(1.0));
    }
}
