//! Human rating files: one row per rater per scenario with 0/1 goal and
//! option checkboxes.
//!
//! ```text
//! rater_id,scenario,goal_g1,goal_g2,option_k1,option_k2
//! r01,ambiguous-predicates,1,0,0,1
//! ```
//!
//! Blank cells mean the column does not apply to that scenario.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct RatingRow {
    pub rater: String,
    pub scenario: String,
    pub goals: BTreeMap<String, f64>,
    pub options: BTreeMap<String, f64>,
}

impl RatingRow {
    /// Goal checkboxes normalized to a distribution; all zeros stay zeros.
    pub fn goal_distribution(&self) -> BTreeMap<String, f64> {
        let z: f64 = self.goals.values().sum();
        self.goals
            .iter()
            .map(|(g, v)| (g.clone(), if z > 0.0 { v / z } else { 0.0 }))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ratings {
    pub rows: Vec<RatingRow>,
}

impl Ratings {
    pub fn parse(text: &str) -> Result<Ratings, String> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| e.to_string())?.clone();
        if header.get(0) != Some("rater_id") || header.get(1) != Some("scenario") {
            return Err("header must start with rater_id,scenario".into());
        }
        enum Col {
            Goal(String),
            Option(String),
        }
        let cols: Vec<Col> = header
            .iter()
            .skip(2)
            .map(|h| {
                if let Some(g) = h.strip_prefix("goal_") {
                    Ok(Col::Goal(g.to_string()))
                } else if let Some(o) = h.strip_prefix("option_") {
                    Ok(Col::Option(o.to_string()))
                } else {
                    Err(format!("unexpected column '{h}'"))
                }
            })
            .collect::<Result<_, _>>()?;
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| format!("row {}: {e}", i + 2))?;
            let mut row = RatingRow {
                rater: rec.get(0).unwrap_or_default().to_string(),
                scenario: rec.get(1).unwrap_or_default().to_string(),
                goals: BTreeMap::new(),
                options: BTreeMap::new(),
            };
            for (col, cell) in cols.iter().zip(rec.iter().skip(2)) {
                if cell.is_empty() {
                    continue;
                }
                let v: f64 = match cell {
                    "0" => 0.0,
                    "1" => 1.0,
                    _ => return Err(format!("row {}: cell '{cell}' is not 0 or 1", i + 2)),
                };
                match col {
                    Col::Goal(g) => row.goals.insert(g.clone(), v),
                    Col::Option(o) => row.options.insert(o.clone(), v),
                };
            }
            rows.push(row);
        }
        Ok(Ratings { rows })
    }

    pub fn load(path: &Path) -> Result<Ratings, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Ratings::parse(&text)
    }

    pub fn raters(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.rater.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Rater-by-item matrix for `items` given as (scenario, id) pairs. Goal
    /// items use normalized checkboxes, option items the raw ones.
    pub fn matrix(&self, items: &[(String, String)], goals: bool) -> Vec<Vec<Option<f64>>> {
        self.raters()
            .iter()
            .map(|rater| {
                items
                    .iter()
                    .map(|(scn, id)| {
                        let row = self.rows.iter().find(|r| &r.rater == rater && &r.scenario == scn)?;
                        if goals {
                            row.goal_distribution().get(id).copied()
                        } else {
                            row.options.get(id).copied()
                        }
                    })
                    .collect()
            })
            .collect()
    }
}
