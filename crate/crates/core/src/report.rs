//! Serialized kill matrix, per-relation CSV, plot data and the text summary.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{Cell, KillMatrix};
use crate::mutation::Mutant;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("SCHEMA_ERROR: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("SCHEMA_ERROR: {0}")]
    Inconsistent(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub seed: u64,
    pub config_hash: String,
    pub mutant_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MrRow {
    pub mr: u8,
    pub killed: usize,
    pub alive: usize,
    pub error: usize,
    pub applicable: usize,
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overall {
    pub killed_distinct: usize,
    pub total: usize,
    pub rate: f64,
}

/// On-disk form of a [`KillMatrix`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixReport {
    pub meta: Meta,
    pub cells: Vec<Cell>,
    pub per_mr: Vec<MrRow>,
    pub overall: Overall,
}

impl MatrixReport {
    pub fn from_matrix(m: &KillMatrix) -> Self {
        let per_mr = m
            .mrs
            .iter()
            .map(|&mr| {
                let c = m.counts(mr);
                MrRow {
                    mr,
                    killed: c.killed,
                    alive: c.alive,
                    error: c.error,
                    applicable: c.applicable,
                    rate: c.rate(),
                }
            })
            .collect();
        MatrixReport {
            meta: Meta {
                seed: m.seed,
                config_hash: m.config_hash.clone(),
                mutant_count: m.mutants.len(),
            },
            cells: m.cells.clone(),
            per_mr,
            overall: Overall {
                killed_distinct: m.killed_distinct().len(),
                total: m.mutants.len(),
                rate: m.overall_detection(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Parses and cross-checks a serialized report.
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let r: MatrixReport = serde_json::from_str(text)?;
        if r.overall.total != r.meta.mutant_count {
            return Err(ReportError::Inconsistent(
                "overall.total != meta.mutant_count".into(),
            ));
        }
        for row in &r.per_mr {
            let cells = r.cells.iter().filter(|c| c.mr == row.mr).count();
            if cells != row.killed + row.alive + row.error {
                return Err(ReportError::Inconsistent(format!(
                    "MR{} cell count mismatch",
                    row.mr
                )));
            }
        }
        Ok(r)
    }

    pub fn per_mr_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["mr", "killed", "alive", "error", "applicable", "rate"])?;
        for row in &self.per_mr {
            w.write_record([
                format!("MR{}", row.mr),
                row.killed.to_string(),
                row.alive.to_string(),
                row.error.to_string(),
                row.applicable.to_string(),
                fmt_rate(row.rate),
            ])?;
        }
        finish(w)
    }

    pub fn plot_data_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["mr_id", "kill_rate"])?;
        for row in &self.per_mr {
            w.write_record([row.mr.to_string(), fmt_rate(row.rate)])?;
        }
        finish(w)
    }

    /// Per-relation table followed by the overall detection line.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<6}{:>8}{:>8}{:>8}{:>12}{:>11}",
            "MR", "killed", "alive", "error", "applicable", "kill_rate"
        );
        for row in &self.per_mr {
            let _ = writeln!(
                out,
                "{:<6}{:>8}{:>8}{:>8}{:>12}{:>11}",
                format!("MR{}", row.mr),
                row.killed,
                row.alive,
                row.error,
                row.applicable,
                fmt_rate(row.rate)
            );
        }
        let _ = writeln!(
            out,
            "overall detection: {} of {} mutants killed ({})",
            self.overall.killed_distinct,
            self.overall.total,
            fmt_rate(Some(self.overall.rate))
        );
        out
    }
}

pub fn fmt_rate(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{r:.4}"),
        None => "n/a".into(),
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Inconsistent(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Mutant table with columns id, kind/operator, label, original_op,
/// mutated_op, equivalent_hint.
pub fn mutants_csv(mutants: &[Mutant]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "id",
        "kind/operator",
        "label",
        "original_op",
        "mutated_op",
        "equivalent_hint",
    ])?;
    for m in mutants {
        w.write_record([
            m.mutant_id.to_string(),
            format!("{}/{}", m.original_op.kind(), m.operator),
            m.label.clone(),
            m.original_op.name().to_string(),
            m.mutated_op.name().to_string(),
            m.equivalent_hint.to_string(),
        ])?;
    }
    finish(w)
}

/// Site table with the same columns; operator-specific columns are left
/// empty.
pub fn sites_csv(sites: &[crate::mutation::MutationSite]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "id",
        "kind/operator",
        "label",
        "original_op",
        "mutated_op",
        "equivalent_hint",
    ])?;
    for s in sites {
        w.write_record([
            s.site_id.to_string(),
            s.kind.to_string(),
            s.label.clone(),
            s.original_op.name().to_string(),
            String::new(),
            String::new(),
        ])?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TestEnv;
    use crate::harness::run_matrix;
    use crate::mutation::{contract_mutants, SiteRegistry};
    use crate::relations::targeted_mutant;

    fn small_report() -> MatrixReport {
        let env = TestEnv::default();
        let mutants = vec![targeted_mutant(2).unwrap(), targeted_mutant(9).unwrap()];
        MatrixReport::from_matrix(&run_matrix(&[2, 9], &mutants, &env).unwrap())
    }

    #[test]
    fn json_round_trip() {
        let r = small_report();
        let back = MatrixReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.summary(), r.summary());
    }

    #[test]
    fn json_shape() {
        let v: serde_json::Value = serde_json::from_str(&small_report().to_json()).unwrap();
        for key in ["seed", "config_hash", "mutant_count"] {
            assert!(v["meta"].get(key).is_some());
        }
        assert!(v["cells"][0].get("outcome").is_some());
        assert!(v["per_mr"][0].get("rate").is_some());
        assert!(v["overall"].get("killed_distinct").is_some());
    }

    #[test]
    fn corrupted_input_is_a_schema_error() {
        assert!(matches!(
            MatrixReport::from_json("{not json"),
            Err(ReportError::Schema(_))
        ));
        assert!(matches!(
            MatrixReport::from_json("{}"),
            Err(ReportError::Schema(_))
        ));
        let mut r = small_report();
        r.overall.total += 1;
        assert!(matches!(
            MatrixReport::from_json(&r.to_json()),
            Err(ReportError::Inconsistent(_))
        ));
    }

    #[test]
    fn undefined_rates_render_as_na() {
        let mut r = small_report();
        r.per_mr[0].rate = None;
        assert!(r
            .plot_data_csv()
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .ends_with("n/a"));
        assert!(r.summary().contains("n/a"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert!(v["per_mr"][0]["rate"].is_null());
    }

    #[test]
    fn csv_tables() {
        let r = small_report();
        let per_mr = r.per_mr_csv().unwrap();
        assert!(per_mr.starts_with("mr,killed,alive,error,applicable,rate\n"));
        assert_eq!(per_mr.lines().count(), 3);
        let mutants = mutants_csv(&contract_mutants()).unwrap();
        assert!(
            mutants.starts_with("id,kind/operator,label,original_op,mutated_op,equivalent_hint\n")
        );
        let sites = sites_csv(SiteRegistry::contract().sites()).unwrap();
        assert_eq!(sites.lines().count(), SiteRegistry::contract().len() + 1);
    }
}
