//! Report structure and emission. Cells are kept sorted and all maps
//! are ordered, so identical experiments serialize byte-identically.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub method: String,
    pub steps: usize,
    pub mean_ep: f64,
    pub std_ep: f64,
    /// Sum-form effectiveness over the cell's episodes:
    /// (sum(end) - sum(start)) / (sum(sup) - sum(start)).
    pub aggregate_ep: f64,
    pub n: usize,
    pub degenerate_count: usize,
    pub mean_s_activations: f64,
    /// Paired sign-flip permutation p-value against the reference
    /// method; null on the reference's own rows.
    pub p_value_permutation: Option<f64>,
    pub p_value_ttest: Option<f64>,
    /// Set when this cell aborted; other cells proceed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub provenance: Provenance,
    pub reference_method: String,
    pub cells: Vec<ReportCell>,
}

impl Report {
    pub fn sort_cells(&mut self) {
        self.cells
            .sort_by(|a, b| a.method.cmp(&b.method).then(a.steps.cmp(&b.steps)));
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("method,steps,mean_ep,std,n,p_value\n");
        for cell in &self.cells {
            let p = cell
                .p_value_permutation
                .map(|p| format!("{p}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.method, cell.steps, cell.mean_ep, cell.std_ep, cell.n, p
            ));
        }
        out
    }
}

/// Writes `report.json` and `report.csv` into the directory, creating
/// it if needed; returns both paths.
pub fn emit_report(report: &Report, directory: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(directory)?;
    let json_path = directory.join("report.json");
    let csv_path = directory.join("report.csv");
    std::fs::write(&json_path, report.to_json_string()?)?;
    std::fs::write(&csv_path, report.to_csv_string())?;
    Ok((json_path, csv_path))
}
