//! The JSON run report and the plain-text artifacts written beside it.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ltn_core::banded::BandMatrix;
use ltn_core::diagnostics::ModelingStudy;
use ltn_core::reference::Comparison;
use ltn_core::{ConvergenceRecord, ConvergenceTable, LtnSolution, PropertyReport, SolverReport};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Every solve finished but at least one property check failed.
    ChecksFailed,
    Failed,
}

/// One coupled solve.
#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub epsilon: f64,
    pub h: f64,
    pub optimizer: SolverReport,
    pub theta_l: f64,
    pub e_un: f64,
    pub e_ul: f64,
    pub e_thn: f64,
    /// Largest nodal error of the spliced solution, for cases with a closed
    /// form.
    pub max_pointwise_error: Option<f64>,
    /// Grid size of the reference solution the errors were measured
    /// against, for cases without a closed form.
    pub reference_h: Option<f64>,
    pub solution_file: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableComparison {
    pub label: String,
    pub directory: String,
    pub comparison: Comparison,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub status: Status,
    /// Set when the run stopped early; the listed artifacts are incomplete.
    pub partial: bool,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub artifacts: Vec<String>,
    pub cells: Vec<CellReport>,
    pub table: Vec<ConvergenceRecord>,
    pub modeling: Option<ModelingStudy>,
    pub properties: Vec<PropertyReport>,
    pub comparisons: Vec<TableComparison>,
    pub measured_constants: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_owned(),
            status: Status::Ok,
            partial: false,
            error: None,
            config: config.clone(),
            artifacts: Vec::new(),
            cells: Vec::new(),
            table: Vec::new(),
            modeling: None,
            properties: Vec::new(),
            comparisons: Vec::new(),
            measured_constants: BTreeMap::new(),
        }
    }

    pub fn config_output_dir(&self) -> &Path {
        &self.config.output_dir
    }

    /// Records an artifact path relative to the output directory.
    pub fn add_artifact(&mut self, name: impl Into<String>) {
        let name = name.into();
        if !self.artifacts.contains(&name) {
            self.artifacts.push(name);
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("report.json");
        let mut out = create(&path)?;
        serde_json::to_writer_pretty(&mut out, self)?;
        writeln!(out)?;
        out.flush()?;
        Ok(path)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// `solution_<eps>_<h>.dat`
pub fn solution_file_name(epsilon: f64, h: f64) -> String {
    format!("solution_{epsilon}_{h}.dat")
}

/// Whitespace-separated `x u` pairs of the spliced solution. Jumps of the
/// nonlocal state show up as repeated abscissae.
pub fn write_solution(path: &Path, solution: &LtnSolution) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# x u")?;
    for (x, u) in solution.plot_points() {
        writeln!(out, "{x:.17e} {u:.17e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_table(path: &Path, table: &ConvergenceTable) -> Result<()> {
    let out = create(path)?;
    table.write_csv(out)?;
    Ok(())
}

pub fn write_modeling(path: &Path, study: &ModelingStudy) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["epsilon", "coupling_error", "modeling_error"])?;
    for r in &study.rows {
        w.write_record([
            r.epsilon.to_string(),
            format!("{:.6e}", r.coupling_error),
            format!("{:.6e}", r.modeling_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_band_matrix(path: &Path, m: &BandMatrix) -> Result<()> {
    let mut out = create(path)?;
    m.write_coordinates(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_dense_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = create(path)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                writeln!(out, "{i} {j} {v:.17e}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
