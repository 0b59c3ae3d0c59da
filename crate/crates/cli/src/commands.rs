//! The four subcommands. Each writes its artifacts and a `report.json` into
//! the output directory; the report is written even when a solve fails.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use ltn_core::diagnostics::{
    convergence_study_on, log_log_slope, modeling_error_study, property_suite_on, GlobalProblem, LocalForcing,
};
use ltn_core::optimizer::NormalSystem;
use ltn_core::reference;
use ltn_core::{
    standard_layout, Case, ConvergenceTable, CoupledProblem, Discretization, DomainLayout, Interval, KernelSpec,
    LtnSolution, SolveSettings,
};

use crate::config::{CaseKind, ExperimentConfig, LocalForcingChoice};
use crate::report::{self, CellReport, Report, Status, TableComparison};

/// Result of a subcommand: the report as written and whether it succeeded.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.report.status == Status::Ok
    }
}

fn settings(cfg: &ExperimentConfig) -> SolveSettings {
    SolveSettings {
        solver: cfg.solver,
        bfgs: cfg.bfgs,
    }
}

fn coupled_case(cfg: &ExperimentConfig) -> Result<Case> {
    Ok(match cfg.case {
        CaseKind::Patch => Case::Patch,
        CaseKind::M1 => Case::M1,
        CaseKind::M2 => Case::M2,
        CaseKind::A1 => Case::A1,
        CaseKind::A2 => Case::A2,
        CaseKind::Custom => Case::Custom(
            cfg.coefficients
                .ok_or_else(|| anyhow!("custom case without coefficients"))?,
        ),
        other => bail!("case {other} is not a single coupled problem"),
    })
}

/// The standard layout unless the configuration overrides ω_n or Ω_l.
pub fn layout(cfg: &ExperimentConfig, epsilon: f64) -> Result<DomainLayout> {
    if cfg.omega_n.is_none() && cfg.omega_l.is_none() {
        return Ok(standard_layout(epsilon)?);
    }
    let standard = standard_layout(epsilon)?;
    let omega_n = cfg.omega_n.unwrap_or(standard.omega_n);
    let omega_l = cfg.omega_l.unwrap_or(standard.omega_l);
    Ok(DomainLayout::new(epsilon, omega_n, omega_l)?)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot start the worker pool")
}

/// Runs `body` in a worker pool and turns its error into a failed report.
fn execute(
    command: &str,
    cfg: &ExperimentConfig,
    body: impl FnOnce(&mut Report) -> Result<()> + Send,
) -> Result<Outcome> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut report = Report::new(command, cfg);
    let result = pool(cfg.jobs)?.install(|| body(&mut report));
    if let Err(e) = result {
        report.status = Status::Failed;
        report.partial = !report.artifacts.is_empty();
        report.error = Some(format!("{e:#}"));
    }
    report.write(dir)?;
    Ok(Outcome { report })
}

/// A single horizon: one coupled case over the h list, the modeling sweep,
/// or the property suite.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    if cfg.epsilons.len() > 1 && cfg.case != CaseKind::ModelingSweep {
        bail!("run takes a single epsilon; use sweep for an epsilon list");
    }
    dispatch("run", cfg)
}

/// Every horizon in the epsilon list.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    dispatch("sweep", cfg)
}

/// The property suite at every (ε, h), whatever case is configured.
pub fn verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    execute("verify", cfg, |report| properties(cfg, report))
}

fn dispatch(command: &str, cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.case {
        CaseKind::ModelingSweep => execute(command, cfg, |report| modeling(cfg, report)),
        CaseKind::PropertySuite => execute(command, cfg, |report| properties(cfg, report)),
        _ => {
            let case = coupled_case(cfg)?;
            execute(command, cfg, |report| coupled(cfg, &case, report))
        }
    }
}

fn coupled(cfg: &ExperimentConfig, case: &Case, report: &mut Report) -> Result<()> {
    let dir = &cfg.output_dir;
    let exact = case.exact();
    let mut table = ConvergenceTable::default();
    for &eps in &cfg.epsilons {
        let layout = layout(cfg, eps)?;
        let study = convergence_study_on(case, &layout, cfg.kernel, &cfg.h_list, &settings(cfg))
            .with_context(|| format!("{case} with {} kernel, ε = {eps}", cfg.kernel.name()))?;
        for ((&h, sol), rec) in cfg.h_list.iter().zip(&study.solutions).zip(&study.table.records) {
            let name = report::solution_file_name(eps, h);
            report::write_solution(&dir.join(&name), sol)?;
            report.add_artifact(&name);
            report.cells.push(CellReport {
                epsilon: eps,
                h,
                optimizer: sol.report.clone(),
                theta_l: sol.controls.theta_l,
                e_un: rec.e_un,
                e_ul: rec.e_ul,
                e_thn: rec.e_thn,
                max_pointwise_error: exact.map(|u| max_pointwise_error(sol, u)),
                reference_h: study.reference_h,
                solution_file: name,
            });
            if cfg.dump_matrices {
                dump_matrices(dir, case, &layout, &KernelSpec::new(cfg.kernel, eps)?, h, report)?;
            }
        }
        if cfg.h_list.len() > 1 {
            record_orders(report, eps, &cfg.h_list, &study.table);
        }
        table.extend(study.table);
        report::write_table(&dir.join("table.csv"), &table)?;
        report.add_artifact("table.csv");
        report.table = table.records.clone();
    }
    Ok(())
}

fn max_pointwise_error(sol: &LtnSolution, exact: impl Fn(f64) -> f64) -> f64 {
    sol.plot_points()
        .into_iter()
        .map(|(x, v)| (v - exact(x)).abs())
        .fold(0.0, f64::max)
}

/// Least-squares orders of the three errors against h.
fn record_orders(report: &mut Report, eps: f64, h: &[f64], table: &ConvergenceTable) {
    let column = |f: fn(&ltn_core::ConvergenceRecord) -> f64| -> Vec<f64> { table.records.iter().map(f).collect() };
    for (name, values) in [
        ("e_un", column(|r| r.e_un)),
        ("e_ul", column(|r| r.e_ul)),
        ("e_thn", column(|r| r.e_thn)),
    ] {
        if values.iter().all(|v| *v > 0.0) {
            report
                .measured_constants
                .insert(format!("order_{name}[eps={eps}]"), log_log_slope(h, &values));
        }
    }
}

fn dump_matrices(
    dir: &Path,
    case: &Case,
    layout: &DomainLayout,
    kernel: &KernelSpec,
    h: f64,
    report: &mut Report,
) -> Result<()> {
    let eps = layout.epsilon;
    let disc = Arc::new(Discretization::new(layout, kernel, h)?);
    let problem = CoupledProblem::new(disc.clone(), &case.data(layout))?;
    let q = NormalSystem::assemble(&problem)?.q;
    let files = [
        format!("matrix_nonlocal_{eps}_{h}.txt"),
        format!("matrix_local_{eps}_{h}.txt"),
        format!("matrix_q_{eps}_{h}.txt"),
    ];
    report::write_band_matrix(&dir.join(&files[0]), disc.nonlocal.matrix())?;
    report::write_band_matrix(&dir.join(&files[1]), disc.local.matrix())?;
    report::write_dense_matrix(&dir.join(&files[2]), &q)?;
    for f in files {
        report.add_artifact(f);
    }
    Ok(())
}

fn modeling(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    if cfg.omega_n.is_some() || cfg.omega_l.is_some() {
        bail!("the modeling sweep runs on the standard layout only");
    }
    if cfg.h_list.len() != 1 {
        bail!("the modeling sweep takes a single h");
    }
    let problem = match cfg.coefficients {
        Some(c) => GlobalProblem::cubic(c),
        None => GlobalProblem::exponential(),
    }
    .with_local_forcing(match cfg.local_forcing {
        LocalForcingChoice::Zero => LocalForcing::ZeroInEta,
        LocalForcingChoice::Full => LocalForcing::Full,
    });
    let study = modeling_error_study(cfg.kernel, &problem, &cfg.epsilons, cfg.h_list[0], &settings(cfg))?;
    report::write_modeling(&cfg.output_dir.join("modeling.csv"), &study)?;
    report.add_artifact("modeling.csv");
    report
        .measured_constants
        .insert("modeling_order".into(), study.modeling_order);
    report.measured_constants.insert("fitted_c".into(), study.fitted_c);
    report.modeling = Some(study);
    Ok(())
}

fn properties(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    for &eps in &cfg.epsilons {
        let layout = layout(cfg, eps)?;
        let kernel = KernelSpec::new(cfg.kernel, eps)?;
        for &h in &cfg.h_list {
            let disc = Arc::new(Discretization::new(&layout, &kernel, h)?);
            let props = property_suite_on(disc, cfg.seed)?;
            let key = |name: &str| format!("{name}[eps={eps},h={h}]");
            let c = &mut report.measured_constants;
            c.insert(key("delta_hat"), props.delta_hat);
            c.insert(key("delta_sup"), props.delta_sup);
            c.insert(key("q_min_eigenvalue"), props.q_min_eigenvalue);
            c.insert(key("q_condition"), props.q_condition);
            c.insert(key("k_lower"), props.norm_ratio_bounds.0);
            c.insert(key("k_upper"), props.norm_ratio_bounds.1);
            c.insert(key("poincare_sup"), props.poincare_sup);
            if !props.all_passed() {
                report.status = Status::ChecksFailed;
            }
            report.properties.push(props);
        }
    }
    Ok(())
}

/// Recomputes the M.1 and M.2 tables for both kernels on the published
/// grids, one subdirectory per table, and compares them cell by cell.
pub fn reproduce_tables(cfg: &ExperimentConfig) -> Result<Outcome> {
    execute("reproduce-tables", cfg, |report| {
        let h_list = reference::Table::h_list();
        for table in reference::ALL {
            let slug = table.label.replace(['.', ' ', '/'], "").to_ascii_lowercase();
            let sub = cfg.output_dir.join(&slug);
            std::fs::create_dir_all(&sub).with_context(|| format!("cannot create {}", sub.display()))?;
            let mut computed = ConvergenceTable::default();
            for eps in table.epsilons() {
                let layout = standard_layout(eps)?;
                let study = convergence_study_on(&table.case, &layout, table.family, &h_list, &settings(cfg))
                    .with_context(|| format!("{} at ε = {eps}", table.label))?;
                for (&h, sol) in h_list.iter().zip(&study.solutions) {
                    let name = report::solution_file_name(eps, h);
                    report::write_solution(&sub.join(&name), sol)?;
                    report.add_artifact(format!("{slug}/{name}"));
                }
                computed.extend(study.table);
            }
            report::write_table(&sub.join("table.csv"), &computed)?;
            report.add_artifact(format!("{slug}/table.csv"));
            report.comparisons.push(TableComparison {
                label: table.label.to_owned(),
                directory: slug,
                comparison: reference::compare(table, &computed),
            });
        }
        Ok(())
    })
}

/// One-line summary of the subdomains.
pub fn describe_layout(layout: &DomainLayout) -> String {
    let show = |i: Interval| format!("({}, {})", i.a, i.b);
    format!(
        "Ω_n = {}, Ω_l = {}, overlap = {}",
        show(layout.nonlocal_domain),
        show(layout.omega_l),
        show(layout.overlap)
    )
}
