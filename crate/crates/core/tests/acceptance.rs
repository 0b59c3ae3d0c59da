//! Acceptance harness. Runs every criterion, prints one verdict line per
//! criterion and exits non-zero when a verdict differs from the expected
//! outcome. Criteria with a documented deviation are listed in
//! `EXPECTED_FAILURES`; they still run in full and print `FAIL`, and the
//! harness errors out if the set of failing cells changes in either
//! direction.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ltn_core::cases::{Case, Cubic};
use ltn_core::diagnostics::{
    convergence_study, gradient_check, log_log_slope, modeling_error_study, operator_residual, property_suite,
    solve_case, ConvergenceTable, GlobalProblem, SolveSettings,
};
use ltn_core::geometry::standard_layout;
use ltn_core::reference::{
    self, Table, ERROR_REL_TOL, M1_INTEGRABLE, M1_SINGULAR, M2_INTEGRABLE, M2_SINGULAR, RATE_ABS_TOL,
};
use ltn_core::state::{CoupledProblem, Discretization};
use ltn_core::{KernelFamily, KernelSpec, Solver};
use rayon::prelude::*;

const PATCH_TOL: f64 = 1e-10;
const PATCH_SAMPLES: usize = 1000;
const PATCH_BUDGET: Duration = Duration::from_secs(5);
const TABLE_BUDGET: Duration = Duration::from_secs(120);
const GRADIENT_TOL: f64 = 1e-6;
const GRADIENT_SAMPLES: usize = 20;
const SOLVER_AGREEMENT_TOL: f64 = 1e-8;
const NORM_DRIFT_TOL: f64 = 0.20;
const MODELING_ORDER_MIN: f64 = 1.9;
const MODELING_BUDGET: Duration = Duration::from_secs(300);
const OPERATOR_EXACT_TOL: f64 = 1e-10;
const OPERATOR_ORDER_MIN: f64 = 2.0;
const SEED: u64 = 20_160_415;

const FAMILIES: [KernelFamily; 2] = [KernelFamily::IntegrableConstant, KernelFamily::SingularPeridynamic];
const EPSILONS: [f64; 2] = [0.010, 0.065];

/// Cells known to miss the published values, as
/// `(criterion, table, ε, k, column)` with `h = 2⁻ᵏ`. Both deviations are
/// analysed in the README.
const EXPECTED_FAILURES: &[(u8, &str, f64, i32, &str)] = &[
    (4, "M.1 / singular", 0.010, 7, "e_un"),
    (4, "M.1 / singular", 0.010, 7, "rate_un"),
    (4, "M.1 / singular", 0.010, 7, "e_ul"),
    (4, "M.2 / singular", 0.010, 7, "rate_thn"),
];

fn h_list() -> Vec<f64> {
    (3..=7).map(|k| 2f64.powi(-k)).collect()
}

struct Verdict {
    id: u8,
    name: &'static str,
    passed: bool,
    detail: String,
    /// Keys of table cells outside tolerance.
    failed_cells: BTreeSet<String>,
    /// Whether every requirement other than the cell comparison held.
    budget_ok: bool,
}

impl Verdict {
    fn new(id: u8, name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            id,
            name,
            passed,
            detail,
            failed_cells: BTreeSet::new(),
            budget_ok: true,
        }
    }
}

fn patch_test() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for family in FAMILIES {
        let kernel = KernelSpec::new(family, 0.065).unwrap();
        let (_, sol) = solve_case(&Case::Patch, &kernel, 2f64.powi(-7), &SolveSettings::default()).unwrap();
        let layout = sol.layout();
        let (a, b) = (layout.nonlocal_domain.a, layout.gamma_d);
        let err = (0..PATCH_SAMPLES)
            .map(|i| {
                let x = (a + (b - a) * i as f64 / (PATCH_SAMPLES - 1) as f64).min(b);
                (sol.eval(x).expect("sample inside Ω") - x).abs()
            })
            .fold(0.0, f64::max);
        worst = worst.max(err);
        let _ = write!(detail, "{}: {err:.1e}; ", family.name());
    }
    let elapsed = start.elapsed();
    let _ = write!(detail, "{:.2} s", elapsed.as_secs_f64());
    Verdict::new(
        1,
        "patch test u = x",
        worst <= PATCH_TOL && elapsed < PATCH_BUDGET,
        detail,
    )
}

fn table_criterion(id: u8, name: &'static str, tables: &[&Table]) -> Verdict {
    let start = Instant::now();
    let mut checked = 0;
    let mut failed = Vec::new();
    for table in tables {
        let mut computed = ConvergenceTable::default();
        for eps in table.epsilons() {
            let study = convergence_study(
                &table.case,
                table.family,
                eps,
                &Table::h_list(),
                &SolveSettings::default(),
            );
            computed.extend(study.unwrap().table);
        }
        let comparison = reference::compare(table, &computed);
        checked += comparison.checked;
        failed.extend(comparison.mismatches);
    }
    let elapsed = start.elapsed();
    let mut detail = format!(
        "{} of {checked} cells within {}% / ±{RATE_ABS_TOL}; {:.1} s",
        checked - failed.len(),
        100.0 * ERROR_REL_TOL,
        elapsed.as_secs_f64()
    );
    for m in &failed {
        let _ = if m.key.contains("rate") {
            write!(detail, "\n         {}: {:.2} vs {:.2}", m.key, m.computed, m.published)
        } else {
            write!(
                detail,
                "\n         {}: {:.3e} vs {:.2e}",
                m.key, m.computed, m.published
            )
        };
    }
    let budget_ok = elapsed < TABLE_BUDGET * tables.len() as u32;
    Verdict {
        id,
        name,
        passed: failed.is_empty() && budget_ok,
        detail,
        failed_cells: failed.into_iter().map(|m| m.key).collect(),
        budget_ok,
    }
}

fn gradient_criterion() -> Verdict {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for family in FAMILIES {
        let kernel = KernelSpec::new(family, 0.065).unwrap();
        let layout = standard_layout(0.065).unwrap();
        let disc = Arc::new(Discretization::new(&layout, &kernel, 2f64.powi(-5)).unwrap());
        let problem = CoupledProblem::new(disc, &Case::M1.data(&layout)).unwrap();
        let err = gradient_check(&problem, GRADIENT_SAMPLES, SEED).unwrap();
        worst = worst.max(err);
        let _ = write!(detail, "{}: {err:.1e}; ", family.name());
    }
    let detail = detail.trim_end_matches("; ").to_string();
    Verdict::new(
        5,
        "adjoint gradient vs central differences",
        worst <= GRADIENT_TOL,
        detail,
    )
}

fn solver_agreement() -> Verdict {
    let mut cells = Vec::new();
    for case in [Case::M1, Case::M2] {
        for family in FAMILIES {
            for eps in EPSILONS {
                for h in h_list() {
                    cells.push((case, family, eps, h));
                }
            }
        }
    }
    let gaps: Vec<f64> = cells
        .par_iter()
        .map(|&(case, family, eps, h)| {
            let kernel = KernelSpec::new(family, eps).unwrap();
            let normal = solve_case(&case, &kernel, h, &SolveSettings::default()).unwrap().1;
            let settings = SolveSettings {
                solver: Solver::Bfgs,
                ..Default::default()
            };
            let bfgs = solve_case(&case, &kernel, h, &settings).unwrap().1;
            normal.controls.max_abs_diff(&bfgs.controls)
        })
        .collect();
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    Verdict::new(
        6,
        "BFGS vs normal equations",
        worst <= SOLVER_AGREEMENT_TOL,
        format!(
            "max ‖θ_bfgs − θ_normal‖∞ = {worst:.1e} over {} configurations",
            gaps.len()
        ),
    )
}

fn drift(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    (hi - lo) / lo
}

fn property_criterion() -> Verdict {
    let mut passed = true;
    let mut detail = String::new();
    for family in FAMILIES {
        for eps in EPSILONS {
            let kernel = KernelSpec::new(family, eps).unwrap();
            let reports: Vec<_> = h_list()
                .par_iter()
                .map(|&h| property_suite(&kernel, h, SEED).unwrap())
                .collect();
            let q_min = reports.iter().map(|r| r.q_min_eigenvalue).fold(f64::INFINITY, f64::min);
            let delta = reports.iter().map(|r| r.delta_hat).fold(0.0, f64::max);
            let lower: Vec<f64> = reports.iter().map(|r| r.norm_ratio_bounds.0).collect();
            let upper: Vec<f64> = reports.iter().map(|r| r.norm_ratio_bounds.1).collect();
            let (d_lo, d_hi) = (drift(&lower), drift(&upper));
            let poincare_ok = reports
                .iter()
                .all(|r| r.poincare_sup.is_finite() && r.poincare_sampled <= r.poincare_sup * (1.0 + 1e-9));
            let poincare_max = reports.iter().map(|r| r.poincare_sup).fold(0.0, f64::max);
            let ok = q_min > 0.0 && delta < 1.0 && d_lo <= NORM_DRIFT_TOL && d_hi <= NORM_DRIFT_TOL && poincare_ok;
            passed &= ok;
            let _ = write!(
                detail,
                "\n         {} eps={eps}: min λ(Q) {q_min:.2e}, δ̂ {delta:.4}, K_* drift {:.1}%, K* drift {:.1}%, Poincaré ≤ {poincare_max:.3}",
                family.name(),
                100.0 * d_lo,
                100.0 * d_hi
            );
        }
    }
    Verdict::new(7, "property suite", passed, detail)
}

fn modeling_criterion() -> Verdict {
    let start = Instant::now();
    let study = modeling_error_study(
        KernelFamily::IntegrableConstant,
        &GlobalProblem::exponential(),
        &[0.08, 0.04, 0.02, 0.01],
        2f64.powi(-8),
        &SolveSettings::default(),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let bounded = study
        .rows
        .iter()
        .all(|r| r.coupling_error <= study.fitted_c * r.modeling_error);
    let ratios: Vec<String> = study
        .rows
        .iter()
        .map(|r| format!("{:.3}", r.coupling_error / r.modeling_error))
        .collect();
    Verdict::new(
        8,
        "modeling and coupling error in ε",
        study.modeling_order >= MODELING_ORDER_MIN && bounded && elapsed < MODELING_BUDGET,
        format!(
            "order {:.3}, C = {:.3} (ratios {}), {:.1} s",
            study.modeling_order,
            study.fitted_c,
            ratios.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn operator_criterion() -> Verdict {
    let hs = h_list();
    let mut passed = true;
    let mut detail = String::new();
    for family in FAMILIES {
        let kernel = KernelSpec::new(family, 0.065).unwrap();
        for (label, p) in [
            ("x^2", Cubic([0.0, 0.0, 1.0, 0.0])),
            ("x^3", Cubic([0.0, 0.0, 0.0, 1.0])),
        ] {
            let res: Vec<f64> = hs.iter().map(|&h| operator_residual(&kernel, p, h).unwrap()).collect();
            let worst = res.iter().copied().fold(0.0, f64::max);
            let ok = if worst <= OPERATOR_EXACT_TOL {
                let _ = write!(detail, "{} {label}: exact (≤ {worst:.0e}); ", family.name());
                true
            } else {
                let order = log_log_slope(&hs, &res);
                let _ = write!(detail, "{} {label}: order {order:.2}; ", family.name());
                order >= OPERATOR_ORDER_MIN
            };
            passed &= ok;
        }
    }
    Verdict::new(
        9,
        "operator consistency on cubics",
        passed,
        detail.trim_end_matches("; ").to_string(),
    )
}

fn main() -> ExitCode {
    let verdicts = vec![
        patch_test(),
        table_criterion(2, "M.1 convergence, integrable kernel", &[&M1_INTEGRABLE]),
        table_criterion(3, "M.2 convergence, integrable kernel", &[&M2_INTEGRABLE]),
        table_criterion(
            4,
            "M.1 and M.2 convergence, singular kernel",
            &[&M1_SINGULAR, &M2_SINGULAR],
        ),
        gradient_criterion(),
        solver_agreement(),
        property_criterion(),
        modeling_criterion(),
        operator_criterion(),
    ];

    let mut unexpected = 0;
    for v in &verdicts {
        let expected: BTreeSet<String> = EXPECTED_FAILURES
            .iter()
            .filter(|(id, ..)| *id == v.id)
            .map(|(_, table, eps, k, col)| format!("{table} eps={eps} h=2^-{k} {col}"))
            .collect();
        let matches_expectation = !expected.is_empty() && v.budget_ok && v.failed_cells == expected;
        let tag = match (v.passed, matches_expectation) {
            (true, _) if expected.is_empty() => "PASS",
            (true, _) => {
                unexpected += 1;
                "PASS (expected failure no longer fails)"
            }
            (false, true) => "FAIL (expected)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("[{tag}] C{} {}: {}", v.id, v.name, v.detail);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{unexpected} criterion verdict(s) differ from expectations");
        ExitCode::FAILURE
    }
}
