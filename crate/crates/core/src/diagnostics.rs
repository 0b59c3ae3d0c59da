//! Error norms, convergence tables, the modeling-error study and numerical
//! probes of the structural properties of the coupled method.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bfgs::BfgsOptions;
use crate::cases::{Case, Cubic};
use crate::error::{LtnError, Result};
use crate::fem::{assemble_load, assemble_nonlocal_stiffness, DgField, LoadSpec, PiecewiseLinear, ScalarFn, Space};
use crate::geometry::{build_meshes, global_nonlocal_mesh, standard_layout, DomainLayout, Interval, SNAP_TOL};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::optimizer::{objective_and_gradient, solve, LtnSolution, NormalSystem, Solver};
use crate::quadrature::gauss;
use crate::state::{
    solve_global_nonlocal, solve_local_state, ControlPair, CoupledProblem, Discretization, Part, ProblemData,
};

const ERROR_POINTS: usize = 6;

/// `‖field − exact‖_{0,region}` by Gauss quadrature on every element piece
/// inside `region`, further split at `breakpoints`.
pub fn l2_error(field: &dyn PiecewiseLinear, exact: &dyn Fn(f64) -> f64, region: Interval, breakpoints: &[f64]) -> f64 {
    let mesh = field.mesh();
    let rule = gauss(ERROR_POINTS);
    let mut sum = 0.0;
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let (lo, hi) = (a.max(region.a), b.min(region.b));
        if hi - lo <= SNAP_TOL {
            continue;
        }
        let mut cuts = vec![lo, hi];
        cuts.extend(breakpoints.iter().copied().filter(|&p| lo < p && p < hi));
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            for (x, wt) in rule.mapped(w[0], w[1]) {
                let d = field.eval_in(e, x) - exact(x);
                sum += wt * d * d;
            }
        }
    }
    sum.sqrt()
}

/// `‖a − b‖_{0,region}` for two piecewise linear fields, exact on the merged
/// breakpoints of both meshes.
pub fn l2_distance(a: &dyn PiecewiseLinear, b: &dyn PiecewiseLinear, region: Interval) -> f64 {
    l2_distance_squared(a, b, region).sqrt()
}

fn l2_distance_squared(a: &dyn PiecewiseLinear, b: &dyn PiecewiseLinear, region: Interval) -> f64 {
    let mut pts: Vec<f64> = a
        .mesh()
        .nodes()
        .iter()
        .chain(b.mesh().nodes())
        .copied()
        .filter(|&x| region.contains_open(x))
        .chain([region.a, region.b])
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= SNAP_TOL);
    let rule = gauss(2);
    pts.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let (Some(ea), Some(eb)) = (a.mesh().locate(mid), b.mesh().locate(mid)) else {
                return 0.0;
            };
            rule.mapped(w[0], w[1])
                .map(|(x, wt)| wt * (a.eval_in(ea, x) - b.eval_in(eb, x)).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// State and control errors of an LtN solution against an exact solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorTriple {
    pub e_un: f64,
    pub e_ul: f64,
    pub e_thn: f64,
}

/// `e(u_n*)` on Ω_n, `e(u_l*)` on Ω_l and `e(θ_n*)` on η_c.
pub fn solution_errors(solution: &LtnSolution, exact: &dyn Fn(f64) -> f64) -> ErrorTriple {
    let layout = solution.layout();
    ErrorTriple {
        e_un: l2_error(&solution.nonlocal, exact, layout.nonlocal_domain, &[]),
        e_ul: l2_error(&solution.local, exact, layout.omega_l, &[]),
        e_thn: l2_error(&solution.nonlocal, exact, layout.eta_c, &[]),
    }
}

/// The same three errors measured against a reference LtN solution on a
/// finer grid, for cases without a closed-form solution.
pub fn reference_errors(solution: &LtnSolution, reference: &LtnSolution) -> ErrorTriple {
    let layout = solution.layout();
    ErrorTriple {
        e_un: l2_distance(&solution.nonlocal, &reference.nonlocal, layout.nonlocal_domain),
        e_ul: l2_distance(&solution.local, &reference.local, layout.omega_l),
        e_thn: l2_distance(&solution.nonlocal, &reference.nonlocal, layout.eta_c),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub epsilon: f64,
    pub h: f64,
    pub e_un: f64,
    pub e_ul: f64,
    pub e_thn: f64,
    pub rate_un: Option<f64>,
    pub rate_ul: Option<f64>,
    pub rate_thn: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConvergenceTable {
    pub records: Vec<ConvergenceRecord>,
}

fn rate(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

impl ConvergenceTable {
    /// Appends a record, computing rates against the previous record with
    /// the same ε.
    pub fn push(&mut self, epsilon: f64, h: f64, e: ErrorTriple) {
        let prev = self
            .records
            .iter()
            .rev()
            .find(|r| r.epsilon == epsilon && r.h > h)
            .copied();
        let rates = prev.map(|p| {
            let q = p.h / h;
            (
                rate(p.e_un, e.e_un, q),
                rate(p.e_ul, e.e_ul, q),
                rate(p.e_thn, e.e_thn, q),
            )
        });
        self.records.push(ConvergenceRecord {
            epsilon,
            h,
            e_un: e.e_un,
            e_ul: e.e_ul,
            e_thn: e.e_thn,
            rate_un: rates.map(|r| r.0),
            rate_ul: rates.map(|r| r.1),
            rate_thn: rates.map(|r| r.2),
        });
    }

    pub fn extend(&mut self, other: ConvergenceTable) {
        self.records.extend(other.records);
    }

    pub fn find(&self, epsilon: f64, h: f64) -> Option<&ConvergenceRecord> {
        self.records
            .iter()
            .find(|r| (r.epsilon - epsilon).abs() < 1e-12 && (r.h - h).abs() < 1e-15)
    }

    /// RFC 4180 CSV with header `epsilon,h,e_un,rate_un,e_ul,rate_ul,e_thn,rate_thn`;
    /// undefined rates are empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| LtnError::InvalidInput(format!("CSV output failed: {e}"));
        w.write_record([
            "epsilon", "h", "e_un", "rate_un", "e_ul", "rate_ul", "e_thn", "rate_thn",
        ])
        .map_err(io)?;
        let opt = |r: Option<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_default();
        for r in &self.records {
            w.write_record([
                format!("{}", r.epsilon),
                format!("{}", r.h),
                format!("{:.6e}", r.e_un),
                opt(r.rate_un),
                format!("{:.6e}", r.e_ul),
                opt(r.rate_ul),
                format!("{:.6e}", r.e_thn),
                opt(r.rate_thn),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| LtnError::InvalidInput(format!("CSV output failed: {e}")))?;
        Ok(())
    }
}

/// Settings shared by the solve-based studies.
#[derive(Debug, Clone, Copy)]
pub struct SolveSettings {
    pub solver: Solver,
    pub bfgs: BfgsOptions,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            solver: Solver::Normal,
            bfgs: BfgsOptions::default(),
        }
    }
}

/// One coupled solve of `case` on the standard layout.
pub fn solve_case(
    case: &Case,
    kernel: &KernelSpec,
    h: f64,
    settings: &SolveSettings,
) -> Result<(CoupledProblem, LtnSolution)> {
    solve_case_on(case, &standard_layout(kernel.epsilon())?, kernel, h, settings)
}

pub fn solve_case_on(
    case: &Case,
    layout: &DomainLayout,
    kernel: &KernelSpec,
    h: f64,
    settings: &SolveSettings,
) -> Result<(CoupledProblem, LtnSolution)> {
    let disc = Arc::new(Discretization::new(layout, kernel, h)?);
    let problem = CoupledProblem::new(disc, &case.data(layout))?;
    let solution = solve(&problem, settings.solver, &settings.bfgs)?;
    Ok((problem, solution))
}

#[derive(Debug)]
pub struct StudyOutput {
    pub table: ConvergenceTable,
    pub solutions: Vec<LtnSolution>,
    /// Grid size of the reference solution when errors are measured
    /// against one.
    pub reference_h: Option<f64>,
}

/// Refinement factor of the reference grid below the finest requested h.
pub const REFERENCE_REFINEMENT: f64 = 8.0;

/// Coupled solves over a descending list of grid sizes on the standard
/// layout. Cells run in parallel; results are ordered as `h_list`.
pub fn convergence_study(
    case: &Case,
    family: KernelFamily,
    epsilon: f64,
    h_list: &[f64],
    settings: &SolveSettings,
) -> Result<StudyOutput> {
    convergence_study_on(case, &standard_layout(epsilon)?, family, h_list, settings)
}

pub fn convergence_study_on(
    case: &Case,
    layout: &DomainLayout,
    family: KernelFamily,
    h_list: &[f64],
    settings: &SolveSettings,
) -> Result<StudyOutput> {
    let epsilon = layout.epsilon;
    if h_list.is_empty() {
        return Err(LtnError::InvalidInput("the list of grid sizes is empty".into()));
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(LtnError::InvalidInput("grid sizes must be strictly decreasing".into()));
    }
    let kernel = KernelSpec::new(family, epsilon)?;
    // without a closed form, errors are taken against a finer LtN solution
    let exact = case.exact();
    let reference_h = exact.is_none().then(|| h_list[h_list.len() - 1] / REFERENCE_REFINEMENT);
    let reference = match reference_h {
        Some(h) => Some(solve_case_on(case, layout, &kernel, h, settings)?.1),
        None => None,
    };
    let solved: Vec<(ErrorTriple, LtnSolution)> = h_list
        .par_iter()
        .map(|&h| {
            let (_, sol) = solve_case_on(case, layout, &kernel, h, settings)?;
            let errors = match (&exact, &reference) {
                (Some(u), _) => solution_errors(&sol, u),
                (None, Some(r)) => reference_errors(&sol, r),
                (None, None) => unreachable!("a reference is solved whenever no exact solution exists"),
            };
            Ok((errors, sol))
        })
        .collect::<Result<_>>()?;
    let mut table = ConvergenceTable::default();
    let mut solutions = Vec::with_capacity(solved.len());
    for (&h, (e, sol)) in h_list.iter().zip(solved) {
        table.push(epsilon, h, e);
        solutions.push(sol);
    }
    Ok(StudyOutput {
        table,
        solutions,
        reference_h,
    })
}

/// Fine-grid self-convergence for cases without a closed-form solution:
/// L² distances of the spliced solutions at each h to the one at the finest
/// h, over Ω.
pub fn self_convergence(
    case: &Case,
    kernel: &KernelSpec,
    h_list: &[f64],
    reference_h: f64,
    settings: &SolveSettings,
) -> Result<Vec<(f64, f64)>> {
    let (_, reference) = solve_case(case, kernel, reference_h, settings)?;
    h_list
        .par_iter()
        .map(|&h| {
            let (_, sol) = solve_case(case, kernel, h, settings)?;
            Ok((h, spliced_distance(&sol, &reference)))
        })
        .collect()
}

/// `‖a − b‖_{0,Ω}` between two spliced solutions on the same layout.
pub fn spliced_distance(a: &LtnSolution, b: &LtnSolution) -> f64 {
    let layout = a.layout();
    let right = Interval::new_unchecked(layout.nonlocal_domain.b, layout.gamma_d);
    (l2_distance_squared(&a.nonlocal, &b.nonlocal, layout.nonlocal_domain)
        + l2_distance_squared(&a.local, &b.local, right))
    .sqrt()
}

/// How the local forcing is obtained from `f` on the part of Ω_l that lies
/// in the global interaction layer η.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalForcing {
    /// `f` on ω, zero in η.
    ZeroInEta,
    /// `f` on all of Ω_l.
    Full,
}

/// Global problem `−u'' = f` on ω with data `u` on η, used by the
/// modeling study.
#[derive(Clone)]
pub struct GlobalProblem {
    pub name: &'static str,
    pub u: ScalarFn,
    pub f: ScalarFn,
    pub local_forcing: LocalForcing,
}

impl GlobalProblem {
    /// `u = eˣ`, smooth and not a polynomial, so the nonlocal and local
    /// solutions differ at order ε².
    pub fn exponential() -> Self {
        Self {
            name: "exp",
            u: Arc::new(f64::exp),
            f: Arc::new(|x: f64| -x.exp()),
            local_forcing: LocalForcing::ZeroInEta,
        }
    }

    /// Cubic data, for which both models share the exact solution.
    pub fn cubic(p: Cubic) -> Self {
        Self {
            name: "cubic",
            u: Arc::new(move |x| p.value(x)),
            f: Arc::new(move |x| p.forcing(x)),
            local_forcing: LocalForcing::ZeroInEta,
        }
    }

    pub fn with_local_forcing(mut self, local_forcing: LocalForcing) -> Self {
        self.local_forcing = local_forcing;
        self
    }

    /// Nonlocal and local forcing.
    pub fn loads(&self, layout: &DomainLayout) -> (LoadSpec, LoadSpec) {
        if self.local_forcing == LocalForcing::Full {
            return (LoadSpec::Smooth(self.f.clone()), LoadSpec::Smooth(self.f.clone()));
        }
        let omega = layout.omega;
        let f = self.f.clone();
        let f_l = LoadSpec::Piecewise {
            f: Arc::new(move |x: f64| if omega.contains_closed(x) { f(x) } else { 0.0 }),
            breakpoints: vec![omega.a, omega.b],
        };
        (LoadSpec::Smooth(self.f.clone()), f_l)
    }
}

impl std::fmt::Debug for GlobalProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GlobalProblem")
            .field("name", &self.name)
            .field("local_forcing", &self.local_forcing)
            .finish_non_exhaustive()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModelingRow {
    pub epsilon: f64,
    /// `‖û_n − u*‖_{0,Ω}`
    pub coupling_error: f64,
    /// `‖û_n − û_l‖_{0,Ω_l}`
    pub modeling_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelingStudy {
    pub h: f64,
    pub rows: Vec<ModelingRow>,
    /// Least-squares slope of log(modeling error) against log ε.
    pub modeling_order: f64,
    /// Smallest C with coupling error ≤ C · modeling error on every row.
    pub fitted_c: f64,
}

/// Coupling and modeling errors of the global nonlocal solution û_n over a
/// sweep of horizons at fixed h.
pub fn modeling_error_study(
    family: KernelFamily,
    problem: &GlobalProblem,
    epsilons: &[f64],
    h: f64,
    settings: &SolveSettings,
) -> Result<ModelingStudy> {
    if epsilons.len() < 2 {
        return Err(LtnError::InvalidInput(
            "the modeling study needs at least two horizons".into(),
        ));
    }
    let rows: Vec<ModelingRow> = epsilons
        .par_iter()
        .map(|&eps| modeling_row(family, problem, eps, h, settings))
        .collect::<Result<_>>()?;
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.modeling_error).collect();
    let modeling_order = log_log_slope(&eps, &errs);
    let fitted_c = rows
        .iter()
        .map(|r| r.coupling_error / r.modeling_error)
        .fold(0.0, f64::max);
    Ok(ModelingStudy {
        h,
        rows,
        modeling_order,
        fitted_c,
    })
}

fn modeling_row(
    family: KernelFamily,
    reference: &GlobalProblem,
    eps: f64,
    h: f64,
    settings: &SolveSettings,
) -> Result<ModelingRow> {
    let layout = standard_layout(eps)?;
    let kernel = KernelSpec::new(family, eps)?;
    let (f_n, f_l) = reference.loads(&layout);
    let sigma = reference.u.clone();

    let global_mesh = Arc::new(global_nonlocal_mesh(&layout, h)?);
    let u_hat = solve_global_nonlocal(&kernel, global_mesh, layout.omega, &f_n, &*sigma)?;

    // û_l: local problem on Ω_l with û_n's value at Γ_c
    let local_mesh = Arc::new(build_meshes(&layout, h)?.local);
    let trace = u_hat.eval(layout.gamma_c).expect("Γ_c lies in Ω");
    let u_hat_l = solve_local_state(&layout, local_mesh, trace, sigma(layout.gamma_d), &f_l)?;

    let data = ProblemData {
        f_n,
        f_l,
        sigma_n: sigma.clone(),
        sigma_l: sigma(layout.gamma_d),
    };
    let disc = Arc::new(Discretization::new(&layout, &kernel, h)?);
    let problem = CoupledProblem::new(disc, &data)?;
    let star = solve(&problem, settings.solver, &settings.bfgs)?;

    let right = Interval::new_unchecked(layout.nonlocal_domain.b, layout.gamma_d);
    let coupling = (l2_distance_squared(&u_hat, &star.nonlocal, layout.nonlocal_domain)
        + l2_distance_squared(&u_hat, &star.local, right))
    .sqrt();
    let modeling = l2_distance(&u_hat, &u_hat_l, layout.omega_l);
    Ok(ModelingRow {
        epsilon: eps,
        coupling_error: coupling,
        modeling_error: modeling,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyReport {
    pub kernel: String,
    pub epsilon: f64,
    pub h: f64,
    pub seed: u64,
    pub q_min_eigenvalue: f64,
    pub q_condition: f64,
    /// Largest sampled strong Cauchy–Schwarz ratio.
    pub delta_hat: f64,
    /// Supremum of the same ratio over all controls.
    pub delta_sup: f64,
    pub norm_ratio_sampled: (f64, f64),
    /// Tight bounds `[K_*, K*]` of `‖θ‖_{h*} / ‖θ‖_Θ` over all controls.
    pub norm_ratio_bounds: (f64, f64),
    pub poincare_sampled: f64,
    pub poincare_sup: f64,
    pub gradient_max_rel_error: f64,
    pub bfgs_normal_gap: f64,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const SAMPLES: usize = 100;
const GRADIENT_SAMPLES: usize = 20;

/// Mass matrix of the control space: η_c DG mass plus 1 for θ_l.
fn control_mass(disc: &Discretization) -> DMatrix<f64> {
    let nc = disc.n_nonlocal_controls();
    let mut m = DMatrix::zeros(nc + 1, nc + 1);
    let first = disc.control_dofs.start / 2;
    for k in 0..nc / 2 {
        let (a, b) = disc.nonlocal_mesh.element(first + k);
        let h = b - a;
        m[(2 * k, 2 * k)] = h / 3.0;
        m[(2 * k + 1, 2 * k + 1)] = h / 3.0;
        m[(2 * k, 2 * k + 1)] = h / 6.0;
        m[(2 * k + 1, 2 * k)] = h / 6.0;
    }
    m[(nc, nc)] = 1.0;
    m
}

/// Eigenvalues of the pencil `(A, M)` for SPD `M`.
fn generalized_eigenvalues(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let l = m
        .clone()
        .cholesky()
        .ok_or(LtnError::NotPositiveDefinite { pivot: 0, value: 0.0 })?
        .l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| LtnError::InvalidInput("singular mass factor".into()))?;
    let c = &linv * a * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Tight norm-equivalence bounds `[K_*, K*]` of `‖θ‖_{h*}/‖θ‖_Θ`, where
/// `‖θ‖²_{h*} = θᵀ Q θ`.
pub fn norm_equivalence_bounds(problem: &CoupledProblem) -> Result<(f64, f64)> {
    let q = NormalSystem::assemble(problem)?.q;
    let ev = generalized_eigenvalues(&q, &control_mass(&problem.disc))?;
    Ok((ev[0].max(0.0).sqrt(), ev[ev.len() - 1].sqrt()))
}

fn random_controls(rng: &mut ChaCha8Rng, n: usize) -> ControlPair {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ControlPair::from_slice(&v)
}

/// Largest componentwise relative error of the adjoint gradient against
/// central differences over `samples` random controls. The objective is
/// quadratic in the controls, so central differences carry no truncation
/// error and a wide step keeps cancellation small.
pub fn gradient_check(problem: &CoupledProblem, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let thetas: Vec<ControlPair> = (0..samples)
        .map(|_| random_controls(&mut rng, problem.n_controls()))
        .collect();
    let errs: Vec<f64> = thetas
        .par_iter()
        .map(|theta| {
            let g = objective_and_gradient(problem, theta)?.gradient.to_vec();
            let x = theta.to_vec();
            let mut worst = 0.0f64;
            for i in 0..x.len() {
                let step = 1e-3 * x[i].abs().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += step;
                xm[i] -= step;
                let fp = objective_and_gradient(problem, &ControlPair::from_slice(&xp))?.value;
                let fm = objective_and_gradient(problem, &ControlPair::from_slice(&xm))?.value;
                let fd = (fp - fm) / (2.0 * step);
                worst = worst.max((fd - g[i]).abs() / g[i].abs().max(f64::MIN_POSITIVE));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Runs the structural checks on the standard layout. The objective data
/// are those of M.1; every harmonic quantity is data independent.
pub fn property_suite(kernel: &KernelSpec, h: f64, seed: u64) -> Result<PropertyReport> {
    let layout = standard_layout(kernel.epsilon())?;
    let disc = Discretization::new(&layout, kernel, h)?;
    property_suite_on(Arc::new(disc), seed)
}

/// Same as [`property_suite`] on a prepared discretization, which may carry
/// an altered overlap.
pub fn property_suite_on(disc: Arc<Discretization>, seed: u64) -> Result<PropertyReport> {
    let eps = disc.kernel.epsilon();
    let problem = CoupledProblem::new(disc.clone(), &Case::M1.data(&disc.layout))?;
    let mut checks = Vec::new();
    let mut check = |name: &str, passed: bool, detail: String| {
        checks.push(PropertyCheck {
            name: name.into(),
            passed,
            detail,
        });
    };

    // fem invariants
    let a = disc.nonlocal.matrix();
    let asym = a.asymmetry() / a.max_abs();
    check(
        "stiffness_symmetric",
        asym <= 1e-12,
        format!("relative asymmetry {asym:.2e}"),
    );
    let ones = vec![1.0; a.dim()];
    let row_sums = a.matvec(&ones);
    let worst_row = (0..a.dim())
        .map(|i| row_sums[i].abs() / a.row_abs_sum(i).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    check(
        "stiffness_zero_row_sums",
        worst_row <= 1e-10,
        format!("max relative row sum {worst_row:.2e}"),
    );

    // Q_h symmetric positive definite
    let normal = NormalSystem::assemble(&problem)?;
    let ev = normal.eigenvalues();
    let q_min = ev.min();
    let q_condition = normal.condition_number();
    check(
        "q_positive_definite",
        q_min > 0.0,
        format!("min eigenvalue {q_min:.3e}"),
    );

    // strong Cauchy–Schwarz for harmonic liftings
    let nc = disc.n_nonlocal_controls();
    let q = &normal.q;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut delta_hat = 0.0f64;
    for _ in 0..SAMPLES {
        let theta = random_controls(&mut rng, nc + 1);
        let v = theta.to_vec();
        let (vn, vl) = (&v[..nc], v[nc]);
        // Q's last column carries −v_l, so the cross term flips sign
        let cross: f64 = -(0..nc).map(|i| vn[i] * q[(i, nc)]).sum::<f64>() * vl;
        let nn: f64 = (0..nc)
            .map(|i| (0..nc).map(|j| vn[i] * q[(i, j)] * vn[j]).sum::<f64>())
            .sum();
        let ll = q[(nc, nc)] * vl * vl;
        if nn > 0.0 && ll > 0.0 {
            delta_hat = delta_hat.max(cross.abs() / (nn * ll).sqrt());
        }
    }
    let qnn = q.view((0, 0), (nc, nc)).into_owned();
    let b = q.view((0, nc), (nc, 1)).into_owned();
    let delta_sup = match qnn.clone().cholesky() {
        Some(ch) => {
            let x = ch.solve(&b);
            ((b.transpose() * x)[(0, 0)] / q[(nc, nc)]).sqrt()
        }
        None => f64::NAN,
    };
    check(
        "strong_cauchy_schwarz",
        delta_hat < 1.0 && delta_sup < 1.0,
        format!("sampled δ̂ = {delta_hat:.4}, supremum {delta_sup:.4}"),
    );

    // norm equivalence
    let m = control_mass(&disc);
    let mut ratio_lo = f64::INFINITY;
    let mut ratio_hi = 0.0f64;
    for _ in 0..SAMPLES {
        let v = nalgebra::DVector::from_vec(random_controls(&mut rng, nc + 1).to_vec());
        let r = ((v.transpose() * q * &v)[(0, 0)] / (v.transpose() * &m * &v)[(0, 0)]).sqrt();
        ratio_lo = ratio_lo.min(r);
        ratio_hi = ratio_hi.max(r);
    }
    let bounds = match generalized_eigenvalues(q, &m) {
        Ok(ev) => (ev[0].max(0.0).sqrt(), ev[ev.len() - 1].sqrt()),
        Err(_) => (f64::NAN, f64::NAN),
    };
    check(
        "norm_equivalence",
        bounds.0 > 0.0 && ratio_lo >= bounds.0 * (1.0 - 1e-9) && ratio_hi <= bounds.1 * (1.0 + 1e-9),
        format!(
            "sampled [{ratio_lo:.4}, {ratio_hi:.4}] within [K_*, K*] = [{:.4}, {:.4}]",
            bounds.0, bounds.1
        ),
    );

    // nonlocal Poincaré ratio ‖u‖₀ / |||u||| on constrained fields
    let free = disc.nonlocal.free();
    let n_free = free.len();
    let a_ff = DMatrix::from_fn(n_free, n_free, |i, j| 0.5 * a.get(free.start + i, free.start + j));
    let m_ff = DMatrix::from_fn(n_free, n_free, |i, j| {
        let (gi, gj) = (free.start + i, free.start + j);
        if gi / 2 != gj / 2 {
            return 0.0;
        }
        let (xa, xb) = disc.nonlocal_mesh.element(gi / 2);
        (xb - xa) * if gi == gj { 1.0 / 3.0 } else { 1.0 / 6.0 }
    });
    let mut poincare_sampled = 0.0f64;
    for _ in 0..SAMPLES {
        let u = nalgebra::DVector::from_fn(n_free, |_, _| rng.random_range(-1.0..1.0));
        let l2 = (u.transpose() * &m_ff * &u)[(0, 0)];
        let energy = (u.transpose() * &a_ff * &u)[(0, 0)];
        poincare_sampled = poincare_sampled.max((l2 / energy).sqrt());
    }
    let poincare_sup = generalized_eigenvalues(&a_ff, &m_ff)
        .map(|ev| 1.0 / ev[0].sqrt())
        .unwrap_or(f64::NAN);
    check(
        "nonlocal_poincare",
        poincare_sampled.is_finite() && poincare_sampled <= poincare_sup * (1.0 + 1e-9),
        format!("sampled max {poincare_sampled:.4}, bound {poincare_sup:.4}"),
    );

    // adjoint gradient
    let gradient_max_rel_error = gradient_check(&problem, GRADIENT_SAMPLES, seed ^ 0x9e37)?;
    check(
        "gradient_finite_differences",
        gradient_max_rel_error <= 1e-6,
        format!("max relative error {gradient_max_rel_error:.2e}"),
    );

    // BFGS against the normal equations
    let bfgs_normal_gap = match (normal.solve(), solve(&problem, Solver::Bfgs, &BfgsOptions::default())) {
        (Ok(theta), Ok(bf)) => theta.max_abs_diff(&bf.controls),
        _ => f64::INFINITY,
    };
    check(
        "bfgs_matches_normal_equations",
        bfgs_normal_gap <= 1e-8,
        format!("max control gap {bfgs_normal_gap:.2e}"),
    );

    // states split into harmonic and homogeneous parts
    let theta = random_controls(&mut rng, nc + 1);
    let full = problem.nonlocal_coeffs(&theta.theta_n, Part::Full)?;
    let v = problem.nonlocal_coeffs(&theta.theta_n, Part::Harmonic)?;
    let u0 = problem.nonlocal_coeffs(&theta.theta_n, Part::Homogeneous)?;
    let scale = full.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let gap = (0..full.len())
        .map(|i| (full[i] - v[i] - u0[i]).abs())
        .fold(0.0, f64::max);
    check(
        "superposition",
        gap <= 1e-12 * scale,
        format!("max discrepancy {gap:.2e}"),
    );

    Ok(PropertyReport {
        kernel: disc.kernel.family().name().into(),
        epsilon: eps,
        h: disc.h,
        seed,
        q_min_eigenvalue: q_min,
        q_condition,
        delta_hat,
        delta_sup,
        norm_ratio_sampled: (ratio_lo, ratio_hi),
        norm_ratio_bounds: bounds,
        poincare_sampled,
        poincare_sup,
        gradient_max_rel_error,
        bfgs_normal_gap,
        checks,
    })
}

/// L² residual of the discrete nonlocal operator applied to the interpolant
/// of the cubic `p`: `A I_h p − b(−p'')`, mapped to an L² function through
/// the DG mass matrix, over the elements of `[ε, 1−ε]` whose horizon stays
/// inside ω.
pub fn operator_residual(kernel: &KernelSpec, p: Cubic, h: f64) -> Result<f64> {
    let layout = standard_layout(kernel.epsilon())?;
    let mesh = Arc::new(global_nonlocal_mesh(&layout, h)?);
    let a = assemble_nonlocal_stiffness(&mesh, kernel)?.matrix;
    let u = DgField::interpolate(mesh.clone(), |x| p.value(x));
    let load = LoadSpec::smooth(move |x| p.forcing(x));
    let b = assemble_load(&mesh, Space::Dg, &load, layout.omega)?;
    let au = a.matvec(u.coeffs());
    let mut sum = 0.0;
    let eps = kernel.epsilon();
    for e in mesh.elements_in(Interval::new_unchecked(eps, 1.0 - eps)) {
        let (xa, xb) = mesh.element(e);
        let (r0, r1) = (au[2 * e] - b[2 * e], au[2 * e + 1] - b[2 * e + 1]);
        // rᵀ M_e⁻¹ r with M_e = h/6 [[2, 1], [1, 2]]
        sum += 2.0 / (xb - xa) * (2.0 * r0 * r0 - 2.0 * r0 * r1 + 2.0 * r1 * r1);
    }
    Ok(sum.sqrt())
}
