//! Reduced-space optimization over the virtual controls.
//!
//! For controls `θ = (θ_n, θ_l)` the objective is
//! `J(θ) = ½ ‖u_n(θ_n) − u_l(θ_l)‖²_{0,Ω_o}`. It is quadratic: with the
//! harmonic liftings `V` of the control basis and the mismatch `r₀` of the
//! homogeneous parts, `J(θ) = ½ ‖r₀ + V θ‖²`, and the minimizer solves
//! `Q θ = F` with `Q = Vᵀ W V` and `F = −Vᵀ W r₀`.
//!
//! The gradient uses one adjoint solve per model. With `g = (r, φ_i)_{Ω_o}`
//! tested against every nonlocal dof, `A_ff λ = g_f` and
//! `∂J/∂θ_n = g_c − A_cf λ`; the local side is the same with a sign flip
//! because `u_l` enters the mismatch negatively.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bfgs::{minimize, BfgsOptions, Termination};
use crate::error::{LtnError, Result};
use crate::fem::{CgField, DgField, PiecewiseLinear};
use crate::geometry::DomainLayout;
use crate::state::{ControlPair, CoupledProblem, Part, StatePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Bfgs,
    Normal,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Bfgs => "bfgs",
            Solver::Normal => "normal",
        }
    }
}

impl FromStr for Solver {
    type Err = LtnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bfgs" => Ok(Solver::Bfgs),
            "normal" | "normal-equations" => Ok(Solver::Normal),
            other => Err(LtnError::InvalidInput(format!(
                "unknown solver '{other}' (expected bfgs or normal)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: ControlPair,
    pub states: StatePair,
}

/// Mismatch `u_n − u_l` at the overlap quadrature points.
fn mismatch(problem: &CoupledProblem, un: &[f64], ul: &[f64]) -> Vec<f64> {
    let q = &problem.disc.overlap;
    q.nonlocal_values(un)
        .iter()
        .zip(q.local_values(ul))
        .map(|(a, b)| a - b)
        .collect()
}

pub fn objective_and_gradient(problem: &CoupledProblem, theta: &ControlPair) -> Result<ObjectiveEval> {
    let disc = &problem.disc;
    let (un, ul) = rayon::join(
        || problem.nonlocal_coeffs(&theta.theta_n, Part::Full),
        || problem.local_coeffs(theta.theta_l, Part::Full),
    );
    let un = un?;
    let r = mismatch(problem, &un, &ul);
    let value = 0.5 * disc.overlap.dot(&r, &r);

    let gn = disc.overlap.test_nonlocal(&r);
    let gl = disc.overlap.test_local(&r);

    let free_n = disc.nonlocal.free();
    let lambda = disc.nonlocal.solve_free(&gn[free_n]);
    let coupled = disc.nonlocal.couple(disc.control_dofs.clone(), &lambda);
    let theta_n_grad: Vec<f64> = disc.control_dofs.clone().zip(coupled).map(|(c, a)| gn[c] - a).collect();

    let free_l = disc.local.free();
    let mu = disc.local.solve_free(&gl[free_l]);
    let coupled_l = disc.local.couple(0..1, &mu)[0];
    let theta_l_grad = -(gl[0] - coupled_l);

    Ok(ObjectiveEval {
        value,
        gradient: ControlPair {
            theta_n: theta_n_grad,
            theta_l: theta_l_grad,
        },
        states: StatePair {
            nonlocal: DgField::new(disc.nonlocal_mesh.clone(), un)?,
            local: CgField::new(disc.local_mesh.clone(), ul)?,
        },
    })
}

/// Dense normal equations `Q θ = F`.
#[derive(Debug, Clone)]
pub struct NormalSystem {
    pub q: DMatrix<f64>,
    pub f: DVector<f64>,
    /// Harmonic liftings at the overlap quadrature points, one column per
    /// control basis function (the local column carries the minus sign).
    pub liftings: DMatrix<f64>,
}

impl NormalSystem {
    pub fn assemble(problem: &CoupledProblem) -> Result<Self> {
        use rayon::prelude::*;
        let disc = &problem.disc;
        let nc = disc.n_nonlocal_controls();
        let npts = disc.overlap.len();
        let columns: Vec<Vec<f64>> = (0..nc)
            .into_par_iter()
            .map(|k| {
                let mut e = vec![0.0; nc];
                e[k] = 1.0;
                problem
                    .nonlocal_coeffs(&e, Part::Harmonic)
                    .map(|u| disc.overlap.nonlocal_values(&u))
            })
            .collect::<Result<_>>()?;
        let mut v = DMatrix::zeros(npts, nc + 1);
        for (k, col) in columns.iter().enumerate() {
            v.column_mut(k).copy_from_slice(col);
        }
        let vl = disc.overlap.local_values(&problem.local_coeffs(1.0, Part::Harmonic));
        for (i, val) in vl.iter().enumerate() {
            v[(i, nc)] = -val;
        }
        let u0 = problem.nonlocal_coeffs(&vec![0.0; nc], Part::Homogeneous)?;
        let ul0 = problem.local_coeffs(0.0, Part::Homogeneous);
        let r0 = DVector::from_vec(mismatch(problem, &u0, &ul0));
        let w = DVector::from_iterator(npts, disc.overlap.weights());
        let wv = DMatrix::from_fn(npts, nc + 1, |i, j| w[i] * v[(i, j)]);
        let q = v.transpose() * &wv;
        let q = 0.5 * (&q + q.transpose());
        let f = -(wv.transpose() * r0);
        Ok(Self { q, f, liftings: v })
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.q.clone()).eigenvalues
    }

    /// `λ_max / λ_min` of Q, infinite when Q is not positive definite.
    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        let (lo, hi) = (ev.min(), ev.max());
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }

    pub fn solve(&self) -> Result<ControlPair> {
        let chol = self.q.clone().cholesky().ok_or_else(|| {
            let ev = self.eigenvalues();
            let (pivot, value) = ev
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, v)| (i, *v))
                .unwrap_or((0, 0.0));
            LtnError::NotPositiveDefinite { pivot, value }
        })?;
        let theta = chol.solve(&self.f);
        Ok(ControlPair::from_slice(theta.as_slice()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub solver: Solver,
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_inf_norm: f64,
    pub objective: f64,
    pub termination: Option<Termination>,
    pub condition_number: Option<f64>,
}

/// The spliced LtN solution: the nonlocal state on Ω_n and the local state
/// on Ω_l \ Ω_o.
#[derive(Debug, Clone)]
pub struct LtnSolution {
    pub nonlocal: DgField,
    pub local: CgField,
    pub controls: ControlPair,
    pub report: SolverReport,
    layout: DomainLayout,
}

impl LtnSolution {
    /// Value of the spliced field; the nonlocal branch owns Ω_n including
    /// its right end 1 + ε.
    pub fn eval(&self, x: f64) -> Option<f64> {
        if self.layout.nonlocal_domain.contains_closed(x) {
            self.nonlocal.eval(x)
        } else if x > self.layout.nonlocal_domain.b && x <= self.layout.gamma_d {
            self.local.eval(x)
        } else {
            None
        }
    }

    pub fn layout(&self) -> &DomainLayout {
        &self.layout
    }

    /// Plot points: nonlocal element endpoints on Ω_n (both sides of every
    /// jump), then local nodes beyond Ω_n.
    pub fn plot_points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        let m = self.nonlocal.mesh();
        for e in 0..m.n_elements() {
            let (a, b) = m.element(e);
            let (va, vb) = self.nonlocal.element_values(e);
            pts.push((a, va));
            pts.push((b, vb));
        }
        let cut = self.layout.nonlocal_domain.b;
        if let Some(v) = self.local.eval(cut) {
            pts.push((cut, v));
        }
        for (&x, &v) in self.local.mesh().nodes().iter().zip(self.local.coeffs()) {
            if x > cut {
                pts.push((x, v));
            }
        }
        pts
    }
}

pub fn splice(problem: &CoupledProblem, states: StatePair, controls: ControlPair, report: SolverReport) -> LtnSolution {
    LtnSolution {
        nonlocal: states.nonlocal,
        local: states.local,
        controls,
        report,
        layout: problem.disc.layout.clone(),
    }
}

pub fn solve_normal_equations(problem: &CoupledProblem) -> Result<LtnSolution> {
    let system = NormalSystem::assemble(problem)?;
    let theta = system.solve()?;
    let eval = objective_and_gradient(problem, &theta)?;
    let report = SolverReport {
        solver: Solver::Normal,
        iterations: 1,
        evaluations: 1,
        grad_inf_norm: inf_norm(&eval.gradient.to_vec()),
        objective: eval.value,
        termination: None,
        condition_number: Some(system.condition_number()),
    };
    Ok(splice(problem, eval.states, theta, report))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// BFGS on the reduced objective. A line-search failure or an exhausted
/// iteration budget is reported through `report.termination` together with
/// the last iterate.
pub fn solve_bfgs(problem: &CoupledProblem, init: &ControlPair, opts: &BfgsOptions) -> Result<LtnSolution> {
    if !(opts.tol > 0.0) {
        return Err(LtnError::InvalidInput(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    if init.theta_n.len() != problem.disc.n_nonlocal_controls() {
        return Err(LtnError::DimensionMismatch {
            expected: problem.disc.n_nonlocal_controls(),
            got: init.theta_n.len(),
        });
    }
    let result = minimize(
        |x| {
            let e = objective_and_gradient(problem, &ControlPair::from_slice(x))?;
            Ok((e.value, e.gradient.to_vec()))
        },
        &init.to_vec(),
        opts,
    )?;
    let theta = ControlPair::from_slice(&result.x);
    let eval = objective_and_gradient(problem, &theta)?;
    let report = SolverReport {
        solver: Solver::Bfgs,
        iterations: result.iterations,
        evaluations: result.evaluations,
        grad_inf_norm: result.grad_inf_norm,
        objective: eval.value,
        termination: Some(result.termination),
        condition_number: None,
    };
    Ok(splice(problem, eval.states, theta, report))
}

/// Solves with the chosen method; BFGS starts from θ = 0.
pub fn solve(problem: &CoupledProblem, solver: Solver, opts: &BfgsOptions) -> Result<LtnSolution> {
    match solver {
        Solver::Normal => solve_normal_equations(problem),
        Solver::Bfgs => solve_bfgs(problem, &ControlPair::zeros(problem.disc.n_nonlocal_controls()), opts),
    }
}

/// Convenience for tests and benches: a problem on a fresh discretization.
pub fn coupled_problem(
    layout: &DomainLayout,
    kernel: &crate::kernels::KernelSpec,
    h: f64,
    data: &crate::state::ProblemData,
) -> Result<CoupledProblem> {
    let disc = crate::state::Discretization::new(layout, kernel, h)?;
    CoupledProblem::new(Arc::new(disc), data)
}
