//! State equations of the two subproblems and the global reference problems.
//!
//! Dirichlet data and volume constraints are imposed by eliminating the
//! constrained dofs: with free dofs `f` and constrained dofs `c` carrying
//! data `g`, the state solves `A_ff u_f = b_f − A_fc g`. In both spaces the
//! free dofs form one contiguous block, so `A_ff` is a principal band block.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::{BandCholesky, BandMatrix};
use crate::error::{LtnError, Result};
use crate::fem::{
    assemble_load, assemble_local_stiffness, assemble_nonlocal_stiffness, CgField, DgField, LoadSpec,
    OverlapQuadrature, ScalarFn, Space,
};
use crate::geometry::{build_meshes, DomainLayout, Interval, Mesh1D, MeshPair};
use crate::kernels::KernelSpec;

/// A symmetric system with a contiguous block of free dofs, factored once.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    matrix: BandMatrix,
    free: Range<usize>,
    factor: BandCholesky,
}

impl ReducedSystem {
    pub fn new(matrix: BandMatrix, free: Range<usize>) -> Result<Self> {
        if free.is_empty() || free.end > matrix.dim() {
            return Err(LtnError::InvalidInput(format!(
                "free dof block {free:?} is empty or exceeds dimension {}",
                matrix.dim()
            )));
        }
        let factor = matrix.principal_block(free.clone()).cholesky()?;
        Ok(Self { matrix, free, factor })
    }

    pub fn matrix(&self) -> &BandMatrix {
        &self.matrix
    }

    pub fn free(&self) -> Range<usize> {
        self.free.clone()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Full coefficient vector: `data` on constrained dofs (its free entries
    /// are ignored) and the eliminated solution on free dofs.
    pub fn solve(&self, data: &[f64], load: Option<&[f64]>) -> Vec<f64> {
        let mut g = data.to_vec();
        g[self.free.clone()].fill(0.0);
        let ag = self.matrix.matvec(&g);
        let mut rhs: Vec<f64> = self.free.clone().map(|i| -ag[i]).collect();
        if let Some(b) = load {
            for (r, i) in rhs.iter_mut().zip(self.free.clone()) {
                *r += b[i];
            }
        }
        self.factor.solve_in_place(&mut rhs);
        g[self.free.clone()].copy_from_slice(&rhs);
        g
    }

    /// `A_ff⁻¹ r` for a right-hand side given on the free dofs.
    pub fn solve_free(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor.solve(rhs)
    }

    /// `A_{rows, f} z` for `z` given on the free dofs.
    pub fn couple(&self, rows: Range<usize>, z: &[f64]) -> Vec<f64> {
        rows.map(|i| {
            self.matrix
                .columns(i)
                .filter(|j| self.free.contains(j))
                .map(|j| self.matrix.get(i, j) * z[j - self.free.start])
                .sum()
        })
        .collect()
    }

    /// `‖(A u − b)_f‖ / ‖b_f − (A g)_f‖`, or the absolute residual when the
    /// reference vanishes.
    pub fn relative_residual(&self, u: &[f64], load: Option<&[f64]>) -> f64 {
        let au = self.matrix.matvec(u);
        let b = |i: usize| load.map_or(0.0, |b| b[i]);
        let res: f64 = self.free.clone().map(|i| (au[i] - b(i)).powi(2)).sum::<f64>().sqrt();
        let mut g = u.to_vec();
        g[self.free.clone()].fill(0.0);
        let ag = self.matrix.matvec(&g);
        let reference: f64 = self.free.clone().map(|i| (b(i) - ag[i]).powi(2)).sum::<f64>().sqrt();
        if reference > 0.0 {
            res / reference
        } else {
            res
        }
    }
}

/// DG dof range of a contiguous element range.
fn dg_dofs(elements: Range<usize>) -> Range<usize> {
    2 * elements.start..2 * elements.end
}

/// Virtual controls: DG values on the η_c elements and a point value at Γ_c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPair {
    pub theta_n: Vec<f64>,
    pub theta_l: f64,
}

impl ControlPair {
    pub fn zeros(n: usize) -> Self {
        Self {
            theta_n: vec![0.0; n],
            theta_l: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.theta_n.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[θ_n…, θ_l]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.theta_n.clone();
        v.push(self.theta_l);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let (last, head) = v.split_last().expect("a control vector holds at least θ_l");
        Self {
            theta_n: head.to_vec(),
            theta_l: *last,
        }
    }

    pub fn max_abs_diff(&self, other: &ControlPair) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct StatePair {
    pub nonlocal: DgField,
    pub local: CgField,
}

/// Which part of a state to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    /// Controls, data and forcing.
    Full,
    /// Controls only: zero forcing and zero fixed data.
    Harmonic,
    /// Forcing and fixed data with zero controls.
    Homogeneous,
}

impl Part {
    fn controls(self) -> bool {
        self != Part::Homogeneous
    }

    fn data(self) -> bool {
        self != Part::Harmonic
    }
}

/// Everything about the coupled configuration that does not depend on the
/// forcing or the boundary data: meshes, factored state operators and the
/// overlap quadrature.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub layout: DomainLayout,
    pub kernel: KernelSpec,
    pub h: f64,
    pub nonlocal_mesh: Arc<Mesh1D>,
    pub local_mesh: Arc<Mesh1D>,
    pub nonlocal: ReducedSystem,
    pub local: ReducedSystem,
    /// DG dofs of the η_D elements.
    pub eta_d_dofs: Range<usize>,
    /// DG dofs of the η_c elements, i.e. the nonlocal control dofs.
    pub control_dofs: Range<usize>,
    pub overlap: OverlapQuadrature,
}

impl Discretization {
    pub fn new(layout: &DomainLayout, kernel: &KernelSpec, h: f64) -> Result<Self> {
        let meshes = build_meshes(layout, h)?;
        let stiffness = assemble_nonlocal_stiffness(&meshes.nonlocal, kernel)?.matrix;
        Self::from_parts(layout, kernel, meshes, stiffness)
    }

    /// Builds the discretization around an already assembled nonlocal
    /// stiffness on `meshes.nonlocal`.
    pub fn from_parts(
        layout: &DomainLayout,
        kernel: &KernelSpec,
        meshes: MeshPair,
        stiffness: BandMatrix,
    ) -> Result<Self> {
        if (kernel.epsilon() - layout.epsilon).abs() > 1e-15 {
            return Err(LtnError::InvalidInput(format!(
                "kernel horizon {} differs from the layout's ε = {}",
                kernel.epsilon(),
                layout.epsilon
            )));
        }
        let h = meshes.nonlocal.h();
        let nonlocal_mesh = Arc::new(meshes.nonlocal);
        let local_mesh = Arc::new(meshes.local);
        let expected = 2 * nonlocal_mesh.n_elements();
        if stiffness.dim() != expected {
            return Err(LtnError::DimensionMismatch {
                expected,
                got: stiffness.dim(),
            });
        }
        let free = dg_dofs(nonlocal_mesh.elements_in(layout.omega_n));
        let eta_d_dofs = dg_dofs(nonlocal_mesh.elements_in(layout.eta_d));
        let control_dofs = dg_dofs(nonlocal_mesh.elements_in(layout.eta_c));
        if eta_d_dofs.end != free.start || free.end != control_dofs.start {
            return Err(LtnError::InvalidMesh(
                "nonlocal mesh elements are not ordered η_D, ω_n, η_c".into(),
            ));
        }
        let nonlocal = ReducedSystem::new(stiffness, free)?;
        let n_local = local_mesh.n_nodes();
        let local = ReducedSystem::new(assemble_local_stiffness(&local_mesh), 1..n_local - 1)?;
        let overlap = OverlapQuadrature::new(nonlocal_mesh.clone(), local_mesh.clone(), layout.overlap)?;
        Ok(Self {
            layout: layout.clone(),
            kernel: *kernel,
            h,
            nonlocal_mesh,
            local_mesh,
            nonlocal,
            local,
            eta_d_dofs,
            control_dofs,
            overlap,
        })
    }

    pub fn n_nonlocal_controls(&self) -> usize {
        self.control_dofs.len()
    }

    /// Replaces the overlap region used by the objective.
    pub fn with_overlap(mut self, overlap: Interval) -> Result<Self> {
        self.overlap = OverlapQuadrature::new(self.nonlocal_mesh.clone(), self.local_mesh.clone(), overlap)?;
        Ok(self)
    }

    /// `‖θ‖²_Θ = ‖θ_n‖²_{0,η_c} + |θ_l|²`
    pub fn control_norm_squared(&self, theta: &ControlPair) -> f64 {
        let first = self.control_dofs.start / 2;
        let mut s = theta.theta_l * theta.theta_l;
        for (k, pair) in theta.theta_n.chunks_exact(2).enumerate() {
            let (a, b) = self.nonlocal_mesh.element(first + k);
            let (u0, u1) = (pair[0], pair[1]);
            s += (b - a) / 3.0 * (u0 * u0 + u0 * u1 + u1 * u1);
        }
        s
    }
}

/// Forcing and fixed data of a coupled problem.
#[derive(Clone)]
pub struct ProblemData {
    /// Nonlocal forcing, used on ω_n.
    pub f_n: LoadSpec,
    /// Local forcing, used on Ω_l.
    pub f_l: LoadSpec,
    /// Volume constraint on η_D.
    pub sigma_n: ScalarFn,
    /// Boundary value at Γ_D.
    pub sigma_l: f64,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("f_n", &self.f_n)
            .field("f_l", &self.f_l)
            .field("sigma_l", &self.sigma_l)
            .finish_non_exhaustive()
    }
}

impl ProblemData {
    pub fn zero() -> Self {
        Self {
            f_n: LoadSpec::zero(),
            f_l: LoadSpec::zero(),
            sigma_n: Arc::new(|_| 0.0),
            sigma_l: 0.0,
        }
    }
}

/// A discretization together with loads and data: everything needed to map
/// controls to states.
#[derive(Debug, Clone)]
pub struct CoupledProblem {
    pub disc: Arc<Discretization>,
    load_n: Vec<f64>,
    load_l: Vec<f64>,
    data_n: Vec<f64>,
    sigma_l: f64,
}

impl CoupledProblem {
    pub fn new(disc: Arc<Discretization>, data: &ProblemData) -> Result<Self> {
        let layout = &disc.layout;
        let load_n = assemble_load(&disc.nonlocal_mesh, Space::Dg, &data.f_n, layout.omega_n)?;
        let load_l = assemble_load(&disc.local_mesh, Space::Cg, &data.f_l, layout.omega_l)?;
        let mut data_n = vec![0.0; disc.nonlocal.dim()];
        for e in disc.eta_d_dofs.start / 2..disc.eta_d_dofs.end / 2 {
            let (a, b) = disc.nonlocal_mesh.element(e);
            data_n[2 * e] = (data.sigma_n)(a);
            data_n[2 * e + 1] = (data.sigma_n)(b);
        }
        Ok(Self {
            disc,
            load_n,
            load_l,
            data_n,
            sigma_l: data.sigma_l,
        })
    }

    pub fn n_controls(&self) -> usize {
        self.disc.n_nonlocal_controls() + 1
    }

    pub fn load_nonlocal(&self) -> &[f64] {
        &self.load_n
    }

    pub fn load_local(&self) -> &[f64] {
        &self.load_l
    }

    /// Nonlocal state coefficients for the control `theta_n`.
    pub fn nonlocal_coeffs(&self, theta_n: &[f64], part: Part) -> Result<Vec<f64>> {
        let c = self.disc.control_dofs.clone();
        if theta_n.len() != c.len() {
            return Err(LtnError::DimensionMismatch {
                expected: c.len(),
                got: theta_n.len(),
            });
        }
        let mut g = if part.data() {
            self.data_n.clone()
        } else {
            vec![0.0; self.data_n.len()]
        };
        if part.controls() {
            g[c].copy_from_slice(theta_n);
        }
        let load = part.data().then_some(self.load_n.as_slice());
        Ok(self.disc.nonlocal.solve(&g, load))
    }

    /// Local state coefficients for the control `theta_l`.
    pub fn local_coeffs(&self, theta_l: f64, part: Part) -> Vec<f64> {
        let n = self.disc.local.dim();
        let mut g = vec![0.0; n];
        if part.controls() {
            g[0] = theta_l;
        }
        if part.data() {
            g[n - 1] = self.sigma_l;
        }
        let load = part.data().then_some(self.load_l.as_slice());
        self.disc.local.solve(&g, load)
    }

    pub fn states(&self, theta: &ControlPair, part: Part) -> Result<StatePair> {
        let un = self.nonlocal_coeffs(&theta.theta_n, part)?;
        let ul = self.local_coeffs(theta.theta_l, part);
        Ok(StatePair {
            nonlocal: DgField::new(self.disc.nonlocal_mesh.clone(), un)?,
            local: CgField::new(self.disc.local_mesh.clone(), ul)?,
        })
    }

    /// `(v_n(θ_n), v_l(θ_l))`
    pub fn harmonic_parts(&self, theta: &ControlPair) -> Result<StatePair> {
        self.states(theta, Part::Harmonic)
    }

    /// `(u_n⁰, u_l⁰)`
    pub fn homogeneous_parts(&self) -> Result<StatePair> {
        self.states(&ControlPair::zeros(self.disc.n_nonlocal_controls()), Part::Homogeneous)
    }
}

/// Nonlocal state for a single solve, assembling everything from scratch.
pub fn solve_nonlocal_state(
    layout: &DomainLayout,
    kernel: &KernelSpec,
    h: f64,
    theta_n: &[f64],
    data: &ProblemData,
) -> Result<DgField> {
    let problem = CoupledProblem::new(Arc::new(Discretization::new(layout, kernel, h)?), data)?;
    let u = problem.nonlocal_coeffs(theta_n, Part::Full)?;
    DgField::new(problem.disc.nonlocal_mesh.clone(), u)
}

/// Local state on `mesh` over Ω_l with `u(Γ_c) = theta_l`, `u(Γ_D) = sigma_l`.
pub fn solve_local_state(
    layout: &DomainLayout,
    mesh: Arc<Mesh1D>,
    theta_l: f64,
    sigma_l: f64,
    f_l: &LoadSpec,
) -> Result<CgField> {
    let n = mesh.n_nodes();
    let system = ReducedSystem::new(assemble_local_stiffness(&mesh), 1..n - 1)?;
    let load = assemble_load(&mesh, Space::Cg, f_l, layout.omega_l)?;
    let mut g = vec![0.0; n];
    g[0] = theta_l;
    g[n - 1] = sigma_l;
    CgField::new(mesh, system.solve(&g, Some(&load)))
}

/// Volume-constrained nonlocal problem on a mesh over Ω = ω ∪ η: `−L u = f`
/// on ω with `u = σ` on η, the constraint imposed at the η element nodes.
pub fn solve_global_nonlocal(
    kernel: &KernelSpec,
    mesh: Arc<Mesh1D>,
    omega: Interval,
    f: &LoadSpec,
    sigma: &dyn Fn(f64) -> f64,
) -> Result<DgField> {
    let a = assemble_nonlocal_stiffness(&mesh, kernel)?.matrix;
    let free = dg_dofs(mesh.elements_in(omega));
    let system = ReducedSystem::new(a, free.clone())?;
    let load = assemble_load(&mesh, Space::Dg, f, omega)?;
    let mut g = vec![0.0; system.dim()];
    for e in 0..mesh.n_elements() {
        if !free.contains(&(2 * e)) {
            let (a, b) = mesh.element(e);
            g[2 * e] = sigma(a);
            g[2 * e + 1] = sigma(b);
        }
    }
    DgField::new(mesh, system.solve(&g, Some(&load)))
}

/// Poisson problem `−u'' = f` on the span of `mesh` with Dirichlet values
/// at both ends.
pub fn solve_poisson(mesh: Arc<Mesh1D>, f: &LoadSpec, left: f64, right: f64) -> Result<CgField> {
    let n = mesh.n_nodes();
    let system = ReducedSystem::new(assemble_local_stiffness(&mesh), 1..n - 1)?;
    let load = assemble_load(&mesh, Space::Cg, f, mesh.span())?;
    let mut g = vec![0.0; n];
    g[0] = left;
    g[n - 1] = right;
    CgField::new(mesh, system.solve(&g, Some(&load)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::PiecewiseLinear;
    use crate::geometry::{global_nonlocal_mesh, standard_layout};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(eps: f64, k: i32, kernel: KernelSpec, data: &ProblemData) -> CoupledProblem {
        let layout = standard_layout(eps).unwrap();
        let disc = Discretization::new(&layout, &kernel, 2f64.powi(-k)).unwrap();
        CoupledProblem::new(Arc::new(disc), data).unwrap()
    }

    fn linear_data() -> ProblemData {
        ProblemData {
            sigma_n: Arc::new(|x| x),
            sigma_l: 1.75,
            ..ProblemData::zero()
        }
    }

    #[test]
    fn linear_data_reproduces_linear_states() {
        for kernel in [
            KernelSpec::integrable(0.065).unwrap(),
            KernelSpec::singular(0.065).unwrap(),
        ] {
            let p = problem(0.065, 6, kernel, &linear_data());
            let c = &p.disc.control_dofs;
            let first = c.start / 2;
            let theta_n: Vec<f64> = (first..c.end / 2)
                .flat_map(|e| {
                    let (a, b) = p.disc.nonlocal_mesh.element(e);
                    [a, b]
                })
                .collect();
            let s = p.states(&ControlPair { theta_n, theta_l: 0.75 }, Part::Full).unwrap();
            for &x in p.disc.nonlocal_mesh.nodes() {
                assert!((s.nonlocal.eval(x).unwrap() - x).abs() < 1e-12);
            }
            for &x in p.disc.local_mesh.nodes() {
                assert!((s.local.eval(x).unwrap() - x).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_states() {
        let p = problem(0.065, 5, KernelSpec::integrable(0.065).unwrap(), &ProblemData::zero());
        let s = p.homogeneous_parts().unwrap();
        assert!(s.nonlocal.coeffs().iter().all(|&v| v == 0.0));
        assert!(s.local.coeffs().iter().all(|&v| v == 0.0));
        let zero = ControlPair::zeros(p.disc.n_nonlocal_controls());
        let v = p.harmonic_parts(&zero).unwrap();
        assert!(v.nonlocal.coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn local_harmonic_lifting_is_linear() {
        let layout = standard_layout(0.065).unwrap();
        let mesh = Arc::new(build_meshes(&layout, 2f64.powi(-5)).unwrap().local);
        let u = solve_local_state(&layout, mesh, 0.75, 0.0, &LoadSpec::zero()).unwrap();
        for &x in u.mesh().nodes() {
            assert!((u.eval(x).unwrap() - 0.75 * (1.75 - x)).abs() < 1e-14);
        }
        let p = problem(0.065, 5, KernelSpec::integrable(0.065).unwrap(), &ProblemData::zero());
        let v = p.local_coeffs(1.0, Part::Harmonic);
        for (c, &x) in v.iter().zip(p.disc.local_mesh.nodes()) {
            assert!((c - (1.75 - x)).abs() < 1e-14);
        }
    }

    #[test]
    fn dirac_load_outside_local_domain_is_ignored() {
        let layout = standard_layout(0.065).unwrap();
        let mesh = Arc::new(build_meshes(&layout, 2f64.powi(-5)).unwrap().local);
        let u = solve_local_state(&layout, mesh, 0.0, 0.0, &LoadSpec::Dirac(0.25)).unwrap();
        assert!(u.coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn superposition_holds() {
        let data = ProblemData {
            f_n: LoadSpec::smooth(|x| (3.0 * x).sin()),
            f_l: LoadSpec::smooth(|x| x.cos()),
            sigma_n: Arc::new(|x| 1.0 + x),
            sigma_l: 0.3,
        };
        let p = problem(0.065, 5, KernelSpec::singular(0.065).unwrap(), &data);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = p.disc.n_nonlocal_controls();
        let theta = ControlPair {
            theta_n: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            theta_l: rng.random_range(-1.0..1.0),
        };
        let full = p.states(&theta, Part::Full).unwrap();
        let v = p.harmonic_parts(&theta).unwrap();
        let u0 = p.homogeneous_parts().unwrap();
        let scale = full.nonlocal.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..full.nonlocal.coeffs().len() {
            let d = full.nonlocal.coeffs()[i] - v.nonlocal.coeffs()[i] - u0.nonlocal.coeffs()[i];
            assert!(d.abs() <= 1e-12 * scale);
        }
        for i in 0..full.local.coeffs().len() {
            let d = full.local.coeffs()[i] - v.local.coeffs()[i] - u0.local.coeffs()[i];
            assert!(d.abs() <= 1e-12);
        }
        let res = p
            .disc
            .nonlocal
            .relative_residual(full.nonlocal.coeffs(), Some(p.load_nonlocal()));
        assert!(res < 1e-10, "{res}");
    }

    #[test]
    fn homogeneous_quadratic_matches_fine_oracle() {
        // u⁰ with f = −2 at h = 2⁻⁵ against the same problem at h = 2⁻¹⁰
        let data = ProblemData {
            f_n: LoadSpec::smooth(|_| -2.0),
            ..ProblemData::zero()
        };
        let kernel = KernelSpec::integrable(0.065).unwrap();
        let coarse = problem(0.065, 5, kernel, &data).homogeneous_parts().unwrap().nonlocal;
        let fine = problem(0.065, 10, kernel, &data).homogeneous_parts().unwrap().nonlocal;
        let n = 20_000;
        let span = coarse.mesh().span();
        let dx = span.len() / n as f64;
        let err = (0..n)
            .map(|i| {
                let x = span.a + (i as f64 + 0.5) * dx;
                (coarse.eval(x).unwrap() - fine.eval(x).unwrap()).powi(2) * dx
            })
            .sum::<f64>()
            .sqrt();
        let h = 2f64.powi(-5);
        assert!(err < h * h, "{err}");
    }

    #[test]
    fn global_nonlocal_reproduces_quadratic() {
        let layout = standard_layout(0.065).unwrap();
        let kernel = KernelSpec::integrable(0.065).unwrap();
        let mesh = Arc::new(global_nonlocal_mesh(&layout, 2f64.powi(-6)).unwrap());
        let u = solve_global_nonlocal(&kernel, mesh, layout.omega, &LoadSpec::smooth(|_| -2.0), &|x| x * x).unwrap();
        let worst = u
            .mesh()
            .nodes()
            .iter()
            .map(|&x| (u.eval(x).unwrap() - x * x).abs())
            .fold(0.0, f64::max);
        assert!(worst < 2f64.powi(-12), "{worst}");
        let zero =
            solve_global_nonlocal(&kernel, u.mesh_arc().clone(), layout.omega, &LoadSpec::zero(), &|_| 0.0).unwrap();
        assert!(zero.coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn maximum_principle_smoke_test() {
        let data = ProblemData {
            sigma_n: Arc::new(|x: f64| (5.0 * x).cos().abs()),
            sigma_l: 0.5,
            ..ProblemData::zero()
        };
        let p = problem(0.065, 6, KernelSpec::integrable(0.065).unwrap(), &data);
        let n = p.disc.n_nonlocal_controls();
        let theta = ControlPair {
            theta_n: vec![0.2; n],
            theta_l: 0.1,
        };
        let s = p.states(&theta, Part::Full).unwrap();
        assert!(s.nonlocal.coeffs().iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn control_norm_of_unit_field() {
        let p = problem(0.065, 5, KernelSpec::integrable(0.065).unwrap(), &ProblemData::zero());
        let n = p.disc.n_nonlocal_controls();
        let one = ControlPair {
            theta_n: vec![1.0; n],
            theta_l: 2.0,
        };
        assert!((p.disc.control_norm_squared(&one) - (0.065 + 4.0)).abs() < 1e-14);
    }
}
