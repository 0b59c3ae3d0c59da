//! Finite element spaces, operator assembly and overlap quadrature.
//!
//! The nonlocal model uses discontinuous P1 elements (two dofs per element,
//! dof `2e` at the left node and `2e + 1` at the right node of element `e`);
//! the local model uses continuous P1 with one dof per node.
//!
//! The nonlocal bilinear form is
//!
//! ```text
//! A(u, z) = ∫∫ (u(y) − u(x)) (z(y) − z(x)) γ(x, y) dy dx
//! ```
//!
//! without a ½ factor, so `uᵀ A u` is twice the energy seminorm squared.
//! For every element pair the inner integral over `y` is done exactly: on a
//! fixed outer point `x`, the basis differences are linear in `t = y − x`
//! and the kernel depends on `|t|` only, so the inner integral reduces to the
//! kernel moments `∫ tᵏ γ dt` for `k = 0, 1, 2`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::banded::BandMatrix;
use crate::error::{LtnError, Result};
use crate::geometry::{Interval, Mesh1D, SNAP_TOL};
use crate::kernels::KernelSpec;
use crate::quadrature::{gauss, graded_edges};

/// A piecewise linear field that can be evaluated element by element.
pub trait PiecewiseLinear {
    fn mesh(&self) -> &Mesh1D;

    /// Values at the left and right node of element `e`, taken from inside
    /// the element.
    fn element_values(&self, e: usize) -> (f64, f64);

    /// Point evaluation using the half-open element convention of
    /// [`Mesh1D::locate`]. Returns `None` outside the mesh.
    fn eval(&self, x: f64) -> Option<f64> {
        let mesh = self.mesh();
        let e = mesh.locate(x)?;
        Some(self.eval_in(e, x))
    }

    fn eval_in(&self, e: usize, x: f64) -> f64 {
        let (a, b) = self.mesh().element(e);
        let (va, vb) = self.element_values(e);
        let s = (x - a) / (b - a);
        va + (vb - va) * s
    }
}

/// Discontinuous P1 field.
#[derive(Debug, Clone)]
pub struct DgField {
    mesh: Arc<Mesh1D>,
    coeffs: Vec<f64>,
}

impl DgField {
    pub fn new(mesh: Arc<Mesh1D>, coeffs: Vec<f64>) -> Result<Self> {
        let expected = 2 * mesh.n_elements();
        if coeffs.len() != expected {
            return Err(LtnError::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self { mesh, coeffs })
    }

    pub fn zeros(mesh: Arc<Mesh1D>) -> Self {
        let n = 2 * mesh.n_elements();
        Self {
            mesh,
            coeffs: vec![0.0; n],
        }
    }

    pub fn interpolate(mesh: Arc<Mesh1D>, f: impl Fn(f64) -> f64) -> Self {
        let coeffs = (0..mesh.n_elements())
            .flat_map(|e| {
                let (a, b) = mesh.element(e);
                [f(a), f(b)]
            })
            .collect();
        Self { mesh, coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }
}

impl PiecewiseLinear for DgField {
    fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    fn element_values(&self, e: usize) -> (f64, f64) {
        (self.coeffs[2 * e], self.coeffs[2 * e + 1])
    }
}

/// Continuous P1 field.
#[derive(Debug, Clone)]
pub struct CgField {
    mesh: Arc<Mesh1D>,
    coeffs: Vec<f64>,
}

impl CgField {
    pub fn new(mesh: Arc<Mesh1D>, coeffs: Vec<f64>) -> Result<Self> {
        let expected = mesh.n_nodes();
        if coeffs.len() != expected {
            return Err(LtnError::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self { mesh, coeffs })
    }

    pub fn zeros(mesh: Arc<Mesh1D>) -> Self {
        let n = mesh.n_nodes();
        Self {
            mesh,
            coeffs: vec![0.0; n],
        }
    }

    pub fn interpolate(mesh: Arc<Mesh1D>, f: impl Fn(f64) -> f64) -> Self {
        let coeffs = mesh.nodes().iter().map(|&x| f(x)).collect();
        Self { mesh, coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }
}

impl PiecewiseLinear for CgField {
    fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    fn element_values(&self, e: usize) -> (f64, f64) {
        (self.coeffs[e], self.coeffs[e + 1])
    }
}

/// Finite element space of a field or load vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Dg,
    Cg,
}

impl Space {
    pub fn n_dofs(self, mesh: &Mesh1D) -> usize {
        match self {
            Space::Dg => 2 * mesh.n_elements(),
            Space::Cg => mesh.n_nodes(),
        }
    }

    /// Global dofs of the two local basis functions of element `e`.
    pub fn element_dofs(self, e: usize) -> [usize; 2] {
        match self {
            Space::Dg => [2 * e, 2 * e + 1],
            Space::Cg => [e, e + 1],
        }
    }
}

/// Quadrature settings for the nonlocal stiffness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Gauss points per outer panel.
    pub outer_points: usize,
    /// Geometric ratio of the panels graded toward a shared node.
    pub grading_ratio: f64,
    pub grading_levels: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            outer_points: 6,
            grading_ratio: 0.5,
            grading_levels: 46,
        }
    }
}

/// Assembled nonlocal stiffness on a DG space.
#[derive(Debug, Clone)]
pub struct NonlocalStiffness {
    pub matrix: BandMatrix,
    pub kernel: KernelSpec,
}

/// Outer point `x = anchor + sign·s`, stored relative to the anchor so that
/// distances to the anchor are exact.
#[derive(Clone, Copy)]
struct OuterPoint {
    anchor: f64,
    offset: f64,
    weight: f64,
}

impl OuterPoint {
    fn x(&self) -> f64 {
        self.anchor + self.offset
    }

    /// `p − x` computed without cancellation when `p` is the anchor.
    fn to(&self, p: f64) -> f64 {
        (p - self.anchor) - self.offset
    }
}

/// Whether two elements interact (their gap is smaller than ε).
fn interacts(mesh: &Mesh1D, ex: usize, ey: usize, eps: f64) -> bool {
    let (xa, xb) = mesh.element(ex);
    let (ya, yb) = mesh.element(ey);
    let gap = (ya - xb).max(xa - yb);
    gap < eps - 1e-15
}

/// Range of elements interacting with `ex`.
fn partners(mesh: &Mesh1D, ex: usize, eps: f64) -> std::ops::Range<usize> {
    let mut lo = ex;
    while lo > 0 && interacts(mesh, ex, lo - 1, eps) {
        lo -= 1;
    }
    let mut hi = ex + 1;
    while hi < mesh.n_elements() && interacts(mesh, ex, hi, eps) {
        hi += 1;
    }
    lo..hi
}

fn outer_points(mesh: &Mesh1D, ex: usize, ey: usize, kernel: &KernelSpec, opts: &AssemblyOptions) -> Vec<OuterPoint> {
    let eps = kernel.epsilon();
    let (xa, xb) = mesh.element(ex);
    let (ya, yb) = mesh.element(ey);
    let mut bps = vec![xa, xb];
    for p in [ya - eps, ya + eps, yb - eps, yb + eps] {
        if xa < p && p < xb {
            bps.push(p);
        }
    }
    bps.sort_by(f64::total_cmp);
    bps.dedup();

    let singular = kernel.family().is_singular();
    // shared node of adjacent elements: the log singularity of the outer
    // integrand sits there
    let left_shared = singular && ey + 1 == ex;
    let right_shared = singular && ey == ex + 1;
    let rule = gauss(opts.outer_points);
    let mut pts = Vec::new();
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if left_shared && a == xa {
            for g in graded_edges(b - a, opts.grading_ratio, opts.grading_levels).windows(2) {
                for (s, wt) in rule.mapped(g[0], g[1]) {
                    pts.push(OuterPoint {
                        anchor: a,
                        offset: s,
                        weight: wt,
                    });
                }
            }
        } else if right_shared && b == xb {
            for g in graded_edges(b - a, opts.grading_ratio, opts.grading_levels).windows(2) {
                for (s, wt) in rule.mapped(g[0], g[1]) {
                    pts.push(OuterPoint {
                        anchor: b,
                        offset: -s,
                        weight: wt,
                    });
                }
            }
        } else {
            for (x, wt) in rule.mapped(a, b) {
                pts.push(OuterPoint {
                    anchor: x,
                    offset: 0.0,
                    weight: wt,
                });
            }
        }
    }
    pts
}

/// Local 4×4 matrix of the pair (E_x, E_y); rows 0..2 belong to E_x and
/// rows 2..4 to E_y. For `ex == ey` only the leading 2×2 block is used.
fn element_pair(
    mesh: &Mesh1D,
    ex: usize,
    ey: usize,
    kernel: &KernelSpec,
    opts: &AssemblyOptions,
) -> Result<[[f64; 4]; 4]> {
    let eps = kernel.epsilon();
    let (xa, xb) = mesh.element(ex);
    let (ya, yb) = mesh.element(ey);
    let hx = xb - xa;
    let hy = yb - ya;
    let mut loc = [[0.0; 4]; 4];
    for p in outer_points(mesh, ex, ey, kernel, opts) {
        let ta = p.to(ya).max(-eps);
        let tb = p.to(yb).min(eps);
        if tb <= ta {
            continue;
        }
        let m = kernel.moments(ta, tb);
        let x = p.x();
        // d_i(t) = φ_i(x + t) − φ_i(x) = D0 + D1·t
        let mut d = [[0.0; 2]; 4];
        if ex == ey {
            d[0] = [0.0, -1.0 / hx];
            d[1] = [0.0, 1.0 / hx];
        } else {
            d[0] = [-p.to(xb) / hx, 0.0];
            d[1] = [-(x - xa) / hx, 0.0];
            d[2] = [p.to(yb) / hy, -1.0 / hy];
            d[3] = [-p.to(ya) / hy, 1.0 / hy];
        }
        for i in 0..4 {
            for j in i..4 {
                let c0 = d[i][0] * d[j][0];
                let c1 = d[i][0] * d[j][1] + d[i][1] * d[j][0];
                let c2 = d[i][1] * d[j][1];
                let mut v = c2 * m[2];
                if c1 != 0.0 {
                    v += c1 * m[1];
                }
                if c0 != 0.0 {
                    v += c0 * m[0];
                }
                loc[i][j] += p.weight * v;
            }
        }
    }
    for i in 0..4 {
        for j in 0..i {
            loc[i][j] = loc[j][i];
        }
    }
    if loc.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LtnError::QuadratureFailure { ex, ey });
    }
    Ok(loc)
}

/// Half bandwidth, in dofs, of the nonlocal stiffness on `mesh`.
pub fn nonlocal_bandwidth(mesh: &Mesh1D, eps: f64) -> usize {
    (0..mesh.n_elements())
        .map(|ex| 2 * (partners(mesh, ex, eps).end - 1 - ex) + 1)
        .max()
        .unwrap_or(1)
}

pub fn assemble_nonlocal_stiffness(mesh: &Mesh1D, kernel: &KernelSpec) -> Result<NonlocalStiffness> {
    assemble_nonlocal_stiffness_with(mesh, kernel, &AssemblyOptions::default())
}

/// Element pairs are integrated in parallel over the outer element; the
/// contributions are merged in element order so results are bit-identical
/// across thread counts.
pub fn assemble_nonlocal_stiffness_with(
    mesh: &Mesh1D,
    kernel: &KernelSpec,
    opts: &AssemblyOptions,
) -> Result<NonlocalStiffness> {
    let eps = kernel.epsilon();
    let ne = mesh.n_elements();
    let blocks: Vec<Vec<(usize, [[f64; 4]; 4])>> = (0..ne)
        .into_par_iter()
        .map(|ex| {
            partners(mesh, ex, eps)
                .map(|ey| element_pair(mesh, ex, ey, kernel, opts).map(|loc| (ey, loc)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut a = BandMatrix::zeros(2 * ne, nonlocal_bandwidth(mesh, eps));
    for (ex, row) in blocks.iter().enumerate() {
        for (ey, loc) in row {
            if ex == *ey {
                let dofs = [2 * ex, 2 * ex + 1];
                for (i, &gi) in dofs.iter().enumerate() {
                    for (j, &gj) in dofs.iter().enumerate() {
                        a.add(gi, gj, loc[i][j]);
                    }
                }
            } else {
                let dofs = [2 * ex, 2 * ex + 1, 2 * ey, 2 * ey + 1];
                for (i, &gi) in dofs.iter().enumerate() {
                    for (j, &gj) in dofs.iter().enumerate() {
                        a.add(gi, gj, loc[i][j]);
                    }
                }
            }
        }
    }
    Ok(NonlocalStiffness {
        matrix: a,
        kernel: *kernel,
    })
}

/// P1 Laplacian stiffness `∫ u' z' dx`.
pub fn assemble_local_stiffness(mesh: &Mesh1D) -> BandMatrix {
    let mut k = BandMatrix::zeros(mesh.n_nodes(), 1);
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let inv = 1.0 / (b - a);
        k.add(e, e, inv);
        k.add(e + 1, e + 1, inv);
        k.add(e, e + 1, -inv);
        k.add(e + 1, e, -inv);
    }
    k
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Right-hand side data.
#[derive(Clone)]
pub enum LoadSpec {
    Smooth(ScalarFn),
    /// Point load `δ(x − c)`.
    Dirac(f64),
    /// Function that is smooth between the listed breakpoints.
    Piecewise {
        f: ScalarFn,
        breakpoints: Vec<f64>,
    },
}

impl LoadSpec {
    pub fn smooth(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        LoadSpec::Smooth(Arc::new(f))
    }

    pub fn zero() -> Self {
        LoadSpec::smooth(|_| 0.0)
    }

    /// Pointwise value; `None` for a Dirac load.
    pub fn value(&self, x: f64) -> Option<f64> {
        match self {
            LoadSpec::Smooth(f) | LoadSpec::Piecewise { f, .. } => Some(f(x)),
            LoadSpec::Dirac(_) => None,
        }
    }
}

impl fmt::Debug for LoadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadSpec::Smooth(_) => f.write_str("Smooth(..)"),
            LoadSpec::Dirac(c) => write!(f, "Dirac({c})"),
            LoadSpec::Piecewise { breakpoints, .. } => {
                write!(f, "Piecewise {{ breakpoints: {breakpoints:?} }}")
            }
        }
    }
}

const LOAD_POINTS: usize = 6;

/// `∫_region f φ_j dx` for every basis function of `space` on `mesh`.
/// Forcing outside `region` is ignored; a point load on the boundary of
/// `region` is rejected.
pub fn assemble_load(mesh: &Mesh1D, space: Space, load: &LoadSpec, region: Interval) -> Result<Vec<f64>> {
    let mut b = vec![0.0; space.n_dofs(mesh)];
    let ne = mesh.n_elements();
    match load {
        LoadSpec::Dirac(c) => {
            let c = *c;
            if (c - region.a).abs() <= SNAP_TOL || (c - region.b).abs() <= SNAP_TOL {
                return Err(LtnError::InvalidInput(format!(
                    "point load at {c} sits on the boundary of ({}, {})",
                    region.a, region.b
                )));
            }
            if region.contains_open(c) {
                let e = mesh
                    .locate(c)
                    .ok_or_else(|| LtnError::InvalidInput(format!("point load at {c} lies outside the mesh")))?;
                let (xa, xb) = mesh.element(e);
                let s = (c - xa) / (xb - xa);
                let [d0, d1] = space.element_dofs(e);
                b[d0] += 1.0 - s;
                b[d1] += s;
            }
        }
        LoadSpec::Smooth(f) | LoadSpec::Piecewise { f, .. } => {
            let extra: &[f64] = match load {
                LoadSpec::Piecewise { breakpoints, .. } => breakpoints,
                _ => &[],
            };
            let rule = gauss(LOAD_POINTS);
            for e in 0..ne {
                let (xa, xb) = mesh.element(e);
                let lo = xa.max(region.a);
                let hi = xb.min(region.b);
                if hi - lo <= SNAP_TOL {
                    continue;
                }
                let mut cuts = vec![lo, hi];
                cuts.extend(extra.iter().copied().filter(|&p| lo < p && p < hi));
                cuts.sort_by(f64::total_cmp);
                let [d0, d1] = space.element_dofs(e);
                for w in cuts.windows(2) {
                    for (x, wt) in rule.mapped(w[0], w[1]) {
                        let fx = f(x) * wt;
                        let s = (x - xa) / (xb - xa);
                        b[d0] += fx * (1.0 - s);
                        b[d1] += fx * s;
                    }
                }
            }
        }
    }
    Ok(b)
}

/// Merged breakpoints of two meshes inside `region`, with the region
/// endpoints included.
fn merged_breakpoints(a: &Mesh1D, b: &Mesh1D, region: Interval) -> Vec<f64> {
    let mut pts: Vec<f64> = a
        .nodes()
        .iter()
        .chain(b.nodes())
        .copied()
        .filter(|&x| region.contains_open(x))
        .chain([region.a, region.b])
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() <= SNAP_TOL);
    pts
}

/// `∫_overlap a b dx`, exact for piecewise linear fields.
pub fn overlap_inner_product(a: &dyn PiecewiseLinear, b: &dyn PiecewiseLinear, overlap: Interval) -> f64 {
    let rule = gauss(2);
    merged_breakpoints(a.mesh(), b.mesh(), overlap)
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let (ea, eb) = (a.mesh().locate(mid), b.mesh().locate(mid));
            match (ea, eb) {
                (Some(ea), Some(eb)) => rule
                    .mapped(w[0], w[1])
                    .map(|(x, wt)| wt * a.eval_in(ea, x) * b.eval_in(eb, x))
                    .sum(),
                _ => 0.0,
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct OverlapPoint {
    x: f64,
    w: f64,
    en: usize,
    el: usize,
}

/// Precomputed quadrature for `L²(Ω_o)` products between the DG nonlocal
/// space and the CG local space.
#[derive(Debug, Clone)]
pub struct OverlapQuadrature {
    points: Vec<OverlapPoint>,
    nonlocal_dofs: usize,
    local_dofs: usize,
    nonlocal: Arc<Mesh1D>,
    local: Arc<Mesh1D>,
}

impl OverlapQuadrature {
    pub fn new(nonlocal: Arc<Mesh1D>, local: Arc<Mesh1D>, overlap: Interval) -> Result<Self> {
        for (m, name) in [(&nonlocal, "nonlocal"), (&local, "local")] {
            let span = m.span();
            if overlap.a < span.a - SNAP_TOL || overlap.b > span.b + SNAP_TOL {
                return Err(LtnError::InvalidMesh(format!(
                    "the {name} mesh does not cover the overlap ({}, {})",
                    overlap.a, overlap.b
                )));
            }
        }
        let rule = gauss(2);
        let mut points = Vec::new();
        for w in merged_breakpoints(&nonlocal, &local, overlap).windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let en = nonlocal.locate(mid).expect("covered above");
            let el = local.locate(mid).expect("covered above");
            points.extend(rule.mapped(w[0], w[1]).map(|(x, w)| OverlapPoint { x, w, en, el }));
        }
        Ok(Self {
            points,
            nonlocal_dofs: 2 * nonlocal.n_elements(),
            local_dofs: local.n_nodes(),
            nonlocal,
            local,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.w)
    }

    fn shape(mesh: &Mesh1D, e: usize, x: f64) -> f64 {
        let (a, b) = mesh.element(e);
        (x - a) / (b - a)
    }

    /// Values of a nonlocal DG coefficient vector at the quadrature points.
    pub fn nonlocal_values(&self, u: &[f64]) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| {
                let s = Self::shape(&self.nonlocal, p.en, p.x);
                u[2 * p.en] * (1.0 - s) + u[2 * p.en + 1] * s
            })
            .collect()
    }

    /// Values of a local CG coefficient vector at the quadrature points.
    pub fn local_values(&self, u: &[f64]) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| {
                let s = Self::shape(&self.local, p.el, p.x);
                u[p.el] * (1.0 - s) + u[p.el + 1] * s
            })
            .collect()
    }

    /// `Σ w a b` over the quadrature points.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(a.iter().zip(b))
            .map(|(p, (x, y))| p.w * x * y)
            .sum()
    }

    /// `(r, φ_i)_{Ω_o}` for every nonlocal dof, with `r` given at the points.
    pub fn test_nonlocal(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nonlocal_dofs];
        for (p, &rv) in self.points.iter().zip(r) {
            let s = Self::shape(&self.nonlocal, p.en, p.x);
            out[2 * p.en] += p.w * rv * (1.0 - s);
            out[2 * p.en + 1] += p.w * rv * s;
        }
        out
    }

    /// `(r, ψ_i)_{Ω_o}` for every local dof.
    pub fn test_local(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.local_dofs];
        for (p, &rv) in self.points.iter().zip(r) {
            let s = Self::shape(&self.local, p.el, p.x);
            out[p.el] += p.w * rv * (1.0 - s);
            out[p.el + 1] += p.w * rv * s;
        }
        out
    }
}
