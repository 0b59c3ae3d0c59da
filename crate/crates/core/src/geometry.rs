//! One-dimensional domain decomposition and lattice meshes.
//!
//! ```text
//!   η_D        ω_n                    η_c
//! |-----|----------------------------|-----|                 Ω_n
//! -ε    0              Γ_c           1    1+ε
//!                       |------------------------------|      Ω_l
//!                      0.75          Ω_o              1.75 = Γ_D
//! ```

use serde::Serialize;

use crate::error::{LtnError, Result};

/// Coordinates closer than this are treated as the same mesh node.
pub const SNAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(LtnError::InvalidInput(format!("invalid interval ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    /// Allows degenerate intervals (a == b); used for probes that need an
    /// empty region.
    pub fn new_unchecked(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn len(&self) -> f64 {
        (self.b - self.a).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.b <= self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn contains_open(&self, x: f64) -> bool {
        self.a < x && x < self.b
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        Interval::new_unchecked(self.a.max(other.a), self.b.min(other.b))
    }
}

/// Subdomains of the local-to-nonlocal configuration.
#[derive(Debug, Clone, Serialize)]
pub struct DomainLayout {
    /// Global domain Ω = Ω_n ∪ Ω_l.
    pub domain: Interval,
    /// Global interior ω; Ω = ω ∪ η.
    pub omega: Interval,
    /// Global interaction layer η, one piece at each end of Ω.
    pub eta: (Interval, Interval),
    /// Nonlocal subdomain Ω_n = η_D ∪ ω_n ∪ η_c.
    pub nonlocal_domain: Interval,
    pub omega_n: Interval,
    pub eta_d: Interval,
    pub eta_c: Interval,
    pub omega_l: Interval,
    pub gamma_d: f64,
    pub gamma_c: f64,
    /// Ω_o = Ω_n ∩ Ω_l.
    pub overlap: Interval,
    pub epsilon: f64,
    /// |Ω_o|
    pub kappa: f64,
}

impl DomainLayout {
    /// Builds a layout from the nonlocal interior ω_n = (a, b) and the local
    /// subdomain Ω_l = (Γ_c, Γ_D). The virtual control layer η_c sits to the
    /// right of ω_n, the fixed layer η_D to its left.
    pub fn new(epsilon: f64, omega_n: Interval, omega_l: Interval) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(LtnError::InvalidLayout(format!("ε must be positive, got {epsilon}")));
        }
        let gamma_c = omega_l.a;
        let gamma_d = omega_l.b;
        if !omega_n.contains_open(gamma_c) {
            return Err(LtnError::InvalidLayout(format!(
                "Γ_c = {gamma_c} must lie strictly inside ω_n = ({}, {})",
                omega_n.a, omega_n.b
            )));
        }
        if gamma_c + epsilon >= omega_n.b {
            return Err(LtnError::InvalidLayout(format!(
                "Γ_c = {gamma_c} must be farther than ε = {epsilon} from η_c"
            )));
        }
        // η_c ⊂ Ω_l, and η_c stays clear of the global interaction layer at Γ_D
        if omega_n.b + epsilon > gamma_d - epsilon {
            return Err(LtnError::InvalidLayout(format!(
                "η_c = ({}, {}) must lie inside Ω_l away from its outer layer",
                omega_n.b,
                omega_n.b + epsilon
            )));
        }
        let eta_d = Interval::new(omega_n.a - epsilon, omega_n.a)?;
        let eta_c = Interval::new(omega_n.b, omega_n.b + epsilon)?;
        let nonlocal_domain = Interval::new(eta_d.a, eta_c.b)?;
        let domain = Interval::new(nonlocal_domain.a, gamma_d)?;
        let omega = Interval::new(domain.a + epsilon, domain.b - epsilon)?;
        let eta = (Interval::new(domain.a, omega.a)?, Interval::new(omega.b, domain.b)?);
        let overlap = nonlocal_domain.intersect(&omega_l);
        if overlap.is_empty() {
            return Err(LtnError::InvalidLayout("Ω_n and Ω_l do not overlap".into()));
        }
        Ok(Self {
            domain,
            omega,
            eta,
            nonlocal_domain,
            omega_n,
            eta_d,
            eta_c,
            omega_l,
            gamma_d,
            gamma_c,
            overlap,
            epsilon,
            kappa: overlap.len(),
        })
    }

    /// Interface points of the nonlocal subdomain, left to right.
    pub fn nonlocal_interfaces(&self) -> [f64; 5] {
        [self.eta_d.a, self.omega_n.a, self.gamma_c, self.omega_n.b, self.eta_c.b]
    }
}

/// The standard test configuration: Ω_n = (−ε, 1+ε), Ω_l = (0.75, 1.75).
pub fn standard_layout(epsilon: f64) -> Result<DomainLayout> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(LtnError::InvalidLayout(format!(
            "standard layout needs 0 < ε < 0.25, got {epsilon}"
        )));
    }
    DomainLayout::new(epsilon, Interval::new(0.0, 1.0)?, Interval::new(0.75, 1.75)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    h: f64,
}

impl Mesh1D {
    pub fn from_nodes(nodes: Vec<f64>, h: f64) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(LtnError::InvalidMesh("a mesh needs at least two nodes".into()));
        }
        if let Some(w) = nodes.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(LtnError::InvalidMesh(format!(
                "nodes must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { nodes, h })
    }

    /// Nodes of the lattice `{k·h}` inside `span`, the endpoints of `span`,
    /// and every `required` point inside `span`. Lattice points within
    /// [`SNAP_TOL`] of a required point are dropped in its favour.
    pub fn lattice(span: Interval, h: f64, required: &[f64]) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(LtnError::InvalidMesh(format!("grid size must be positive, got {h}")));
        }
        let mut fixed: Vec<f64> = required
            .iter()
            .copied()
            .chain([span.a, span.b])
            .filter(|&p| span.contains_closed(p))
            .collect();
        fixed.sort_by(f64::total_cmp);
        fixed.dedup_by(|x, y| (*x - *y).abs() <= SNAP_TOL);

        let kmin = (span.a / h - 1e-9).ceil() as i64;
        let kmax = (span.b / h + 1e-9).floor() as i64;
        let mut nodes = fixed.clone();
        for k in kmin..=kmax {
            let x = k as f64 * h;
            let clear = fixed.iter().all(|&p| (p - x).abs() > SNAP_TOL);
            if clear && span.contains_open(x) {
                nodes.push(x);
            }
        }
        nodes.sort_by(f64::total_cmp);
        Self::from_nodes(nodes, h)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Nominal grid size the mesh was built with.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn span(&self) -> Interval {
        Interval::new_unchecked(self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// Element containing `x` under the half-open convention `[x_e, x_{e+1})`;
    /// the right end of the mesh belongs to the last element.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let span = self.span();
        if !span.contains_closed(x) {
            return None;
        }
        let idx = self.nodes.partition_point(|&n| n <= x);
        Some(idx.saturating_sub(1).min(self.n_elements() - 1))
    }

    pub fn node_index(&self, x: f64) -> Option<usize> {
        let idx = self.nodes.partition_point(|&n| n < x - SNAP_TOL);
        (idx < self.nodes.len() && (self.nodes[idx] - x).abs() <= SNAP_TOL).then_some(idx)
    }

    pub fn has_node(&self, x: f64) -> bool {
        self.node_index(x).is_some()
    }

    /// Elements whose midpoint lies in `region`.
    pub fn elements_in(&self, region: Interval) -> std::ops::Range<usize> {
        let first = (0..self.n_elements())
            .find(|&e| region.contains_open(0.5 * (self.nodes[e] + self.nodes[e + 1])))
            .unwrap_or(self.n_elements());
        let mut last = first;
        while last < self.n_elements() && region.contains_open(0.5 * (self.nodes[last] + self.nodes[last + 1])) {
            last += 1;
        }
        first..last
    }
}

/// Meshes of the two subproblems.
#[derive(Debug, Clone)]
pub struct MeshPair {
    pub nonlocal: Mesh1D,
    pub local: Mesh1D,
}

pub fn build_meshes(layout: &DomainLayout, h: f64) -> Result<MeshPair> {
    if !(h.is_finite() && h > 0.0) {
        return Err(LtnError::InvalidMesh(format!("grid size must be positive, got {h}")));
    }
    let smallest = (layout.gamma_c - layout.omega_n.a).min(layout.omega_n.b - layout.gamma_c);
    if h > smallest + SNAP_TOL {
        return Err(LtnError::InvalidMesh(format!(
            "grid size {h} exceeds the smallest layout subinterval {smallest}"
        )));
    }
    let nonlocal = Mesh1D::lattice(layout.nonlocal_domain, h, &layout.nonlocal_interfaces())?;
    let local = Mesh1D::lattice(layout.omega_l, h, &[])?;
    Ok(MeshPair { nonlocal, local })
}

/// Mesh of the global domain Ω for the fully nonlocal reference problem,
/// aligned with the global interaction layers.
pub fn global_nonlocal_mesh(layout: &DomainLayout, h: f64) -> Result<Mesh1D> {
    Mesh1D::lattice(layout.domain, h, &[layout.omega.a, layout.omega.b])
}

/// Mesh of Ω for the fully local reference problem.
pub fn global_local_mesh(layout: &DomainLayout, h: f64) -> Result<Mesh1D> {
    Mesh1D::lattice(layout.domain, h, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_layout_values() {
        let l = standard_layout(0.065).unwrap();
        assert_eq!(l.overlap, Interval::new_unchecked(0.75, 1.065));
        assert!((l.kappa - 0.315).abs() < 1e-12);
        assert_eq!(l.nonlocal_domain, Interval::new_unchecked(-0.065, 1.065));
        assert_eq!(l.eta_d, Interval::new_unchecked(-0.065, 0.0));
        assert_eq!(l.gamma_c, 0.75);
        assert_eq!(l.gamma_d, 1.75);
        assert_eq!(l.domain, Interval::new_unchecked(-0.065, 1.75));
        assert!((l.omega.b - 1.685).abs() < 1e-12);

        let l = standard_layout(0.010).unwrap();
        assert_eq!(l.eta_c, Interval::new_unchecked(1.0, 1.01));
        assert!(standard_layout(0.3).is_err());
        assert!(standard_layout(0.0).is_err());
    }

    #[test]
    fn custom_layout_rejects_gamma_c_outside() {
        let r = DomainLayout::new(0.05, Interval::new(0.0, 1.0).unwrap(), Interval::new(1.2, 2.0).unwrap());
        assert!(r.is_err());
    }

    #[test]
    fn meshes_contain_interfaces() {
        let l = standard_layout(0.065).unwrap();
        let m = build_meshes(&l, 2f64.powi(-7)).unwrap();
        for p in [-0.065, 0.0, 0.75, 1.0, 1.065] {
            assert!(m.nonlocal.has_node(p), "{p}");
        }
        assert_eq!(m.nonlocal.span(), l.nonlocal_domain);
        assert!(m.local.has_node(0.75) && m.local.has_node(1.75));
        assert_eq!(m.local.n_elements(), 128);
    }

    #[test]
    fn coarse_and_invalid_grids() {
        let l = standard_layout(0.065).unwrap();
        let m = build_meshes(&l, 0.125).unwrap();
        // η_D and η_c are single clipped elements
        assert_eq!(m.nonlocal.element(0), (-0.065, 0.0));
        assert_eq!(m.nonlocal.n_elements(), 10);
        let l = standard_layout(0.01).unwrap();
        assert!(build_meshes(&l, 0.5).is_err());
        assert!(build_meshes(&l, -1.0).is_err());
    }

    #[test]
    fn locate_uses_half_open_elements() {
        let m = Mesh1D::from_nodes(vec![0.0, 0.5, 1.0], 0.5).unwrap();
        assert_eq!(m.locate(0.5), Some(1));
        assert_eq!(m.locate(0.0), Some(0));
        assert_eq!(m.locate(1.0), Some(1));
        assert_eq!(m.locate(1.5), None);
        assert_eq!(m.elements_in(Interval::new_unchecked(0.5, 1.0)), 1..2);
    }

    proptest! {
        #[test]
        fn lattice_meshes_are_valid(eps in 0.005f64..0.24, k in 3i32..9) {
            let l = standard_layout(eps).unwrap();
            let h = 2f64.powi(-k);
            if let Ok(m) = build_meshes(&l, h) {
                for mesh in [&m.nonlocal, &m.local] {
                    for w in mesh.nodes().windows(2) {
                        let len = w[1] - w[0];
                        prop_assert!(len > SNAP_TOL);
                        prop_assert!((len - h).abs() / h <= 1.0);
                    }
                }
                for p in l.nonlocal_interfaces() {
                    prop_assert!(m.nonlocal.has_node(p));
                }
            }
        }
    }
}
