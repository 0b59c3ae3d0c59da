//! Fixtures shared by the criterion benchmarks.

use std::sync::Arc;

use ltn_core::geometry::build_meshes;
use ltn_core::{standard_layout, Case, CoupledProblem, Discretization, KernelFamily, KernelSpec, Mesh1D};

/// Grid sizes 2⁻³ … 2⁻⁷ used by the published tables.
pub fn table_grids() -> impl Iterator<Item = (i32, f64)> {
    (3..=7).map(|k| (k, 2f64.powi(-k)))
}

pub fn kernel(family: KernelFamily, epsilon: f64) -> KernelSpec {
    KernelSpec::new(family, epsilon).expect("positive horizon")
}

/// The nonlocal mesh of the standard layout.
pub fn nonlocal_mesh(epsilon: f64, h: f64) -> Mesh1D {
    let layout = standard_layout(epsilon).expect("valid horizon");
    build_meshes(&layout, h).expect("valid grid").nonlocal
}

/// The M.1 coupled problem on the standard layout.
pub fn m1_problem(family: KernelFamily, epsilon: f64, h: f64) -> CoupledProblem {
    let layout = standard_layout(epsilon).expect("valid horizon");
    let disc = Discretization::new(&layout, &kernel(family, epsilon), h).expect("valid grid");
    CoupledProblem::new(Arc::new(disc), &Case::M1.data(&layout)).expect("valid data")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(table_grids().count(), 5);
        assert!(nonlocal_mesh(0.065, 0.125).n_elements() > 8);
        assert!(m1_problem(KernelFamily::SingularPeridynamic, 0.065, 0.125).n_controls() > 1);
    }
}
