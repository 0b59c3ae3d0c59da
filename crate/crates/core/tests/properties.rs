use std::sync::Arc;

use ltn_core::cases::{Case, Cubic};
use ltn_core::geometry::standard_layout;
use ltn_core::optimizer::{objective_and_gradient, solve, NormalSystem};
use ltn_core::state::{CoupledProblem, Discretization};
use ltn_core::{ControlPair, KernelFamily, KernelSpec, Solver};
use proptest::prelude::*;

fn family(singular: bool) -> KernelFamily {
    if singular {
        KernelFamily::SingularPeridynamic
    } else {
        KernelFamily::IntegrableConstant
    }
}

fn problem(singular: bool, eps: f64, k: i32, case: Case) -> CoupledProblem {
    let kernel = KernelSpec::new(family(singular), eps).unwrap();
    let layout = standard_layout(eps).unwrap();
    let disc = Discretization::new(&layout, &kernel, 2f64.powi(-k)).unwrap();
    CoupledProblem::new(Arc::new(disc), &case.data(&layout)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_data_is_reproduced(
        singular in any::<bool>(),
        eps in 0.02f64..0.2,
        k in 3i32..7,
        c0 in -2.0f64..2.0,
        c1 in -2.0f64..2.0,
    ) {
        let p = problem(singular, eps, k, Case::Custom(Cubic([c0, c1, 0.0, 0.0])));
        let sol = solve(&p, Solver::Normal, &Default::default()).unwrap();
        for i in 0..=200 {
            let x = (-eps + (1.75 + eps) * i as f64 / 200.0).min(1.75);
            let err = (sol.eval(x).unwrap() - (c0 + c1 * x)).abs();
            prop_assert!(err < 1e-9, "x = {x}: {err}");
        }
    }

    #[test]
    fn normal_matrix_is_spd(singular in any::<bool>(), eps in 0.01f64..0.2, k in 3i32..7) {
        let p = problem(singular, eps, k, Case::M1);
        let n = NormalSystem::assemble(&p).unwrap();
        let asym = (&n.q - n.q.transpose()).abs().max();
        prop_assert!(asym <= 1e-12 * n.q.abs().max());
        prop_assert!(n.eigenvalues().min() > 0.0);
    }

    #[test]
    fn optimum_is_a_minimizer(
        singular in any::<bool>(),
        eps in 0.02f64..0.2,
        dir in proptest::collection::vec(-1.0f64..1.0, 64),
        t in 1e-3f64..1.0,
    ) {
        let p = problem(singular, eps, 5, Case::M2);
        let sol = solve(&p, Solver::Normal, &Default::default()).unwrap();
        let best = objective_and_gradient(&p, &sol.controls).unwrap();
        let x: Vec<f64> = sol.controls.to_vec().iter().zip(dir.iter().cycle()).map(|(a, d)| a + t * d).collect();
        let moved = objective_and_gradient(&p, &ControlPair::from_slice(&x)).unwrap();
        prop_assert!(moved.value >= best.value * (1.0 - 1e-12));
        let g = best.gradient.to_vec().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(g < 1e-10, "{g}");
    }
}
