//! Nonlocal interaction kernels γ(x, y) with compact support of radius ε.
//!
//! Two families are provided, both radial in 1D and scaled so that the
//! nonlocal operator `L u(x) = 2 ∫ (u(y) − u(x)) γ(x, y) dy` reproduces
//! `u''` on polynomials up to degree three:
//!
//! ```text
//! integrable:  γ(x, y) = 3 / (2 ε³)        for |x − y| < ε
//! singular:    γ(x, y) = 1 / (ε² |x − y|)  for 0 < |x − y| < ε
//! ```
//!
//! The tensor Φ that weights the nonlocal gradient is the identity; γ is the
//! only material quantity.

use serde::{Deserialize, Serialize};

use crate::error::{LtnError, Result};
use crate::geometry::{DomainLayout, Interval};
use crate::quadrature::gauss;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[serde(rename = "integrable")]
    IntegrableConstant,
    #[serde(rename = "singular")]
    SingularPeridynamic,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::IntegrableConstant => "integrable",
            KernelFamily::SingularPeridynamic => "singular",
        }
    }

    pub fn is_singular(self) -> bool {
        matches!(self, KernelFamily::SingularPeridynamic)
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = LtnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "integrable" | "constant" | "gamma_i" => Ok(KernelFamily::IntegrableConstant),
            "singular" | "peridynamic" | "gamma_s" => Ok(KernelFamily::SingularPeridynamic),
            other => Err(LtnError::InvalidInput(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Point value of a kernel. The singular family has a pole at x = y which
/// must never be sampled; it is reported instead of returning ∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelValue {
    Finite(f64),
    Singular,
}

impl KernelValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            KernelValue::Finite(v) => Some(v),
            KernelValue::Singular => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    epsilon: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(LtnError::InvalidInput(format!(
                "interaction radius must be positive, got {epsilon}"
            )));
        }
        Ok(Self { family, epsilon })
    }

    pub fn integrable(epsilon: f64) -> Result<Self> {
        Self::new(KernelFamily::IntegrableConstant, epsilon)
    }

    pub fn singular(epsilon: f64) -> Result<Self> {
        Self::new(KernelFamily::SingularPeridynamic, epsilon)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn evaluate(&self, x: f64, y: f64) -> KernelValue {
        let r = (x - y).abs();
        if r >= self.epsilon {
            return KernelValue::Finite(0.0);
        }
        let eps = self.epsilon;
        match self.family {
            KernelFamily::IntegrableConstant => KernelValue::Finite(1.5 / (eps * eps * eps)),
            KernelFamily::SingularPeridynamic => {
                if r == 0.0 {
                    KernelValue::Singular
                } else {
                    KernelValue::Finite(1.0 / (eps * eps * r))
                }
            }
        }
    }

    /// Moments `∫_{ta}^{tb} t^k γ(0, t) dt` for k = 0, 1, 2, with the caller
    /// guaranteeing `−ε ≤ ta ≤ tb ≤ ε`. For the singular family the zeroth
    /// moment is `+∞` whenever the range touches t = 0.
    pub fn moments(&self, ta: f64, tb: f64) -> [f64; 3] {
        let eps = self.epsilon;
        match self.family {
            KernelFamily::IntegrableConstant => {
                let c = 1.5 / (eps * eps * eps);
                [
                    c * (tb - ta),
                    c * 0.5 * (tb * tb - ta * ta),
                    c * (tb * tb * tb - ta * ta * ta) / 3.0,
                ]
            }
            KernelFamily::SingularPeridynamic => {
                let c = 1.0 / (eps * eps);
                let m0 = if ta > 0.0 {
                    (tb / ta).ln()
                } else if tb < 0.0 {
                    (ta / tb).ln()
                } else {
                    f64::INFINITY
                };
                [
                    c * m0,
                    c * (tb.abs() - ta.abs()),
                    c * 0.5 * (tb * tb.abs() - ta * ta.abs()),
                ]
            }
        }
    }

    /// `∫_region γ(x, y) dy`. The singular kernel is integrated analytically;
    /// a region whose closure contains `x` makes that integral diverge.
    pub fn horizon_mass(&self, x: f64, region: Interval) -> Result<f64> {
        let ta = (region.a - x).max(-self.epsilon);
        let tb = (region.b - x).min(self.epsilon);
        if tb <= ta {
            return Ok(0.0);
        }
        let m0 = self.moments(ta, tb)[0];
        if m0.is_finite() {
            Ok(m0)
        } else {
            Err(LtnError::DivergentIntegral { x })
        }
    }

    /// `∫_region γ(x, y)² dy`, or `None` when it diverges.
    pub fn horizon_mass_squared(&self, x: f64, region: Interval) -> Option<f64> {
        let ta = (region.a - x).max(-self.epsilon);
        let tb = (region.b - x).min(self.epsilon);
        if tb <= ta {
            return Some(0.0);
        }
        let eps = self.epsilon;
        match self.family {
            KernelFamily::IntegrableConstant => {
                let c = 1.5 / (eps * eps * eps);
                Some(c * c * (tb - ta))
            }
            KernelFamily::SingularPeridynamic => {
                if ta <= 0.0 && tb >= 0.0 {
                    return None;
                }
                // ∫ 1/(ε⁴ t²) dt over a range bounded away from 0
                let (lo, hi) = if ta > 0.0 { (ta, tb) } else { (-tb, -ta) };
                Some((1.0 / lo - 1.0 / hi) / eps.powi(4))
            }
        }
    }
}

/// Empirical check of the integrability assumptions on the kernel over the
/// global domain of a layout.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub samples: usize,
    /// `min_x ∫_{Ω ∩ B_ε(x)} γ dy`; `+∞` for the singular kernel.
    pub gamma0: f64,
    /// `sup_x (∫_Ω γ² dy)^{1/2}`; `None` when γ is not square integrable.
    pub gamma2: Option<f64>,
    pub lower_bound_holds: bool,
    pub square_integrable: bool,
}

pub fn verify_kernel_assumptions(
    kernel: &KernelSpec,
    layout: &DomainLayout,
    samples: usize,
) -> Result<AssumptionReport> {
    if samples == 0 {
        return Err(LtnError::InvalidInput("at least one sample is required".into()));
    }
    let domain = layout.domain;
    let xs: Vec<f64> = if samples == 1 {
        vec![domain.midpoint()]
    } else {
        (0..samples)
            .map(|k| domain.a + domain.len() * k as f64 / (samples - 1) as f64)
            .collect()
    };

    let mut gamma0 = f64::INFINITY;
    let mut gamma2_sq: Option<f64> = Some(0.0);
    for &x in &xs {
        // splitting at x keeps the singular pole at an endpoint of each half
        let left = Interval::new_unchecked(domain.a, x);
        let right = Interval::new_unchecked(x, domain.b);
        let mass = match (kernel.horizon_mass(x, left), kernel.horizon_mass(x, right)) {
            (Ok(l), Ok(r)) => l + r,
            _ => f64::INFINITY,
        };
        gamma0 = gamma0.min(mass);
        gamma2_sq = match (gamma2_sq, kernel.horizon_mass_squared(x, domain)) {
            (Some(acc), Some(v)) => Some(acc.max(v)),
            _ => None,
        };
    }
    Ok(AssumptionReport {
        samples,
        gamma0,
        gamma2: gamma2_sq.map(f64::sqrt),
        lower_bound_holds: gamma0 > 0.0,
        square_integrable: gamma2_sq.is_some(),
    })
}

/// Reference value of `∫ γ(x, ·) dy` over a full ball computed with plain
/// Gauss quadrature; only meaningful for the integrable family.
pub fn full_ball_mass_by_quadrature(kernel: &KernelSpec, x: f64) -> f64 {
    let eps = kernel.epsilon();
    gauss(8).integrate(x - eps, x + eps, |y| kernel.evaluate(x, y).finite().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::standard_layout;
    use proptest::prelude::*;

    #[test]
    fn point_values() {
        let ki = KernelSpec::integrable(0.1).unwrap();
        let ks = KernelSpec::singular(0.1).unwrap();
        let v = ki.evaluate(0.0, 0.05).finite().unwrap();
        assert!((v - 1500.0).abs() < 1e-9);
        assert_eq!(ki.evaluate(0.0, 0.2), KernelValue::Finite(0.0));
        let v = ks.evaluate(0.0, 0.05).finite().unwrap();
        assert!((v - 2000.0).abs() < 1e-9);
        assert_eq!(ks.evaluate(0.3, 0.3), KernelValue::Singular);
    }

    #[test]
    fn rejects_nonpositive_radius() {
        assert!(KernelSpec::integrable(0.0).is_err());
        assert!(KernelSpec::singular(-1.0).is_err());
        assert!(KernelSpec::singular(f64::NAN).is_err());
    }

    #[test]
    fn horizon_mass_examples() {
        let ki = KernelSpec::integrable(0.1).unwrap();
        let full = ki.horizon_mass(0.5, Interval::new(0.4, 0.6).unwrap()).unwrap();
        assert!((full - 300.0).abs() < 1e-9);
        let half = ki.horizon_mass(0.5, Interval::new(0.5, 0.6).unwrap()).unwrap();
        assert!((half - 150.0).abs() < 1e-9);
        let ks = KernelSpec::singular(0.1).unwrap();
        assert!(matches!(
            ks.horizon_mass(0.5, Interval::new(0.4, 0.6).unwrap()),
            Err(LtnError::DivergentIntegral { .. })
        ));
        // away from the pole the log integral is finite: ∫_{0.05}^{0.1} 100/t dt
        let m = ks.horizon_mass(0.5, Interval::new(0.55, 0.7).unwrap()).unwrap();
        assert!((m - 100.0 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn full_ball_mass_matches_closed_form() {
        let ki = KernelSpec::integrable(0.065).unwrap();
        let q = full_ball_mass_by_quadrature(&ki, 0.3);
        assert!((q - 3.0 / (0.065 * 0.065)).abs() < 1e-12 * q);
    }

    #[test]
    fn assumptions_integrable() {
        let layout = standard_layout(0.065).unwrap();
        let ki = KernelSpec::integrable(0.065).unwrap();
        let r = verify_kernel_assumptions(&ki, &layout, 100).unwrap();
        assert!(r.lower_bound_holds && r.square_integrable);
        // the domain endpoints see only half a ball
        let half_ball = 1.5 / (0.065 * 0.065);
        assert!((r.gamma0 - half_ball).abs() < 1e-9 * half_ball);
        let g2 = (2.25 / 0.065f64.powi(6) * 2.0 * 0.065).sqrt();
        assert!((r.gamma2.unwrap() - g2).abs() < 1e-9 * g2);
    }

    #[test]
    fn assumptions_singular_flag_square_integrability() {
        let layout = standard_layout(0.065).unwrap();
        let ks = KernelSpec::singular(0.065).unwrap();
        let r = verify_kernel_assumptions(&ks, &layout, 100).unwrap();
        assert!(!r.square_integrable);
        assert!(r.gamma2.is_none());
        assert!(r.lower_bound_holds);
        assert!(verify_kernel_assumptions(&ks, &layout, 0).is_err());
    }

    #[test]
    fn moments_match_quadrature_away_from_pole() {
        let ks = KernelSpec::singular(0.1).unwrap();
        let m = ks.moments(0.02, 0.07);
        let rule = gauss(16);
        for (k, mk) in m.iter().enumerate() {
            let q = rule.integrate(0.02, 0.07, |t| t.powi(k as i32) / (0.01 * t));
            assert!((q - mk).abs() < 1e-10 * mk.abs(), "k={k}");
        }
        let m = ks.moments(-0.07, -0.02);
        let q1 = rule.integrate(-0.07, -0.02, |t| t / (0.01 * t.abs()));
        assert!((q1 - m[1]).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_and_compact(x in -2.0f64..2.0, y in -2.0f64..2.0, c in -5.0f64..5.0,
                                 eps in 0.001f64..0.5, singular in any::<bool>()) {
            let fam = if singular { KernelFamily::SingularPeridynamic } else { KernelFamily::IntegrableConstant };
            let k = KernelSpec::new(fam, eps).unwrap();
            prop_assert_eq!(k.evaluate(x, y), k.evaluate(y, x));
            if (x - y).abs() >= eps {
                prop_assert_eq!(k.evaluate(x, y), KernelValue::Finite(0.0));
            }
            if let KernelValue::Finite(v) = k.evaluate(x, y) {
                prop_assert!(v >= 0.0);
            }
            // translation invariance up to the rounding of the shift itself
            let a = k.evaluate(x, y);
            let b = k.evaluate(x + c, y + c);
            match (a, b) {
                (KernelValue::Finite(a), KernelValue::Finite(b)) => {
                    let r = (x - y).abs();
                    if (r - eps).abs() > 1e-12 && r > 1e-9 {
                        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
                    }
                }
                _ => prop_assert!(x == y || (x + c) == (y + c)),
            }
        }
    }
}
