//! Named test problems on the standard layout.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LtnError, Result};
use crate::fem::LoadSpec;
use crate::geometry::DomainLayout;
use crate::state::ProblemData;

/// Manufactured solutions up to cubic degree solve the nonlocal and the
/// local equation with the same forcing, for both kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic(pub [f64; 4]);

impl Cubic {
    pub fn value(&self, x: f64) -> f64 {
        let [c0, c1, c2, c3] = self.0;
        c0 + x * (c1 + x * (c2 + x * c3))
    }

    /// `−u''`
    pub fn forcing(&self, x: f64) -> f64 {
        let [_, _, c2, c3] = self.0;
        -(2.0 * c2 + 6.0 * c3 * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// `u = x`, `f = 0`
    Patch,
    /// `u = x²`, `f = −2`
    M1,
    /// `u = x³`, `f = −6x`
    M2,
    /// Point load at 0.25, zero data.
    A1,
    /// Piecewise forcing with log terms around ½, zero data.
    A2,
    /// User-supplied cubic manufactured solution.
    Custom(Cubic),
}

impl Case {
    pub fn name(&self) -> &'static str {
        match self {
            Case::Patch => "patch",
            Case::M1 => "m1",
            Case::M2 => "m2",
            Case::A1 => "a1",
            Case::A2 => "a2",
            Case::Custom(_) => "custom",
        }
    }

    pub fn polynomial(&self) -> Option<Cubic> {
        match self {
            Case::Patch => Some(Cubic([0.0, 1.0, 0.0, 0.0])),
            Case::M1 => Some(Cubic([0.0, 0.0, 1.0, 0.0])),
            Case::M2 => Some(Cubic([0.0, 0.0, 0.0, 1.0])),
            Case::Custom(c) => Some(*c),
            Case::A1 | Case::A2 => None,
        }
    }

    /// Exact solution, when one is known in closed form.
    pub fn exact(&self) -> Option<impl Fn(f64) -> f64 + Send + Sync + Copy> {
        self.polynomial().map(|p| move |x| p.value(x))
    }

    /// Forcing, volume-constraint data and the Dirichlet value at Γ_D.
    pub fn data(&self, layout: &DomainLayout) -> ProblemData {
        let gamma_d = layout.gamma_d;
        match self {
            Case::A1 => ProblemData {
                f_n: LoadSpec::Dirac(0.25),
                f_l: LoadSpec::Dirac(0.25),
                ..ProblemData::zero()
            },
            Case::A2 => {
                let f = a2_forcing(layout.epsilon);
                ProblemData {
                    f_n: f.clone(),
                    f_l: f,
                    ..ProblemData::zero()
                }
            }
            _ => {
                let p = self.polynomial().expect("polynomial case");
                let f = LoadSpec::smooth(move |x| p.forcing(x));
                ProblemData {
                    f_n: f.clone(),
                    f_l: f,
                    sigma_n: Arc::new(move |x| p.value(x)),
                    sigma_l: p.value(gamma_d),
                }
            }
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = LtnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['.', '_', '-'], "").as_str() {
            "patch" => Ok(Case::Patch),
            "m1" => Ok(Case::M1),
            "m2" => Ok(Case::M2),
            "a1" => Ok(Case::A1),
            "a2" => Ok(Case::A2),
            other => Err(LtnError::InvalidInput(format!(
                "unknown case '{other}' (expected patch, m1, m2, a1 or a2)"
            ))),
        }
    }
}

/// Breakpoints of the A.2 forcing.
pub fn a2_breakpoints(epsilon: f64) -> [f64; 3] {
    [0.5 - epsilon, 0.5, 0.5 + epsilon]
}

/// Levels of geometric breakpoints toward ½ on each side, ending at
/// `ε·2⁻⁴⁰`, well above the spacing of doubles near ½.
const A2_GRADING_LEVELS: i32 = 40;

/// The A.2 forcing. It has logarithmic singularities at ½; the load
/// quadrature never samples ½ itself, and extra breakpoints graded toward
/// it keep Gauss rules accurate on the elements next to it.
pub fn a2_forcing(epsilon: f64) -> LoadSpec {
    let e = epsilon;
    let le = e.ln();
    let f = move |x: f64| -> f64 {
        if x < 0.5 - e || x >= 0.5 + e {
            0.0
        } else if x < 0.5 {
            -2.0 / e
                * (0.5 * e * e - e + 0.375 + (2.0 * e - 1.5 - le) * x + (1.5 + le) * x * x
                    - (0.5 - x).ln() * (x * x - x))
        } else {
            -2.0 / e
                * (0.5 * e * e - e - 0.375 + (2.0 * e + 1.5 + le) * x
                    - (1.5 + le) * x * x
                    - (x - 0.5).ln() * (x * x - x))
        }
    };
    let mut breakpoints = a2_breakpoints(epsilon).to_vec();
    for k in 1..=A2_GRADING_LEVELS {
        let d = epsilon * 0.5f64.powi(k);
        breakpoints.extend([0.5 - d, 0.5 + d]);
    }
    breakpoints.sort_by(f64::total_cmp);
    LoadSpec::Piecewise {
        f: Arc::new(f),
        breakpoints,
    }
}
