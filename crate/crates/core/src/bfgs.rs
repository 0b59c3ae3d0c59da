//! Full-memory BFGS with a Wolfe line search.
//!
//! The line search follows the bracketing/zoom scheme of Nocedal and Wright
//! (Algorithms 3.5 and 3.6). Near a minimizer the decrease in `f` can fall
//! below its rounding error while the directional derivative is still
//! accurate, so a step is also accepted when `f` is unchanged to within
//! roundoff and the approximate Wolfe condition
//! `(2δ − 1) φ'(0) ≥ φ'(α) ≥ c₂ φ'(0)` of Hager and Zhang holds.

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BfgsOptions {
    /// Stop when `‖∇f‖_∞ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub c2: f64,
    /// Largest step tried by the bracketing phase.
    pub max_step: f64,
    /// Cap on function evaluations per line search.
    pub max_evals: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
            c1: 1e-4,
            c2: 0.9,
            max_step: 1e12,
            max_evals: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Trial {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    dphi: f64,
}

struct LineSearch<'a, F> {
    fun: &'a mut F,
    x: &'a [f64],
    p: &'a [f64],
    f0: f64,
    dphi0: f64,
    opts: &'a BfgsOptions,
    evals: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Result<Trial> {
        let xt: Vec<f64> = self.x.iter().zip(self.p).map(|(x, p)| x + alpha * p).collect();
        let (f, g) = (self.fun)(&xt)?;
        self.evals += 1;
        let dphi = dot(&g, self.p);
        Ok(Trial { alpha, f, g, dphi })
    }

    fn decreases(&self, t: &Trial) -> bool {
        if t.f <= self.f0 + self.opts.c1 * t.alpha * self.dphi0 {
            return true;
        }
        let noise = 1e-12 * self.f0.abs().max(f64::MIN_POSITIVE);
        let delta = 0.1;
        (t.f - self.f0).abs() <= noise && t.dphi <= (2.0 * delta - 1.0) * self.dphi0
    }

    fn curvature_ok(&self, t: &Trial) -> bool {
        t.dphi.abs() <= -self.opts.c2 * self.dphi0
    }

    /// Whether `t` is no better than `lo`, judged by `f` and, when `f`
    /// differences are within roundoff, by the sign of the derivative.
    fn worse_than(&self, t: &Trial, lo: &Trial) -> bool {
        let noise = 1e-12 * lo.f.abs().max(f64::MIN_POSITIVE);
        if (t.f - lo.f).abs() > noise {
            t.f >= lo.f
        } else {
            // flat in f: t is worse when the minimum lies between lo and t
            t.dphi * (t.alpha - lo.alpha) > 0.0 && !self.decreases(t)
        }
    }

    fn run(&mut self) -> Result<Option<Trial>> {
        let mut prev = Trial {
            alpha: 0.0,
            f: self.f0,
            g: Vec::new(),
            dphi: self.dphi0,
        };
        let mut alpha = 1.0;
        let mut first = true;
        while self.evals < self.opts.max_evals {
            let t = self.eval(alpha)?;
            if !t.f.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if !self.decreases(&t) || (!first && self.worse_than(&t, &prev)) {
                return self.zoom(prev, t);
            }
            if self.curvature_ok(&t) {
                return Ok(Some(t));
            }
            if t.dphi >= 0.0 {
                return self.zoom(t, prev);
            }
            first = false;
            let next = (2.0 * alpha).min(self.opts.max_step);
            if next == alpha {
                return Ok(Some(t));
            }
            prev = t;
            alpha = next;
        }
        Ok(None)
    }

    fn zoom(&mut self, mut lo: Trial, mut hi: Trial) -> Result<Option<Trial>> {
        while self.evals < self.opts.max_evals {
            let (a, b) = (lo.alpha, hi.alpha);
            let width = b - a;
            if width.abs() <= f64::EPSILON * a.abs().max(b.abs()) {
                break;
            }
            // secant on φ' is exact for quadratics; bisection as safeguard
            let mut alpha = 0.5 * (a + b);
            if lo.dphi != hi.dphi {
                let s = a - lo.dphi * width / (hi.dphi - lo.dphi);
                let (l, u) = (a.min(b), a.max(b));
                let margin = 0.05 * (u - l);
                if s > l + margin && s < u - margin {
                    alpha = s;
                }
            }
            let t = self.eval(alpha)?;
            if !self.decreases(&t) || self.worse_than(&t, &lo) {
                hi = t;
            } else {
                if self.curvature_ok(&t) {
                    return Ok(Some(t));
                }
                if t.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = t;
            }
        }
        // no Wolfe point found; accept the best decreasing iterate if any
        Ok((lo.alpha > 0.0).then_some(lo))
    }
}

/// Minimizes `fun`, which returns the value and gradient at a point.
pub fn minimize<F>(mut fun: F, x0: &[f64], opts: &BfgsOptions) -> Result<BfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = fun(&x)?;
    let mut evaluations = 1;
    // inverse Hessian approximation, row-major
    let mut hinv = vec![0.0; n * n];
    for i in 0..n {
        hinv[i * n + i] = 1.0;
    }
    let mut iterations = 0;
    let termination = loop {
        if inf_norm(&g) <= opts.tol {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iter {
            break Termination::MaxIterations;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&hinv[i * n..(i + 1) * n], &g)).collect();
        let mut dphi0 = dot(&p, &g);
        if !(dphi0 < 0.0) {
            // lost descent: restart from steepest descent
            hinv.iter_mut()
                .enumerate()
                .for_each(|(k, v)| *v = if k % (n + 1) == 0 { 1.0 } else { 0.0 });
            p = g.iter().map(|v| -v).collect();
            dphi0 = dot(&p, &g);
        }
        let mut ls = LineSearch {
            fun: &mut fun,
            x: &x,
            p: &p,
            f0: f,
            dphi0,
            opts,
            evals: 0,
        };
        let step = ls.run()?;
        evaluations += ls.evals;
        let Some(t) = step else {
            break Termination::LineSearchFailure;
        };
        let s: Vec<f64> = p.iter().map(|v| t.alpha * v).collect();
        let y: Vec<f64> = t.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        f = t.f;
        g = t.g;
        iterations += 1;

        let sy = dot(&s, &y);
        if sy > 0.0 {
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&hinv[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += -rho * (s[i] * hy[j] + hy[i] * s[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    };
    Ok(BfgsResult {
        grad_inf_norm: inf_norm(&g),
        x,
        value: f,
        iterations,
        evaluations,
        termination,
    })
}
