//! Adaptive Simpson quadrature and fixed Gauss–Legendre rules.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const MAX_DEPTH: u32 = 40;
const MIN_DEPTH: u32 = 4;
const EVAL_BUDGET: usize = 4_000_000;
const ROUNDING_FLOOR: f64 = 4.0 * f64::EPSILON;

struct Simpson<'a, F> {
    f: &'a mut F,
    evals: usize,
}

impl<F: FnMut(f64) -> Result<f64>> Simpson<'_, F> {
    fn eval(&mut self, x: f64) -> Result<f64> {
        self.evals += 1;
        if self.evals > EVAL_BUDGET {
            return Err(Error::Quadrature { at: x, reason: "evaluation budget exhausted" });
        }
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(Error::Quadrature { at: x, reason: "non-finite integrand" });
        }
        Ok(v)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let flm = self.eval(lm)?;
        let frm = self.eval(rm)?;
        let h = b - a;
        let left = h * (fa + 4.0 * flm + fm) / 12.0;
        let right = h * (fm + 4.0 * frm + fb) / 12.0;
        let delta = left + right - whole;
        // the requested absolute tolerance cannot go below the rounding level
        let floor = ROUNDING_FLOOR * (left + right).abs();
        if depth >= MAX_DEPTH || (depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol.max(floor)) {
            return Ok(left + right + delta / 15.0);
        }
        Ok(self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?
            + self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?)
    }
}

/// Signed adaptive Simpson integral of `f` over `[a, b]` (negative when
/// `b < a`) with absolute tolerance `tol`. Recursion depth is capped at 40.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return adaptive_simpson(f, b, a, tol).map(|v| -v);
    }
    let mut s = Simpson { f: &mut f, evals: 0 };
    let fa = s.eval(a)?;
    let fb = s.eval(b)?;
    let m = 0.5 * (a + b);
    let fm = s.eval(m)?;
    let whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0;
    s.recurse(a, b, fa, fm, fb, whole, tol, 0)
}

/// `∫_a^b ds / φ(s)` for `a, b > 0`, computed in the logarithmic variable
/// `s = a·eˣ`, which keeps integrands smooth over many decades.
pub fn reciprocal_integral<F>(mut phi: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Quadrature {
            at: if a > 0.0 { b } else { a },
            reason: "integration limits must be positive and finite",
        });
    }
    if a == b {
        return Ok(0.0);
    }
    let span = libm::log1p((b - a) / a);
    adaptive_simpson(
        |x| {
            let s = a * libm::exp(x);
            let p = phi(s)?;
            if !(p > 0.0) {
                return Err(Error::Quadrature { at: s, reason: "decay rate is not positive" });
            }
            Ok(s / p)
        },
        0.0,
        span,
        tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre polynomial from Chebyshev initial
    /// guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 1 { x } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = nf * (x * p - pm) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_a^b f` by the fixed rule (signed).
    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let t = mid + half * x;
            let v = f(t)?;
            if !v.is_finite() {
                return Err(Error::Quadrature { at: t, reason: "non-finite integrand" });
            }
            acc += w * v;
        }
        Ok(acc * half)
    }
}
