//! Comparison functions (positive definite, K, K∞ and L) as declared-class
//! wrappers over one-variable expressions.
//!
//! Class membership is audited on sample grids, never proved: a passing
//! [`ClassReport`] means only that no sample refuted the declaration.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::expr::{parse_expression, Compiled, Expr};

/// `|f(0)|` must not exceed this for PD/K/K∞ declarations.
pub const ZERO_AT_ZERO_TOL: f64 = 1e-12;
/// An L-function must fall below this fraction of its first grid value by the
/// end of the grid.
pub const L_TAIL_FRACTION: f64 = 1e-3;
pub const DEFAULT_INVERT_TOL: f64 = 1e-10;
pub const DEFAULT_ENVELOPE_DENSITY: usize = 512;
const BRACKET_LIMIT: f64 = 1e308;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionClass {
    /// Continuous, zero at zero, positive elsewhere.
    PositiveDefinite,
    /// Positive definite and strictly increasing.
    K,
    /// Class K and unbounded.
    KInfinity,
    /// Strictly decreasing to zero.
    L,
}

impl FunctionClass {
    pub fn is_increasing(self) -> bool {
        matches!(self, FunctionClass::K | FunctionClass::KInfinity)
    }
}

/// `0` followed by 200 log-spaced points on `[1e-9, 1e6]`.
pub fn default_grid() -> Vec<f64> {
    let mut g = Vec::with_capacity(201);
    g.push(0.0);
    g.extend(log_grid(1e-9, 1e6, 200));
    g
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && count >= 2);
    let (a, b) = (libm::log(lo), libm::log(hi));
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == count {
                hi
            } else {
                libm::exp(a + (b - a) * i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

/// `count` uniformly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// A scalar function on `[0, ∞)` with a declared comparison class.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneFunction {
    body: Expr,
    variable: Option<String>,
    compiled: Compiled,
    class: FunctionClass,
}

impl MonotoneFunction {
    /// The body may use at most one free variable (conventionally `r` or `s`).
    pub fn new(body: Expr, class: FunctionClass) -> Result<Self> {
        let vars = body.free_variables();
        if vars.len() > 1 {
            let names: Vec<&str> = vars.iter().map(String::as_str).collect();
            return Err(invalid(format!(
                "comparison function must have one variable, found {}",
                names.join(", ")
            )));
        }
        let variable = vars.into_iter().next();
        let compiled = match &variable {
            Some(v) => Compiled::new(&body, &[v.as_str()])?,
            None => Compiled::new(&body, &["_"])?,
        };
        Ok(MonotoneFunction { body, variable, compiled, class })
    }

    pub fn parse(text: &str, class: FunctionClass) -> Result<Self> {
        Self::new(parse_expression(text)?, class)
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn variable(&self) -> Option<&str> {
        self.variable.as_deref()
    }

    pub fn class(&self) -> FunctionClass {
        self.class
    }

    /// Whether the body is a bare variable, i.e. the identity.
    pub fn is_identity(&self) -> bool {
        matches!(self.body, Expr::Var(_))
    }

    pub fn with_class(&self, class: FunctionClass) -> Self {
        MonotoneFunction { class, ..self.clone() }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        self.compiled.eval(&[r])
    }

    /// Derivative by forward-mode differentiation.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        Ok(self.compiled.eval_directional(&[r], &[1.0])?.derivative)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassCondition {
    ZeroAtZero,
    Positive,
    StrictlyIncreasing,
    StrictlyDecreasing,
    DecaysToZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassViolation {
    pub index: usize,
    pub r: f64,
    pub value: f64,
    pub condition: ClassCondition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class: FunctionClass,
    pub grid: Vec<f64>,
    pub pass: bool,
    pub first_violation: Option<ClassViolation>,
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("grid is empty"));
    }
    if grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(invalid("grid points must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("grid must be sorted"));
    }
    Ok(())
}

/// Samples the declared-class conditions on `grid`, in grid order, and
/// reports the first refuting sample.
pub fn verify_class(f: &MonotoneFunction, grid: &[f64]) -> Result<ClassReport> {
    validate_grid(grid)?;
    let values = grid
        .iter()
        .map(|&r| {
            f.eval(r)
                .map_err(|e| Error::EvaluationAt { point: r, source: e.into() })
        })
        .collect::<Result<Vec<f64>>>()?;
    let class = f.class();
    let violation = |index: usize, condition| ClassViolation {
        index,
        r: grid[index],
        value: values[index],
        condition,
    };
    let mut first = None;
    for i in 0..grid.len() {
        let (r, v) = (grid[i], values[i]);
        let found = match class {
            FunctionClass::PositiveDefinite | FunctionClass::K | FunctionClass::KInfinity => {
                if r == 0.0 && v.abs() > ZERO_AT_ZERO_TOL {
                    Some(ClassCondition::ZeroAtZero)
                } else if r > 0.0 && !(v > 0.0) {
                    Some(ClassCondition::Positive)
                } else if class.is_increasing() && i > 0 && grid[i] > grid[i - 1] && !(v > values[i - 1]) {
                    Some(ClassCondition::StrictlyIncreasing)
                } else {
                    None
                }
            }
            FunctionClass::L => {
                if v < 0.0 || !v.is_finite() {
                    Some(ClassCondition::Positive)
                } else if i > 0 && grid[i] > grid[i - 1] && values[i - 1] > 0.0 && !(v < values[i - 1]) {
                    // strict decrease is required while the value is representable
                    Some(ClassCondition::StrictlyDecreasing)
                } else if i > 0 && values[i - 1] == 0.0 && v != 0.0 {
                    Some(ClassCondition::StrictlyDecreasing)
                } else {
                    None
                }
            }
        };
        if let Some(c) = found {
            first = Some(violation(i, c));
            break;
        }
    }
    if first.is_none() && class == FunctionClass::L && grid.len() > 1 {
        let last = grid.len() - 1;
        if values[last] > L_TAIL_FRACTION * values[0] {
            first = Some(violation(last, ClassCondition::DecaysToZero));
        }
    }
    Ok(ClassReport { class, grid: grid.to_vec(), pass: first.is_none(), first_violation: first })
}

/// Solves `f(x) = y` for strictly monotone `f` by doubling the bracket from
/// `[0, 1]` and then bisecting until the bracket width is at most
/// `tol * max(1, |x|)`.
pub fn invert(f: &MonotoneFunction, y: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    invert_until(f, y, |lo, hi, mid| hi - lo <= tol * mid.abs().max(1.0))
}

/// [`invert`] with a purely relative stopping rule, `width ≤ rel·x`, for
/// callers that need small preimages to full relative precision.
pub fn invert_relative(f: &MonotoneFunction, y: f64, rel: f64) -> Result<f64> {
    if !(rel > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    invert_until(f, y, |lo, hi, mid| hi - lo <= rel * mid.abs())
}

fn invert_until(f: &MonotoneFunction, y: f64, done: impl Fn(f64, f64, f64) -> bool) -> Result<f64> {
    if !y.is_finite() {
        return Err(Error::NoPreimage { target: y, reason: "target is not finite" });
    }
    let increasing = match f.class() {
        FunctionClass::L => false,
        FunctionClass::K | FunctionClass::KInfinity | FunctionClass::PositiveDefinite => true,
    };
    // g is increasing in both cases
    let g = |x: f64| -> Result<f64> {
        let v = f.eval(x)?;
        Ok(if increasing { v - y } else { y - v })
    };
    let g0 = g(0.0)?;
    if g0 == 0.0 {
        return Ok(0.0);
    }
    if g0 > 0.0 {
        return Err(Error::NoPreimage {
            target: y,
            reason: if increasing { "target below f(0)" } else { "target above f(0)" },
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    loop {
        let gh = g(hi)?;
        if gh >= 0.0 {
            if gh == 0.0 {
                return Ok(hi);
            }
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Err(Error::NoPreimage {
                target: y,
                reason: "bracket expansion exceeded 1e308",
            });
        }
    }
    for _ in 0..2200 {
        let mid = 0.5 * (lo + hi);
        if done(lo, hi, mid) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let gm = g(mid)?;
        if gm == 0.0 {
            return Ok(mid);
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const INV_GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of `f` on `[a, b]`; returns
/// `(argmax, max)`.
pub(crate) fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, iters: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut c = b - INV_GOLDEN * (b - a);
    let mut d = a + INV_GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_GOLDEN * (b - a);
            fd = f(d)?;
        }
        if b - a <= f64::EPSILON * b.abs().max(1.0) {
            break;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// `max_{0 ≤ r ≤ s} f(r)` from a uniform grid of `density + 1` points,
/// refined by golden-section search around the best grid point.
pub fn max_envelope(f: &MonotoneFunction, s: f64, density: usize) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(invalid("envelope bound must be finite and nonnegative"));
    }
    if s == 0.0 {
        return f.eval(0.0);
    }
    let density = density.max(1);
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..=density {
        let r = if i == density { s } else { s * i as f64 / density as f64 };
        let v = f.eval(r)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let mut result = best.1;
    let h = s / density as f64;
    let lo = (best.0 as f64 - 1.0).max(0.0) * h;
    let hi = ((best.0 as f64 + 1.0) * h).min(s);
    if hi > lo {
        let (_, v) = golden_max(|r| f.eval(r), lo, hi, 80)?;
        result = result.max(v);
    }
    Ok(result.max(f.eval(s)?).max(f.eval(0.0)?))
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use proptest::prelude::*;

    fn mf(text: &str, class: FunctionClass) -> MonotoneFunction {
        MonotoneFunction::parse(text, class).unwrap()
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 1e-9);
        assert_eq!(g[200], 1e6);
    }

    #[test]
    fn verify_class_examples() {
        let id = mf("r", FunctionClass::KInfinity);
        assert!(verify_class(&id, &linear_grid(0.0, 100.0, 101)).unwrap().pass);

        let decay = mf("exp(-r)", FunctionClass::L);
        assert!(verify_class(&decay, &default_grid()).unwrap().pass);

        let hump = mf("r*(2-r)", FunctionClass::K);
        let grid = linear_grid(0.0, 3.0, 31);
        let rep = verify_class(&hump, &grid).unwrap();
        assert!(!rep.pass);
        let v = rep.first_violation.unwrap();
        assert_eq!(v.condition, ClassCondition::StrictlyIncreasing);
        // grid step 0.1: f(1.0) = 1 is the peak, f(1.1) = 0.99 the first decrease
        assert_eq!(v.index, 11);
        assert!(v.r > 1.0);
    }

    #[test]
    fn verify_class_catches_nonzero_at_origin_and_flat_l() {
        let shifted = mf("r + 1", FunctionClass::K);
        let rep = verify_class(&shifted, &default_grid()).unwrap();
        assert_eq!(rep.first_violation.unwrap().condition, ClassCondition::ZeroAtZero);

        let flat = mf("1/(1 + r) + 1", FunctionClass::L);
        let rep = verify_class(&flat, &default_grid()).unwrap();
        assert_eq!(rep.first_violation.unwrap().condition, ClassCondition::DecaysToZero);
    }

    #[test]
    fn verify_class_rejects_bad_grids_and_domain_errors() {
        let id = mf("r", FunctionClass::K);
        assert!(verify_class(&id, &[]).is_err());
        assert!(verify_class(&id, &[1.0, 0.5]).is_err());
        let log = mf("ln(r)", FunctionClass::K);
        let err = verify_class(&log, &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::EvaluationAt { point, .. } if point == 0.0), "{err}");
    }

    #[test]
    fn invert_examples() {
        let cube = mf("r^3", FunctionClass::KInfinity);
        assert!((invert(&cube, 8.0, 1e-10).unwrap() - 2.0).abs() <= 1e-10);
        let id = mf("r", FunctionClass::KInfinity);
        assert!((invert(&id, 0.37, 1e-10).unwrap() - 0.37).abs() <= 1e-10);
        assert_eq!(invert(&id, 0.0, 1e-10).unwrap(), 0.0);

        let f = mf("r + r^3", FunctionClass::KInfinity);
        let x = invert(&f, 10.0, 1e-12).unwrap();
        // substitution oracle
        assert!((x + x * x * x - 10.0).abs() <= 1e-10, "{x}");
    }

    #[test]
    fn invert_errors() {
        let f = mf("r + 1", FunctionClass::K);
        assert!(matches!(invert(&f, 0.5, 1e-10), Err(Error::NoPreimage { .. })));
        let bounded = mf("r/(1 + r)", FunctionClass::K);
        assert!(matches!(invert(&bounded, 2.0, 1e-10), Err(Error::NoPreimage { .. })));
    }

    #[test]
    fn invert_decreasing() {
        let g = mf("exp(-r)", FunctionClass::L);
        let x = invert(&g, libm::exp(-3.0), 1e-12).unwrap();
        assert!((x - 3.0).abs() < 1e-10);
    }

    #[test]
    fn max_envelope_examples() {
        let hump = mf("r*(2-r)", FunctionClass::PositiveDefinite);
        assert!((max_envelope(&hump, 2.0, 512).unwrap() - 1.0).abs() < 1e-12);
        let inc = mf("r + 2*r^3", FunctionClass::K);
        assert_eq!(max_envelope(&inc, 0.5, 512).unwrap(), 0.75);
        // odd density so the peak is not a grid point
        let off = mf("r*(2.1-r)", FunctionClass::PositiveDefinite);
        let m = max_envelope(&off, 3.0, 7).unwrap();
        assert!((m - 1.1025).abs() < 1e-12, "{m}");
    }

    proptest! {
        #[test]
        fn invert_apply_identity(x in 1e-6..1e3f64) {
            for text in ["r", "r^3", "r + r^3", "exp(r/100) - 1", "r^(1/3)"] {
                let f = mf(text, FunctionClass::KInfinity);
                let y = f.eval(x).unwrap();
                let back = invert(&f, y, DEFAULT_INVERT_TOL).unwrap();
                prop_assert!((back - x).abs() <= 1e-8 * x.max(1.0), "{} {} {}", text, x, back);
            }
        }

        #[test]
        fn max_envelope_monotone(s1 in 0.0..4.0f64, ds in 0.0..2.0f64) {
            let f = mf("r*(2-r) + 0.1*sin(5*r)", FunctionClass::PositiveDefinite);
            let a = max_envelope(&f, s1, DEFAULT_ENVELOPE_DENSITY).unwrap();
            let b = max_envelope(&f, s1 + ds, DEFAULT_ENVELOPE_DENSITY).unwrap();
            prop_assert!(b >= a - 1e-12);
        }

        #[test]
        fn kinf_pass_implies_invertible(scale in 0.1..10.0f64, p in 0.3..4.0f64) {
            let f = MonotoneFunction::parse(&alloc::format!("{scale}*r^{p}"), FunctionClass::KInfinity).unwrap();
            let grid = log_grid(1e-6, 1e3, 40);
            prop_assume!(verify_class(&f, &grid).unwrap().pass);
            for &x in &grid {
                prop_assert!(invert(&f, f.eval(x).unwrap(), DEFAULT_INVERT_TOL).is_ok());
            }
        }
    }
}
