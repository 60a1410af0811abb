use alloc::vec::Vec;

use crate::comparison::MonotoneFunction;
use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussLegendre;

/// Width of one tabulation cell in `x = ln(q / base)`.
const CELL: f64 = 0.25;
const NODES: usize = 20;
/// Tabulation stops at `|x| = XMAX` (about 300 decades each way).
const XMAX: f64 = 690.0;

/// Value of `F⁻¹`, or zero when the target lies below the range of `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preimage {
    pub value: f64,
    /// The target was below every attainable `F(q)`: the bound has reached
    /// zero (possible when `∫₀ ds/φ` converges).
    pub underflow: bool,
}

/// `F(q) = ∫_base^q ds/φ(s)`.
///
/// `F` is tabulated once on cells of width 0.25 in `x = ln(q/base)`, each
/// integrated by a 20-point Gauss–Legendre rule; partial cells use the same
/// rule, so `F` and `F⁻¹` are evaluated from one consistent smooth
/// approximation. This is what lets `F⁻¹(F(q))` reproduce `q` where `F` is
/// nearly flat.
#[derive(Debug, Clone)]
pub struct FTransform {
    phi: MonotoneFunction,
    base: f64,
    rule: GaussLegendre,
    /// Cell boundaries `x_k = k·CELL` for `k = -neg..=pos` and the
    /// corresponding values of `F`, ascending.
    first_cell: i64,
    values: Vec<f64>,
}

impl FTransform {
    pub fn new(phi: MonotoneFunction, base: f64) -> Result<Self> {
        if !(base > 0.0) || !base.is_finite() {
            return Err(invalid("F base point must be positive"));
        }
        let rule = GaussLegendre::new(NODES);
        let mut ft = FTransform { phi, base, rule, first_cell: 0, values: Vec::new() };
        let limit = (XMAX / CELL) as i64;
        let mut up = alloc::vec![0.0];
        for k in 0..limit {
            match ft.cell(k as f64 * CELL, (k + 1) as f64 * CELL) {
                Ok(v) => up.push(up[up.len() - 1] + v),
                Err(_) => break,
            }
        }
        let mut down = Vec::new();
        let mut acc = 0.0;
        for k in 0..limit {
            match ft.cell(-((k + 1) as f64) * CELL, -(k as f64) * CELL) {
                Ok(v) => {
                    acc -= v;
                    down.push(acc);
                }
                Err(_) => break,
            }
        }
        if up.len() == 1 && down.is_empty() {
            return Err(Error::Quadrature { at: base, reason: "decay rate is not positive near the base point" });
        }
        ft.first_cell = -(down.len() as i64);
        down.reverse();
        down.extend(up);
        ft.values = down;
        Ok(ft)
    }

    /// `∫ ds/φ` over `s = base·e^x`, `x ∈ [x0, x1]`.
    fn cell(&self, x0: f64, x1: f64) -> Result<f64> {
        self.rule.integrate(
            |x| {
                let s = self.base * libm::exp(x);
                let p = self.phi.eval(s)?;
                if !(p > 0.0) || !s.is_finite() || s == 0.0 {
                    return Err(Error::Quadrature { at: s, reason: "decay rate is not positive" });
                }
                Ok(s / p)
            },
            x0,
            x1,
        )
    }

    pub fn phi(&self) -> &MonotoneFunction {
        &self.phi
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    fn x_range(&self) -> (f64, f64) {
        let lo = self.first_cell as f64 * CELL;
        (lo, lo + (self.values.len() - 1) as f64 * CELL)
    }

    /// `F` at `x = ln(q/base)` inside the table.
    fn at_x(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.x_range();
        if x < lo || x > hi {
            return Err(invalid("argument outside the tabulated range of F"));
        }
        let i = (((x - lo) / CELL) as usize).min(self.values.len() - 2);
        let x0 = lo + i as f64 * CELL;
        if x == x0 {
            return Ok(self.values[i]);
        }
        Ok(self.values[i] + self.cell(x0, x)?)
    }

    /// `F(q)`; exactly zero at the base point.
    pub fn f_value(&self, q: f64) -> Result<f64> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(invalid("F needs q > 0"));
        }
        if q == self.base {
            return Ok(0.0);
        }
        self.at_x(libm::log(q / self.base))
    }

    /// Attainable range `[F(q_min), F(q_max)]` of the table.
    pub fn range(&self) -> (f64, f64) {
        (self.values[0], self.values[self.values.len() - 1])
    }

    /// `q` with `F(q) = v`, found by locating the cell and bisecting in
    /// `ln q` to full precision.
    pub fn f_inverse(&self, v: f64) -> Result<Preimage> {
        if v.is_nan() {
            return Err(invalid("F inverse of NaN"));
        }
        let (fmin, fmax) = self.range();
        if v < fmin {
            return Ok(Preimage { value: 0.0, underflow: true });
        }
        if v > fmax {
            return Err(Error::NoPreimage { target: v, reason: "above the range of F (1/phi integrable at infinity)" });
        }
        if v == 0.0 {
            return Ok(Preimage { value: self.base, underflow: false });
        }
        let (lo_x, _) = self.x_range();
        // first boundary with F ≥ v
        let j = self.values.partition_point(|&f| f < v);
        if self.values[j] == v {
            let x = lo_x + j as f64 * CELL;
            return Ok(Preimage { value: self.base * libm::exp(x), underflow: false });
        }
        let i = j - 1;
        let x0 = lo_x + i as f64 * CELL;
        let (mut a, mut b) = (x0, x0 + CELL);
        loop {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let f = self.values[i] + self.cell(x0, m)?;
            if f < v {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(Preimage { value: self.base * libm::exp(0.5 * (a + b)), underflow: false })
    }

    /// `ζ(r) = F⁻¹(F(r) − δ)`.
    pub fn zeta(&self, delta: f64, r: f64) -> Result<Preimage> {
        if !(delta > 0.0) {
            return Err(invalid("zeta needs delta > 0"));
        }
        if r == 0.0 || (r > 0.0 && libm::log(r / self.base) < self.x_range().0) {
            return Ok(Preimage { value: 0.0, underflow: true });
        }
        self.f_inverse(self.f_value(r)? - delta)
    }
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::comparison::FunctionClass::PositiveDefinite;
    use rand::{Rng, SeedableRng};

    fn ft(phi: &str, base: f64) -> FTransform {
        FTransform::new(MonotoneFunction::parse(phi, PositiveDefinite).unwrap(), base).unwrap()
    }

    #[test]
    fn closed_forms() {
        let lin = ft("s", 1.0);
        let cub = ft("s^3", 1.0);
        assert_eq!(lin.f_value(1.0).unwrap(), 0.0);
        for q in [1e-6, 0.3, 1.0, 2.0, 77.0, 1e6] {
            assert!((lin.f_value(q).unwrap() - libm::log(q)).abs() <= 1e-9, "{q}");
            let exact = 0.5 * (1.0 - 1.0 / (q * q));
            assert!((cub.f_value(q).unwrap() - exact).abs() <= 1e-9 * exact.abs().max(1.0), "{q}");
        }
        assert!((lin.f_inverse(libm::log(5.0)).unwrap().value - 5.0).abs() < 1e-8);
        assert!(lin.f_value(0.0).is_err());
    }

    #[test]
    fn bounded_range_errors_and_underflows() {
        let sq = ft("s^2", 1.0);
        assert!(matches!(sq.f_inverse(2.0), Err(Error::NoPreimage { .. })));
        let p = sq.f_inverse(-1e300).unwrap();
        assert!(p.underflow && p.value == 0.0);
    }

    #[test]
    fn round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for phi in ["s", "s^3", "(2/3)*s^3", "s + s^3"] {
            let f = ft(phi, 1.0);
            for _ in 0..100 {
                let q = libm::exp(rng.gen_range(libm::log(1e-4)..libm::log(1e4)));
                let back = f.f_inverse(f.f_value(q).unwrap()).unwrap().value;
                assert!((back - q).abs() <= 1e-7 * q, "{phi} {q} {back}");
            }
        }
    }

    #[test]
    fn zeta_contracts() {
        let lin = ft("s", 1.0);
        for r in [1e-3, 1.0, 40.0] {
            let z = lin.zeta(core::f64::consts::LN_2, r).unwrap().value;
            assert!((z - r / 2.0).abs() <= 1e-12 * r);
        }
        let f = ft("(2/3)*s^3", 1.0);
        let mut r = 10.0;
        let mut k = 0;
        while r >= 0.1 {
            let z = f.zeta(0.2, r).unwrap();
            assert!(z.value < r);
            // closed form: F(q) = 0.75 (1 - q^-2)
            let expect = 1.0 / libm::sqrt(1.0 / (r * r) + 0.2 / 0.75);
            assert!((z.value - expect).abs() <= 1e-9 * expect);
            r = z.value;
            k += 1;
        }
        assert!(k <= 400, "{k}");
    }

    #[test]
    fn base_invariance() {
        let a = ft("s + s^3", 1.0);
        let b = ft("s + s^3", 3.7);
        for r in [1e-3, 0.5, 2.0, 100.0] {
            let (za, zb) = (a.zeta(0.3, r).unwrap().value, b.zeta(0.3, r).unwrap().value);
            assert!((za - zb).abs() <= 1e-9 * za.max(1e-300), "{r}: {za} {zb}");
        }
    }
}
