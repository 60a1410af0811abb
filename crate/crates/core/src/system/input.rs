use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Right-continuous piecewise-constant input with left limits.
///
/// Interval `i` is `[starts[i], starts[i + 1])`; the last interval extends
/// to infinity. Before `starts[0]` the first value is used.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSignal {
    starts: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl InputSignal {
    pub fn new(starts: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if starts.is_empty() || starts.len() != values.len() {
            return Err(invalid("input needs one value per interval and at least one interval"));
        }
        if starts.iter().any(|t| !t.is_finite()) || starts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("input breakpoints must be finite and strictly increasing"));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m || v.iter().any(|x| !x.is_finite())) {
            return Err(invalid("input values must be finite vectors of equal dimension"));
        }
        Ok(InputSignal { starts, values })
    }

    pub fn constant(t0: f64, value: Vec<f64>) -> Self {
        InputSignal { starts: alloc::vec![t0], values: alloc::vec![value] }
    }

    pub fn zero(t0: f64, m: usize) -> Self {
        Self::constant(t0, alloc::vec![0.0; m])
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Interior breakpoints (every interval start after the first).
    pub fn breakpoints(&self) -> &[f64] {
        &self.starts[1..]
    }

    /// Index of the interval containing `t` (closed on the left).
    pub fn interval_at(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// `u(t)`.
    pub fn at(&self, t: f64) -> &[f64] {
        &self.values[self.interval_at(t)]
    }

    /// `u⁻(t) = lim_{s→t−} u(s)`.
    pub fn left_limit(&self, t: f64) -> &[f64] {
        let i = self.starts.partition_point(|&s| s < t).saturating_sub(1);
        &self.values[i]
    }

    /// `‖u‖∞`: the largest Euclidean norm over the interval values.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};

    #[test]
    fn sup_norm_examples() {
        assert_eq!(InputSignal::constant(0.0, vec![0.3]).sup_norm(), 0.3);
        let u = InputSignal::new(vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, -2.0]]).unwrap();
        assert_eq!(u.sup_norm(), 2.0);
    }

    #[test]
    fn right_continuity_and_left_limits() {
        let u = InputSignal::new(vec![0.0, 1.0, 2.0], vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(u.at(0.5), [1.0]);
        assert_eq!(u.at(1.0), [2.0]);
        assert_eq!(u.left_limit(1.0), [1.0]);
        assert_eq!(u.left_limit(1.5), [2.0]);
        assert_eq!(u.at(7.0), [3.0]);
        assert_eq!(u.left_limit(2.0), [2.0]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(InputSignal::new(vec![], vec![]).is_err());
        assert!(InputSignal::new(vec![0.0, 0.0], vec![vec![1.0], vec![1.0]]).is_err());
        assert!(InputSignal::new(vec![0.0, 1.0], vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    /// Dense sampling oracle over 100 random signals.
    #[test]
    fn sup_norm_matches_dense_sampling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let k = rng.gen_range(1..8);
            let mut t = 0.0;
            let mut starts = vec![];
            let mut values = vec![];
            for _ in 0..k {
                starts.push(t);
                values.push(vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
                t += rng.gen_range(0.1..2.0);
            }
            let u = InputSignal::new(starts, values).unwrap();
            let dense = (0..=20_000)
                .map(|i| norm(u.at(t * i as f64 / 20_000.0)))
                .fold(0.0, f64::max);
            assert_eq!(u.sup_norm(), dense);
        }
    }
}
