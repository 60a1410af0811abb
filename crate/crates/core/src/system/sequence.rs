use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Strictly increasing, finite list of impulse times after an origin `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSequence {
    t0: f64,
    times: Vec<f64>,
}

impl ImpulseSequence {
    pub fn new(t0: f64, times: Vec<f64>) -> Result<Self> {
        if !t0.is_finite() {
            return Err(invalid("origin must be finite"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(invalid("impulse times must be finite"));
        }
        if let Some(&first) = times.first() {
            if first <= t0 {
                return Err(invalid("first impulse must come after the origin"));
            }
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("impulse times must be strictly increasing"));
        }
        Ok(ImpulseSequence { t0, times })
    }

    pub fn empty(t0: f64) -> Self {
        ImpulseSequence { t0, times: Vec::new() }
    }

    pub fn origin(&self) -> f64 {
        self.t0
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Smallest gap between consecutive impulses (`None` with fewer than two).
    pub fn min_gap(&self) -> Option<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
    }

    /// Membership in S_θ: consecutive impulses at least `theta` apart.
    pub fn has_min_dwell(&self, theta: f64) -> bool {
        self.times
            .windows(2)
            .all(|w| w[1] - w[0] >= theta * (1.0 - 1e-12))
    }

    /// Number of impulse times in the half-open window `(s, t]`.
    pub fn count_impulses(&self, s: f64, t: f64) -> Result<usize> {
        if s > t {
            return Err(invalid("count_impulses requires s <= t"));
        }
        // partition_point gives the number of times <= x
        let upto = |x: f64| self.times.partition_point(|&ti| ti <= x);
        Ok(upto(t) - upto(s))
    }

    /// The sequence with the impulses at the given indices removed.
    pub fn without(&self, drop: &[usize]) -> Self {
        let times = self
            .times
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, &t)| t)
            .collect();
        ImpulseSequence { t0: self.t0, times }
    }
}
