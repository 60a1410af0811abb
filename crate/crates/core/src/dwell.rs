//! Dwell-time conditions.
//!
//! *Fixed dwell time* (FDT): impulses are at least `θ` apart and
//! `∫_a^{α(a)} ds/φ(s) ≤ θ − δ` for all `a > 0`; the supremum over `a` is
//! audited on a logarithmic grid.
//!
//! *Generalized average dwell time* (gADT):
//! `−d·N(t,s) − c·(t−s) ≤ ln h(t−s)` for all `t ≥ s ≥ t₀`, with
//! `h(r) = e^{μ−λr}`. Writing `k = N(t,s)` and `r = t − s`, the condition
//! reads `−d·k − μ + (λ − c)·r ≤ 0`, which is affine in `r` for fixed `k`.
//! Every window containing the impulses `t_i..t_j` (and no others) has
//! `r` ranging between `t_j − t_i` (with `s ↑ t_i`, `t = t_j`) and
//! `t_{j+1} − t_{i−1}` (with `t₀` and the horizon standing in for the
//! missing neighbours), so checking both ends of that range for every index
//! pair is exact. Jump-free windows have `r ∈ (0, G]` with `G` the longest
//! impulse-free stretch; their two ends are checked, plus `gap_grid`
//! intermediate durations as a numerical cross-check.

use alloc::vec::Vec;

use rand::Rng;

use crate::comparison::{golden_max, log_grid, MonotoneFunction};
use crate::error::{invalid, Error, Result};
use crate::quadrature::reciprocal_integral;
use crate::random;
use crate::system::ImpulseSequence;

/// Slack of the gADT inequality.
pub const GADT_TOL: f64 = 1e-12;
/// Grid points with `|α(a) − a| < 1e-10·a` carry fewer than ~6 significant
/// digits of the interval length and are left out of the supremum.
pub const RESOLUTION_LIMIT: f64 = 1e-10;
const EDGE_CLOSENESS: f64 = 1e-5;
pub const DEFAULT_FDT_GRID: (f64, f64, usize) = (1e-8, 1e8, 400);
pub const DEFAULT_GAP_GRID: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FDTParams {
    pub theta: f64,
    pub delta: f64,
}

impl FDTParams {
    pub fn new(theta: f64, delta: f64) -> Result<Self> {
        if !(theta > 0.0 && delta > 0.0) || !theta.is_finite() || !delta.is_finite() {
            return Err(invalid("theta and delta must be positive"));
        }
        Ok(FDTParams { theta, delta })
    }
}

/// `h(r) = e^{μ − λr}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GADTEnvelope {
    pub mu: f64,
    pub lambda: f64,
}

impl GADTEnvelope {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !mu.is_finite() || !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(invalid("envelope needs finite mu and lambda >= 0"));
        }
        Ok(GADTEnvelope { mu, lambda })
    }

    /// `λ = 0`: constant `h`, which no class-L function bounds.
    pub fn is_constant(&self) -> bool {
        self.lambda == 0.0
    }

    pub fn ln_h(&self, r: f64) -> f64 {
        self.mu - self.lambda * r
    }

    /// `sup_{r ≥ 0} h(r)`.
    pub fn sup(&self) -> f64 {
        libm::exp(self.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DwellCondition {
    Fdt(FDTParams),
    Gadt { c: f64, d: f64, envelope: GADTEnvelope },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Witness {
    /// FDT: the argument `a` attaining the largest integral.
    Argument(f64),
    /// gADT: the window containing impulses `i..=j` (0-based) of duration `r`.
    Window { i: usize, j: usize, jumps: usize, duration: f64 },
    /// gADT: an impulse-free window of duration `r`.
    JumpFree { duration: f64 },
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwellTimeReport {
    pub condition: DwellCondition,
    /// Signed worst slack; the check passes iff it is nonnegative.
    pub margin: f64,
    pub witness: Witness,
    pub pass: bool,
    /// FDT only: the audited supremum of the integral.
    pub supremum: Option<f64>,
    /// FDT only: the supremum sits at the first or last usable grid point,
    /// so the true supremum may lie beyond the grid.
    pub edge_supremum: bool,
    /// FDT only: grid points dropped for insufficient resolution.
    pub resolution_excluded: usize,
    /// gADT only: `λ = 0`, outside the theorem's hypotheses.
    pub constant_h: bool,
    pub windows_checked: usize,
}

/// `∫_a^{α(a)} ds/φ(s)`, negative when `α(a) < a`.
pub fn fdt_integral(phi: &MonotoneFunction, alpha: &MonotoneFunction, a: f64, tol: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid("fdt integral needs a > 0"));
    }
    let b = alpha.eval(a)?;
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Quadrature { at: a, reason: "jump envelope alpha(a) is not positive" });
    }
    reciprocal_integral(|s| phi.eval(s), a, b, tol)
}

/// Audits `sup_a ∫_a^{α(a)} ds/φ ≤ θ − δ` on `grid` (sorted, positive),
/// refining the best grid point by golden-section search in `ln a`.
pub fn fdt_margin(
    phi: &MonotoneFunction,
    alpha: &MonotoneFunction,
    params: FDTParams,
    grid: &[f64],
    tol: f64,
) -> Result<DwellTimeReport> {
    if grid.is_empty() || grid.iter().any(|a| !(*a > 0.0)) {
        return Err(invalid("fdt grid must be nonempty and positive"));
    }
    // None marks points that do not count: either resolution-limited or
    // α(a) ≤ 0 (the jump resets to zero, which never hurts the condition).
    let value = |a: f64| -> Result<Option<f64>> {
        let b = alpha.eval(a)?;
        if b <= 0.0 {
            return Ok(None);
        }
        let gap = (b - a).abs();
        if gap > 0.0 && gap < RESOLUTION_LIMIT * a {
            return Ok(None);
        }
        fdt_integral(phi, alpha, a, tol).map(Some)
    };
    let mut values = Vec::with_capacity(grid.len());
    let mut excluded = 0;
    for &a in grid {
        let v = value(a).map_err(|e| Error::EvaluationAt { point: a, source: e.into() })?;
        if v.is_none() && alpha.eval(a)? > 0.0 {
            excluded += 1;
        }
        values.push(v);
    }
    let usable: Vec<usize> = (0..grid.len()).filter(|&i| values[i].is_some()).collect();
    let condition = DwellCondition::Fdt(params);
    let budget = params.theta - params.delta;
    let Some(&best) = usable.iter().max_by(|&&i, &&j| {
        values[i].unwrap().partial_cmp(&values[j].unwrap()).unwrap_or(core::cmp::Ordering::Equal)
    }) else {
        // nothing measurable: every jump maps to zero
        return Ok(DwellTimeReport {
            condition,
            margin: budget,
            witness: Witness::None,
            pass: budget >= 0.0,
            supremum: None,
            edge_supremum: false,
            resolution_excluded: excluded,
            constant_h: false,
            windows_checked: 0,
        });
    };
    let (mut arg, mut sup) = (grid[best], values[best].unwrap());
    let pos = usable.iter().position(|&i| i == best).unwrap();
    let lo = usable[pos.saturating_sub(1)];
    let hi = usable[(pos + 1).min(usable.len() - 1)];
    if hi > lo {
        let refined = golden_max(
            |x| Ok(value(libm::exp(x))?.unwrap_or(f64::NEG_INFINITY)),
            libm::log(grid[lo]),
            libm::log(grid[hi]),
            60,
        );
        if let Ok((x, v)) = refined {
            if v > sup {
                sup = v;
                arg = libm::exp(x);
            }
        }
    }
    // an edge value within rounding noise of the supremum counts as an edge
    // supremum too: the integral is still climbing (or flat) toward the edge
    let near = |i: usize| (values[i].unwrap() - sup).abs() <= EDGE_CLOSENESS * sup.abs().max(1.0);
    let edge = pos == 0 || pos + 1 == usable.len() || near(usable[0]) || near(usable[usable.len() - 1]);
    let margin = budget - sup;
    Ok(DwellTimeReport {
        condition,
        margin,
        witness: Witness::Argument(arg),
        pass: margin >= 0.0,
        supremum: Some(sup),
        edge_supremum: edge,
        resolution_excluded: excluded,
        constant_h: false,
        windows_checked: usable.len(),
    })
}

/// 400 log-spaced points on `[1e-8, 1e8]`.
pub fn default_fdt_grid() -> Vec<f64> {
    let (lo, hi, n) = DEFAULT_FDT_GRID;
    log_grid(lo, hi, n)
}

/// Exact finite reduction of the gADT condition on `[t₀, horizon]`; see
/// the module documentation.
pub fn check_gadt(
    seq: &ImpulseSequence,
    c: f64,
    d: f64,
    env: GADTEnvelope,
    horizon: f64,
    gap_grid: usize,
) -> Result<DwellTimeReport> {
    let t0 = seq.origin();
    let times = seq.times();
    if !(horizon > t0) || times.last().is_some_and(|&t| t > horizon) {
        return Err(invalid("impulse times must lie within (t0, horizon]"));
    }
    if !c.is_finite() || !d.is_finite() {
        return Err(invalid("rate coefficients must be finite"));
    }
    let (mu, lambda) = (env.mu, env.lambda);
    // slack = ln h(r) − (−d k − c r)
    let slack = |k: usize, r: f64| mu - lambda * r + d * k as f64 + c * r;
    let mut worst = (f64::INFINITY, Witness::None);
    let mut checked = 0usize;
    let mut consider = |s: f64, w: Witness| {
        checked += 1;
        if s < worst.0 {
            worst = (s, w);
        }
    };
    let n = times.len();
    for i in 0..n {
        let before = if i == 0 { t0 } else { times[i - 1] };
        for j in i..n {
            let after = if j + 1 == n { horizon } else { times[j + 1] };
            let k = j - i + 1;
            for r in [times[j] - times[i], after - before] {
                consider(slack(k, r), Witness::Window { i, j, jumps: k, duration: r });
            }
        }
    }
    let longest = core::iter::once(t0)
        .chain(times.iter().copied())
        .chain(core::iter::once(horizon))
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    consider(slack(0, 0.0), Witness::JumpFree { duration: 0.0 });
    for q in 1..=gap_grid.max(1) {
        let r = longest * q as f64 / gap_grid.max(1) as f64;
        consider(slack(0, r), Witness::JumpFree { duration: r });
    }
    let margin = worst.0 + GADT_TOL;
    Ok(DwellTimeReport {
        condition: DwellCondition::Gadt { c, d, envelope: env },
        margin,
        witness: worst.1,
        pass: margin >= 0.0,
        supremum: None,
        edge_supremum: false,
        resolution_excluded: 0,
        constant_h: env.is_constant(),
        windows_checked: checked,
    })
}

/// `τ* = −d/(c − λ)`: periodic sequences with period at least `τ*` satisfy
/// the gADT condition with `μ = −d` and decay `λ`.
pub fn min_period_gadt(c: f64, d: f64, lambda: f64) -> Result<f64> {
    if !(d < 0.0) || !(lambda >= 0.0) || !(c > lambda) {
        return Err(invalid("min period needs d < 0 and c > lambda >= 0"));
    }
    Ok(-d / (c - lambda))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceKind {
    Periodic { tau: f64 },
    /// Gaps `θ + U[0, extra_max]`.
    Jittered { theta: f64, extra_max: f64 },
    /// Exponential gaps with the given rate, clipped below by `min_gap`.
    Poisson { rate: f64, min_gap: f64 },
}

impl SequenceKind {
    /// Smallest gap the generator can produce.
    pub fn min_gap(&self) -> f64 {
        match *self {
            SequenceKind::Periodic { tau } => tau,
            SequenceKind::Jittered { theta, .. } => theta,
            SequenceKind::Poisson { min_gap, .. } => min_gap,
        }
    }
}

/// Times within `(t0, horizon]`; deterministic given `seed`.
pub fn generate_sequence(kind: SequenceKind, t0: f64, horizon: f64, seed: u64) -> Result<ImpulseSequence> {
    if !(horizon > t0) || !t0.is_finite() || !horizon.is_finite() {
        return Err(invalid("horizon must exceed t0"));
    }
    let ok = match kind {
        SequenceKind::Periodic { tau } => tau > 0.0 && tau.is_finite(),
        SequenceKind::Jittered { theta, extra_max } => theta > 0.0 && extra_max >= 0.0 && extra_max.is_finite(),
        SequenceKind::Poisson { rate, min_gap } => rate > 0.0 && min_gap > 0.0 && rate.is_finite(),
    };
    if !ok {
        return Err(invalid("sequence gap parameters must be positive"));
    }
    // t0 + k·τ can land an ulp past the horizon
    let fit = |t: f64| if t > horizon && t - horizon <= 1e-9 * horizon.abs().max(1.0) { horizon } else { t };
    let mut times = Vec::new();
    match kind {
        SequenceKind::Periodic { tau } => {
            for k in 1.. {
                let t = fit(t0 + k as f64 * tau);
                if t > horizon {
                    break;
                }
                times.push(t);
            }
        }
        SequenceKind::Jittered { theta, extra_max } => {
            let mut rng = random::rng(seed);
            let mut t = t0;
            loop {
                t += theta + extra_max * rng.gen::<f64>();
                if t > horizon {
                    break;
                }
                times.push(t);
            }
        }
        SequenceKind::Poisson { rate, min_gap } => {
            let mut rng = random::rng(seed);
            let mut t = t0;
            loop {
                let u: f64 = rng.gen();
                t += (-libm::log(1.0 - u) / rate).max(min_gap);
                if t > horizon {
                    break;
                }
                times.push(t);
            }
        }
    }
    ImpulseSequence::new(t0, times)
}
