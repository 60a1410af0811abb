//! Comparison functions `β`, `γ` of the ISS estimate
//! `|x(t)| ≤ max{β(|x₀|, t−t₀), γ(‖u‖∞)}` built from a certificate, and a
//! Monte-Carlo check of that estimate on simulated trajectories.
//!
//! FDT construction (`ψ₁`, `ψ₂` from the sandwich, `α̂(v) = max_{s≤v} α(s)`):
//!
//! * `β̃(v, t) = ζ^k(max{v, α̂(v)})`, `k = ⌊t/θ⌋`, `ζ(r) = F⁻¹(F(r) − δ')`,
//!   `δ' = min(δ, θ)`; `β(r, t) = ψ₁⁻¹(β̃(ψ₂(r), t))`. Each elapsed
//!   θ-window costs at least `δ'` in `F`: either a jump together with the
//!   dwell before it (`≥ θ − (θ − δ)`), or pure flow (`≥ θ`). The first
//!   jump may come immediately, which `max{v, α̂(v)}` absorbs.
//! * `α̃(r) = max{α̂(χ(r)), χ(r)}`, `γ(r) = ψ₁⁻¹(α̃(r))`.
//!
//! gADT construction with `h(r) = e^{μ−λr}` (`λ > 0`):
//!
//! * `β(r, t) = ψ₁⁻¹(e^{μ−λt}·ψ₂(r))`;
//! * `γ(r) = ψ₁⁻¹(e^{μ}·max{1, e^{−d}}·χ(r))`.

mod falsify;
mod ftransform;

use alloc::vec::Vec;

pub use falsify::{
    check_iss_bound, draw_trial, run_trial, FalsifyRanges, ISSCheckReport, TrialResult, TrialViolation, RATIO_TOL,
};
pub use ftransform::{FTransform, Preimage};

use crate::comparison::{default_grid, invert_relative, max_envelope, MonotoneFunction, DEFAULT_ENVELOPE_DENSITY};
use crate::dwell::GADTEnvelope;
use crate::error::{invalid, Result};
use crate::lyapunov::ISSLyapunovCandidate;

/// Strictly increasing perturbation `εr` added to a degenerate `γ`.
pub const GAMMA_EPSILON: f64 = 1e-12;
/// Base point of the F-transform.
pub const F_BASE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    FixedDwellTime { theta: f64, delta: f64 },
    GeneralizedAverage { c: f64, d: f64, envelope: GADTEnvelope },
}

impl Provenance {
    pub fn name(&self) -> &'static str {
        match self {
            Provenance::FixedDwellTime { .. } => "fixed dwell time",
            Provenance::GeneralizedAverage { .. } => "generalized average dwell time",
        }
    }
}

#[derive(Debug, Clone)]
enum BetaForm {
    Staircase { ft: FTransform, alpha: MonotoneFunction, theta: f64, delta: f64 },
    Exponential { mu: f64, lambda: f64 },
}

/// The KL bound `β`.
#[derive(Debug, Clone)]
pub struct Beta {
    psi1: MonotoneFunction,
    psi2: MonotoneFunction,
    form: BetaForm,
    scale: f64,
}

/// `β(r, ·)` for one fixed `r`, ready for many time evaluations.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaProfile {
    /// `β(r, t) = levels[min(⌊t/θ⌋, last)]`, trailing zeros once `ζ`
    /// underflows.
    Staircase { theta: f64, levels: Vec<f64>, underflow: bool },
    /// `β(r, t) = ψ₁⁻¹(e^{μ−λt}·w)`.
    Exponential { w: f64, mu: f64, lambda: f64 },
}

/// Relative precision of `ψ₁⁻¹` inside the bounds; tiny bounds late in a
/// trajectory must keep their relative accuracy.
const INVERT_REL: f64 = 1e-13;

fn inv(f: &MonotoneFunction, y: f64) -> Result<f64> {
    if y <= 0.0 {
        return Ok(0.0);
    }
    if f.is_identity() {
        return Ok(y);
    }
    invert_relative(f, y, INVERT_REL)
}

/// Windows elapsed in `t`, guarding against `kθ/θ` rounding just below `k`.
fn windows(t: f64, theta: f64) -> usize {
    if t <= 0.0 {
        return 0;
    }
    libm::floor(t / theta) as usize
}

impl Beta {
    /// `β̃(v, t)`: the bound on `V` along trajectories starting at level `v`.
    pub fn level(&self, v: f64, t: f64) -> Result<f64> {
        match &self.form {
            BetaForm::Staircase { ft, alpha, theta, delta } => {
                if v <= 0.0 {
                    return Ok(0.0);
                }
                let mut y = v.max(max_envelope(alpha, v, DEFAULT_ENVELOPE_DENSITY)?);
                for _ in 0..windows(t, *theta) {
                    let z = ft.zeta(*delta, y)?;
                    if z.underflow {
                        return Ok(0.0);
                    }
                    y = z.value;
                }
                Ok(y)
            }
            BetaForm::Exponential { mu, lambda } => Ok(libm::exp(mu - lambda * t) * v),
        }
    }

    /// `β(r, t)`.
    pub fn eval(&self, r: f64, t: f64) -> Result<f64> {
        let v = self.psi2.eval(r)?;
        Ok(self.scale * inv(&self.psi1, self.level(v, t)?)?)
    }

    /// Precomputes `β(r, ·)` on `[0, horizon]`.
    pub fn profile(&self, r: f64, horizon: f64) -> Result<BetaProfile> {
        let v = self.psi2.eval(r)?;
        match &self.form {
            BetaForm::Staircase { ft, alpha, theta, delta } => {
                let steps = windows(horizon, *theta) + 1;
                let mut levels = Vec::with_capacity(steps + 1);
                let mut underflow = false;
                let mut y = if v <= 0.0 { 0.0 } else { v.max(max_envelope(alpha, v, DEFAULT_ENVELOPE_DENSITY)?) };
                for k in 0..=steps {
                    levels.push(self.scale * inv(&self.psi1, y)?);
                    if k == steps {
                        break;
                    }
                    if y > 0.0 {
                        let z = ft.zeta(*delta, y)?;
                        underflow |= z.underflow;
                        y = z.value;
                    }
                }
                Ok(BetaProfile::Staircase { theta: *theta, levels, underflow })
            }
            BetaForm::Exponential { mu, lambda } => Ok(BetaProfile::Exponential { w: v, mu: *mu, lambda: *lambda }),
        }
    }

    pub fn eval_profile(&self, p: &BetaProfile, t: f64) -> Result<f64> {
        match p {
            BetaProfile::Staircase { theta, levels, .. } => {
                Ok(levels[windows(t, *theta).min(levels.len() - 1)])
            }
            BetaProfile::Exponential { w, mu, lambda } => {
                Ok(self.scale * inv(&self.psi1, libm::exp(mu - lambda * t) * w)?)
            }
        }
    }

    pub fn psi1(&self) -> &MonotoneFunction {
        &self.psi1
    }

    /// The effective `δ'` of a staircase bound.
    pub fn contraction(&self) -> Option<f64> {
        match &self.form {
            BetaForm::Staircase { delta, .. } => Some(*delta),
            BetaForm::Exponential { .. } => None,
        }
    }
}

impl BetaProfile {
    /// Whether `ζ` ran into the bottom of the range of `F`.
    pub fn underflow(&self) -> bool {
        matches!(self, BetaProfile::Staircase { underflow: true, .. })
    }
}

#[derive(Debug, Clone)]
enum GammaForm {
    /// `α̃(r) = max{α̂(χ(r)), χ(r)}`
    Envelope { alpha: MonotoneFunction },
    /// `α̃(r) = factor·χ(r)`
    Scaled { factor: f64 },
}

/// The gain `γ`.
#[derive(Debug, Clone)]
pub struct Gamma {
    psi1: MonotoneFunction,
    chi: MonotoneFunction,
    form: GammaForm,
    epsilon: f64,
    scale: f64,
}

impl Gamma {
    /// `α̃(r)`: the outer level reached from inputs of size `r`.
    pub fn level(&self, r: f64) -> Result<f64> {
        let c = self.chi.eval(r)?;
        match &self.form {
            GammaForm::Envelope { alpha } => {
                let env = if c > 0.0 { max_envelope(alpha, c, DEFAULT_ENVELOPE_DENSITY)? } else { alpha.eval(0.0)?.max(0.0) };
                Ok(env.max(c))
            }
            GammaForm::Scaled { factor } => Ok(factor * c),
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        Ok(self.scale * (inv(&self.psi1, self.level(r)?)? + self.epsilon * r))
    }

    /// Whether the `εr` perturbation was needed.
    pub fn perturbed(&self) -> bool {
        self.epsilon > 0.0
    }

    /// Adds `εr` when `γ` vanishes or stalls somewhere on the default grid.
    fn audited(mut self) -> Result<Self> {
        let grid = default_grid();
        let mut prev = self.eval(0.0)?;
        for &r in &grid[1..] {
            let v = self.eval(r)?;
            if !(v > 0.0) || !(v > prev) {
                // only degenerate flat stretches call for the perturbation
                if v >= prev {
                    self.epsilon = GAMMA_EPSILON;
                    break;
                }
                return Err(invalid("constructed gain decreases; check chi and alpha"));
            }
            prev = v;
        }
        Ok(self)
    }
}

/// `β`, `γ` and the levels delimiting the inner and outer sublevel sets.
#[derive(Debug, Clone)]
pub struct BetaGamma {
    pub beta: Beta,
    pub gamma: Gamma,
    pub provenance: Provenance,
}

impl BetaGamma {
    /// `χ(‖u‖∞)`: the inner set `V ≤ χ(‖u‖∞)`.
    pub fn inner_threshold(&self, u_norm: f64) -> Result<f64> {
        self.gamma.chi.eval(u_norm)
    }

    /// Level of the outer set: `α̃(‖u‖∞)` (FDT) or
    /// `e^{μ}·max{1, e^{−d}}·χ(‖u‖∞)` (gADT).
    pub fn outer_threshold(&self, u_norm: f64) -> Result<f64> {
        self.gamma.level(u_norm)
    }

    /// `max{β(r, t), γ(u)}`.
    pub fn bound(&self, r: f64, t: f64, u_norm: f64) -> Result<f64> {
        Ok(self.beta.eval(r, t)?.max(self.gamma.eval(u_norm)?))
    }

    /// Both functions multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.beta.scale *= factor;
        s.gamma.scale *= factor;
        s
    }
}

fn general_parts(cand: &ISSLyapunovCandidate) -> Result<(MonotoneFunction, MonotoneFunction)> {
    Ok((cand.phi_function()?, cand.alpha_function()?))
}

/// The staircase `β` of the FDT construction.
pub fn build_beta_fdt(cand: &ISSLyapunovCandidate, theta: f64, delta: f64) -> Result<Beta> {
    if !(theta > 0.0 && delta > 0.0) {
        return Err(invalid("theta and delta must be positive"));
    }
    let (phi, alpha) = general_parts(cand)?;
    Ok(Beta {
        psi1: cand.psi1().clone(),
        psi2: cand.psi2().clone(),
        form: BetaForm::Staircase { ft: FTransform::new(phi, F_BASE)?, alpha, theta, delta: delta.min(theta) },
        scale: 1.0,
    })
}

/// `γ = ψ₁⁻¹ ∘ α̃`.
pub fn build_gamma_fdt(cand: &ISSLyapunovCandidate) -> Result<Gamma> {
    let (_, alpha) = general_parts(cand)?;
    Gamma {
        psi1: cand.psi1().clone(),
        chi: cand.chi().clone(),
        form: GammaForm::Envelope { alpha },
        epsilon: 0.0,
        scale: 1.0,
    }
    .audited()
}

pub fn build_fdt(cand: &ISSLyapunovCandidate, theta: f64, delta: f64) -> Result<BetaGamma> {
    Ok(BetaGamma {
        beta: build_beta_fdt(cand, theta, delta)?,
        gamma: build_gamma_fdt(cand)?,
        provenance: Provenance::FixedDwellTime { theta, delta },
    })
}

/// The gADT construction; needs an exponential certificate with `d ≠ 0` and
/// `λ > 0`.
pub fn build_beta_gamma_gadt(cand: &ISSLyapunovCandidate, env: GADTEnvelope) -> Result<BetaGamma> {
    let (c, d) = cand.exponential_rates()?;
    if d == 0.0 {
        return Err(invalid("gADT construction needs d != 0"));
    }
    if !(env.lambda > 0.0) {
        return Err(invalid("lambda = 0 gives no class-L bound on h; the gADT construction needs lambda > 0"));
    }
    let beta = Beta {
        psi1: cand.psi1().clone(),
        psi2: cand.psi2().clone(),
        form: BetaForm::Exponential { mu: env.mu, lambda: env.lambda },
        scale: 1.0,
    };
    let factor = env.sup() * libm::exp(-d).max(1.0);
    let gamma = Gamma {
        psi1: cand.psi1().clone(),
        chi: cand.chi().clone(),
        form: GammaForm::Scaled { factor },
        epsilon: 0.0,
        scale: 1.0,
    }
    .audited()?;
    Ok(BetaGamma { beta, gamma, provenance: Provenance::GeneralizedAverage { c, d, envelope: env } })
}

#[cfg(test)]
mod tests;
