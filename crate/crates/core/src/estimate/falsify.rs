use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::{BetaGamma, Provenance};
use crate::dwell::{check_gadt, generate_sequence, SequenceKind, DEFAULT_GAP_GRID};
use crate::error::{invalid, Error, Result};
use crate::random::{self, derive_seed};
use crate::system::{norm, simulate, ImpulseSequence, ImpulsiveSystem, InputSignal};

/// A trial fails when `|x(t)| / max{β, γ}` exceeds `1 + RATIO_TOL`.
pub const RATIO_TOL: f64 = 1e-6;

/// What the falsifier draws and how it simulates.
#[derive(Debug, Clone, PartialEq)]
pub struct FalsifyRanges {
    pub trials: usize,
    /// `|x₀|` is uniform on `[0, x0_max]`.
    pub x0_max: f64,
    /// Each input piece has norm uniform on `[0, u_max]`.
    pub u_max: f64,
    /// Inputs have between 1 and `input_pieces` constant pieces.
    pub input_pieces: usize,
    /// Every `zero_input_every`-th trial uses `u ≡ 0` (0 disables).
    pub zero_input_every: usize,
    pub t0: f64,
    pub horizon: f64,
    pub step: f64,
    /// Trial `i` draws its impulse times from `sequences[i % len]`.
    pub sequences: Vec<SequenceKind>,
}

impl FalsifyRanges {
    fn validate(&self) -> Result<()> {
        if self.sequences.is_empty() {
            return Err(invalid("falsification needs at least one sequence generator"));
        }
        if !(self.x0_max >= 0.0 && self.u_max >= 0.0) || self.input_pieces == 0 {
            return Err(invalid("falsification ranges must be nonnegative with at least one input piece"));
        }
        if !(self.horizon > self.t0) || !(self.step > 0.0) {
            return Err(invalid("falsification needs horizon > t0 and step > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub max_ratio: f64,
    /// Time of the largest ratio.
    pub arg_t: f64,
    pub x0_norm: f64,
    pub u_norm: f64,
    pub impulses: usize,
    /// The simulation diverged; `arg_t` is the blow-up time.
    pub blow_up: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialViolation {
    pub trial: usize,
    pub time: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ISSCheckReport {
    pub seed: u64,
    pub tolerance: f64,
    pub trials: Vec<TrialResult>,
    pub violations: Vec<TrialViolation>,
    pub pass: bool,
}

impl ISSCheckReport {
    /// Aggregates trial results in trial order.
    pub fn from_trials(seed: u64, mut trials: Vec<TrialResult>) -> Self {
        trials.sort_by_key(|t| t.trial);
        let violations: Vec<TrialViolation> = trials
            .iter()
            .filter(|t| !(t.max_ratio <= 1.0 + RATIO_TOL))
            .map(|t| TrialViolation { trial: t.trial, time: t.arg_t, ratio: t.max_ratio })
            .collect();
        ISSCheckReport { seed, tolerance: RATIO_TOL, pass: violations.is_empty(), trials, violations }
    }

    pub fn worst(&self) -> Option<&TrialResult> {
        self.trials.iter().max_by(|a, b| a.max_ratio.total_cmp(&b.max_ratio))
    }
}

/// Initial state, input and impulse sequence of one trial.
pub fn draw_trial(
    sys: &ImpulsiveSystem,
    ranges: &FalsifyRanges,
    trial: usize,
    seed: u64,
) -> Result<(Vec<f64>, InputSignal, ImpulseSequence)> {
    let mut rng = random::rng(seed);
    let (n, m) = (sys.state_dim(), sys.input_dim());
    let r = ranges.x0_max * rng.gen::<f64>();
    let x0 = random::scaled(&random::unit_direction(&mut rng, n), r);
    let zero = m == 0 || (ranges.zero_input_every > 0 && trial % ranges.zero_input_every == 0);
    let input = if zero {
        InputSignal::zero(ranges.t0, m)
    } else {
        let pieces = rng.gen_range(1..=ranges.input_pieces);
        let mut starts: Vec<f64> = (1..pieces)
            .map(|_| ranges.t0 + (ranges.horizon - ranges.t0) * rng.gen::<f64>())
            .collect();
        starts.push(ranges.t0);
        starts.sort_by(f64::total_cmp);
        starts.dedup();
        let values = starts
            .iter()
            .map(|_| {
                let s = ranges.u_max * rng.gen::<f64>();
                random::scaled(&random::unit_direction(&mut rng, m), s)
            })
            .collect();
        InputSignal::new(starts, values)?
    };
    let kind = ranges.sequences[trial % ranges.sequences.len()];
    let seq = generate_sequence(kind, ranges.t0, ranges.horizon, rng.gen())?;
    Ok((x0, input, seq))
}

fn admissible(bg: &BetaGamma, seq: &ImpulseSequence, horizon: f64, trial: usize) -> Result<()> {
    match bg.provenance {
        Provenance::FixedDwellTime { theta, .. } => {
            if !seq.has_min_dwell(theta) {
                return Err(Error::InadmissibleSequence {
                    trial,
                    reason: format!(
                        "sequence rejected: minimum gap {} is below theta = {theta}",
                        seq.min_gap().unwrap_or(f64::INFINITY)
                    ),
                });
            }
        }
        Provenance::GeneralizedAverage { c, d, envelope } => {
            let rep = check_gadt(seq, c, d, envelope, horizon, DEFAULT_GAP_GRID)?;
            if !rep.pass {
                return Err(Error::InadmissibleSequence {
                    trial,
                    reason: format!("sequence rejected by check_gadt (margin {:e})", rep.margin),
                });
            }
        }
    }
    Ok(())
}

/// Draws, admits, simulates and scores trial `trial` of a run seeded by
/// `master_seed`. Independent of every other trial.
pub fn run_trial(
    sys: &ImpulsiveSystem,
    bg: &BetaGamma,
    ranges: &FalsifyRanges,
    master_seed: u64,
    trial: usize,
) -> Result<TrialResult> {
    ranges.validate()?;
    let seed = derive_seed(master_seed, trial as u64);
    let (x0, input, seq) = draw_trial(sys, ranges, trial, seed)?;
    admissible(bg, &seq, ranges.horizon, trial)?;
    let x0_norm = norm(&x0);
    let u_norm = input.sup_norm();
    let mut result = TrialResult {
        trial,
        seed,
        max_ratio: 0.0,
        arg_t: ranges.t0,
        x0_norm,
        u_norm,
        impulses: seq.len(),
        blow_up: false,
    };
    let traj = match simulate(sys, &x0, ranges.t0, &input, &seq, ranges.horizon, ranges.step) {
        Ok(t) => t,
        Err(Error::BlowUp { time, .. }) => {
            result.max_ratio = f64::INFINITY;
            result.arg_t = time;
            result.blow_up = true;
            return Ok(result);
        }
        Err(e) => return Err(e),
    };
    let profile = bg.beta.profile(x0_norm, ranges.horizon - ranges.t0)?;
    let gamma = bg.gamma.eval(u_norm)?;
    for p in traj.points() {
        let bound = bg.beta.eval_profile(&profile, p.t - ranges.t0)?.max(gamma);
        let nx = norm(p.x);
        let ratio = if bound > 0.0 {
            nx / bound
        } else if nx == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > result.max_ratio {
            result.max_ratio = ratio;
            result.arg_t = p.t;
        }
    }
    Ok(result)
}

/// Runs all trials sequentially. An inadmissible sequence aborts the whole
/// run: it signals a misconfiguration, not a falsification.
pub fn check_iss_bound(
    sys: &ImpulsiveSystem,
    bg: &BetaGamma,
    ranges: &FalsifyRanges,
    seed: u64,
) -> Result<ISSCheckReport> {
    let trials = (0..ranges.trials)
        .map(|i| run_trial(sys, bg, ranges, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ISSCheckReport::from_trials(seed, trials))
}
