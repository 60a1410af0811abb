//! JSON analysis configuration.
//!
//! ```json
//! {
//!   "system": { "n": 1, "m": 1, "flow": ["-x1^3 + u1"], "jump": ["x1 + x1^3 + u1"] },
//!   "lyapunov": {
//!     "v": "abs(x1)", "psi1": "r", "psi2": "r", "chi": "(r/(1/3))^(1/3)",
//!     "kind": "general", "phi": "(2/3)*s^3", "alpha": "s + (4/3)*s^3"
//!   },
//!   "dwell": { "fdt": { "theta": 2.3, "delta": 0.2 } },
//!   "simulation": {
//!     "t0": 0, "horizon": 50, "step": 0.001, "x0": [1.0],
//!     "input": { "starts": [0], "values": [[0.5]] },
//!     "sequence": { "periodic": { "tau": 2.3 } }
//!   },
//!   "falsification": {
//!     "trials": 500, "x0_max": 5, "u_max": 1,
//!     "sequences": [{ "periodic": { "tau": 2.3 } }, { "jittered": { "theta": 2.3, "extra_max": 1 } }]
//!   }
//! }
//! ```
//!
//! Every block except `system` is optional; each subcommand states which
//! blocks it needs. Unknown fields are rejected.

use std::path::{Path, PathBuf};

use impulse_iss_core::comparison::FunctionClass::{KInfinity, PositiveDefinite};
use impulse_iss_core::comparison::MonotoneFunction;
use impulse_iss_core::dwell::{FDTParams, GADTEnvelope, SequenceKind};
use impulse_iss_core::expr::parse_expression;
use impulse_iss_core::lyapunov::{CandidateKind, ISSLyapunovCandidate, SampleRanges, DEFAULT_SAMPLES};
use impulse_iss_core::system::{ImpulsiveSystem, InputSignal};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub system: RawSystem,
    pub lyapunov: Option<RawLyapunov>,
    pub dwell: Option<RawDwell>,
    pub simulation: Option<RawSimulation>,
    pub falsification: Option<RawFalsification>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    pub flow: Vec<String>,
    pub jump: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawKind {
    General,
    Exponential,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLyapunov {
    pub v: String,
    pub psi1: String,
    pub psi2: String,
    pub chi: String,
    pub kind: RawKind,
    pub phi: Option<String>,
    pub alpha: Option<String>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    #[serde(default)]
    pub audit: RawAudit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawAudit {
    pub samples: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub zero_input_every: usize,
}

impl Default for RawAudit {
    fn default() -> Self {
        let r = SampleRanges::default();
        RawAudit {
            samples: DEFAULT_SAMPLES,
            x_min: r.x_min,
            x_max: r.x_max,
            u_min: r.u_min,
            u_max: r.u_max,
            zero_input_every: r.zero_input_every,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDwell {
    pub fdt: Option<RawFdt>,
    pub gadt: Option<RawGadt>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFdt {
    pub theta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGadt {
    pub mu: f64,
    pub lambda: f64,
}

/// Impulse-time source: a generator, explicit times or a CSV file.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum RawSequence {
    Periodic { tau: f64 },
    Jittered { theta: f64, extra_max: f64 },
    Poisson { rate: f64, min_gap: f64 },
    Times(Vec<f64>),
    File(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInput {
    pub starts: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulation {
    #[serde(default)]
    pub t0: f64,
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    pub x0: Option<Vec<f64>>,
    pub input: Option<RawInput>,
    pub sequence: Option<RawSequence>,
}

fn default_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFalsification {
    pub trials: usize,
    pub x0_max: f64,
    pub u_max: f64,
    #[serde(default = "default_pieces")]
    pub input_pieces: usize,
    #[serde(default = "default_zero_every")]
    pub zero_input_every: usize,
    /// Horizon and step default to the simulation block's.
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub sequences: Vec<RawSequence>,
    pub seed: Option<u64>,
}

fn default_pieces() -> usize {
    4
}

fn default_zero_every() -> usize {
    10
}

/// Where a simulation takes its impulse times from.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSource {
    Generated(SequenceKind),
    Times(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DwellSpec {
    Fdt(FDTParams),
    Gadt(GADTEnvelope),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub t0: f64,
    pub horizon: f64,
    pub step: f64,
    pub x0: Option<Vec<f64>>,
    pub input: InputSignal,
    pub sequence: Option<SequenceSource>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Falsification {
    pub trials: usize,
    pub x0_max: f64,
    pub u_max: f64,
    pub input_pieces: usize,
    pub zero_input_every: usize,
    pub horizon: Option<f64>,
    pub step: Option<f64>,
    pub sequences: Vec<SequenceKind>,
    pub seed: Option<u64>,
}

/// A parsed and cross-validated configuration.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub system: ImpulsiveSystem,
    pub candidate: Option<ISSLyapunovCandidate>,
    pub audit: Option<(usize, SampleRanges)>,
    pub dwell: Option<DwellSpec>,
    pub simulation: Option<Simulation>,
    pub falsification: Option<Falsification>,
    /// The raw JSON text, digested into every report.
    pub text: String,
    /// Expression sources by config location, for diagnostics.
    pub expressions: Vec<(String, String)>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn at(location: &str, e: impulse_iss_core::Error) -> CliError {
    config_err(format!("{location}: {e}"))
}

pub fn load_config(path: &Path) -> Result<AnalysisConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// Parses config text; relative sequence file paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<AnalysisConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
        config_err(format!("parse error at line {}, column {}: {e}", e.line(), e.column()))
    })?;
    let mut expressions = Vec::new();
    let system = build_system(&raw.system, &mut expressions)?;
    let (n, m) = (system.state_dim(), system.input_dim());
    let (candidate, audit) = match &raw.lyapunov {
        Some(l) => {
            let (c, a) = build_candidate(n, l, &mut expressions)?;
            (Some(c), Some(a))
        }
        None => (None, None),
    };
    let dwell = raw.dwell.as_ref().map(build_dwell).transpose()?;
    let simulation = raw.simulation.as_ref().map(|s| build_simulation(n, m, s, base)).transpose()?;
    let falsification = raw.falsification.as_ref().map(build_falsification).transpose()?;
    Ok(AnalysisConfig {
        system,
        candidate,
        audit,
        dwell,
        simulation,
        falsification,
        text: text.to_string(),
        expressions,
    })
}

fn build_system(raw: &RawSystem, exprs: &mut Vec<(String, String)>) -> Result<ImpulsiveSystem, CliError> {
    if raw.n == 0 {
        return Err(config_err("system.n must be positive"));
    }
    if raw.flow.len() != raw.n || raw.jump.len() != raw.n {
        return Err(config_err(format!(
            "dimension mismatch: n = {} but {} flow and {} jump expressions",
            raw.n,
            raw.flow.len(),
            raw.jump.len()
        )));
    }
    let mut parse = |block: &str, list: &[String]| {
        list.iter()
            .enumerate()
            .map(|(i, s)| {
                let loc = format!("system.{block}[{i}]");
                exprs.push((loc.clone(), s.clone()));
                parse_expression(s).map_err(|e| at(&loc, e))
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let flow = parse("flow", &raw.flow)?;
    let jump = parse("jump", &raw.jump)?;
    ImpulsiveSystem::new(raw.n, raw.m, flow, jump).map_err(|e| at("system", e))
}

fn build_candidate(
    n: usize,
    raw: &RawLyapunov,
    exprs: &mut Vec<(String, String)>,
) -> Result<(ISSLyapunovCandidate, (usize, SampleRanges)), CliError> {
    let mut func = |name: &str, text: &str, class| {
        let loc = format!("lyapunov.{name}");
        exprs.push((loc.clone(), text.to_string()));
        MonotoneFunction::parse(text, class).map_err(|e| at(&loc, e))
    };
    let psi1 = func("psi1", &raw.psi1, KInfinity)?;
    let psi2 = func("psi2", &raw.psi2, KInfinity)?;
    let chi = func("chi", &raw.chi, KInfinity)?;
    let kind = match raw.kind {
        RawKind::General => {
            if raw.c.is_some() || raw.d.is_some() {
                return Err(config_err("lyapunov: c and d belong to kind \"exponential\""));
            }
            let (Some(phi), Some(alpha)) = (&raw.phi, &raw.alpha) else {
                return Err(config_err("lyapunov: kind \"general\" needs phi and alpha"));
            };
            CandidateKind::General {
                phi: func("phi", phi, PositiveDefinite)?,
                alpha: func("alpha", alpha, PositiveDefinite)?,
            }
        }
        RawKind::Exponential => {
            if raw.phi.is_some() || raw.alpha.is_some() {
                return Err(config_err("lyapunov: phi and alpha belong to kind \"general\""));
            }
            let (Some(c), Some(d)) = (raw.c, raw.d) else {
                return Err(config_err("lyapunov: kind \"exponential\" needs c and d"));
            };
            CandidateKind::Exponential { c, d }
        }
    };
    exprs.push(("lyapunov.v".into(), raw.v.clone()));
    let v = parse_expression(&raw.v).map_err(|e| at("lyapunov.v", e))?;
    let cand = ISSLyapunovCandidate::new(n, v, psi1, psi2, chi, kind).map_err(|e| at("lyapunov", e))?;
    let a = &raw.audit;
    if a.samples == 0 || !(a.x_min > 0.0 && a.x_max >= a.x_min) || !(a.u_min > 0.0 && a.u_max >= a.u_min) {
        return Err(config_err("lyapunov.audit: need samples > 0 and 0 < min <= max"));
    }
    let ranges = SampleRanges {
        x_min: a.x_min,
        x_max: a.x_max,
        u_min: a.u_min,
        u_max: a.u_max,
        zero_input_every: a.zero_input_every,
    };
    Ok((cand, (a.samples, ranges)))
}

fn build_dwell(raw: &RawDwell) -> Result<DwellSpec, CliError> {
    match (raw.fdt, raw.gadt) {
        (Some(f), None) => FDTParams::new(f.theta, f.delta).map(DwellSpec::Fdt).map_err(|e| at("dwell.fdt", e)),
        (None, Some(g)) => GADTEnvelope::new(g.mu, g.lambda).map(DwellSpec::Gadt).map_err(|e| at("dwell.gadt", e)),
        _ => Err(config_err("dwell: give exactly one of fdt or gadt")),
    }
}

fn generator(raw: &RawSequence, location: &str) -> Result<SequenceKind, CliError> {
    let kind = match *raw {
        RawSequence::Periodic { tau } => SequenceKind::Periodic { tau },
        RawSequence::Jittered { theta, extra_max } => SequenceKind::Jittered { theta, extra_max },
        RawSequence::Poisson { rate, min_gap } => SequenceKind::Poisson { rate, min_gap },
        _ => return Err(config_err(format!("{location}: only periodic, jittered or poisson generators allowed here"))),
    };
    // validate the parameters now rather than at the first trial
    impulse_iss_core::dwell::generate_sequence(kind, 0.0, 1.0, 0).map_err(|e| at(location, e))?;
    Ok(kind)
}

fn build_simulation(n: usize, m: usize, raw: &RawSimulation, base: &Path) -> Result<Simulation, CliError> {
    if !(raw.horizon > raw.t0) || !raw.t0.is_finite() || !raw.horizon.is_finite() {
        return Err(config_err("simulation: need finite t0 < horizon"));
    }
    if !(raw.step > 0.0) {
        return Err(config_err("simulation.step must be positive"));
    }
    if let Some(x0) = &raw.x0 {
        if x0.len() != n {
            return Err(config_err(format!("dimension mismatch: simulation.x0 has {} entries, n = {n}", x0.len())));
        }
    }
    let input = match &raw.input {
        None => InputSignal::zero(raw.t0, m),
        Some(i) => {
            if i.values.iter().any(|v| v.len() != m) {
                return Err(config_err(format!("dimension mismatch: simulation.input values must have m = {m} entries")));
            }
            if i.starts.first() != Some(&raw.t0) {
                return Err(config_err("simulation.input.starts must begin at t0"));
            }
            InputSignal::new(i.starts.clone(), i.values.clone()).map_err(|e| at("simulation.input", e))?
        }
    };
    let sequence = match &raw.sequence {
        None => None,
        Some(RawSequence::Times(t)) => Some(SequenceSource::Times(t.clone())),
        Some(RawSequence::File(p)) => {
            let path = base.join(p);
            Some(SequenceSource::Times(crate::io::read_sequence_csv(&path)?))
        }
        Some(g) => Some(SequenceSource::Generated(generator(g, "simulation.sequence")?)),
    };
    if let Some(SequenceSource::Times(t)) = &sequence {
        impulse_iss_core::system::ImpulseSequence::new(raw.t0, t.clone()).map_err(|e| at("simulation.sequence", e))?;
    }
    Ok(Simulation { t0: raw.t0, horizon: raw.horizon, step: raw.step, x0: raw.x0.clone(), input, sequence })
}

fn build_falsification(raw: &RawFalsification) -> Result<Falsification, CliError> {
    if raw.sequences.is_empty() {
        return Err(config_err("falsification.sequences must not be empty"));
    }
    if !(raw.x0_max >= 0.0 && raw.u_max >= 0.0) || raw.input_pieces == 0 {
        return Err(config_err("falsification: need x0_max, u_max >= 0 and input_pieces >= 1"));
    }
    let sequences = raw
        .sequences
        .iter()
        .enumerate()
        .map(|(i, s)| generator(s, &format!("falsification.sequences[{i}]")))
        .collect::<Result<_, _>>()?;
    Ok(Falsification {
        trials: raw.trials,
        x0_max: raw.x0_max,
        u_max: raw.u_max,
        input_pieces: raw.input_pieces,
        zero_input_every: raw.zero_input_every,
        horizon: raw.horizon,
        step: raw.step,
        sequences,
        seed: raw.seed,
    })
}

impl AnalysisConfig {
    pub fn candidate(&self) -> Result<&ISSLyapunovCandidate, CliError> {
        self.candidate.as_ref().ok_or_else(|| config_err("this subcommand needs a lyapunov block"))
    }

    pub fn dwell(&self) -> Result<DwellSpec, CliError> {
        self.dwell.ok_or_else(|| config_err("this subcommand needs a dwell block"))
    }

    pub fn simulation(&self) -> Result<&Simulation, CliError> {
        self.simulation.as_ref().ok_or_else(|| config_err("this subcommand needs a simulation block"))
    }

    pub fn falsification(&self) -> Result<&Falsification, CliError> {
        self.falsification.as_ref().ok_or_else(|| config_err("this subcommand needs a falsification block"))
    }
}
