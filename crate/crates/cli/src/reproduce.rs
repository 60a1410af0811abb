//! Built-in reproductions of the two worked examples: the cubic system with
//! a fixed dwell time and the scalar linear tightness system.

use std::path::Path;

use impulse_iss_core::comparison::FunctionClass::{KInfinity, PositiveDefinite};
use impulse_iss_core::comparison::MonotoneFunction;
use impulse_iss_core::dwell::{
    check_gadt, default_fdt_grid, fdt_margin, generate_sequence, FDTParams, GADTEnvelope, SequenceKind,
    DEFAULT_GAP_GRID,
};
use impulse_iss_core::estimate::build_gamma_fdt;
use impulse_iss_core::expr::parse_expression;
use impulse_iss_core::lyapunov::{CandidateKind, ISSLyapunovCandidate};
use impulse_iss_core::system::{simulate, HybridTrajectory, ImpulsiveSystem, InputSignal};
use serde_json::json;

use crate::commands::FDT_TOL;
use crate::error::CliError;
use crate::io::{table_csv, trajectory_csv};
use crate::report::{RunReport, Verdict};

pub const EXAMPLE_A0: [f64; 5] = [0.05, 0.1, 0.2, 1.0 / 3.0, 0.5];
/// δ used to turn a supremum into an admissible θ.
pub const TRADEOFF_DELTA: f64 = 0.2;

/// `ẋ = −x³ + u`, `x⁺ = x + x³ + u` with `V = |x|` and `χ(r) = (r/a)^{1/3}`.
pub fn cubic_example(a: f64) -> Result<(ImpulsiveSystem, ISSLyapunovCandidate), CliError> {
    let sys = ImpulsiveSystem::parse(1, 1, &["-x1^3 + u1"], &["x1 + x1^3 + u1"])?;
    let k = |s: &str| MonotoneFunction::parse(s, KInfinity);
    let pd = |s: &str| MonotoneFunction::parse(s, PositiveDefinite);
    let kind = CandidateKind::General {
        phi: pd(&format!("(1 - {a})*s^3"))?,
        alpha: pd(&format!("s + (1 + {a})*s^3"))?,
    };
    let chi = k(&format!("(r/{a})^(1/3)"))?;
    let cand = ISSLyapunovCandidate::new(1, parse_expression("abs(x1)")?, k("r")?, k("r")?, chi, kind)?;
    Ok((sys, cand))
}

/// Numerical `sup_a ∫_a^{α(a)} ds/φ` for the cubic example.
pub fn cubic_supremum(a0: f64) -> Result<(f64, bool), CliError> {
    let (_, cand) = cubic_example(a0)?;
    let analytic = (1.0 + a0) / (1.0 - a0);
    // θ, δ only set the margin; the supremum does not depend on them
    let params = FDTParams::new(analytic + 1.0, 0.5)?;
    let rep = fdt_margin(&cand.phi_function()?, &cand.alpha_function()?, params, &default_fdt_grid(), FDT_TOL)?;
    Ok((rep.supremum.expect("fdt report carries a supremum"), rep.edge_supremum))
}

pub fn example_fdt(out: &Path, seed: u64) -> Result<RunReport, CliError> {
    let mut rep = RunReport::new("reproduce example_fdt", "example_fdt", seed);
    let mut rows = Vec::new();
    let mut lines = vec!["a0        numeric sup   (1+a0)/(1-a0)  rel. error".to_string()];
    let mut pass = true;
    for a0 in EXAMPLE_A0 {
        let (sup, edge) = cubic_supremum(a0)?;
        let analytic = (1.0 + a0) / (1.0 - a0);
        let rel = (sup - analytic).abs() / analytic;
        pass &= rel <= 0.01;
        lines.push(format!("{a0:<9.4} {sup:<13.7} {analytic:<14.7} {rel:.2e}{}", if edge { "  (edge)" } else { "" }));
        rows.push(vec![a0, sup, analytic, rel, edge as u8 as f64]);
    }
    rep.emit(out, "example_fdt.csv", &table_csv(&["a0", "numeric_sup", "analytic_sup", "rel_error", "edge"], &rows))?;
    rep.note("the supremum is approached as a -> 0, so it sits at the small-a edge of the grid");
    rep.push(Verdict::new("example_fdt", pass, lines.join("\n"), json!({ "rows": rows })));
    Ok(rep)
}

pub fn example_tradeoff(out: &Path, seed: u64) -> Result<RunReport, CliError> {
    let mut rep = RunReport::new("reproduce example_tradeoff", "example_tradeoff", seed);
    let mut rows = Vec::new();
    let mut lines = vec![format!("a0        theta = sup + {TRADEOFF_DELTA}  chi(1)     gamma(1)")];
    for a0 in EXAMPLE_A0 {
        let (sup, _) = cubic_supremum(a0)?;
        let (_, cand) = cubic_example(a0)?;
        let chi1 = cand.chi().eval(1.0)?;
        let gamma1 = build_gamma_fdt(&cand)?.eval(1.0)?;
        let theta = sup + TRADEOFF_DELTA;
        lines.push(format!("{a0:<9.4} {theta:<18.6} {chi1:<10.5} {gamma1:.5}"));
        rows.push(vec![a0, theta, chi1, gamma1]);
    }
    // a smaller θ must come with a larger gain
    let pass = rows.windows(2).all(|w| w[0][1] < w[1][1] && w[0][2] > w[1][2] && w[0][3] > w[1][3]);
    rep.emit(out, "example_tradeoff.csv", &table_csv(&["a0", "theta", "chi_at_1", "gamma_at_1"], &rows))?;
    rep.push(Verdict::new("example_tradeoff", pass, lines.join("\n"), json!({ "rows": rows })));
    Ok(rep)
}

pub const TIGHTNESS_C: f64 = 1.0;
pub const TIGHTNESS_D: f64 = -0.5;
pub const TIGHTNESS_HORIZON: f64 = 60.0;

/// `ẋ = −c x`, `x⁺ = e^{−d} x` with `c = 1`, `d = −0.5`.
pub fn tightness_system() -> Result<ImpulsiveSystem, CliError> {
    Ok(ImpulsiveSystem::parse(1, 0, &["-x1"], &["exp(0.5)*x1"])?)
}

pub fn tightness_run(tau: f64, horizon: f64, step: f64) -> Result<HybridTrajectory, CliError> {
    let sys = tightness_system()?;
    let seq = generate_sequence(SequenceKind::Periodic { tau }, 0.0, horizon, 0)?;
    Ok(simulate(&sys, &[1.0], 0.0, &InputSignal::zero(0.0, 0), &seq, horizon, step)?)
}

/// Whether `check_gadt` accepts period `tau` for some envelope of the sweep
/// `μ ∈ {0, 0.25, …, 2}`, `λ ∈ {0.05, 0.1, …, 1}`.
pub fn gadt_accepts_any(tau: f64, horizon: f64) -> Result<Option<(f64, f64)>, CliError> {
    let seq = generate_sequence(SequenceKind::Periodic { tau }, 0.0, horizon, 0)?;
    for i in 0..=8 {
        for j in 1..=20 {
            let env = GADTEnvelope::new(0.25 * i as f64, 0.05 * j as f64)?;
            if check_gadt(&seq, TIGHTNESS_C, TIGHTNESS_D, env, horizon, DEFAULT_GAP_GRID)?.pass {
                return Ok(Some((env.mu, env.lambda)));
            }
        }
    }
    Ok(None)
}

pub fn tightness(out: &Path, seed: u64) -> Result<RunReport, CliError> {
    let mut rep = RunReport::new("reproduce tightness", "tightness", seed);
    let critical = -TIGHTNESS_D / TIGHTNESS_C;
    rep.note(format!("critical period -d/c = {critical}"));
    for tau in [0.4, 0.6] {
        let traj = tightness_run(tau, TIGHTNESS_HORIZON, 1e-3)?;
        let name = format!("tightness_tau_{tau}.csv");
        rep.emit(out, &name, &trajectory_csv(&traj))?;
        let max = traj.points().map(|p| p.x[0].abs()).fold(0.0, f64::max);
        let last = traj.final_state()[0].abs();
        let growth = -TIGHTNESS_D / tau - TIGHTNESS_C;
        let (pass, what) = if growth > 0.0 {
            (max > 1e6, format!("diverges: max |x| = {max:e} (> 1e6 required)"))
        } else {
            (last < 1e-3, format!("decays: |x({TIGHTNESS_HORIZON})| = {last:e} (< 1e-3 required)"))
        };
        let accepted = gadt_accepts_any(tau, TIGHTNESS_HORIZON)?;
        let gadt = match accepted {
            Some((mu, lambda)) => format!("check_gadt accepts envelope (mu = {mu}, lambda = {lambda})"),
            None => "check_gadt rejects every envelope of the sweep".to_string(),
        };
        // below the critical period no class-L envelope may be certified, above it one must be
        let consistent = (growth > 0.0) == accepted.is_none();
        rep.push(Verdict::new(
            &format!("tightness tau = {tau}"),
            pass && consistent,
            format!("-d/tau - c = {growth:+.4}\n{what}\n{gadt}"),
            json!({ "tau": tau, "growth_rate": growth, "max_norm": max, "final_norm": last, "gadt_envelope": accepted }),
        ));
    }
    Ok(rep)
}
