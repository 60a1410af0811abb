//! Subcommand pipelines. Each returns a `RunReport` whose verdicts decide
//! the exit code; any `Err` is exit code 2.

use std::path::Path;

use impulse_iss_core::comparison::{default_grid, log_grid, verify_class, ClassReport, MonotoneFunction};
use impulse_iss_core::dwell::{
    check_gadt, default_fdt_grid, fdt_margin, generate_sequence, min_period_gadt, DwellTimeReport, Witness,
    DEFAULT_GAP_GRID,
};
use impulse_iss_core::estimate::{build_beta_gamma_gadt, build_fdt, BetaGamma, FalsifyRanges};
use impulse_iss_core::lyapunov::{check_implication, check_sandwich, sample_pairs, sample_states, AuditReport};
use impulse_iss_core::random::derive_seed;
use impulse_iss_core::system::{simulate, ImpulseSequence};
use impulse_iss_core::Error;
use serde_json::{json, Value};

use crate::config::{AnalysisConfig, DwellSpec, SequenceSource, Simulation};
use crate::error::CliError;
use crate::falsify::check_iss_bound_parallel;
use crate::io::{sequence_csv, table_csv, trajectory_csv, trials_csv};
use crate::report::{RunReport, Verdict};

pub const DEFAULT_SEED: u64 = 42;
/// Quadrature tolerance of the FDT audit.
pub const FDT_TOL: f64 = 1e-9;

/// `--seed` wins over the config's falsification seed, which wins over 42.
pub fn resolve_seed(cfg: &AnalysisConfig, flag: Option<u64>) -> u64 {
    flag.or(cfg.falsification.as_ref().and_then(|f| f.seed)).unwrap_or(DEFAULT_SEED)
}

fn sequence_of(sim: &Simulation, seed: u64) -> Result<ImpulseSequence, CliError> {
    Ok(match &sim.sequence {
        None => ImpulseSequence::empty(sim.t0),
        Some(SequenceSource::Times(t)) => ImpulseSequence::new(sim.t0, t.clone())?,
        Some(SequenceSource::Generated(kind)) => generate_sequence(*kind, sim.t0, sim.horizon, seed)?,
    })
}

pub fn cmd_simulate(cfg: &AnalysisConfig, seed: u64, out: &Path) -> Result<RunReport, CliError> {
    let sim = cfg.simulation()?;
    let x0 = sim.x0.as_ref().ok_or_else(|| CliError::Config("simulate needs simulation.x0".into()))?;
    let seq = sequence_of(sim, seed)?;
    let mut rep = RunReport::new("simulate", &cfg.text, seed);
    rep.emit(out, "sequence.csv", &sequence_csv(seq.times()))?;
    let residual = cfg.system.equilibrium_residual()?;
    if residual > impulse_iss_core::system::EQUILIBRIUM_TOL {
        rep.note(format!("origin is not an equilibrium: residual {residual:e}"));
    }
    match simulate(&cfg.system, x0, sim.t0, &sim.input, &seq, sim.horizon, sim.step) {
        Ok(traj) => {
            let max_norm = traj.points().map(|p| impulse_iss_core::system::norm(p.x)).fold(0.0, f64::max);
            rep.emit(out, "trajectory.csv", &trajectory_csv(&traj))?;
            rep.push(Verdict::new(
                "simulate",
                true,
                format!(
                    "{} points, {} impulses on [{}, {}]\nfinal state {:?}\nmax |x| = {max_norm:e}",
                    traj.point_count(),
                    traj.jumps.len(),
                    sim.t0,
                    traj.final_time(),
                    traj.final_state()
                ),
                json!({
                    "points": traj.point_count(),
                    "impulses": traj.jumps.len(),
                    "final_time": traj.final_time(),
                    "final_state": traj.final_state(),
                    "max_norm": max_norm,
                }),
            ));
        }
        Err(Error::BlowUp { time, norm }) => rep.push(Verdict::new(
            "simulate",
            false,
            format!("trajectory blew up at t = {time} (|x| = {norm:e})"),
            json!({ "blow_up_time": time, "norm": norm }),
        )),
        Err(e) => return Err(e.into()),
    }
    Ok(rep)
}

fn var(f: &MonotoneFunction) -> &str {
    f.variable().unwrap_or("r")
}

fn class_verdict(name: &str, f: &MonotoneFunction, rep: &ClassReport) -> Verdict {
    let summary = match &rep.first_violation {
        None => format!("{name}({}) = {} is {:?} on {} grid points", var(f), f.body(), rep.class, rep.grid.len()),
        Some(v) => format!(
            "{name}({}) = {} is not {:?}: {:?} fails at {} (value {})",
            var(f),
            f.body(),
            rep.class,
            v.condition,
            v.r,
            v.value
        ),
    };
    let violation = rep.first_violation.as_ref().map(|v| json!({ "r": v.r, "value": v.value, "condition": format!("{:?}", v.condition) }));
    Verdict::new(&format!("class {name}"), rep.pass, summary, json!({ "class": format!("{:?}", rep.class), "violation": violation }))
}

fn audit_verdict(name: &str, rep: &AuditReport) -> Verdict {
    let mut summary = format!(
        "{} samples, {} violations, {} skipped at kinks, {} vacuous (V < chi(|u|))",
        rep.samples,
        rep.violations.len(),
        rep.skipped_nonsmooth,
        rep.vacuous
    );
    let first = rep.violations.first().map(|v| {
        summary.push_str(&format!(
            "\nfirst violation: sample {} x = {:?} u = {:?}: {} has lhs {} > rhs {}",
            v.index,
            v.x,
            v.u,
            v.inequality.name(),
            v.lhs,
            v.rhs
        ));
        json!({ "index": v.index, "x": v.x, "u": v.u, "inequality": v.inequality.name(), "lhs": v.lhs, "rhs": v.rhs })
    });
    Verdict::new(
        name,
        rep.pass,
        summary,
        json!({
            "samples": rep.samples,
            "violations": rep.violations.len(),
            "skipped_nonsmooth": rep.skipped_nonsmooth,
            "vacuous": rep.vacuous,
            "seed": rep.seed,
            "first_violation": first,
        }),
    )
}

pub fn cmd_check_lyapunov(cfg: &AnalysisConfig, seed: u64) -> Result<RunReport, CliError> {
    let cand = cfg.candidate()?;
    let (count, ranges) = cfg.audit.expect("audit ranges accompany the candidate");
    let (n, m) = (cfg.system.state_dim(), cfg.system.input_dim());
    let mut rep = RunReport::new("check-lyapunov", &cfg.text, seed);
    let grid = default_grid();
    let mut functions = vec![("psi1", cand.psi1().clone()), ("psi2", cand.psi2().clone()), ("chi", cand.chi().clone())];
    functions.push(("phi", cand.phi_function()?));
    functions.push(("alpha", cand.alpha_function()?));
    for (name, f) in &functions {
        rep.push(class_verdict(name, f, &verify_class(f, &grid)?));
    }
    let states = sample_states(n, count, &ranges, derive_seed(seed, 0));
    let sandwich = check_sandwich(cand, &states)?.with_seed(seed);
    let pairs = sample_pairs(n, m, count, &ranges, derive_seed(seed, 1));
    let implication = check_implication(cand, &cfg.system, &pairs)?.with_seed(seed);
    for (name, r) in [("sandwich", &sandwich), ("implication", &implication)] {
        if r.warns() {
            rep.note(format!(
                "{name}: {:.2}% of samples skipped at kinks of V (more than 1%)",
                100.0 * r.skip_fraction()
            ));
        }
    }
    rep.push(audit_verdict("sandwich", &sandwich));
    rep.push(audit_verdict("implication", &implication));
    Ok(rep)
}

pub fn witness_text(w: &Witness) -> String {
    match *w {
        Witness::Argument(a) => format!("worst argument a = {a:e}"),
        Witness::Window { i, j, jumps, duration } => {
            format!("worst window: impulses {i}..={j} ({jumps} jumps) over duration {duration}")
        }
        Witness::JumpFree { duration } => format!("worst window: impulse-free of duration {duration}"),
        Witness::None => "no witness".into(),
    }
}

fn witness_json(w: &Witness) -> Value {
    match *w {
        Witness::Argument(a) => json!({ "argument": a }),
        Witness::Window { i, j, jumps, duration } => json!({ "first": i, "last": j, "jumps": jumps, "duration": duration }),
        Witness::JumpFree { duration } => json!({ "jump_free_duration": duration }),
        Witness::None => Value::Null,
    }
}

fn dwell_verdict(name: &str, rep: &DwellTimeReport) -> Verdict {
    let mut summary = format!("margin = {}\n{}", rep.margin, witness_text(&rep.witness));
    if let Some(s) = rep.supremum {
        summary.push_str(&format!("\nsupremum of the integral = {s}"));
    }
    Verdict::new(
        name,
        rep.pass,
        summary,
        json!({
            "margin": rep.margin,
            "witness": witness_json(&rep.witness),
            "supremum": rep.supremum,
            "edge_supremum": rep.edge_supremum,
            "resolution_excluded": rep.resolution_excluded,
            "constant_h": rep.constant_h,
            "windows_checked": rep.windows_checked,
        }),
    )
}

fn fdt_report(cfg: &AnalysisConfig, theta: f64, delta: f64) -> Result<DwellTimeReport, CliError> {
    let cand = cfg.candidate()?;
    let params = impulse_iss_core::dwell::FDTParams::new(theta, delta)?;
    Ok(fdt_margin(&cand.phi_function()?, &cand.alpha_function()?, params, &default_fdt_grid(), FDT_TOL)?)
}

fn fdt_notes(rep: &mut RunReport, d: &DwellTimeReport) {
    if d.edge_supremum {
        rep.note("supremum attained at a grid edge: possibly unbounded toward the edge");
    }
    if d.resolution_excluded > 0 {
        rep.note(format!(
            "{} grid points excluded: alpha(a) - a below floating-point resolution",
            d.resolution_excluded
        ));
    }
}

pub fn cmd_check_fdt(cfg: &AnalysisConfig, seed: u64) -> Result<RunReport, CliError> {
    let DwellSpec::Fdt(p) = cfg.dwell()? else {
        return Err(CliError::Config("check-fdt needs dwell.fdt".into()));
    };
    let d = fdt_report(cfg, p.theta, p.delta)?;
    let mut rep = RunReport::new("check-fdt", &cfg.text, seed);
    fdt_notes(&mut rep, &d);
    rep.push(dwell_verdict("fdt", &d));
    Ok(rep)
}

pub fn cmd_check_gadt(cfg: &AnalysisConfig, seed: u64, out: &Path) -> Result<RunReport, CliError> {
    let DwellSpec::Gadt(env) = cfg.dwell()? else {
        return Err(CliError::Config("check-gadt needs dwell.gadt".into()));
    };
    let (c, d) = cfg.candidate()?.exponential_rates()?;
    let sim = cfg.simulation()?;
    let seq = sequence_of(sim, seed)?;
    let mut rep = RunReport::new("check-gadt", &cfg.text, seed);
    rep.emit(out, "sequence.csv", &sequence_csv(seq.times()))?;
    let g = check_gadt(&seq, c, d, env, sim.horizon, DEFAULT_GAP_GRID)?;
    if g.constant_h {
        rep.note("lambda = 0: h is constant, outside the theorem's class-L hypothesis");
    }
    if let Ok(tau) = min_period_gadt(c, d, env.lambda) {
        rep.note(format!("periodic sequences need period >= {tau} for this decay rate"));
    }
    rep.push(dwell_verdict("gadt", &g));
    Ok(rep)
}

/// Checks the dwell condition and, if it holds, builds `β`, `γ`. A gADT
/// envelope is also checked against `sequence` when one is given.
fn certified_bound(
    cfg: &AnalysisConfig,
    rep: &mut RunReport,
    sequence: Option<(&ImpulseSequence, f64)>,
) -> Result<Option<BetaGamma>, CliError> {
    let cand = cfg.candidate()?;
    match cfg.dwell()? {
        DwellSpec::Fdt(p) => {
            let d = fdt_report(cfg, p.theta, p.delta)?;
            fdt_notes(rep, &d);
            let pass = d.pass;
            rep.push(dwell_verdict("fdt", &d));
            if !pass {
                return Ok(None);
            }
            Ok(Some(build_fdt(cand, p.theta, p.delta)?))
        }
        DwellSpec::Gadt(env) => {
            if env.is_constant() {
                return Err(CliError::Config("the gADT construction needs lambda > 0".into()));
            }
            if let Some((seq, horizon)) = sequence {
                let (c, d) = cand.exponential_rates()?;
                let g = check_gadt(seq, c, d, env, horizon, DEFAULT_GAP_GRID)?;
                let pass = g.pass;
                rep.push(dwell_verdict("gadt (simulation sequence)", &g));
                if !pass {
                    return Ok(None);
                }
            }
            Ok(Some(build_beta_gamma_gadt(cand, env)?))
        }
    }
}

pub fn cmd_estimate(cfg: &AnalysisConfig, seed: u64, out: &Path) -> Result<RunReport, CliError> {
    let mut rep = RunReport::new("estimate", &cfg.text, seed);
    let seq = match &cfg.simulation {
        Some(sim) if sim.sequence.is_some() => Some((sequence_of(sim, seed)?, sim.horizon)),
        _ => None,
    };
    let Some(bg) = certified_bound(cfg, &mut rep, seq.as_ref().map(|(s, h)| (s, *h)))? else {
        rep.note("no certificate: the dwell-time condition fails, so no bound is built");
        return Ok(rep);
    };
    let horizon = cfg.simulation.as_ref().map_or(50.0, |s| s.horizon - s.t0);
    let rs = log_grid(1e-2, 1e2, 9);
    let ts: Vec<f64> = (0..=20).map(|k| horizon * k as f64 / 20.0).collect();
    let mut beta_rows = Vec::new();
    for &r in &rs {
        for &t in &ts {
            beta_rows.push(vec![r, t, bg.beta.eval(r, t)?]);
        }
    }
    let gamma_rows = rs
        .iter()
        .map(|&r| Ok(vec![r, bg.gamma.eval(r)?, bg.inner_threshold(r)?, bg.outer_threshold(r)?]))
        .collect::<Result<Vec<_>, CliError>>()?;
    rep.emit(out, "beta.csv", &table_csv(&["r", "t", "beta"], &beta_rows))?;
    rep.emit(out, "gamma.csv", &table_csv(&["r", "gamma", "inner_level", "outer_level"], &gamma_rows))?;
    if bg.gamma.perturbed() {
        rep.note("gamma was flat on the audit grid; added 1e-12 * r");
    }
    let (b1, g1) = (bg.beta.eval(1.0, 0.0)?, bg.gamma.eval(1.0)?);
    rep.push(Verdict::new(
        "estimate",
        true,
        format!(
            "construction: {}\nbeta(1, 0) = {b1}, beta(1, {horizon}) = {}\ngamma(1) = {g1}",
            bg.provenance.name(),
            bg.beta.eval(1.0, horizon)?
        ),
        json!({
            "provenance": bg.provenance.name(),
            "beta_1_0": b1,
            "gamma_1": g1,
            "contraction": bg.beta.contraction(),
            "gamma_perturbed": bg.gamma.perturbed(),
        }),
    ));
    Ok(rep)
}

pub fn cmd_falsify(cfg: &AnalysisConfig, seed: u64, out: &Path) -> Result<RunReport, CliError> {
    let f = cfg.falsification()?;
    let sim = cfg.simulation.as_ref();
    let horizon = f
        .horizon
        .or(sim.map(|s| s.horizon))
        .ok_or_else(|| CliError::Config("falsify needs a horizon (falsification or simulation block)".into()))?;
    let ranges = FalsifyRanges {
        trials: f.trials,
        x0_max: f.x0_max,
        u_max: f.u_max,
        input_pieces: f.input_pieces,
        zero_input_every: f.zero_input_every,
        t0: sim.map_or(0.0, |s| s.t0),
        horizon,
        step: f.step.or(sim.map(|s| s.step)).unwrap_or(1e-3),
        sequences: f.sequences.clone(),
    };
    let mut rep = RunReport::new("falsify", &cfg.text, seed);
    // trial sequences are admitted one by one inside the falsifier
    let Some(bg) = certified_bound(cfg, &mut rep, None)? else {
        rep.note("no certificate: the dwell-time condition fails, so there is no bound to falsify");
        return Ok(rep);
    };
    let report = check_iss_bound_parallel(&cfg.system, &bg, &ranges, seed)?;
    rep.emit(out, "trials.csv", &trials_csv(&report.trials))?;
    let mut summary = format!(
        "{} trials, {} violations at tolerance {:e}",
        report.trials.len(),
        report.violations.len(),
        report.tolerance
    );
    if let Some(w) = report.worst() {
        summary.push_str(&format!(
            "\nworst trial {}: ratio {} at t = {}{}",
            w.trial,
            w.max_ratio,
            w.arg_t,
            if w.blow_up { " (blow-up)" } else { "" }
        ));
    }
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|v| json!({ "trial": v.trial, "time": v.time, "ratio": v.ratio }))
        .collect();
    rep.push(Verdict::new(
        "iss-bound",
        report.pass,
        summary,
        json!({
            "trials": report.trials.len(),
            "tolerance": report.tolerance,
            "violations": violations,
            "worst_ratio": report.worst().map(|w| w.max_ratio),
        }),
    ));
    Ok(rep)
}
