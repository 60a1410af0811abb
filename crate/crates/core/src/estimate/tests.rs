extern crate std;

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use super::*;
use crate::comparison::FunctionClass::{self, *};
use crate::dwell::{generate_sequence, SequenceKind};
use crate::error::Error;
use crate::expr::parse_expression;
use crate::lyapunov::CandidateKind;
use crate::system::{norm, simulate, ImpulseSequence, ImpulsiveSystem, InputSignal};

fn mf(s: &str, c: FunctionClass) -> MonotoneFunction {
    MonotoneFunction::parse(s, c).unwrap()
}

fn candidate(psi1: &str, psi2: &str, chi: &str, kind: CandidateKind) -> ISSLyapunovCandidate {
    ISSLyapunovCandidate::new(
        1,
        parse_expression("abs(x1)").unwrap(),
        mf(psi1, KInfinity),
        mf(psi2, KInfinity),
        mf(chi, KInfinity),
        kind,
    )
    .unwrap()
}

fn general(phi: &str, alpha: &str) -> CandidateKind {
    CandidateKind::General { phi: mf(phi, PositiveDefinite), alpha: mf(alpha, PositiveDefinite) }
}

/// The cubic example with a₀ = 1/3.
fn cubic() -> (ImpulsiveSystem, ISSLyapunovCandidate) {
    let sys = ImpulsiveSystem::parse(1, 1, &["-x1^3 + u1"], &["x1 + x1^3 + u1"]).unwrap();
    let cand = candidate("r", "r", "(r/(1/3))^(1/3)", general("(1 - 1/3)*s^3", "s + (1 + 1/3)*s^3"));
    (sys, cand)
}

fn tightness() -> (ImpulsiveSystem, ISSLyapunovCandidate) {
    let sys = ImpulsiveSystem::parse(1, 1, &["-x1"], &["exp(0.5)*x1"]).unwrap();
    let cand = candidate("r", "r", "r", CandidateKind::Exponential { c: 1.0, d: -0.5 });
    (sys, cand)
}

#[test]
fn beta_basic_examples() {
    let (_, cand) = cubic();
    let beta = build_beta_fdt(&cand, 2.3, 0.2).unwrap();
    for t in [0.0, 1.0, 10.0, 100.0] {
        assert_eq!(beta.eval(0.0, t).unwrap(), 0.0);
    }
    for r in [1e-3, 0.5, 2.0, 9.0] {
        let b0 = beta.eval(r, 0.0).unwrap();
        let expect = r.max(r + 4.0 / 3.0 * r * r * r);
        assert!((b0 - expect).abs() <= 1e-6 * expect, "{r}: {b0} vs {expect}");
        assert!(b0 >= r);
    }
    assert_eq!(beta.contraction(), Some(0.2));
    // δ' = min(δ, θ)
    assert_eq!(build_beta_fdt(&cand, 0.1, 0.2).unwrap().contraction(), Some(0.1));
}

#[test]
fn gamma_fdt_examples() {
    let (_, cand) = cubic();
    let gamma = build_gamma_fdt(&cand).unwrap();
    assert_eq!(gamma.eval(0.0).unwrap(), 0.0);
    let chi = libm::cbrt(3.0);
    let expect = chi + 4.0 / 3.0 * chi * chi * chi;
    assert!((gamma.eval(1.0).unwrap() - expect).abs() <= 1e-9 * expect);
    assert!(!gamma.perturbed());

    let ident = candidate("r", "r", "2*r", general("s", "s"));
    let g = build_gamma_fdt(&ident).unwrap();
    for r in [0.0, 0.1, 3.0] {
        assert!((g.eval(r).unwrap() - 2.0 * r).abs() <= 1e-12 * r.max(1.0));
    }
    let sq = candidate("r^2", "r^2", "r", general("s", "s"));
    let g = build_gamma_fdt(&sq).unwrap();
    assert!((g.eval(4.0).unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn gamma_perturbation_only_when_degenerate() {
    // chi vanishes on [0, 1]: γ is flat there and gets the εr term
    let flat = candidate("r", "r", "max(r - 1, 0)", general("s", "s"));
    let g = build_gamma_fdt(&flat).unwrap();
    assert!(g.perturbed());
    assert!(g.eval(0.5).unwrap() > 0.0);
}

#[test]
fn gadt_examples() {
    let c = 0.7;
    let cand = candidate("r", "r", "r", CandidateKind::Exponential { c, d: 0.3 });
    let bg = build_beta_gamma_gadt(&cand, GADTEnvelope::new(0.0, c).unwrap()).unwrap();
    for (r, t) in [(1.0, 0.0), (2.0, 1.5), (0.3, 10.0)] {
        let b = bg.beta.eval(r, t).unwrap();
        assert!((b - r * libm::exp(-c * t)).abs() <= 1e-15 * r);
    }
    assert_eq!(bg.gamma.eval(0.0).unwrap(), 0.0);
    let (_, tight) = tightness();
    let bg = build_beta_gamma_gadt(&tight, GADTEnvelope::new(0.5, 0.4).unwrap()).unwrap();
    assert!((bg.gamma.eval(1.0).unwrap() - libm::exp(0.5) * libm::exp(0.5)).abs() < 1e-12);
    assert!((bg.outer_threshold(2.0).unwrap() - 2.0 * libm::exp(1.0)).abs() < 1e-12);
    assert_eq!(bg.inner_threshold(2.0).unwrap(), 2.0);
    assert!(build_beta_gamma_gadt(&tight, GADTEnvelope::new(0.5, 0.0).unwrap()).is_err());
    let (_, general_cand) = cubic();
    assert!(build_beta_gamma_gadt(&general_cand, GADTEnvelope::new(0.5, 0.4).unwrap()).is_err());
}

#[test]
fn beta_monotone_on_grid() {
    let (_, cand) = cubic();
    let fdt = build_fdt(&cand, 2.3, 0.2).unwrap();
    let (_, tight) = tightness();
    let gadt = build_beta_gamma_gadt(&tight, GADTEnvelope::new(0.5, 0.4).unwrap()).unwrap();
    let rs: Vec<f64> = (0..50).map(|i| 0.01 * libm::pow(1.2, i as f64)).collect();
    let ts: Vec<f64> = (0..50).map(|i| i as f64 * 1.1).collect();
    for bg in [&fdt, &gadt] {
        let table: Vec<Vec<f64>> =
            rs.iter().map(|&r| ts.iter().map(|&t| bg.beta.eval(r, t).unwrap()).collect()).collect();
        for i in 0..rs.len() {
            for j in 0..ts.len() {
                if i + 1 < rs.len() {
                    assert!(table[i][j] <= table[i + 1][j], "r monotone at {i},{j}");
                }
                if j + 1 < ts.len() {
                    assert!(table[i][j] >= table[i][j + 1], "t monotone at {i},{j}");
                }
            }
        }
    }
}

#[test]
fn profile_matches_direct_evaluation() {
    let (_, cand) = cubic();
    let beta = build_beta_fdt(&cand, 2.3, 0.2).unwrap();
    let p = beta.profile(3.0, 50.0).unwrap();
    for t in [0.0, 2.29, 2.3, 7.0, 49.9, 50.0] {
        assert!((beta.eval_profile(&p, t).unwrap() - beta.eval(3.0, t).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn exponential_overshoot_allowance() {
    let cand = candidate("r/2", "2*r", "r", CandidateKind::Exponential { c: 1.0, d: -0.5 });
    let bg = build_beta_gamma_gadt(&cand, GADTEnvelope::new(0.3, 0.2).unwrap()).unwrap();
    for r in [1e-3, 1.0, 40.0] {
        let b = bg.beta.eval(r, 0.0).unwrap();
        let lower = 2.0 * libm::exp(0.3) * 2.0 * r;
        assert!((b - lower).abs() <= 1e-9 * lower && b >= r);
    }
}

/// 200 unforced trajectories of the cubic example stay under β̃ at every
/// grid time.
#[test]
fn staircase_dominates_simulated_lyapunov_values() {
    let (sys, cand) = cubic();
    let beta = build_beta_fdt(&cand, 2.3, 0.2).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let zero = InputSignal::zero(0.0, 1);
    for trial in 0..200 {
        let x0 = rng.gen_range(-5.0..5.0);
        let kind = if trial % 2 == 0 {
            SequenceKind::Periodic { tau: 2.3 }
        } else {
            SequenceKind::Jittered { theta: 2.3, extra_max: 1.0 }
        };
        let seq = generate_sequence(kind, 0.0, 25.0, trial).unwrap();
        let traj = simulate(&sys, &[x0], 0.0, &zero, &seq, 25.0, 1e-3).unwrap();
        let v0 = cand.value(&[x0]).unwrap();
        let levels: Vec<f64> = (0..=11).map(|k| beta.level(v0, k as f64 * 2.3 + 1e-9).unwrap()).collect();
        for p in traj.points() {
            let k = libm::floor(p.t / 2.3) as usize;
            let v = cand.value(p.x).unwrap();
            assert!(v <= levels[k] * (1.0 + 1e-9), "trial {trial} t {}: {v} > {}", p.t, levels[k]);
        }
    }
}

#[test]
fn gadt_beta_dominates_tightness_solutions() {
    let (sys, cand) = tightness();
    let bg = build_beta_gamma_gadt(&cand, GADTEnvelope::new(0.5, 0.4).unwrap()).unwrap();
    let seq = generate_sequence(SequenceKind::Periodic { tau: 1.0 }, 0.0, 50.0, 0).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x0 = rng.gen_range(-10.0..10.0);
        let traj = simulate(&sys, &[x0], 0.0, &InputSignal::zero(0.0, 1), &seq, 50.0, 1e-2).unwrap();
        for p in traj.points() {
            let b = bg.beta.eval(libm::fabs(x0), p.t).unwrap();
            assert!(norm(p.x) <= b * (1.0 + 1e-9), "t {}", p.t);
        }
    }
}

fn ranges(sequences: Vec<SequenceKind>, trials: usize, horizon: f64) -> FalsifyRanges {
    FalsifyRanges {
        trials,
        x0_max: 5.0,
        u_max: 1.0,
        input_pieces: 6,
        zero_input_every: 4,
        t0: 0.0,
        horizon,
        step: 1e-3,
        sequences,
    }
}

#[test]
fn falsifier_trivial_and_small_runs() {
    let (sys, cand) = cubic();
    let bg = build_fdt(&cand, 2.3, 0.2).unwrap();
    let mut zero = ranges(vec![SequenceKind::Periodic { tau: 2.3 }], 3, 10.0);
    zero.x0_max = 0.0;
    zero.u_max = 0.0;
    let rep = check_iss_bound(&sys, &bg, &zero, 1).unwrap();
    assert!(rep.pass);
    assert!(rep.trials.iter().all(|t| t.max_ratio == 0.0));

    let r = ranges(
        vec![SequenceKind::Periodic { tau: 2.3 }, SequenceKind::Jittered { theta: 2.3, extra_max: 1.0 }],
        12,
        20.0,
    );
    let rep = check_iss_bound(&sys, &bg, &r, 42).unwrap();
    assert!(rep.pass, "{:?}", rep.violations);
    assert_eq!(rep, check_iss_bound(&sys, &bg, &r, 42).unwrap());
    // the estimate is not vacuous
    assert!(rep.worst().unwrap().max_ratio > 0.05);
    // larger bounds never add violations
    let big = check_iss_bound(&sys, &bg.scaled(3.0), &r, 42).unwrap();
    for (a, b) in rep.trials.iter().zip(&big.trials) {
        assert!(b.max_ratio <= a.max_ratio);
    }
}

#[test]
fn falsifier_rejects_inadmissible_sequences() {
    let (sys, cand) = tightness();
    let bg = build_beta_gamma_gadt(&cand, GADTEnvelope::new(0.5, 0.4).unwrap()).unwrap();
    let r = ranges(vec![SequenceKind::Periodic { tau: 0.4 }], 2, 20.0);
    let e = check_iss_bound(&sys, &bg, &r, 1).unwrap_err();
    assert!(matches!(e, Error::InadmissibleSequence { trial: 0, .. }));
    assert!(alloc::format!("{e}").contains("no admissible certificate"));

    let (sys, cand) = cubic();
    let bg = build_fdt(&cand, 2.3, 0.2).unwrap();
    let r = ranges(vec![SequenceKind::Periodic { tau: 2.0 }], 1, 20.0);
    assert!(matches!(check_iss_bound(&sys, &bg, &r, 1), Err(Error::InadmissibleSequence { .. })));
}

#[test]
fn falsifier_catches_a_wrong_bound() {
    // certificate claims faster decay than the system has
    let sys = ImpulsiveSystem::parse(1, 1, &["-x1"], &["x1"]).unwrap();
    let cand = candidate("r", "r", "r", CandidateKind::Exponential { c: 3.0, d: 1.0 });
    let bg = build_beta_gamma_gadt(&cand, GADTEnvelope::new(0.0, 3.0).unwrap()).unwrap();
    let mut r = ranges(vec![SequenceKind::Periodic { tau: 1.0 }], 4, 5.0);
    r.zero_input_every = 1;
    r.x0_max = 1.0;
    let rep = check_iss_bound(&sys, &bg, &r, 3).unwrap();
    assert!(!rep.pass);
    assert!(rep.violations.iter().all(|v| v.ratio > 1.0));
}

#[test]
fn base_invariance_of_beta() {
    let phi = mf("(2/3)*s^3", PositiveDefinite);
    let a = FTransform::new(phi.clone(), 1.0).unwrap();
    let b = FTransform::new(phi, 0.05).unwrap();
    let mut ya = 10.0;
    let mut yb = 10.0;
    for _ in 0..50 {
        ya = a.zeta(0.2, ya).unwrap().value;
        yb = b.zeta(0.2, yb).unwrap().value;
        assert!((ya - yb).abs() <= 1e-9 * ya);
    }
    let _ = ImpulseSequence::empty(0.0);
}
