//! Candidate ISS-Lyapunov functions and sampled audits of their defining
//! inequalities:
//!
//! * sandwich: `ψ₁(|x|) ≤ V(x) ≤ ψ₂(|x|)`;
//! * implication: whenever `V(x) ≥ χ(|u|)`, both `∇V(x)·f(x,u) ≤ −φ(V(x))`
//!   and `V(g(x,u)) ≤ α(V(x))`.
//!
//! Audits refute or fail to refute; they never prove.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::comparison::{FunctionClass, MonotoneFunction};
use crate::error::{invalid, Error, Result};
use crate::expr::{BinOp, Compiled, Expr, Func};
use crate::random;
use crate::system::{norm, variable_names, ImpulsiveSystem};

/// Additive slack of every audited inequality, scaled by `max(1, |rhs|)`.
pub const AUDIT_TOL: f64 = 1e-9;
/// Reports skipping more than this fraction of samples carry a warning.
pub const SKIP_WARN_FRACTION: f64 = 0.01;
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateKind {
    /// Decay rate `φ` (positive definite) and jump envelope `α`.
    General { phi: MonotoneFunction, alpha: MonotoneFunction },
    /// `φ(s) = c·s`, `α(s) = e^{−d}·s`.
    Exponential { c: f64, d: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ISSLyapunovCandidate {
    n: usize,
    v: Expr,
    v_compiled: Compiled,
    psi1: MonotoneFunction,
    psi2: MonotoneFunction,
    chi: MonotoneFunction,
    kind: CandidateKind,
}

impl ISSLyapunovCandidate {
    /// `v` may use the state variables `x1..xn` only.
    pub fn new(
        n: usize,
        v: Expr,
        psi1: MonotoneFunction,
        psi2: MonotoneFunction,
        chi: MonotoneFunction,
        kind: CandidateKind,
    ) -> Result<Self> {
        if n == 0 {
            return Err(invalid("state dimension must be positive"));
        }
        if let CandidateKind::Exponential { c, d } = kind {
            if !c.is_finite() || !d.is_finite() {
                return Err(invalid("rate coefficients must be finite"));
            }
        }
        let names = variable_names(n, 0);
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let v_compiled = Compiled::new(&v, &names)?;
        Ok(ISSLyapunovCandidate { n, v, v_compiled, psi1, psi2, chi, kind })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn v_expr(&self) -> &Expr {
        &self.v
    }

    pub fn psi1(&self) -> &MonotoneFunction {
        &self.psi1
    }

    pub fn psi2(&self) -> &MonotoneFunction {
        &self.psi2
    }

    pub fn chi(&self) -> &MonotoneFunction {
        &self.chi
    }

    pub fn kind(&self) -> &CandidateKind {
        &self.kind
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self.kind, CandidateKind::Exponential { .. })
    }

    /// `V(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.v_compiled.eval(x)
    }

    /// `φ(s)`.
    pub fn phi(&self, s: f64) -> Result<f64> {
        match &self.kind {
            CandidateKind::General { phi, .. } => phi.eval(s),
            CandidateKind::Exponential { c, .. } => Ok(c * s),
        }
    }

    /// `α(s)`.
    pub fn alpha(&self, s: f64) -> Result<f64> {
        match &self.kind {
            CandidateKind::General { alpha, .. } => alpha.eval(s),
            CandidateKind::Exponential { d, .. } => Ok(libm::exp(-d) * s),
        }
    }

    /// `φ` as a comparison function; synthesized as `c*s` for the
    /// exponential kind.
    pub fn phi_function(&self) -> Result<MonotoneFunction> {
        match &self.kind {
            CandidateKind::General { phi, .. } => Ok(phi.clone()),
            CandidateKind::Exponential { c, .. } => MonotoneFunction::new(
                Expr::binary(BinOp::Mul, Expr::num(*c), Expr::var("s")),
                FunctionClass::PositiveDefinite,
            ),
        }
    }

    /// `α` as a comparison function; synthesized as `exp(-d)*s` for the
    /// exponential kind.
    pub fn alpha_function(&self) -> Result<MonotoneFunction> {
        match &self.kind {
            CandidateKind::General { alpha, .. } => Ok(alpha.clone()),
            CandidateKind::Exponential { d, .. } => MonotoneFunction::new(
                Expr::binary(
                    BinOp::Mul,
                    Expr::Call(Func::Exp, alloc::vec![Expr::neg(Expr::num(*d))]),
                    Expr::var("s"),
                ),
                FunctionClass::PositiveDefinite,
            ),
        }
    }

    /// The same certificate with `φ` and `α` written out as expressions.
    pub fn to_general(&self) -> Result<Self> {
        Ok(ISSLyapunovCandidate {
            kind: CandidateKind::General { phi: self.phi_function()?, alpha: self.alpha_function()? },
            ..self.clone()
        })
    }

    /// `(c, d)` of an exponential certificate.
    pub fn exponential_rates(&self) -> Result<(f64, f64)> {
        match self.kind {
            CandidateKind::Exponential { c, d } => Ok((c, d)),
            CandidateKind::General { .. } => Err(invalid("candidate is not exponential")),
        }
    }

    /// First grid point where `ψ₁(r) > ψ₂(r)`, which makes the sandwich
    /// unsatisfiable.
    pub fn psi_order_violation(&self, grid: &[f64]) -> Result<Option<f64>> {
        for &r in grid {
            let (a, b) = (self.psi1.eval(r)?, self.psi2.eval(r)?);
            if a > b + slack(b) {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }
}

pub fn slack(rhs: f64) -> f64 {
    AUDIT_TOL * rhs.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// `ψ₁(|x|) ≤ V(x)`
    SandwichLower,
    /// `V(x) ≤ ψ₂(|x|)`
    SandwichUpper,
    /// `∇V·f(x,u) ≤ −φ(V(x))`
    FlowDecay,
    /// `V(g(x,u)) ≤ α(V(x))`
    JumpEnvelope,
}

impl Inequality {
    pub fn name(self) -> &'static str {
        match self {
            Inequality::SandwichLower => "psi1(|x|) <= V(x)",
            Inequality::SandwichUpper => "V(x) <= psi2(|x|)",
            Inequality::FlowDecay => "gradV.f(x,u) <= -phi(V(x))",
            Inequality::JumpEnvelope => "V(g(x,u)) <= alpha(V(x))",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    pub index: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub inequality: Inequality,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub samples: usize,
    pub violations: Vec<AuditViolation>,
    /// Samples whose `∇V` hit a kink of `abs`/`min`/`max`.
    pub skipped_nonsmooth: usize,
    /// Implication samples with `V(x) < χ(|u|)`.
    pub vacuous: usize,
    pub seed: Option<u64>,
    pub pass: bool,
}

impl AuditReport {
    fn finish(samples: usize, violations: Vec<AuditViolation>, skipped: usize, vacuous: usize) -> Self {
        AuditReport {
            samples,
            pass: violations.is_empty(),
            violations,
            skipped_nonsmooth: skipped,
            vacuous,
            seed: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn skip_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.skipped_nonsmooth as f64 / self.samples as f64
        }
    }

    pub fn warns(&self) -> bool {
        self.skip_fraction() > SKIP_WARN_FRACTION
    }
}

fn at_sample<T>(index: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Sample { index, source: Box::new(e) })
}

/// Checks `ψ₁(|x|) ≤ V(x) ≤ ψ₂(|x|)` at every sample.
pub fn check_sandwich(cand: &ISSLyapunovCandidate, states: &[Vec<f64>]) -> Result<AuditReport> {
    if states.is_empty() {
        return Err(invalid("no samples to audit"));
    }
    let mut violations = Vec::new();
    for (index, x) in states.iter().enumerate() {
        if x.len() != cand.n {
            return Err(invalid("sample has the wrong state dimension"));
        }
        let r = norm(x);
        let v = at_sample(index, cand.value(x))?;
        let lo = at_sample(index, cand.psi1.eval(r))?;
        let hi = at_sample(index, cand.psi2.eval(r))?;
        for (inequality, lhs, rhs) in
            [(Inequality::SandwichLower, lo, v), (Inequality::SandwichUpper, v, hi)]
        {
            if !(lhs <= rhs + slack(rhs)) {
                violations.push(AuditViolation {
                    index,
                    x: x.clone(),
                    u: Vec::new(),
                    inequality,
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(AuditReport::finish(states.len(), violations, 0, 0))
}

/// Checks the implication form at every `(x, u)` sample. Samples below the
/// gain (`V(x) < χ(|u|)`) pass vacuously; samples where `∇V` is evaluated
/// at a kink are skipped and counted.
pub fn check_implication(
    cand: &ISSLyapunovCandidate,
    sys: &ImpulsiveSystem,
    samples: &[(Vec<f64>, Vec<f64>)],
) -> Result<AuditReport> {
    if samples.is_empty() {
        return Err(invalid("no samples to audit"));
    }
    if sys.state_dim() != cand.n {
        return Err(invalid("candidate and system state dimensions differ"));
    }
    let mut violations = Vec::new();
    let (mut skipped, mut vacuous) = (0, 0);
    for (index, (x, u)) in samples.iter().enumerate() {
        if x.len() != sys.state_dim() || u.len() != sys.input_dim() {
            return Err(invalid("sample has the wrong dimension"));
        }
        let v = at_sample(index, cand.value(x))?;
        let gain = at_sample(index, cand.chi.eval(norm(u)))?;
        if v < gain {
            vacuous += 1;
            continue;
        }
        let f = at_sample(index, sys.flow(x, u))?;
        let dv = at_sample(index, cand.v_compiled.eval_directional(x, &f))?;
        if dv.nonsmooth {
            skipped += 1;
            continue;
        }
        let decay = -at_sample(index, cand.phi(v))?;
        if !(dv.derivative <= decay + slack(decay)) {
            violations.push(AuditViolation {
                index,
                x: x.clone(),
                u: u.clone(),
                inequality: Inequality::FlowDecay,
                lhs: dv.derivative,
                rhs: decay,
            });
        }
        let g = at_sample(index, sys.jump(x, u))?;
        let vg = at_sample(index, cand.value(&g))?;
        let bound = at_sample(index, cand.alpha(v))?;
        if !(vg <= bound + slack(bound)) {
            violations.push(AuditViolation {
                index,
                x: x.clone(),
                u: u.clone(),
                inequality: Inequality::JumpEnvelope,
                lhs: vg,
                rhs: bound,
            });
        }
    }
    Ok(AuditReport::finish(samples.len(), violations, skipped, vacuous))
}

/// Radial ranges of the default audit sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRanges {
    pub x_min: f64,
    pub x_max: f64,
    /// `|u|` is drawn log-uniformly from `[u_min, u_max]`.
    pub u_min: f64,
    pub u_max: f64,
    /// Every `zero_input_every`-th sample has `u = 0` (0 disables).
    pub zero_input_every: usize,
}

impl Default for SampleRanges {
    fn default() -> Self {
        SampleRanges { x_min: 1e-6, x_max: 1e3, u_min: 1e-6, u_max: 1e3, zero_input_every: 10 }
    }
}

/// Log-radially distributed states with uniformly random directions.
pub fn sample_states(n: usize, count: usize, ranges: &SampleRanges, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = random::rng(seed);
    (0..count)
        .map(|_| {
            let r = random::log_uniform(&mut rng, ranges.x_min, ranges.x_max);
            random::scaled(&random::unit_direction(&mut rng, n), r)
        })
        .collect()
}

/// State/input pairs, both log-radial, with a share of zero inputs.
pub fn sample_pairs(
    n: usize,
    m: usize,
    count: usize,
    ranges: &SampleRanges,
    seed: u64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = random::rng(seed);
    (0..count)
        .map(|i| {
            let r = random::log_uniform(&mut rng, ranges.x_min, ranges.x_max);
            let x = random::scaled(&random::unit_direction(&mut rng, n), r);
            let zero = m == 0
                || ranges.u_max <= 0.0
                || (ranges.zero_input_every > 0 && i % ranges.zero_input_every == 0);
            let u = if zero {
                alloc::vec![0.0; m]
            } else {
                let s = random::log_uniform(&mut rng, ranges.u_min.min(ranges.u_max), ranges.u_max);
                random::scaled(&random::unit_direction(&mut rng, m), s)
            };
            (x, u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparison::FunctionClass::*;
    use crate::expr::parse_expression;

    fn mf(s: &str, c: FunctionClass) -> MonotoneFunction {
        MonotoneFunction::parse(s, c).unwrap()
    }

    fn cand(v: &str, psi1: &str, psi2: &str, chi: &str, kind: CandidateKind) -> ISSLyapunovCandidate {
        ISSLyapunovCandidate::new(
            1,
            parse_expression(v).unwrap(),
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

    #[test]
    fn sandwich_examples() {
        let states = sample_states(1, 2000, &SampleRanges::default(), 1);
        let c = cand("abs(x1)", "r", "r", "r", general("s", "s"));
        assert!(check_sandwich(&c, &states).unwrap().pass);
        let c = cand("x1^2", "r^2/2", "2*r^2", "r", general("s", "s"));
        assert!(check_sandwich(&c, &states).unwrap().pass);
        let c = cand("x1^2", "r^3", "2*r^2", "r", general("s", "s"));
        let rep = check_sandwich(&c, &states).unwrap();
        assert!(!rep.pass);
        let first = &rep.violations[0];
        assert_eq!(first.inequality, Inequality::SandwichLower);
        assert!(first.x[0].abs() > 1.0);
    }

    #[test]
    fn implication_examples() {
        let sys = ImpulsiveSystem::parse(1, 1, &["-x1"], &["x1"]).unwrap();
        // below |x| ~ 3e-5 the gap x² is inside the audit slack
        let ranges = SampleRanges { x_min: 1e-3, ..SampleRanges::default() };
        let samples: Vec<_> =
            sample_states(1, 1000, &ranges, 2).into_iter().map(|x| (x, alloc::vec![0.0])).collect();
        let ok = cand("x1^2", "r^2", "r^2", "r", general("s", "s"));
        assert!(check_implication(&ok, &sys, &samples).unwrap().pass);
        let bad = cand("x1^2", "r^2", "r^2", "r", general("3*s", "s"));
        let rep = check_implication(&bad, &sys, &samples).unwrap();
        assert_eq!(rep.violations.len(), samples.len());
        assert!(rep.violations.iter().all(|v| v.inequality == Inequality::FlowDecay));
    }

    #[test]
    fn cubic_example_certificate_passes() {
        let sys = ImpulsiveSystem::parse(1, 1, &["-x1^3 + u1"], &["x1 + x1^3 + u1"]).unwrap();
        let c = cand(
            "abs(x1)",
            "r",
            "r",
            "(r/(1/3))^(1/3)",
            general("(1 - 1/3)*s^3", "s + (1 + 1/3)*s^3"),
        );
        let ranges = SampleRanges { x_min: 1e-6, x_max: 10.0, u_min: 1e-6, u_max: 10.0, zero_input_every: 10 };
        let samples = sample_pairs(1, 1, 10_000, &ranges, 42);
        let rep = check_implication(&c, &sys, &samples).unwrap();
        assert!(rep.pass, "{:?}", rep.violations.first());
        assert_eq!(rep.skipped_nonsmooth, 0);
        assert!(rep.vacuous > 0 && rep.vacuous < samples.len());
    }

    #[test]
    fn kink_samples_are_skipped_and_counted() {
        let sys = ImpulsiveSystem::parse(1, 1, &["-x1"], &["x1"]).unwrap();
        let c = cand("abs(x1)", "r", "r", "r", general("s", "s"));
        let samples = alloc::vec![(alloc::vec![0.0], alloc::vec![0.0]), (alloc::vec![1.0], alloc::vec![0.0])];
        let rep = check_implication(&c, &sys, &samples).unwrap();
        assert_eq!(rep.skipped_nonsmooth, 1);
        assert!(rep.warns());
        assert!(rep.pass);
    }

    #[test]
    fn exponential_rates_examples() {
        let e = cand("abs(x1)", "r", "r", "r", CandidateKind::Exponential { c: 1.0, d: 0.5 });
        assert_eq!(e.exponential_rates().unwrap(), (1.0, 0.5));
        let ln2 = core::f64::consts::LN_2;
        let e = cand("abs(x1)", "r", "r", "r", CandidateKind::Exponential { c: -0.2, d: -ln2 });
        assert_eq!(e.exponential_rates().unwrap(), (-0.2, -ln2));
        assert!((e.alpha(1.0).unwrap() - 2.0).abs() < 1e-15);
        let g = cand("abs(x1)", "r", "r", "r", general("s", "s"));
        let err = g.exponential_rates().unwrap_err();
        assert!(alloc::format!("{err}").contains("not exponential"));
    }

    #[test]
    fn evaluation_errors_name_the_sample() {
        let c = cand("ln(x1)", "r", "r", "r", general("s", "s"));
        let e = check_sandwich(&c, &[alloc::vec![1.0], alloc::vec![-1.0]]).unwrap_err();
        assert!(matches!(e, Error::Sample { index: 1, .. }));
    }

    #[test]
    fn psi_order() {
        let c = cand("x1^2", "2*r", "r", "r", general("s", "s"));
        assert_eq!(c.psi_order_violation(&[0.0, 0.5, 1.0]).unwrap(), Some(0.5));
    }

    #[test]
    fn sampler_is_deterministic_and_in_range() {
        let r = SampleRanges::default();
        let a = sample_pairs(3, 2, 500, &r, 9);
        assert_eq!(a, sample_pairs(3, 2, 500, &r, 9));
        for (i, (x, u)) in a.iter().enumerate() {
            let nx = norm(x);
            assert!(nx >= r.x_min * (1.0 - 1e-12) && nx <= r.x_max * (1.0 + 1e-12));
            if i % 10 == 0 {
                assert_eq!(norm(u), 0.0);
            } else {
                assert!(norm(u) <= r.u_max * (1.0 + 1e-12));
            }
        }
    }
}
