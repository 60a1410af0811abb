//! Impulsive systems `ẋ = f(x, u)` between impulses and
//! `x(t) = g(x⁻(t), u⁻(t))` at impulse times, their inputs and impulse
//! sequences, and a fixed-step hybrid integrator.

mod input;
mod sequence;
mod simulate;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub use input::{norm, InputSignal};
pub use sequence::ImpulseSequence;
pub use simulate::{simulate, HybridTrajectory, Jump, Segment, TrajectoryPoint, BLOW_UP_NORM};

use crate::error::{invalid, Result};
use crate::expr::{parse_expression, Compiled, Expr};

/// Tolerance of the equilibrium check `f(0,0) = 0`, `g(0,0) = 0`.
pub const EQUILIBRIUM_TOL: f64 = 1e-12;

/// `x1..xn` followed by `u1..um`: the slot layout of flow and jump maps.
pub fn variable_names(n: usize, m: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("x{i}"))
        .chain((1..=m).map(|j| format!("u{j}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulsiveSystem {
    n: usize,
    m: usize,
    flow_exprs: Vec<Expr>,
    jump_exprs: Vec<Expr>,
    flow: Vec<Compiled>,
    jump: Vec<Compiled>,
}

impl ImpulsiveSystem {
    pub fn new(n: usize, m: usize, flow: Vec<Expr>, jump: Vec<Expr>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("state dimension must be positive"));
        }
        if flow.len() != n || jump.len() != n {
            return Err(invalid(format!(
                "expected {n} flow and {n} jump expressions, found {} and {}",
                flow.len(),
                jump.len()
            )));
        }
        let names = variable_names(n, m);
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let compile = |es: &[Expr]| -> Result<Vec<Compiled>> {
            es.iter().map(|e| Compiled::new(e, &names)).collect()
        };
        Ok(ImpulsiveSystem {
            n,
            m,
            flow: compile(&flow)?,
            jump: compile(&jump)?,
            flow_exprs: flow,
            jump_exprs: jump,
        })
    }

    pub fn parse(n: usize, m: usize, flow: &[&str], jump: &[&str]) -> Result<Self> {
        let p = |xs: &[&str]| xs.iter().map(|s| parse_expression(s)).collect::<Result<Vec<_>>>();
        Self::new(n, m, p(flow)?, p(jump)?)
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn flow_exprs(&self) -> &[Expr] {
        &self.flow_exprs
    }

    pub fn jump_exprs(&self) -> &[Expr] {
        &self.jump_exprs
    }

    pub(crate) fn flow_compiled(&self) -> &[Compiled] {
        &self.flow
    }

    fn slots(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.n + self.m);
        s.extend_from_slice(x);
        s.extend_from_slice(u);
        s
    }

    /// `f(x, u)`.
    pub fn flow(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let s = self.slots(x, u);
        self.flow.iter().map(|c| c.eval(&s)).collect()
    }

    /// `g(x, u)`.
    pub fn jump(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let s = self.slots(x, u);
        self.jump.iter().map(|c| c.eval(&s)).collect()
    }

    /// Largest component of `|f(0,0)|` and `|g(0,0)|`.
    pub fn equilibrium_residual(&self) -> Result<f64> {
        let (x, u) = (alloc::vec![0.0; self.n], alloc::vec![0.0; self.m]);
        let f = self.flow(&x, &u)?;
        let g = self.jump(&x, &u)?;
        Ok(f.iter().chain(&g).map(|v| v.abs()).fold(0.0, f64::max))
    }

    pub fn has_equilibrium_at_origin(&self) -> Result<bool> {
        Ok(self.equilibrium_residual()? <= EQUILIBRIUM_TOL)
    }
}
