use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::{BinOp, Expr, Func};
use crate::error::{Error, Result};

/// Variable assignment used by [`Expr::evaluate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.insert(name, value);
        self
    }

    pub fn insert(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.values().copied()
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (&'a str, f64)>>(iter: I) -> Self {
        let mut b = Bindings::new();
        for (k, v) in iter {
            b.insert(k, v);
        }
        b
    }
}

/// Value and partial derivatives from forward-mode differentiation.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Set when `abs`, `min` or `max` was evaluated exactly at its kink; the
    /// derivative is then the right-hand one.
    pub nonsmooth: bool,
}

/// Value and one directional derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Directional {
    pub value: f64,
    pub derivative: f64,
    pub nonsmooth: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Slot(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call1(Func, Box<Node>),
    Call2(Func, Box<Node>, Box<Node>),
}

/// An expression with variables resolved to positions in a slot vector.
///
/// Compile once and evaluate many times; this is the path used by the
/// integrator and the samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct Compiled {
    root: Node,
    vars: Vec<String>,
}

fn lower(e: &Expr, vars: &[String]) -> Result<Node> {
    Ok(match e {
        Expr::Num(v) => Node::Num(*v),
        Expr::Var(name) => Node::Slot(
            vars.iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::UnboundVariable(name.clone()))?,
        ),
        Expr::Neg(inner) => Node::Neg(Box::new(lower(inner, vars)?)),
        Expr::Binary(op, l, r) => {
            Node::Binary(*op, Box::new(lower(l, vars)?), Box::new(lower(r, vars)?))
        }
        Expr::Call(f, args) => match args.as_slice() {
            [a] => Node::Call1(*f, Box::new(lower(a, vars)?)),
            [a, b] => Node::Call2(*f, Box::new(lower(a, vars)?), Box::new(lower(b, vars)?)),
            _ => {
                return Err(Error::Arity {
                    name: f.name().into(),
                    expected: f.arity(),
                    found: args.len(),
                })
            }
        },
    })
}

fn domain(operation: &'static str, argument: f64) -> Error {
    Error::Domain { operation, argument }
}

fn is_integer(v: f64) -> bool {
    libm::floor(v) == v
}

fn pow_value(a: f64, b: f64) -> Result<f64> {
    if a < 0.0 && !is_integer(b) {
        return Err(domain("pow with negative base and non-integer exponent", a));
    }
    if a == 0.0 && b < 0.0 {
        return Err(domain("division by zero in pow", a));
    }
    Ok(libm::pow(a, b))
}

fn eval_value(n: &Node, slots: &[f64]) -> Result<f64> {
    Ok(match n {
        Node::Num(v) => *v,
        Node::Slot(i) => slots[*i],
        Node::Neg(a) => -eval_value(a, slots)?,
        Node::Binary(op, l, r) => {
            let a = eval_value(l, slots)?;
            let b = eval_value(r, slots)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(domain("division by zero", a));
                    }
                    a / b
                }
                BinOp::Pow => pow_value(a, b)?,
            }
        }
        Node::Call1(f, a) => {
            let a = eval_value(a, slots)?;
            match f {
                Func::Abs => libm::fabs(a),
                Func::Exp => libm::exp(a),
                Func::Ln => {
                    if a <= 0.0 {
                        return Err(domain("ln", a));
                    }
                    libm::log(a)
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(domain("sqrt", a));
                    }
                    libm::sqrt(a)
                }
                Func::Sin => libm::sin(a),
                Func::Cos => libm::cos(a),
                Func::Tanh => libm::tanh(a),
                Func::Min | Func::Max | Func::Pow => unreachable!("binary function in unary node"),
            }
        }
        Node::Call2(f, a, b) => {
            let a = eval_value(a, slots)?;
            let b = eval_value(b, slots)?;
            match f {
                Func::Min => a.min(b),
                Func::Max => a.max(b),
                Func::Pow => pow_value(a, b)?,
                _ => unreachable!("unary function in binary node"),
            }
        }
    })
}

#[derive(Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

fn pow_dual(a: Dual, b: Dual) -> Result<Dual> {
    let v = pow_value(a.v, b.v)?;
    let mut d = 0.0;
    if a.d != 0.0 {
        d += if b.v == 0.0 {
            0.0
        } else if a.v == 0.0 && b.v < 1.0 {
            // vertical tangent, e.g. the cube root at zero
            libm::copysign(f64::INFINITY, b.v * a.d)
        } else {
            b.v * pow_value(a.v, b.v - 1.0)? * a.d
        };
    }
    if b.d != 0.0 {
        if a.v > 0.0 {
            d += v * libm::log(a.v) * b.d;
        } else if a.v < 0.0 {
            // undefined for a negative base; the value is still reported
            d = f64::NAN;
        }
    }
    Ok(Dual { v, d })
}

fn eval_dual(n: &Node, slots: &[f64], tangent: &[f64], kink: &mut bool) -> Result<Dual> {
    Ok(match n {
        Node::Num(v) => Dual { v: *v, d: 0.0 },
        Node::Slot(i) => Dual { v: slots[*i], d: tangent[*i] },
        Node::Neg(a) => {
            let a = eval_dual(a, slots, tangent, kink)?;
            Dual { v: -a.v, d: -a.d }
        }
        Node::Binary(op, l, r) => {
            let a = eval_dual(l, slots, tangent, kink)?;
            let b = eval_dual(r, slots, tangent, kink)?;
            match op {
                BinOp::Add => Dual { v: a.v + b.v, d: a.d + b.d },
                BinOp::Sub => Dual { v: a.v - b.v, d: a.d - b.d },
                BinOp::Mul => Dual { v: a.v * b.v, d: a.d * b.v + a.v * b.d },
                BinOp::Div => {
                    if b.v == 0.0 {
                        return Err(domain("division by zero", a.v));
                    }
                    Dual { v: a.v / b.v, d: (a.d * b.v - a.v * b.d) / (b.v * b.v) }
                }
                BinOp::Pow => pow_dual(a, b)?,
            }
        }
        Node::Call1(f, a) => {
            let a = eval_dual(a, slots, tangent, kink)?;
            match f {
                Func::Abs => {
                    if a.v > 0.0 {
                        a
                    } else if a.v < 0.0 {
                        Dual { v: -a.v, d: -a.d }
                    } else {
                        *kink = true;
                        Dual { v: 0.0, d: libm::fabs(a.d) }
                    }
                }
                Func::Exp => {
                    let e = libm::exp(a.v);
                    Dual { v: e, d: e * a.d }
                }
                Func::Ln => {
                    if a.v <= 0.0 {
                        return Err(domain("ln", a.v));
                    }
                    Dual { v: libm::log(a.v), d: a.d / a.v }
                }
                Func::Sqrt => {
                    if a.v < 0.0 {
                        return Err(domain("sqrt", a.v));
                    }
                    let s = libm::sqrt(a.v);
                    let d = if a.d == 0.0 { 0.0 } else { a.d / (2.0 * s) };
                    Dual { v: s, d }
                }
                Func::Sin => Dual { v: libm::sin(a.v), d: libm::cos(a.v) * a.d },
                Func::Cos => Dual { v: libm::cos(a.v), d: -libm::sin(a.v) * a.d },
                Func::Tanh => {
                    let t = libm::tanh(a.v);
                    Dual { v: t, d: (1.0 - t * t) * a.d }
                }
                Func::Min | Func::Max | Func::Pow => unreachable!("binary function in unary node"),
            }
        }
        Node::Call2(f, a, b) => {
            let a = eval_dual(a, slots, tangent, kink)?;
            let b = eval_dual(b, slots, tangent, kink)?;
            match f {
                Func::Pow => pow_dual(a, b)?,
                Func::Min | Func::Max => {
                    let want_min = *f == Func::Min;
                    if a.v == b.v {
                        *kink = true;
                        let d = if want_min { a.d.min(b.d) } else { a.d.max(b.d) };
                        Dual { v: a.v, d }
                    } else if (a.v < b.v) == want_min {
                        a
                    } else {
                        b
                    }
                }
                _ => unreachable!("unary function in binary node"),
            }
        }
    })
}

impl Compiled {
    /// Resolves every variable of `expr` against `vars`; the slot of a
    /// variable is its index in `vars`.
    pub fn new(expr: &Expr, vars: &[&str]) -> Result<Compiled> {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        Ok(Compiled { root: lower(expr, &vars)?, vars })
    }

    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    pub fn slot_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn eval(&self, slots: &[f64]) -> Result<f64> {
        debug_assert_eq!(slots.len(), self.vars.len());
        eval_value(&self.root, slots)
    }

    /// Value and derivative along `tangent` (one forward pass).
    pub fn eval_directional(&self, slots: &[f64], tangent: &[f64]) -> Result<Directional> {
        debug_assert_eq!(tangent.len(), self.vars.len());
        let mut nonsmooth = false;
        let d = eval_dual(&self.root, slots, tangent, &mut nonsmooth)?;
        Ok(Directional { value: d.v, derivative: d.d, nonsmooth })
    }

    /// Value and partials with respect to the given slots.
    pub fn gradient(&self, slots: &[f64], wrt: &[usize]) -> Result<Gradient> {
        let mut tangent = alloc::vec![0.0; slots.len()];
        let mut gradient = Vec::with_capacity(wrt.len());
        let mut nonsmooth = false;
        let value = self.eval(slots)?;
        for &slot in wrt {
            tangent[slot] = 1.0;
            let d = eval_dual(&self.root, slots, &tangent, &mut nonsmooth)?;
            tangent[slot] = 0.0;
            gradient.push(d.d);
        }
        Ok(Gradient { value, gradient, nonsmooth })
    }
}

impl Expr {
    /// Evaluates in binary64. Every free variable must be bound.
    pub fn evaluate(&self, env: &Bindings) -> Result<f64> {
        let names: Vec<&str> = env.names().collect();
        let values: Vec<f64> = env.values().collect();
        Compiled::new(self, &names)?.eval(&values)
    }

    /// Value plus exact forward-mode partials with respect to `wrt`.
    pub fn evaluate_with_gradient(&self, env: &Bindings, wrt: &[&str]) -> Result<Gradient> {
        let names: Vec<&str> = env.names().collect();
        let values: Vec<f64> = env.values().collect();
        let compiled = Compiled::new(self, &names)?;
        let slots = wrt
            .iter()
            .map(|w| compiled.slot_of(w).ok_or_else(|| Error::UnboundVariable((*w).into())))
            .collect::<Result<Vec<_>>>()?;
        compiled.gradient(&values, &slots)
    }
}
