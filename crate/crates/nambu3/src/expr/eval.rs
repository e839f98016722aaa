//! Numeric evaluation of expressions at phase-space points.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BinOp, Expr, UnaryFn, Var};

/// A point of extended phase space together with parameter bindings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub t: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl Point {
    pub fn new(x1: f64, x2: f64, x3: f64, t: f64) -> Point {
        Point {
            x1,
            x2,
            x3,
            t,
            params: BTreeMap::new(),
        }
    }

    pub fn coords(&self) -> [f64; 3] {
        [self.x1, self.x2, self.x3]
    }

    pub fn with_coords(&self, coords: [f64; 3]) -> Point {
        Point {
            x1: coords[0],
            x2: coords[1],
            x3: coords[2],
            t: self.t,
            params: self.params.clone(),
        }
    }

    pub fn with_t(mut self, t: f64) -> Point {
        self.t = t;
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Point {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.x3.is_finite() && self.t.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("parameter `{0}` is not bound at the evaluation point")]
    UnboundParameter(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} of non-positive argument {arg}")]
    LogDomain { func: &'static str, arg: f64 },
    #[error("square root of negative argument {arg}")]
    SqrtDomain { arg: f64 },
    #[error("power {base}^{exponent} with non-integer exponent and non-positive base")]
    PowDomain { base: f64, exponent: f64 },
    #[error("evaluation produced a non-finite value")]
    NonFinite,
}

impl EvalError {
    /// Errors that depend on the sample point and go away elsewhere in the
    /// domain; equivalence sampling resamples on these.
    pub fn is_domain_violation(&self) -> bool {
        !matches!(self, EvalError::UnboundParameter(_))
    }
}

pub fn eval(e: &Expr, p: &Point) -> Result<f64, EvalError> {
    let v = eval_inner(e, p)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn eval_inner(e: &Expr, p: &Point) -> Result<f64, EvalError> {
    match e {
        Expr::Num(v) => Ok(*v),
        Expr::Var(Var::X1) => Ok(p.x1),
        Expr::Var(Var::X2) => Ok(p.x2),
        Expr::Var(Var::X3) => Ok(p.x3),
        Expr::Var(Var::T) => Ok(p.t),
        Expr::Param(name) => p
            .params
            .get(name)
            .copied()
            .ok_or_else(|| EvalError::UnboundParameter(name.clone())),
        Expr::Unary(f, a) => {
            let v = eval_inner(a, p)?;
            match f {
                UnaryFn::Neg => Ok(-v),
                UnaryFn::Sin => Ok(v.sin()),
                UnaryFn::Cos => Ok(v.cos()),
                UnaryFn::Tan => Ok(v.tan()),
                UnaryFn::Atan => Ok(v.atan()),
                UnaryFn::Exp => Ok(v.exp()),
                UnaryFn::Ln => {
                    if v <= 0.0 {
                        Err(EvalError::LogDomain { func: "ln", arg: v })
                    } else {
                        Ok(v.ln())
                    }
                }
                UnaryFn::Sqrt => {
                    if v < 0.0 {
                        Err(EvalError::SqrtDomain { arg: v })
                    } else {
                        Ok(v.sqrt())
                    }
                }
            }
        }
        Expr::Binary(op, a, b) => {
            let x = eval_inner(a, p)?;
            let y = eval_inner(b, p)?;
            match op {
                BinOp::Add => Ok(x + y),
                BinOp::Sub => Ok(x - y),
                BinOp::Mul => Ok(x * y),
                BinOp::Div => {
                    if y == 0.0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        Ok(x / y)
                    }
                }
                BinOp::Pow => pow_value(x, y),
            }
        }
    }
}

/// Power semantics: integer exponents work for any base (except 0 with a
/// negative exponent); fractional exponents require a positive base.
pub(crate) fn pow_value(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if exponent == exponent.trunc() && exponent.abs() <= 2_147_483_647.0 {
        if base == 0.0 && exponent < 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        return Ok(base.powi(exponent as i32));
    }
    if base > 0.0 {
        Ok(base.powf(exponent))
    } else {
        Err(EvalError::PowDomain { base, exponent })
    }
}
