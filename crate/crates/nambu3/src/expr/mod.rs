//! Symbolic expressions over the phase variables `x1, x2, x3`, time `t`,
//! and named parameters.
//!
//! Expressions are immutable trees. All operations (parsing, printing,
//! differentiation, evaluation, substitution, simplification) are pure
//! functions, so values can be shared freely across threads.
//!
//! Equality of expressions in the mathematical sense is decided by sampling
//! ([`equiv`]), not by canonical forms; structural `==` only compares trees.

mod calculus;
mod equiv;
mod eval;
mod parse;
mod print;
mod simplify;

#[cfg(test)]
mod tests;

pub use calculus::{det3, diff, jacobian2_det, jacobian3, jacobian3_det};
pub use equiv::{equiv, is_zero_on, zero_sum_check, Domain, EquivError, EquivReport};
pub use eval::{eval, EvalError, Point};
pub use parse::{parse, ParseError};
pub use print::VarNames;
pub use simplify::simplify;

/// Render with the image-side display names `X1, X2, X3`.
pub fn to_text_upper(e: &Expr) -> String {
    print::to_text(e, &VarNames::UPPER)
}

/// Serde helper: expressions serialize as their text form.
pub fn serialize_expr<S: serde::Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

/// Phase-space variable or time.
///
/// Expressions on the image side of a transformation reuse the same four
/// symbols; there `X1, X2, X3` are written with the corresponding lowercase
/// variables and only the printing names differ (see [`VarNames`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X1,
    X2,
    X3,
    T,
}

impl Var {
    pub const COORDS: [Var; 3] = [Var::X1, Var::X2, Var::X3];

    pub fn index(self) -> Option<usize> {
        match self {
            Var::X1 => Some(0),
            Var::X2 => Some(1),
            Var::X3 => Some(2),
            Var::T => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryFn {
    Neg,
    Sin,
    Cos,
    Tan,
    Atan,
    Exp,
    Ln,
    Sqrt,
}

impl UnaryFn {
    /// Function name as it appears in the text grammar; `Neg` has none.
    pub fn name(self) -> Option<&'static str> {
        match self {
            UnaryFn::Neg => None,
            UnaryFn::Sin => Some("sin"),
            UnaryFn::Cos => Some("cos"),
            UnaryFn::Tan => Some("tan"),
            UnaryFn::Atan => Some("atan"),
            UnaryFn::Exp => Some("exp"),
            UnaryFn::Ln => Some("ln"),
            UnaryFn::Sqrt => Some("sqrt"),
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryFn> {
        match name {
            "sin" => Some(UnaryFn::Sin),
            "cos" => Some(UnaryFn::Cos),
            "tan" => Some(UnaryFn::Tan),
            "atan" => Some(UnaryFn::Atan),
            "exp" => Some(UnaryFn::Exp),
            "ln" => Some(UnaryFn::Ln),
            "sqrt" => Some(UnaryFn::Sqrt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression tree node.
///
/// `PartialEq` is structural; use [`equiv`] for mathematical equality.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Param(String),
    Unary(UnaryFn, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn param(name: &str) -> Expr {
        Expr::Param(name.to_string())
    }

    pub fn x1() -> Expr {
        Expr::Var(Var::X1)
    }

    pub fn x2() -> Expr {
        Expr::Var(Var::X2)
    }

    pub fn x3() -> Expr {
        Expr::Var(Var::X3)
    }

    pub fn t() -> Expr {
        Expr::Var(Var::T)
    }

    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn one() -> Expr {
        Expr::Num(1.0)
    }

    pub fn unary(f: UnaryFn, e: Expr) -> Expr {
        Expr::Unary(f, Box::new(e))
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }


    pub fn sin(self) -> Expr {
        Expr::unary(UnaryFn::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::unary(UnaryFn::Cos, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::unary(UnaryFn::Sqrt, self)
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::binary(BinOp::Pow, self, exponent)
    }

    pub fn powi(self, exponent: i32) -> Expr {
        self.pow(Expr::num(f64::from(exponent)))
    }

    /// True if the variable occurs anywhere in the tree.
    pub fn contains_var(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Param(_) => false,
            Expr::Var(u) => *u == v,
            Expr::Unary(_, a) => a.contains_var(v),
            Expr::Binary(_, a, b) => a.contains_var(v) || b.contains_var(v),
        }
    }

    pub fn contains_any_param(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Param(_) => true,
            Expr::Unary(_, a) => a.contains_any_param(),
            Expr::Binary(_, a, b) => a.contains_any_param() || b.contains_any_param(),
        }
    }

    /// Collect the names of all parameters occurring in the tree.
    pub fn param_names(&self) -> std::collections::BTreeSet<String> {
        fn walk(e: &Expr, out: &mut std::collections::BTreeSet<String>) {
            match e {
                Expr::Num(_) | Expr::Var(_) => {}
                Expr::Param(name) => {
                    out.insert(name.clone());
                }
                Expr::Unary(_, a) => walk(a, out),
                Expr::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = std::collections::BTreeSet::new();
        walk(self, &mut out);
        out
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Param(_) => 1,
            Expr::Unary(_, a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Structurally `Num(0)` after simplification?
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Replace `x1, x2, x3` by the given expressions; `t` and parameters
    /// are left untouched. This is composition with a phase-space map.
    pub fn substitute(&self, xs: &[Expr; 3]) -> Expr {
        match self {
            Expr::Num(_) | Expr::Param(_) => self.clone(),
            Expr::Var(Var::T) => self.clone(),
            Expr::Var(v) => xs[v.index().expect("coordinate variable")].clone(),
            Expr::Unary(f, a) => Expr::unary(*f, a.substitute(xs)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(xs), b.substitute(xs)),
        }
    }

    /// Replace named parameters by numeric constants. Unlisted parameters
    /// stay symbolic.
    pub fn bind_params(&self, bindings: &std::collections::BTreeMap<String, f64>) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var(_) => self.clone(),
            Expr::Param(name) => match bindings.get(name) {
                Some(v) => Expr::Num(*v),
                None => self.clone(),
            },
            Expr::Unary(f, a) => Expr::unary(*f, a.bind_params(bindings)),
            Expr::Binary(op, a, b) => {
                Expr::binary(*op, a.bind_params(bindings), b.bind_params(bindings))
            }
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Add, self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Sub, self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Mul, self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Div, self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    /// Numeric literals fold so trees match what the parser produces for
    /// negative numbers.
    fn neg(self) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(-v),
            other => Expr::unary(UnaryFn::Neg, other),
        }
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print::to_text(self, &VarNames::LOWER))
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Expr, ParseError> {
        parse(s)
    }
}
