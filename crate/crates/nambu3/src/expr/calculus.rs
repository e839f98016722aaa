//! Exact symbolic differentiation and Jacobian construction.
//!
//! Parameters are treated as constants. Powers with a constant exponent use
//! the power rule directly so integer powers of negative bases stay
//! differentiable; the general `u^v` rule requires `u > 0` at evaluation
//! time, matching the evaluation semantics.

use super::{simplify, BinOp, Expr, UnaryFn, Var};

pub fn diff(e: &Expr, v: Var) -> Expr {
    simplify(&diff_raw(e, v))
}

fn diff_raw(e: &Expr, v: Var) -> Expr {
    match e {
        Expr::Num(_) | Expr::Param(_) => Expr::zero(),
        Expr::Var(u) => {
            if *u == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Unary(f, a) => {
            let da = diff_raw(a, v);
            let a = (**a).clone();
            match f {
                UnaryFn::Neg => -da,
                UnaryFn::Sin => a.cos() * da,
                UnaryFn::Cos => -(a.sin() * da),
                UnaryFn::Tan => da / a.cos().powi(2),
                UnaryFn::Atan => da / (Expr::one() + a.powi(2)),
                UnaryFn::Exp => Expr::unary(UnaryFn::Exp, a) * da,
                UnaryFn::Ln => da / a,
                UnaryFn::Sqrt => da / (Expr::num(2.0) * a.sqrt()),
            }
        }
        Expr::Binary(op, a, b) => {
            let (a, b) = ((**a).clone(), (**b).clone());
            let (da, db) = (diff_raw(&a, v), diff_raw(&b, v));
            match op {
                BinOp::Add => da + db,
                BinOp::Sub => da - db,
                BinOp::Mul => a.clone() * db + b * da,
                BinOp::Div => (da * b.clone() - a * db.clone()) / b.clone().powi(2),
                BinOp::Pow => {
                    if let Expr::Num(c) = b {
                        // power rule with constant exponent
                        Expr::num(c) * a.clone().pow(Expr::num(c - 1.0)) * da
                    } else {
                        // u^v · (v' ln u + v u'/u), valid where u > 0
                        a.clone().pow(b.clone())
                            * (db * Expr::unary(UnaryFn::Ln, a.clone()) + b * (da / a))
                    }
                }
            }
        }
    }
}

/// 3×3 Jacobian matrix: entry `(i, j)` is `∂ f_i / ∂ vars_j`.
pub fn jacobian3(fs: &[Expr; 3], vars: [Var; 3]) -> [[Expr; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| diff(&fs[i], vars[j])))
}

/// Determinant of a 3×3 expression matrix by cofactor expansion along the
/// first row, simplified.
pub fn det3(m: &[[Expr; 3]; 3]) -> Expr {
    let minor = |r1: usize, c1: usize, r2: usize, c2: usize| {
        m[r1][c1].clone() * m[r2][c2].clone() - m[r1][c2].clone() * m[r2][c1].clone()
    };
    let expanded = m[0][0].clone() * minor(1, 1, 2, 2) - m[0][1].clone() * minor(1, 0, 2, 2)
        + m[0][2].clone() * minor(1, 0, 2, 1);
    simplify(&expanded)
}

/// Jacobian determinant `∂(f1,f2,f3)/∂(vars)`.
pub fn jacobian3_det(fs: &[Expr; 3], vars: [Var; 3]) -> Expr {
    det3(&jacobian3(fs, vars))
}

/// 2×2 Jacobian determinant `∂(f,g)/∂(u,v)`.
pub fn jacobian2_det(f: &Expr, g: &Expr, u: Var, v: Var) -> Expr {
    simplify(&(diff(f, u) * diff(g, v) - diff(f, v) * diff(g, u)))
}
