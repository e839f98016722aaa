//! Lightweight structural simplification: constant folding, 0/1 identities,
//! double negation. The result is always mathematically equivalent to the
//! input on any domain where the input is defined.

use super::{eval::pow_value, BinOp, Expr, UnaryFn};

pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Var(_) | Expr::Param(_) => e.clone(),
        Expr::Unary(f, a) => simplify_unary(*f, simplify(a)),
        Expr::Binary(op, a, b) => simplify_binary(*op, simplify(a), simplify(b)),
    }
}

fn simplify_unary(f: UnaryFn, a: Expr) -> Expr {
    if let Expr::Num(v) = a {
        let folded = match f {
            UnaryFn::Neg => Some(-v),
            UnaryFn::Sin => Some(v.sin()),
            UnaryFn::Cos => Some(v.cos()),
            UnaryFn::Tan => Some(v.tan()),
            UnaryFn::Atan => Some(v.atan()),
            UnaryFn::Exp => Some(v.exp()),
            UnaryFn::Ln => (v > 0.0).then(|| v.ln()),
            UnaryFn::Sqrt => (v >= 0.0).then(|| v.sqrt()),
        };
        if let Some(r) = folded {
            if r.is_finite() {
                return Expr::Num(r);
            }
        }
    }
    if f == UnaryFn::Neg {
        if let Expr::Unary(UnaryFn::Neg, inner) = a {
            return *inner;
        }
        // negation merges into a leading numeric coefficient
        if let Expr::Binary(BinOp::Mul, u, v) = &a {
            if let Expr::Num(c) = **u {
                return simplify_binary(BinOp::Mul, Expr::Num(-c), (**v).clone());
            }
        }
    }
    Expr::unary(f, a)
}

fn simplify_binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
        let folded = match op {
            BinOp::Add => Some(x + y),
            BinOp::Sub => Some(x - y),
            BinOp::Mul => Some(x * y),
            BinOp::Div => (*y != 0.0).then(|| x / y),
            BinOp::Pow => pow_value(*x, *y).ok(),
        };
        if let Some(r) = folded {
            if r.is_finite() {
                return Expr::Num(r);
            }
        }
    }
    match op {
        BinOp::Add => {
            if a.is_zero() {
                return b;
            }
            if b.is_zero() {
                return a;
            }
        }
        BinOp::Sub => {
            if b.is_zero() {
                return a;
            }
            if a.is_zero() {
                return simplify_unary(UnaryFn::Neg, b);
            }
            if a == b {
                return Expr::zero();
            }
        }
        BinOp::Mul => {
            if a.is_zero() || b.is_zero() {
                return Expr::zero();
            }
            if a == Expr::one() {
                return b;
            }
            if b == Expr::one() {
                return a;
            }
            // signs lift out of products so double negations collapse
            if let Expr::Unary(UnaryFn::Neg, inner) = a {
                return simplify_unary(UnaryFn::Neg, simplify_binary(BinOp::Mul, *inner, b));
            }
            if let Expr::Unary(UnaryFn::Neg, inner) = b {
                return simplify_unary(UnaryFn::Neg, simplify_binary(BinOp::Mul, a, *inner));
            }
            // constants move to the front and merge, so iterated
            // derivatives stay compact
            let (a, b) = if matches!(b, Expr::Num(_)) && !matches!(a, Expr::Num(_)) {
                (b, a)
            } else {
                (a, b)
            };
            if let Expr::Num(c1) = a {
                match b {
                    Expr::Binary(BinOp::Mul, inner_a, inner_b) => {
                        if let Expr::Num(c2) = *inner_a {
                            return simplify_binary(BinOp::Mul, Expr::Num(c1 * c2), *inner_b);
                        }
                        return Expr::binary(
                            BinOp::Mul,
                            Expr::Num(c1),
                            Expr::Binary(BinOp::Mul, inner_a, inner_b),
                        );
                    }
                    other => {
                        if c1 == -1.0 {
                            return simplify_unary(UnaryFn::Neg, other);
                        }
                        return Expr::binary(BinOp::Mul, Expr::Num(c1), other);
                    }
                }
            }
            // hoist constants buried in nested products to the front
            if let Expr::Binary(BinOp::Mul, u, v) = &a {
                if matches!(**u, Expr::Num(_)) {
                    let (u, v) = ((**u).clone(), (**v).clone());
                    return simplify_binary(BinOp::Mul, u, simplify_binary(BinOp::Mul, v, b));
                }
            }
            if let Expr::Binary(BinOp::Mul, u, v) = &b {
                if matches!(**u, Expr::Num(_)) {
                    let (u, v) = ((**u).clone(), (**v).clone());
                    return simplify_binary(BinOp::Mul, u, simplify_binary(BinOp::Mul, a, v));
                }
            }
            return Expr::binary(BinOp::Mul, a, b);
        }
        BinOp::Div => {
            if a.is_zero() {
                return Expr::zero();
            }
            if b == Expr::one() {
                return a;
            }
            // on any domain where the quotient is defined, b != 0
            if a == b {
                return Expr::one();
            }
            if let Expr::Binary(BinOp::Mul, u, v) = &a {
                if **u == b {
                    return (**v).clone();
                }
                if **v == b {
                    return (**u).clone();
                }
            }
            // division by a constant becomes multiplication
            if let Expr::Num(c) = b {
                if c != 0.0 && (1.0 / c).is_finite() {
                    return simplify_binary(BinOp::Mul, Expr::Num(1.0 / c), a);
                }
            }
        }
        BinOp::Pow => {
            if let Expr::Num(y) = b {
                if y == 1.0 {
                    return a;
                }
                if y == 0.0 {
                    return Expr::one();
                }
                // distribute integer powers over products so factors can
                // cancel later (fractional powers would shrink the domain
                // when both factors are negative)
                if y == y.trunc() {
                    if let Expr::Binary(BinOp::Mul, u, v) = a {
                        let pu = simplify_binary(BinOp::Pow, *u, Expr::Num(y));
                        let pv = simplify_binary(BinOp::Pow, *v, Expr::Num(y));
                        return simplify_binary(BinOp::Mul, pu, pv);
                    }
                }
            }
            if a == Expr::one() {
                return Expr::one();
            }
        }
    }
    Expr::binary(op, a, b)
}
