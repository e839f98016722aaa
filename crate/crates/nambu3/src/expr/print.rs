//! Printer emitting the same grammar the parser accepts.
//!
//! Parenthesization is chosen so that `parse(to_text(e)) == e` for every
//! tree the parser or the simplifier can produce.

use super::{BinOp, Expr, UnaryFn, Var};

/// Display names for the four variables. Image-side expressions reuse the
/// lowercase variables internally; printing them with [`VarNames::UPPER`]
/// makes CLI output readable.
#[derive(Debug, Clone, Copy)]
pub struct VarNames {
    pub names: [&'static str; 4],
}

impl VarNames {
    pub const LOWER: VarNames = VarNames {
        names: ["x1", "x2", "x3", "t"],
    };
    pub const UPPER: VarNames = VarNames {
        names: ["X1", "X2", "X3", "t"],
    };

    fn of(&self, v: Var) -> &'static str {
        match v {
            Var::X1 => self.names[0],
            Var::X2 => self.names[1],
            Var::X3 => self.names[2],
            Var::T => self.names[3],
        }
    }
}

// precedence levels: Add/Sub 1, Mul/Div 2, unary minus 3, Pow 4, atoms 6
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Num(v) if *v < 0.0 => 3,
        Expr::Num(_) | Expr::Var(_) | Expr::Param(_) => 6,
        Expr::Unary(UnaryFn::Neg, _) => 3,
        Expr::Unary(..) => 6,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Binary(BinOp::Pow, ..) => 4,
    }
}

pub fn to_text(e: &Expr, names: &VarNames) -> String {
    let mut out = String::new();
    write_expr(e, 0, names, &mut out);
    out
}

fn write_expr(e: &Expr, required: u8, names: &VarNames, out: &mut String) {
    if prec(e) < required {
        out.push('(');
        write_expr(e, 0, names, out);
        out.push(')');
        return;
    }
    match e {
        Expr::Num(v) => out.push_str(&format_num(*v)),
        Expr::Var(v) => out.push_str(names.of(*v)),
        Expr::Param(name) => out.push_str(name),
        Expr::Unary(UnaryFn::Neg, a) => {
            out.push('-');
            write_operand(a, 3, names, out);
        }
        Expr::Unary(f, a) => {
            out.push_str(f.name().expect("named function"));
            out.push('(');
            write_expr(a, 0, names, out);
            out.push(')');
        }
        Expr::Binary(op, a, b) => {
            let (sym, lp, rp) = match op {
                BinOp::Add => ('+', 1, 2),
                BinOp::Sub => ('-', 1, 2),
                BinOp::Mul => ('*', 2, 3),
                BinOp::Div => ('/', 2, 3),
                BinOp::Pow => ('^', 5, 3),
            };
            write_expr(a, lp, names, out);
            out.push(sym);
            write_operand(b, rp, names, out);
        }
    }
}

// like write_expr, but wraps anything that renders with a leading `-` so
// the output never contains `--`, `+-`, `*-`, `^-` and the like
fn write_operand(e: &Expr, required: u8, names: &VarNames, out: &mut String) {
    let mut rendered = String::new();
    write_expr(e, required, names, &mut rendered);
    if rendered.starts_with('-') {
        out.push('(');
        write_expr(e, 0, names, out);
        out.push(')');
    } else {
        out.push_str(&rendered);
    }
}

fn format_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        // shortest representation that parses back to the same f64
        format!("{v}")
    }
}
