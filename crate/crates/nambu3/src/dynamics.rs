//! Nambu bracket, equations of motion, and numeric flow integration.
//!
//! The bracket of three phase functions is the Jacobian determinant
//! `{f, g, h} = ∂(f,g,h)/∂(x1,x2,x3)`. A pair of functionally independent
//! Hamilton functions `(H1, H2)` drives the motion through
//! `ẋ_i = {x_i, H1, H2}`, which makes the phase velocity field divergence
//! free and conserves every time-independent Hamilton function.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::expr::{
    diff, equiv, eval, jacobian2_det, jacobian3_det, simplify, Domain, Expr, Point, Var,
};
use crate::report::{CheckReport, IdentityCheck};
use crate::{Error, Result};

/// `{f, g, h}` as an expression, expanded by cofactors and simplified.
pub fn nambu_bracket(f: &Expr, g: &Expr, h: &Expr) -> Expr {
    jacobian3_det(&[f.clone(), g.clone(), h.clone()], Var::COORDS)
}

/// Total time derivative `ḟ = {f, H1, H2} + ∂f/∂t`.
pub fn total_derivative(f: &Expr, pair: &HamiltonPair) -> Expr {
    simplify(&(nambu_bracket(f, &pair.h1, &pair.h2) + diff(f, Var::T)))
}

/// An expression is treated as time independent when its `t`-derivative
/// simplifies away structurally.
pub fn is_time_independent(e: &Expr) -> bool {
    diff(e, Var::T).is_zero()
}

/// Phase-velocity field with components in `(x1, x2, x3, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub components: [Expr; 3],
}

impl VectorField {
    pub fn new(v1: Expr, v2: Expr, v3: Expr) -> VectorField {
        VectorField {
            components: [v1, v2, v3],
        }
    }

    /// `∂v1/∂x1 + ∂v2/∂x2 + ∂v3/∂x3`, simplified.
    pub fn divergence(&self) -> Expr {
        simplify(
            &(diff(&self.components[0], Var::X1)
                + diff(&self.components[1], Var::X2)
                + diff(&self.components[2], Var::X3)),
        )
    }

    /// Vanishing-divergence check, with the residual measured against the
    /// magnitude of the three cancelling partials.
    pub fn divergence_check(&self, d: &Domain) -> Result<CheckReport> {
        let terms = [
            diff(&self.components[0], Var::X1),
            diff(&self.components[1], Var::X2),
            diff(&self.components[2], Var::X3),
        ];
        let r = crate::expr::zero_sum_check(&[&terms[0], &terms[1], &terms[2]], d)?;
        Ok(CheckReport::new(vec![IdentityCheck::from_equiv(
            "divergence_free",
            &r,
        )]))
    }

    pub fn eval_at(&self, p: &Point) -> Result<[f64; 3]> {
        Ok([
            eval(&self.components[0], p)?,
            eval(&self.components[1], p)?,
            eval(&self.components[2], p)?,
        ])
    }
}

/// Two functionally independent Hamilton functions.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonPair {
    pub h1: Expr,
    pub h2: Expr,
    pub label: String,
}

impl HamiltonPair {
    pub fn new(h1: Expr, h2: Expr, label: impl Into<String>) -> HamiltonPair {
        HamiltonPair {
            h1,
            h2,
            label: label.into(),
        }
    }

    /// Right-hand side of the equations of motion: `v_i = {x_i, H1, H2}`.
    pub fn nh_rhs(&self) -> VectorField {
        let field = Var::COORDS
            .map(|v| nambu_bracket(&Expr::var(v), &self.h1, &self.h2));
        let [v1, v2, v3] = field;
        VectorField::new(v1, v2, v3)
    }

    pub fn is_time_independent(&self) -> bool {
        is_time_independent(&self.h1) && is_time_independent(&self.h2)
    }

    /// Functional independence: the three 2×2 Jacobians
    /// `∂(H1,H2)/∂(xj,xk)` must not all vanish identically on `d`.
    pub fn check_independence(&self, d: &Domain) -> Result<CheckReport> {
        let pairs = [(Var::X2, Var::X3), (Var::X3, Var::X1), (Var::X1, Var::X2)];
        let mut some_nonzero = false;
        let mut worst = 0.0_f64;
        for (u, v) in pairs {
            let j = jacobian2_det(&self.h1, &self.h2, u, v);
            let r = equiv(&j, &Expr::zero(), d)?;
            worst = worst.max(r.max_residual);
            if !r.equivalent {
                some_nonzero = true;
            }
        }
        let check = IdentityCheck {
            label: format!("functional_independence[{}]", self.label),
            pass: some_nonzero,
            residual: worst,
            worst_point: None,
            note: (!some_nonzero)
                .then(|| "all three 2x2 Jacobians vanish identically".to_string()),
        };
        Ok(CheckReport::new(vec![check]))
    }
}

/// Per-Hamilton-function conservation drift along a trajectory. `None`
/// when the function depends on `t` explicitly and is not conserved.
#[derive(Debug, Clone, Serialize)]
pub struct DriftRecord {
    pub h1: Option<f64>,
    pub h2: Option<f64>,
}

/// Time-ordered solution samples of a Nambu–Hamilton flow.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<(f64, [f64; 3])>,
    pub step: f64,
    pub drift: DriftRecord,
    /// Set when integration aborted on a non-finite state; the samples up
    /// to the failure are retained.
    pub truncated: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> (f64, [f64; 3]) {
        *self.samples.last().expect("trajectory has samples")
    }

    /// CSV with header `t,x1,x2,x3`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x1,x2,x3\n");
        for (t, x) in &self.samples {
            out.push_str(&format!("{t},{},{},{}\n", x[0], x[1], x[2]));
        }
        out
    }

    /// JSON sidecar `{h, drift: {H1, H2}}` accompanying the CSV export.
    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::json!({
            "h": self.step,
            "drift": { "H1": self.drift.h1, "H2": self.drift.h2 },
        })
    }
}

/// One classic fourth-order Runge–Kutta step of `ẋ = v(x, t)`.
fn rk4_step(
    field: &VectorField,
    x: [f64; 3],
    t: f64,
    h: f64,
    params: &BTreeMap<String, f64>,
) -> Result<[f64; 3]> {
    let at = |x: [f64; 3], t: f64| -> Result<[f64; 3]> {
        let p = Point {
            x1: x[0],
            x2: x[1],
            x3: x[2],
            t,
            params: params.clone(),
        };
        field.eval_at(&p)
    };
    let add = |x: [f64; 3], k: [f64; 3], s: f64| {
        [x[0] + s * k[0], x[1] + s * k[1], x[2] + s * k[2]]
    };
    let k1 = at(x, t)?;
    let k2 = at(add(x, k1, h / 2.0), t + h / 2.0)?;
    let k3 = at(add(x, k2, h / 2.0), t + h / 2.0)?;
    let k4 = at(add(x, k3, h), t + h)?;
    Ok([
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        x[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ])
}

/// Integrate the Nambu–Hamilton flow of `pair` from `x0` (whose `t` is the
/// start time) to `t_end` with fixed step `h`, recording invariant drift
/// for every time-independent Hamilton function.
pub fn integrate_flow(
    pair: &HamiltonPair,
    x0: &Point,
    t_end: f64,
    h: f64,
) -> Result<Trajectory> {
    if h <= 0.0 {
        return Err(Error::InvalidInput("step size must be positive".into()));
    }
    if t_end <= x0.t {
        return Err(Error::InvalidInput(
            "t_end must exceed the start time".into(),
        ));
    }
    let field = pair.nh_rhs();
    let track_h1 = is_time_independent(&pair.h1);
    let track_h2 = is_time_independent(&pair.h2);
    let value_at = |e: &Expr, x: [f64; 3], t: f64| -> Result<f64> {
        let p = Point {
            x1: x[0],
            x2: x[1],
            x3: x[2],
            t,
            params: x0.params.clone(),
        };
        Ok(eval(e, &p)?)
    };

    let mut x = x0.coords();
    let mut t = x0.t;
    let h1_0 = track_h1.then(|| value_at(&pair.h1, x, t)).transpose()?;
    let h2_0 = track_h2.then(|| value_at(&pair.h2, x, t)).transpose()?;
    let mut drift = DriftRecord {
        h1: track_h1.then_some(0.0),
        h2: track_h2.then_some(0.0),
    };
    let mut samples = vec![(t, x)];
    let mut truncated = false;

    let span = t_end - x0.t;
    let steps = (span / h).ceil().max(1.0) as usize;
    for i in 1..=steps {
        // land exactly on t_end despite accumulation
        let target = if i == steps { t_end } else { x0.t + span * (i as f64) / (steps as f64) };
        let step = target - t;
        match rk4_step(&field, x, t, step, &x0.params) {
            Ok(next) if next.iter().all(|v| v.is_finite()) => {
                x = next;
                t = target;
            }
            _ => {
                truncated = true;
                break;
            }
        }
        samples.push((t, x));
        if let (Some(d), Some(v0)) = (drift.h1.as_mut(), h1_0) {
            *d = d.max((value_at(&pair.h1, x, t)? - v0).abs());
        }
        if let (Some(d), Some(v0)) = (drift.h2.as_mut(), h2_0) {
            *d = d.max((value_at(&pair.h2, x, t)? - v0).abs());
        }
    }

    Ok(Trajectory {
        samples,
        step: h,
        drift,
        truncated,
    })
}
