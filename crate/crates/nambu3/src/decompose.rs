//! Primitive canonical transformations and sequence composition.
//!
//! Sequences follow the operator-order convention: the steps are listed as
//! the symbols of the composition are written, and the RIGHTMOST (last)
//! entry is performed first as a coordinate substitution. Concretely,
//! composing `[P, G3, G2, G1]` starts from the identity coordinates and
//! substitutes `G1`, then `G2`, then `G3`, then `P` into the accumulated
//! component expressions.

use serde::Deserialize;

use crate::canonical::PhaseMap;
use crate::expr::{
    diff, equiv, parse, simplify, Domain, Expr, Point, Var,
};
use crate::report::{CheckReport, IdentityCheck};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Gauge1,
    Gauge2,
    Gauge3,
    Point1,
    Point2,
    Point3,
    Scaling,
    Interchange,
    Linear,
    Custom,
}

/// One primitive transformation with its realized map.
#[derive(Debug, Clone)]
pub struct CTStep {
    pub kind: StepKind,
    pub label: String,
    pub map: PhaseMap,
}

impl CTStep {
    pub fn bracket(&self) -> Expr {
        self.map.bracket()
    }
}

/// Axis pair an interchange acts in; the remaining axis stays fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    P12,
    P23,
    P31,
}

/// Orientation of the signed swap: `Plus` sends `x_p → -x_q, x_q → x_p`,
/// `Minus` sends `x_p → x_q, x_q → -x_p`. Both have determinant +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Plus,
    Minus,
}

fn check_single_variable(e: &Expr, base: Var, what: &str) -> Result<()> {
    for v in [Var::X1, Var::X2, Var::X3, Var::T] {
        if v != base && e.contains_var(v) {
            return Err(Error::InvalidInput(format!(
                "{what} must depend only on {}",
                Expr::var(base)
            )));
        }
    }
    Ok(())
}

/// Gauge transformation of the given kind: the base coordinate is fixed
/// and the other two are shifted by functions of it. Canonical by
/// construction (unit-triangular Jacobian).
pub fn make_gauge(kind: u8, shift_a: Expr, shift_b: Expr) -> Result<CTStep> {
    let (step_kind, base) = match kind {
        1 => (StepKind::Gauge1, Var::X1),
        2 => (StepKind::Gauge2, Var::X2),
        3 => (StepKind::Gauge3, Var::X3),
        _ => {
            return Err(Error::InvalidInput(format!(
                "gauge kind must be 1, 2, or 3, got {kind}"
            )))
        }
    };
    check_single_variable(&shift_a, base, "gauge shift")?;
    check_single_variable(&shift_b, base, "gauge shift")?;

    let (x1, x2, x3) = (Expr::x1(), Expr::x2(), Expr::x3());
    let (fwd, inv): ([Expr; 3], [Expr; 3]) = match step_kind {
        StepKind::Gauge1 => (
            [x1.clone(), x2.clone() + shift_a.clone(), x3.clone() + shift_b.clone()],
            [x1, x2 - shift_a, x3 - shift_b],
        ),
        StepKind::Gauge2 => (
            [x1.clone() + shift_a.clone(), x2.clone(), x3.clone() + shift_b.clone()],
            [x1 - shift_a, x2, x3 - shift_b],
        ),
        StepKind::Gauge3 => (
            [x1.clone() + shift_a.clone(), x2.clone() + shift_b.clone(), x3.clone()],
            [x1 - shift_a, x2 - shift_b, x3],
        ),
        _ => unreachable!(),
    };
    let [f1, f2, f3] = fwd;
    let [i1, i2, i3] = inv;
    Ok(CTStep {
        kind: step_kind,
        label: format!("gauge{kind}"),
        map: PhaseMap::new(f1, f2, f3).with_inverse(i1, i2, i3),
    })
}

/// Diagonal scaling `X = (a x1, b x2, c x3)`. Any nonzero factors are
/// allowed; the step is canonical exactly when `abc = 1`.
pub fn make_scaling(a: Expr, b: Expr, c: Expr) -> Result<CTStep> {
    for f in [&a, &b, &c] {
        for v in [Var::X1, Var::X2, Var::X3, Var::T] {
            if f.contains_var(v) {
                return Err(Error::InvalidInput(
                    "scaling factors must be constants or parameters".into(),
                ));
            }
        }
        if let Some(v) = f.as_constant() {
            if v == 0.0 {
                return Err(Error::InvalidInput("scaling factor is zero".into()));
            }
        }
    }
    let map = PhaseMap::new(
        a.clone() * Expr::x1(),
        b.clone() * Expr::x2(),
        c.clone() * Expr::x3(),
    )
    .with_inverse(
        Expr::x1() / a.clone(),
        Expr::x2() / b.clone(),
        Expr::x3() / c.clone(),
    );
    Ok(CTStep {
        kind: StepKind::Scaling,
        label: "scaling".into(),
        map,
    })
}

fn point_constraint(df: &Expr, g: &Expr, h: &Expr, d: &Domain) -> Result<(bool, f64)> {
    let product = simplify(&(df.clone() * g.clone() * h.clone()));
    let r = equiv(&product, &Expr::one(), d)?;
    Ok((r.equivalent, r.max_residual))
}

/// Point transformation `X = (f1(x1), f2(x1)·x2, f3(x1)·x3)`. Canonical
/// when `f1' f2 f3 = 1`, which is checked on `d`; with `strict` the
/// violation is an error, otherwise the step is built anyway.
///
/// If `f1_inverse` (a function of one variable, the image of `x1`) is
/// given, the step carries a symbolic inverse; otherwise point inversion
/// falls back to Newton iteration.
pub fn make_point1(
    f1: Expr,
    f2: Expr,
    f3: Expr,
    f1_inverse: Option<Expr>,
    d: &Domain,
    strict: bool,
) -> Result<CTStep> {
    for (f, what) in [(&f1, "f1"), (&f2, "f2"), (&f3, "f3")] {
        check_single_variable(f, Var::X1, what)?;
    }
    let (ok, residual) = point_constraint(&diff(&f1, Var::X1), &f2, &f3, d)?;
    if !ok && strict {
        return Err(Error::InvalidInput(format!(
            "point constraint f1'*f2*f3 = 1 violated (residual {residual:.3e})"
        )));
    }
    let mut map = PhaseMap::new(
        f1.clone(),
        f2.clone() * Expr::x2(),
        f3.clone() * Expr::x3(),
    );
    if let Some(g) = f1_inverse {
        check_single_variable(&g, Var::X1, "f1_inverse")?;
        let g3 = [g.clone(), Expr::x2(), Expr::x3()];
        let f2_of_g = f2.substitute(&g3);
        let f3_of_g = f3.substitute(&g3);
        map = map.with_inverse(g, Expr::x2() / f2_of_g, Expr::x3() / f3_of_g);
    }
    Ok(CTStep {
        kind: StepKind::Point1,
        label: "point1".into(),
        map,
    })
}

/// Point transformation based on `x2`: `X = (g1·x1, g2(x2), g3·x3)` with
/// constraint `g1 g2' g3 = 1`.
pub fn make_point2(
    g1: Expr,
    g2: Expr,
    g3: Expr,
    g2_inverse: Option<Expr>,
    d: &Domain,
    strict: bool,
) -> Result<CTStep> {
    for (f, what) in [(&g1, "g1"), (&g2, "g2"), (&g3, "g3")] {
        check_single_variable(f, Var::X2, what)?;
    }
    let (ok, residual) = point_constraint(&diff(&g2, Var::X2), &g1, &g3, d)?;
    if !ok && strict {
        return Err(Error::InvalidInput(format!(
            "point constraint g1*g2'*g3 = 1 violated (residual {residual:.3e})"
        )));
    }
    let mut map = PhaseMap::new(
        g1.clone() * Expr::x1(),
        g2.clone(),
        g3.clone() * Expr::x3(),
    );
    if let Some(g) = g2_inverse {
        check_single_variable(&g, Var::X2, "g2_inverse")?;
        let sub = [Expr::x1(), g.clone(), Expr::x3()];
        map = map.with_inverse(
            Expr::x1() / g1.substitute(&sub),
            g,
            Expr::x3() / g3.substitute(&sub),
        );
    }
    Ok(CTStep {
        kind: StepKind::Point2,
        label: "point2".into(),
        map,
    })
}

/// Point transformation based on `x3`: `X = (h1·x1, h2·x2, h3(x3))` with
/// constraint `h1 h2 h3' = 1`.
pub fn make_point3(
    h1: Expr,
    h2: Expr,
    h3: Expr,
    h3_inverse: Option<Expr>,
    d: &Domain,
    strict: bool,
) -> Result<CTStep> {
    for (f, what) in [(&h1, "h1"), (&h2, "h2"), (&h3, "h3")] {
        check_single_variable(f, Var::X3, what)?;
    }
    let (ok, residual) = point_constraint(&diff(&h3, Var::X3), &h1, &h2, d)?;
    if !ok && strict {
        return Err(Error::InvalidInput(format!(
            "point constraint h1*h2*h3' = 1 violated (residual {residual:.3e})"
        )));
    }
    let mut map = PhaseMap::new(
        h1.clone() * Expr::x1(),
        h2.clone() * Expr::x2(),
        h3.clone(),
    );
    if let Some(g) = h3_inverse {
        check_single_variable(&g, Var::X3, "h3_inverse")?;
        let sub = [Expr::x1(), Expr::x2(), g.clone()];
        map = map.with_inverse(
            Expr::x1() / h1.substitute(&sub),
            Expr::x2() / h2.substitute(&sub),
            g,
        );
    }
    Ok(CTStep {
        kind: StepKind::Point3,
        label: "point3".into(),
        map,
    })
}

/// Signed axis swap in the given plane, third axis fixed; the sign
/// placement keeps the determinant at +1, so the step is always
/// canonical.
pub fn make_interchange(plane: Plane, orientation: Orientation) -> CTStep {
    let (p, q, fixed) = match plane {
        Plane::P12 => (0, 1, 2),
        Plane::P23 => (1, 2, 0),
        Plane::P31 => (2, 0, 1),
    };
    let mut fwd: [Expr; 3] = [Expr::zero(), Expr::zero(), Expr::zero()];
    let mut inv: [Expr; 3] = [Expr::zero(), Expr::zero(), Expr::zero()];
    let xp = Expr::var(Var::COORDS[p]);
    let xq = Expr::var(Var::COORDS[q]);
    match orientation {
        Orientation::Plus => {
            // X_p = -x_q, X_q = x_p ; inverse x_p = X_q, x_q = -X_p
            fwd[p] = -xq.clone();
            fwd[q] = xp.clone();
            inv[p] = xq;
            inv[q] = -xp;
        }
        Orientation::Minus => {
            // X_p = x_q, X_q = -x_p ; inverse x_p = -X_q, x_q = X_p
            fwd[p] = xq.clone();
            fwd[q] = -xp.clone();
            inv[p] = -xq;
            inv[q] = xp;
        }
    }
    fwd[fixed] = Expr::var(Var::COORDS[fixed]);
    inv[fixed] = Expr::var(Var::COORDS[fixed]);
    let [f1, f2, f3] = fwd;
    let [i1, i2, i3] = inv;
    let sign = match orientation {
        Orientation::Plus => "+",
        Orientation::Minus => "-",
    };
    CTStep {
        kind: StepKind::Interchange,
        label: format!("interchange{}{}", ['1', '2', '3'][p], sign),
        map: PhaseMap::new(f1, f2, f3).with_inverse(i1, i2, i3),
    }
}

/// General linear transformation `X = M x`. Errors on a singular matrix;
/// canonical exactly when `det M = 1`.
pub fn make_linear(matrix: [[f64; 3]; 3]) -> Result<CTStep> {
    let det = crate::canonical::det3_num(matrix);
    if det == 0.0 || !det.is_finite() {
        return Err(Error::InvalidInput("linear step matrix is singular".into()));
    }
    let row_expr = |row: [f64; 3]| {
        simplify(
            &(Expr::num(row[0]) * Expr::x1()
                + Expr::num(row[1]) * Expr::x2()
                + Expr::num(row[2]) * Expr::x3()),
        )
    };
    let inv = invert3(matrix, det);
    let map = PhaseMap::new(
        row_expr(matrix[0]),
        row_expr(matrix[1]),
        row_expr(matrix[2]),
    )
    .with_inverse(row_expr(inv[0]), row_expr(inv[1]), row_expr(inv[2]));
    Ok(CTStep {
        kind: StepKind::Linear,
        label: "linear".into(),
        map,
    })
}

fn invert3(m: [[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let cof = |r1: usize, c1: usize, r2: usize, c2: usize| {
        m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
    };
    [
        [cof(1, 1, 2, 2) / det, -cof(0, 1, 2, 2) / det, cof(0, 1, 1, 2) / det],
        [-cof(1, 0, 2, 2) / det, cof(0, 0, 2, 2) / det, -cof(0, 0, 1, 2) / det],
        [cof(1, 0, 2, 1) / det, -cof(0, 0, 2, 1) / det, cof(0, 0, 1, 1) / det],
    ]
}

/// Wrap an arbitrary map as a sequence step.
pub fn make_custom(map: PhaseMap, label: impl Into<String>) -> CTStep {
    CTStep {
        kind: StepKind::Custom,
        label: label.into(),
        map,
    }
}

/// Which order the steps of a sequence were supplied in. Internally the
/// steps are always stored in operator order; the marker records how the
/// input was written so composing cannot silently assume the wrong one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompositionOrder {
    /// Operator order: the rightmost (last) entry substitutes first.
    #[default]
    RightmostFirst,
    /// Procedural order: the input listed the first-performed step first
    /// and was reversed on load.
    LeftmostFirst,
}

/// An ordered sequence of primitive steps in operator order (rightmost
/// entry substituted first; see the module docs).
#[derive(Debug, Clone, Default)]
pub struct CTSequence {
    pub steps: Vec<CTStep>,
    /// Convention the steps were supplied in (storage is normalized).
    pub supplied_order: CompositionOrder,
}

impl CTSequence {
    pub fn new(steps: Vec<CTStep>) -> CTSequence {
        CTSequence {
            steps,
            supplied_order: CompositionOrder::RightmostFirst,
        }
    }

    /// Substitution composition of all steps. The inverse is attached when
    /// every step carries one.
    pub fn compose(&self) -> PhaseMap {
        let mut acc: [Expr; 3] = [Expr::x1(), Expr::x2(), Expr::x3()];
        for step in &self.steps {
            let comps = step.map.components();
            acc = std::array::from_fn(|i| simplify(&comps[i].substitute(&acc)));
        }

        let inverse = self
            .steps
            .iter()
            .rev()
            .try_fold([Expr::x1(), Expr::x2(), Expr::x3()], |acc, step| {
                step.map.inverse_components().map(|inv| {
                    std::array::from_fn(|i| simplify(&inv[i].substitute(&acc)))
                })
            });

        let [a, b, c] = acc;
        let mut map = PhaseMap::new(a, b, c);
        if let Some([i1, i2, i3]) = inverse {
            map = map.with_inverse(i1, i2, i3);
        }
        map
    }

    /// Forward images of the partial compositions: entry `k` is the
    /// composite of the last `k+1` steps (the first `k+1` substitutions).
    pub fn partial_composites(&self) -> Vec<PhaseMap> {
        let mut out = Vec::with_capacity(self.steps.len());
        let mut acc: [Expr; 3] = [Expr::x1(), Expr::x2(), Expr::x3()];
        for step in &self.steps {
            let comps = step.map.components();
            acc = std::array::from_fn(|i| simplify(&comps[i].substitute(&acc)));
            out.push(PhaseMap::from_components(acc.clone()));
        }
        out
    }

    /// Apply the sequence to a point (first-listed step acts on the point
    /// first, matching the substitution order of [`Self::compose`]).
    pub fn apply(&self, p: &Point) -> Result<[f64; 3]> {
        let mut current = p.clone();
        for step in &self.steps {
            let coords = step.map.apply(&current)?;
            current = current.with_coords(coords);
        }
        Ok(current.coords())
    }

    pub fn from_json(value: &serde_json::Value, leftmost_first: bool, d: &Domain) -> Result<CTSequence> {
        let raw: Vec<StepJson> = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidInput(format!("malformed sequence JSON: {e}")))?;
        let mut steps = raw
            .into_iter()
            .map(|s| s.realize(d))
            .collect::<Result<Vec<_>>>()?;
        let supplied_order = if leftmost_first {
            steps.reverse();
            CompositionOrder::LeftmostFirst
        } else {
            CompositionOrder::RightmostFirst
        };
        Ok(CTSequence {
            steps,
            supplied_order,
        })
    }
}

#[derive(Debug, Deserialize)]
struct StepJson {
    kind: String,
    #[serde(default)]
    f1: Option<String>,
    #[serde(default)]
    f2: Option<String>,
    #[serde(default)]
    f3: Option<String>,
    #[serde(default)]
    f1_inverse: Option<String>,
    #[serde(default)]
    a: Option<String>,
    #[serde(default)]
    b: Option<String>,
    #[serde(default)]
    c: Option<String>,
    #[serde(default)]
    plane: Option<String>,
    #[serde(default)]
    orientation: Option<String>,
    #[serde(default)]
    matrix: Option<[[f64; 3]; 3]>,
    #[serde(default)]
    map: Option<serde_json::Value>,
}

impl StepJson {
    fn field(opt: &Option<String>, what: &str) -> Result<Expr> {
        let text = opt
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("step is missing `{what}`")))?;
        Ok(parse(text)?)
    }

    fn realize(self, d: &Domain) -> Result<CTStep> {
        match self.kind.as_str() {
            "gauge1" | "gauge2" | "gauge3" => {
                let kind = self.kind.as_bytes()[5] - b'0';
                make_gauge(
                    kind,
                    Self::field(&self.f1, "f1")?,
                    Self::field(&self.f2, "f2")?,
                )
            }
            "scaling" => make_scaling(
                Self::field(&self.a, "a")?,
                Self::field(&self.b, "b")?,
                Self::field(&self.c, "c")?,
            ),
            "point1" | "point2" | "point3" => {
                let inv = self
                    .f1_inverse
                    .as_ref()
                    .map(|s| parse(s))
                    .transpose()?;
                let make = match self.kind.as_str() {
                    "point1" => make_point1,
                    "point2" => make_point2,
                    _ => make_point3,
                };
                make(
                    Self::field(&self.f1, "f1")?,
                    Self::field(&self.f2, "f2")?,
                    Self::field(&self.f3, "f3")?,
                    inv,
                    d,
                    false,
                )
            }
            "interchange" => {
                let plane = match self.plane.as_deref() {
                    Some("12") => Plane::P12,
                    Some("23") => Plane::P23,
                    Some("31") => Plane::P31,
                    other => {
                        return Err(Error::InvalidInput(format!(
                            "interchange plane must be 12, 23, or 31, got {other:?}"
                        )))
                    }
                };
                let orientation = match self.orientation.as_deref() {
                    Some("+") | None => Orientation::Plus,
                    Some("-") => Orientation::Minus,
                    other => {
                        return Err(Error::InvalidInput(format!(
                            "interchange orientation must be + or -, got {other:?}"
                        )))
                    }
                };
                Ok(make_interchange(plane, orientation))
            }
            "linear" => {
                let matrix = self.matrix.ok_or_else(|| {
                    Error::InvalidInput("linear step is missing `matrix`".into())
                })?;
                make_linear(matrix)
            }
            "custom" => {
                let value = self
                    .map
                    .ok_or_else(|| Error::InvalidInput("custom step is missing `map`".into()))?;
                Ok(make_custom(PhaseMap::from_json(&value)?, "custom"))
            }
            other => Err(Error::InvalidInput(format!("unknown step kind `{other}`"))),
        }
    }
}

/// Componentwise equivalence of two maps on a shared safe domain.
pub fn verify_equal(a: &PhaseMap, b: &PhaseMap, d: &Domain) -> Result<CheckReport> {
    let mut report = CheckReport::empty();
    for i in 0..3 {
        let r = equiv(&a.components()[i], &b.components()[i], d)?;
        report.push(IdentityCheck::from_equiv(format!("component[X{}]", i + 1), &r));
    }
    Ok(report)
}
