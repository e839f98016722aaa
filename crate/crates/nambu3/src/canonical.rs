//! Phase-space maps and canonicity machinery.
//!
//! A [`PhaseMap`] sends `(x, t) ↦ (X(x, t), t)`. Expressions on the image
//! side reuse the variables `x1, x2, x3` to denote `X1, X2, X3`; the
//! inverse of a map, when supplied, is a triple of such expressions
//! recovering the source coordinates from the image ones.
//!
//! Classification follows the bracket criterion: a map is canonoid with
//! respect to every Hamiltonian pair iff `{X1,X2,X3}` is constant, and
//! canonical iff that constant is 1.

use serde::{Deserialize, Serialize};

use crate::dynamics::{is_time_independent, nambu_bracket, HamiltonPair};
use crate::expr::{
    diff, equiv, eval, jacobian2_det, jacobian3, parse, simplify, to_text_upper, Domain, Expr,
    Point, Var,
};
use crate::report::{CheckReport, IdentityCheck};
use crate::{Error, Result};

/// A transformation `(x, t) ↦ (X(x, t), t)` of extended phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    components: [Expr; 3],
    inverse: Option<[Expr; 3]>,
    /// Declared safe sampling box; operations fall back to this when the
    /// caller does not supply one.
    pub domain: Option<Domain>,
}

impl PhaseMap {
    pub fn new(x1: Expr, x2: Expr, x3: Expr) -> PhaseMap {
        PhaseMap {
            components: [simplify(&x1), simplify(&x2), simplify(&x3)],
            inverse: None,
            domain: None,
        }
    }

    pub fn from_components(components: [Expr; 3]) -> PhaseMap {
        let [a, b, c] = components;
        PhaseMap::new(a, b, c)
    }

    pub fn identity() -> PhaseMap {
        PhaseMap::new(Expr::x1(), Expr::x2(), Expr::x3()).with_inverse(
            Expr::x1(),
            Expr::x2(),
            Expr::x3(),
        )
    }

    /// Attach an explicit inverse, written in the image coordinates.
    pub fn with_inverse(mut self, x1: Expr, x2: Expr, x3: Expr) -> PhaseMap {
        self.inverse = Some([simplify(&x1), simplify(&x2), simplify(&x3)]);
        self
    }

    pub fn with_domain(mut self, d: Domain) -> PhaseMap {
        self.domain = Some(d);
        self
    }

    pub fn components(&self) -> &[Expr; 3] {
        &self.components
    }

    pub fn inverse_components(&self) -> Option<&[Expr; 3]> {
        self.inverse.as_ref()
    }

    pub fn require_inverse(&self) -> Result<&[Expr; 3]> {
        self.inverse.as_ref().ok_or(Error::MissingInverse)
    }

    pub fn domain_or_default(&self) -> Domain {
        self.domain.clone().unwrap_or_default()
    }

    pub fn is_time_dependent(&self) -> bool {
        self.components
            .iter()
            .any(|c| !is_time_independent(c))
    }

    /// Compose an expression in the image coordinates with the map,
    /// producing an expression in the source coordinates: `e ∘ m`.
    pub fn pull_back(&self, e: &Expr) -> Expr {
        simplify(&e.substitute(&self.components))
    }

    /// Compose an expression in the source coordinates with the inverse,
    /// producing an expression in the image coordinates: `e ∘ m⁻¹`.
    pub fn push_forward(&self, e: &Expr) -> Result<Expr> {
        let inv = self.require_inverse()?;
        Ok(simplify(&e.substitute(inv)))
    }

    /// Forward image of a point.
    pub fn apply(&self, p: &Point) -> Result<[f64; 3]> {
        Ok([
            eval(&self.components[0], p)?,
            eval(&self.components[1], p)?,
            eval(&self.components[2], p)?,
        ])
    }

    /// Preimage of a point: the symbolic inverse when present, otherwise
    /// Newton iteration seeded at `seed`.
    pub fn invert_point(&self, image: &Point, seed: [f64; 3]) -> Result<[f64; 3]> {
        if let Some(inv) = &self.inverse {
            return Ok([
                eval(&inv[0], image)?,
                eval(&inv[1], image)?,
                eval(&inv[2], image)?,
            ]);
        }
        self.newton_invert(image, seed)
    }

    /// Solve `m(x, t) = X` for `x` by Newton iteration (tolerance 1e-12,
    /// at most 50 iterations).
    pub fn newton_invert(&self, image: &Point, seed: [f64; 3]) -> Result<[f64; 3]> {
        const TOL: f64 = 1e-12;
        const MAX_ITER: usize = 50;
        let jac = self.jacobian();
        let target = image.coords();
        let mut x = seed;
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_ITER {
            let p = image.with_coords(x);
            let fx = self.apply(&p)?;
            let r = [fx[0] - target[0], fx[1] - target[1], fx[2] - target[2]];
            residual = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if residual <= TOL {
                return Ok(x);
            }
            let mut j = [[0.0; 3]; 3];
            for (i, row) in jac.iter().enumerate() {
                for (k, entry) in row.iter().enumerate() {
                    j[i][k] = eval(entry, &p)?;
                }
            }
            let delta = solve3(j, r).ok_or(Error::NewtonDiverged {
                iterations: MAX_ITER,
                residual,
            })?;
            x = [x[0] - delta[0], x[1] - delta[1], x[2] - delta[2]];
        }
        Err(Error::NewtonDiverged {
            iterations: MAX_ITER,
            residual,
        })
    }

    pub fn jacobian(&self) -> [[Expr; 3]; 3] {
        jacobian3(&self.components, Var::COORDS)
    }

    /// `{X1, X2, X3}` as an expression in the source coordinates.
    pub fn bracket(&self) -> Expr {
        nambu_bracket(
            &self.components[0],
            &self.components[1],
            &self.components[2],
        )
    }

    /// Time-derivative field `Ẋ_i = ∂X_i/∂x_j ẋ_j + ∂X_i/∂t` along the
    /// flow of `pair`, expressed in the source coordinates.
    pub fn image_velocity(&self, pair: &HamiltonPair) -> [Expr; 3] {
        let xdot = pair.nh_rhs();
        std::array::from_fn(|i| {
            let mut acc = diff(&self.components[i], Var::T);
            for (j, v) in Var::COORDS.iter().enumerate() {
                acc = acc + diff(&self.components[i], *v) * xdot.components[j].clone();
            }
            simplify(&acc)
        })
    }

    /// [`Self::image_velocity`] pushed to the image coordinates via the
    /// symbolic inverse.
    pub fn image_velocity_in_image(&self, pair: &HamiltonPair) -> Result<[Expr; 3]> {
        let inv = self.require_inverse()?;
        let vel = self.image_velocity(pair);
        Ok(std::array::from_fn(|i| simplify(&vel[i].substitute(inv))))
    }

    /// Both round trips of the declared inverse:
    /// `m(m⁻¹(X)) = X` sampled on `d` as an image box, and
    /// `m⁻¹(m(x)) = x` sampled on `d` as a source box.
    pub fn check_inverse(&self, d: &Domain) -> Result<CheckReport> {
        let inv = self.require_inverse()?;
        let mut report = CheckReport::empty();
        for (i, v) in Var::COORDS.iter().enumerate() {
            let forward_back = simplify(&self.components[i].substitute(inv));
            let r = equiv(&forward_back, &Expr::var(*v), d)?;
            report.push(IdentityCheck::from_equiv(
                format!("inverse_right[X{}]", i + 1),
                &r,
            ));
        }
        for (i, v) in Var::COORDS.iter().enumerate() {
            let back_forward = simplify(&inv[i].substitute(&self.components));
            let r = equiv(&back_forward, &Expr::var(*v), d)?;
            report.push(IdentityCheck::from_equiv(
                format!("inverse_left[x{}]", i + 1),
                &r,
            ));
        }
        Ok(report)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PhaseMapJson::from(self)).expect("phase map serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<PhaseMap> {
        let raw: PhaseMapJson = serde_json::from_value(value.clone())
            .map_err(|e| Error::InvalidInput(format!("malformed map JSON: {e}")))?;
        raw.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct InverseJson {
    x1: String,
    x2: String,
    x3: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct PhaseMapJson {
    #[serde(rename = "X1")]
    x1: String,
    #[serde(rename = "X2")]
    x2: String,
    #[serde(rename = "X3")]
    x3: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    inverse: Option<InverseJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain: Option<Domain>,
}

impl From<&PhaseMap> for PhaseMapJson {
    fn from(m: &PhaseMap) -> PhaseMapJson {
        PhaseMapJson {
            x1: m.components[0].to_string(),
            x2: m.components[1].to_string(),
            x3: m.components[2].to_string(),
            inverse: m.inverse.as_ref().map(|inv| InverseJson {
                x1: to_text_upper(&inv[0]),
                x2: to_text_upper(&inv[1]),
                x3: to_text_upper(&inv[2]),
            }),
            domain: m.domain.clone(),
        }
    }
}

impl TryFrom<PhaseMapJson> for PhaseMap {
    type Error = Error;
    fn try_from(raw: PhaseMapJson) -> Result<PhaseMap> {
        let mut map = PhaseMap::new(parse(&raw.x1)?, parse(&raw.x2)?, parse(&raw.x3)?);
        if let Some(inv) = raw.inverse {
            // image-side expressions accept X1/X2/X3 spellings too
            let norm = |s: &str| s.replace("X1", "x1").replace("X2", "x2").replace("X3", "x3");
            map = map.with_inverse(
                parse(&norm(&inv.x1))?,
                parse(&norm(&inv.x2))?,
                parse(&norm(&inv.x3))?,
            );
        }
        map.domain = raw.domain;
        Ok(map)
    }
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = det3_num(a);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for col in 0..3 {
        let mut m = a;
        for (row, entry) in b.iter().enumerate() {
            m[row][col] = *entry;
        }
        out[col] = det3_num(m) / det;
    }
    Some(out)
}

pub(crate) fn det3_num(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// How the map classifies under the bracket criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicityKind {
    /// `{X1,X2,X3} = 1`: canonoid for every pair, bracket preserving.
    Canonical,
    /// `{X1,X2,X3}` is a constant other than 1: canonoid with respect to
    /// all Hamiltonian pairs, but not bracket preserving.
    CanonoidUniversal,
    /// Non-constant bracket: at most canonoid with respect to specific
    /// pairs.
    NotUniversal,
}

#[derive(Debug, Clone, Serialize)]
pub struct CanonicityVerdict {
    pub kind: CanonicityKind,
    /// `{X1,X2,X3}`, simplified, in source coordinates.
    #[serde(serialize_with = "crate::expr::serialize_expr")]
    pub bracket: Expr,
    /// The constant value when the bracket is constant.
    pub constant: Option<f64>,
}

/// `{X1, X2, X3}` of the map.
pub fn map_bracket(m: &PhaseMap) -> Expr {
    m.bracket()
}

/// Classify the map as canonical / universally canonoid / not universal.
pub fn classify(m: &PhaseMap, d: &Domain) -> Result<CanonicityVerdict> {
    let bracket = m.bracket();
    let one = equiv(&bracket, &Expr::one(), d)?;
    if one.equivalent {
        return Ok(CanonicityVerdict {
            kind: CanonicityKind::Canonical,
            bracket,
            constant: Some(1.0),
        });
    }
    let probe = d.any_safe_point(&[&bracket])?;
    let value = eval(&bracket, &probe)?;
    let constant = equiv(&bracket, &Expr::num(value), d)?;
    if constant.equivalent {
        return Ok(CanonicityVerdict {
            kind: CanonicityKind::CanonoidUniversal,
            bracket,
            constant: Some(value),
        });
    }
    Ok(CanonicityVerdict {
        kind: CanonicityKind::NotUniversal,
        bracket,
        constant: None,
    })
}

/// Divergence criterion for `m` being canonoid with respect to `pair`:
/// `Σ_i ∂Ẋ_i/∂X_i = 0` with `Ẋ` taken along the flow of the pair.
///
/// With a symbolic inverse the divergence is formed as an expression in
/// the image coordinates and tested on `d` as an image box. Without one,
/// the divergence is evaluated numerically at source samples through the
/// chain rule `Σ_ij ∂Ẋ_i/∂x_j (J⁻¹)_{ji}`.
pub fn canonoid_divergence(
    m: &PhaseMap,
    pair: &HamiltonPair,
    d: &Domain,
) -> Result<CheckReport> {
    if m.inverse_components().is_some() {
        let vel = m.image_velocity_in_image(pair)?;
        let mut div = Expr::zero();
        for (i, v) in Var::COORDS.iter().enumerate() {
            div = div + diff(&vel[i], *v);
        }
        let div = simplify(&div);
        let r = equiv(&div, &Expr::zero(), d)?;
        return Ok(CheckReport::new(vec![IdentityCheck::from_equiv(
            "canonoid_divergence",
            &r,
        )]));
    }

    let vel = m.image_velocity(pair);
    let vel_jac = jacobian3(&vel, Var::COORDS);
    let map_jac = m.jacobian();
    let exprs: Vec<&Expr> = vel_jac
        .iter()
        .chain(map_jac.iter())
        .flatten()
        .collect();
    let points = d.sample_safe(&exprs)?;
    let mut worst = 0.0_f64;
    let mut worst_point = points[0].clone();
    for p in &points {
        let mut a = [[0.0; 3]; 3];
        let mut j = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] = eval(&vel_jac[r][c], p)?;
                j[r][c] = eval(&map_jac[r][c], p)?;
            }
        }
        let jinv = invert3_num(j).ok_or_else(|| {
            Error::InvalidInput("map Jacobian is singular at a sample point".into())
        })?;
        let mut div = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                div += a[i][k] * jinv[k][i];
            }
        }
        if div.abs() > worst {
            worst = div.abs();
            worst_point = p.clone();
        }
    }
    let check = IdentityCheck {
        label: "canonoid_divergence".into(),
        pass: worst <= d.tol,
        residual: worst,
        worst_point: Some(worst_point),
        note: Some("numeric chain-rule fallback (no symbolic inverse)".into()),
    };
    Ok(CheckReport::new(vec![check]))
}

fn invert3_num(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = det3_num(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let cof = |r1: usize, c1: usize, r2: usize, c2: usize| {
        m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
    };
    // adjugate / det
    let adj = [
        [cof(1, 1, 2, 2), -cof(0, 1, 2, 2), cof(0, 1, 1, 2)],
        [-cof(1, 0, 2, 2), cof(0, 0, 2, 2), -cof(0, 0, 1, 2)],
        [cof(1, 0, 2, 1), -cof(0, 0, 2, 1), cof(0, 0, 1, 1)],
    ];
    Some(std::array::from_fn(|i| {
        std::array::from_fn(|j| adj[i][j] / det)
    }))
}

const CYCLES: [(usize, usize, usize); 3] = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];

/// All eighteen direct conditions, tested in the image coordinates:
/// `∂X_i/∂x_l = ∂(x_m,x_n)/∂(X_j,X_k)` and
/// `∂x_i/∂X_l = ∂(X_m,X_n)/∂(x_j,x_k)` for cyclic `(i,j,k)`, `(l,m,n)`.
pub fn direct_conditions(m: &PhaseMap, d: &Domain) -> Result<CheckReport> {
    let inv = m.require_inverse()?;
    let comps = m.components();
    let mut report = CheckReport::empty();
    for (i, j, k) in CYCLES {
        for (l, mm, n) in CYCLES {
            let lhs = m.push_forward(&diff(&comps[i], Var::COORDS[l]))?;
            let rhs = jacobian2_det(&inv[mm], &inv[n], Var::COORDS[j], Var::COORDS[k]);
            let r = equiv(&lhs, &rhs, d)?;
            report.push(IdentityCheck::from_equiv(
                format!("direct_fwd[X{}/x{}]", i + 1, l + 1),
                &r,
            ));
        }
    }
    for (i, j, k) in CYCLES {
        for (l, mm, n) in CYCLES {
            let lhs = diff(&inv[i], Var::COORDS[l]);
            let rhs = m.push_forward(&jacobian2_det(
                &comps[mm],
                &comps[n],
                Var::COORDS[j],
                Var::COORDS[k],
            ))?;
            let r = equiv(&lhs, &rhs, d)?;
            report.push(IdentityCheck::from_equiv(
                format!("direct_inv[x{}/X{}]", i + 1, l + 1),
                &r,
            ));
        }
    }
    Ok(report)
}

/// Transport the Hamilton functions of a time-independent map:
/// `K_α(X, t) = H_α(x(X), t)`.
pub fn transport_hamiltonians(m: &PhaseMap, pair: &HamiltonPair) -> Result<HamiltonPair> {
    if m.is_time_dependent() {
        return Err(Error::TimeDependentMap);
    }
    let k1 = m.push_forward(&pair.h1)?;
    let k2 = m.push_forward(&pair.h2)?;
    Ok(HamiltonPair::new(
        k1,
        k2,
        format!("{} (transported)", pair.label),
    ))
}

/// Coordinate system a candidate Hamiltonian pair is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KCoords {
    /// Expressions in the image coordinates `X`.
    Image,
    /// Expressions in the source coordinates `x` (already composed with
    /// the map).
    Source,
}

/// The interior-product coefficients
/// `f_ij = ∂(H1,H2)/∂(x_i,x_j) + Σ_cyc ∂(X_k,X_l)/∂(x_i,x_j) ∂X_m/∂t`
/// for `(i,j) = (2,3), (3,1), (1,2)`.
pub fn fij_coefficients(m: &PhaseMap, pair: &HamiltonPair) -> [Expr; 3] {
    let comps = m.components();
    let index_pairs = [(1, 2), (2, 0), (0, 1)];
    index_pairs.map(|(i, j)| {
        let mut acc = jacobian2_det(&pair.h1, &pair.h2, Var::COORDS[i], Var::COORDS[j]);
        for (k, l, mm) in CYCLES {
            acc = acc
                + jacobian2_det(&comps[k], &comps[l], Var::COORDS[i], Var::COORDS[j])
                    * diff(&comps[mm], Var::T);
        }
        simplify(&acc)
    })
}

/// Verify that `k` serves as the new Hamiltonian pair for `m` applied to
/// the dynamics of `pair`.
///
/// Identities checked (all require the symbolic inverse):
///
/// - covariance `Ẋ_i = {X_i, K1, K2}_X` — the defining property;
/// - the transport-invariance form `Ẋ_i ∂K_α/∂X_i = 0`;
/// - the source-side Pfaffian `f_[ij ∂K_α/∂x_k] = 0`;
/// - when the map is canonical, the interior-product system
///   `∂(K1,K2)/∂(x_i,x_j) = f_ij` (it presumes a unit bracket and is
///   skipped otherwise).
pub fn verify_new_hamiltonians(
    m: &PhaseMap,
    pair: &HamiltonPair,
    k: &HamiltonPair,
    k_coords: KCoords,
    d: &Domain,
) -> Result<CheckReport> {
    let inv = m.require_inverse()?;
    let (k1_img, k2_img, k1_src, k2_src) = match k_coords {
        KCoords::Image => (
            k.h1.clone(),
            k.h2.clone(),
            m.pull_back(&k.h1),
            m.pull_back(&k.h2),
        ),
        KCoords::Source => (
            simplify(&k.h1.substitute(inv)),
            simplify(&k.h2.substitute(inv)),
            k.h1.clone(),
            k.h2.clone(),
        ),
    };

    let mut report = CheckReport::empty();

    // covariance: image velocity matches the bracket of the K pair
    let vel = m.image_velocity_in_image(pair)?;
    for (i, v) in Var::COORDS.iter().enumerate() {
        let generated = nambu_bracket(&Expr::var(*v), &k1_img, &k2_img);
        let r = equiv(&vel[i], &generated, d)?;
        report.push(IdentityCheck::from_equiv(
            format!("covariance[X{}]", i + 1),
            &r,
        ));
    }

    // Ẋ_i ∂K_α/∂X_i = 0
    for (alpha, k_img) in [(1, &k1_img), (2, &k2_img)] {
        let mut acc = Expr::zero();
        for (i, v) in Var::COORDS.iter().enumerate() {
            acc = acc + vel[i].clone() * diff(k_img, *v);
        }
        let acc = simplify(&acc);
        let r = equiv(&acc, &Expr::zero(), d)?;
        report.push(IdentityCheck::from_equiv(
            format!("transport_invariance[K{alpha}]"),
            &r,
        ));
    }

    // f_[ij ∂K_α/∂x_k] = 0 in the source coordinates
    let fij = fij_coefficients(m, pair);
    for (alpha, k_src) in [(1, &k1_src), (2, &k2_src)] {
        let mut acc = Expr::zero();
        for (idx, v) in Var::COORDS.iter().enumerate() {
            acc = acc + fij[idx].clone() * diff(k_src, *v);
        }
        let acc = simplify(&acc);
        let r = equiv(&acc, &Expr::zero(), d)?;
        report.push(IdentityCheck::from_equiv(
            format!("pfaffian_source[K{alpha}]"),
            &r,
        ));
    }

    // ∂(K1,K2)/∂(x_i,x_j) = f_ij holds for canonical maps only
    if classify(m, d)?.kind == CanonicityKind::Canonical {
        let labels = ["23", "31", "12"];
        let index_pairs = [(1, 2), (2, 0), (0, 1)];
        for (slot, (i, j)) in index_pairs.iter().enumerate() {
            let lhs = jacobian2_det(&k1_src, &k2_src, Var::COORDS[*i], Var::COORDS[*j]);
            let r = equiv(&lhs, &fij[slot], d)?;
            report.push(IdentityCheck::from_equiv(
                format!("interior_product[f{}]", labels[slot]),
                &r,
            ));
        }
    }

    Ok(report)
}

/// Bracket preservation of a canonical map on a concrete function triple:
/// `{f,g,h}_x` at `x` equals `{f∘m⁻¹, g∘m⁻¹, h∘m⁻¹}_X` at `X = m(x)`.
///
/// Without a symbolic inverse the image-side bracket is computed by finite
/// differences in the image coordinates, inverting each stencil point by
/// Newton iteration seeded at the sampled preimage.
pub fn bracket_preservation(
    m: &PhaseMap,
    f: &Expr,
    g: &Expr,
    h: &Expr,
    d: &Domain,
) -> Result<CheckReport> {
    let source_bracket = nambu_bracket(f, g, h);
    let note = match classify(m, d)?.kind {
        CanonicityKind::Canonical => None,
        _ => Some("map is not canonical; preservation is not expected".to_string()),
    };

    let mut exprs: Vec<&Expr> = vec![&source_bracket];
    exprs.extend(m.components().iter());
    let image_bracket = m.inverse_components().map(|inv| {
        nambu_bracket(
            &simplify(&f.substitute(inv)),
            &simplify(&g.substitute(inv)),
            &simplify(&h.substitute(inv)),
        )
    });

    let points = d.sample_safe(&exprs)?;
    let mut worst = 0.0_f64;
    let mut worst_point = points[0].clone();
    for p in &points {
        let lhs = eval(&source_bracket, p)?;
        let image = p.with_coords(m.apply(p)?);
        let rhs = match &image_bracket {
            Some(expr) => eval(expr, &image)?,
            None => fd_image_bracket(m, [f, g, h], &image, p.coords())?,
        };
        let residual = (lhs - rhs).abs() / 1.0_f64.max(lhs.abs()).max(rhs.abs());
        if residual > worst {
            worst = residual;
            worst_point = p.clone();
        }
    }
    // finite differences cap the attainable accuracy in the Newton path
    let tol = if image_bracket.is_some() { d.tol } else { d.tol.max(1e-6) };
    let mut check = IdentityCheck {
        label: "bracket_preservation".into(),
        pass: worst <= tol,
        residual: worst,
        worst_point: Some(worst_point),
        note,
    };
    if image_bracket.is_none() {
        check.note = Some(match check.note {
            Some(n) => format!("{n}; finite-difference/Newton fallback"),
            None => "finite-difference/Newton fallback".into(),
        });
    }
    Ok(CheckReport::new(vec![check]))
}

/// Image-side bracket by central finite differences around `image`,
/// inverting stencil points with Newton seeded at the known preimage.
fn fd_image_bracket(
    m: &PhaseMap,
    fns: [&Expr; 3],
    image: &Point,
    preimage_seed: [f64; 3],
) -> Result<f64> {
    const FD_H: f64 = 1e-6;
    let mut grads = [[0.0; 3]; 3];
    for axis in 0..3 {
        let shifted = |sign: f64| -> Result<[f64; 3]> {
            let mut coords = image.coords();
            coords[axis] += sign * FD_H;
            let x = m.newton_invert(&image.with_coords(coords), preimage_seed)?;
            let p = image.with_coords(x);
            Ok([
                eval(fns[0], &p)?,
                eval(fns[1], &p)?,
                eval(fns[2], &p)?,
            ])
        };
        let plus = shifted(1.0)?;
        let minus = shifted(-1.0)?;
        for row in 0..3 {
            grads[row][axis] = (plus[row] - minus[row]) / (2.0 * FD_H);
        }
    }
    Ok(det3_num(grads))
}

/// Compare the transported trajectory with the trajectory of the
/// transformed pair: integrate `x(t)` under `pair`, map it through `m`,
/// and integrate `X(t)` under `k` (image form) from `m(x0)`; report the
/// largest pointwise deviation.
pub fn covariance_check(
    m: &PhaseMap,
    pair: &HamiltonPair,
    k: &HamiltonPair,
    x0: &Point,
    t_end: f64,
    h: f64,
    tol: f64,
) -> Result<CheckReport> {
    let source = crate::dynamics::integrate_flow(pair, x0, t_end, h)?;
    let image_start = x0.with_coords(m.apply(x0)?);
    let image = crate::dynamics::integrate_flow(k, &image_start, t_end, h)?;
    if source.truncated || image.truncated {
        return Err(Error::NonFiniteState {
            t: source.samples.last().map(|(t, _)| *t).unwrap_or(x0.t),
        });
    }

    let mut deviation = 0.0_f64;
    for ((t_a, xa), (_, xb)) in source.samples.iter().zip(image.samples.iter()) {
        let mapped = m.apply(&x0.with_coords(*xa).with_t(*t_a))?;
        for c in 0..3 {
            deviation = deviation.max((mapped[c] - xb[c]).abs());
        }
    }
    Ok(CheckReport::new(vec![IdentityCheck::from_residual(
        "trajectory_deviation",
        deviation,
        tol,
    )]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate_flow;
    use crate::expr::parse;

    fn p(text: &str) -> Expr {
        parse(text).unwrap()
    }

    fn x3_squared_map() -> PhaseMap {
        PhaseMap::new(p("x1"), p("x2"), p("x3^2")).with_inverse(p("x1"), p("x2"), p("sqrt(x3)"))
    }

    fn x3sq_domain() -> Domain {
        Domain::default().with_x3(0.5, 2.0)
    }

    fn rotation_pair() -> HamiltonPair {
        HamiltonPair::new(p("(x1^2+x2^2)/2"), p("x3^2/2"), "rotation-about-x3")
    }

    fn sphere_plane() -> HamiltonPair {
        HamiltonPair::new(p("(x1^2+x2^2+x3^2)/2"), p("x1+x2+x3"), "sphere-plane")
    }

    fn rotation_x1_map() -> PhaseMap {
        PhaseMap::new(
            p("x1"),
            p("x2*cos(t)+x3*sin(t)"),
            p("-x2*sin(t)+x3*cos(t)"),
        )
        .with_inverse(p("x1"), p("x2*cos(t)-x3*sin(t)"), p("x2*sin(t)+x3*cos(t)"))
    }

    fn scaling_map() -> PhaseMap {
        PhaseMap::new(p("a*x1"), p("b*x2"), p("c*x3")).with_inverse(
            p("x1/a"),
            p("x2/b"),
            p("x3/c"),
        )
    }

    #[test]
    fn map_bracket_examples() {
        let d = Domain::default()
            .with_param("a", 2.0)
            .with_param("b", 3.0)
            .with_param("c", 0.25);
        let r = equiv(&map_bracket(&scaling_map()), &p("a*b*c"), &d).unwrap();
        assert!(r.equivalent);

        let r = equiv(&map_bracket(&x3_squared_map()), &p("2*x3"), &Domain::default()).unwrap();
        assert!(r.equivalent);

        let r = equiv(&map_bracket(&rotation_x1_map()), &Expr::one(), &Domain::default()).unwrap();
        assert!(r.equivalent);
    }

    #[test]
    fn classify_identity_and_scaling() {
        let d = Domain::default();
        let verdict = classify(&PhaseMap::identity(), &d).unwrap();
        assert_eq!(verdict.kind, CanonicityKind::Canonical);

        let bound = Domain::default()
            .with_param("a", 2.0)
            .with_param("b", 3.0)
            .with_param("c", 1.0);
        let verdict = classify(&scaling_map(), &bound).unwrap();
        assert_eq!(verdict.kind, CanonicityKind::CanonoidUniversal);
        assert!((verdict.constant.unwrap() - 6.0).abs() <= 1e-9);

        let verdict = classify(&x3_squared_map(), &d).unwrap();
        assert_eq!(verdict.kind, CanonicityKind::NotUniversal);
        assert!(verdict.constant.is_none());
    }

    #[test]
    fn canonoid_divergence_passes_for_the_squared_map() {
        let report = canonoid_divergence(&x3_squared_map(), &rotation_pair(), &x3sq_domain())
            .unwrap();
        assert!(report.pass, "residual {}", report.max_residual());
    }

    #[test]
    fn canonoid_divergence_passes_for_canonical_maps_with_any_pair() {
        let report = canonoid_divergence(&rotation_x1_map(), &sphere_plane(), &Domain::default())
            .unwrap();
        assert!(report.pass);
        let report =
            canonoid_divergence(&PhaseMap::identity(), &rotation_pair(), &Domain::default())
                .unwrap();
        assert!(report.pass);
    }

    #[test]
    fn canonoid_divergence_fails_for_incompatible_pair() {
        // with H1 = x1 x3, H2 = x2 the divergence is identically 1
        let pair = HamiltonPair::new(p("x3*x1"), p("x2"), "incompatible");
        let vel = x3_squared_map()
            .image_velocity_in_image(&pair)
            .unwrap();
        let mut div = Expr::zero();
        for (i, v) in Var::COORDS.iter().enumerate() {
            div = div + diff(&vel[i], *v);
        }
        // symbolic oracle: the divergence really is nonzero (= 1)
        let r = equiv(&simplify(&div), &Expr::one(), &x3sq_domain()).unwrap();
        assert!(r.equivalent, "oracle expects divergence 1");

        let report = canonoid_divergence(&x3_squared_map(), &pair, &x3sq_domain()).unwrap();
        assert!(!report.pass);
    }

    #[test]
    fn canonoid_divergence_numeric_fallback_matches_symbolic_path() {
        let with_inverse = x3_squared_map();
        let without_inverse = PhaseMap::new(p("x1"), p("x2"), p("x3^2"));
        let pair = rotation_pair();
        let d = x3sq_domain();
        assert!(canonoid_divergence(&with_inverse, &pair, &d).unwrap().pass);
        let fallback = canonoid_divergence(&without_inverse, &pair, &d).unwrap();
        assert!(fallback.pass, "residual {}", fallback.max_residual());

        let bad = HamiltonPair::new(p("x3*x1"), p("x2"), "incompatible");
        assert!(!canonoid_divergence(&without_inverse, &bad, &d).unwrap().pass);
    }

    #[test]
    fn direct_conditions_hold_for_identity_and_rotations() {
        let d = Domain::default();
        let report = direct_conditions(&PhaseMap::identity(), &d).unwrap();
        assert!(report.pass);
        assert_eq!(report.identities.len(), 18);
        assert!(report.max_residual() == 0.0);

        let report = direct_conditions(&rotation_x1_map(), &d).unwrap();
        assert!(report.pass, "worst {}", report.max_residual());
    }

    #[test]
    fn direct_conditions_cofactor_oracle_for_fixed_rotation() {
        // independent oracle: for an orthogonal unit-determinant matrix,
        // numeric cofactors equal the entries, which is exactly what the
        // direct conditions assert for a linear map
        let angle = 0.9_f64;
        let (c, s) = (angle.cos(), angle.sin());
        let matrix = [[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]];
        let cofactor = |i: usize, l: usize| {
            let (r1, r2) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c1, c2) = match l {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = matrix[r1][c1] * matrix[r2][c2] - matrix[r1][c2] * matrix[r2][c1];
            if (i + l).is_multiple_of(2) {
                minor
            } else {
                -minor
            }
        };
        for (i, row) in matrix.iter().enumerate() {
            for (l, entry) in row.iter().enumerate() {
                assert!(
                    (cofactor(i, l) - entry).abs() <= 1e-12,
                    "cofactor({i},{l}) differs from the entry"
                );
            }
        }
        let m = crate::decompose::make_linear(matrix).unwrap().map;
        let report = direct_conditions(&m, &Domain::default()).unwrap();
        assert!(report.pass, "worst {}", report.max_residual());
    }

    #[test]
    fn direct_conditions_fail_for_non_unit_scaling() {
        let d = Domain::default()
            .with_param("a", 2.0)
            .with_param("b", 1.0)
            .with_param("c", 1.0);
        let report = direct_conditions(&scaling_map(), &d).unwrap();
        assert!(!report.pass);
        // ∂X1/∂x1 = 2 but ∂(x2,x3)/∂(X2,X3) = 1
        assert!(report
            .failed_labels()
            .contains(&"direct_fwd[X1/x1]"));
    }

    #[test]
    fn transport_examples() {
        let d = Domain::default()
            .with_param("g1", 1.0)
            .with_param("g2", 2.0)
            .with_param("g3", 0.5);
        let euler_map = PhaseMap::new(p("x1/g1"), p("x2/g2"), p("x3/g3")).with_inverse(
            p("g1*x1"),
            p("g2*x2"),
            p("g3*x3"),
        );
        let euler = HamiltonPair::new(
            p("(x1^2/g1^2 - x2^2/g2^2)/2"),
            p("(x1^2/g1^2 - x3^2/g3^2)/2"),
            "euler",
        );
        let k = transport_hamiltonians(&euler_map, &euler).unwrap();
        assert!(equiv(&k.h1, &p("(x1^2-x2^2)/2"), &d).unwrap().equivalent);
        assert!(equiv(&k.h2, &p("(x1^2-x3^2)/2"), &d).unwrap().equivalent);

        let identity = PhaseMap::identity().with_inverse(p("x1"), p("x2"), p("x3"));
        let pair = sphere_plane();
        let k = transport_hamiltonians(&identity, &pair).unwrap();
        assert!(equiv(&k.h1, &pair.h1, &Domain::default()).unwrap().equivalent);

        // time-dependent maps are refused
        assert!(matches!(
            transport_hamiltonians(&rotation_x1_map(), &pair),
            Err(Error::TimeDependentMap)
        ));
    }

    #[test]
    fn verify_new_hamiltonians_for_the_canonoid_example() {
        let k = HamiltonPair::new(p("(x1^2+x2^2)/2"), p("2/3*x3^(3/2)"), "new-pair");
        let report = verify_new_hamiltonians(
            &x3_squared_map(),
            &rotation_pair(),
            &k,
            KCoords::Image,
            &x3sq_domain(),
        )
        .unwrap();
        assert!(report.pass, "failed: {:?}", report.failed_labels());
        // the interior-product identities are skipped: not a canonical map
        assert!(!report
            .identities
            .iter()
            .any(|c| c.label.starts_with("interior_product")));
    }

    #[test]
    fn verify_new_hamiltonians_for_the_time_dependent_rotation() {
        // the rotated sphere-plane pair, given in the source coordinates
        let k = HamiltonPair::new(p("(x1^2+x2^2+x3^2)/2"), p("2*x1+x2+x3"), "k-source");
        let report = verify_new_hamiltonians(
            &rotation_x1_map(),
            &sphere_plane(),
            &k,
            KCoords::Source,
            &Domain::default(),
        )
        .unwrap();
        assert!(report.pass, "failed: {:?}", report.failed_labels());
        // canonical map: the interior-product identities ran
        assert!(report
            .identities
            .iter()
            .any(|c| c.label.starts_with("interior_product")));

        // and the image form matches the stated expression
        let k_img = rotation_x1_map().push_forward(&k.h2).unwrap();
        let want = p("2*x1+(cos(t)+sin(t))*x2+(cos(t)-sin(t))*x3");
        assert!(equiv(&k_img, &want, &Domain::default()).unwrap().equivalent);
    }

    #[test]
    fn verify_new_hamiltonians_rejects_scaled_k() {
        // doubling K2 breaks covariance for the canonoid example
        let wrong = HamiltonPair::new(p("(x1^2+x2^2)/2"), p("4/3*x3^(3/2)"), "wrong");
        let report = verify_new_hamiltonians(
            &x3_squared_map(),
            &rotation_pair(),
            &wrong,
            KCoords::Image,
            &x3sq_domain(),
        )
        .unwrap();
        assert!(!report.pass);
        assert!(report
            .failed_labels()
            .iter()
            .any(|l| l.starts_with("covariance")));

        // and breaks the interior-product system for a canonical map
        let wrong_rot = HamiltonPair::new(p("(x1^2+x2^2+x3^2)/2"), p("2*(2*x1+x2+x3)"), "wrong");
        let report = verify_new_hamiltonians(
            &rotation_x1_map(),
            &sphere_plane(),
            &wrong_rot,
            KCoords::Source,
            &Domain::default(),
        )
        .unwrap();
        assert!(!report.pass);
        assert!(report
            .failed_labels()
            .iter()
            .any(|l| l.starts_with("interior_product")));
    }

    #[test]
    fn bracket_preservation_under_rotation() {
        let d = Domain::default();
        let m = rotation_x1_map();
        let report =
            bracket_preservation(&m, &Expr::x1(), &Expr::x2(), &Expr::x3(), &d).unwrap();
        assert!(report.pass);

        let report = bracket_preservation(
            &m,
            &p("x1^2*x2 + x3"),
            &p("x2*x3 - x1"),
            &p("x3^2 + x1*x2"),
            &d,
        )
        .unwrap();
        assert!(report.pass, "residual {}", report.max_residual());
    }

    #[test]
    fn bracket_preservation_fails_for_volume_scaling() {
        // abc = 2 doubles every bracket
        let d = Domain::default()
            .with_param("a", 2.0)
            .with_param("b", 1.0)
            .with_param("c", 1.0);
        let report = bracket_preservation(
            &scaling_map(),
            &p("x1^2*x2 + x3"),
            &p("x2*x3 - x1"),
            &p("x3^2 + x1*x2"),
            &d,
        )
        .unwrap();
        assert!(!report.pass);
        assert!(report.identities[0].note.is_some());
    }

    #[test]
    fn bracket_preservation_newton_fallback() {
        // same rotation at a frozen angle, no symbolic inverse supplied
        let angle = 0.7_f64;
        let m = PhaseMap::new(
            p("x1"),
            Expr::num(angle.cos()) * Expr::x2() + Expr::num(angle.sin()) * Expr::x3(),
            Expr::num(-angle.sin()) * Expr::x2() + Expr::num(angle.cos()) * Expr::x3(),
        );
        let report = bracket_preservation(
            &m,
            &p("x1*x2"),
            &p("x2+x3^2"),
            &p("x3-x1"),
            &Domain::default(),
        )
        .unwrap();
        assert!(report.pass, "residual {}", report.max_residual());
    }

    #[test]
    fn newton_invert_recovers_preimage() {
        let m = PhaseMap::new(p("x1"), p("x2"), p("x3^2"));
        let source = Point::new(0.4, -0.3, 1.2, 0.0);
        let image = source.with_coords(m.apply(&source).unwrap());
        let preimage = m
            .newton_invert(&image, [0.5, -0.5, 1.0])
            .unwrap();
        for (got, want) in preimage.iter().zip(source.coords()) {
            assert!((got - want).abs() <= 1e-10);
        }
    }

    #[test]
    fn covariance_check_identity_is_exact() {
        let pair = sphere_plane();
        let identity = PhaseMap::identity().with_inverse(p("x1"), p("x2"), p("x3"));
        let report = covariance_check(
            &identity,
            &pair,
            &pair,
            &Point::new(1.0, 0.0, 0.0, 0.0),
            1.0,
            1e-3,
            1e-12,
        )
        .unwrap();
        assert!(report.pass);
        assert_eq!(report.identities[0].residual, 0.0);
    }

    #[test]
    fn covariance_check_sphere_plane_to_oscillator() {
        let s6 = 6.0_f64.sqrt();
        let s2 = 2.0_f64.sqrt();
        let s3 = 3.0_f64.sqrt();
        let m = crate::decompose::make_linear([
            [1.0 / s6, 1.0 / s6, -2.0 / s6],
            [-1.0 / s2, 1.0 / s2, 0.0],
            [1.0 / s3, 1.0 / s3, 1.0 / s3],
        ])
        .unwrap()
        .map;
        let k = HamiltonPair::new(p("(x1^2+x2^2+x3^2)/2"), p("sqrt(3)*x3"), "oscillator");
        let report = covariance_check(
            &m,
            &sphere_plane(),
            &k,
            &Point::new(1.0, 0.0, 0.0, 0.0),
            1.0,
            1e-3,
            1e-6,
        )
        .unwrap();
        assert!(report.pass, "deviation {}", report.identities[0].residual);

        // X3 stays constant along the oscillator trajectory
        let start = Point::new(1.0, 0.0, 0.0, 0.0);
        let image_start = start.with_coords(m.apply(&start).unwrap());
        let traj = integrate_flow(&k, &image_start, 1.0, 1e-3).unwrap();
        let x3_0 = image_start.x3;
        for (_, x) in &traj.samples {
            assert!((x[2] - x3_0).abs() <= 1e-9);
        }
    }

    #[test]
    fn inverse_round_trip_check() {
        let d = x3sq_domain();
        assert!(x3_squared_map().check_inverse(&d).unwrap().pass);
        let broken = PhaseMap::new(p("x1"), p("x2"), p("x3^2")).with_inverse(
            p("x1"),
            p("x2"),
            p("x3"),
        );
        assert!(!broken.check_inverse(&d).unwrap().pass);
    }

    #[test]
    fn phase_map_json_round_trip() {
        let m = x3_squared_map().with_domain(x3sq_domain());
        let value = m.to_json();
        assert_eq!(value["X3"], "x3^2");
        assert_eq!(value["inverse"]["x3"], "sqrt(X3)");
        let back = PhaseMap::from_json(&value).unwrap();
        assert_eq!(back, m);

        let plain: serde_json::Value = serde_json::json!({
            "X1": "x2", "X2": "-x1", "X3": "x3",
        });
        let m = PhaseMap::from_json(&plain).unwrap();
        assert_eq!(m.components()[1], -Expr::x1());
        assert!(PhaseMap::from_json(&serde_json::json!({"X1": "x1"})).is_err());
    }

    #[test]
    fn time_dependence_flag() {
        assert!(rotation_x1_map().is_time_dependent());
        assert!(!x3_squared_map().is_time_dependent());
        // a t that cancels still counts as time independent
        let m = PhaseMap::new(p("x1 + t - t"), p("x2"), p("x3"));
        assert!(!m.is_time_dependent());
    }
}
