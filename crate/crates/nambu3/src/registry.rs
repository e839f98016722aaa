//! Registry of ready-made example systems.
//!
//! Each entry bundles a transformation with whatever companions it has —
//! source and transformed Hamiltonian pairs, generating functions,
//! infinitesimal generators, a decomposition sequence, a safe sampling
//! domain, and the expected classification. The CLI resolves `--example`
//! ids here and the self test sweeps the whole registry.

use crate::canonical::{CanonicityKind, PhaseMap};
use crate::decompose::{
    make_gauge, make_interchange, make_linear, make_point1, make_scaling, CTSequence,
    Orientation, Plane,
};
use crate::dynamics::HamiltonPair;
use crate::expr::{parse, Domain, Expr, Point};
use crate::genfun::GenFunPair;
use crate::lie::GeneratorPair;

#[derive(Debug, Clone)]
pub struct ExampleEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub map: Option<PhaseMap>,
    /// Hamiltonian pair driving the source dynamics.
    pub source_pair: Option<HamiltonPair>,
    /// Transformed pair in the image coordinates.
    pub target_pair: Option<HamiltonPair>,
    /// The same transformed pair written in the source coordinates, when
    /// the example supplies one.
    pub k_source: Option<HamiltonPair>,
    pub genfuns: Option<GenFunPair>,
    pub generators: Option<GeneratorPair>,
    pub sequence: Option<CTSequence>,
    /// Target the sequence composite must reproduce.
    pub sequence_target: Option<PhaseMap>,
    pub domain: Domain,
    /// Sampling box for image-side identities when the entry's map image
    /// differs too much from `domain` (restricted branches, say).
    pub image_domain: Option<Domain>,
    pub expected: Option<CanonicityKind>,
    /// Start point for trajectory comparisons.
    pub flow_start: Option<Point>,
}

impl ExampleEntry {
    fn bare(id: &'static str, description: &'static str, domain: Domain) -> ExampleEntry {
        ExampleEntry {
            id,
            description,
            map: None,
            source_pair: None,
            target_pair: None,
            k_source: None,
            genfuns: None,
            generators: None,
            sequence: None,
            sequence_target: None,
            domain,
            image_domain: None,
            expected: None,
            flow_start: None,
        }
    }

    /// A start point carrying the entry's default parameter bindings.
    pub fn start_point(&self, coords: [f64; 3], t: f64) -> Point {
        Point {
            x1: coords[0],
            x2: coords[1],
            x3: coords[2],
            t,
            params: self.domain.params.clone(),
        }
    }
}

fn e(text: &str) -> Expr {
    parse(text).unwrap_or_else(|err| panic!("registry expression `{text}`: {err}"))
}

fn pair(h1: &str, h2: &str, label: &str) -> HamiltonPair {
    HamiltonPair::new(e(h1), e(h2), label)
}

pub fn registry() -> Vec<ExampleEntry> {
    vec![
        canonoid_x3sq(),
        scaling(),
        euler_nahm(),
        linear(),
        takhtajan_rotation(),
        gauge1(),
        gauge2(),
        gauge3(),
        point1(),
        rotation_x1_timedep(),
        ict_rotation(),
        sl(),
        sc(),
    ]
}

pub fn find(id: &str) -> Option<ExampleEntry> {
    registry().into_iter().find(|entry| entry.id == id)
}

pub fn ids() -> Vec<&'static str> {
    registry().iter().map(|entry| entry.id).collect()
}

/// The squared-third-coordinate map: canonoid with respect to the
/// rotation-about-x3 pair but not universally so.
fn canonoid_x3sq() -> ExampleEntry {
    let domain = Domain::default().with_x3(0.5, 2.0);
    let mut entry = ExampleEntry::bare(
        "canonoid-x3sq",
        "X = (x1, x2, x3^2); canonoid for H = ((x1^2+x2^2)/2, x3^2/2) with K2 = (2/3) X3^(3/2)",
        domain,
    );
    entry.map = Some(
        PhaseMap::new(e("x1"), e("x2"), e("x3^2")).with_inverse(
            e("x1"),
            e("x2"),
            e("sqrt(x3)"),
        ),
    );
    entry.source_pair = Some(pair("(x1^2+x2^2)/2", "x3^2/2", "rotation-about-x3"));
    entry.target_pair = Some(pair(
        "(x1^2+x2^2)/2",
        "2/3*x3^(3/2)",
        "rotation-about-x3 (new)",
    ));
    entry.expected = Some(CanonicityKind::NotUniversal);
    entry.flow_start = Some(Point::new(1.0, 0.0, 1.0, 0.0));
    entry
}

/// Diagonal scaling with symbolic factors; canonical iff abc = 1. The
/// generating functions are constants.
fn scaling() -> ExampleEntry {
    let domain = Domain::default()
        .with_param("a", 2.0)
        .with_param("b", 0.5)
        .with_param("c", 1.0);
    let mut entry = ExampleEntry::bare(
        "scaling",
        "X = (a x1, b x2, c x3); canonical iff a*b*c = 1 (defaults a=2, b=0.5, c=1)",
        domain,
    );
    entry.map = Some(
        PhaseMap::new(e("a*x1"), e("b*x2"), e("c*x3")).with_inverse(
            e("x1/a"),
            e("x2/b"),
            e("x3/c"),
        ),
    );
    entry.genfuns = Some(GenFunPair::constant());
    entry.expected = Some(CanonicityKind::Canonical);
    entry
}

/// Rigid-body Euler equations in the scaled form, sent to the Nahm system
/// by the diagonal scaling X_i = x_i / g_i with g1 g2 g3 = 1.
fn euler_nahm() -> ExampleEntry {
    let domain = Domain::default()
        .with_param("g1", 1.0)
        .with_param("g2", 2.0)
        .with_param("g3", 0.5);
    let mut entry = ExampleEntry::bare(
        "euler-nahm",
        "Euler system under X_i = x_i/g_i (g1 g2 g3 = 1) becomes the Nahm system",
        domain,
    );
    entry.map = Some(
        PhaseMap::new(e("x1/g1"), e("x2/g2"), e("x3/g3")).with_inverse(
            e("g1*x1"),
            e("g2*x2"),
            e("g3*x3"),
        ),
    );
    entry.source_pair = Some(pair(
        "(x1^2/g1^2 - x2^2/g2^2)/2",
        "(x1^2/g1^2 - x3^2/g3^2)/2",
        "euler",
    ));
    entry.target_pair = Some(pair("(x1^2-x2^2)/2", "(x1^2-x3^2)/2", "nahm"));
    entry.genfuns = Some(GenFunPair::constant());
    entry.expected = Some(CanonicityKind::Canonical);
    entry.flow_start = Some(
        Point::new(1.0, 0.5, 0.25, 0.0)
            .with_param("g1", 1.0)
            .with_param("g2", 2.0)
            .with_param("g3", 0.5),
    );
    entry
}

/// A concrete unit-determinant linear transformation with the quadratic
/// generating functions of the general linear family.
fn linear() -> ExampleEntry {
    let mut entry = ExampleEntry::bare(
        "linear",
        "X = M x with M = [[1,1,1],[1,0,1],[1,1,0]] (det 1) and its generating functions",
        Domain::default(),
    );
    let step = make_linear([[1.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        .expect("registry linear matrix is regular");
    entry.map = Some(step.map);
    entry.genfuns = Some(GenFunPair::new(
        e("x3 - x2"),
        e("-x1^2/2 - x2^2/2 - x3^2/2 - x1*x2 - x1*x3"),
    ));
    entry.expected = Some(CanonicityKind::Canonical);
    entry
}

/// The rotation aligning the (1,1,1) axis with the third coordinate; it
/// sends the sphere-plane system to the harmonic oscillator.
fn takhtajan_rotation() -> ExampleEntry {
    let s6 = 6.0_f64.sqrt();
    let s2 = 2.0_f64.sqrt();
    let s3 = 3.0_f64.sqrt();
    let mut entry = ExampleEntry::bare(
        "takhtajan-rotation",
        "orthogonal rotation sending the sphere/plane pair to the harmonic oscillator",
        Domain::default(),
    );
    let step = make_linear([
        [1.0 / s6, 1.0 / s6, -2.0 / s6],
        [-1.0 / s2, 1.0 / s2, 0.0],
        [1.0 / s3, 1.0 / s3, 1.0 / s3],
    ])
    .expect("rotation matrix is regular");
    entry.map = Some(step.map);
    entry.source_pair = Some(pair(
        "(x1^2+x2^2+x3^2)/2",
        "x1+x2+x3",
        "sphere-plane",
    ));
    entry.target_pair = Some(pair(
        "(x1^2+x2^2+x3^2)/2",
        "sqrt(3)*x3",
        "harmonic-oscillator",
    ));
    entry.expected = Some(CanonicityKind::Canonical);
    entry.flow_start = Some(Point::new(1.0, 0.0, 0.0, 0.0));
    entry
}

/// First gauge kind: shifts of x2, x3 by functions of x1.
fn gauge1() -> ExampleEntry {
    let mut entry = ExampleEntry::bare(
        "gauge1",
        "X = (x1, x2 + x1^2/2, x3 + x1^2) with its generating functions",
        Domain::default(),
    );
    let step = make_gauge(1, e("x1^2/2"), e("x1^2")).expect("gauge1 shifts are valid");
    entry.map = Some(step.map);
    // F1 = x2 f2' - x3 f1', F2 = -x1^2/2
    entry.genfuns = Some(GenFunPair::new(e("2*x1*x2 - x1*x3"), e("-x1^2/2")));
    entry.expected = Some(CanonicityKind::Canonical);
    entry
}

/// Second gauge kind: shifts of x1, x3 by functions of x2.
fn gauge2() -> ExampleEntry {
    let mut entry = ExampleEntry::bare(
        "gauge2",
        "X = (x1 + x2^2, x2, x3 + x2^3) generated by F1 = g1(x2) x3, F2 = x2",
        Domain::default(),
    );
    let step = make_gauge(2, e("x2^2"), e("x2^3")).expect("gauge2 shifts are valid");
    entry.map = Some(step.map);
    entry.genfuns = Some(GenFunPair::new(e("x2^2*x3"), e("x2")));
    entry.expected = Some(CanonicityKind::Canonical);
    entry
}

/// Third gauge kind: shifts of x1, x2 by functions of x3.
fn gauge3() -> ExampleEntry {
    let mut entry = ExampleEntry::bare(
        "gauge3",
        "X = (x1 + x3^2, x2 + x3^3, x3) generated by F1 = h1(x3) x2, F2 = -x3",
        Domain::default(),
    );
    let step = make_gauge(3, e("x3^2"), e("x3^3")).expect("gauge3 shifts are valid");
    entry.map = Some(step.map);
    entry.genfuns = Some(GenFunPair::new(e("x3^2*x2"), e("-x3")));
    entry.expected = Some(CanonicityKind::Canonical);
    entry
}

/// Point transformation with the arctangent fiber: f1' f2 f3 = 1.
fn point1() -> ExampleEntry {
    let domain = Domain::default()
        .with_x1(0.5, 1.1)
        .with_x2(0.5, 2.0)
        .with_x3(0.5, 2.0);
    let mut entry = ExampleEntry::bare(
        "point1",
        "X = (atan(x1), (1+x1^2) x2, x3), a canonical point transformation",
        domain.clone(),
    );
    let step = make_point1(
        e("atan(x1)"),
        e("1+x1^2"),
        e("1"),
        Some(e("tan(x1)")),
        &domain,
        true,
    )
    .expect("point constraint holds");
    entry.map = Some(step.map);
    entry.expected = Some(CanonicityKind::Canonical);
    entry
}

/// Time-dependent rotation about the x1 axis applied to the sphere-plane
/// system, with the cubic generating function and F2 = t.
fn rotation_x1_timedep() -> ExampleEntry {
    let mut entry = ExampleEntry::bare(
        "rotation-x1-timedep",
        "X = (x1, x2 cos t + x3 sin t, -x2 sin t + x3 cos t) on the sphere-plane pair",
        Domain::default(),
    );
    entry.map = Some(
        PhaseMap::new(
            e("x1"),
            e("x2*cos(t)+x3*sin(t)"),
            e("-x2*sin(t)+x3*cos(t)"),
        )
        .with_inverse(
            e("x1"),
            e("x2*cos(t)-x3*sin(t)"),
            e("x2*sin(t)+x3*cos(t)"),
        ),
    );
    entry.source_pair = Some(pair(
        "(x1^2+x2^2+x3^2)/2",
        "x1+x2+x3",
        "sphere-plane",
    ));
    entry.k_source = Some(pair(
        "(x1^2+x2^2+x3^2)/2",
        "2*x1+x2+x3",
        "rotated (source form)",
    ));
    entry.target_pair = Some(pair(
        "(x1^2+x2^2+x3^2)/2",
        "2*x1+(cos(t)+sin(t))*x2+(cos(t)-sin(t))*x3",
        "rotated",
    ));
    entry.genfuns = Some(GenFunPair::new(
        e("x1/2*(x1^2/3+x2^2+x3^2)"),
        e("t"),
    ));
    entry.expected = Some(CanonicityKind::Canonical);
    entry.flow_start = Some(Point::new(1.0, 0.5, 0.25, 0.0));
    entry
}

/// Rotation about x1 as an infinitesimal transformation: generators
/// G1 = (x2^2 + x3^2)/2, G2 = x1, with the closed-form finite map.
fn ict_rotation() -> ExampleEntry {
    let domain = Domain::default().with_param("eps", 0.5);
    let mut entry = ExampleEntry::bare(
        "ict-rotation",
        "generators G1 = (x2^2+x3^2)/2, G2 = x1 exponentiate to the rotation about x1",
        domain,
    );
    entry.generators = Some(
        GeneratorPair::new(e("(x2^2+x3^2)/2"), e("x1")).expect("generators are time independent"),
    );
    entry.map = Some(
        PhaseMap::new(
            e("x1"),
            e("x2*cos(eps)+x3*sin(eps)"),
            e("-x2*sin(eps)+x3*cos(eps)"),
        )
        .with_inverse(
            e("x1"),
            e("x2*cos(eps)-x3*sin(eps)"),
            e("x2*sin(eps)+x3*cos(eps)"),
        ),
    );
    entry.expected = Some(CanonicityKind::Canonical);
    entry
}

/// Gauge-gauge-gauge-scaling sequence generating the general linear
/// transformation, with symbolic parameters.
fn sl() -> ExampleEntry {
    let domain = Domain::default()
        .with_param("l1", 1.0)
        .with_param("l2", 2.0)
        .with_param("m1", 1.0)
        .with_param("m2", 0.0)
        .with_param("n1", 0.0)
        .with_param("n2", 0.0)
        .with_param("a", 1.0)
        .with_param("b", 1.0)
        .with_param("c", 1.0);
    let mut entry = ExampleEntry::bare(
        "SL",
        "sequence P G3 G2 G1 (rightmost first) generating the linear transformation",
        domain,
    );
    let steps = vec![
        make_scaling(e("a"), e("b"), e("c")).expect("scaling step"),
        make_gauge(3, e("n1*x3"), e("n2*x3")).expect("gauge3 step"),
        make_gauge(2, e("m1*x2"), e("m2*x2")).expect("gauge2 step"),
        make_gauge(1, e("l1*x1"), e("l2*x1")).expect("gauge1 step"),
    ];
    entry.sequence = Some(CTSequence::new(steps));
    entry.sequence_target = Some(PhaseMap::new(
        e("a*x1 + b*m1*x2 + c*(n1+m1*n2)*x3"),
        e("a*l1*x1 + b*(1+l1*m1)*x2 + c*(l1*n1+(1+l1*m1)*n2)*x3"),
        e("a*l2*x1 + b*(m2+m1*l2)*x2 + c*(1+l2*n1+(m2+m1*l2)*n2)*x3"),
    ));
    entry.expected = Some(CanonicityKind::Canonical);
    entry
}

/// Interchange/point sequence decomposing the cylindrical map.
fn sc() -> ExampleEntry {
    let domain = Domain::default()
        .with_x1(0.5, 2.0)
        .with_x2(0.5, 2.0)
        .with_x3(0.5, 2.0);
    let mut entry = ExampleEntry::bare(
        "SC",
        "sequence P2 I2 P1 I1 (rightmost first) decomposing the cylindrical map",
        domain.clone(),
    );
    let steps = vec![
        make_point1(
            e("x1^2/2"),
            e("1/x1"),
            e("1"),
            Some(e("sqrt(2*x1)")),
            &domain,
            true,
        )
        .expect("P2 constraint holds"),
        make_interchange(Plane::P12, Orientation::Minus),
        make_point1(
            e("atan(x1)"),
            e("1+x1^2"),
            e("1"),
            Some(e("tan(x1)")),
            &domain,
            true,
        )
        .expect("P1 constraint holds"),
        make_interchange(Plane::P12, Orientation::Plus),
    ];
    entry.sequence = Some(CTSequence::new(steps));
    entry.sequence_target = Some(PhaseMap::new(
        e("(x1^2+x2^2)/2"),
        e("atan(x2/x1)"),
        e("x3"),
    ));
    // the composed inverse is valid where the angle stays below pi/2
    entry.image_domain = Some(
        Domain::default()
            .with_x1(0.4, 1.2)
            .with_x2(0.4, 1.2)
            .with_x3(0.5, 2.0),
    );
    entry.expected = Some(CanonicityKind::Canonical);
    entry
}
