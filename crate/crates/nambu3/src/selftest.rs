//! Registry-wide verification sweep.
//!
//! Every example entry is run through each check its stored artifacts
//! support: classification, inverse round trips, direct conditions,
//! canonoid divergence, new-Hamiltonian verification, Hamiltonian
//! transport, generating-function identities, the time-part identity,
//! trajectory covariance, generator fields, Lie series against both the
//! closed form and the numeric flow, and sequence composition. Check
//! labels are prefixed with the owning module so a filter like `lie`
//! selects one module's checks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::canonical::{
    canonoid_divergence, classify, direct_conditions, transport_hamiltonians,
    verify_new_hamiltonians, KCoords,
};
use crate::expr::{equiv, Domain, Expr};
use crate::genfun::{pfaffian_residual_x, verify_genfun, verify_time_part};
use crate::lie::{cross_check, lie_series};
use crate::registry::{registry, ExampleEntry};
use crate::report::{CheckReport, IdentityCheck};
use crate::Result;

/// Deliberate defects for exercising the failure paths end to end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Injection {
    /// Double `K2` of the squared-coordinate example's new pair.
    WrongK,
    /// Rescale the scaling example to `a*b*c = 6`.
    BadScaling,
}

impl Injection {
    pub fn from_name(name: &str) -> Option<Injection> {
        match name {
            "wrong-k" => Some(Injection::WrongK),
            "bad-scaling" => Some(Injection::BadScaling),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SelftestItem {
    pub entry: &'static str,
    pub check: String,
    pub report: CheckReport,
}

#[derive(Debug, Clone, Default)]
pub struct SelftestOutcome {
    pub items: Vec<SelftestItem>,
}

impl SelftestOutcome {
    pub fn pass(&self) -> bool {
        self.items.iter().all(|item| item.report.pass)
    }

    /// `entry: check: identity` labels of everything that failed.
    pub fn failures(&self) -> Vec<String> {
        self.items
            .iter()
            .filter(|item| !item.report.pass)
            .map(|item| {
                format!(
                    "{}: {}: {}",
                    item.entry,
                    item.check,
                    item.report.failed_labels().join(", ")
                )
            })
            .collect()
    }
}

fn apply_injection(entries: &mut [ExampleEntry], injection: Injection) {
    match injection {
        Injection::WrongK => {
            for entry in entries.iter_mut() {
                if entry.id == "canonoid-x3sq" {
                    if let Some(target) = entry.target_pair.as_mut() {
                        target.h2 = Expr::num(2.0) * target.h2.clone();
                        target.label = format!("{} (injected defect)", target.label);
                    }
                }
            }
        }
        Injection::BadScaling => {
            for entry in entries.iter_mut() {
                if entry.id == "scaling" {
                    entry.domain = entry
                        .domain
                        .clone()
                        .with_param("a", 2.0)
                        .with_param("b", 3.0)
                        .with_param("c", 1.0);
                }
            }
        }
    }
}

/// Run the sweep. `filter` keeps checks whose entry id or label contains
/// the substring; `injection` plants a defect first.
pub fn run(filter: Option<&str>, injection: Option<Injection>) -> Result<SelftestOutcome> {
    let mut entries = registry();
    if let Some(inj) = injection {
        apply_injection(&mut entries, inj);
    }

    let mut outcome = SelftestOutcome::default();
    for entry in &entries {
        let items = run_entry(entry)?;
        outcome.items.extend(items);
    }
    if let Some(f) = filter {
        outcome
            .items
            .retain(|item| item.entry.contains(f) || item.check.contains(f));
    }
    Ok(outcome)
}

fn equiv_check(label: &str, a: &Expr, b: &Expr, d: &Domain) -> Result<IdentityCheck> {
    let r = equiv(a, b, d)?;
    Ok(IdentityCheck::from_equiv(label, &r))
}

fn run_entry(entry: &ExampleEntry) -> Result<Vec<SelftestItem>> {
    let mut items = Vec::new();
    let d = &entry.domain;
    let image_d = entry.image_domain.as_ref().unwrap_or(d);
    let mut push = |check: &str, report: CheckReport| {
        items.push(SelftestItem {
            entry: entry.id,
            check: check.to_string(),
            report,
        });
    };

    if let Some(map) = &entry.map {
        if let Some(expected) = entry.expected {
            let verdict = classify(map, d)?;
            let pass = verdict.kind == expected;
            let check = IdentityCheck {
                label: "classification".into(),
                pass,
                residual: 0.0,
                worst_point: None,
                note: Some(format!(
                    "expected {expected:?}, found {:?} (bracket {})",
                    verdict.kind, verdict.bracket
                )),
            };
            push("canonical/classification", CheckReport::new(vec![check]));
        }
        if map.inverse_components().is_some() {
            push("canonical/inverse_round_trip", map.check_inverse(image_d)?);
            if entry.expected == Some(crate::canonical::CanonicityKind::Canonical) {
                push("canonical/direct_conditions", direct_conditions(map, image_d)?);
            }
        }
    }

    if let Some(pair) = &entry.source_pair {
        push("dynamics/independence", pair.check_independence(d)?);
        push(
            "dynamics/velocity_divergence",
            pair.nh_rhs().divergence_check(d)?,
        );
    }

    if let (Some(map), Some(pair)) = (&entry.map, &entry.source_pair) {
        if map.inverse_components().is_some() {
            push(
                "canonical/canonoid_divergence",
                canonoid_divergence(map, pair, image_d)?,
            );
            if let Some(target) = &entry.target_pair {
                push(
                    "canonical/new_hamiltonians",
                    verify_new_hamiltonians(map, pair, target, KCoords::Image, image_d)?,
                );
                let canonical =
                    entry.expected == Some(crate::canonical::CanonicityKind::Canonical);
                if canonical && !map.is_time_dependent() {
                    let transported = transport_hamiltonians(map, pair)?;
                    let report = CheckReport::new(vec![
                        equiv_check("transport[K1]", &transported.h1, &target.h1, image_d)?,
                        equiv_check("transport[K2]", &transported.h2, &target.h2, image_d)?,
                    ]);
                    push("canonical/transport", report);
                }
            }
        }
    }

    if let (Some(map), Some(gf)) = (&entry.map, &entry.genfuns) {
        let mut report = verify_genfun(map, gf, d)?;
        report.merge(pfaffian_residual_x(map, gf, d)?);
        push("genfun/verification", report);

        if let Some(pair) = &entry.source_pair {
            let k_source = entry.k_source.clone().or_else(|| {
                // for a time-independent map the transported pair pulled
                // back to the source coordinates is the pair itself
                (!map.is_time_dependent() && entry.target_pair.is_some())
                    .then(|| pair.clone())
            });
            if let Some(k_source) = k_source {
                push("genfun/time_part", verify_time_part(map, gf, pair, &k_source, d)?);
            }
        }
    }

    if let (Some(map), Some(pair), Some(target), Some(start)) = (
        &entry.map,
        &entry.source_pair,
        &entry.target_pair,
        &entry.flow_start,
    ) {
        let mut start = start.clone();
        for (name, value) in &d.params {
            start.params.entry(name.clone()).or_insert(*value);
        }
        push(
            "canonical/covariance_trajectories",
            crate::canonical::covariance_check(map, pair, target, &start, 1.0, 1e-3, 1e-6)?,
        );
    }

    if let Some(g) = &entry.generators {
        push("lie/field_divergence", g.field().divergence_check(d)?);

        let eps = d.params.get("eps").copied().unwrap_or(0.5);
        push("lie/series_vs_flow", cross_check(g, eps, 16, 1e-3, d)?);

        if let Some(map) = &entry.map {
            let series = lie_series(g, eps, 20)?.series_exprs();
            let mut report = CheckReport::empty();
            for (i, comp) in map.components().iter().enumerate() {
                report.push(equiv_check(
                    &format!("series_matches_map[X{}]", i + 1),
                    &series[i],
                    comp,
                    d,
                )?);
            }
            push("lie/series_matches_closed_form", report);
        }
    }

    if let (Some(seq), Some(target)) = (&entry.sequence, &entry.sequence_target) {
        let composite = seq.compose();
        let mut report = crate::decompose::verify_equal(&composite, target, d)?;
        for (k, partial) in seq.partial_composites().iter().enumerate() {
            report.push(equiv_check(
                &format!("partial_bracket[{k}]"),
                &partial.bracket(),
                &Expr::one(),
                d,
            )?);
        }
        // parameterized sequences: re-verify at random parameter draws
        if !d.params.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
            for draw in 0..5 {
                let mut bound = d.clone();
                for name in d.params.keys() {
                    bound = bound.with_param(name, rng.gen_range(-2.0..2.0));
                }
                for i in 0..3 {
                    report.push(equiv_check(
                        &format!("component_draw{draw}[X{}]", i + 1),
                        &composite.components()[i],
                        &target.components()[i],
                        &bound,
                    )?);
                }
            }
        }
        push("decompose/composition", report);
    }

    Ok(items)
}
