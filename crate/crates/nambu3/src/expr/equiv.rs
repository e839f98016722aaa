//! Probabilistic expression-equivalence testing by sampling.
//!
//! Two expressions are reported equivalent when their values agree within a
//! relative tolerance at every sampled point of a [`Domain`]. Points where
//! either expression hits a domain violation (division by zero, `ln` of a
//! non-positive value, ...) are rejected and resampled, up to ten times the
//! requested sample count.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{eval, EvalError, Expr, Point};

const SAMPLE_SEED: u64 = 0x6e616d_62753364; // fixed: verdicts are reproducible
const OVERSAMPLE_FACTOR: usize = 10;

/// Sampling box with per-variable closed intervals, sample count, tolerance,
/// and parameter bindings applied to every sampled point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
    pub x3: (f64, f64),
    pub t: (f64, f64),
    #[serde(rename = "n", default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

fn default_samples() -> usize {
    64
}

fn default_tol() -> f64 {
    1e-9
}

impl Default for Domain {
    /// The default box `[-2, 2]³ × t ∈ [0, 1]` with 64 samples at 1e-9.
    fn default() -> Domain {
        Domain {
            x1: (-2.0, 2.0),
            x2: (-2.0, 2.0),
            x3: (-2.0, 2.0),
            t: (0.0, 1.0),
            samples: default_samples(),
            tol: default_tol(),
            params: BTreeMap::new(),
        }
    }
}

impl Domain {
    pub fn with_x1(mut self, lo: f64, hi: f64) -> Domain {
        self.x1 = (lo, hi);
        self
    }

    pub fn with_x2(mut self, lo: f64, hi: f64) -> Domain {
        self.x2 = (lo, hi);
        self
    }

    pub fn with_x3(mut self, lo: f64, hi: f64) -> Domain {
        self.x3 = (lo, hi);
        self
    }

    pub fn with_t(mut self, lo: f64, hi: f64) -> Domain {
        self.t = (lo, hi);
        self
    }

    pub fn with_samples(mut self, n: usize) -> Domain {
        self.samples = n;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Domain {
        self.tol = tol;
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Domain {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Domain {
        self.params.extend(params);
        self
    }

    pub fn is_valid(&self) -> bool {
        self.x1.0 < self.x1.1
            && self.x2.0 < self.x2.1
            && self.x3.0 < self.x3.1
            && self.t.0 <= self.t.1
            && self.samples >= 1
            && self.tol > 0.0
    }

    fn sample_raw(&self, rng: &mut ChaCha8Rng) -> Point {
        let pick = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.gen_range(lo..=hi)
            }
        };
        Point {
            x1: pick(rng, self.x1),
            x2: pick(rng, self.x2),
            x3: pick(rng, self.x3),
            t: pick(rng, self.t),
            params: self.params.clone(),
        }
    }

    /// Draw up to `samples` points where every listed expression evaluates
    /// cleanly; domain violations are resampled, other evaluation errors
    /// abort.
    pub fn sample_safe(&self, exprs: &[&Expr]) -> Result<Vec<Point>, EquivError> {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        let mut points = Vec::with_capacity(self.samples);
        let budget = self.samples * OVERSAMPLE_FACTOR;
        let mut drawn = 0;
        while points.len() < self.samples && drawn < budget {
            drawn += 1;
            let p = self.sample_raw(&mut rng);
            let mut ok = true;
            for e in exprs {
                match eval(e, &p) {
                    Ok(_) => {}
                    Err(err) if err.is_domain_violation() => {
                        ok = false;
                        break;
                    }
                    Err(err) => return Err(EquivError::Eval(err)),
                }
            }
            if ok {
                points.push(p);
            }
        }
        if points.len() < self.samples {
            return Err(EquivError::DomainExhausted {
                found: points.len(),
                requested: self.samples,
            });
        }
        Ok(points)
    }

    /// First point of the domain where all expressions evaluate cleanly.
    pub fn any_safe_point(&self, exprs: &[&Expr]) -> Result<Point, EquivError> {
        let reduced = Domain {
            samples: 1,
            ..self.clone()
        };
        Ok(reduced.sample_safe(exprs)?.remove(0))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquivError {
    #[error("could not find enough safe sample points ({found} of {requested})")]
    DomainExhausted { found: usize, requested: usize },
    #[error(transparent)]
    Eval(EvalError),
}

/// Outcome of an equivalence test.
#[derive(Debug, Clone, Serialize)]
pub struct EquivReport {
    pub equivalent: bool,
    /// Largest relative residual `|a-b| / max(1, |a|, |b|)` observed.
    pub max_residual: f64,
    pub worst_point: Point,
}

/// Are `a` and `b` equal as functions on `d`, within `d.tol`?
pub fn equiv(a: &Expr, b: &Expr, d: &Domain) -> Result<EquivReport, EquivError> {
    let points = d.sample_safe(&[a, b])?;
    let mut max_residual = 0.0_f64;
    let mut worst_point = points[0].clone();
    for p in &points {
        let va = eval(a, p).map_err(EquivError::Eval)?;
        let vb = eval(b, p).map_err(EquivError::Eval)?;
        let residual = (va - vb).abs() / 1.0_f64.max(va.abs()).max(vb.abs());
        if residual > max_residual {
            max_residual = residual;
            worst_point = p.clone();
        }
    }
    Ok(EquivReport {
        equivalent: max_residual <= d.tol,
        max_residual,
        worst_point,
    })
}

/// Equivalence of `e` against zero.
pub fn is_zero_on(e: &Expr, d: &Domain) -> Result<EquivReport, EquivError> {
    equiv(e, &Expr::zero(), d)
}

/// Does the sum of `terms` vanish on `d`? The residual is normalized by
/// the magnitude of the terms, `|Σ tᵢ| / max(1, Σ |tᵢ|)`, so identities
/// that cancel large contributions are judged against the cancellation
/// scale rather than against 1.
pub fn zero_sum_check(terms: &[&Expr], d: &Domain) -> Result<EquivReport, EquivError> {
    let points = d.sample_safe(terms)?;
    let mut max_residual = 0.0_f64;
    let mut worst_point = points[0].clone();
    for p in &points {
        let mut sum = 0.0;
        let mut scale = 0.0;
        for term in terms {
            let v = eval(term, p).map_err(EquivError::Eval)?;
            sum += v;
            scale += v.abs();
        }
        let residual = sum.abs() / scale.max(1.0);
        if residual > max_residual {
            max_residual = residual;
            worst_point = p.clone();
        }
    }
    Ok(EquivReport {
        equivalent: max_residual <= d.tol,
        max_residual,
        worst_point,
    })
}
