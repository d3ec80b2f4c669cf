//! Privacy budget formulas and empirical sensitivity audits.
//!
//! The selected weights move by at most
//! `η = 4√2 Δ^{3/2} e^{d/2} C(p,≤d)^{1/4} / (√(δn) m^{1/4})` in sup norm when one
//! record is added, and every weight is at least `δ/m`. So the per-slot
//! probability ratio is at most `1 + ηm/δ ≤ exp(ηm/δ)`, and `k` i.i.d. draws
//! are `k·ηm/δ`-differentially private.
//!
//! All guarantees are conditional on the reduced space, which is drawn
//! independently of the data; audits therefore share one space across a pair.

use serde::Serialize;

use crate::conditioning::ReducedSpace;
use crate::cube::{fourier_in_basis, low_degree_count, CubePoint, Dataset, LowDegreeBasis};
use crate::error::{Error, Result};
use crate::pipeline::{auto_k, solve_density, PipelineConfig, SampleCount};

/// Slack allowed on top of `η` before a distance counts as a violation, as a
/// multiple of [`SOLVER_TOLERANCE`].
pub const VIOLATION_MARGIN: f64 = 10.0;

/// Constraint-residual tolerance of the proximal solver.
pub const SOLVER_TOLERANCE: f64 = 1e-9;

fn root_c(p: usize, d: usize) -> f64 {
    (low_degree_count(p, d) as f64).sqrt()
}

/// Sup-norm sensitivity `η` of the selected weights.
pub fn sensitivity_bound(n: usize, m: usize, p: usize, d: usize, delta: f64, big_delta: f64) -> f64 {
    4.0 * std::f64::consts::SQRT_2 * big_delta.powf(1.5) * (d as f64 / 2.0).exp() * root_c(p, d).sqrt()
        / ((delta * n as f64).sqrt() * (m as f64).powf(0.25))
}

/// Epsilon guaranteed for `k` synthetic samples: `k·ηm/δ`.
pub fn epsilon_for_k(
    k: usize,
    n: usize,
    m: usize,
    p: usize,
    d: usize,
    delta: f64,
    big_delta: f64,
) -> f64 {
    4.0 * std::f64::consts::SQRT_2
        * k as f64
        * (big_delta / delta).powf(1.5)
        * (d as f64 / 2.0).exp()
        * root_c(p, d).sqrt()
        * (m as f64).powf(0.75)
        / (n as f64).sqrt()
}

/// The real-valued sample budget `ε/(4√2) (δ/Δ)^{3/2} e^{-d/2} C^{-1/4} √n / m^{3/4}`.
pub fn sample_budget(
    epsilon: f64,
    n: usize,
    m: usize,
    p: usize,
    d: usize,
    delta: f64,
    big_delta: f64,
) -> f64 {
    epsilon / (4.0 * std::f64::consts::SQRT_2)
        * (delta / big_delta).powf(1.5)
        * (-(d as f64) / 2.0).exp()
        / root_c(p, d).sqrt()
        * (n as f64).sqrt()
        / (m as f64).powf(0.75)
}

/// `floor` of [`sample_budget`].
pub fn max_samples_for_epsilon(
    epsilon: f64,
    n: usize,
    m: usize,
    p: usize,
    d: usize,
    delta: f64,
    big_delta: f64,
) -> usize {
    let k = sample_budget(epsilon, n, m, p, d, delta, big_delta).floor();
    if k.is_finite() && k > 0.0 {
        k as usize
    } else {
        0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub p: usize,
    pub delta: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    pub sensitivity_eta: f64,
}

impl PrivacyBudget {
    /// Budget guaranteed for `k` samples.
    pub fn for_samples(k: usize, n: usize, m: usize, p: usize, d: usize, delta: f64, big_delta: f64) -> Self {
        PrivacyBudget {
            epsilon: epsilon_for_k(k, n, m, p, d, delta, big_delta),
            k,
            n,
            m,
            d,
            p,
            delta,
            big_delta,
            sensitivity_eta: sensitivity_bound(n, m, p, d, delta, big_delta),
        }
    }

    /// `log(1 + ηm/δ)`, the per-sample log-ratio bound.
    pub fn per_sample_log_ratio(&self) -> f64 {
        (self.sensitivity_eta * self.m as f64 / self.delta).ln_1p()
    }

    /// Whether `ε/k ≥ log(1 + ηm/δ)`.
    pub fn per_sample_bound_holds(&self) -> bool {
        self.k == 0 || self.epsilon / self.k as f64 >= self.per_sample_log_ratio()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Identical,
    /// `other` is `base` with one record appended.
    AddOne,
    /// `other` is `base` with one record replaced.
    ReplaceOne,
}

#[derive(Clone, Debug)]
pub struct NeighborPair {
    base: Dataset,
    other: Dataset,
    relation: Relation,
}

impl NeighborPair {
    pub fn add_one(base: Dataset, record: CubePoint) -> Result<Self> {
        let other = base.with_appended(record)?;
        Ok(NeighborPair {
            base,
            other,
            relation: Relation::AddOne,
        })
    }

    pub fn replace_one(base: Dataset, index: usize, record: CubePoint) -> Result<Self> {
        if index >= base.len() {
            return Err(Error::input(format!("row {index} out of range for {} rows", base.len())));
        }
        if record.dim() != base.dim() {
            return Err(Error::input("replacement record has the wrong dimension"));
        }
        let mut rows = base.rows().to_vec();
        rows[index] = record;
        let other = Dataset::new(base.dim(), rows)?;
        Ok(NeighborPair {
            base,
            other,
            relation: Relation::ReplaceOne,
        })
    }

    pub fn identical(base: Dataset) -> Self {
        NeighborPair {
            other: base.clone(),
            base,
            relation: Relation::Identical,
        }
    }

    /// Works out how `other` relates to `base`; anything that is not a
    /// single-record change is an input error.
    pub fn classify(base: Dataset, other: Dataset) -> Result<Self> {
        if base.dim() != other.dim() {
            return Err(Error::input("neighbor datasets have different dimensions"));
        }
        let relation = if base == other {
            Relation::Identical
        } else if other.len() == base.len() + 1 && other.rows()[..base.len()] == *base.rows() {
            Relation::AddOne
        } else if base.len() == other.len() + 1 && base.rows()[..other.len()] == *other.rows() {
            // the larger dataset is the extension; keep base as the smaller one
            return Ok(NeighborPair {
                base: other,
                other: base,
                relation: Relation::AddOne,
            });
        } else if base.len() == other.len()
            && base.iter().zip(other.iter()).filter(|(a, b)| a != b).count() == 1
        {
            Relation::ReplaceOne
        } else {
            return Err(Error::input(
                "datasets differ by more than one record (or not by appending/replacing one)",
            ));
        };
        Ok(NeighborPair { base, other, relation })
    }

    pub fn base(&self) -> &Dataset {
        &self.base
    }

    pub fn other(&self) -> &Dataset {
        &self.other
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }

    /// Sensitivity multiplier: replace-one is add-one followed by remove-one.
    fn budget_factor(&self) -> f64 {
        match self.relation {
            Relation::ReplaceOne => 2.0,
            Relation::Identical | Relation::AddOne => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRecord {
    pub relation: Relation,
    pub n: usize,
    pub linf_distance: f64,
    pub eta: f64,
    /// `η`, or `2η` for replace-one pairs.
    pub distance_budget: f64,
    pub max_ratio: f64,
    /// `1 + budget·m/δ`.
    pub ratio_bound: f64,
    pub k: usize,
    pub epsilon: Option<f64>,
    /// `exp(ε/k)` when both are known and `k > 0`.
    pub sample_threshold: Option<f64>,
    pub lambda_base: f64,
    pub lambda_other: f64,
    pub violation: bool,
    pub ratio_violation: bool,
}

impl AuditRecord {
    /// `max_ratio^k ≤ exp(ε(1 + 10⁻⁶))`, when an epsilon is known.
    pub fn privacy_consistent(&self) -> Option<bool> {
        self.epsilon
            .map(|eps| self.max_ratio.powf(self.k as f64) <= (eps * (1.0 + 1e-6)).exp())
    }
}

/// Solves both datasets of `pair` on the same reduced space and compares
/// the selected weights against the sensitivity bound.
pub fn audit_sensitivity(
    pair: &NeighborPair,
    cfg: &PipelineConfig,
    space: &ReducedSpace,
) -> Result<AuditRecord> {
    if space.m() != cfg.m || space.degree() != cfg.d || space.slots().dim() != cfg.p {
        return Err(Error::config("audit reduced space does not match the configuration"));
    }
    let n = pair.base().len().min(pair.other().len());
    if n == 0 {
        return Err(Error::input("audit datasets must be nonempty"));
    }
    let h1 = solve_density(pair.base(), space, cfg.delta, cfg.big_delta)?;
    let h2 = solve_density(pair.other(), space, cfg.delta, cfg.big_delta)?;
    let (w1, w2) = (&h1.density.weights, &h2.density.weights);
    let linf_distance = w1.iter().zip(w2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // both orders: privacy must hold for the pair in either direction
    let max_ratio = w1
        .iter()
        .zip(w2)
        .map(|(a, b)| (a / b).max(b / a))
        .fold(1.0, f64::max);
    let eta = sensitivity_bound(n, cfg.m, cfg.p, cfg.d, cfg.delta, cfg.big_delta);
    let distance_budget = pair.budget_factor() * eta;
    let ratio_bound = 1.0 + distance_budget * cfg.m as f64 / cfg.delta;
    let k = match cfg.k {
        SampleCount::Fixed(k) => k,
        SampleCount::Auto => auto_k(cfg, n)?,
    };
    let sample_threshold = match (cfg.epsilon, k) {
        (Some(eps), k) if k > 0 => Some((eps / k as f64).exp()),
        _ => None,
    };
    Ok(AuditRecord {
        relation: pair.relation(),
        n,
        linf_distance,
        eta,
        distance_budget,
        max_ratio,
        ratio_bound,
        k,
        epsilon: cfg.epsilon,
        sample_threshold,
        lambda_base: h1.lambda,
        lambda_other: h2.lambda,
        violation: linf_distance > distance_budget + VIOLATION_MARGIN * SOLVER_TOLERANCE,
        ratio_violation: max_ratio > ratio_bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NeighborGap {
    /// `‖b_other − b_base‖₂`.
    pub gap: f64,
    /// `(2/n)·√C(p,≤d)`.
    pub bound: f64,
}

impl NeighborGap {
    pub fn within_bound(&self) -> bool {
        self.gap <= self.bound * (1.0 + 1e-12)
    }
}

/// Euclidean distance between the degree-`≤d` Fourier data of the two datasets.
pub fn neighbor_fourier_gap(pair: &NeighborPair, d: usize) -> Result<NeighborGap> {
    let basis = std::sync::Arc::new(LowDegreeBasis::new(pair.base().dim(), d)?);
    let a = fourier_in_basis(pair.base(), basis.clone())?;
    let b = fourier_in_basis(pair.other(), basis.clone())?;
    let gap = a
        .coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let n = pair.base().len().min(pair.other().len()) as f64;
    Ok(NeighborGap {
        gap,
        bound: 2.0 / n * (basis.len() as f64).sqrt(),
    })
}
