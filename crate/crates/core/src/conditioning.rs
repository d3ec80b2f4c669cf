//! The reduced space `S`: a fresh uniform sample of `m` cube points, its
//! `m × C(p,≤d)` Walsh design matrix, and the well-conditioning gate
//! `σ_min(M) ≥ √m / (2e^d)`.

use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::cube::{CubePoint, Dataset, LowDegreeBasis};
use crate::error::{Error, Result};
use crate::rng::{self, SeedTrail};

/// Largest number of design entries we are willing to materialize.
pub const MAX_DESIGN_ENTRIES: usize = 1 << 28;

pub const DEFAULT_MAX_ATTEMPTS: usize = 16;

const EIGEN_MAX_SWEEPS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct ReducedSpace {
    slots: Dataset,
    basis: Arc<LowDegreeBasis>,
    design: DMatrix<f64>,
    gram: DMatrix<f64>,
    sigma_min: f64,
    seed_used: Option<SeedTrail>,
}

impl ReducedSpace {
    /// Builds the reduced space over explicitly given slots.
    pub fn from_slots(slots: Dataset, d: usize) -> Result<Self> {
        Self::build(slots, d, None)
    }

    fn build(slots: Dataset, d: usize, seed_used: Option<SeedTrail>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::config("reduced space needs at least one slot"));
        }
        let basis = Arc::new(LowDegreeBasis::new(slots.dim(), d)?);
        let design = design_matrix(&slots, &basis);
        let gram = design.tr_mul(&design);
        let sigma_min = sigma_min_from_gram(&gram, slots.len())?;
        let space = ReducedSpace {
            slots,
            basis,
            design,
            gram,
            sigma_min,
            seed_used,
        };
        let dups = space.duplicate_slots();
        if dups > 0 {
            warn!(
                "reduced space has {dups} repeated slot(s) out of {}; kept as distinct slots",
                space.m()
            );
        }
        Ok(space)
    }

    pub fn slots(&self) -> &Dataset {
        &self.slots
    }

    pub fn basis(&self) -> &Arc<LowDegreeBasis> {
        &self.basis
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn seed_used(&self) -> Option<SeedTrail> {
        self.seed_used
    }

    pub fn m(&self) -> usize {
        self.slots.len()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// Number of slots equal to an earlier slot.
    pub fn duplicate_slots(&self) -> usize {
        let mut rows: Vec<&CubePoint> = self.slots.iter().collect();
        rows.sort_unstable();
        rows.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// `M[i][J] = w_J(θ_i)`, rows in slot order, columns in basis order.
pub fn design_matrix(slots: &Dataset, basis: &LowDegreeBasis) -> DMatrix<f64> {
    let rows = slots.len();
    let cols = basis.len();
    DMatrix::from_fn(rows, cols, |i, j| {
        basis.indices()[j].eval_unchecked(slots.row(i)) as f64
    })
}

/// `σ_min(M) = √λ_min(MᵀM)`, via a symmetric eigensolve of the Gram matrix.
pub fn smallest_singular_value(design: &DMatrix<f64>) -> Result<f64> {
    if design.ncols() == 0 || design.nrows() == 0 {
        return Err(Error::config("design matrix is empty"));
    }
    let gram = design.tr_mul(design);
    sigma_min_from_gram(&gram, design.nrows())
}

fn sigma_min_from_gram(gram: &DMatrix<f64>, m: usize) -> Result<f64> {
    // work on G/m so eigenvalues are O(1) whatever the slot count
    let scaled = gram / m as f64;
    let eig = SymmetricEigen::try_new(scaled, f64::EPSILON, EIGEN_MAX_SWEEPS).ok_or_else(|| {
        Error::Numeric(format!(
            "symmetric eigensolver did not converge in {EIGEN_MAX_SWEEPS} sweeps on a {0}x{0} Gram matrix",
            gram.nrows()
        ))
    })?;
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !lambda_min.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite smallest eigenvalue {lambda_min}"
        )));
    }
    Ok((lambda_min.max(0.0) * m as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditioningVerdict {
    pub passed: bool,
    pub threshold: f64,
    pub sigma_min: f64,
    pub attempts: usize,
}

/// `√m / (2e^d)`.
pub fn conditioning_threshold(m: usize, d: usize) -> f64 {
    (m as f64).sqrt() / (2.0 * (d as f64).exp())
}

pub fn check_conditioning(space: &ReducedSpace) -> ConditioningVerdict {
    let threshold = conditioning_threshold(space.m(), space.degree());
    ConditioningVerdict {
        passed: space.sigma_min() >= threshold,
        threshold,
        sigma_min: space.sigma_min(),
        attempts: 1,
    }
}

fn validate_shape(p: usize, m: usize, d: usize) -> Result<usize> {
    if d > p {
        return Err(Error::config(format!("degree {d} exceeds dimension {p}")));
    }
    let c = crate::cube::low_degree_count(p, d);
    if m < c {
        return Err(Error::config(format!(
            "m = {m} is below C(p,<=d) = {c}; the design matrix cannot have full column rank"
        )));
    }
    if m.saturating_mul(c) > MAX_DESIGN_ENTRIES {
        return Err(Error::config(format!(
            "design matrix {m} x {c} exceeds the memory budget of {MAX_DESIGN_ENTRIES} entries"
        )));
    }
    Ok(c)
}

pub(crate) fn draw_slots(p: usize, m: usize, rng: &mut impl Rng) -> Dataset {
    let rows = (0..m)
        .map(|_| CubePoint::from_bits(&(0..p).map(|_| rng.random::<bool>()).collect::<Vec<_>>()))
        .collect();
    Dataset::new(p, rows).expect("all slots share dimension p")
}

fn draw_on_stream(p: usize, m: usize, d: usize, seed: u64, stream: u64) -> Result<ReducedSpace> {
    let mut rng = rng::stream_rng(seed, stream);
    let slots = draw_slots(p, m, &mut rng);
    ReducedSpace::build(slots, d, Some(SeedTrail { seed, stream }))
}

/// Draws `m` slots i.i.d. uniformly from the cube (with replacement).
pub fn draw_reduced_space(p: usize, m: usize, d: usize, seed: u64) -> Result<ReducedSpace> {
    validate_shape(p, m, d)?;
    draw_on_stream(p, m, d, seed, rng::STREAM_SLOTS)
}

/// Redraws the reduced space until it passes the conditioning gate.
///
/// Attempt `i` draws from stream [`rng::slot_stream`]`(i)` of `seed`. Running
/// out of attempts yields [`Error::Failure`].
pub fn draw_until_conditioned(
    p: usize,
    m: usize,
    d: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<(ReducedSpace, ConditioningVerdict)> {
    if max_attempts == 0 {
        return Err(Error::config("max_attempts must be at least 1"));
    }
    validate_shape(p, m, d)?;
    let mut best = 0.0f64;
    for attempt in 0..max_attempts {
        let space = draw_on_stream(p, m, d, seed, rng::slot_stream(attempt))?;
        let mut verdict = check_conditioning(&space);
        verdict.attempts = attempt + 1;
        if verdict.passed {
            return Ok((space, verdict));
        }
        best = best.max(verdict.sigma_min);
    }
    Err(Error::Failure {
        attempts: max_attempts,
        best_sigma_min: best,
        threshold: conditioning_threshold(m, d),
    })
}
