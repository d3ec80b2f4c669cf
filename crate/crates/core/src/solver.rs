//! Weights on the reduced space constrained by low-degree Fourier data.
//!
//! The solution space is the affine set `{h ∈ R^m : Mᵀh = b̃}`. Everything
//! here is built from two Euclidean projections, onto that affine set and
//! onto a coordinate box, combined as alternating projections (feasibility)
//! or Dykstra's scheme (nearest point to the uniform vector).

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::conditioning::ReducedSpace;
use crate::cube::FourierVector;
use crate::error::{Error, Result};

/// Absolute tolerance on `‖Mᵀh − b̃‖_∞` after an affine projection, relative to `max(1, ‖b̃‖_∞)`.
pub const AFFINE_RESIDUAL_TOL: f64 = 1e-10;

/// Feasibility gap tolerance, in units of `1/m`.
pub const FEASIBILITY_GAP_TOL: f64 = 1e-9;

pub const DEFAULT_TOL_LAMBDA: f64 = 1e-9;

pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// The affine set `{h : Mᵀh = b̃}` with a cached Cholesky factor of `G = MᵀM`.
#[derive(Clone)]
pub struct AffineConstraints<'a> {
    design: &'a DMatrix<f64>,
    target: DVector<f64>,
    factor: Arc<Cholesky<f64, Dyn>>,
}

impl std::fmt::Debug for AffineConstraints<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineConstraints")
            .field("m", &self.design.nrows())
            .field("columns", &self.design.ncols())
            .field("target", &self.target.as_slice())
            .finish()
    }
}

impl<'a> AffineConstraints<'a> {
    /// Constraints `Mᵀh = b` over a reduced space.
    pub fn new(space: &'a ReducedSpace, target: &FourierVector) -> Result<Self> {
        if target.basis().as_ref() != space.basis().as_ref() {
            return Err(Error::config(format!(
                "target Fourier data (p={}, d={}) does not match the reduced space (p={}, d={})",
                target.basis().dim(),
                target.degree_bound(),
                space.basis().dim(),
                space.degree()
            )));
        }
        Self::from_design(space.design(), DVector::from_column_slice(target.coeffs()))
    }

    pub fn from_design(design: &'a DMatrix<f64>, target: DVector<f64>) -> Result<Self> {
        if target.len() != design.ncols() {
            return Err(Error::config(format!(
                "target has {} entries for {} design columns",
                target.len(),
                design.ncols()
            )));
        }
        let gram = design.tr_mul(design);
        let factor = Cholesky::new(gram).ok_or_else(|| {
            Error::Conditioning(
                "Gram matrix MᵀM is not positive definite; the design lacks full column rank"
                    .into(),
            )
        })?;
        Ok(AffineConstraints {
            design,
            target,
            factor: Arc::new(factor),
        })
    }

    /// Same design and factorization, new right-hand side.
    pub fn with_target(&self, target: DVector<f64>) -> Result<Self> {
        if target.len() != self.target.len() {
            return Err(Error::config("target length does not match the design"));
        }
        Ok(AffineConstraints {
            design: self.design,
            target,
            factor: Arc::clone(&self.factor),
        })
    }

    pub fn design(&self) -> &'a DMatrix<f64> {
        self.design
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn m(&self) -> usize {
        self.design.nrows()
    }

    pub fn uniform(&self) -> DVector<f64> {
        DVector::from_element(self.m(), 1.0 / self.m() as f64)
    }

    /// `Mᵀu` for the uniform vector `u = (1/m, …, 1/m)`.
    pub fn uniform_target(&self) -> DVector<f64> {
        self.design.tr_mul(&self.uniform())
    }

    /// The constraints moved toward the uniform vector: target `(1−λ)b̃ + λMᵀu`.
    pub fn shrunk(&self, lambda: f64) -> Result<Self> {
        let target = &self.target * (1.0 - lambda) + self.uniform_target() * lambda;
        self.with_target(target)
    }

    /// `‖Mᵀh − b̃‖_∞`.
    pub fn residual(&self, h: &DVector<f64>) -> f64 {
        inf_norm(&(self.design.tr_mul(h) - &self.target))
    }

    /// Euclidean projection `z − M G⁻¹(Mᵀz − b̃)`, with one refinement step when
    /// rounding leaves the residual above tolerance.
    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        let tol = AFFINE_RESIDUAL_TOL * inf_norm(&self.target).max(1.0);
        let mut out = z.clone();
        for _ in 0..2 {
            let r = self.design.tr_mul(&out) - &self.target;
            if inf_norm(&r) <= tol * 1e-2 {
                break;
            }
            let y = self.factor.solve(&r);
            out -= self.design * y;
        }
        out
    }
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Euclidean projection onto `{h : Mᵀh = b̃}`.
pub fn project_affine(z: &DVector<f64>, constraints: &AffineConstraints<'_>) -> DVector<f64> {
    constraints.project(z)
}

/// Uniform per-coordinate bounds `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlotBox {
    lo: f64,
    hi: f64,
}

impl SlotBox {
    /// A box with `0 < lo < hi`.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi) || lo.is_nan() || hi.is_nan() {
            return Err(Error::config(format!("invalid box [{lo}, {hi}]: need 0 < lo < hi")));
        }
        Ok(SlotBox { lo, hi })
    }

    /// The nonnegative orthant `[0, ∞)^m`.
    pub fn nonnegative() -> Self {
        SlotBox {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    /// The shrinkage box `[2δ/m, (Δ−δ)/m]`.
    pub fn shrinkage(delta: f64, big_delta: f64, m: usize) -> Result<Self> {
        let m = m as f64;
        SlotBox::new(2.0 * delta / m, (big_delta - delta) / m)
    }

    /// The selection box `[δ/m, Δ/m]`.
    pub fn selection(delta: f64, big_delta: f64, m: usize) -> Result<Self> {
        let m = m as f64;
        SlotBox::new(delta / m, big_delta / m)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains_value(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// Largest distance from any coordinate of `v` to the box.
    pub fn violation(&self, v: &DVector<f64>) -> f64 {
        v.iter()
            .map(|&x| (self.lo - x).max(x - self.hi).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn project(&self, z: &DVector<f64>) -> DVector<f64> {
        z.map(|x| x.clamp(self.lo, self.hi))
    }
}

/// Coordinatewise clamp to the box.
pub fn project_box(z: &DVector<f64>, bounds: &SlotBox) -> DVector<f64> {
    bounds.project(z)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeasibilityOptions {
    /// Declare feasible once `‖h_aff − h_box‖_∞ ≤ tol`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Infeasible when the gap shrinks by a relative amount below
    /// `stagnation_ratio` over `stagnation_window` iterations.
    pub stagnation_window: usize,
    pub stagnation_ratio: f64,
}

impl FeasibilityOptions {
    pub fn with_tol(tol: f64) -> Self {
        FeasibilityOptions {
            tol,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            stagnation_window: 100,
            stagnation_ratio: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Feasibility {
    /// `witness` satisfies the affine constraints and lies within `gap` of the box.
    Feasible {
        witness: DVector<f64>,
        gap: f64,
        iterations: usize,
    },
    /// The affine-box gap stopped shrinking at `gap`.
    Infeasible { gap: f64, iterations: usize },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }

    pub fn iterations(&self) -> usize {
        match self {
            Feasibility::Feasible { iterations, .. } | Feasibility::Infeasible { iterations, .. } => {
                *iterations
            }
        }
    }
}

/// Decides whether the affine set meets the box, by alternating projections
/// started from the uniform vector.
pub fn feasibility(
    constraints: &AffineConstraints<'_>,
    bounds: &SlotBox,
    tol: f64,
) -> Result<Feasibility> {
    feasibility_with(constraints, bounds, &FeasibilityOptions::with_tol(tol))
}

pub fn feasibility_with(
    constraints: &AffineConstraints<'_>,
    bounds: &SlotBox,
    opts: &FeasibilityOptions,
) -> Result<Feasibility> {
    let mut x = constraints.uniform();
    // Euclidean gaps are monotone under alternating projections; the sup-norm gap is not
    let mut l2_gaps = Vec::new();
    let mut gap = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let aff = constraints.project(&x);
        let boxed = bounds.project(&aff);
        let diff = &aff - &boxed;
        gap = inf_norm(&diff);
        if gap <= opts.tol {
            return Ok(Feasibility::Feasible {
                witness: aff,
                gap,
                iterations: it,
            });
        }
        l2_gaps.push(diff.norm());
        if l2_gaps.len() > opts.stagnation_window {
            let now = l2_gaps[l2_gaps.len() - 1];
            let then = l2_gaps[l2_gaps.len() - 1 - opts.stagnation_window];
            if then - now < opts.stagnation_ratio * then {
                return Ok(Feasibility::Infeasible {
                    gap,
                    iterations: it,
                });
            }
        }
        x = boxed;
    }
    Err(Error::Indeterminate {
        iterations: opts.max_iterations,
        gap,
        tol: opts.tol,
    })
}

/// Result of the minimal-λ search.
#[derive(Clone, Debug)]
pub struct Shrinkage<'a> {
    pub lambda: f64,
    pub constraints: AffineConstraints<'a>,
    /// Number of feasibility decisions made.
    pub evaluations: usize,
}

/// Smallest `λ ∈ [0,1]` (rounded up to within `tol_lambda`) such that the
/// constraints shrunk toward the uniform vector meet `shrink_box`.
///
/// Feasibility is monotone in `λ`: the uniform vector lies in the box, so a
/// witness at `λ₀` slides along the chord toward it. That makes bisection valid.
pub fn shrinkage_lambda<'a>(
    constraints: &AffineConstraints<'a>,
    shrink_box: &SlotBox,
    tol_lambda: f64,
) -> Result<Shrinkage<'a>> {
    let m = constraints.m();
    let uniform_value = 1.0 / m as f64;
    if !shrink_box.contains_value(uniform_value) {
        return Err(Error::config(format!(
            "shrinkage box [{}, {}] does not contain 1/m = {uniform_value}; need delta <= 1/2 and Delta >= 1 + delta",
            shrink_box.lo(),
            shrink_box.hi()
        )));
    }
    if !(tol_lambda > 0.0 && tol_lambda < 1.0) {
        return Err(Error::config(format!("tol_lambda {tol_lambda} must be in (0, 1)")));
    }
    let gap_tol = FEASIBILITY_GAP_TOL / m as f64;
    let mut evaluations = 1;
    if feasibility(constraints, shrink_box, gap_tol)?.is_feasible() {
        return Ok(Shrinkage {
            lambda: 0.0,
            constraints: constraints.clone(),
            evaluations,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol_lambda {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if feasibility(&constraints.shrunk(mid)?, shrink_box, gap_tol)?.is_feasible() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Shrinkage {
        lambda: hi,
        constraints: constraints.shrunk(hi)?,
        evaluations,
    })
}

/// A weight vector over the slots of the reduced space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotDensity {
    pub weights: Vec<f64>,
    /// `‖Mᵀh − b̃‖_∞`; zero when no constraints are attached.
    pub residual: f64,
    /// `|Σh − 1|`.
    pub mass_error: f64,
    /// Final `‖h_aff − h_box‖_∞` of the projection scheme.
    pub gap: f64,
    pub iterations: usize,
}

impl SlotDensity {
    /// Wraps raw weights with no attached constraints.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let mass_error = (weights.iter().sum::<f64>() - 1.0).abs();
        SlotDensity {
            weights,
            residual: 0.0,
            mass_error,
            gap: 0.0,
            iterations: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProximalOptions {
    /// Stop once successive box iterates move by at most `change_tol / m` in sup norm…
    pub change_tol: f64,
    /// …and the constraint residual is at most this.
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for ProximalOptions {
    fn default() -> Self {
        ProximalOptions {
            change_tol: 1e-10,
            residual_tol: 1e-9,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Projection of the uniform vector onto `{Mᵀh = b̃} ∩ box`, by Dykstra's method.
pub fn proximal_point(
    constraints: &AffineConstraints<'_>,
    select_box: &SlotBox,
    opts: &ProximalOptions,
) -> Result<SlotDensity> {
    dykstra(constraints, select_box, &constraints.uniform(), opts, true)
}

/// Dykstra's projection of `reference` onto the affine set intersected with
/// the box. Projection onto an affine set is an affine map that ignores
/// normal-space offsets, so only the box step carries a correction term.
pub(crate) fn dykstra(
    constraints: &AffineConstraints<'_>,
    bounds: &SlotBox,
    reference: &DVector<f64>,
    opts: &ProximalOptions,
    affine_first: bool,
) -> Result<SlotDensity> {
    let m = constraints.m();
    let change_tol = opts.change_tol / m as f64;
    let mut q = DVector::zeros(m);
    let mut y = reference.clone();
    let mut prev = y.clone();
    let mut gap = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let (aff, boxed) = if affine_first {
            let aff = constraints.project(&y);
            let shifted = &aff + &q;
            let boxed = bounds.project(&shifted);
            q = shifted - &boxed;
            (aff, boxed)
        } else {
            let shifted = &y + &q;
            let boxed = bounds.project(&shifted);
            q = shifted - &boxed;
            (constraints.project(&boxed), boxed)
        };
        gap = inf_norm(&(&aff - &boxed));
        let current = if affine_first { boxed.clone() } else { aff.clone() };
        let change = inf_norm(&(&current - &prev));
        y = current;
        if it > 1 && change <= change_tol {
            let residual = constraints.residual(&boxed);
            if residual <= opts.residual_tol {
                let mass_error = (boxed.sum() - 1.0).abs();
                return Ok(SlotDensity {
                    weights: boxed.as_slice().to_vec(),
                    residual,
                    mass_error,
                    gap,
                    iterations: it,
                });
            }
        }
        prev = y.clone();
    }
    Err(Error::Numeric(format!(
        "Dykstra projection did not converge in {} iterations (affine-box gap {gap:e})",
        opts.max_iterations
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::draw_reduced_space;
    use crate::cube::{fourier_in_basis, CubePoint, Dataset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_space(seed: u64) -> ReducedSpace {
        // p=3, d=1, m=5, redrawn until the design has full column rank
        (seed..)
            .map(|s| draw_reduced_space(3, 5, 1, s).unwrap())
            .find(|rs| rs.sigma_min() > 0.3)
            .unwrap()
    }

    #[test]
    fn affine_projection_is_identity_on_members() {
        let rs = small_space(1);
        let h = DVector::from_vec(vec![0.1, 0.3, 0.2, 0.25, 0.15]);
        let b = rs.design().tr_mul(&h);
        let a = AffineConstraints::from_design(rs.design(), b).unwrap();
        assert!(inf_norm(&(a.project(&h) - &h)) < 1e-14);
    }

    #[test]
    fn affine_projection_is_idempotent_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rs = small_space(9);
        let b = DVector::from_fn(4, |i, _| if i == 0 { 1.0 } else { rng.random_range(-0.5..0.5) });
        let a = AffineConstraints::from_design(rs.design(), b).unwrap();
        for _ in 0..20 {
            let z = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
            let once = a.project(&z);
            let twice = a.project(&once);
            assert!(inf_norm(&(&once - &twice)) < 1e-13);
            assert!(a.residual(&once) <= 1e-10);
        }
    }

    #[test]
    fn affine_projection_matches_normal_equations() {
        // oracle: minimize ‖h − z‖ s.t. Mᵀh = b via the KKT system solved by LU
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for seed in 0..10 {
            let rs = small_space(100 + seed);
            let (m, c) = (5, 4);
            let b = DVector::from_fn(c, |_, _| rng.random_range(-1.0..1.0));
            let z = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let mut kkt = DMatrix::zeros(m + c, m + c);
            kkt.view_mut((0, 0), (m, m)).fill_with_identity();
            kkt.view_mut((0, m), (m, c)).copy_from(rs.design());
            kkt.view_mut((m, 0), (c, m)).copy_from(&rs.design().transpose());
            let mut rhs = DVector::zeros(m + c);
            rhs.rows_mut(0, m).copy_from(&z);
            rhs.rows_mut(m, c).copy_from(&b);
            let sol = kkt.lu().solve(&rhs).unwrap();
            let a = AffineConstraints::from_design(rs.design(), b).unwrap();
            let got = a.project(&z);
            assert!(inf_norm(&(got - sol.rows(0, m))) < 1e-12);
        }
    }

    #[test]
    fn singular_gram_is_a_conditioning_error() {
        let x = CubePoint::new(vec![1, 1, -1]).unwrap();
        let rs = ReducedSpace::from_slots(Dataset::new(3, vec![x; 6]).unwrap(), 1).unwrap();
        let err = AffineConstraints::from_design(rs.design(), DVector::zeros(4)).unwrap_err();
        assert!(matches!(err, Error::Conditioning(_)));
    }

    #[test]
    fn box_projection() {
        let b = SlotBox::new(0.1, 0.5).unwrap();
        let z = DVector::from_vec(vec![0.2, 0.3]);
        assert_eq!(project_box(&z, &b), z);
        let m = 8usize;
        let sel = SlotBox::selection(0.05, 4.0, m).unwrap();
        let zero = DVector::zeros(m);
        assert!(project_box(&zero, &sel).iter().all(|&v| v == 0.05 / 8.0));
        let mixed = DVector::from_vec(vec![-1.0, 0.3, 9.0]);
        assert_eq!(project_box(&mixed, &b).as_slice(), &[0.1, 0.3, 0.5]);
        assert!(SlotBox::new(0.0, 1.0).is_err());
        assert!(SlotBox::new(0.5, 0.5).is_err());
    }

    #[test]
    fn uniform_target_is_feasible_with_uniform_witness() {
        let rs = draw_reduced_space(4, 40, 2, 3).unwrap();
        let a0 = AffineConstraints::from_design(rs.design(), DVector::zeros(11)).unwrap();
        let a = a0.with_target(a0.uniform_target()).unwrap();
        let bx = SlotBox::new(0.5 / 40.0, 2.0 / 40.0).unwrap();
        match feasibility(&a, &bx, 1e-12).unwrap() {
            Feasibility::Feasible { witness, iterations, .. } => {
                assert_eq!(iterations, 1);
                assert!(inf_norm(&(witness - a.uniform())) < 1e-15);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mass_contradiction_is_infeasible() {
        let rs = draw_reduced_space(4, 40, 1, 3).unwrap();
        let basis = rs.basis().clone();
        let x = Dataset::new(4, vec![CubePoint::new(vec![1, -1, 1, 1]).unwrap(); 3]).unwrap();
        let b = fourier_in_basis(&x, basis).unwrap();
        let a = AffineConstraints::new(&rs, &b).unwrap();
        let bx = SlotBox::new(0.9, 1.0).unwrap();
        let verdict = feasibility(&a, &bx, 1e-10).unwrap();
        assert!(!verdict.is_feasible(), "{verdict:?}");
    }

    #[test]
    fn shrinkage_is_zero_when_uniform_marginals_match() {
        let rs = draw_reduced_space(5, 64, 2, 17).unwrap();
        let b = fourier_in_basis(rs.slots(), rs.basis().clone()).unwrap();
        let a = AffineConstraints::new(&rs, &b).unwrap();
        let shrink = SlotBox::shrinkage(0.05, 4.0, 64).unwrap();
        let s = shrinkage_lambda(&a, &shrink, 1e-9).unwrap();
        assert_eq!(s.lambda, 0.0);
        let sel = SlotBox::selection(0.05, 4.0, 64).unwrap();
        let h = proximal_point(&s.constraints, &sel, &ProximalOptions::default()).unwrap();
        assert!(h.weights.iter().all(|&w| (w - 1.0 / 64.0).abs() < 1e-13));
    }

    #[test]
    fn shrinkage_precondition() {
        let rs = draw_reduced_space(4, 40, 1, 3).unwrap();
        let a = AffineConstraints::from_design(rs.design(), DVector::zeros(5)).unwrap();
        let bad = SlotBox::new(2.0 / 40.0, 3.0 / 40.0).unwrap();
        assert!(matches!(shrinkage_lambda(&a, &bad, 1e-9), Err(Error::Config(_))));
    }

    #[test]
    fn skewed_data_needs_shrinkage_and_marginals_interpolate() {
        let rs = draw_reduced_space(5, 200, 1, 21).unwrap();
        let skew = Dataset::new(
            5,
            (0..50)
                .map(|i| CubePoint::new(vec![1, 1, if i % 2 == 0 { 1 } else { -1 }, 1, -1]).unwrap())
                .collect(),
        )
        .unwrap();
        let b = fourier_in_basis(&skew, rs.basis().clone()).unwrap();
        let a = AffineConstraints::new(&rs, &b).unwrap();
        let shrink = SlotBox::shrinkage(0.05, 4.0, 200).unwrap();
        let s = shrinkage_lambda(&a, &shrink, 1e-9).unwrap();
        assert!(s.lambda > 0.0 && s.lambda < 1.0);
        // just below λ the shrunk space must miss the box
        let below = a.shrunk(s.lambda - 1e-6).unwrap();
        assert!(!feasibility(&below, &shrink, 1e-9 / 200.0).unwrap().is_feasible());

        let sel = SlotBox::selection(0.05, 4.0, 200).unwrap();
        let h = proximal_point(&s.constraints, &sel, &ProximalOptions::default()).unwrap();
        let hv = DVector::from_vec(h.weights.clone());
        let expect = a.target() * (1.0 - s.lambda) + a.uniform_target() * s.lambda;
        assert!(inf_norm(&(rs.design().tr_mul(&hv) - expect)) < 1e-8);
        assert!(h.mass_error < 1e-9);
        assert!(sel.violation(&hv) == 0.0);
    }

    #[test]
    fn proximal_point_examples() {
        let rs = draw_reduced_space(4, 30, 1, 5).unwrap();
        let a0 = AffineConstraints::from_design(rs.design(), DVector::zeros(5)).unwrap();
        let sel = SlotBox::selection(0.05, 4.0, 30).unwrap();
        // u feasible
        let a = a0.with_target(a0.uniform_target()).unwrap();
        let h = proximal_point(&a, &sel, &ProximalOptions::default()).unwrap();
        assert!(h.weights.iter().all(|&w| (w - 1.0 / 30.0).abs() < 1e-14));
        // binding-free: affine projection of u is already inside the box
        let mut target = a0.uniform_target();
        target[1] += 0.01;
        let a = a0.with_target(target).unwrap();
        let pa = project_affine(&a.uniform(), &a);
        assert_eq!(sel.violation(&pa), 0.0);
        let h = proximal_point(&a, &sel, &ProximalOptions::default()).unwrap();
        assert!(inf_norm(&(DVector::from_vec(h.weights) - pa)) < 1e-13);
    }

    #[test]
    fn dykstra_order_does_not_change_the_projection() {
        let rs = draw_reduced_space(5, 60, 1, 2).unwrap();
        let x = Dataset::new(
            5,
            (0..30)
                .map(|i| CubePoint::new(vec![1, if i % 3 == 0 { -1 } else { 1 }, 1, -1, 1]).unwrap())
                .collect(),
        )
        .unwrap();
        let b = fourier_in_basis(&x, rs.basis().clone()).unwrap();
        let a = AffineConstraints::new(&rs, &b).unwrap();
        let shrink = SlotBox::shrinkage(0.05, 4.0, 60).unwrap();
        let s = shrinkage_lambda(&a, &shrink, 1e-9).unwrap();
        let sel = SlotBox::selection(0.05, 4.0, 60).unwrap();
        let opts = ProximalOptions::default();
        let u = s.constraints.uniform();
        let h1 = dykstra(&s.constraints, &sel, &u, &opts, true).unwrap();
        let h2 = dykstra(&s.constraints, &sel, &u, &opts, false).unwrap();
        let d = h1
            .weights
            .iter()
            .zip(&h2.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(d <= 10.0 * 1e-9, "{d}");
    }
}
