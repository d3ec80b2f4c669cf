//! Accuracy measurement, exact marginal matching on a reduced space, and
//! parameter calibration.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::conditioning::{draw_slots, ReducedSpace};
use crate::cube::{
    enumerate_low_degree, fourier_in_basis, low_degree_count, CubePoint, Dataset, FourierVector,
    LowDegreeBasis, MarginalQuery, WalshIndex,
};
use crate::error::{Error, Result};
use crate::rng;
use crate::solver::{
    dykstra, feasibility, inf_norm, AffineConstraints, Feasibility, ProximalOptions, SlotBox,
    SlotDensity, FEASIBILITY_GAP_TOL,
};

pub const DEFAULT_QUERY_CAP: usize = 1_000_000;

/// Largest dimension for which the full cube is enumerated.
pub const MAX_ENUMERATED_DIM: usize = 14;

/// Markov slack on the expected deviation: a single resample may exceed the
/// expectation bound by this factor with probability at most its inverse.
pub const MARKOV_SLACK: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryError {
    pub query: MarginalQuery,
    pub truth: f64,
    pub synthetic: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub degree: usize,
    pub per_query_errors: Vec<QueryError>,
    pub max_error: f64,
    pub mean_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracySummary {
    pub degree: usize,
    pub queries: usize,
    pub max_error: f64,
    pub mean_error: f64,
    pub worst: Vec<QueryError>,
}

impl AccuracyReport {
    pub fn summary(&self, worst: usize) -> AccuracySummary {
        let mut sorted = self.per_query_errors.clone();
        sorted.sort_by(|a, b| b.error.total_cmp(&a.error));
        sorted.truncate(worst);
        AccuracySummary {
            degree: self.degree,
            queries: self.per_query_errors.len(),
            max_error: self.max_error,
            mean_error: self.mean_error,
            worst: sorted,
        }
    }
}

/// `Σ_{j≤d} C(p,j)·2^j`, saturating.
pub fn query_count(p: usize, d: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for j in 0..=d.min(p) {
        total = total.saturating_add(binom.saturating_mul(1usize.checked_shl(j as u32).unwrap_or(usize::MAX)));
        binom = binom.saturating_mul(p - j) / (j + 1);
    }
    total
}

pub fn accuracy_report(truth: &Dataset, synthetic: &Dataset, d: usize) -> Result<AccuracyReport> {
    accuracy_report_capped(truth, synthetic, d, DEFAULT_QUERY_CAP)
}

/// Every marginal of dimension `≤ d` (all subsets, all sign patterns) on both datasets.
pub fn accuracy_report_capped(
    truth: &Dataset,
    synthetic: &Dataset,
    d: usize,
    cap: usize,
) -> Result<AccuracyReport> {
    if truth.dim() != synthetic.dim() {
        return Err(Error::input(format!(
            "datasets have dimensions {} and {}",
            truth.dim(),
            synthetic.dim()
        )));
    }
    if truth.is_empty() || synthetic.is_empty() {
        return Err(Error::input("accuracy needs two nonempty datasets"));
    }
    let count = query_count(truth.dim(), d);
    if count > cap {
        return Err(Error::config(format!(
            "{count} marginal queries exceed the cap of {cap}"
        )));
    }
    let subsets = enumerate_low_degree(truth.dim(), d)?;
    let per_subset: Vec<Vec<QueryError>> = subsets
        .par_iter()
        .map(|j| {
            let t = pattern_frequencies(truth, j);
            let s = pattern_frequencies(synthetic, j);
            MarginalQuery::all_patterns(j)
                .zip(t.into_iter().zip(s))
                .map(|(query, (truth, synthetic))| QueryError {
                    query,
                    truth,
                    synthetic,
                    error: (synthetic - truth).abs(),
                })
                .collect()
        })
        .collect();
    let per_query_errors: Vec<QueryError> = per_subset.into_iter().flatten().collect();
    let max_error = per_query_errors.iter().map(|e| e.error).fold(0.0, f64::max);
    let mean_error =
        per_query_errors.iter().map(|e| e.error).sum::<f64>() / per_query_errors.len() as f64;
    Ok(AccuracyReport {
        degree: d,
        per_query_errors,
        max_error,
        mean_error,
    })
}

/// Frequencies of each sign pattern on `subset`, in [`MarginalQuery::all_patterns`] order.
fn pattern_frequencies(data: &Dataset, subset: &WalshIndex) -> Vec<f64> {
    let mut counts = vec![0usize; 1 << subset.degree()];
    for x in data {
        let r = subset
            .indices()
            .iter()
            .enumerate()
            .filter(|(_, &j)| x.coord(j) < 0)
            .fold(0usize, |acc, (t, _)| acc | 1 << t);
        counts[r] += 1;
    }
    let n = data.len() as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

#[derive(Clone, Debug)]
pub enum MatchOutcome {
    /// Nonnegative weights with the data's degree-`≤d` Fourier data.
    Matched(SlotDensity),
    /// Evidence of infeasibility only; the search found nothing.
    NoWitness { gap: f64, reason: String },
}

impl MatchOutcome {
    pub fn density(&self) -> Option<&SlotDensity> {
        match self {
            MatchOutcome::Matched(h) => Some(h),
            MatchOutcome::NoWitness { .. } => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MatchOutcome::Matched(_) => "matched",
            MatchOutcome::NoWitness { .. } => "no witness found",
        }
    }
}

/// Looks for nonnegative weights on `space` whose marginals up to the
/// space's degree equal those of `data` exactly.
pub fn exact_match(data: &Dataset, space: &ReducedSpace) -> Result<MatchOutcome> {
    let b = fourier_in_basis(data, space.basis().clone())?;
    exact_match_fourier(&b, space)
}

/// [`exact_match`] against given Fourier data.
pub fn exact_match_fourier(target: &FourierVector, space: &ReducedSpace) -> Result<MatchOutcome> {
    let constraints = match AffineConstraints::new(space, target) {
        Ok(a) => a,
        Err(Error::Conditioning(msg)) => return rank_deficient_outcome(target, space, msg),
        Err(e) => return Err(e),
    };
    let orthant = SlotBox::nonnegative();
    let tol = FEASIBILITY_GAP_TOL / space.m() as f64;
    match feasibility(&constraints, &orthant, tol)? {
        Feasibility::Infeasible { gap, .. } => Ok(MatchOutcome::NoWitness {
            gap,
            reason: "alternating projections stagnated away from the nonnegative orthant".into(),
        }),
        Feasibility::Feasible { .. } => {
            let h = dykstra(
                &constraints,
                &orthant,
                &constraints.uniform(),
                &ProximalOptions::default(),
                true,
            )?;
            Ok(MatchOutcome::Matched(h))
        }
    }
}

/// With a singular Gram matrix the affine set is either empty (reported as no
/// witness) or a degenerate space we do not search.
fn rank_deficient_outcome(
    target: &FourierVector,
    space: &ReducedSpace,
    msg: String,
) -> Result<MatchOutcome> {
    let svd = space.design().clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V");
    let smax = svd.singular_values.max();
    let b = DVector::from_column_slice(target.coeffs());
    let mut in_range = DVector::zeros(b.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > smax * 1e-10 {
            let v = v_t.row(i).transpose();
            in_range += &v * v.dot(&b);
        }
    }
    let gap = inf_norm(&(b - in_range));
    if gap > 1e-9 {
        Ok(MatchOutcome::NoWitness {
            gap,
            reason: "the marginal constraints are inconsistent on this reduced space".into(),
        })
    } else {
        Err(Error::Conditioning(msg))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationParams {
    /// Failure probability budget.
    pub gamma: f64,
    /// Lower regularity: the sampling density is at least `α/2^p`.
    pub alpha: f64,
    /// Bound on `‖f/g‖_{L²}`.
    pub kappa: f64,
    pub delta_target: f64,
}

impl CalibrationParams {
    /// `γ ∈ (0,1]` (γ = 1 is the degenerate no-guarantee case), `α ∈ (0,1]`,
    /// `κ ≥ 1`, `δ > 0`.
    pub fn new(gamma: f64, alpha: f64, kappa: f64, delta_target: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::config(format!("gamma = {gamma} must be in (0, 1]")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::config(format!("alpha = {alpha} must be in (0, 1]")));
        }
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(Error::config(format!("kappa = {kappa} must be at least 1")));
        }
        if !(delta_target > 0.0 && delta_target.is_finite()) {
            return Err(Error::config(format!("delta = {delta_target} must be positive")));
        }
        Ok(CalibrationParams {
            gamma,
            alpha,
            kappa,
            delta_target,
        })
    }

    /// Only the failure budget matters; the rest take neutral values.
    pub fn with_gamma(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0, 1.0, 1.0)
    }
}

fn ceil_to_usize(x: f64) -> Result<usize> {
    let c = x.ceil();
    if !c.is_finite() || c > usize::MAX as f64 {
        return Err(Error::config(format!("recommended size {x} overflows")));
    }
    Ok(c as usize)
}

/// `⌈16 γ⁻² e^{2d} C(p,≤d)⌉`, enough slots to pass conditioning with probability `1−γ`.
pub fn recommend_m(p: usize, d: usize, cal: &CalibrationParams) -> Result<usize> {
    let c = low_degree_count(p, d) as f64;
    ceil_to_usize(16.0 / (cal.gamma * cal.gamma) * (2.0 * d as f64).exp() * c)
}

/// `⌈16 (αδ)⁻² γ⁻¹ κ² e^{2d} C(p,≤d)⌉`, the two-sample matching regime.
pub fn recommend_m_matching(p: usize, d: usize, cal: &CalibrationParams) -> Result<usize> {
    let c = low_degree_count(p, d) as f64;
    let ad = cal.alpha * cal.delta_target;
    ceil_to_usize(16.0 / (ad * ad) / cal.gamma * cal.kappa * cal.kappa * (2.0 * d as f64).exp() * c)
}

/// `⌈4 δ⁻² (log(2/γ) + log C(p,≤d))⌉` synthetic samples.
pub fn recommend_k(p: usize, d: usize, gamma: f64, delta: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::config(format!("gamma = {gamma} must be in (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::config(format!("delta = {delta} must be in (0, 1)")));
    }
    let c = low_degree_count(p, d) as f64;
    ceil_to_usize(4.0 / (delta * delta) * ((2.0 / gamma).ln() + c.ln()))
}

/// Exact population and empirical `L¹` norms of low-degree functions on a
/// fully enumerated cube.
pub struct L1DeviationProbe {
    dim: usize,
    basis_len: usize,
    /// Row-major `2^p × C` table of Walsh values.
    table: Vec<f64>,
}

impl L1DeviationProbe {
    pub fn new(p: usize, d: usize) -> Result<Self> {
        if p > MAX_ENUMERATED_DIM {
            return Err(Error::config(format!(
                "p = {p} is too large for exact full-cube norms (limit {MAX_ENUMERATED_DIM})"
            )));
        }
        let basis = LowDegreeBasis::new(p, d)?;
        let mut table = Vec::with_capacity((1 << p) * basis.len());
        for r in 0..1usize << p {
            table.extend(basis.evaluate(&CubePoint::from_cube_rank(r, p)).into_iter().map(f64::from));
        }
        Ok(L1DeviationProbe {
            dim: p,
            basis_len: basis.len(),
            table,
        })
    }

    pub fn basis_len(&self) -> usize {
        self.basis_len
    }

    /// Empirical measure of `slots` as weights over the `2^p` cube points.
    pub fn empirical_measure(&self, slots: &Dataset) -> Result<Vec<f64>> {
        if slots.dim() != self.dim || slots.is_empty() {
            return Err(Error::input("slots must be nonempty with the probe's dimension"));
        }
        let mut w = vec![0.0; 1 << self.dim];
        let unit = 1.0 / slots.len() as f64;
        for x in slots {
            w[x.cube_rank()] += unit;
        }
        Ok(w)
    }

    /// `|‖F‖_{L¹(μ_m)} − ‖F‖_{L¹(μ)}|` for `F = Σ a_J w_J`.
    pub fn deviation(&self, measure: &[f64], coeffs: &[f64]) -> f64 {
        let c = self.basis_len;
        let (mut empirical, mut population) = (0.0, 0.0);
        for (row, &w) in self.table.chunks_exact(c).zip(measure) {
            let f: f64 = row.iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>().abs();
            population += f;
            empirical += w * f;
        }
        (empirical - population / measure.len() as f64).abs()
    }

    /// Largest deviation over the given coefficient directions.
    pub fn max_deviation(&self, measure: &[f64], directions: &[Vec<f64>]) -> f64 {
        directions
            .par_iter()
            .map(|a| self.deviation(measure, a))
            .reduce(|| 0.0, f64::max)
    }
}

/// Uniformly random points of the unit sphere in `R^dim`.
pub fn random_unit_directions(dim: usize, count: usize, rng: &mut impl rand::Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L1Deviation {
    /// A lower estimate of the supremum over the unit sphere.
    pub max_deviation: f64,
    /// `2√(C(p,≤d)/m)`.
    pub envelope: f64,
    pub trials: usize,
    pub m: usize,
}

/// Monte-Carlo lower estimate of `sup_F |‖F‖_{L¹(μ_m)} − ‖F‖_{L¹(μ)}|` over
/// unit-norm degree-`≤d` functions, with `μ` uniform and `μ_m` an
/// `m`-point uniform sample drawn from `seed`.
pub fn empirical_l1_deviation(p: usize, d: usize, m: usize, trials: usize, seed: u64) -> Result<L1Deviation> {
    if m == 0 || trials == 0 {
        return Err(Error::config("m and trials must be positive"));
    }
    let probe = L1DeviationProbe::new(p, d)?;
    let mut slot_rng = rng::stream_rng(seed, rng::STREAM_SLOTS);
    let slots = draw_slots(p, m, &mut slot_rng);
    let measure = probe.empirical_measure(&slots)?;
    let mut dir_rng = rng::stream_rng(seed, rng::STREAM_SAMPLING);
    let directions = random_unit_directions(probe.basis_len(), trials, &mut dir_rng);
    Ok(L1Deviation {
        max_deviation: probe.max_deviation(&measure, &directions),
        envelope: 2.0 * (probe.basis_len() as f64 / m as f64).sqrt(),
        trials,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::{draw_reduced_space, draw_until_conditioned};
    use crate::cube::marginal_from_fourier;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(rng: &mut impl Rng, n: usize, p: usize) -> Dataset {
        Dataset::new(
            p,
            (0..n)
                .map(|_| CubePoint::from_bits(&(0..p).map(|_| rng.random::<bool>()).collect::<Vec<_>>()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn self_accuracy_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_dataset(&mut rng, 300, 6);
        for d in 0..=3 {
            let r = accuracy_report(&x, &x, d).unwrap();
            assert_eq!(r.max_error, 0.0);
            assert_eq!(r.per_query_errors.len(), query_count(6, d));
        }
    }

    #[test]
    fn complement_has_unit_error() {
        let x = Dataset::new(3, vec![CubePoint::new(vec![1, 1, 1]).unwrap(); 4]).unwrap();
        let y = Dataset::new(3, x.iter().map(CubePoint::flipped).collect()).unwrap();
        let r = accuracy_report(&x, &y, 1).unwrap();
        assert_eq!(r.max_error, 1.0);
        assert!(r.max_error >= r.mean_error);
    }

    #[test]
    fn query_cap_is_enforced() {
        let x = Dataset::new(3, vec![CubePoint::new(vec![1, 1, 1]).unwrap()]).unwrap();
        assert!(matches!(accuracy_report_capped(&x, &x, 3, 10), Err(Error::Config(_))));
        assert_eq!(query_count(3, 3), 27);
    }

    #[test]
    fn calibration_formulas() {
        let one = CalibrationParams::with_gamma(1.0).unwrap();
        let c = low_degree_count(6, 2) as f64;
        assert_eq!(recommend_m(6, 2, &one).unwrap(), (16.0 * 4f64.exp() * c).ceil() as usize);
        // 16·4·e²·7 = 448e² = 3310.297… at 50 digits
        let half = CalibrationParams::with_gamma(0.5).unwrap();
        assert_eq!(recommend_m(6, 1, &half).unwrap(), 3311);
        let quarter = CalibrationParams::with_gamma(0.25).unwrap();
        let raw = |g: f64| 16.0 / (g * g) * 2f64.exp() * 7.0;
        assert!((raw(0.25) / raw(0.5) - 4.0).abs() < 1e-12);
        assert_eq!(recommend_m(6, 1, &quarter).unwrap(), raw(0.25).ceil() as usize);

        // 1600·(ln 20 + ln 56) = 11233.73… at 50 digits
        assert_eq!(recommend_k(10, 2, 0.1, 0.05).unwrap(), 11234);
        assert_eq!(recommend_k(8, 2, 0.1, 0.05).unwrap(), 10571);
        let k = |delta: f64| 4.0 / (delta * delta) * (20f64.ln() + 56f64.ln());
        assert!((k(0.0125) / k(0.05) - 16.0).abs() < 1e-12);
        let near_one = recommend_k(10, 2, 1.0 - 1e-12, 1.0 - 1e-12).unwrap();
        assert_eq!(near_one, (4.0 * (2.0 * 56.0f64).ln()).ceil() as usize);
        assert!(recommend_k(10, 2, 1.0, 0.5).is_err());

        let cal = CalibrationParams::new(0.1, 0.5, 2.0, 0.2).unwrap();
        let expect = 16.0 / (0.1 * 0.1) / 0.1 * 4.0 * 2f64.exp() * 7.0;
        assert_eq!(recommend_m_matching(6, 1, &cal).unwrap(), expect.ceil() as usize);
        assert!(CalibrationParams::new(0.0, 1.0, 1.0, 0.1).is_err());
        assert!(CalibrationParams::new(0.5, 1.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn matching_recovers_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_dataset(&mut rng, 3000, 6);
        let (space, _) = draw_until_conditioned(6, 1500, 2, 4, 4).unwrap();
        let out = exact_match(&x, &space).unwrap();
        let h = out.density().expect("uniform data should be matchable");
        assert!(h.weights.iter().all(|&w| w >= 0.0));
        assert!(h.residual <= 1e-8);
        // marginals of h via its Fourier data equal those of x
        let hb = space.design().tr_mul(&DVector::from_vec(h.weights.clone()));
        let hf = FourierVector::new(space.basis().clone(), hb.as_slice().to_vec()).unwrap();
        let xf = fourier_in_basis(&x, space.basis().clone()).unwrap();
        for j in space.basis().indices() {
            for q in MarginalQuery::all_patterns(j) {
                let a = marginal_from_fourier(&hf, &q).unwrap();
                let b = marginal_from_fourier(&xf, &q).unwrap();
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn disjoint_supports_cannot_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut with_first = |sign: i8, n: usize| {
            Dataset::new(
                5,
                (0..n)
                    .map(|_| {
                        let mut c: Vec<i8> = (0..5).map(|_| if rng.random() { 1 } else { -1 }).collect();
                        c[0] = sign;
                        CubePoint::new(c).unwrap()
                    })
                    .collect(),
            )
            .unwrap()
        };
        let x = with_first(1, 200);
        let s = with_first(-1, 100);
        let space = ReducedSpace::from_slots(s, 1).unwrap();
        match exact_match(&x, &space).unwrap() {
            MatchOutcome::NoWitness { gap, .. } => assert!(gap > 0.5),
            other => panic!("expected no witness, got {}", other.label()),
        }
    }

    #[test]
    fn one_sample_correction_is_small() {
        // S uniform, target = exact Fourier data of the uniform density
        let (p, d, m) = (6, 1, 8192);
        let space = draw_reduced_space(p, m, d, 12).unwrap();
        let mut coeffs = vec![0.0; space.basis().len()];
        coeffs[0] = 1.0;
        let f = FourierVector::new(space.basis().clone(), coeffs).unwrap();
        let out = exact_match_fourier(&f, &space).unwrap();
        let h = out.density().unwrap();
        let delta = 0.5;
        let dev = h.weights.iter().map(|w| (w - 1.0 / m as f64).abs()).fold(0.0, f64::max);
        assert!(dev <= delta / m as f64, "{dev}");
    }

    #[test]
    fn full_cube_has_no_deviation() {
        let probe = L1DeviationProbe::new(4, 2).unwrap();
        let cube = Dataset::new(4, (0..16).map(|r| CubePoint::from_cube_rank(r, 4)).collect()).unwrap();
        let measure = probe.empirical_measure(&cube).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dirs = random_unit_directions(probe.basis_len(), 100, &mut rng);
        assert!(probe.max_deviation(&measure, &dirs) < 1e-14);

        // constant function: both norms are one for any sample
        let mut e0 = vec![0.0; probe.basis_len()];
        e0[0] = 1.0;
        let mut r2 = ChaCha8Rng::seed_from_u64(4);
        let sample = random_dataset(&mut r2, 37, 4);
        let m2 = probe.empirical_measure(&sample).unwrap();
        assert!(probe.deviation(&m2, &e0) < 1e-14);
        assert!(L1DeviationProbe::new(15, 1).is_err());
    }

    #[test]
    fn deviation_probe_matches_direct_evaluation() {
        let probe = L1DeviationProbe::new(5, 2).unwrap();
        let basis = LowDegreeBasis::new(5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sample = random_dataset(&mut rng, 50, 5);
        let a = random_unit_directions(basis.len(), 1, &mut rng).remove(0);
        let f = |x: &CubePoint| -> f64 {
            basis.indices().iter().zip(&a).map(|(j, c)| j.eval_unchecked(x) as f64 * c).sum()
        };
        let emp: f64 = sample.iter().map(|x| f(x).abs()).sum::<f64>() / 50.0;
        let pop: f64 = (0..32).map(|r| f(&CubePoint::from_cube_rank(r, 5)).abs()).sum::<f64>() / 32.0;
        let measure = probe.empirical_measure(&sample).unwrap();
        assert!((probe.deviation(&measure, &a) - (emp - pop).abs()).abs() < 1e-13);
    }
}
