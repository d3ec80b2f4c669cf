//! End-to-end private sampling: draw `S`, gate on conditioning, match the
//! data's low-degree Fourier data on `S`, shrink toward uniform, select the
//! proximal weights, and sample synthetic records from `S`.

use std::time::Instant;

use log::{debug, warn};
use rand::Rng;
use serde::Serialize;

use crate::conditioning::{draw_until_conditioned, ConditioningVerdict, ReducedSpace, DEFAULT_MAX_ATTEMPTS};
use crate::cube::{fourier_in_basis, low_degree_count, Dataset};
use crate::error::{Error, Result};
use crate::privacy;
use crate::rng::{self, SeedTrail};
use crate::solver::{
    proximal_point, shrinkage_lambda, AffineConstraints, ProximalOptions, SlotBox, SlotDensity,
    DEFAULT_TOL_LAMBDA,
};

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_BIG_DELTA: f64 = 4.0;

/// Largest negative weight accepted as rounding noise by the sampler.
const NEGATIVE_WEIGHT_TOL: f64 = 1e-12;
const SAMPLER_MASS_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCount {
    Fixed(usize),
    /// Largest `k` the privacy budget `epsilon` allows.
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub p: usize,
    pub d: usize,
    pub m: usize,
    pub delta: f64,
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    pub k: SampleCount,
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub max_attempts: usize,
}

impl PipelineConfig {
    /// Defaults: `δ = 0.05`, `Δ = 4`, automatic `k` (requires an epsilon), 16 attempts.
    pub fn new(p: usize, d: usize, m: usize, seed: u64) -> Self {
        PipelineConfig {
            p,
            d,
            m,
            delta: DEFAULT_DELTA,
            big_delta: DEFAULT_BIG_DELTA,
            k: SampleCount::Auto,
            epsilon: None,
            seed,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = SampleCount::Fixed(k);
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_bounds(mut self, delta: f64, big_delta: f64) -> Self {
        self.delta = delta;
        self.big_delta = big_delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (delta, big) = (self.delta, self.big_delta);
        if !(delta > 0.0 && big > delta && delta.is_finite() && big.is_finite()) {
            return Err(Error::config(format!("need Delta > delta > 0, got delta={delta}, Delta={big}")));
        }
        if delta > 0.5 {
            return Err(Error::config(format!("delta = {delta} exceeds 1/2")));
        }
        if big < 1.0 + delta {
            return Err(Error::config(format!("Delta = {big} is below 1 + delta = {}", 1.0 + delta)));
        }
        if self.d > self.p {
            return Err(Error::config(format!("degree {} exceeds dimension {}", self.d, self.p)));
        }
        let c = low_degree_count(self.p, self.d);
        if self.m < c {
            return Err(Error::config(format!(
                "m = {} is below C(p,<=d) = {c}; the design matrix cannot have full column rank",
                self.m
            )));
        }
        if self.max_attempts == 0 {
            return Err(Error::config("max_attempts must be at least 1"));
        }
        if let Some(eps) = self.epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::config(format!("epsilon = {eps} must be finite and nonnegative")));
            }
        }
        if self.k == SampleCount::Auto && self.epsilon.is_none() {
            return Err(Error::config("k = auto requires an epsilon"));
        }
        Ok(())
    }

    pub fn shrink_box(&self) -> Result<SlotBox> {
        SlotBox::shrinkage(self.delta, self.big_delta, self.m)
    }

    pub fn select_box(&self) -> Result<SlotBox> {
        SlotBox::selection(self.delta, self.big_delta, self.m)
    }
}

/// Largest `k` whose guaranteed epsilon stays within `cfg.epsilon` for `n` records.
pub fn auto_k(cfg: &PipelineConfig, n: usize) -> Result<usize> {
    let eps = cfg
        .epsilon
        .ok_or_else(|| Error::config("automatic k requires an epsilon"))?;
    let k = privacy::max_samples_for_epsilon(eps, n, cfg.m, cfg.p, cfg.d, cfg.delta, cfg.big_delta);
    if k == 0 {
        warn!("privacy budget epsilon = {eps} admits no synthetic samples for n = {n}, m = {}", cfg.m);
    }
    Ok(k)
}

/// Weights selected on a fixed reduced space (steps after conditioning).
#[derive(Clone, Debug)]
pub struct DensitySolution {
    pub density: SlotDensity,
    pub lambda: f64,
    pub shrinkage_evaluations: usize,
}

/// Matches `data` on `space`, shrinks into `[2δ/m, (Δ−δ)/m]` and selects the
/// point of `[δ/m, Δ/m]` nearest to uniform.
pub fn solve_density(
    data: &Dataset,
    space: &ReducedSpace,
    delta: f64,
    big_delta: f64,
) -> Result<DensitySolution> {
    if data.dim() != space.slots().dim() {
        return Err(Error::input(format!(
            "data dimension {} does not match the reduced space dimension {}",
            data.dim(),
            space.slots().dim()
        )));
    }
    let b = fourier_in_basis(data, space.basis().clone())?;
    let constraints = AffineConstraints::new(space, &b)?;
    let shrink_box = SlotBox::shrinkage(delta, big_delta, space.m())?;
    let select_box = SlotBox::selection(delta, big_delta, space.m())?;
    let shrink = shrinkage_lambda(&constraints, &shrink_box, DEFAULT_TOL_LAMBDA)?;
    let density = proximal_point(&shrink.constraints, &select_box, &ProximalOptions::default())?;
    Ok(DensitySolution {
        density,
        lambda: shrink.lambda,
        shrinkage_evaluations: shrink.evaluations,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    pub conditioning_ms: f64,
    pub solve_ms: f64,
    pub sampling_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub n: usize,
    pub verdict: ConditioningVerdict,
    pub lambda: f64,
    pub constraint_residual: f64,
    pub mass_error: f64,
    pub dykstra_gap: f64,
    pub dykstra_iterations: usize,
    pub shrinkage_evaluations: usize,
    pub duplicate_slots: usize,
    pub k_used: usize,
    pub epsilon_guaranteed: f64,
    pub sensitivity_bound: f64,
    pub slot_seed: SeedTrail,
    pub sampling_seed: SeedTrail,
    /// Wall-clock only; excluded from reproducibility comparisons.
    #[serde(skip)]
    pub timings: Timings,
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub synthetic: Dataset,
    pub density: SlotDensity,
    pub space: ReducedSpace,
    pub report: RunReport,
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the full private sampling pipeline on `data`.
pub fn generate(data: &Dataset, cfg: &PipelineConfig) -> Result<Synthesis> {
    let start = Instant::now();
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::input("input dataset is empty"));
    }
    if data.dim() != cfg.p {
        return Err(Error::input(format!(
            "input has dimension {}, configuration says p = {}",
            data.dim(),
            cfg.p
        )));
    }
    let n = data.len();
    let k = match cfg.k {
        SampleCount::Fixed(k) => k,
        SampleCount::Auto => auto_k(cfg, n)?,
    };

    let t = Instant::now();
    let (space, verdict) = draw_until_conditioned(cfg.p, cfg.m, cfg.d, cfg.seed, cfg.max_attempts)?;
    let conditioning_ms = millis(t);

    let t = Instant::now();
    let solution = solve_density(data, &space, cfg.delta, cfg.big_delta)?;
    let solve_ms = millis(t);

    let t = Instant::now();
    let synthetic = sample_categorical(&solution.density, space.slots(), k, cfg.seed)?;
    let sampling_ms = millis(t);

    let density = solution.density;
    let report = RunReport {
        n,
        verdict,
        lambda: solution.lambda,
        constraint_residual: density.residual,
        mass_error: density.mass_error,
        dykstra_gap: density.gap,
        dykstra_iterations: density.iterations,
        shrinkage_evaluations: solution.shrinkage_evaluations,
        duplicate_slots: space.duplicate_slots(),
        k_used: k,
        epsilon_guaranteed: privacy::epsilon_for_k(k, n, cfg.m, cfg.p, cfg.d, cfg.delta, cfg.big_delta),
        sensitivity_bound: privacy::sensitivity_bound(n, cfg.m, cfg.p, cfg.d, cfg.delta, cfg.big_delta),
        slot_seed: space.seed_used().expect("drawn spaces record their seed"),
        sampling_seed: SeedTrail {
            seed: cfg.seed,
            stream: rng::STREAM_SAMPLING,
        },
        timings: Timings {
            conditioning_ms,
            solve_ms,
            sampling_ms,
            total_ms: millis(start),
        },
    };
    Ok(Synthesis {
        synthetic,
        density,
        space,
        report,
    })
}

/// Draws `k` slots i.i.d. with probabilities proportional to the weights, by
/// inverting the cumulative sum, and returns the corresponding points.
pub fn sample_categorical(h: &SlotDensity, slots: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng::stream_rng(seed, rng::STREAM_SAMPLING);
    let picks = sample_indices(&h.weights, k, &mut rng)?;
    if h.weights.len() != slots.len() {
        return Err(Error::Integrity(format!(
            "{} weights for {} slots",
            h.weights.len(),
            slots.len()
        )));
    }
    let rows = picks.into_iter().map(|i| slots.row(i).clone()).collect();
    Dataset::new(slots.dim(), rows)
}

pub(crate) fn sample_indices(weights: &[f64], k: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if weights.is_empty() {
        return Err(Error::Integrity("no slots to sample from".into()));
    }
    if let Some((i, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, &w)| w < -NEGATIVE_WEIGHT_TOL || !w.is_finite())
    {
        return Err(Error::Integrity(format!("slot {i} has weight {w}")));
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for &w in weights {
        total += w.max(0.0);
        cumulative.push(total);
    }
    if (total - 1.0).abs() > SAMPLER_MASS_TOL {
        return Err(Error::Integrity(format!("weights sum to {total}, expected 1")));
    }
    if total != 1.0 {
        debug!("renormalizing sampling weights by total mass {total}");
    }
    let last = weights.len() - 1;
    Ok((0..k)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            cumulative.partition_point(|&c| c <= u).min(last)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::CubePoint;

    fn slots(m: usize) -> Dataset {
        Dataset::new(
            4,
            (0..m).map(|r| CubePoint::from_cube_rank(r % 16, 4)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn point_mass_yields_constant_output() {
        let s = slots(6);
        let mut w = vec![0.0; 6];
        w[3] = 1.0;
        let y = sample_categorical(&SlotDensity::from_weights(w), &s, 50, 1).unwrap();
        assert_eq!(y.len(), 50);
        assert!(y.iter().all(|r| r == s.row(3)));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let s = slots(10);
        let h = SlotDensity::from_weights(vec![0.1; 10]);
        let a = sample_categorical(&h, &s, 200, 42).unwrap();
        let b = sample_categorical(&h, &s, 200, 42).unwrap();
        let c = sample_categorical(&h, &s, 200, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampler_rejects_bad_weights() {
        let s = slots(3);
        let neg = SlotDensity::from_weights(vec![0.6, 0.5, -0.1]);
        assert!(matches!(sample_categorical(&neg, &s, 5, 1), Err(Error::Integrity(_))));
        let heavy = SlotDensity::from_weights(vec![0.5, 0.5, 0.5]);
        assert!(matches!(sample_categorical(&heavy, &s, 5, 1), Err(Error::Integrity(_))));
    }

    #[test]
    fn uniform_frequencies_within_three_sigma() {
        let m = 16;
        let k = 1_000_000;
        let mut rng = rng::stream_rng(9, rng::STREAM_SAMPLING);
        let picks = sample_indices(&vec![1.0 / m as f64; m], k, &mut rng).unwrap();
        let mut counts = vec![0usize; m];
        for i in picks {
            counts[i] += 1;
        }
        let p = 1.0 / m as f64;
        // binomial standard deviation of a frequency: sqrt(p(1-p)/k) <= sqrt(1/(k m))
        let band = 3.0 * (1.0 / (k as f64 * m as f64)).sqrt();
        for &c in &counts {
            assert!((c as f64 / k as f64 - p).abs() <= band);
        }
        // 15 degrees of freedom; 0.999 quantile is about 37.7
        let expected = k as f64 * p;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn config_validation() {
        let ok = PipelineConfig::new(6, 2, 100, 1).with_k(10);
        assert!(ok.validate().is_ok());
        assert!(PipelineConfig::new(6, 2, 10, 1).with_k(1).validate().is_err());
        assert!(PipelineConfig::new(6, 7, 100, 1).with_k(1).validate().is_err());
        assert!(PipelineConfig::new(6, 2, 100, 1).validate().is_err(), "auto k needs epsilon");
        assert!(ok.clone().with_bounds(0.6, 4.0).validate().is_err());
        assert!(ok.clone().with_bounds(0.3, 1.2).validate().is_err());
        assert!(ok.clone().with_bounds(0.0, 4.0).validate().is_err());
    }

    #[test]
    fn auto_k_edge_cases() {
        let cfg = PipelineConfig::new(10, 2, 4096, 1).with_epsilon(0.0);
        assert_eq!(auto_k(&cfg, 100_000_000).unwrap(), 0);
        let cfg = PipelineConfig::new(10, 2, 4096, 1);
        assert!(auto_k(&cfg, 10).is_err());
    }
}
