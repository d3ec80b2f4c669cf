//! Noise-free differentially private synthetic data on the Boolean cube.
//!
//! A fresh uniform sample `S` of the cube (the reduced space) is reweighted so
//! that its degree-`≤d` marginals match those of the true data, after
//! shrinking toward the uniform weights just enough to keep every weight inside
//! a fixed band. Synthetic records are then drawn i.i.d. from `S` under those
//! weights. Privacy comes from the low sensitivity of the weights, not from
//! added noise.
//!
//! Module map:
//!
//! * [`cube`]: points, Walsh functions, marginals, dataset Fourier data
//! * [`conditioning`]: the reduced space, its design matrix and the conditioning gate
//! * [`solver`]: affine/box projections, shrinkage search, proximal weights
//! * [`pipeline`]: end-to-end generation and categorical sampling
//! * [`privacy`]: budget formulas and neighbor audits
//! * [`eval`]: accuracy reports, exact marginal matching, calibration
//! * [`io`]: CSV and packed-binary bit tables
//! * [`cli`]: the `psyn` command-line front end

pub mod cli;
pub mod conditioning;
pub mod cube;
pub mod error;
pub mod eval;
pub mod io;
pub mod pipeline;
pub mod privacy;
pub mod rng;
pub mod solver;

pub use conditioning::{
    check_conditioning, draw_reduced_space, draw_until_conditioned, smallest_singular_value,
    ConditioningVerdict, ReducedSpace,
};
pub use cube::{
    enumerate_low_degree, fourier_of_dataset, low_degree_count, marginal_from_fourier,
    marginal_value, walsh_eval, CubePoint, Dataset, FourierVector, LowDegreeBasis, MarginalQuery,
    WalshIndex,
};
pub use error::{Error, Result};
pub use pipeline::{generate, sample_categorical, PipelineConfig, RunReport, SampleCount, Synthesis};
pub use solver::{AffineConstraints, SlotBox, SlotDensity};
