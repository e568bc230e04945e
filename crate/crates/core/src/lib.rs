//! Black-box fusion of independent possibility contours.
//!
//! Given k contours for a common scalar parameter, each valid in the sense
//! that its value at the true parameter is stochastically no smaller than
//! Unif(0, 1), the fused contour is built in three steps:
//!
//! 1. combine the k values pointwise with a coordinate-wise monotone rule
//!    ([`FusionRule`]);
//! 2. validify: compose the combined statistic with its own null CDF under
//!    iid uniform inputs ([`Calibrator`]), which makes it exactly uniform at
//!    the truth when the inputs are exact;
//! 3. normalize by the grid maximum so the result attains 1 ([`normalize`]).
//!
//! Normalization only inflates, so validity survives it. Conservative inputs
//! (stochastically larger than uniform) give a conservative fusion.
//!
//! ```
//! use imfuse_core::{fuse, CalibratorChoice, Contour, FusionRule, ParameterGrid, GridFunction};
//!
//! let grid = ParameterGrid::uniform(-3.0, 3.0, 601).unwrap();
//! let tri = |peak: f64| {
//!     let v = grid.points().iter().map(|t| (1.0 - (t - peak).abs() / 2.0).max(0.0)).collect();
//!     Contour::new(grid.clone(), v).unwrap()
//! };
//! let (out, _) = fuse(&FusionRule::Min, CalibratorChoice::Closed, &[tri(-1.0), tri(1.0)], None, true, 0).unwrap();
//! assert!(out.statistic.max_value() < 1.0);
//! assert_eq!(out.contour.unwrap().max_value(), 1.0);
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod calibration;
pub mod contour;
pub mod error;
pub mod harness;
pub mod io;
pub mod measures;
pub mod pipeline;
pub mod rules;
pub mod stats;

pub use calibration::{cdf_mean, cdf_min, cdf_product, mc_calibrator, validify, Calibrator, EmpiricalCdf};
pub use contour::{
    alpha_cut, check_consonance, cut_width, normalize, Contour, GridFunction, Interval, ParameterGrid,
    Provenance, ScoreField,
};
pub use error::{FusionError, Result};
pub use harness::{
    check_validity, coverage_experiment, normal_mean_contour, simulate_studies, simulate_study_set, CoverageReport,
    InputLaw, StudySet, StudySpec, ValidityPipeline, ValidityReport, Verdict,
};
pub use measures::{necessity, possibility, Claim};
pub use pipeline::{fuse, fuse_with, CalibratorChoice, FusionOutcome};
pub use rules::{audit_monotonicity, fuse_pointwise, CustomRule, FusionRule, Monotonicity};

/// Generator for stream `stream` of `seed`. Distinct streams are independent,
/// which lets parallel work stay reproducible.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 mix of a master seed and an index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
