//! Monte Carlo certification of the fusion pipeline.
//!
//! Two regimes are covered:
//!
//! * Without normalization, the value of the fused-and-validified statistic
//!   at the true parameter depends only on the k input values there, which
//!   are iid Unif(0, 1) for exact inputs. The harness simulates those values
//!   directly.
//! * With normalization, the normalizing constant is a functional of the
//!   whole field, so the harness simulates complete normal-mean studies,
//!   builds their contours, fuses them on a common grid and reads the result
//!   at the true parameter.
//!
//! All randomness flows from a master seed through per-chunk or
//! per-replication streams, so reports are identical across runs and thread
//! counts.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::Calibrator;
use crate::contour::{cut_width, Contour, GridFunction, ParameterGrid, DEFAULT_GRID_POINTS};
use crate::error::{FusionError, Result};
use crate::pipeline::{fuse_with, CalibratorChoice};
use crate::rules::FusionRule;
use crate::stats::{ks_uniform, three_sigma_tolerance, two_sided_normal_tail};
use crate::{derive_seed, stream_rng};

pub const DEFAULT_ALPHAS: [f64; 5] = [0.01, 0.05, 0.10, 0.25, 0.50];

/// Per-study sample sizes used when none are given.
pub const DEFAULT_SAMPLE_SIZES: [usize; 5] = [5, 10, 20, 50, 100];

/// Replications required when the statistic is simulated directly.
pub const MIN_DIRECT_REPLICATIONS: usize = 10_000;

/// Replications required when whole studies are simulated per replication.
pub const MIN_STUDY_REPLICATIONS: usize = 1_000;

pub const MIN_COVERAGE_REPLICATIONS: usize = 100;

const CHUNK: usize = 1 << 13;

/// A set of independent normal-mean studies with known noise scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySpec {
    pub sample_sizes: Vec<usize>,
    pub theta: f64,
    pub sigma: f64,
    pub grid_points: usize,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            sample_sizes: DEFAULT_SAMPLE_SIZES.to_vec(),
            theta: 0.0,
            sigma: 1.0,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl StudySpec {
    /// `k` studies whose sizes cycle through [`DEFAULT_SAMPLE_SIZES`].
    pub fn with_k(k: usize) -> Self {
        Self {
            sample_sizes: DEFAULT_SAMPLE_SIZES.iter().copied().cycle().take(k).collect(),
            ..Self::default()
        }
    }

    pub fn k(&self) -> usize {
        self.sample_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() {
            return Err(FusionError::InvalidSpec("need at least one study".into()));
        }
        if self.sample_sizes.contains(&0) {
            return Err(FusionError::InvalidSpec("sample sizes must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(FusionError::InvalidSpec(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.theta.is_finite() {
            return Err(FusionError::InvalidSpec("theta must be finite".into()));
        }
        if self.grid_points < 2 {
            return Err(FusionError::InvalidSpec("grid needs at least 2 points".into()));
        }
        Ok(())
    }

    /// Common grid centred on the true mean, wide enough that every study's
    /// contour fits with overwhelming probability, and containing `theta`.
    pub fn common_grid(&self) -> Result<ParameterGrid> {
        self.validate()?;
        let n_min = *self.sample_sizes.iter().min().expect("validated non-empty") as f64;
        let half = 12.0 * self.sigma / n_min.sqrt();
        ParameterGrid::uniform(self.theta - half, self.theta + half, self.grid_points)?
            .with_point(self.theta)
    }
}

/// Valid contour for a normal mean with known `sigma`:
/// `pi(t) = 2 (1 - Phi(sqrt(n) |ybar - t| / sigma))`.
///
/// The contour lives on `grid` with `ybar` inserted, so its peak value 1 is
/// attained on the grid. The grid must cover `ybar +- 6 sigma / sqrt(n)`.
pub fn normal_mean_contour(ybar: f64, n: usize, sigma: f64, grid: &ParameterGrid) -> Result<Contour> {
    if n == 0 || sigma.is_nan() || sigma <= 0.0 || !ybar.is_finite() {
        return Err(FusionError::InvalidSpec(format!(
            "need n >= 1, sigma > 0 and finite ybar (n={n}, sigma={sigma}, ybar={ybar})"
        )));
    }
    let scale = (n as f64).sqrt() / sigma;
    let reach = 6.0 / scale;
    if !(grid.contains(ybar - reach) && grid.contains(ybar + reach)) {
        return Err(FusionError::OutOfDomain {
            theta: if grid.contains(ybar - reach) { ybar + reach } else { ybar - reach },
            min: grid.min(),
            max: grid.max(),
        });
    }
    let grid = grid.with_point(ybar)?;
    let values = grid
        .points()
        .iter()
        .map(|&t| two_sided_normal_tail(scale * (ybar - t)))
        .collect();
    Contour::new(grid, values)
}

fn sample_mean<R: Rng>(rng: &mut R, n: usize, theta: f64, sigma: f64) -> f64 {
    let sum: f64 = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).sum();
    theta + sigma * sum / n as f64
}

/// One simulated study: `n` draws from N(theta, sigma^2) on generator stream
/// `stream` of `seed`. Returns the sample mean and its contour.
pub fn simulate_study(
    n: usize,
    theta: f64,
    sigma: f64,
    grid: &ParameterGrid,
    seed: u64,
    stream: u64,
) -> Result<(f64, Contour)> {
    let mut rng = stream_rng(seed, stream);
    let ybar = sample_mean(&mut rng, n, theta, sigma);
    Ok((ybar, normal_mean_contour(ybar, n, sigma, grid)?))
}

/// One simulated set of studies.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySet {
    pub ybars: Vec<f64>,
    /// Each contour lives on the common grid with its own sample mean added.
    pub contours: Vec<Contour>,
    /// Common grid plus every sample mean: the grid the studies are fused on.
    pub fusion_grid: ParameterGrid,
}

/// Simulates one set of studies on `grid`; study `i` uses stream `i` of `seed`.
pub fn simulate_study_set(spec: &StudySpec, grid: &ParameterGrid, seed: u64) -> Result<StudySet> {
    let mut ybars = Vec::with_capacity(spec.k());
    let mut contours = Vec::with_capacity(spec.k());
    for (i, &n) in spec.sample_sizes.iter().enumerate() {
        let (ybar, c) = simulate_study(n, spec.theta, spec.sigma, grid, seed, i as u64)?;
        ybars.push(ybar);
        contours.push(c);
    }
    let fusion_grid = grid.with_points(&ybars)?;
    Ok(StudySet {
        ybars,
        contours,
        fusion_grid,
    })
}

/// Simulates `spec.k()` independent studies on [`StudySpec::common_grid`].
pub fn simulate_studies(spec: &StudySpec, seed: u64) -> Result<Vec<Contour>> {
    let grid = spec.common_grid()?;
    Ok(simulate_study_set(spec, &grid, seed)?.contours)
}

/// Law of the input contours at the true parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputLaw {
    /// Exact inputs: Unif(0, 1).
    Uniform,
    /// Conservative inputs: Beta(2, 1), stochastically larger than uniform.
    /// For simulated studies this is the square root of an exact contour.
    Beta21,
}

impl InputLaw {
    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.transform(u)
    }

    fn transform(self, u: f64) -> f64 {
        match self {
            InputLaw::Uniform => u,
            // inverse CDF of Beta(2, 1), F(x) = x^2
            InputLaw::Beta21 => u.sqrt(),
        }
    }

    fn apply(self, c: Contour) -> Result<Contour> {
        match self {
            InputLaw::Uniform => Ok(c),
            InputLaw::Beta21 => {
                let values = c.values().iter().map(|&v| self.transform(v)).collect();
                Contour::new(c.grid().clone(), values)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InputLaw::Uniform => "uniform",
            InputLaw::Beta21 => "beta21",
        }
    }
}

/// What [`check_validity`] certifies.
#[derive(Debug, Clone)]
pub struct ValidityPipeline {
    pub rule: FusionRule,
    pub calibrator: CalibratorChoice,
    /// When set, whole studies are simulated and the fused field normalized.
    pub normalize: Option<StudySpec>,
    pub inputs: InputLaw,
}

impl ValidityPipeline {
    pub fn new(rule: FusionRule) -> Self {
        Self {
            rule,
            calibrator: CalibratorChoice::Closed,
            normalize: None,
            inputs: InputLaw::Uniform,
        }
    }

    pub fn normalized(mut self, studies: StudySpec) -> Self {
        self.normalize = Some(studies);
        self
    }

    pub fn with_inputs(mut self, inputs: InputLaw) -> Self {
        self.inputs = inputs;
        self
    }

    pub fn with_calibrator(mut self, calibrator: CalibratorChoice) -> Self {
        self.calibrator = calibrator;
        self
    }

    pub fn describe(&self, calibrator: &Calibrator) -> String {
        format!(
            "{} -> validify[{}] -> {} (inputs: {})",
            self.rule,
            calibrator.describe(),
            if self.normalize.is_some() { "normalize" } else { "no-normalize" },
            self.inputs.name()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCheck {
    pub alpha: f64,
    pub exceedance: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Estimated `P(pi(theta) <= alpha)` per level with one-sided verdicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub pipeline: String,
    pub rule: String,
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub normalize: bool,
    pub inputs: InputLaw,
    pub calibrator: String,
    /// KS distance of the simulated values at the truth from Unif(0, 1).
    pub ks_uniform: f64,
    pub levels: Vec<LevelCheck>,
}

impl ValidityReport {
    pub fn all_pass(&self) -> bool {
        self.levels.iter().all(|l| l.verdict == Verdict::Pass)
    }

    pub fn level(&self, alpha: f64) -> Option<&LevelCheck> {
        self.levels.iter().find(|l| l.alpha == alpha)
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    match alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        Some(&a) => Err(FusionError::InvalidLevel(a)),
        None if alphas.is_empty() => Err(FusionError::InvalidSpec("empty alpha grid".into())),
        None => Ok(()),
    }
}

/// Simulated values of the pipeline's output at the true parameter.
pub fn simulate_at_truth(
    pipeline: &ValidityPipeline,
    calibrator: &Calibrator,
    k: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    match &pipeline.normalize {
        None => {
            let mut out = vec![0.0; m];
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(chunk, out)| {
                let mut rng = stream_rng(seed, chunk as u64);
                let mut u = vec![0.0; k];
                for slot in out.iter_mut() {
                    for ui in u.iter_mut() {
                        *ui = pipeline.inputs.draw(&mut rng);
                    }
                    *slot = calibrator.apply_unchecked(pipeline.rule.combine_unchecked(&u));
                }
            });
            Ok(out)
        }
        Some(spec) => {
            if spec.k() != k {
                return Err(FusionError::InvalidSpec(format!(
                    "study spec has {} studies but k = {k}",
                    spec.k()
                )));
            }
            let grid = spec.common_grid()?;
            (0..m)
                .into_par_iter()
                .map(|r| {
                    let rep = simulate_study_set(spec, &grid, derive_seed(seed, r as u64))?;
                    let inputs = rep
                        .contours
                        .into_iter()
                        .map(|c| pipeline.inputs.apply(c))
                        .collect::<Result<Vec<_>>>()?;
                    let out = fuse_with(&pipeline.rule, calibrator, &inputs, Some(&rep.fusion_grid), true)?;
                    out.contour.expect("normalized").evaluate(spec.theta)
                })
                .collect()
        }
    }
}

/// Estimates `P(pi(theta) <= alpha)` for each level from `m` replications.
///
/// Verdicts are one-sided: a level passes iff the estimate is at most
/// `alpha + 3 sqrt(alpha (1 - alpha) / m)`.
pub fn check_validity(
    pipeline: &ValidityPipeline,
    k: usize,
    m: usize,
    alphas: &[f64],
    seed: u64,
) -> Result<ValidityReport> {
    check_alphas(alphas)?;
    if k == 0 {
        return Err(FusionError::Arity { expected: 1, got: 0 });
    }
    let min = if pipeline.normalize.is_some() {
        MIN_STUDY_REPLICATIONS
    } else {
        MIN_DIRECT_REPLICATIONS
    };
    if m < min {
        return Err(FusionError::InsufficientSamples { got: m, min });
    }
    let calibrator = pipeline
        .calibrator
        .build(&pipeline.rule, k, derive_seed(seed, u64::MAX))?;
    let mut values = simulate_at_truth(pipeline, &calibrator, k, m, seed)?;
    values.sort_unstable_by(f64::total_cmp);

    let levels = alphas
        .iter()
        .map(|&alpha| {
            let exceedance = values.partition_point(|&v| v <= alpha) as f64 / m as f64;
            let tolerance = three_sigma_tolerance(alpha, m);
            LevelCheck {
                alpha,
                exceedance,
                tolerance,
                verdict: if exceedance <= alpha + tolerance {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                },
            }
        })
        .collect();

    Ok(ValidityReport {
        pipeline: pipeline.describe(&calibrator),
        rule: pipeline.rule.name().to_owned(),
        k,
        m,
        seed,
        normalize: pipeline.normalize.is_some(),
        inputs: pipeline.inputs,
        calibrator: calibrator.describe(),
        ks_uniform: ks_uniform(&values),
        levels,
    })
}

/// Coverage and efficiency of one fused rule over simulated study sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub rule: String,
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Fraction of replications whose fused alpha-cut contains the truth.
    pub coverage: f64,
    /// Coverage demanded by validity, less three binomial standard errors.
    pub coverage_bound: f64,
    pub mean_width: f64,
    /// Mean over replications of the narrowest single-study alpha-cut.
    pub best_single_study_width: f64,
    /// Normal-mean contour from the pooled data of all studies.
    pub pooled_oracle_width: f64,
    pub pooled_oracle_coverage: f64,
}

struct CoverageDraw {
    covered: bool,
    width: f64,
    best_single: f64,
    oracle_covered: bool,
    oracle_width: f64,
}

/// Repeats simulate, fuse, validify and normalize `replications` times and
/// records coverage and width of the `alpha`-cut, alongside the narrowest
/// single-study cut and the pooled-data normal-mean contour for reference.
pub fn coverage_experiment(
    spec: &StudySpec,
    rule: &FusionRule,
    replications: usize,
    alpha: f64,
    seed: u64,
) -> Result<CoverageReport> {
    spec.validate()?;
    if replications < MIN_COVERAGE_REPLICATIONS {
        return Err(FusionError::InsufficientSamples {
            got: replications,
            min: MIN_COVERAGE_REPLICATIONS,
        });
    }
    check_alphas(&[alpha])?;
    let grid = spec.common_grid()?;
    let calibrator = CalibratorChoice::Closed.build(rule, spec.k(), derive_seed(seed, u64::MAX))?;
    let total_n: usize = spec.sample_sizes.iter().sum();

    let draws = (0..replications)
        .into_par_iter()
        .map(|r| {
            let rep = simulate_study_set(spec, &grid, derive_seed(seed, r as u64))?;
            let fused = fuse_with(rule, &calibrator, &rep.contours, Some(&rep.fusion_grid), true)?
                .contour
                .expect("normalized");
            let best_single = rep
                .contours
                .iter()
                .map(|c| cut_width(c, alpha))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            let pooled = spec
                .sample_sizes
                .iter()
                .zip(&rep.ybars)
                .map(|(&n, &y)| n as f64 * y)
                .sum::<f64>()
                / total_n as f64;
            let oracle = normal_mean_contour(pooled, total_n, spec.sigma, &grid)?;
            Ok(CoverageDraw {
                covered: fused.evaluate(spec.theta)? > alpha,
                width: cut_width(&fused, alpha)?,
                best_single,
                oracle_covered: oracle.evaluate(spec.theta)? > alpha,
                oracle_width: cut_width(&oracle, alpha)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let r = replications as f64;
    let mean = |f: &dyn Fn(&CoverageDraw) -> f64| draws.iter().map(f).sum::<f64>() / r;
    Ok(CoverageReport {
        rule: rule.name().to_owned(),
        replications,
        alpha,
        seed,
        coverage: mean(&|d| d.covered as u8 as f64),
        coverage_bound: 1.0 - alpha - three_sigma_tolerance(alpha, replications),
        mean_width: mean(&|d| d.width),
        best_single_study_width: mean(&|d| d.best_single),
        pooled_oracle_width: mean(&|d| d.oracle_width),
        pooled_oracle_coverage: mean(&|d| d.oracle_covered as u8 as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::cdf_min;
    use crate::pipeline::fuse;
    use crate::rules::fuse_pointwise;

    fn wide_grid() -> ParameterGrid {
        ParameterGrid::uniform(-5.0, 5.0, 1001).unwrap()
    }

    #[test]
    fn normal_mean_contour_examples() {
        let c = normal_mean_contour(0.0, 4, 1.0, &wide_grid()).unwrap();
        assert_eq!(c.evaluate(0.0).unwrap(), 1.0);
        // 2 (1 - Phi(1.96)) = 0.04999579...
        let v = c.evaluate(0.98).unwrap();
        assert!((v - 0.049_995_790_296_440_87).abs() < 1e-10, "{v}");
        assert!((c.evaluate(-0.98).unwrap() - v).abs() < 1e-15);
    }

    #[test]
    fn normal_mean_contour_inserts_peak() {
        let grid = wide_grid();
        let c = normal_mean_contour(0.123, 9, 1.0, &grid).unwrap();
        assert_eq!(c.grid().len(), grid.len() + 1);
        assert_eq!(c.max_value(), 1.0);
        assert_eq!(c.argmax(), 0.123);
    }

    #[test]
    fn normal_mean_contour_needs_coverage() {
        let grid = ParameterGrid::uniform(-1.0, 1.0, 101).unwrap();
        assert!(matches!(
            normal_mean_contour(0.0, 4, 1.0, &grid),
            Err(FusionError::OutOfDomain { .. })
        ));
        assert!(normal_mean_contour(0.0, 100, 1.0, &grid).is_ok());
    }

    #[test]
    fn study_spec_validation() {
        assert!(StudySpec { sample_sizes: vec![], ..StudySpec::default() }.validate().is_err());
        assert!(StudySpec { sample_sizes: vec![3, 0], ..StudySpec::default() }.validate().is_err());
        assert!(StudySpec { sigma: 0.0, ..StudySpec::default() }.validate().is_err());
        assert_eq!(StudySpec::with_k(7).sample_sizes, vec![5, 10, 20, 50, 100, 5, 10]);
        let g = StudySpec::default().common_grid().unwrap();
        assert!(g.points().contains(&0.0));
    }

    #[test]
    fn huge_study_is_sharp_and_centred() {
        let spec = StudySpec {
            sample_sizes: vec![1_000_000],
            ..StudySpec::default()
        };
        let grid = spec.common_grid().unwrap();
        let ybar = simulate_study_set(&spec, &grid, 1).unwrap().ybars[0];
        assert!(ybar.abs() < 0.005);
        let c = normal_mean_contour(ybar, 1_000_000, 1.0, &grid).unwrap();
        assert!(cut_width(&c, 0.05).unwrap() < 0.005);
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = StudySpec::default();
        let a = simulate_studies(&spec, 99).unwrap();
        let b = simulate_studies(&spec, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_studies(&spec, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shared_stream_studies_fuse_to_their_validified_self() {
        let grid = wide_grid();
        let (_, a) = simulate_study(10, 0.0, 1.0, &grid, 5, 0).unwrap();
        let (_, b) = simulate_study(10, 0.0, 1.0, &grid, 5, 0).unwrap();
        assert_eq!(a, b);
        let gamma = fuse_pointwise(&FusionRule::Min, &[a.clone(), b.clone()], Some(&grid)).unwrap();
        let (out, _) = fuse(&FusionRule::Min, CalibratorChoice::Closed, &[a.clone(), b], Some(&grid), false, 0).unwrap();
        for (i, &t) in grid.points().iter().enumerate() {
            let x = a.evaluate(t).unwrap();
            assert_eq!(gamma.values()[i], x);
            assert_eq!(out.validified.values()[i], cdf_min(x, 2).unwrap());
        }
    }

    #[test]
    fn direct_validity_examples() {
        let m = 200_000;
        let report = check_validity(&ValidityPipeline::new(FusionRule::Min), 2, m, &DEFAULT_ALPHAS, 21).unwrap();
        let l = report.level(0.05).unwrap();
        assert!((l.exceedance - 0.05).abs() <= l.tolerance, "{l:?}");
        assert!(report.all_pass());

        let report = check_validity(&ValidityPipeline::new(FusionRule::Product), 5, m, &DEFAULT_ALPHAS, 22).unwrap();
        let l = report.level(0.10).unwrap();
        assert!((l.exceedance - 0.10).abs() <= l.tolerance, "{l:?}");
    }

    #[test]
    fn validity_rejects_small_m_and_bad_levels() {
        let p = ValidityPipeline::new(FusionRule::Min);
        assert!(matches!(
            check_validity(&p, 2, 9_999, &DEFAULT_ALPHAS, 0),
            Err(FusionError::InsufficientSamples { .. })
        ));
        assert!(check_validity(&p, 2, 10_000, &[0.0], 0).is_err());
        assert!(check_validity(&p, 2, 10_000, &[], 0).is_err());
        let n = p.clone().normalized(StudySpec::with_k(3));
        assert!(check_validity(&n, 2, 1_000, &DEFAULT_ALPHAS, 0).is_err());
    }

    #[test]
    fn normalized_validity_is_one_sided() {
        let p = ValidityPipeline::new(FusionRule::Mean).normalized(StudySpec::with_k(3));
        let report = check_validity(&p, 3, 1_000, &DEFAULT_ALPHAS, 4).unwrap();
        assert!(report.normalize);
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn coverage_of_min_and_product() {
        let spec = StudySpec::default();
        for rule in [FusionRule::Min, FusionRule::Product] {
            let r = coverage_experiment(&spec, &rule, 1000, 0.05, 17).unwrap();
            assert!((r.coverage_bound - 0.92932).abs() < 1e-4);
            assert!(r.coverage >= r.coverage_bound, "{r:?}");
            assert!(r.pooled_oracle_width < r.mean_width);
        }
    }

    #[test]
    fn coverage_requires_replications() {
        assert!(coverage_experiment(&StudySpec::default(), &FusionRule::Min, 99, 0.05, 0).is_err());
    }
}
