//! Validification: the null CDF of a fused statistic under iid Unif(0, 1)
//! inputs, and its pointwise application to fused fields.
//!
//! Closed forms exist for the built-in rules:
//!
//! * min of k uniforms is Beta(1, k): `F(x) = 1 - (1 - x)^k`;
//! * product of k uniforms: `F(x) = x * sum_{j<k} (-ln x)^j / j!`
//!   (the law behind Fisher's chi-square combination);
//! * mean of k uniforms is a scaled Irwin-Hall variable:
//!   `F(x) = (1/k!) sum_{j <= floor(kx)} (-1)^j C(k, j) (kx - j)^k`.
//!
//! Any other rule is calibrated by simulation ([`mc_calibrator`]).

use std::sync::Arc;

use rayon::prelude::*;
use rand::Rng;

use crate::contour::{GridFunction, Provenance, ScoreField};
use crate::error::{FusionError, Result};
use crate::rules::{audit_monotonicity, FusionRule, DEFAULT_AUDIT_SAMPLES, DEFAULT_AUDIT_SEED};
use crate::stream_rng;

/// Largest k for which the alternating Irwin-Hall sum is trusted.
pub const MAX_CLOSED_FORM_MEAN_K: usize = 25;

/// Smallest admissible Monte Carlo calibration sample.
pub const MIN_MC_SAMPLES: usize = 1000;

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

const MC_CHUNK: usize = 1 << 14;

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(FusionError::Range(x))
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(FusionError::Arity {
            expected: 1,
            got: 0,
        })
    } else {
        Ok(())
    }
}

/// CDF of the minimum of `k` iid uniforms, i.e. Beta(1, k).
pub fn cdf_min(x: f64, k: usize) -> Result<f64> {
    check_unit(x)?;
    check_k(k)?;
    Ok(min_cdf_unchecked(x, k))
}

fn min_cdf_unchecked(x: f64, k: usize) -> f64 {
    // 1 - (1 - x)^k, stable near x = 1 and for large k
    (-(k as f64 * (-x).ln_1p()).exp_m1()).clamp(0.0, 1.0)
}

/// CDF of the product of `k` iid uniforms.
pub fn cdf_product(x: f64, k: usize) -> Result<f64> {
    check_unit(x)?;
    check_k(k)?;
    Ok(product_cdf_unchecked(x, k))
}

fn product_cdf_unchecked(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let l = -x.ln();
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..k {
        term *= l / j as f64;
        sum += term;
    }
    (x * sum).clamp(0.0, 1.0)
}

/// CDF of the mean of `k` iid uniforms (Irwin-Hall at `k x`).
///
/// Only `k <= MAX_CLOSED_FORM_MEAN_K` is supported; the alternating sum
/// loses too many digits beyond that.
pub fn cdf_mean(x: f64, k: usize) -> Result<f64> {
    check_unit(x)?;
    check_k(k)?;
    if k > MAX_CLOSED_FORM_MEAN_K {
        return Err(FusionError::UnsupportedClosedForm {
            rule: "mean".into(),
            k,
        });
    }
    Ok(mean_cdf_unchecked(x, k))
}

fn mean_cdf_unchecked(x: f64, k: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // The law is symmetric about 1/2; summing on the short side keeps the
    // alternating terms small.
    if x > 0.5 {
        return (1.0 - irwin_hall_lower(1.0 - x, k)).clamp(0.0, 1.0);
    }
    irwin_hall_lower(x, k).clamp(0.0, 1.0)
}

fn irwin_hall_lower(x: f64, k: usize) -> f64 {
    let s = k as f64 * x;
    let top = s.floor() as usize;
    let kf = k as i32;
    let mut sum = 0.0;
    // 1 / (j! (k - j)!), updated incrementally
    let mut inv_fact = 1.0 / factorial(k);
    for j in 0..=top.min(k) {
        if j > 0 {
            inv_fact *= (k - j + 1) as f64 / j as f64;
        }
        let base = (s - j as f64).max(0.0);
        let term = inv_fact * base.powi(kf);
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Sorted Monte Carlo sample of a fused statistic under the null.
#[derive(Debug, Clone)]
pub struct EmpiricalCdf {
    rule: String,
    k: usize,
    seed: u64,
    sample: Arc<[f64]>,
}

impl EmpiricalCdf {
    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Right-continuous empirical CDF: fraction of sample points `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let below = self.sample.partition_point(|&s| s <= x);
        below as f64 / self.sample.len() as f64
    }
}

/// Null CDF of a fused statistic.
#[derive(Debug, Clone)]
pub enum Calibrator {
    ClosedFormMin { k: usize },
    ClosedFormProduct { k: usize },
    ClosedFormMean { k: usize },
    Empirical(EmpiricalCdf),
}

impl Calibrator {
    /// Closed-form calibrator for a built-in rule.
    pub fn closed_form(rule: &FusionRule, k: usize) -> Result<Self> {
        check_k(k)?;
        match rule {
            FusionRule::Min => Ok(Calibrator::ClosedFormMin { k }),
            FusionRule::Product => Ok(Calibrator::ClosedFormProduct { k }),
            FusionRule::Mean if k <= MAX_CLOSED_FORM_MEAN_K => Ok(Calibrator::ClosedFormMean { k }),
            _ => Err(FusionError::UnsupportedClosedForm {
                rule: rule.name().to_owned(),
                k,
            }),
        }
    }

    /// Closed form when available, otherwise a Monte Carlo calibrator with
    /// `mc_samples` draws from `seed`.
    pub fn closed_or_mc(rule: &FusionRule, k: usize, mc_samples: usize, seed: u64) -> Result<Self> {
        match Self::closed_form(rule, k) {
            Err(FusionError::UnsupportedClosedForm { .. }) => mc_calibrator(rule, k, mc_samples, seed),
            other => other,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Calibrator::ClosedFormMin { k }
            | Calibrator::ClosedFormProduct { k }
            | Calibrator::ClosedFormMean { k } => *k,
            Calibrator::Empirical(e) => e.k,
        }
    }

    pub fn rule_name(&self) -> &str {
        match self {
            Calibrator::ClosedFormMin { .. } => "min",
            Calibrator::ClosedFormProduct { .. } => "product",
            Calibrator::ClosedFormMean { .. } => "mean",
            Calibrator::Empirical(e) => &e.rule,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self, Calibrator::Empirical(_))
    }

    /// Short label such as `closed` or `mc(M=1000000, seed=7)`.
    pub fn describe(&self) -> String {
        match self {
            Calibrator::Empirical(e) => format!("mc(M={}, seed={})", e.sample.len(), e.seed),
            _ => "closed".to_owned(),
        }
    }

    /// Range of the statistic over which the calibrator is meaningful.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Calibrator::Empirical(e) => (e.sample[0], e.sample[e.sample.len() - 1]),
            _ => (0.0, 1.0),
        }
    }

    /// Evaluates F at `x`.
    pub fn apply(&self, x: f64) -> Result<f64> {
        match self {
            Calibrator::Empirical(_) if x.is_nan() => Err(FusionError::Range(x)),
            Calibrator::Empirical(_) => Ok(self.apply_unchecked(x)),
            _ => {
                check_unit(x)?;
                Ok(self.apply_unchecked(x))
            }
        }
    }

    pub(crate) fn apply_unchecked(&self, x: f64) -> f64 {
        match self {
            Calibrator::ClosedFormMin { k } => min_cdf_unchecked(x, *k),
            Calibrator::ClosedFormProduct { k } => product_cdf_unchecked(x, *k),
            Calibrator::ClosedFormMean { k } => mean_cdf_unchecked(x, *k),
            Calibrator::Empirical(e) => e.cdf(x),
        }
    }

    /// `points` equally spaced `(x, F(x))` pairs across the calibrator's support.
    pub fn curve(&self, points: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.support();
        let n = points.max(2);
        (0..n)
            .map(|i| {
                let x = if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                };
                (x, self.apply_unchecked(x))
            })
            .collect()
    }
}

/// Simulates the null law of `rule` with `k` inputs from `samples` draws.
///
/// Draws are generated in fixed-size chunks, each from its own stream of the
/// seeded generator, so the sample is identical for a given seed regardless
/// of thread count. Custom rules must pass the monotonicity audit.
pub fn mc_calibrator(rule: &FusionRule, k: usize, samples: usize, seed: u64) -> Result<Calibrator> {
    check_k(k)?;
    if samples < MIN_MC_SAMPLES {
        return Err(FusionError::InsufficientSamples {
            got: samples,
            min: MIN_MC_SAMPLES,
        });
    }
    if let Some(arity) = rule.arity() {
        if arity != k {
            return Err(FusionError::Arity {
                expected: arity,
                got: k,
            });
        }
    }
    if !rule.is_builtin() && !audit_monotonicity(rule, k, DEFAULT_AUDIT_SAMPLES, DEFAULT_AUDIT_SEED) {
        return Err(FusionError::NonMonotoneRule(rule.name().to_owned()));
    }

    let mut sample = vec![0.0; samples];
    sample
        .par_chunks_mut(MC_CHUNK)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = stream_rng(seed, chunk as u64);
            let mut u = vec![0.0; k];
            for slot in out.iter_mut() {
                for ui in u.iter_mut() {
                    *ui = rng.random::<f64>();
                }
                *slot = rule.combine_unchecked(&u);
            }
        });
    if let Some(bad) = sample.iter().find(|v| !v.is_finite()) {
        return Err(FusionError::InvalidValues(format!(
            "rule `{}` produced non-finite value {bad}",
            rule.name()
        )));
    }
    sample.par_sort_unstable_by(f64::total_cmp);

    Ok(Calibrator::Empirical(EmpiricalCdf {
        rule: rule.name().to_owned(),
        k,
        seed,
        sample: sample.into(),
    }))
}

/// Applies `cal` pointwise to a fused field.
///
/// The field must carry `Fused` provenance whose rule and k match the
/// calibrator.
pub fn validify(field: &ScoreField, cal: &Calibrator) -> Result<ScoreField> {
    let (rule, k) = match field.provenance() {
        Provenance::Fused { rule, k } => (rule, *k),
        other => {
            return Err(FusionError::Provenance(format!(
                "validification needs a fused field, got {other}"
            )))
        }
    };
    if rule != cal.rule_name() || k != cal.k() {
        return Err(FusionError::Provenance(format!(
            "field fused by {rule} with k={k} but calibrator is for {} with k={}",
            cal.rule_name(),
            cal.k()
        )));
    }
    let values = field
        .values()
        .iter()
        .map(|&x| cal.apply(x))
        .collect::<Result<Vec<_>>>()?;
    ScoreField::with_provenance(
        field.grid().clone(),
        values,
        Provenance::Validified {
            rule: rule.clone(),
            k,
        },
        true,
    )
}
