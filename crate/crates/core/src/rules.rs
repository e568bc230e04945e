//! Pointwise combination rules for k contour values.
//!
//! A rule maps `[0, 1]^k` to the reals and must be monotone in every
//! coordinate for validification to be sound. The built-in rules are
//! nondecreasing in every coordinate. Custom rules declare a direction per
//! coordinate and are audited by random sampling before any calibrator is
//! built for them; the audit can find violations but cannot prove their
//! absence.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contour::{Contour, GridFunction, ParameterGrid, Provenance, ScoreField};
use crate::error::{FusionError, Result};

pub const DEFAULT_AUDIT_SAMPLES: usize = 10_000;
pub const DEFAULT_AUDIT_SEED: u64 = 0x5eed_a0d1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Nondecreasing,
    Nonincreasing,
}

type RuleFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A user-supplied rule of fixed arity.
pub struct CustomRule {
    name: String,
    directions: Vec<Monotonicity>,
    func: Box<RuleFn>,
}

impl CustomRule {
    pub fn new<F>(name: impl Into<String>, directions: Vec<Monotonicity>, func: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            directions,
            func: Box::new(func),
        }
    }

    /// Convenience constructor for rules nondecreasing in all `k` coordinates.
    pub fn nondecreasing<F>(name: impl Into<String>, k: usize, func: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(name, vec![Monotonicity::Nondecreasing; k], func)
    }

    pub fn arity(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[Monotonicity] {
        &self.directions
    }
}

impl fmt::Debug for CustomRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomRule")
            .field("name", &self.name)
            .field("directions", &self.directions)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum FusionRule {
    Min,
    Product,
    Mean,
    Custom(Arc<CustomRule>),
}

impl FusionRule {
    /// Wraps a custom rule after it passes the default monotonicity audit.
    pub fn custom(rule: CustomRule) -> Result<Self> {
        let k = rule.arity();
        let rule = FusionRule::Custom(Arc::new(rule));
        if audit_monotonicity(&rule, k, DEFAULT_AUDIT_SAMPLES, DEFAULT_AUDIT_SEED) {
            Ok(rule)
        } else {
            Err(FusionError::NonMonotoneRule(rule.name().to_owned()))
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "min" => Some(FusionRule::Min),
            "product" => Some(FusionRule::Product),
            "mean" => Some(FusionRule::Mean),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            FusionRule::Min => "min",
            FusionRule::Product => "product",
            FusionRule::Mean => "mean",
            FusionRule::Custom(c) => &c.name,
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, FusionRule::Custom(_))
    }

    /// Arity fixed by the rule itself, if any.
    pub fn arity(&self) -> Option<usize> {
        match self {
            FusionRule::Custom(c) => Some(c.arity()),
            _ => None,
        }
    }

    fn direction(&self, i: usize) -> Monotonicity {
        match self {
            FusionRule::Custom(c) => c.directions[i],
            _ => Monotonicity::Nondecreasing,
        }
    }

    /// Applies the rule to `k >= 1` values in [0, 1].
    pub fn combine(&self, values: &[f64]) -> Result<f64> {
        let expected = self.arity().unwrap_or(values.len().max(1));
        if values.len() != expected {
            return Err(FusionError::Arity {
                expected,
                got: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(FusionError::Range(bad));
        }
        Ok(self.combine_unchecked(values))
    }

    /// Hot-path combination without arity or range checks.
    pub(crate) fn combine_unchecked(&self, values: &[f64]) -> f64 {
        match self {
            FusionRule::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            FusionRule::Product => values.iter().product(),
            FusionRule::Mean => values.iter().sum::<f64>() / values.len() as f64,
            FusionRule::Custom(c) => (c.func)(values),
        }
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Combines `contours` pointwise into a fused statistic field.
///
/// Without `common_grid` every contour must live on the same grid. With it,
/// each contour is linearly resampled onto `common_grid`, which must lie
/// inside every contour's domain.
pub fn fuse_pointwise(
    rule: &FusionRule,
    contours: &[Contour],
    common_grid: Option<&ParameterGrid>,
) -> Result<ScoreField> {
    let k = contours.len();
    if k == 0 {
        return Err(FusionError::Arity {
            expected: rule.arity().unwrap_or(1),
            got: 0,
        });
    }
    if let Some(expected) = rule.arity() {
        if expected != k {
            return Err(FusionError::Arity { expected, got: k });
        }
    }

    let (grid, columns): (ParameterGrid, Vec<ScoreField>) = match common_grid {
        Some(grid) => {
            let cols = contours
                .iter()
                .map(|c| c.resample(grid))
                .collect::<Result<Vec<_>>>()?;
            (grid.clone(), cols)
        }
        None => {
            let grid = contours[0].grid().clone();
            if contours.iter().any(|c| !c.shares_grid(&grid)) {
                return Err(FusionError::GridMismatch);
            }
            (grid, contours.iter().map(Contour::to_field).collect())
        }
    };

    let mut row = vec![0.0; k];
    let values = (0..grid.len())
        .map(|i| {
            for (slot, col) in row.iter_mut().zip(&columns) {
                *slot = col.values()[i];
            }
            rule.combine_unchecked(&row)
        })
        .collect();

    ScoreField::with_provenance(
        grid,
        values,
        Provenance::Fused {
            rule: rule.name().to_owned(),
            k,
        },
        rule.is_builtin(),
    )
}

/// Sampled check that `rule` respects its declared monotonicity on `[0,1]^k`.
///
/// Each sample draws `u` uniformly and moves a random subset of coordinates
/// in the declared direction to get `v`; the check requires
/// `combine(u) <= combine(v)`. Returns false on the first violation, on an
/// arity mismatch, or on a non-finite output.
pub fn audit_monotonicity(rule: &FusionRule, k: usize, samples: usize, seed: u64) -> bool {
    if k == 0 || rule.arity().is_some_and(|a| a != k) {
        return false;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; k];
    let mut v = vec![0.0; k];
    for _ in 0..samples {
        for i in 0..k {
            u[i] = rng.random::<f64>();
            v[i] = if rng.random::<bool>() {
                let w: f64 = rng.random();
                match rule.direction(i) {
                    Monotonicity::Nondecreasing => u[i] + (1.0 - u[i]) * w,
                    Monotonicity::Nonincreasing => u[i] * w,
                }
            } else {
                u[i]
            };
        }
        let (lo, hi) = (rule.combine_unchecked(&u), rule.combine_unchecked(&v));
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return false;
        }
    }
    true
}
