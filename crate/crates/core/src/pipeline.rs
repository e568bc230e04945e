//! End-to-end fusion: combine pointwise, validify through the null CDF, then
//! normalize by the grid maximum. The order matters: validification relies on
//! the inputs being uniform at the true parameter, which normalizing first
//! would destroy.

use crate::calibration::{mc_calibrator, Calibrator, DEFAULT_MC_SAMPLES};
use crate::contour::{normalize, Contour, GridFunction, ParameterGrid, ScoreField};
use crate::error::Result;
use crate::rules::{fuse_pointwise, FusionRule};
use crate::calibration::validify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CalibratorChoice {
    /// Closed form where one exists, Monte Carlo otherwise.
    #[default]
    Closed,
    MonteCarlo { samples: usize, seed: u64 },
}

impl CalibratorChoice {
    /// Builds the calibrator for `rule` with `k` inputs. Closed-form requests
    /// for rules without one fall back to `DEFAULT_MC_SAMPLES` draws from
    /// `fallback_seed`.
    pub fn build(&self, rule: &FusionRule, k: usize, fallback_seed: u64) -> Result<Calibrator> {
        match *self {
            CalibratorChoice::Closed => {
                Calibrator::closed_or_mc(rule, k, DEFAULT_MC_SAMPLES, fallback_seed)
            }
            CalibratorChoice::MonteCarlo { samples, seed } => mc_calibrator(rule, k, samples, seed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FusionOutcome {
    /// Pointwise-combined statistic.
    pub statistic: ScoreField,
    /// Statistic after the null CDF.
    pub validified: ScoreField,
    /// Normalized result; `None` when normalization was skipped.
    pub contour: Option<Contour>,
}

impl FusionOutcome {
    /// Grid maximum of the validified field, i.e. the normalizing constant.
    pub fn pre_normalization_max(&self) -> f64 {
        self.validified.max_value()
    }
}

/// Runs the three steps with a prebuilt calibrator.
pub fn fuse_with(
    rule: &FusionRule,
    calibrator: &Calibrator,
    contours: &[Contour],
    common_grid: Option<&ParameterGrid>,
    normalize_output: bool,
) -> Result<FusionOutcome> {
    let statistic = fuse_pointwise(rule, contours, common_grid)?;
    let validified = validify(&statistic, calibrator)?;
    let contour = if normalize_output {
        Some(normalize(&validified)?)
    } else {
        None
    };
    Ok(FusionOutcome {
        statistic,
        validified,
        contour,
    })
}

/// Fuses `contours` into a single valid contour.
pub fn fuse(
    rule: &FusionRule,
    choice: CalibratorChoice,
    contours: &[Contour],
    common_grid: Option<&ParameterGrid>,
    normalize_output: bool,
    seed: u64,
) -> Result<(FusionOutcome, Calibrator)> {
    let k = contours.len().max(1);
    let calibrator = choice.build(rule, k, seed)?;
    let outcome = fuse_with(rule, &calibrator, contours, common_grid, normalize_output)?;
    Ok((outcome, calibrator))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::FusionError;

    fn tri(grid: &ParameterGrid, peak: f64, half_width: f64) -> Contour {
        let v = grid
            .points()
            .iter()
            .map(|&t| (1.0 - (t - peak).abs() / half_width).max(0.0))
            .collect();
        Contour::new(grid.clone(), v).unwrap()
    }

    #[test]
    fn separated_triangles_need_normalization() {
        let grid = ParameterGrid::uniform(-3.0, 3.0, 601).unwrap();
        let inputs = [tri(&grid, -1.0, 2.0), tri(&grid, 1.0, 2.0)];
        let (out, cal) = fuse(&FusionRule::Min, CalibratorChoice::Closed, &inputs, None, true, 0).unwrap();
        assert!(cal.is_closed_form());
        assert!(out.statistic.max_value() < 1.0);
        assert!(out.pre_normalization_max() < 1.0);
        assert_eq!(out.contour.unwrap().max_value(), 1.0);
    }

    #[test]
    fn single_input_roundtrips() {
        let grid = ParameterGrid::uniform(-3.0, 3.0, 61).unwrap();
        let c = tri(&grid, 0.3, 1.5);
        for rule in [FusionRule::Min, FusionRule::Product, FusionRule::Mean] {
            let (out, _) = fuse(&rule, CalibratorChoice::Closed, std::slice::from_ref(&c), None, true, 0).unwrap();
            for (a, b) in out.contour.unwrap().values().iter().zip(c.values()) {
                assert!((a - b).abs() < 1e-12, "{rule}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn disjoint_supports_are_degenerate() {
        let grid = ParameterGrid::uniform(-3.0, 3.0, 61).unwrap();
        let inputs = [tri(&grid, -2.0, 0.5), tri(&grid, 2.0, 0.5)];
        let err = fuse(&FusionRule::Min, CalibratorChoice::Closed, &inputs, None, true, 0).unwrap_err();
        assert!(matches!(err, FusionError::DegenerateField));
        // without normalization the all-zero field is returned as is
        let (out, _) = fuse(&FusionRule::Min, CalibratorChoice::Closed, &inputs, None, false, 0).unwrap();
        assert!(out.contour.is_none());
        assert_eq!(out.pre_normalization_max(), 0.0);
    }

    #[test]
    fn monte_carlo_choice_tracks_closed_form() {
        let grid = ParameterGrid::uniform(-3.0, 3.0, 121).unwrap();
        let inputs = [tri(&grid, -0.5, 2.0), tri(&grid, 0.5, 2.0), tri(&grid, 0.0, 1.0)];
        let (closed, _) = fuse(&FusionRule::Product, CalibratorChoice::Closed, &inputs, None, false, 0).unwrap();
        let mc = CalibratorChoice::MonteCarlo { samples: 200_000, seed: 3 };
        let (sim, cal) = fuse(&FusionRule::Product, mc, &inputs, None, false, 0).unwrap();
        assert!(!cal.is_closed_form());
        for (a, b) in closed.validified.values().iter().zip(sim.validified.values()) {
            assert!((a - b).abs() < 0.01);
        }
    }
}
