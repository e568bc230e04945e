//! Grid-based possibility contours and intermediate score fields.
//!
//! The parameter line is discretized on a [`ParameterGrid`]. A [`ScoreField`]
//! is any grid function (a fused statistic, or a validified but not yet
//! normalized field). A [`Contour`] additionally attains the value 1 somewhere
//! on its grid. Off-grid evaluation is piecewise linear.

use std::fmt;
use std::sync::Arc;

use crate::error::{FusionError, Result};

/// Tolerance used when checking that a stored contour attains 1.
pub const CONSONANCE_TOL: f64 = 1e-9;

/// Grid resolution used when the caller does not pick one.
pub const DEFAULT_GRID_POINTS: usize = 1001;

/// Strictly increasing, finite sample points of the parameter line.
#[derive(Clone, PartialEq)]
pub struct ParameterGrid {
    points: Arc<[f64]>,
}

impl ParameterGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(FusionError::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(bad) = points.iter().find(|p| !p.is_finite()) {
            return Err(FusionError::InvalidGrid(format!("non-finite point {bad}")));
        }
        if let Some(w) = points.windows(2).find(|w| w[0] >= w[1]) {
            return Err(FusionError::InvalidGrid(format!(
                "points must be strictly increasing ({} followed by {})",
                w[0], w[1]
            )));
        }
        Ok(Self {
            points: points.into(),
        })
    }

    /// `m` equally spaced points from `min` to `max` inclusive.
    pub fn uniform(min: f64, max: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(FusionError::InvalidGrid(format!(
                "need at least 2 points, got {m}"
            )));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(FusionError::InvalidGrid(format!(
                "need finite min < max, got [{min}, {max}]"
            )));
        }
        let step = (max - min) / (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|i| min + step * i as f64).collect();
        // pin the endpoints against accumulated rounding
        points[m - 1] = max;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.min() && theta <= self.max()
    }

    /// Returns a grid that also contains `theta`, inserting it if absent.
    pub fn with_point(&self, theta: f64) -> Result<Self> {
        if !self.contains(theta) {
            return Err(self.out_of_domain(theta));
        }
        let idx = self.points.partition_point(|&p| p < theta);
        if self.points[idx] == theta {
            return Ok(self.clone());
        }
        let mut points = Vec::with_capacity(self.len() + 1);
        points.extend_from_slice(&self.points[..idx]);
        points.push(theta);
        points.extend_from_slice(&self.points[idx..]);
        Self::new(points)
    }

    /// Returns a grid that also contains every point of `extra`.
    pub fn with_points(&self, extra: &[f64]) -> Result<Self> {
        if let Some(&t) = extra.iter().find(|&&t| !self.contains(t)) {
            return Err(self.out_of_domain(t));
        }
        let mut points: Vec<f64> = self.points.iter().chain(extra).copied().collect();
        points.sort_unstable_by(f64::total_cmp);
        points.dedup();
        Self::new(points)
    }

    /// Index `i` such that `points[i] <= theta <= points[i + 1]`.
    fn bracket(&self, theta: f64) -> Result<usize> {
        if !self.contains(theta) {
            return Err(self.out_of_domain(theta));
        }
        let idx = self.points.partition_point(|&p| p <= theta);
        Ok(idx.saturating_sub(1).min(self.len() - 2))
    }

    fn out_of_domain(&self, theta: f64) -> FusionError {
        FusionError::OutOfDomain {
            theta,
            min: self.min(),
            max: self.max(),
        }
    }

    fn same_as(&self, other: &ParameterGrid) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points == other.points
    }
}

impl fmt::Debug for ParameterGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterGrid")
            .field("min", &self.min())
            .field("max", &self.max())
            .field("len", &self.len())
            .finish()
    }
}

/// Which step of the pipeline produced a field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Loaded or constructed directly; no fusion history.
    Raw,
    /// Pointwise combination of `k` contours by `rule`.
    Fused { rule: String, k: usize },
    /// A fused field passed through the null CDF of `rule` with `k` inputs.
    Validified { rule: String, k: usize },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Raw => write!(f, "raw"),
            Provenance::Fused { rule, k } => write!(f, "fused({rule}, k={k})"),
            Provenance::Validified { rule, k } => write!(f, "validified({rule}, k={k})"),
        }
    }
}

/// Read access shared by score fields and contours.
pub trait GridFunction {
    fn grid(&self) -> &ParameterGrid;
    fn values(&self) -> &[f64];

    /// Piecewise-linear evaluation; grid points return stored values exactly.
    fn evaluate(&self, theta: f64) -> Result<f64> {
        interpolate(self.grid(), self.values(), theta)
    }

    fn max_value(&self) -> f64 {
        self.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid point carrying the largest value (first one on ties).
    fn argmax(&self) -> f64 {
        let values = self.values();
        let mut best = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > values[best] {
                best = i;
            }
        }
        self.grid().points()[best]
    }
}

pub(crate) fn interpolate(grid: &ParameterGrid, values: &[f64], theta: f64) -> Result<f64> {
    let i = grid.bracket(theta)?;
    let pts = grid.points();
    let (x0, x1) = (pts[i], pts[i + 1]);
    if theta == x0 {
        return Ok(values[i]);
    }
    if theta == x1 {
        return Ok(values[i + 1]);
    }
    let t = (theta - x0) / (x1 - x0);
    Ok(values[i] + t * (values[i + 1] - values[i]))
}

/// A grid function with no supremum guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    grid: ParameterGrid,
    values: Vec<f64>,
    provenance: Provenance,
}

impl ScoreField {
    /// Builds a raw field; every value must lie in [0, 1].
    pub fn new(grid: ParameterGrid, values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values, true)?;
        Ok(Self {
            grid,
            values,
            provenance: Provenance::Raw,
        })
    }

    /// Fused statistics of custom rules may leave [0, 1]; only finiteness is
    /// required when `unit_range` is false.
    pub(crate) fn with_provenance(
        grid: ParameterGrid,
        values: Vec<f64>,
        provenance: Provenance,
        unit_range: bool,
    ) -> Result<Self> {
        check_values(&grid, &values, unit_range)?;
        Ok(Self {
            grid,
            values,
            provenance,
        })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl GridFunction for ScoreField {
    fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A possibility contour: values in [0, 1] whose grid maximum is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    grid: ParameterGrid,
    values: Vec<f64>,
}

impl Contour {
    pub fn new(grid: ParameterGrid, values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values, true)?;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if (max - 1.0).abs() > CONSONANCE_TOL {
            return Err(FusionError::NotConsonant { max });
        }
        Ok(Self { grid, values })
    }

    /// Views the contour as a raw score field.
    pub fn to_field(&self) -> ScoreField {
        ScoreField {
            grid: self.grid.clone(),
            values: self.values.clone(),
            provenance: Provenance::Raw,
        }
    }

    /// Linearly resamples the contour onto another grid lying inside its domain.
    pub fn resample(&self, target: &ParameterGrid) -> Result<ScoreField> {
        if self.grid.same_as(target) {
            return Ok(self.to_field());
        }
        let values = target
            .points()
            .iter()
            .map(|&t| self.evaluate(t))
            .collect::<Result<Vec<_>>>()?;
        ScoreField::new(target.clone(), values)
    }

    pub fn shares_grid(&self, other: &ParameterGrid) -> bool {
        self.grid.same_as(other)
    }
}

impl GridFunction for Contour {
    fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_values(grid: &ParameterGrid, values: &[f64], unit_range: bool) -> Result<()> {
    if values.len() != grid.len() {
        return Err(FusionError::InvalidValues(format!(
            "{} values for {} grid points",
            values.len(),
            grid.len()
        )));
    }
    for &v in values {
        if !v.is_finite() {
            return Err(FusionError::InvalidValues(format!("non-finite value {v}")));
        }
        if unit_range && !(0.0..=1.0).contains(&v) {
            return Err(FusionError::InvalidValues(format!(
                "value {v} outside [0, 1]"
            )));
        }
    }
    Ok(())
}

/// Divides a field by its grid maximum, producing a contour.
///
/// The result dominates the input pointwise. Fields whose values are all zero
/// have no normalization and are rejected.
pub fn normalize(field: &ScoreField) -> Result<Contour> {
    if let Some(&neg) = field.values.iter().find(|&&v| v < 0.0) {
        return Err(FusionError::Range(neg));
    }
    let max = field.max_value();
    if max <= 0.0 {
        return Err(FusionError::DegenerateField);
    }
    let values: Vec<f64> = field.values.iter().map(|&v| v / max).collect();
    Contour::new(field.grid.clone(), values)
}

/// True iff the grid maximum is within `tol` of 1.
pub fn check_consonance<F: GridFunction + ?Sized>(field: &F, tol: f64) -> bool {
    (field.max_value() - 1.0).abs() <= tol
}

/// A bounded interval of the parameter line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }
}

/// Maximal intervals of the interpolated contour on which it exceeds `alpha`.
///
/// Interval ends are the interpolated crossing points, or the grid ends when
/// the contour is still above `alpha` there.
pub fn alpha_cut(contour: &Contour, alpha: f64) -> Result<Vec<Interval>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(FusionError::InvalidLevel(alpha));
    }
    let xs = contour.grid.points();
    let vs = &contour.values;
    let crossing = |i: usize| {
        // crossing of level alpha on segment [i - 1, i]
        let (x0, x1, v0, v1) = (xs[i - 1], xs[i], vs[i - 1], vs[i]);
        x0 + (alpha - v0) / (v1 - v0) * (x1 - x0)
    };
    let mut cuts = Vec::new();
    let mut start: Option<f64> = None;
    for (i, &v) in vs.iter().enumerate() {
        let above = v > alpha;
        match (start, above) {
            (None, true) => start = Some(if i == 0 { xs[0] } else { crossing(i) }),
            (Some(lo), false) => {
                cuts.push(Interval { lo, hi: crossing(i) });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(lo) = start {
        cuts.push(Interval {
            lo,
            hi: contour.grid.max(),
        });
    }
    Ok(cuts)
}

/// Total length of the `alpha`-cut.
pub fn cut_width(contour: &Contour, alpha: f64) -> Result<f64> {
    Ok(alpha_cut(contour, alpha)?.iter().map(Interval::width).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Contour {
        let grid = ParameterGrid::new(vec![-1.0, 0.0, 1.0]).unwrap();
        Contour::new(grid, vec![0.0, 1.0, 0.0]).unwrap()
    }

    fn field(values: Vec<f64>) -> ScoreField {
        let grid = ParameterGrid::uniform(0.0, 1.0, values.len()).unwrap();
        ScoreField::new(grid, values).unwrap()
    }

    #[test]
    fn grid_rejects_bad_points() {
        assert!(ParameterGrid::new(vec![0.0]).is_err());
        assert!(ParameterGrid::new(vec![0.0, 0.0]).is_err());
        assert!(ParameterGrid::new(vec![1.0, 0.0]).is_err());
        assert!(ParameterGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(ParameterGrid::uniform(1.0, 1.0, 5).is_err());
    }

    #[test]
    fn uniform_grid_hits_endpoints() {
        let g = ParameterGrid::uniform(-4.0, 4.0, 1001).unwrap();
        assert_eq!(g.min(), -4.0);
        assert_eq!(g.max(), 4.0);
        assert_eq!(g.points()[500], 0.0);
    }

    #[test]
    fn with_point_inserts_once() {
        let g = ParameterGrid::uniform(0.0, 1.0, 3).unwrap();
        let g2 = g.with_point(0.25).unwrap();
        assert_eq!(g2.points(), &[0.0, 0.25, 0.5, 1.0]);
        assert_eq!(g2.with_point(0.25).unwrap().len(), 4);
        assert!(g.with_point(2.0).is_err());
        let g3 = g.with_points(&[0.75, 0.25, 0.5]).unwrap();
        assert_eq!(g3.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(g.with_points(&[0.2, -1.0]).is_err());
    }

    #[test]
    fn evaluate_grid_points_and_midpoints() {
        let c = triangle();
        assert_eq!(c.evaluate(0.0).unwrap(), 1.0);
        assert_eq!(c.evaluate(0.5).unwrap(), 0.5);
        assert_eq!(c.evaluate(-1.0).unwrap(), 0.0);
        assert_eq!(c.evaluate(1.0).unwrap(), 0.0);
        assert!(matches!(
            c.evaluate(2.0),
            Err(FusionError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let c = normalize(&field(vec![0.2, 0.8, 0.4])).unwrap();
        assert_eq!(c.values(), &[0.25, 1.0, 0.5]);

        let already = vec![0.3, 1.0, 0.7];
        assert_eq!(normalize(&field(already.clone())).unwrap().values(), &already[..]);

        assert!(matches!(
            normalize(&field(vec![0.0, 0.0, 0.0])),
            Err(FusionError::DegenerateField)
        ));
    }

    #[test]
    fn consonance_examples() {
        assert!(check_consonance(&field(vec![0.3, 1.0, 0.7]), 1e-9));
        assert!(!check_consonance(&field(vec![0.3, 0.9, 0.7]), 1e-9));
    }

    #[test]
    fn contour_requires_consonance() {
        let g = ParameterGrid::uniform(0.0, 1.0, 3).unwrap();
        assert!(matches!(
            Contour::new(g.clone(), vec![0.1, 0.9, 0.2]),
            Err(FusionError::NotConsonant { .. })
        ));
        assert!(Contour::new(g.clone(), vec![0.1, 1.2, 0.2]).is_err());
        assert!(Contour::new(g, vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn alpha_cut_examples() {
        let c = triangle();
        assert_eq!(
            alpha_cut(&c, 0.5).unwrap(),
            vec![Interval { lo: -0.5, hi: 0.5 }]
        );
        assert_eq!(
            alpha_cut(&c, 0.0).unwrap(),
            vec![Interval { lo: -1.0, hi: 1.0 }]
        );
        assert!(matches!(alpha_cut(&c, 1.0), Err(FusionError::InvalidLevel(_))));
    }

    #[test]
    fn alpha_cut_splits_bimodal_contours() {
        let grid = ParameterGrid::uniform(0.0, 4.0, 5).unwrap();
        let c = Contour::new(grid, vec![1.0, 0.2, 0.1, 0.6, 0.0]).unwrap();
        let cuts = alpha_cut(&c, 0.4).unwrap();
        assert_eq!(cuts.len(), 2);
        assert_eq!(cuts[0].lo, 0.0);
        assert!((cuts[0].hi - 0.75).abs() < 1e-12);
        assert!((cuts[1].lo - 2.6).abs() < 1e-12);
        assert!((cuts[1].hi - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn resample_onto_finer_grid() {
        let c = triangle();
        let target = ParameterGrid::uniform(-1.0, 1.0, 5).unwrap();
        let f = c.resample(&target).unwrap();
        assert_eq!(f.values(), &[0.0, 0.5, 1.0, 0.5, 0.0]);
        let wider = ParameterGrid::uniform(-2.0, 2.0, 5).unwrap();
        assert!(c.resample(&wider).is_err());
    }
}
