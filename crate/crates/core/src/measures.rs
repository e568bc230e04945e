//! Possibility and necessity of interval claims about the parameter.
//!
//! Possibility of a claim is the supremum of the interpolated contour over
//! it; necessity is one minus the possibility of the (closed) complement.
//! Because the contour is piecewise linear, the supremum over an interval is
//! attained at its endpoints or at an interior grid point, so both measures
//! are computed exactly.

use std::fmt;
use std::str::FromStr;

use crate::contour::{interpolate, Contour, GridFunction, Interval};
use crate::error::{FusionError, Result};

/// A finite union of closed intervals of the parameter line.
///
/// Intervals are kept sorted; overlapping or touching intervals are merged on
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    intervals: Vec<Interval>,
}

impl Claim {
    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        for iv in &intervals {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.lo > iv.hi {
                return Err(FusionError::InvalidClaim(format!(
                    "[{}, {}] is not a closed interval",
                    iv.lo, iv.hi
                )));
            }
        }
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![Interval { lo, hi }])
    }

    pub fn point(theta: f64) -> Result<Self> {
        Self::interval(theta, theta)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(theta))
    }

    /// Closure of the complement within `[lo, hi]`.
    pub fn complement(&self, lo: f64, hi: f64) -> Claim {
        let mut out = Vec::new();
        let mut cursor = lo;
        let mut open = true;
        for iv in &self.intervals {
            if iv.lo > cursor {
                out.push(Interval {
                    lo: cursor,
                    hi: iv.lo.min(hi),
                });
            }
            cursor = cursor.max(iv.hi);
            if cursor >= hi {
                open = false;
                break;
            }
        }
        if open && cursor < hi {
            out.push(Interval { lo: cursor, hi });
        }
        Claim { intervals: out }
    }

    fn check_domain(&self, contour: &Contour) -> Result<()> {
        let (lo, hi) = (contour.grid().min(), contour.grid().max());
        match self.intervals.iter().find(|iv| iv.lo < lo || iv.hi > hi) {
            Some(iv) => Err(FusionError::InvalidClaim(format!(
                "[{}, {}] leaves the contour domain [{lo}, {hi}]",
                iv.lo, iv.hi
            ))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "[{},{}]", iv.lo, iv.hi)?;
        }
        Ok(())
    }
}

/// Parses `"[a,b]"` or `"[a,b],[c,d],..."`; whitespace is ignored.
impl FromStr for Claim {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(FusionError::EmptyClaim);
        }
        let bad = || FusionError::InvalidClaim(format!("cannot parse `{s}`"));
        let mut intervals = Vec::new();
        let mut rest = compact.as_str();
        loop {
            let body = rest.strip_prefix('[').ok_or_else(bad)?;
            let end = body.find(']').ok_or_else(bad)?;
            let (lo, hi) = body[..end].split_once(',').ok_or_else(bad)?;
            let lo: f64 = lo.parse().map_err(|_| bad())?;
            let hi: f64 = hi.parse().map_err(|_| bad())?;
            intervals.push(Interval { lo, hi });
            rest = &body[end + 1..];
            if rest.is_empty() {
                break;
            }
            rest = rest.strip_prefix(',').ok_or_else(bad)?;
        }
        Claim::new(intervals)
    }
}

fn sup_over(contour: &Contour, iv: &Interval) -> f64 {
    let grid = contour.grid();
    let values = contour.values();
    let pts = grid.points();
    // endpoints lie inside the domain (checked by callers)
    let mut best = interpolate(grid, values, iv.lo)
        .unwrap_or(0.0)
        .max(interpolate(grid, values, iv.hi).unwrap_or(0.0));
    let start = pts.partition_point(|&p| p <= iv.lo);
    let end = pts.partition_point(|&p| p < iv.hi);
    for &v in &values[start..end.max(start)] {
        best = best.max(v);
    }
    best
}

/// Supremum of the interpolated contour over the claim.
pub fn possibility(contour: &Contour, claim: &Claim) -> Result<f64> {
    if claim.is_empty() {
        return Err(FusionError::EmptyClaim);
    }
    claim.check_domain(contour)?;
    Ok(claim
        .intervals
        .iter()
        .map(|iv| sup_over(contour, iv))
        .fold(0.0, f64::max))
}

/// `1 - possibility(complement)`; the full domain has necessity 1.
pub fn necessity(contour: &Contour, claim: &Claim) -> Result<f64> {
    claim.check_domain(contour)?;
    let complement = claim.complement(contour.grid().min(), contour.grid().max());
    if complement.is_empty() {
        return Ok(1.0);
    }
    Ok(1.0 - possibility(contour, &complement)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::ParameterGrid;
    use proptest::prelude::*;

    fn triangle() -> Contour {
        let grid = ParameterGrid::new(vec![-1.0, 0.0, 1.0]).unwrap();
        Contour::new(grid, vec![0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn possibility_examples() {
        let c = triangle();
        assert_eq!(possibility(&c, &Claim::interval(-1.0, 1.0).unwrap()).unwrap(), 1.0);
        assert_eq!(possibility(&c, &Claim::interval(0.5, 1.0).unwrap()).unwrap(), 0.5);
        assert_eq!(possibility(&c, &Claim::point(0.0).unwrap()).unwrap(), 1.0);
        let empty = Claim::new(vec![]).unwrap();
        assert!(matches!(possibility(&c, &empty), Err(FusionError::EmptyClaim)));
    }

    #[test]
    fn necessity_examples() {
        let c = triangle();
        assert_eq!(necessity(&c, &Claim::interval(-1.0, 1.0).unwrap()).unwrap(), 1.0);
        assert_eq!(necessity(&c, &Claim::interval(0.2, 1.0).unwrap()).unwrap(), 0.0);
        let n = necessity(&c, &Claim::interval(-0.6, 0.6).unwrap()).unwrap();
        assert!((n - 0.6).abs() < 1e-15);
    }

    #[test]
    fn claims_outside_domain_are_rejected() {
        let c = triangle();
        let claim = Claim::interval(0.0, 2.0).unwrap();
        assert!(matches!(possibility(&c, &claim), Err(FusionError::InvalidClaim(_))));
        assert!(necessity(&c, &claim).is_err());
    }

    #[test]
    fn claim_parsing() {
        let c: Claim = "[-0.6,0.6]".parse().unwrap();
        assert_eq!(c.intervals(), &[Interval { lo: -0.6, hi: 0.6 }]);
        let c: Claim = " [0.5, 1] , [-1,-0.5]".parse().unwrap();
        assert_eq!(c.intervals().len(), 2);
        assert_eq!(c.intervals()[0].lo, -1.0);
        let merged: Claim = "[0,1],[0.5,2]".parse().unwrap();
        assert_eq!(merged.intervals(), &[Interval { lo: 0.0, hi: 2.0 }]);
        assert!(matches!("".parse::<Claim>(), Err(FusionError::EmptyClaim)));
        for bad in ["[1,0]", "0,1", "[0,1", "[0;1]", "[0,1]x", "[a,1]"] {
            assert!(bad.parse::<Claim>().is_err(), "{bad}");
        }
    }

    #[test]
    fn complement_pieces() {
        let c = Claim::new(vec![
            Interval { lo: -1.0, hi: -0.5 },
            Interval { lo: 0.0, hi: 0.5 },
        ])
        .unwrap();
        let comp = c.complement(-1.0, 1.0);
        assert_eq!(
            comp.intervals(),
            &[Interval { lo: -0.5, hi: 0.0 }, Interval { lo: 0.5, hi: 1.0 }]
        );
        assert!(Claim::interval(-1.0, 1.0).unwrap().complement(-1.0, 1.0).is_empty());
        let point = Claim::point(0.0).unwrap().complement(-1.0, 1.0);
        assert_eq!(point.intervals().len(), 2);
    }

    fn arb_contour() -> impl Strategy<Value = Contour> {
        (prop::collection::vec(0.0..=1.0f64, 2..30), any::<prop::sample::Index>()).prop_map(|(mut v, peak)| {
            let i = peak.index(v.len());
            v[i] = 1.0;
            let grid = ParameterGrid::uniform(-1.0, 1.0, v.len()).unwrap();
            Contour::new(grid, v).unwrap()
        })
    }

    fn arb_claim() -> impl Strategy<Value = Claim> {
        prop::collection::vec((-1.0..=1.0f64, -1.0..=1.0f64), 1..4).prop_map(|pairs| {
            Claim::new(
                pairs
                    .into_iter()
                    .map(|(a, b)| Interval { lo: a.min(b), hi: a.max(b) })
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn duality_and_consonance(c in arb_contour(), a in arb_claim()) {
            let comp = a.complement(-1.0, 1.0);
            let nec = necessity(&c, &a).unwrap();
            let pos = possibility(&c, &a).unwrap();
            let pos_comp = if comp.is_empty() { 0.0 } else { possibility(&c, &comp).unwrap() };
            prop_assert_eq!(nec, 1.0 - pos_comp);
            prop_assert!((pos.max(pos_comp) - 1.0).abs() <= 1e-9);
            prop_assert!(nec <= pos);
        }

        #[test]
        fn measures_are_monotone(c in arb_contour(), a in arb_claim(), b in arb_claim()) {
            let mut both = a.intervals().to_vec();
            both.extend_from_slice(b.intervals());
            let union = Claim::new(both).unwrap();
            prop_assert!(possibility(&c, &a).unwrap() <= possibility(&c, &union).unwrap());
            prop_assert!(necessity(&c, &a).unwrap() <= necessity(&c, &union).unwrap());
        }
    }
}
