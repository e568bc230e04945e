//! Fixtures shared by the benchmarks in `benches/`.

use imfuse_core::{Contour, ParameterGrid};

/// `k` triangular contours of half-width 2 on a common uniform grid over
/// [-5, 5], with peaks spread evenly across [-1, 1].
pub fn triangles(k: usize, points: usize) -> (ParameterGrid, Vec<Contour>) {
    let grid = ParameterGrid::uniform(-5.0, 5.0, points).expect("valid grid");
    let contours = (0..k)
        .map(|i| {
            let peak = if k == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (k - 1) as f64 };
            let values = grid
                .points()
                .iter()
                .map(|t| (1.0 - (t - peak).abs() / 2.0).max(0.0))
                .collect();
            Contour::new(grid.clone(), values).expect("consonant triangle")
        })
        .collect();
    (grid, contours)
}

#[cfg(test)]
mod tests {
    use super::*;
    use imfuse_core::GridFunction;

    #[test]
    fn fixtures_are_contours() {
        for k in [1, 2, 5] {
            let (grid, cs) = triangles(k, 1001);
            assert_eq!(cs.len(), k);
            assert!(cs.iter().all(|c| c.shares_grid(&grid) && c.max_value() == 1.0));
        }
    }
}
