//! Small statistical helpers shared by calibration and the validity harness.

use statrs::function::erf::erfc;

/// Upper-tail two-sided normal probability `2 (1 - Phi(|z|))`.
pub fn two_sided_normal_tail(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov-Smirnov distance between the empirical CDF of an ascending
/// `sorted` sample and a continuous `cdf`. Ties are handled by evaluating the
/// empirical CDF on both sides of each distinct value.
pub fn ks_statistic_sorted<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max(j as f64 / n - f).max(f - i as f64 / n);
        i = j;
    }
    d
}

/// KS distance of an unsorted sample from `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    ks_statistic_sorted(&sorted, cdf)
}

/// KS distance of a sample from Unif(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    ks_statistic(sample, |x| x.clamp(0.0, 1.0))
}

/// Three-sigma binomial slack for an exceedance estimate at level `alpha`
/// from `m` replications.
pub fn three_sigma_tolerance(alpha: f64, m: usize) -> f64 {
    3.0 * (alpha * (1.0 - alpha) / m as f64).sqrt()
}
