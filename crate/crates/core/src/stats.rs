//! Small statistical helpers for summarising replica batches.

use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion `count / m`.
pub fn wilson_interval(count: u64, m: u64, z: f64) -> (f64, f64) {
    if m == 0 {
        return (0.0, 1.0);
    }
    let m_f = m as f64;
    let p = count as f64 / m_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / m_f;
    let centre = (p + z2 / (2.0 * m_f)) / denom;
    let half = z * (p * (1.0 - p) / m_f + z2 / (4.0 * m_f * m_f)).sqrt() / denom;
    let lo = if count == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if count == m { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Dvoretzky–Kiefer–Wolfowitz half-width: `sup |F_m - F| ≤ ε` with
/// probability at least `1 - alpha`.
pub fn dkw_epsilon(m: u64, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * m as f64)).sqrt()
}

/// Sample mean and unbiased sample variance (`NaN` variance for one point).
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Anderson–Darling `A²` for normality with mean and variance estimated
/// from the sample.
pub fn anderson_darling_normal(xs: &[f64]) -> f64 {
    if xs.len() < 3 {
        return f64::NAN;
    }
    let (mean, var) = mean_variance(xs);
    if !(var > 0.0) {
        return f64::NAN;
    }
    let sd = var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("valid parameters");
    let mut z: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(|a, b| a.total_cmp(b));
    let n = z.len();
    let tiny = f64::MIN_POSITIVE;
    let s: f64 = (0..n)
        .map(|i| {
            let lo = std_normal.cdf(z[i]).max(tiny).ln();
            let hi = (1.0 - std_normal.cdf(z[n - 1 - i])).max(tiny).ln();
            (2 * i + 1) as f64 * (lo + hi)
        })
        .sum();
    -(n as f64) - s / n as f64
}
