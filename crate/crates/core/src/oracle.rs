//! Brute-force reference implementations, kept deliberately literal so the
//! optimized code paths can be checked against them.

/// `C(n, k)` by the multiplicative formula.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `m Σ_k [F̂((k+1)/m) − F̂(k/m)] p_k(m−1, x)`, with `F̂` recounted from
/// the raw samples for every term.
pub fn bernstein_naive(samples: &[f64], m: usize, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let n = samples.len() as f64;
    let cdf = |y: f64| samples.iter().filter(|&&s| s <= y).count() as f64 / n;
    let mut total = 0.0;
    for k in 0..m {
        let jump = cdf((k + 1) as f64 / m as f64) - cdf(k as f64 / m as f64);
        let p = binomial(m - 1, k) * x.powi(k as i32) * (1.0 - x).powi((m - 1 - k) as i32);
        total += m as f64 * jump * p;
    }
    total
}
