//! Density estimation from (estimated) random effects: the Bernstein
//! polynomial estimator with least-squares cross-validated order, and the
//! Gaussian-kernel baseline.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::simpson_weights;
use crate::stats;

/// Nodes of the Simpson rule for `∫ f̂²` in the cross-validation criterion.
pub const LSCV_NODES: usize = 513;

/// Right-continuous empirical distribution function of arbitrary reals.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Self {
        EmpiricalCdf {
            sorted: stats::sorted(samples),
        }
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of samples `<= y`.
    pub fn count_le(&self, y: f64) -> usize {
        self.sorted.partition_point(|&s| s <= y)
    }

    /// `F̂(y) = #{samples <= y} / n`.
    pub fn eval(&self, y: f64) -> f64 {
        self.count_le(y) as f64 / self.n() as f64
    }
}

fn ln_binomials(n: usize) -> Vec<f64> {
    let ln_n = ln_gamma(n as f64 + 1.0);
    (0..=n)
        .map(|k| ln_n - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0))
        .collect()
}

/// `p_k(m, x) = C(m, k) x^k (1 - x)^{m-k}`, evaluated in log space.
pub fn bernstein_basis(m: usize, k: usize, x: f64) -> Result<f64> {
    if k > m {
        return Err(Error::Domain(format!("basis index {k} exceeds order {m}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("basis evaluated at {x} outside [0, 1]")));
    }
    let lc = ln_binomials(m)[k];
    Ok(basis_from_ln(lc, m, k, x))
}

fn basis_from_ln(ln_binom: f64, m: usize, k: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if x == 1.0 {
        return if k == m { 1.0 } else { 0.0 };
    }
    (ln_binom + k as f64 * x.ln() + (m - k) as f64 * (-x).ln_1p()).exp()
}

/// Fitted Bernstein density estimator of order `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinDensity {
    m: usize,
    coeffs: Vec<f64>,
    #[serde(skip)]
    ln_binom: Vec<f64>,
}

impl BernsteinDensity {
    /// Builds the estimator from given coefficients `c_0 … c_{m-1}`.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("Bernstein order must be >= 1".into()));
        }
        Ok(BernsteinDensity {
            m: coeffs.len(),
            ln_binom: ln_binomials(coeffs.len() - 1),
            coeffs,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `p_k(m - 1, x)` for every `k`.
    fn basis_into(&self, x: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = basis_from_ln(self.ln_binom[k], self.m - 1, k, x);
        }
    }

    /// `f̂(x) = Σ c_k p_k(m - 1, x)`; 0 outside `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        if x == 0.0 {
            return self.coeffs[0];
        }
        if x == 1.0 {
            return self.coeffs[self.m - 1];
        }
        let (lx, l1x) = (x.ln(), (-x).ln_1p());
        let top = (self.m - 1) as f64;
        self.coeffs
            .iter()
            .zip(&self.ln_binom)
            .enumerate()
            .filter(|(_, (c, _))| **c != 0.0)
            .map(|(k, (c, lb))| c * (lb + k as f64 * lx + (top - k as f64) * l1x).exp())
            .sum()
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Bin index `k` with `y ∈ (k/m, (k+1)/m]`, if any.
fn bin_of(y: f64, m: usize) -> Option<usize> {
    if !(y > 0.0 && y <= 1.0) {
        return None;
    }
    // guard against rounding in y·m at bin edges
    let mut k = ((y * m as f64).ceil() as usize).clamp(1, m) - 1;
    while k > 0 && y <= k as f64 / m as f64 {
        k -= 1;
    }
    while k + 1 < m && y > (k + 1) as f64 / m as f64 {
        k += 1;
    }
    Some(k)
}

/// Counts per bin `(k/m, (k+1)/m]`, so `c_k = m · count_k / n`.
fn bin_counts(cdf: &EmpiricalCdf, m: usize) -> Vec<usize> {
    let edges: Vec<usize> = (0..=m).map(|k| cdf.count_le(k as f64 / m as f64)).collect();
    edges.windows(2).map(|e| e[1] - e[0]).collect()
}

/// `c_k = m (F̂((k+1)/m) - F̂(k/m))`.
pub fn fit_bernstein_cdf(cdf: &EmpiricalCdf, m: usize) -> Result<BernsteinDensity> {
    if m == 0 {
        return Err(Error::Domain("Bernstein order must be >= 1".into()));
    }
    if cdf.n() == 0 {
        return Err(Error::Domain("no samples".into()));
    }
    let scale = m as f64 / cdf.n() as f64;
    BernsteinDensity::from_coeffs(bin_counts(cdf, m).into_iter().map(|c| c as f64 * scale).collect())
}

pub fn fit_bernstein(samples: &[f64], m: usize) -> Result<BernsteinDensity> {
    fit_bernstein_cdf(&EmpiricalCdf::new(samples), m)
}

/// Default order grid `{2, …, ⌈4 n^{2/5}⌉}`.
pub fn default_m_grid(n: usize) -> Vec<usize> {
    let top = (4.0 * (n as f64).powf(0.4)).ceil() as usize;
    (2..=top.max(2)).collect()
}

/// `LSCV(m) = ∫_0^1 f̂² − (2/n) Σ_j f̂^{(−j)}(y_j)`.
///
/// Removing `y_j` from bin `k` changes only `c_k`, so
/// `f̂^{(−j)}(y_j) = (n f̂(y_j) − m p_k(m−1, y_j)) / (n − 1)`.
pub fn lscv_score(cdf: &EmpiricalCdf, m: usize) -> Result<f64> {
    let n = cdf.n();
    if n < 3 {
        return Err(Error::Domain(format!("cross-validation needs n >= 3, got {n}")));
    }
    let fit = fit_bernstein_cdf(cdf, m)?;
    let weights = simpson_weights(0.0, 1.0, LSCV_NODES);
    let h = 1.0 / (LSCV_NODES - 1) as f64;
    let l2: f64 = weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * fit.eval(i as f64 * h).powi(2))
        .sum();
    let nf = n as f64;
    let mut basis = vec![0.0; m];
    let mut loo = 0.0;
    for &y in cdf.samples() {
        let Some(k) = bin_of(y, m) else { continue };
        fit.basis_into(y, &mut basis);
        let full: f64 = fit.coeffs.iter().zip(&basis).map(|(c, p)| c * p).sum();
        loo += (nf * full - m as f64 * basis[k]) / (nf - 1.0);
    }
    Ok(l2 - 2.0 * loo / nf)
}

/// Order minimizing [`lscv_score`] over `m_grid`; ties go to the smaller `m`.
pub fn lscv_select_m(samples: &[f64], m_grid: &[usize]) -> Result<usize> {
    if m_grid.is_empty() {
        return Err(Error::Config("empty order grid".into()));
    }
    let cdf = EmpiricalCdf::new(samples);
    let mut grid = m_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut best = (grid[0], f64::INFINITY);
    for m in grid {
        let s = lscv_score(&cdf, m)?;
        if s < best.1 {
            best = (m, s);
        }
    }
    Ok(best.0)
}

/// Bandwidth rule for the Gaussian kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SilvermanRule {
    /// `1.06 min(sd, 1.34 IQR) n^{-1/5}`.
    #[default]
    Scaled,
    /// `1.06 min(sd, IQR / 1.34) n^{-1/5}`.
    Classical,
}

pub fn silverman_bandwidth(samples: &[f64], rule: SilvermanRule) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Domain(format!("bandwidth rule needs n >= 2, got {n}")));
    }
    if samples.iter().all(|&x| x == samples[0]) {
        return Err(Error::Domain("all samples identical; give an explicit bandwidth".into()));
    }
    let sd = stats::std_dev(samples);
    let iqr = match rule {
        SilvermanRule::Scaled => 1.34 * stats::iqr(samples),
        SilvermanRule::Classical => stats::iqr(samples) / 1.34,
    };
    // a zero IQR with positive spread falls back to the other scale
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => return Err(Error::Domain("sample spread is zero; give an explicit bandwidth".into())),
    };
    Ok(1.06 * spread * (n as f64).powf(-0.2))
}

/// Gaussian-kernel density estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelDensity {
    samples: Vec<f64>,
    h: f64,
}

impl KernelDensity {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn eval(&self, x: f64) -> f64 {
        let c = 1.0 / (self.samples.len() as f64 * self.h * (2.0 * std::f64::consts::PI).sqrt());
        c * self
            .samples
            .iter()
            .map(|s| {
                let z = (x - s) / self.h;
                (-0.5 * z * z).exp()
            })
            .sum::<f64>()
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

pub fn fit_kde(samples: &[f64], h: f64) -> Result<KernelDensity> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("bandwidth must be positive, got {h}")));
    }
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    Ok(KernelDensity {
        samples: samples.to_vec(),
        h,
    })
}

/// Maps a support onto `[0, 1]` so the Bernstein estimator applies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportTransform {
    /// `(y − a) / (b − a)`.
    Affine { a: f64, b: f64 },
    /// `y / (1 + y)` for `y >= 0`.
    Positive,
    /// `1/2 + arctan(y) / π`.
    RealLine,
}

impl SupportTransform {
    pub fn forward(&self, y: f64) -> Result<f64> {
        match *self {
            SupportTransform::Affine { a, b } => {
                if !(a < b) {
                    return Err(Error::Domain(format!("affine transform needs a < b, got [{a}, {b}]")));
                }
                if !(a..=b).contains(&y) {
                    return Err(Error::Domain(format!("{y} outside [{a}, {b}]")));
                }
                Ok((y - a) / (b - a))
            }
            SupportTransform::Positive => {
                if !(y >= 0.0) {
                    return Err(Error::Domain(format!("positive transform needs y >= 0, got {y}")));
                }
                Ok(if y.is_infinite() { 1.0 } else { y / (1.0 + y) })
            }
            SupportTransform::RealLine => {
                if y.is_nan() {
                    return Err(Error::Domain("NaN".into()));
                }
                Ok(0.5 + y.atan() / std::f64::consts::PI)
            }
        }
    }

    pub fn inverse(&self, z: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain(format!("{z} outside [0, 1]")));
        }
        match *self {
            SupportTransform::Affine { a, b } => {
                if !(a < b) {
                    return Err(Error::Domain(format!("affine transform needs a < b, got [{a}, {b}]")));
                }
                Ok(a + z * (b - a))
            }
            SupportTransform::Positive => Ok(z / (1.0 - z)),
            SupportTransform::RealLine => Ok((std::f64::consts::PI * (z - 0.5)).tan()),
        }
    }
}

/// Equispaced grid on `[0, 1]` with `points` nodes.
pub fn unit_grid(points: usize) -> Vec<f64> {
    let last = (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|i| i as f64 / last).collect()
}

/// Writes `x,f_true,f_bernstein,f_kde`; `f_true` is empty when unknown.
pub fn write_density_csv(
    path: &Path,
    xs: &[f64],
    truth: Option<&dyn Fn(f64) -> f64>,
    bernstein: &BernsteinDensity,
    kde: &KernelDensity,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    let fail = |e: csv::Error| Error::format(path, e);
    w.write_record(["x", "f_true", "f_bernstein", "f_kde"]).map_err(fail)?;
    for &x in xs {
        let t = truth.map(|f| f(x).to_string()).unwrap_or_default();
        w.write_record([x.to_string(), t, bernstein.eval(x).to_string(), kde.eval(x).to_string()])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
