//! Fractional Brownian motion on a uniform grid.
//!
//! Both generators are exact in distribution at the grid nodes:
//!
//! * [`FbmMethod::Cholesky`] factors the covariance of `(W_{t_1}, ..., W_{t_N})`,
//!   `½(t^2H + s^2H - |t-s|^2H)`, and multiplies the factor into a standard
//!   normal vector. `O(N³)` setup, `O(N²)` per path.
//! * [`FbmMethod::DaviesHarte`] embeds the fractional Gaussian noise
//!   covariance in a circulant matrix of size `2N` and synthesizes the
//!   increments with two FFTs. `O(N log N)` per path.
//!
//! `W_{t_0} = 0` exactly in both cases.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hurst::{HurstModel, TimeGrid};
use crate::rng::{stream_tag, substream};
use crate::tri::LowerTriangular;

/// Largest grid the Cholesky generator accepts; the factor alone takes
/// `8 N² / 2` bytes and the setup `N³/3` flops.
pub const CHOLESKY_MAX_STEPS: usize = 4096;

/// Diagonal jitter, relative to the largest variance, applied only after a
/// first factorization failure.
const JITTER: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    #[default]
    Cholesky,
    DaviesHarte,
}

impl std::str::FromStr for FbmMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(FbmMethod::Cholesky),
            "davies_harte" | "davies-harte" => Ok(FbmMethod::DaviesHarte),
            other => Err(Error::Config(format!("unknown fBm method {other:?}"))),
        }
    }
}

/// One simulated path, `values[k] = W^H_{t_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FbmPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub seed_tag: u64,
}

impl FbmPath {
    /// Increments `W_{t_{k+1}} - W_{t_k}`, one per cell.
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// CSV with columns `k,t_k,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "k,t_k,value")?;
            for (k, v) in self.values.iter().enumerate() {
                writeln!(out, "{k},{},{v}", self.grid.node(k))?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

enum Synth {
    Cholesky(LowerTriangular),
    Circulant {
        /// `sqrt(λ_k / 2N)` for the circulant eigenvalues `λ_k`, `k = 0..=N`.
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
}

/// Reusable fBm sampler for one `(H, grid)` pair. The factorization is done
/// once; sampling only reads it, so one generator can serve many threads.
pub struct FbmGenerator {
    model: HurstModel,
    grid: TimeGrid,
    synth: Synth,
}

impl std::fmt::Debug for FbmGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmGenerator")
            .field("hurst", &self.model.hurst())
            .field("grid", &self.grid)
            .field("method", &self.method())
            .finish()
    }
}

fn node_covariance(h: f64, s: f64, t: f64) -> f64 {
    let two_h = 2.0 * h;
    0.5 * (s.powf(two_h) + t.powf(two_h) - (t - s).abs().powf(two_h))
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
fn fgn_autocovariance(h: f64, k: usize) -> f64 {
    let k = k as f64;
    let two_h = 2.0 * h;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

fn cholesky_factor(model: &HurstModel, grid: &TimeGrid) -> Result<LowerTriangular> {
    let n = grid.steps();
    if n > CHOLESKY_MAX_STEPS {
        return Err(Error::Config(format!(
            "Cholesky fBm is limited to N <= {CHOLESKY_MAX_STEPS} steps (got {n}); use davies_harte"
        )));
    }
    let h = model.hurst();
    let cov = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        node_covariance(h, grid.node(i + 1), grid.node(j + 1))
    });
    let chol = match nalgebra::Cholesky::new(cov.clone()) {
        Some(c) => c,
        None => {
            let jitter = JITTER * grid.horizon().powf(2.0 * h);
            let mut cov = cov;
            for i in 0..n {
                cov[(i, i)] += jitter;
            }
            nalgebra::Cholesky::new(cov).ok_or_else(|| Error::Factorization {
                steps: n,
                reason: "covariance not positive definite even with jitter".into(),
            })?
        }
    };
    let l = chol.l();
    Ok(LowerTriangular::from_fn(n, |r, c| l[(r, c)]))
}

fn circulant(model: &HurstModel, grid: &TimeGrid) -> Result<Synth> {
    let n = grid.steps();
    let h = model.hurst();
    let size = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|k| {
            let lag = if k <= n { k } else { size - k };
            Complex::new(fgn_autocovariance(h, lag), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut row);
    let peak = row.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let mut scale = Vec::with_capacity(n + 1);
    for (k, c) in row.iter().take(n + 1).enumerate() {
        if c.re < -1e-10 * peak {
            return Err(Error::Factorization {
                steps: n,
                reason: format!("circulant eigenvalue {k} is negative ({})", c.re),
            });
        }
        scale.push((c.re.max(0.0) / size as f64).sqrt());
    }
    Ok(Synth::Circulant { scale, fft })
}

impl FbmGenerator {
    pub fn new(model: &HurstModel, grid: &TimeGrid, method: FbmMethod) -> Result<Self> {
        let synth = match method {
            FbmMethod::Cholesky => Synth::Cholesky(cholesky_factor(model, grid)?),
            FbmMethod::DaviesHarte => circulant(model, grid)?,
        };
        Ok(FbmGenerator {
            model: *model,
            grid: *grid,
            synth,
        })
    }

    pub fn method(&self) -> FbmMethod {
        match self.synth {
            Synth::Cholesky(_) => FbmMethod::Cholesky,
            Synth::Circulant { .. } => FbmMethod::DaviesHarte,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn model(&self) -> &HurstModel {
        &self.model
    }

    /// Node values `W_{t_0..=t_N}` drawn from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.grid.steps();
        match &self.synth {
            Synth::Cholesky(l) => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let mut out = vec![0.0; n + 1];
                l.apply(&z, &mut out[1..]);
                out
            }
            Synth::Circulant { scale, fft } => self.circulant_path(scale, fft.as_ref(), rng),
        }
    }

    /// One path per rng, bit-identical to calling [`sample`](Self::sample)
    /// on each.
    pub fn sample_batch<R: Rng>(&self, rngs: &mut [R]) -> Vec<Vec<f64>> {
        let n = self.grid.steps();
        match &self.synth {
            Synth::Cholesky(l) => {
                let zs: Vec<Vec<f64>> = rngs
                    .iter_mut()
                    .map(|rng| (0..n).map(|_| rng.sample(StandardNormal)).collect())
                    .collect();
                let mut outs = vec![vec![0.0; n + 1]; rngs.len()];
                let zr: Vec<&[f64]> = zs.iter().map(|z| z.as_slice()).collect();
                let mut views: Vec<&mut [f64]> = outs.iter_mut().map(|o| &mut o[1..]).collect();
                l.apply_batch(&zr, &mut views);
                outs
            }
            Synth::Circulant { .. } => rngs.iter_mut().map(|r| self.sample(r)).collect(),
        }
    }

    fn circulant_path<R: Rng + ?Sized>(&self, scale: &[f64], fft: &dyn Fft<f64>, rng: &mut R) -> Vec<f64> {
        let n = self.grid.steps();
        let size = 2 * n;
        let mut w = vec![Complex::new(0.0, 0.0); size];
        let half = std::f64::consts::FRAC_1_SQRT_2;
        w[0] = Complex::new(scale[0] * rng.sample::<f64, _>(StandardNormal), 0.0);
        for k in 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let v = Complex::new(re, im) * (scale[k] * half);
            w[k] = v;
            w[size - k] = v.conj();
        }
        w[n] = Complex::new(scale[n] * rng.sample::<f64, _>(StandardNormal), 0.0);
        fft.process(&mut w);
        let step_sd = self.grid.dt().powf(self.model.hurst());
        let mut out = Vec::with_capacity(n + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for c in w.iter().take(n) {
            acc += c.re * step_sd;
            out.push(acc);
        }
        out
    }
}

/// One path from the substream `seed`.
pub fn simulate_fbm(model: &HurstModel, grid: &TimeGrid, method: FbmMethod, seed: u64) -> Result<FbmPath> {
    let generator = FbmGenerator::new(model, grid, method)?;
    let mut rng = substream(seed, &[]);
    Ok(FbmPath {
        grid: *grid,
        values: generator.sample(&mut rng),
        seed_tag: stream_tag(seed, &[]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empirical_cov(paths: &[Vec<f64>], i: usize, j: usize) -> (f64, f64) {
        let r = paths.len() as f64;
        let prods: Vec<f64> = paths.iter().map(|p| p[i] * p[j]).collect();
        let mean = prods.iter().sum::<f64>() / r;
        let var = prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
        (mean, (var / r).sqrt())
    }

    fn paths(method: FbmMethod, h: f64, grid: TimeGrid, reps: u64, seed: u64) -> Vec<Vec<f64>> {
        let model = HurstModel::new(h).unwrap();
        let g = FbmGenerator::new(&model, &grid, method).unwrap();
        (0..reps).map(|r| g.sample(&mut substream(seed, &[r]))).collect()
    }

    #[test]
    fn covariance_at_half_and_one() {
        for method in [FbmMethod::Cholesky, FbmMethod::DaviesHarte] {
            let grid = TimeGrid::new(1.0, 4).unwrap();
            let ps = paths(method, 0.7, grid, 20_000, 11);
            let (c, se) = empirical_cov(&ps, 2, 4);
            assert!((c - 0.5).abs() < 3.0 * se, "{method:?}: {c} ± {se}");
            let (v, se) = empirical_cov(&ps, 4, 4);
            assert!((v - 1.0).abs() < 3.0 * se, "{method:?}: Var W_1 = {v} ± {se}");
        }
    }

    #[test]
    fn mean_and_variance_profile() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let h = 0.8;
        for method in [FbmMethod::Cholesky, FbmMethod::DaviesHarte] {
            let reps = 10_000;
            let ps = paths(method, h, grid, reps, 5);
            let bound = 4.0 / (reps as f64).sqrt();
            for k in 0..=16 {
                let mean = ps.iter().map(|p| p[k]).sum::<f64>() / reps as f64;
                assert!(mean.abs() <= bound, "node {k}: {mean}");
            }
            for k in [4, 8, 16] {
                let var = ps.iter().map(|p| p[k] * p[k]).sum::<f64>() / reps as f64;
                let ratio = var / grid.node(k).powf(2.0 * h);
                assert!((ratio - 1.0).abs() < 0.05, "{method:?} node {k}: {ratio}");
            }
            assert!(ps.iter().all(|p| p[0] == 0.0 && p.len() == 17));
        }
    }

    #[test]
    fn brownian_limit_has_min_covariance() {
        let model = HurstModel::degenerate_brownian();
        let grid = TimeGrid::new(2.0, 4).unwrap();
        let g = FbmGenerator::new(&model, &grid, FbmMethod::Cholesky).unwrap();
        let reps = 20_000;
        let ps: Vec<Vec<f64>> = (0..reps).map(|r| g.sample(&mut substream(3, &[r]))).collect();
        let (c, se) = empirical_cov(&ps, 1, 3);
        assert!((c - 0.5).abs() < 3.0 * se);
        let (c, se) = empirical_cov(&ps, 2, 4);
        assert!((c - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn self_similarity_of_node_variances() {
        // Same normals on a grid stretched by c: Cholesky factor scales by c^H.
        let model = HurstModel::new(0.65).unwrap();
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let c = 3.0;
        let a = FbmGenerator::new(&model, &grid, FbmMethod::Cholesky).unwrap();
        let b = FbmGenerator::new(&model, &grid.rescaled(c).unwrap(), FbmMethod::Cholesky).unwrap();
        let pa = a.sample(&mut substream(9, &[]));
        let pb = b.sample(&mut substream(9, &[]));
        let s = c.powf(0.65);
        for (x, y) in pa.iter().zip(&pb) {
            assert!((y - s * x).abs() < 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let model = HurstModel::new(0.7).unwrap();
        let grid = TimeGrid::new(10.0, 64).unwrap();
        for method in [FbmMethod::Cholesky, FbmMethod::DaviesHarte] {
            let a = simulate_fbm(&model, &grid, method, 42).unwrap();
            let b = simulate_fbm(&model, &grid, method, 42).unwrap();
            assert_eq!(a, b);
            let c = simulate_fbm(&model, &grid, method, 43).unwrap();
            assert_ne!(a.values, c.values);
        }
    }

    #[test]
    fn batch_matches_single() {
        let model = HurstModel::new(0.7).unwrap();
        let grid = TimeGrid::new(10.0, 40).unwrap();
        for method in [FbmMethod::Cholesky, FbmMethod::DaviesHarte] {
            let g = FbmGenerator::new(&model, &grid, method).unwrap();
            let mut rngs: Vec<_> = (0..20).map(|j| substream(1, &[j])).collect();
            let batch = g.sample_batch(&mut rngs);
            for (j, p) in batch.iter().enumerate() {
                assert_eq!(p, &g.sample(&mut substream(1, &[j as u64])));
            }
        }
    }

    #[test]
    fn oversized_cholesky_is_a_config_error() {
        let model = HurstModel::new(0.7).unwrap();
        let grid = TimeGrid::new(1.0, CHOLESKY_MAX_STEPS + 1).unwrap();
        assert!(matches!(
            FbmGenerator::new(&model, &grid, FbmMethod::Cholesky),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn csv_dump() {
        let model = HurstModel::new(0.7).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let p = simulate_fbm(&model, &grid, FbmMethod::Cholesky, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("w.csv");
        p.write_csv(&f).unwrap();
        let text = std::fs::read_to_string(&f).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,t_k,value");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[1], "0,0,0");
        let last: Vec<&str> = lines[5].split(',').collect();
        assert_eq!(last[1].parse::<f64>().unwrap(), 1.0);
        assert_eq!(last[2].parse::<f64>().unwrap(), p.values[4]);
    }
}
