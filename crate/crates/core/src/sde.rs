//! Random-effects fractional SDE
//!
//! ```text
//! dX_t^j = (a(X_t^j) + φ_j b(t)) dt + σ(t) dW_t^{H,j},   X_0^j = x_0
//! ```
//!
//! integrated with the left-point Euler scheme on a uniform grid, driven by
//! exact fBm increments.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effects::{sample_effects, EffectDensity};
use crate::error::{Error, Result};
use crate::fbm::{FbmGenerator, FbmMethod};
use crate::hurst::{HurstModel, TimeGrid};
use crate::rng::{substream, tag};

type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Serializable description of a drift, enough to rebuild it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftLabel {
    /// `a(x) = -β x`, `b ≡ 1`, `σ ≡ sigma`.
    Vasicek { beta: f64, sigma: f64 },
    /// Closures supplied in code; not reconstructible from a file.
    Custom { name: String },
}

/// Coefficients `a(x)`, `b(t)`, `σ(t)` of the drift and diffusion.
#[derive(Clone)]
pub struct DriftSpec {
    label: DriftLabel,
    a: StateFn,
    b: StateFn,
    sigma: StateFn,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("DriftSpec").field(&self.label).finish()
    }
}

impl DriftSpec {
    /// Fractional Vasicek: `dX = (-β X + φ) dt + σ dW^H`.
    pub fn vasicek(beta: f64, sigma: f64) -> Self {
        DriftSpec {
            label: DriftLabel::Vasicek { beta, sigma },
            a: Arc::new(move |x| -beta * x),
            b: Arc::new(|_| 1.0),
            sigma: Arc::new(move |_| sigma),
        }
    }

    pub fn custom(
        name: impl Into<String>,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        DriftSpec {
            label: DriftLabel::Custom { name: name.into() },
            a: Arc::new(a),
            b: Arc::new(b),
            sigma: Arc::new(sigma),
        }
    }

    pub fn from_label(label: &DriftLabel) -> Result<Self> {
        match label {
            DriftLabel::Vasicek { beta, sigma } => Ok(DriftSpec::vasicek(*beta, *sigma)),
            DriftLabel::Custom { name } => Err(Error::Config(format!(
                "custom drift {name:?} cannot be rebuilt from its label"
            ))),
        }
    }

    pub fn label(&self) -> &DriftLabel {
        &self.label
    }

    pub fn a(&self, x: f64) -> f64 {
        (self.a)(x)
    }

    pub fn b(&self, t: f64) -> f64 {
        (self.b)(t)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        (self.sigma)(t)
    }

    /// Checks `σ > 0` at every node.
    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        for (k, t) in grid.nodes().into_iter().enumerate() {
            let s = self.sigma(t);
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Domain(format!("sigma({t}) = {s} at node {k}; must be > 0")));
            }
        }
        Ok(())
    }

    /// `min b(t)/σ(t)` over the grid nodes, the constant `C` of the uniform
    /// error bound when positive.
    pub fn min_effect_ratio(&self, grid: &TimeGrid) -> f64 {
        grid.nodes()
            .into_iter()
            .map(|t| self.b(t) / self.sigma(t))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Euler path for effect `phi` driven by the fBm node values `noise`.
pub fn euler_path(drift: &DriftSpec, grid: &TimeGrid, x0: f64, phi: f64, noise: &[f64]) -> Vec<f64> {
    let n = grid.steps();
    debug_assert_eq!(noise.len(), n + 1);
    let dt = grid.dt();
    let mut x = Vec::with_capacity(n + 1);
    x.push(x0);
    for k in 0..n {
        let t = grid.node(k);
        let xk = x[k];
        let dw = noise[k + 1] - noise[k];
        x.push(xk + (drift.a(xk) + phi * drift.b(t)) * dt + drift.sigma(t) * dw);
    }
    x
}

fn first_non_finite(path: &[f64]) -> Option<usize> {
    path.iter().position(|v| !v.is_finite())
}

/// `n` observed trajectories on a shared grid.
#[derive(Clone, Debug)]
pub struct TrajectoryBundle {
    pub model: HurstModel,
    pub grid: TimeGrid,
    pub drift: DriftSpec,
    pub x0: f64,
    pub paths: Vec<Vec<f64>>,
    /// Present when the bundle was simulated.
    pub true_effects: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

impl TrajectoryBundle {
    pub fn n_subjects(&self) -> usize {
        self.paths.len()
    }

    /// Same bundle with subjects reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = self.clone();
        out.paths = order.iter().map(|&j| self.paths[j].clone()).collect();
        out.true_effects = self
            .true_effects
            .as_ref()
            .map(|e| order.iter().map(|&j| e[j]).collect());
        out
    }
}

/// Simulates bundles for one `(H, grid, drift)`, reusing the fBm
/// factorization across calls.
#[derive(Debug)]
pub struct BundleSimulator {
    generator: FbmGenerator,
    drift: DriftSpec,
    x0: f64,
}

/// Subjects per batch when running in parallel.
const CHUNK: usize = 16;

impl BundleSimulator {
    pub fn new(model: &HurstModel, grid: &TimeGrid, drift: DriftSpec, x0: f64, method: FbmMethod) -> Result<Self> {
        drift.validate(grid)?;
        Ok(BundleSimulator {
            generator: FbmGenerator::new(model, grid, method)?,
            drift,
            x0,
        })
    }

    pub fn generator(&self) -> &FbmGenerator {
        &self.generator
    }

    pub fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    /// Noise paths for subjects `0..n` under `seed`, subject `j` drawn from
    /// its own substream.
    pub fn noise(&self, seed: u64, n: usize) -> Vec<Vec<f64>> {
        let chunks: Vec<Vec<Vec<f64>>> = (0..n)
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|js| {
                let mut rngs: Vec<_> = js.iter().map(|&j| substream(seed, &[tag::NOISE, j as u64])).collect();
                self.generator.sample_batch(&mut rngs)
            })
            .collect();
        chunks.into_iter().flatten().collect()
    }

    /// Trajectories for the given effects under the noise of `seed`.
    pub fn simulate_effects(&self, effects: &[f64], seed: u64) -> Result<TrajectoryBundle> {
        let noise = self.noise(seed, effects.len());
        self.simulate_with_noise(effects, &noise, Some(seed))
    }

    /// Trajectories driven by caller-supplied fBm node values.
    pub fn simulate_with_noise(&self, effects: &[f64], noise: &[Vec<f64>], seed: Option<u64>) -> Result<TrajectoryBundle> {
        let grid = self.generator.grid();
        let paths: Vec<Vec<f64>> = effects
            .par_iter()
            .zip(noise.par_iter())
            .map(|(&phi, w)| euler_path(&self.drift, grid, self.x0, phi, w))
            .collect();
        for (j, p) in paths.iter().enumerate() {
            if let Some(k) = first_non_finite(p) {
                return Err(Error::NonFinite { subject: j, node: k });
            }
        }
        Ok(TrajectoryBundle {
            model: *self.generator.model(),
            grid: *grid,
            drift: self.drift.clone(),
            x0: self.x0,
            paths,
            true_effects: Some(effects.to_vec()),
            seed,
        })
    }

    /// Draws `n` effects from `density` and simulates their trajectories.
    pub fn simulate(&self, density: &EffectDensity, n: usize, seed: u64) -> Result<TrajectoryBundle> {
        let effects = sample_effects(density, n, &mut substream(seed, &[tag::EFFECTS]));
        self.simulate_effects(&effects, seed)
    }
}

/// One-shot bundle simulation with `x_0 = 0` and Cholesky fBm.
pub fn simulate_bundle(
    model: &HurstModel,
    grid: &TimeGrid,
    drift: DriftSpec,
    density: &EffectDensity,
    n_subjects: usize,
    master_seed: u64,
) -> Result<TrajectoryBundle> {
    if n_subjects == 0 {
        return Err(Error::Config("n_subjects must be >= 1".into()));
    }
    BundleSimulator::new(model, grid, drift, 0.0, FbmMethod::Cholesky)?.simulate(density, n_subjects, master_seed)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    hurst: f64,
    horizon: f64,
    steps: usize,
    x0: f64,
    drift: DriftLabel,
    seed: Option<u64>,
    true_effects: Option<Vec<f64>>,
}

fn sidecar_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("json")
}

impl TrajectoryBundle {
    /// Long-format CSV (`subject,k,t_k,X`) at `csv`, plus a JSON sidecar with
    /// the model, drift, seed and true effects next to it (`.json`).
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path).map_err(|e| Error::format(csv_path, e))?;
        let fail = |e: csv::Error| Error::format(csv_path, e);
        w.write_record(["subject", "k", "t_k", "X"]).map_err(fail)?;
        for (j, path) in self.paths.iter().enumerate() {
            for (k, x) in path.iter().enumerate() {
                w.serialize((j, k, self.grid.node(k), x)).map_err(fail)?;
            }
        }
        w.flush().map_err(|e| Error::io(csv_path, e))?;
        let side = Sidecar {
            hurst: self.model.hurst(),
            horizon: self.grid.horizon(),
            steps: self.grid.steps(),
            x0: self.x0,
            drift: self.drift.label().clone(),
            seed: self.seed,
            true_effects: self.true_effects.clone(),
        };
        let json_path = sidecar_path(csv_path);
        let text = serde_json::to_string_pretty(&side).map_err(|e| Error::format(&json_path, e))?;
        std::fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))
    }

    /// Reads a bundle written by [`save`](Self::save).
    pub fn load(csv_path: &Path) -> Result<Self> {
        let json_path = sidecar_path(csv_path);
        let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        let side: Sidecar = serde_json::from_str(&text).map_err(|e| Error::format(&json_path, e))?;
        let model = if side.hurst == 0.5 {
            HurstModel::degenerate_brownian()
        } else {
            HurstModel::new(side.hurst)?
        };
        let grid = TimeGrid::new(side.horizon, side.steps)?;
        let drift = DriftSpec::from_label(&side.drift)?;

        let mut r = csv::Reader::from_path(csv_path).map_err(|e| Error::format(csv_path, e))?;
        let mut paths: Vec<Vec<f64>> = Vec::new();
        for (line, rec) in r.deserialize::<(usize, usize, f64, f64)>().enumerate() {
            let (j, k, _, x) = rec.map_err(|e| Error::format(csv_path, e))?;
            if j == paths.len() {
                paths.push(Vec::with_capacity(grid.steps() + 1));
            }
            if j + 1 != paths.len() || k != paths[j].len() {
                return Err(Error::format(
                    csv_path,
                    format!("row {}: expected subject {} node {}", line + 2, paths.len() - 1, paths[j.min(paths.len() - 1)].len()),
                ));
            }
            paths[j].push(x);
        }
        if let Some((j, _)) = paths.iter().enumerate().find(|(_, p)| p.len() != grid.steps() + 1) {
            return Err(Error::format(csv_path, format!("subject {j} has the wrong number of nodes")));
        }
        if let Some(e) = &side.true_effects {
            if e.len() != paths.len() {
                return Err(Error::format(&json_path, "true_effects length does not match the paths"));
            }
        }
        Ok(TrajectoryBundle {
            model,
            grid,
            drift,
            x0: side.x0,
            paths,
            true_effects: side.true_effects,
            seed: side.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> HurstModel {
        HurstModel::new(0.7).unwrap()
    }

    #[test]
    fn no_drift_unit_noise_reproduces_fbm() {
        let grid = TimeGrid::new(5.0, 50).unwrap();
        let drift = DriftSpec::custom("noise only", |_| 0.0, |_| 0.0, |_| 1.0);
        let sim = BundleSimulator::new(&model(), &grid, drift, 0.0, FbmMethod::Cholesky).unwrap();
        let noise = sim.noise(3, 4);
        let b = sim.simulate_with_noise(&[0.2, 0.4, 0.6, 0.8], &noise, None).unwrap();
        for (x, w) in b.paths.iter().zip(&noise) {
            for (a, b) in x.iter().zip(w) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vanishing_noise_gives_linear_drift() {
        let grid = TimeGrid::new(2.0, 40).unwrap();
        let drift = DriftSpec::custom("linear", |_| 0.0, |_| 1.0, |_| 1e-12);
        let sim = BundleSimulator::new(&model(), &grid, drift, 0.0, FbmMethod::Cholesky).unwrap();
        let b = sim.simulate_effects(&[0.37], 1).unwrap();
        for (k, x) in b.paths[0].iter().enumerate() {
            assert!((x - 0.37 * grid.node(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn vasicek_mean_approaches_phi_over_beta() {
        let grid = TimeGrid::new(20.0, 200).unwrap();
        let sim = BundleSimulator::new(&model(), &grid, DriftSpec::vasicek(1.0, 1.0), 0.0, FbmMethod::Cholesky).unwrap();
        let phi = vec![0.6; 2000];
        let b = sim.simulate_effects(&phi, 77).unwrap();
        let end: Vec<f64> = b.paths.iter().map(|p| p[200]).collect();
        let mean = end.iter().sum::<f64>() / end.len() as f64;
        let sd = (end.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 1999.0).sqrt();
        // exact mean of the Euler recursion is phi (1 - (1 - dt)^N) / β
        let expect = 0.6 * (1.0 - 0.9f64.powi(200));
        assert!((mean - expect).abs() < 4.0 * sd / (2000f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn strong_order_under_refinement() {
        // Coupled noise: the coarse path uses every other node of the fine one.
        let m = model();
        let fine = TimeGrid::new(10.0, 2000).unwrap();
        let coarse = TimeGrid::new(10.0, 1000).unwrap();
        let gen = FbmGenerator::new(&m, &fine, FbmMethod::DaviesHarte).unwrap();
        let drift = DriftSpec::vasicek(1.0, 1.0);
        let mut errs = Vec::new();
        for r in 0..20 {
            let w = gen.sample(&mut substream(5, &[r]));
            let wc: Vec<f64> = w.iter().step_by(2).copied().collect();
            let xf = euler_path(&drift, &fine, 0.0, 0.5, &w);
            let xc = euler_path(&drift, &coarse, 0.0, 0.5, &wc);
            errs.push((xf[2000] - xc[1000]).abs());
        }
        let mean_err = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!(mean_err < 0.2 * coarse.dt(), "{mean_err}");
    }

    #[test]
    fn subject_paths_do_not_depend_on_bundle_size() {
        let grid = TimeGrid::new(10.0, 100).unwrap();
        let sim = BundleSimulator::new(&model(), &grid, DriftSpec::vasicek(1.0, 1.0), 0.0, FbmMethod::Cholesky).unwrap();
        let effects: Vec<f64> = (0..40).map(|j| j as f64 / 40.0).collect();
        let big = sim.simulate_effects(&effects, 9).unwrap();
        let small = sim.simulate_effects(&effects[..7], 9).unwrap();
        assert_eq!(&big.paths[..7], &small.paths[..]);
    }

    #[test]
    fn overflow_is_reported_with_subject() {
        let grid = TimeGrid::new(10.0, 100).unwrap();
        let drift = DriftSpec::custom("explosive", |x| 1e300 * x.abs() + 1e300, |_| 1.0, |_| 1.0);
        let sim = BundleSimulator::new(&model(), &grid, drift, 0.0, FbmMethod::Cholesky).unwrap();
        let err = sim.simulate_effects(&[0.1, 0.2], 1).unwrap_err();
        assert!(matches!(err, Error::NonFinite { subject: 0, .. }), "{err}");
    }

    #[test]
    fn sigma_must_be_positive() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let drift = DriftSpec::custom("bad", |_| 0.0, |_| 1.0, |t| 0.5 - t);
        assert!(BundleSimulator::new(&model(), &grid, drift, 0.0, FbmMethod::Cholesky).is_err());
    }

    #[test]
    fn bundle_round_trip_is_bit_exact() {
        let grid = TimeGrid::new(3.0, 30).unwrap();
        let density = EffectDensity::named("beta_3_5").unwrap();
        let b = simulate_bundle(&model(), &grid, DriftSpec::vasicek(0.7, 1.0), &density, 5, 123).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("bundle.csv");
        b.save(&f).unwrap();
        let back = TrajectoryBundle::load(&f).unwrap();
        assert_eq!(back.paths, b.paths);
        assert_eq!(back.true_effects, b.true_effects);
        assert_eq!(back.seed, Some(123));
        assert_eq!(back.model, b.model);
        assert_eq!(back.grid, b.grid);
        assert_eq!(back.drift.label(), b.drift.label());
    }

    #[test]
    fn load_rejects_ragged_csv() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("b.csv");
        std::fs::write(&f, "subject,k,t_k,X\n0,0,0,0\n0,2,0.2,1\n").unwrap();
        let side = r#"{"hurst":0.7,"horizon":1.0,"steps":10,"x0":0.0,"drift":{"kind":"vasicek","beta":1.0,"sigma":1.0},"seed":null,"true_effects":null}"#;
        std::fs::write(dir.path().join("b.json"), side).unwrap();
        assert!(matches!(TrajectoryBundle::load(&f), Err(Error::Format { .. })));
    }
}
