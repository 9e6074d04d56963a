//! Maximum-likelihood estimation of each subject's random effect through the
//! Molchan fundamental martingale.
//!
//! With `Z_t = ∫_0^t k_H(t,s)/σ(s) dX_s`, `J_1 = d/dw ∫_0^t k_H(t,s) a(X_s)/σ(s) ds`
//! and `J_2 = d/dw ∫_0^t k_H(t,s) b(s)/σ(s) ds`, the estimate is
//!
//! ```text
//! φ̂ = (∫ J_2 dZ − ∫ J_1 J_2 dw) / ∫ J_2² dw
//! ```
//!
//! Every integral against `s` uses the exact kernel mass of each grid cell
//! (the kernel is singular at `s = 0`), with the integrand frozen at the
//! left end of the cell.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hurst::{d_dw, weights_on, HurstModel, KernelTable, TimeGrid};
use crate::sde::{DriftSpec, TrajectoryBundle};
use crate::tri::dot;

/// Minimum number of grid cells accepted by the transform.
pub const MIN_CELLS: usize = 8;

/// The transformed observation of one trajectory.
#[derive(Clone, Debug)]
pub struct MolchanView {
    pub grid: TimeGrid,
    /// `Z` at every node, `Z[0] = 0`.
    pub z: Vec<f64>,
    /// `J_1` per cell.
    pub j1: Vec<f64>,
    /// `J_2` per cell.
    pub j2: Vec<f64>,
    /// `w^H` at every node.
    pub w: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub subject: usize,
    pub phi_hat: f64,
    /// Observed information `∫ J_2² dw`.
    pub info: f64,
}

/// Everything that depends on `(H, grid, drift)` but not on the path:
/// kernel masses, `w`, `σ` at the nodes and `J_2`.
#[derive(Clone, Debug)]
pub struct MolchanContext {
    model: HurstModel,
    table: KernelTable,
    drift: DriftSpec,
    w: Vec<f64>,
    sigma: Vec<f64>,
    j2: Vec<f64>,
    info: f64,
}

fn check_finite(values: &[f64], subject: usize) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::NonFinite { subject, node }),
        None => Ok(()),
    }
}

impl MolchanContext {
    pub fn new(model: &HurstModel, grid: &TimeGrid, drift: &DriftSpec) -> Result<Self> {
        let n = grid.steps();
        if n < MIN_CELLS {
            return Err(Error::DegenerateGrid(format!(
                "{n} cells; the transform needs at least {MIN_CELLS}"
            )));
        }
        drift.validate(grid)?;
        let table = KernelTable::new(model, grid);
        let w = weights_on(model, grid);
        let dw: Vec<f64> = w.windows(2).map(|p| p[1] - p[0]).collect();
        let sigma: Vec<f64> = grid.nodes().into_iter().map(|t| drift.sigma(t)).collect();
        let b_cells: Vec<f64> = (0..n).map(|i| drift.b(grid.node(i)) / sigma[i]).collect();
        let j2 = d_dw(model, grid, &table.cumulative(&b_cells))?;
        check_finite(&j2, 0)?;
        let info = j2.iter().zip(&dw).map(|(j, d)| j * j * d).sum();
        Ok(MolchanContext {
            model: *model,
            table,
            drift: drift.clone(),
            w,
            sigma,
            j2,
            info,
        })
    }

    pub fn for_bundle(bundle: &TrajectoryBundle) -> Result<Self> {
        Self::new(&bundle.model, &bundle.grid, &bundle.drift)
    }

    pub fn grid(&self) -> &TimeGrid {
        self.table.grid()
    }

    pub fn j2(&self) -> &[f64] {
        &self.j2
    }

    /// `∫ J_2² dw`, the same for every subject.
    pub fn info(&self) -> f64 {
        self.info
    }

    fn check_path(&self, subject: usize, path: &[f64]) -> Result<()> {
        let n = self.grid().steps();
        if path.len() != n + 1 {
            return Err(Error::Domain(format!(
                "trajectory {subject} has {} nodes, grid has {}",
                path.len(),
                n + 1
            )));
        }
        check_finite(path, subject)
    }

    /// Per-cell `ΔX_i / (σ_i Δ)`, the integrand of `Z` against the kernel mass.
    fn dx_cells(&self, path: &[f64]) -> Vec<f64> {
        let dt = self.grid().dt();
        path.windows(2)
            .zip(&self.sigma)
            .map(|(p, s)| (p[1] - p[0]) / (s * dt))
            .collect()
    }

    fn a_cells(&self, path: &[f64]) -> Vec<f64> {
        path.iter()
            .zip(&self.sigma)
            .map(|(&x, s)| self.drift.a(x) / s)
            .take(self.grid().steps())
            .collect()
    }

    /// Full transform of one trajectory.
    pub fn view(&self, subject: usize, path: &[f64]) -> Result<MolchanView> {
        self.check_path(subject, path)?;
        let z = self.table.cumulative(&self.dx_cells(path));
        let j1 = d_dw(&self.model, self.grid(), &self.table.cumulative(&self.a_cells(path)))?;
        check_finite(&z, subject)?;
        check_finite(&j1, subject)?;
        Ok(MolchanView {
            grid: *self.grid(),
            z,
            j1,
            j2: self.j2.clone(),
            w: self.w.clone(),
        })
    }

    /// Since `J_1` is linear in the kernel cumulative of `a/σ`, the
    /// numerator equals `∫ J_2 dY` with `Y = Z − ∫ k a(X)/σ ds`, which needs
    /// one triangular product per path instead of two.
    fn residual_cells(&self, path: &[f64]) -> Vec<f64> {
        let dt = self.grid().dt();
        path.windows(2)
            .zip(&self.sigma)
            .map(|(p, s)| ((p[1] - p[0]) / dt - self.drift.a(p[0])) / s)
            .collect()
    }

    fn finish(&self, subject: usize, y: &[f64]) -> Result<EffectEstimate> {
        check_finite(y, subject)?;
        let dy: Vec<f64> = y.windows(2).map(|p| p[1] - p[0]).collect();
        let num = dot(&self.j2, &dy);
        finish_ratio(subject, num, self.info)
    }

    /// Estimate for one trajectory; bit-identical to the corresponding entry
    /// of [`estimate_all`](Self::estimate_all).
    pub fn estimate(&self, subject: usize, path: &[f64]) -> Result<EffectEstimate> {
        self.check_path(subject, path)?;
        let y = self.table.cumulative(&self.residual_cells(path));
        self.finish(subject, &y)
    }

    /// Estimates for all paths, in order.
    pub fn estimate_all(&self, paths: &[Vec<f64>]) -> Result<Vec<EffectEstimate>> {
        const CHUNK: usize = 16;
        let chunks: Vec<Result<Vec<EffectEstimate>>> = paths
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, block)| {
                let first = c * CHUNK;
                let cells = block
                    .iter()
                    .enumerate()
                    .map(|(j, p)| {
                        self.check_path(first + j, p)?;
                        Ok(self.residual_cells(p))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&[f64]> = cells.iter().map(|v| v.as_slice()).collect();
                self.table
                    .cumulative_batch(&refs)
                    .iter()
                    .enumerate()
                    .map(|(j, y)| self.finish(first + j, y))
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(paths.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }
}

fn finish_ratio(subject: usize, num: f64, info: f64) -> Result<EffectEstimate> {
    if !(info > 0.0) {
        return Err(Error::Unidentifiable { info });
    }
    Ok(EffectEstimate {
        subject,
        phi_hat: num / info,
        info,
    })
}

/// Transform of one trajectory, building the context on the fly.
pub fn molchan_transform(model: &HurstModel, grid: &TimeGrid, path: &[f64], drift: &DriftSpec) -> Result<MolchanView> {
    MolchanContext::new(model, grid, drift)?.view(0, path)
}

/// Estimate from a transformed observation, by the left-point sums of the
/// general formula.
pub fn estimate_effect(subject: usize, view: &MolchanView) -> Result<EffectEstimate> {
    let dw: Vec<f64> = view.w.windows(2).map(|p| p[1] - p[0]).collect();
    let mut num = 0.0;
    let mut info = 0.0;
    for k in 0..view.j2.len() {
        num += view.j2[k] * (view.z[k + 1] - view.z[k]) - view.j1[k] * view.j2[k] * dw[k];
        info += view.j2[k] * view.j2[k] * dw[k];
    }
    finish_ratio(subject, num, info)
}

/// Estimates for every subject of a bundle.
pub fn estimate_bundle(bundle: &TrajectoryBundle) -> Result<Vec<EffectEstimate>> {
    MolchanContext::for_bundle(bundle)?.estimate_all(&bundle.paths)
}

/// Closed-form Vasicek estimate `φ + σ M_T / w_T` from the driving fBm, with
/// `M_T = Σ k_H(T, s_mid) ΔW^H`. Only available when the noise is known.
pub fn vasicek_oracle(model: &HurstModel, grid: &TimeGrid, phi: f64, sigma: f64, noise: &[f64]) -> f64 {
    let t = grid.horizon();
    let m: f64 = noise
        .windows(2)
        .enumerate()
        .map(|(i, p)| model.kernel(t, grid.node(i) + 0.5 * grid.dt()) * (p[1] - p[0]))
        .sum();
    phi + sigma * m / model.weight(t)
}

/// Writes `subject,phi_true,phi_hat,info`; `phi_true` is left empty when
/// unknown.
pub fn write_estimates_csv(path: &Path, estimates: &[EffectEstimate], truth: Option<&[f64]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    let fail = |e: csv::Error| Error::format(path, e);
    w.write_record(["subject", "phi_true", "phi_hat", "info"]).map_err(fail)?;
    for e in estimates {
        let t = truth.map(|t| t[e.subject].to_string()).unwrap_or_default();
        w.write_record([e.subject.to_string(), t, e.phi_hat.to_string(), e.info.to_string()])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the `phi_hat` column (and `phi_true` when every row has one).
pub fn read_estimates_csv(path: &Path) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    #[derive(Deserialize)]
    struct Row {
        phi_true: Option<f64>,
        phi_hat: f64,
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    let mut hats = Vec::new();
    let mut truth = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| Error::format(path, e))?;
        hats.push(row.phi_hat);
        truth.push(row.phi_true);
    }
    let truth = truth.into_iter().collect::<Option<Vec<f64>>>();
    Ok((hats, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{FbmGenerator, FbmMethod};
    use crate::rng::substream;
    use crate::sde::{euler_path, BundleSimulator};

    fn h07() -> HurstModel {
        HurstModel::new(0.7).unwrap()
    }

    #[test]
    fn brownian_case_z_equals_x() {
        let m = HurstModel::degenerate_brownian();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let path: Vec<f64> = (0..=20).map(|k| (k as f64 * 0.7).sin()).collect();
        let v = molchan_transform(&m, &grid, &path, &DriftSpec::vasicek(1.0, 1.0)).unwrap();
        for (z, x) in v.z.iter().zip(&path) {
            assert!((z - (x - path[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn vasicek_j2_is_one() {
        let grid = TimeGrid::new(100.0, 1000).unwrap();
        let ctx = MolchanContext::new(&h07(), &grid, &DriftSpec::vasicek(1.0, 1.0)).unwrap();
        assert!(ctx.j2().iter().all(|j| (j - 1.0).abs() < 1e-3));
    }

    #[test]
    fn frozen_path_j1_is_minus_beta_c() {
        let grid = TimeGrid::new(10.0, 100).unwrap();
        let path = vec![0.8; 101];
        let v = molchan_transform(&h07(), &grid, &path, &DriftSpec::vasicek(1.5, 1.0)).unwrap();
        assert!(v.j1.iter().all(|j| (j + 1.2).abs() < 1e-3));
        assert!(v.z.iter().all(|z| z.abs() < 1e-15));
    }

    #[test]
    fn noiseless_vasicek_recovers_phi() {
        let grid = TimeGrid::new(100.0, 1000).unwrap();
        let drift = DriftSpec::vasicek(1.0, 1.0);
        let path = euler_path(&drift, &grid, 0.0, 0.42, &vec![0.0; 1001]);
        let v = molchan_transform(&h07(), &grid, &path, &drift).unwrap();
        let e = estimate_effect(0, &v).unwrap();
        assert!((e.phi_hat - 0.42).abs() < 2e-2, "{}", e.phi_hat);
        assert!(v.z[0] == 0.0 && v.w.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn zero_b_is_unidentifiable() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let drift = DriftSpec::custom("no effect", |x| -x, |_| 0.0, |_| 1.0);
        let v = molchan_transform(&h07(), &grid, &[0.0; 11], &drift).unwrap();
        assert!(matches!(estimate_effect(0, &v), Err(Error::Unidentifiable { .. })));
    }

    #[test]
    fn coarse_grid_and_non_finite_paths_are_rejected() {
        let drift = DriftSpec::vasicek(1.0, 1.0);
        let coarse = TimeGrid::new(1.0, 7).unwrap();
        assert!(MolchanContext::new(&h07(), &coarse, &drift).is_err());
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let mut path = vec![0.0; 11];
        path[4] = f64::NAN;
        let ctx = MolchanContext::new(&h07(), &grid, &drift).unwrap();
        assert!(matches!(ctx.estimate(3, &path), Err(Error::NonFinite { subject: 3, node: 4 })));
    }

    #[test]
    fn fast_route_matches_general_formula() {
        let grid = TimeGrid::new(20.0, 200).unwrap();
        let drift = DriftSpec::custom("nonlinear", |x| -x - 0.3 * x.powi(3), |t| 1.0 + 0.5 * (t / 5.0).sin(), |t| 1.0 + 0.1 * t / 20.0);
        let sim = BundleSimulator::new(&h07(), &grid, drift.clone(), 0.1, FbmMethod::Cholesky).unwrap();
        let b = sim.simulate_effects(&[0.1, 0.5, 0.9, 0.3], 11).unwrap();
        let ctx = MolchanContext::new(&h07(), &grid, &drift).unwrap();
        let fast = ctx.estimate_all(&b.paths).unwrap();
        for (j, p) in b.paths.iter().enumerate() {
            let slow = estimate_effect(j, &ctx.view(j, p).unwrap()).unwrap();
            assert!((slow.phi_hat - fast[j].phi_hat).abs() < 1e-10);
            assert!((slow.info - fast[j].info).abs() < 1e-10 * slow.info);
            assert_eq!(ctx.estimate(j, p).unwrap(), fast[j]);
        }
    }

    #[test]
    fn agrees_with_vasicek_oracle() {
        let m = h07();
        let grid = TimeGrid::new(100.0, 1000).unwrap();
        let drift = DriftSpec::vasicek(1.0, 1.0);
        let gen = FbmGenerator::new(&m, &grid, FbmMethod::DaviesHarte).unwrap();
        let ctx = MolchanContext::new(&m, &grid, &drift).unwrap();
        for r in 0..5 {
            let w = gen.sample(&mut substream(21, &[r]));
            let path = euler_path(&drift, &grid, 0.0, 0.3, &w);
            let e = ctx.estimate(0, &path).unwrap();
            let o = vasicek_oracle(&m, &grid, 0.3, 1.0, &w);
            assert!((e.phi_hat - o).abs() < 5e-2, "{} vs {o}", e.phi_hat);
        }
        assert_eq!(vasicek_oracle(&m, &grid, 0.3, 1.0, &vec![0.0; 1001]), 0.3);
    }

    #[test]
    fn shifting_effects_shifts_estimates() {
        let grid = TimeGrid::new(10.0, 100).unwrap();
        let drift = DriftSpec::vasicek(1.0, 1.0);
        let sim = BundleSimulator::new(&h07(), &grid, drift, 0.0, FbmMethod::Cholesky).unwrap();
        let phi = [0.2, 0.4, 0.7];
        let shifted: Vec<f64> = phi.iter().map(|p| p + 0.25).collect();
        let a = estimate_bundle(&sim.simulate_effects(&phi, 4).unwrap()).unwrap();
        let b = estimate_bundle(&sim.simulate_effects(&shifted, 4).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y.phi_hat - x.phi_hat - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn estimates_csv_round_trip() {
        let est = vec![
            EffectEstimate { subject: 0, phi_hat: 0.25, info: 3.0 },
            EffectEstimate { subject: 1, phi_hat: -0.125, info: 3.0 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("est.csv");
        write_estimates_csv(&f, &est, Some(&[0.3, 0.1])).unwrap();
        let (hat, truth) = read_estimates_csv(&f).unwrap();
        assert_eq!(hat, vec![0.25, -0.125]);
        assert_eq!(truth, Some(vec![0.3, 0.1]));
        write_estimates_csv(&f, &est, None).unwrap();
        assert_eq!(read_estimates_csv(&f).unwrap().1, None);
    }
}
