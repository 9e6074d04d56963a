//! Hurst-indexed constants, the Molchan kernel `k_H(t, s)` and the weight
//! function `w_t^H`.
//!
//! ```text
//! k_H(t, s) = κ_H⁻¹ s^(1/2-H) (t-s)^(1/2-H) 1{0 < s < t}
//! κ_H       = 2H Γ(3/2-H) Γ(H+1/2)
//! w_t^H     = λ_H⁻¹ t^(2-2H)
//! λ_H       = 2H Γ(3-2H) Γ(H+1/2) / Γ(3/2-H)
//! ```
//!
//! The kernel has integrable singularities at both ends of `(0, t)`. Rather
//! than sampling it there, integrals against it are taken cell by cell with
//! the kernel integrated exactly over each cell: with `u = s/t`,
//! `∫ k_H(t, s) ds` over a cell is `κ_H⁻¹ B(a, a) t^(2-2H)` times the
//! increment of the regularized incomplete beta function `I_u(a, a)`,
//! `a = 3/2 - H`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::tri::LowerTriangular;

/// Γ(x) for x > 0.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// Hurst index together with the constants derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HurstRepr", into = "HurstRepr")]
pub struct HurstModel {
    hurst: f64,
    kappa: f64,
    lambda: f64,
    /// B(3/2-H, 3/2-H): total kernel mass over (0, t) is `kappa⁻¹ beta t^(2-2H)`.
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct HurstRepr {
    hurst: f64,
}

impl TryFrom<HurstRepr> for HurstModel {
    type Error = Error;
    fn try_from(r: HurstRepr) -> Result<Self> {
        if r.hurst == 0.5 {
            Ok(HurstModel::degenerate_brownian())
        } else {
            HurstModel::new(r.hurst)
        }
    }
}

impl From<HurstModel> for HurstRepr {
    fn from(m: HurstModel) -> Self {
        HurstRepr { hurst: m.hurst }
    }
}

impl HurstModel {
    /// Model for `1/2 < H < 1`.
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::Domain(format!(
                "Hurst index must lie in (1/2, 1), got {hurst}"
            )));
        }
        Self::build(hurst)
    }

    /// H = 1/2, i.e. standard Brownian motion: `k ≡ 1`, `w_t = t`.
    /// Only meant for oracle checks against the Brownian case.
    pub fn degenerate_brownian() -> Self {
        Self::build(0.5).expect("constants are finite at H = 1/2")
    }

    fn build(h: f64) -> Result<Self> {
        let a = 1.5 - h;
        let kappa = 2.0 * h * gamma_fn(a)? * gamma_fn(h + 0.5)?;
        let lambda = 2.0 * h * gamma_fn(3.0 - 2.0 * h)? * gamma_fn(h + 0.5)? / gamma_fn(a)?;
        let beta = gamma_fn(a)?.powi(2) / gamma_fn(2.0 * a)?;
        Ok(HurstModel {
            hurst: h,
            kappa,
            lambda,
            beta,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Beta parameter `3/2 - H` of the normalized kernel.
    fn shape(&self) -> f64 {
        1.5 - self.hurst
    }

    /// `k_H(t, s)`; zero outside `0 < s < t`.
    pub fn kernel(&self, t: f64, s: f64) -> f64 {
        if s <= 0.0 || s >= t {
            return 0.0;
        }
        let e = 0.5 - self.hurst;
        s.powf(e) * (t - s).powf(e) / self.kappa
    }

    /// `w_t^H` for `t >= 0`.
    pub fn weight(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        t.powf(2.0 - 2.0 * self.hurst) / self.lambda
    }

    /// Exact `∫_0^t k_H(t, s) ds`, evaluated through Γ as
    /// `κ_H⁻¹ B(3/2-H, 3/2-H) t^(2-2H)`.
    pub fn kernel_total(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.beta / self.kappa * t.powf(2.0 - 2.0 * self.hurst)
    }

    /// Normalized kernel CDF `I_u(a, a)`: the fraction of `∫_0^t k_H(t, s) ds`
    /// carried by `s < u t`.
    pub fn kernel_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            let a = self.shape();
            beta_reg(a, a, u)
        }
    }

    /// Exact `∫_lo^hi k_H(t, s) ds` for `0 <= lo <= hi <= t`.
    pub fn kernel_mass(&self, t: f64, lo: f64, hi: f64) -> f64 {
        self.kernel_total(t) * (self.kernel_cdf(hi / t) - self.kernel_cdf(lo / t))
    }
}

/// Uniform time grid `t_k = k T / N`, `k = 0..=N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
        }
        if steps < 2 {
            return Err(Error::Domain(format!("need at least 2 steps, got {steps}")));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    /// Same number of steps over `c` times the horizon.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        TimeGrid::new(self.horizon * c, self.steps)
    }
}

/// `w^H` at every grid node.
pub fn weights_on(model: &HurstModel, grid: &TimeGrid) -> Vec<f64> {
    grid.nodes().into_iter().map(|t| model.weight(t)).collect()
}

/// Settings for [`kernel_integral`].
#[derive(Clone, Copy, Debug)]
pub struct KernelQuadrature {
    pub cells: usize,
    pub max_cells: usize,
    pub rel_tol: f64,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        KernelQuadrature {
            cells: 2048,
            max_cells: 1 << 17,
            rel_tol: 1e-6,
        }
    }
}

fn product_midpoint<F: Fn(f64) -> f64>(model: &HurstModel, t: f64, h: &F, cells: usize) -> f64 {
    let total = model.kernel_total(t);
    let width = t / cells as f64;
    let mut prev = 0.0;
    let mut acc = 0.0;
    for i in 0..cells {
        let next = model.kernel_cdf((i + 1) as f64 / cells as f64);
        acc += (next - prev) * h((i as f64 + 0.5) * width);
        prev = next;
    }
    total * acc
}

/// `∫_0^t k_H(t, s) h(s) ds`.
///
/// Product midpoint rule: `h` is sampled at cell midpoints and the kernel is
/// integrated exactly over each cell, so neither endpoint singularity is
/// ever evaluated. The cell count is doubled until two successive values
/// agree to `quad.rel_tol`.
pub fn kernel_integral<F: Fn(f64) -> f64>(
    model: &HurstModel,
    t: f64,
    h: F,
    quad: KernelQuadrature,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("kernel integral needs t > 0, got {t}")));
    }
    let mut cells = quad.cells.max(1);
    let mut prev = product_midpoint(model, t, &h, cells);
    loop {
        if cells >= quad.max_cells {
            return Err(Error::Quadrature(format!(
                "kernel integral at t = {t} still moving after {cells} cells"
            )));
        }
        cells *= 2;
        let next = product_midpoint(model, t, &h, cells);
        let scale = next.abs().max(f64::MIN_POSITIVE);
        if (next - prev).abs() <= quad.rel_tol * scale || next == prev {
            return Ok(next);
        }
        prev = next;
    }
}

/// Forward difference of grid-node values with respect to `w^H`:
/// `out_k = (g_{k+1} - g_k) / (w_{k+1} - w_k)`, one value per cell.
pub fn d_dw(model: &HurstModel, grid: &TimeGrid, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != grid.steps() + 1 {
        return Err(Error::Domain(format!(
            "expected {} node values, got {}",
            grid.steps() + 1,
            g.len()
        )));
    }
    let w = weights_on(model, grid);
    g.windows(2)
        .zip(w.windows(2))
        .enumerate()
        .map(|(k, (gv, wv))| {
            let dw = wv[1] - wv[0];
            if !(dw > 0.0) {
                return Err(Error::DegenerateGrid(format!("w does not increase on cell {k}")));
            }
            Ok((gv[1] - gv[0]) / dw)
        })
        .collect()
}

/// Kernel cell masses on a uniform grid,
/// `mass(k, i) = ∫_{t_i}^{t_{i+1}} k_H(t_k, s) ds` for `i < k`.
///
/// On a uniform grid the split of `(0, t_k)` into `k` cells does not depend
/// on the horizon, so `mass(k, i) = kernel_total(t_k) (I((i+1)/k) - I(i/k))`.
/// Row `k - 1` of the triangle holds the `k` masses for `t_k`. Building the
/// table costs `N²/2` incomplete-beta evaluations.
#[derive(Clone, Debug)]
pub struct KernelTable {
    grid: TimeGrid,
    masses: LowerTriangular,
}

impl KernelTable {
    pub fn new(model: &HurstModel, grid: &TimeGrid) -> Self {
        let n = grid.steps();
        let mut masses = LowerTriangular::zeros(n);
        for k in 1..=n {
            let total = model.kernel_total(grid.node(k));
            let row = masses.row_mut(k - 1);
            let mut prev = 0.0;
            for (i, cell) in row.iter_mut().enumerate() {
                let next = if i + 1 == k {
                    1.0
                } else {
                    model.kernel_cdf((i + 1) as f64 / k as f64)
                };
                *cell = total * (next - prev);
                prev = next;
            }
        }
        KernelTable {
            grid: *grid,
            masses,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn mass(&self, k: usize, i: usize) -> f64 {
        if k == 0 || i >= k {
            0.0
        } else {
            self.masses.get(k - 1, i)
        }
    }

    pub fn triangle(&self) -> &LowerTriangular {
        &self.masses
    }

    /// Node values `G_k = Σ_{i<k} mass(k, i) h_i` for per-cell values `h`,
    /// with `G_0 = 0`.
    pub fn cumulative(&self, cell_values: &[f64]) -> Vec<f64> {
        let n = self.grid.steps();
        assert_eq!(cell_values.len(), n);
        let mut out = vec![0.0; n + 1];
        self.masses.apply(cell_values, &mut out[1..]);
        out
    }

    /// [`cumulative`](Self::cumulative) for many cell-value vectors at once;
    /// bit-identical to calling it on each.
    pub fn cumulative_batch(&self, cell_values: &[&[f64]]) -> Vec<Vec<f64>> {
        let n = self.grid.steps();
        let mut outs = vec![vec![0.0; n + 1]; cell_values.len()];
        {
            let mut views: Vec<&mut [f64]> = outs.iter_mut().map(|o| &mut o[1..]).collect();
            self.masses.apply_batch(cell_values, &mut views);
        }
        outs
    }
}
