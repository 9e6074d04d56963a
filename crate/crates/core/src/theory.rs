//! Closed-form asymptotics of the Bernstein estimator: pointwise bias and
//! variance, MISE and its optimal order, and the non-asymptotic uniform
//! error bound.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::effects::EffectDensity;
use crate::error::{Error, Result};
use crate::hurst::HurstModel;
use crate::quad::simpson_converged;

/// Points of the dense grid used for sup-norms.
pub const SUP_GRID: usize = 10_001;

/// Which integrand defines the squared-bias constant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasConstant {
    /// `∫ ((1 − 2x)/2)² f'(x)² dx`, the square of the pointwise bias.
    #[default]
    Derivative,
    /// `∫ ((1 − 2x)/2)² f(x)² dx`, as printed alongside the MISE expansion.
    Printed,
}

/// `ψ(x) = (4π x (1 − x))^{−1/2}`.
pub fn psi(x: f64) -> f64 {
    1.0 / (4.0 * PI * x * (1.0 - x)).sqrt()
}

/// A density together with the constants its asymptotics need.
#[derive(Clone, Debug)]
pub struct DensityProfile {
    density: EffectDensity,
    c_var: f64,
    c_bias: f64,
    sup_d1: f64,
    sup_d2: f64,
}

const QUAD_TOL: f64 = 1e-10;

fn c_var_of(density: &EffectDensity, start: usize) -> Result<f64> {
    // x = sin²θ turns ∫ f ψ dx into the smooth ∫ f(sin²θ)/√π dθ
    simpson_converged(|t| density.pdf(t.sin().powi(2)) / PI.sqrt(), 0.0, FRAC_PI_2, start, 1 << 22, QUAD_TOL)
}

fn c_bias_of(density: &EffectDensity, variant: BiasConstant, start: usize) -> Result<f64> {
    let idx = match variant {
        BiasConstant::Derivative => 1,
        BiasConstant::Printed => 0,
    };
    simpson_converged(
        |x| {
            let g = density.derivatives(x)[idx];
            (0.5 - x).powi(2) * g * g
        },
        0.0,
        1.0,
        start,
        1 << 22,
        QUAD_TOL,
    )
}

impl DensityProfile {
    pub fn new(density: &EffectDensity) -> Result<Self> {
        Self::with_variant(density, BiasConstant::Derivative)
    }

    pub fn with_variant(density: &EffectDensity, variant: BiasConstant) -> Result<Self> {
        if !density.has_density() {
            return Err(Error::Domain(format!("{density} has no density")));
        }
        let c_var = c_var_of(density, 64)?;
        let c_bias = c_bias_of(density, variant, 64)?;
        let (mut sup_d1, mut sup_d2) = (0.0f64, 0.0f64);
        for i in 0..SUP_GRID {
            let [_, d1, d2] = density.derivatives(i as f64 / (SUP_GRID - 1) as f64);
            sup_d1 = sup_d1.max(d1.abs());
            sup_d2 = sup_d2.max(d2.abs());
        }
        if !(c_var.is_finite() && c_bias.is_finite() && sup_d1.is_finite() && sup_d2.is_finite()) {
            return Err(Error::Quadrature(format!("{density}: constants are not finite")));
        }
        Ok(DensityProfile {
            density: density.clone(),
            c_var,
            c_bias,
            sup_d1,
            sup_d2,
        })
    }

    pub fn density(&self) -> &EffectDensity {
        &self.density
    }

    /// `∫ f ψ`.
    pub fn c_var(&self) -> f64 {
        self.c_var
    }

    pub fn c_bias(&self) -> f64 {
        self.c_bias
    }

    /// `(‖f'‖_∞, ‖f''‖_∞)` on the dense grid.
    pub fn sup_norms(&self) -> (f64, f64) {
        (self.sup_d1, self.sup_d2)
    }

    /// `m^{−1} (1 − 2x)/2 · f'(x)`.
    pub fn asymptotic_bias(&self, m: f64, x: f64) -> f64 {
        (0.5 - x) * self.density.derivatives(x)[1] / m
    }

    /// `m^{1/2} n^{−1} f(x) ψ(x)` inside `(0, 1)` and `m n^{−1} f(x)` at the
    /// end points.
    pub fn asymptotic_variance(&self, m: f64, n: usize, x: f64) -> f64 {
        let f = self.density.pdf(x);
        if x <= 0.0 || x >= 1.0 {
            m * f / n as f64
        } else {
            m.sqrt() * f * psi(x) / n as f64
        }
    }

    /// `m^{1/2} n^{−1} C_var + m^{−2} C_bias`.
    pub fn asymptotic_mise(&self, m: f64, n: usize) -> f64 {
        m.sqrt() * self.c_var / n as f64 + self.c_bias / (m * m)
    }

    /// Stationary point of [`asymptotic_mise`](Self::asymptotic_mise) in `m`.
    pub fn optimal_m(&self, n: usize) -> Result<OptimalOrder> {
        if !(self.c_bias > 0.0) {
            return Err(Error::Domain(format!(
                "{}: squared-bias constant is zero, so the MISE has no interior minimum in m; tune m on the variance alone",
                self.density
            )));
        }
        let nf = n as f64;
        Ok(OptimalOrder {
            m: (4.0 * self.c_bias / self.c_var).powf(0.4) * nf.powf(0.4),
            mise: 1.25 * 4f64.powf(0.2) * self.c_var.powf(0.8) * self.c_bias.powf(0.2) * nf.powf(-0.8),
        })
    }

    /// The three explicit terms of the uniform bound on `E ‖f̂ − f‖_∞`,
    /// `λ_H m⁴ / (C² T^{2−2H}) + m^{3/2} n^{−1/2} + m^{−1}(‖f'‖/2 + ‖f''‖/8)`.
    pub fn uniform_error_bound(&self, model: &HurstModel, m: f64, n: usize, horizon: f64, c_lower: f64) -> Result<f64> {
        if !(c_lower > 0.0) {
            return Err(Error::Domain(format!("lower bound on b/sigma must be positive, got {c_lower}")));
        }
        let h = model.hurst();
        let mle = model.lambda() * m.powi(4) / (c_lower * c_lower * horizon.powf(2.0 - 2.0 * h));
        let sampling = m.powf(1.5) / (n as f64).sqrt();
        let smoothing = (self.sup_d1 / 2.0 + self.sup_d2 / 8.0) / m;
        Ok(mle + sampling + smoothing)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalOrder {
    pub m: f64,
    /// Attained asymptotic MISE.
    pub mise: f64,
}

impl OptimalOrder {
    /// Nearest usable integer order.
    pub fn rounded(&self) -> usize {
        (self.m.round() as usize).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(s: &str) -> DensityProfile {
        DensityProfile::new(&EffectDensity::named(s).unwrap()).unwrap()
    }

    fn uniform() -> DensityProfile {
        DensityProfile::new(&EffectDensity::Beta { alpha: 1.0, beta: 1.0 }).unwrap()
    }

    #[test]
    fn bias_examples() {
        let b = named("beta_1_2");
        assert!((b.asymptotic_bias(10.0, 0.0) + 0.1).abs() < 1e-12);
        assert_eq!(b.asymptotic_bias(7.0, 0.5), 0.0);
        assert!(uniform().asymptotic_bias(5.0, 0.2).abs() < 1e-15);
        // f' even about 1/2 makes the bias odd; a symmetric f makes it even
        let lin = named("beta_1_2");
        let mix = named("beta_mix");
        for x in [0.1, 0.3, 0.45] {
            assert!((lin.asymptotic_bias(9.0, x) + lin.asymptotic_bias(9.0, 1.0 - x)).abs() < 1e-12);
            assert!((mix.asymptotic_bias(9.0, x) - mix.asymptotic_bias(9.0, 1.0 - x)).abs() < 1e-10);
        }
    }

    #[test]
    fn variance_examples() {
        let u = uniform();
        assert!((u.asymptotic_variance(100.0, 100, 0.5) - 0.1 / PI.sqrt()).abs() < 1e-12);
        assert_eq!(named("beta_mix").asymptotic_variance(10.0, 50, 0.0), 0.0);
        assert!((named("beta_1_2").asymptotic_variance(10.0, 50, 0.0) - 0.4).abs() < 1e-12);
        assert!(u.asymptotic_variance(20.0, 10, 0.3) > u.asymptotic_variance(10.0, 10, 0.3));
    }

    #[test]
    fn uniform_constants() {
        let u = uniform();
        assert!((u.c_var() - PI.sqrt() / 2.0).abs() < 1e-10);
        assert_eq!(u.c_bias(), 0.0);
        assert!(u.optimal_m(100).is_err());
        assert!((u.asymptotic_mise(16.0, 100) - 0.04 * PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn beta_1_2_constants_match_closed_form() {
        let b = named("beta_1_2");
        // ∫ (1-2x)² dx = 1/3 and ∫ 2(1-x) ψ = 1/2 ∫ψ · 2 by symmetry
        assert!((b.c_bias() - 1.0 / 3.0).abs() < 1e-10);
        assert!((b.c_var() - PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn constants_stable_under_resolution() {
        for name in crate::effects::SUITE {
            let d = EffectDensity::named(name).unwrap();
            let (a, b) = (c_var_of(&d, 64).unwrap(), c_var_of(&d, 1024).unwrap());
            assert!((a - b).abs() < 1e-6 * b, "{name}");
            let (a, b) = (
                c_bias_of(&d, BiasConstant::Derivative, 64).unwrap(),
                c_bias_of(&d, BiasConstant::Derivative, 1024).unwrap(),
            );
            assert!((a - b).abs() < 1e-6 * b, "{name}");
        }
        let b35 = named("beta_3_5");
        assert!((b35.c_var() - 0.63611).abs() < 1e-4 && (b35.c_bias() - 2.81469).abs() < 1e-4);
    }

    #[test]
    fn optimal_order_is_the_minimum() {
        let p = named("beta_3_5");
        let opt = p.optimal_m(800).unwrap();
        let step = 0.01;
        let (mut best_m, mut best) = (0.0, f64::INFINITY);
        for i in 1..20_000 {
            let m = i as f64 * step;
            let v = p.asymptotic_mise(m, 800);
            if v < best {
                (best_m, best) = (m, v);
            }
            assert!(p.asymptotic_mise(opt.m, 800) <= v + 1e-15);
        }
        assert!((best_m - opt.m).abs() <= step);
        assert!((opt.mise - p.asymptotic_mise(opt.m, 800)).abs() < 1e-12);
        let big = p.optimal_m(800 * 32).unwrap();
        assert!((big.m / opt.m - 4.0).abs() < 1e-12);
        assert!((big.mise / opt.mise - 1.0 / 16.0).abs() < 1e-12);
        assert!(p.asymptotic_mise(80.0, 1_000_000) < p.asymptotic_mise(16.0, 1000));
    }

    #[test]
    fn printed_variant_differs() {
        let d = EffectDensity::named("beta_3_5").unwrap();
        let printed = DensityProfile::with_variant(&d, BiasConstant::Printed).unwrap();
        let expect = crate::quad::simpson(|x| (0.5 - x).powi(2) * d.pdf(x).powi(2), 0.0, 1.0, 1 << 14);
        assert!((printed.c_bias() - expect).abs() < 1e-9);
        assert!((printed.c_bias() - named("beta_3_5").c_bias()).abs() > 0.1);
    }

    #[test]
    fn uniform_bound_shape() {
        let model = HurstModel::new(0.7).unwrap();
        let p = named("beta_3_5");
        let (d1, d2) = p.sup_norms();
        let limit = 5f64.powf(1.5) / 250f64.sqrt() + (d1 / 2.0 + d2 / 8.0) / 5.0;
        let far = p.uniform_error_bound(&model, 5.0, 250, 1e30, 1.0).unwrap();
        assert!((far - limit).abs() < 1e-6);
        let b5 = p.uniform_error_bound(&model, 5.0, 250, 100.0, 1.0).unwrap();
        let b20 = p.uniform_error_bound(&model, 20.0, 250, 100.0, 1.0).unwrap();
        assert!(b20 > b5);
        assert!(p.uniform_error_bound(&model, 5.0, 250, 100.0, 0.0).is_err());
    }
}
