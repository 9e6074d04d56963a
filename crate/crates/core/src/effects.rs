//! Random-effect densities on `[0, 1]`: exact samplers plus `f`, `f'`, `f''`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Density of the random effects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectDensity {
    Beta { alpha: f64, beta: f64 },
    /// `Σ w_i Beta(α_i, β_i)`.
    BetaMixture { components: Vec<(f64, f64, f64)> },
    /// `Σ w_i N(μ_i, σ_i²)` restricted to `[0, 1]` and renormalized;
    /// components are `(weight, mean, sd)`.
    TruncatedNormalMixture { components: Vec<(f64, f64, f64)> },
    /// Degenerate law, for tests only; it has no density.
    PointMass { at: f64 },
}

/// Names of the densities used in the simulation study.
pub const SUITE: [&str; 4] = ["beta_1_2", "beta_3_5", "beta_mix", "truncnorm_mix"];

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `c x^p (1-x)^q`, with `0 · anything = 0` so vanishing coefficients never
/// meet a negative power at the boundary.
fn term(c: f64, p: f64, q: f64, x: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * x.powf(p) * (1.0 - x).powf(q)
    }
}

/// Beta(a, b) density and its first two derivatives at `x ∈ [0, 1]`.
fn beta_derivs(a: f64, b: f64, x: f64) -> [f64; 3] {
    let norm = (-ln_beta(a, b)).exp();
    let f = term(1.0, a - 1.0, b - 1.0, x);
    let d1 = term(a - 1.0, a - 2.0, b - 1.0, x) - term(b - 1.0, a - 1.0, b - 2.0, x);
    let d2 = term((a - 1.0) * (a - 2.0), a - 3.0, b - 1.0, x)
        - term(2.0 * (a - 1.0) * (b - 1.0), a - 2.0, b - 2.0, x)
        + term((b - 1.0) * (b - 2.0), a - 1.0, b - 3.0, x);
    [f * norm, d1 * norm, d2 * norm]
}

impl EffectDensity {
    /// One of [`SUITE`], or a user density written `beta:<α>:<β>`.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "beta_1_2" => Ok(EffectDensity::Beta { alpha: 1.0, beta: 2.0 }),
            "beta_3_5" => Ok(EffectDensity::Beta { alpha: 3.0, beta: 5.0 }),
            "beta_mix" => Ok(EffectDensity::BetaMixture {
                components: vec![(0.5, 3.0, 9.0), (0.5, 9.0, 3.0)],
            }),
            "truncnorm_mix" => Ok(EffectDensity::TruncatedNormalMixture {
                components: vec![(0.6, 0.5, 0.1), (0.4, 0.9, 0.03)],
            }),
            other => {
                let parts: Vec<&str> = other.split(':').collect();
                if let ["beta", a, b] = parts.as_slice() {
                    let alpha: f64 = a.parse().map_err(|_| bad_name(other))?;
                    let beta: f64 = b.parse().map_err(|_| bad_name(other))?;
                    if alpha >= 1.0 && beta >= 1.0 && alpha.is_finite() && beta.is_finite() {
                        return Ok(EffectDensity::Beta { alpha, beta });
                    }
                }
                Err(bad_name(other))
            }
        }
    }

    fn truncation_mass(components: &[(f64, f64, f64)]) -> f64 {
        components
            .iter()
            .map(|&(w, mu, sd)| w * (std_normal_cdf((1.0 - mu) / sd) - std_normal_cdf(-mu / sd)))
            .sum()
    }

    /// `[f(x), f'(x), f''(x)]`; zero outside `[0, 1]`.
    pub fn derivatives(&self, x: f64) -> [f64; 3] {
        if !(0.0..=1.0).contains(&x) {
            return [0.0; 3];
        }
        match self {
            EffectDensity::Beta { alpha, beta } => beta_derivs(*alpha, *beta, x),
            EffectDensity::BetaMixture { components } => {
                components.iter().fold([0.0; 3], |acc, &(w, a, b)| {
                    let d = beta_derivs(a, b, x);
                    [acc[0] + w * d[0], acc[1] + w * d[1], acc[2] + w * d[2]]
                })
            }
            EffectDensity::TruncatedNormalMixture { components } => {
                let z_mass = Self::truncation_mass(components);
                components.iter().fold([0.0; 3], |acc, &(w, mu, sd)| {
                    let z = (x - mu) / sd;
                    let f = w * std_normal_pdf(z) / sd / z_mass;
                    [acc[0] + f, acc[1] - f * z / sd, acc[2] + f * (z * z - 1.0) / (sd * sd)]
                })
            }
            EffectDensity::PointMass { .. } => [0.0; 3],
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.derivatives(x)[0]
    }

    pub fn has_density(&self) -> bool {
        !matches!(self, EffectDensity::PointMass { .. })
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EffectDensity::Beta { alpha, beta } => {
                Beta::new(*alpha, *beta).expect("validated shape").sample(rng)
            }
            EffectDensity::BetaMixture { components } => {
                let (_, a, b) = pick(components, rng);
                Beta::new(a, b).expect("validated shape").sample(rng)
            }
            EffectDensity::TruncatedNormalMixture { components } => loop {
                let (_, mu, sd) = pick(components, rng);
                let x = Normal::new(mu, sd).expect("validated sd").sample(rng);
                if (0.0..=1.0).contains(&x) {
                    break x;
                }
            },
            EffectDensity::PointMass { at } => *at,
        }
    }

    /// Mean of the law, by quadrature for the mixtures.
    pub fn mean(&self) -> f64 {
        match self {
            EffectDensity::Beta { alpha, beta } => alpha / (alpha + beta),
            EffectDensity::BetaMixture { components } => {
                components.iter().map(|&(w, a, b)| w * a / (a + b)).sum()
            }
            EffectDensity::TruncatedNormalMixture { .. } => {
                crate::quad::simpson(|x| x * self.pdf(x), 0.0, 1.0, 1 << 14)
            }
            EffectDensity::PointMass { at } => *at,
        }
    }
}

fn bad_name(name: &str) -> Error {
    Error::Config(format!(
        "unknown density {name:?}; expected one of {SUITE:?} or beta:<alpha>:<beta> with shapes >= 1"
    ))
}

fn pick<R: Rng + ?Sized>(components: &[(f64, f64, f64)], rng: &mut R) -> (f64, f64, f64) {
    let total: f64 = components.iter().map(|c| c.0).sum();
    let mut u = rng.gen::<f64>() * total;
    for &c in components {
        if u < c.0 {
            return c;
        }
        u -= c.0;
    }
    *components.last().expect("non-empty mixture")
}

impl FromStr for EffectDensity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EffectDensity::named(s)
    }
}

impl fmt::Display for EffectDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for name in SUITE {
            if EffectDensity::named(name).ok().as_ref() == Some(self) {
                return f.write_str(name);
            }
        }
        match self {
            EffectDensity::Beta { alpha, beta } => write!(f, "beta:{alpha}:{beta}"),
            EffectDensity::PointMass { at } => write!(f, "point:{at}"),
            _ => f.write_str("mixture"),
        }
    }
}

/// `n` i.i.d. draws.
pub fn sample_effects<R: Rng + ?Sized>(density: &EffectDensity, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| density.sample(rng)).collect()
}
