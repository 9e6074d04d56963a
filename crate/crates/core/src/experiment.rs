//! Monte Carlo study: simulate, estimate the effects, fit both density
//! estimators and score them against the truth.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{default_m_grid, fit_bernstein, fit_kde, lscv_select_m, silverman_bandwidth, unit_grid, SilvermanRule};
use crate::effects::{sample_effects, EffectDensity};
use crate::error::{Error, Result};
use crate::fbm::FbmMethod;
use crate::hurst::{HurstModel, TimeGrid};
use crate::mle::MolchanContext;
use crate::rng::{stream_tag, substream, tag};
use crate::sde::{BundleSimulator, DriftSpec};
use crate::stats;
use crate::theory::DensityProfile;

/// Points always added to the evaluation grid.
pub const BOUNDARY_POINTS: [f64; 4] = [0.0, 0.01, 0.99, 1.0];

/// Points of the dense grid used for sup-norm errors.
pub const SUP_POINTS: usize = 2001;

/// Largest share of replicates allowed to fail before a run is aborted.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// How the Bernstein order is chosen in each replicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MPolicy {
    Lscv,
    Fixed(usize),
    /// Nearest integer to the MISE-optimal order of the true density.
    TheoreticalOpt,
}

/// How the kernel bandwidth is chosen in each replicate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdePolicy {
    /// `1.06 min(sd, 1.34 IQR) n^{-1/5}`.
    #[serde(rename = "silverman_paper")]
    SilvermanScaled,
    SilvermanClassical,
    Fixed(f64),
}

/// Whether the density estimators see the MLE or the true effects.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectsMode {
    #[default]
    Estimated,
    Known,
}

fn parse_fixed<T: FromStr>(s: &str) -> Option<T> {
    s.strip_prefix("fixed:").and_then(|v| v.parse().ok())
}

impl FromStr for MPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lscv" => Ok(MPolicy::Lscv),
            "theoretical_opt" => Ok(MPolicy::TheoreticalOpt),
            _ => parse_fixed(s)
                .map(MPolicy::Fixed)
                .ok_or_else(|| Error::Config(format!("m policy {s:?}: expected lscv, theoretical_opt or fixed:<m>"))),
        }
    }
}

impl fmt::Display for MPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MPolicy::Lscv => f.write_str("lscv"),
            MPolicy::TheoreticalOpt => f.write_str("theoretical_opt"),
            MPolicy::Fixed(m) => write!(f, "fixed:{m}"),
        }
    }
}

impl FromStr for KdePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "silverman_paper" => Ok(KdePolicy::SilvermanScaled),
            "silverman_classical" => Ok(KdePolicy::SilvermanClassical),
            _ => parse_fixed(s).map(KdePolicy::Fixed).ok_or_else(|| {
                Error::Config(format!(
                    "kde policy {s:?}: expected silverman_paper, silverman_classical or fixed:<h>"
                ))
            }),
        }
    }
}

impl fmt::Display for KdePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KdePolicy::SilvermanScaled => f.write_str("silverman_paper"),
            KdePolicy::SilvermanClassical => f.write_str("silverman_classical"),
            KdePolicy::Fixed(h) => write!(f, "fixed:{h}"),
        }
    }
}

impl FromStr for EffectsMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimated" => Ok(EffectsMode::Estimated),
            "known" => Ok(EffectsMode::Known),
            other => Err(Error::Config(format!("effects mode {other:?}: expected estimated or known"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub density: EffectDensity,
    pub hurst: f64,
    pub horizon: f64,
    pub steps: usize,
    pub n_subjects: usize,
    pub replicates: usize,
    pub m_policy: MPolicy,
    pub kde_policy: KdePolicy,
    pub seed: u64,
    pub eval_grid: usize,
    pub effects_mode: EffectsMode,
    /// Mean-reversion rate of the Vasicek drift.
    pub beta: f64,
    /// Constant diffusion coefficient.
    pub sigma: f64,
    pub fbm_method: FbmMethod,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            density: EffectDensity::Beta { alpha: 1.0, beta: 2.0 },
            hurst: 0.7,
            horizon: 100.0,
            steps: 1000,
            n_subjects: 50,
            replicates: 100,
            m_policy: MPolicy::Lscv,
            kde_policy: KdePolicy::SilvermanScaled,
            seed: 1,
            eval_grid: 101,
            effects_mode: EffectsMode::Estimated,
            beta: 1.0,
            sigma: 1.0,
            fbm_method: FbmMethod::Cholesky,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.hurst > 0.5 && self.hurst < 1.0) {
            return bad(format!("hurst = {} must lie in (0.5, 1)", self.hurst));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon = {} must be positive", self.horizon));
        }
        if self.steps < crate::mle::MIN_CELLS {
            return bad(format!("steps = {} must be at least {}", self.steps, crate::mle::MIN_CELLS));
        }
        if self.n_subjects < 3 {
            return bad(format!("n_subjects = {} must be at least 3", self.n_subjects));
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if self.eval_grid < 2 {
            return bad(format!("eval_grid = {} must be at least 2", self.eval_grid));
        }
        if !(self.sigma > 0.0) {
            return bad(format!("sigma = {} must be positive", self.sigma));
        }
        if !self.beta.is_finite() {
            return bad(format!("beta = {} must be finite", self.beta));
        }
        if !self.density.has_density() {
            return bad(format!("{} has no density to estimate", self.density));
        }
        if self.m_policy == MPolicy::Fixed(0) {
            return bad("fixed m must be >= 1".into());
        }
        if let KdePolicy::Fixed(h) = self.kde_policy {
            if !(h > 0.0) {
                return bad(format!("fixed bandwidth {h} must be positive"));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<HurstModel> {
        HurstModel::new(self.hurst)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps)
    }

    pub fn drift(&self) -> DriftSpec {
        DriftSpec::vasicek(self.beta, self.sigma)
    }
}

/// Evaluation points: an equispaced grid plus [`BOUNDARY_POINTS`], sorted.
pub fn evaluation_grid(points: usize) -> Vec<f64> {
    let mut xs = unit_grid(points);
    xs.extend(BOUNDARY_POINTS);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Trapezoid rule on a sorted, possibly uneven grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Error summaries of one estimate against the truth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Errors {
    pub ise: f64,
    pub mse: f64,
    pub mae: f64,
    /// `max |f̂ − f|` on the dense grid.
    pub sup: f64,
}

impl Errors {
    fn score(xs: &[f64], truth: &[f64], est: &[f64], sup: f64) -> Self {
        let sq: Vec<f64> = est.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).collect();
        let n = xs.len() as f64;
        Errors {
            ise: trapezoid(xs, &sq),
            mse: sq.iter().sum::<f64>() / n,
            mae: est.iter().zip(truth).map(|(e, t)| (e - t).abs()).sum::<f64>() / n,
            sup,
        }
    }
}

/// Outcome of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub m: usize,
    pub h: f64,
    pub bernstein: Errors,
    pub kde: Errors,
    /// Estimates at [`BOUNDARY_POINTS`].
    pub boundary_bernstein: [f64; 4],
    pub boundary_kde: [f64; 4],
    /// Mean of `(φ̂ − φ)²` over subjects; 0 with known effects.
    pub effect_mse: f64,
}

/// Curves of one replicate, kept for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub x: Vec<f64>,
    pub truth: Vec<f64>,
    pub bernstein: Vec<f64>,
    pub kde: Vec<f64>,
}

/// Everything measured for one `(density, n_subjects)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub density: String,
    pub n_subjects: usize,
    pub config: ExperimentConfig,
    pub records: Vec<ReplicateRecord>,
    pub failures: usize,
    /// Curves of the first successful replicate.
    pub curves: Option<Curves>,
}

/// Estimator labels in reports.
pub const ESTIMATORS: [&str; 2] = ["bernstein", "kde"];
/// Metric labels in reports.
pub const METRICS: [&str; 4] = ["ise", "mse", "mae", "sup"];

fn metric(e: &Errors, name: &str) -> f64 {
    match name {
        "ise" => e.ise,
        "mse" => e.mse,
        "mae" => e.mae,
        "sup" => e.sup,
        _ => unreachable!("unknown metric {name}"),
    }
}

impl CellReport {
    /// Per-replicate values of `metric` for `estimator`.
    pub fn values(&self, estimator: &str, metric_name: &str) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| {
                let e = if estimator == "kde" { &r.kde } else { &r.bernstein };
                metric(e, metric_name)
            })
            .collect()
    }

    /// `(mean, standard error)` of a metric over replicates.
    pub fn summary(&self, estimator: &str, metric_name: &str) -> (f64, f64) {
        let v = self.values(estimator, metric_name);
        (stats::mean(&v), stats::std_err(&v))
    }

    /// Mean estimates at [`BOUNDARY_POINTS`], `(bernstein, kde)`.
    pub fn boundary_means(&self) -> ([f64; 4], [f64; 4]) {
        let mut b = [0.0; 4];
        let mut k = [0.0; 4];
        for i in 0..4 {
            b[i] = stats::mean(&self.records.iter().map(|r| r.boundary_bernstein[i]).collect::<Vec<_>>());
            k[i] = stats::mean(&self.records.iter().map(|r| r.boundary_kde[i]).collect::<Vec<_>>());
        }
        (b, k)
    }

    /// Mean absolute boundary errors `(bernstein, kde)` at [`BOUNDARY_POINTS`].
    pub fn boundary_abs_errors(&self) -> ([f64; 4], [f64; 4]) {
        let truth: Vec<f64> = BOUNDARY_POINTS.iter().map(|&x| self.config.density.pdf(x)).collect();
        let mut b = [0.0; 4];
        let mut k = [0.0; 4];
        for i in 0..4 {
            b[i] = stats::mean(&self.records.iter().map(|r| (r.boundary_bernstein[i] - truth[i]).abs()).collect::<Vec<_>>());
            k[i] = stats::mean(&self.records.iter().map(|r| (r.boundary_kde[i] - truth[i]).abs()).collect::<Vec<_>>());
        }
        (b, k)
    }
}

/// Collection of cells, in the order they were run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cells: Vec<CellReport>,
}

impl MetricsReport {
    pub fn merge(&mut self, other: MetricsReport) {
        self.cells.extend(other.cells);
    }

    pub fn cell(&self, density: &str, n_subjects: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.density == density && c.n_subjects == n_subjects)
    }
}

/// Per-replicate effect samples: the true draws and what the estimators see.
#[derive(Clone, Debug)]
pub struct EffectSample {
    pub truth: Vec<f64>,
    pub observed: Vec<f64>,
}

/// Set-up shared by all replicates of a configuration: the fBm factor, the
/// kernel table and the theoretical constants.
pub struct Experiment {
    config: ExperimentConfig,
    simulator: Option<BundleSimulator>,
    context: Option<MolchanContext>,
    profile: Option<DensityProfile>,
    xs: Vec<f64>,
    truth: Vec<f64>,
    sup_xs: Vec<f64>,
    sup_truth: Vec<f64>,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (simulator, context) = match config.effects_mode {
            EffectsMode::Known => (None, None),
            EffectsMode::Estimated => {
                let (model, grid, drift) = (config.model()?, config.grid()?, config.drift());
                (
                    Some(BundleSimulator::new(&model, &grid, drift.clone(), 0.0, config.fbm_method)?),
                    Some(MolchanContext::new(&model, &grid, &drift)?),
                )
            }
        };
        let profile = match config.m_policy {
            MPolicy::TheoreticalOpt => Some(DensityProfile::new(&config.density)?),
            _ => None,
        };
        let xs = evaluation_grid(config.eval_grid);
        let sup_xs = unit_grid(SUP_POINTS);
        Ok(Experiment {
            truth: xs.iter().map(|&x| config.density.pdf(x)).collect(),
            sup_truth: sup_xs.iter().map(|&x| config.density.pdf(x)).collect(),
            config: config.clone(),
            simulator,
            context,
            profile,
            xs,
            sup_xs,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    /// Master seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        stream_tag(self.config.seed, &[r as u64])
    }

    /// Effects of replicate `r` for `n` subjects. The true effects do not
    /// depend on the mode, so known- and estimated-effects runs are coupled.
    pub fn effects(&self, r: usize, n: usize) -> Result<EffectSample> {
        let seed = self.replicate_seed(r);
        let truth = sample_effects(&self.config.density, n, &mut substream(seed, &[tag::EFFECTS]));
        let observed = match (&self.simulator, &self.context) {
            (Some(sim), Some(ctx)) => {
                let bundle = sim.simulate_effects(&truth, seed)?;
                ctx.estimate_all(&bundle.paths)?.into_iter().map(|e| e.phi_hat).collect()
            }
            _ => truth.clone(),
        };
        Ok(EffectSample { truth, observed })
    }

    pub fn choose_m(&self, samples: &[f64]) -> Result<usize> {
        match self.config.m_policy {
            MPolicy::Fixed(m) => Ok(m),
            MPolicy::Lscv => lscv_select_m(samples, &default_m_grid(samples.len())),
            MPolicy::TheoreticalOpt => {
                let profile = self.profile.as_ref().expect("profile built for this policy");
                Ok(profile.optimal_m(samples.len())?.rounded())
            }
        }
    }

    pub fn choose_h(&self, samples: &[f64]) -> Result<f64> {
        match self.config.kde_policy {
            KdePolicy::SilvermanScaled => silverman_bandwidth(samples, SilvermanRule::Scaled),
            KdePolicy::SilvermanClassical => silverman_bandwidth(samples, SilvermanRule::Classical),
            KdePolicy::Fixed(h) => Ok(h),
        }
    }

    /// Fits and scores both estimators on one effect sample.
    pub fn score(&self, r: usize, sample: &EffectSample) -> Result<(ReplicateRecord, Curves)> {
        let obs = &sample.observed;
        let m = self.choose_m(obs)?;
        let h = self.choose_h(obs)?;
        let bern = fit_bernstein(obs, m)?;
        let kde = fit_kde(obs, h)?;
        let fb = bern.eval_many(&self.xs);
        let fk = kde.eval_many(&self.xs);
        let sup = |f: &dyn Fn(f64) -> f64| {
            self.sup_xs
                .iter()
                .zip(&self.sup_truth)
                .map(|(&x, t)| (f(x) - t).abs())
                .fold(0.0, f64::max)
        };
        let sup_b = sup(&|x| bern.eval(x));
        let sup_k = sup(&|x| kde.eval(x));
        let pick = |v: &[f64]| BOUNDARY_POINTS.map(|p| v[self.xs.iter().position(|&x| x == p).expect("boundary point on grid")]);
        let effect_mse = stats::mean(
            &obs.iter().zip(&sample.truth).map(|(o, t)| (o - t).powi(2)).collect::<Vec<_>>(),
        );
        for (v, who) in [(&fb, "Bernstein"), (&fk, "kernel")] {
            if let Some(i) = v.iter().position(|y| !y.is_finite()) {
                return Err(Error::Domain(format!("{who} estimate is not finite at x = {}", self.xs[i])));
            }
        }
        let record = ReplicateRecord {
            replicate: r,
            m,
            h,
            bernstein: Errors::score(&self.xs, &self.truth, &fb, sup_b),
            kde: Errors::score(&self.xs, &self.truth, &fk, sup_k),
            boundary_bernstein: pick(&fb),
            boundary_kde: pick(&fk),
            effect_mse,
        };
        let curves = Curves {
            x: self.xs.clone(),
            truth: self.truth.clone(),
            bernstein: fb,
            kde: fk,
        };
        Ok((record, curves))
    }

    fn replicate(&self, r: usize, n: usize) -> Result<(ReplicateRecord, Curves)> {
        let sample = self.effects(r, n)?;
        self.score(r, &sample)
    }

    /// All replicates for `n` subjects, in parallel, reduced in replicate
    /// order.
    pub fn run_cell(&self, n: usize) -> Result<CellReport> {
        let mut config = self.config.clone();
        config.n_subjects = n;
        config.validate()?;
        let outcomes: Vec<Result<(ReplicateRecord, Curves)>> =
            (0..config.replicates).into_par_iter().map(|r| self.replicate(r, n)).collect();
        collect_cell(config, outcomes)
    }

    pub fn run(&self) -> Result<CellReport> {
        self.run_cell(self.config.n_subjects)
    }
}

fn collect_cell(config: ExperimentConfig, outcomes: Vec<Result<(ReplicateRecord, Curves)>>) -> Result<CellReport> {
    let total = outcomes.len();
    let mut records = Vec::with_capacity(total);
    let mut curves = None;
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok((rec, c)) => {
                if curves.is_none() {
                    curves = Some(c);
                }
                records.push(rec);
            }
            Err(e) => failures.push(e),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_RATE * total as f64 || records.is_empty() {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
            first: failures.first().map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    Ok(CellReport {
        density: config.density.to_string(),
        n_subjects: config.n_subjects,
        failures: failures.len(),
        config,
        records,
        curves,
    })
}

/// Runs one configuration.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport> {
    Ok(MetricsReport {
        cells: vec![Experiment::new(config)?.run()?],
    })
}

/// Runs every `(density, n)` pair, sharing the set-up across sample sizes.
pub fn run_study(base: &ExperimentConfig, densities: &[EffectDensity], sizes: &[usize]) -> Result<MetricsReport> {
    let mut report = MetricsReport::default();
    for d in densities {
        let mut config = base.clone();
        config.density = d.clone();
        let exp = Experiment::new(&config)?;
        for &n in sizes {
            report.cells.push(exp.run_cell(n)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: EffectsMode) -> ExperimentConfig {
        ExperimentConfig {
            density: EffectDensity::named("beta_3_5").unwrap(),
            horizon: 20.0,
            steps: 100,
            n_subjects: 30,
            replicates: 6,
            effects_mode: mode,
            seed: 42,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn grid_contains_boundary_points() {
        assert_eq!(evaluation_grid(101).len(), 101);
        let xs = evaluation_grid(11);
        assert_eq!(xs.len(), 13);
        for p in BOUNDARY_POINTS {
            assert!(xs.contains(&p));
        }
        assert!((trapezoid(&xs, &vec![1.0; xs.len()]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn truth_against_itself_scores_zero() {
        let xs = evaluation_grid(11);
        let t: Vec<f64> = xs.iter().map(|x| 2.0 * (1.0 - x)).collect();
        assert_eq!(Errors::score(&xs, &t, &t, 0.0), Errors::default());
    }

    #[test]
    fn pipeline_is_deterministic() {
        let cfg = small(EffectsMode::Estimated);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        let cell = &a.cells[0];
        assert_eq!(cell.records.len(), 6);
        assert!(cell.records.iter().all(|r| r.bernstein.ise >= 0.0 && r.kde.mae >= 0.0));
        assert!(cell.records.iter().all(|r| r.effect_mse > 0.0));
    }

    #[test]
    fn vanishing_noise_matches_known_effects() {
        let mut noiseless = small(EffectsMode::Estimated);
        noiseless.sigma = 1e-8;
        let known = small(EffectsMode::Known);
        let a = run_experiment(&noiseless).unwrap().cells.remove(0);
        let b = run_experiment(&known).unwrap().cells.remove(0);
        for est in ESTIMATORS {
            for met in ["ise", "mse", "mae"] {
                let (x, y) = (a.summary(est, met).0, b.summary(est, met).0);
                assert!((x - y).abs() < 1e-3, "{est} {met}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn permuting_subjects_leaves_metrics_unchanged() {
        let exp = Experiment::new(&small(EffectsMode::Estimated)).unwrap();
        let s = exp.effects(0, 30).unwrap();
        let (a, _) = exp.score(0, &s).unwrap();
        let order: Vec<usize> = (0..30).rev().collect();
        let permuted = EffectSample {
            truth: order.iter().map(|&j| s.truth[j]).collect(),
            observed: order.iter().map(|&j| s.observed[j]).collect(),
        };
        let (b, _) = exp.score(0, &permuted).unwrap();
        assert_eq!(a.m, b.m);
        assert_eq!(a.bernstein, b.bernstein);
        assert!((a.kde.ise - b.kde.ise).abs() < 1e-12);
    }

    #[test]
    fn policies_parse() {
        assert_eq!("fixed:7".parse::<MPolicy>().unwrap(), MPolicy::Fixed(7));
        assert_eq!("lscv".parse::<MPolicy>().unwrap(), MPolicy::Lscv);
        assert_eq!("fixed:0.1".parse::<KdePolicy>().unwrap(), KdePolicy::Fixed(0.1));
        assert!("fixed:x".parse::<MPolicy>().is_err());
        assert_eq!(MPolicy::TheoreticalOpt.to_string().parse::<MPolicy>().unwrap(), MPolicy::TheoreticalOpt);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = small(EffectsMode::Known);
        c.hurst = 0.4;
        assert!(matches!(run_experiment(&c), Err(Error::Config(_))));
        let mut c = small(EffectsMode::Known);
        c.m_policy = MPolicy::Fixed(0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn too_many_failures_abort() {
        let cfg = small(EffectsMode::Known);
        let outcomes: Vec<Result<(ReplicateRecord, Curves)>> = (0..10)
            .map(|_| Err(Error::Domain("boom".into())))
            .collect();
        assert!(matches!(collect_cell(cfg, outcomes), Err(Error::TooManyFailures { failed: 10, .. })));
    }
}
