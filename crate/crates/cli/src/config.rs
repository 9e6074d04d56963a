//! TOML configuration. Every key has a matching command-line flag, and a
//! flag given on the command line wins over the file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Deserialize;

use fracdens::effects::EffectDensity;
use fracdens::experiment::ExperimentConfig;
use fracdens::report::Format;
use fracdens::Error;

/// Keys of the `[experiment]` section.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentArgs {
    /// Effect density: beta_1_2, beta_3_5, beta_mix, truncnorm_mix or beta:<a>:<b>.
    #[arg(long)]
    pub density: Option<String>,
    /// Hurst index in (1/2, 1).
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Observation horizon T.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Grid steps N.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub n_subjects: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// lscv, theoretical_opt or fixed:<m>.
    #[arg(long)]
    pub m_policy: Option<String>,
    /// silverman_paper, silverman_classical or fixed:<h>.
    #[arg(long)]
    pub kde_policy: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Points of the evaluation grid on [0, 1].
    #[arg(long)]
    pub eval_grid: Option<usize>,
    /// estimated or known.
    #[arg(long)]
    pub effects_mode: Option<String>,
    /// Mean-reversion rate of the Vasicek drift.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Constant diffusion coefficient.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// cholesky or davies_harte.
    #[arg(long)]
    pub fbm_method: Option<String>,
}

/// Keys of the `[study]` section.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyArgs {
    /// Densities of the study; defaults to the single `density`.
    #[arg(long, value_delimiter = ',')]
    pub densities: Option<Vec<String>>,
    /// Sample sizes of the study; defaults to the single `n_subjects`.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

/// Keys of the `[output]` section.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Any of csv, markdown, svg_plots, json.
    #[arg(long, value_delimiter = ',')]
    pub formats: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub experiment: ExperimentArgs,
    #[serde(default)]
    pub study: StudyArgs,
    #[serde(default)]
    pub output: OutputArgs,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())).into())
    }
}

macro_rules! overlay {
    ($cli:expr, $file:expr; $($field:ident),*) => {
        $( if $cli.$field.is_none() { $cli.$field = $file.$field.clone(); } )*
    };
}

impl ExperimentArgs {
    pub fn overlay(mut self, file: &ExperimentArgs) -> Self {
        overlay!(self, file; density, hurst, horizon, steps, n_subjects, replicates, m_policy,
            kde_policy, seed, eval_grid, effects_mode, beta, sigma, fbm_method);
        self
    }

    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = ExperimentConfig::default();
        if let Some(v) = &self.density {
            c.density = v.parse()?;
        }
        c.hurst = self.hurst.unwrap_or(c.hurst);
        c.horizon = self.horizon.unwrap_or(c.horizon);
        c.steps = self.steps.unwrap_or(c.steps);
        c.n_subjects = self.n_subjects.unwrap_or(c.n_subjects);
        c.replicates = self.replicates.unwrap_or(c.replicates);
        if let Some(v) = &self.m_policy {
            c.m_policy = v.parse()?;
        }
        if let Some(v) = &self.kde_policy {
            c.kde_policy = v.parse()?;
        }
        c.seed = self.seed.unwrap_or(c.seed);
        c.eval_grid = self.eval_grid.unwrap_or(c.eval_grid);
        if let Some(v) = &self.effects_mode {
            c.effects_mode = v.parse()?;
        }
        c.beta = self.beta.unwrap_or(c.beta);
        c.sigma = self.sigma.unwrap_or(c.sigma);
        if let Some(v) = &self.fbm_method {
            c.fbm_method = v.parse()?;
        }
        c.validate()?;
        Ok(c)
    }
}

impl StudyArgs {
    pub fn overlay(mut self, file: &StudyArgs) -> Self {
        overlay!(self, file; densities, sizes);
        self
    }

    pub fn resolve(&self, base: &ExperimentConfig) -> anyhow::Result<(Vec<EffectDensity>, Vec<usize>)> {
        let densities = match &self.densities {
            Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<_>, Error>>()?,
            None => vec![base.density.clone()],
        };
        let sizes = self.sizes.clone().unwrap_or_else(|| vec![base.n_subjects]);
        if densities.is_empty() || sizes.is_empty() {
            return Err(Error::Config("a study needs at least one density and one sample size".into()).into());
        }
        Ok((densities, sizes))
    }
}

impl OutputArgs {
    pub fn overlay(mut self, file: &OutputArgs) -> Self {
        overlay!(self, file; out, formats);
        self
    }

    pub fn dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn formats(&self, default: &[Format]) -> anyhow::Result<Vec<Format>> {
        match &self.formats {
            None => Ok(default.to_vec()),
            Some(names) => names.iter().map(|n| parse_format(n)).collect(),
        }
    }
}

fn parse_format(name: &str) -> anyhow::Result<Format> {
    Ok(match name {
        "csv" => Format::Csv,
        "markdown" | "md" => Format::Markdown,
        "svg_plots" | "svg" => Format::SvgPlots,
        "json" => Format::Json,
        other => {
            return Err(
                Error::Config(format!("output format {other:?}: expected csv, markdown, svg_plots or json")).into(),
            )
        }
    })
}
