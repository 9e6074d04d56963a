use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use fracdens::checks;
use fracdens::density::{
    default_m_grid, fit_bernstein, fit_kde, lscv_select_m, silverman_bandwidth, write_density_csv, SilvermanRule,
};
use fracdens::experiment::{evaluation_grid, run_study, Curves, KdePolicy, MPolicy};
use fracdens::mle::{read_estimates_csv, write_estimates_csv, MolchanContext};
use fracdens::report::{emit_report, load_report, svg_curves, Format};
use fracdens::sde::{BundleSimulator, TrajectoryBundle};
use fracdens::theory::DensityProfile;
use fracdens::Error;

mod config;

use config::{ExperimentArgs, FileConfig, OutputArgs, StudyArgs};

/// Random-effect density estimation for fractional SDE models.
#[derive(Parser, Debug)]
#[command(name = "fracdens", version)]
struct Cli {
    /// TOML file with [experiment], [study] and [output] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a bundle of trajectories and write it as CSV plus a JSON sidecar.
    Simulate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Initial value of every trajectory.
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Estimate the random effect of every trajectory in a bundle.
    Estimate {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Fit the Bernstein and kernel estimators to an effects CSV.
    Density {
        #[arg(long)]
        effects: PathBuf,
        #[command(flatten)]
        exp: ExperimentArgs,
        /// CSV with x, f_true, f_bernstein, f_kde.
        #[arg(long, short)]
        output: PathBuf,
        /// Optional SVG overlay plot.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the Monte Carlo study and write the report.
    Experiment {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        study: StudyArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Render tables and plots from a saved JSON report.
    Tables {
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run the acceptance checks; exits with 3 if any fails.
    Check {
        /// Criteria to run, e.g. 1,2,5; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u8>>,
    },
}

fn simulate(exp: &ExperimentArgs, x0: f64, output: &Path) -> anyhow::Result<()> {
    let c = exp.resolve()?;
    let sim = BundleSimulator::new(&c.model()?, &c.grid()?, c.drift(), x0, c.fbm_method)?;
    let bundle = sim.simulate(&c.density, c.n_subjects, c.seed)?;
    bundle.save(output)?;
    println!("wrote {} trajectories to {}", bundle.n_subjects(), output.display());
    Ok(())
}

fn estimate(bundle: &Path, output: &Path) -> anyhow::Result<()> {
    let bundle = TrajectoryBundle::load(bundle)?;
    let est = MolchanContext::for_bundle(&bundle)?.estimate_all(&bundle.paths)?;
    write_estimates_csv(output, &est, bundle.true_effects.as_deref())?;
    println!("wrote {} estimates to {}", est.len(), output.display());
    Ok(())
}

fn density(effects: &Path, exp: &ExperimentArgs, output: &Path, svg: Option<&Path>) -> anyhow::Result<()> {
    let (samples, _) = read_estimates_csv(effects)?;
    let c = exp.resolve()?;
    let truth = exp.density.as_ref().map(|_| c.density.clone());
    let n = samples.len();
    let m = match c.m_policy {
        MPolicy::Lscv => lscv_select_m(&samples, &default_m_grid(n))?,
        MPolicy::Fixed(m) => m,
        MPolicy::TheoreticalOpt => {
            let d = truth
                .as_ref()
                .ok_or_else(|| Error::Config("m policy theoretical_opt needs --density".into()))?;
            DensityProfile::new(d)?.optimal_m(n)?.rounded()
        }
    };
    let h = match c.kde_policy {
        KdePolicy::SilvermanScaled => silverman_bandwidth(&samples, SilvermanRule::Scaled)?,
        KdePolicy::SilvermanClassical => silverman_bandwidth(&samples, SilvermanRule::Classical)?,
        KdePolicy::Fixed(h) => h,
    };
    let bern = fit_bernstein(&samples, m)?;
    let kde = fit_kde(&samples, h)?;
    let xs = evaluation_grid(c.eval_grid);
    let pdf = truth.as_ref().map(|d| move |x: f64| d.pdf(x));
    write_density_csv(output, &xs, pdf.as_ref().map(|f| f as &dyn Fn(f64) -> f64), &bern, &kde)?;
    println!("n = {n}, m = {m}, h = {h:.5}; wrote {}", output.display());
    if let Some(path) = svg {
        let curves = Curves {
            truth: truth.as_ref().map(|d| xs.iter().map(|&x| d.pdf(x)).collect()).unwrap_or_default(),
            bernstein: bern.eval_many(&xs),
            kde: kde.eval_many(&xs),
            x: xs,
        };
        std::fs::write(path, svg_curves(&curves, &format!("n = {n}, m = {m}, h = {h:.3}")))
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn experiment(exp: &ExperimentArgs, study: &StudyArgs, output: &OutputArgs) -> anyhow::Result<()> {
    let base = exp.resolve()?;
    let (densities, sizes) = study.resolve(&base)?;
    let formats = output.formats(&[Format::Csv, Format::Markdown, Format::SvgPlots, Format::Json])?;
    let report = run_study(&base, &densities, &sizes)?;
    for cell in &report.cells {
        let (b, bse) = cell.summary("bernstein", "ise");
        let (k, kse) = cell.summary("kde", "ise");
        println!(
            "{:<14} n = {:>5}: ISE Bernstein {b:.5} ({bse:.5}), kernel {k:.5} ({kse:.5})",
            cell.density, cell.n_subjects
        );
    }
    for path in emit_report(&report, &formats, &output.dir())? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn tables(report: &Path, output: &OutputArgs) -> anyhow::Result<()> {
    let report = load_report(report)?;
    let formats = output.formats(&[Format::Markdown, Format::Csv, Format::SvgPlots])?;
    for path in emit_report(&report, &formats, &output.dir())? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn check(criteria: Option<&[u8]>) -> anyhow::Result<bool> {
    let ids: Vec<u8> = match criteria {
        Some(ids) => ids.to_vec(),
        None => checks::CHECKS.iter().map(|c| c.0).collect(),
    };
    if let Some(bad) = ids.iter().find(|id| !checks::CHECKS.iter().any(|c| c.0 == **id)) {
        return Err(Error::Config(format!("no criterion {bad}; expected 1 to 12")).into());
    }
    let mut all = true;
    for id in ids {
        let outcome = checks::run(id);
        println!("{outcome}");
        all &= outcome.passed;
    }
    Ok(all)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate { exp, x0, output } => simulate(&exp.overlay(&file.experiment), x0, &output)?,
        Command::Estimate { bundle, output } => estimate(&bundle, &output)?,
        Command::Density {
            effects,
            exp,
            output,
            svg,
        } => density(&effects, &exp.overlay(&file.experiment), &output, svg.as_deref())?,
        Command::Experiment { exp, study, output } => experiment(
            &exp.overlay(&file.experiment),
            &study.overlay(&file.study),
            &output.overlay(&file.output),
        )?,
        Command::Tables { report, output } => tables(&report, &output.overlay(&file.output))?,
        Command::Check { criteria } => {
            if !check(criteria.as_deref())? {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// 2 for numerical failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_errors_map_to_two() {
        assert_eq!(exit_code(&Error::Unidentifiable { info: 0.0 }.into()), 2);
        assert_eq!(exit_code(&Error::Config("x".into()).into()), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 1);
    }
}
