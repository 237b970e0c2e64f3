//! `reflbayes` command-line tool.
//!
//! Exit codes: 0 ok, 2 input error, 3 sampler failure, 4 convergence gate.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "reflbayes", version, about = "Bayesian analysis of specular reflectometry data")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior described by a config file.
    Fit(FitArgs),
    /// Convergence diagnostics and summaries for a chain.
    Diagnose(DiagnoseArgs),
    /// Write report.json, report.md and corner.svg for a fitted chain.
    Report(ReportArgs),
    /// Render a corner plot or an SLD profile as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: the config's report.output_dir].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// Normality p-value above which summaries take the normal form.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Credible interval level in percent.
    #[arg(long)]
    pub ci: Option<f64>,
    /// Burn-in steps to discard [default: the chain's planned burn-in].
    #[arg(long)]
    pub burn: Option<usize>,
    /// Exit with status 4 when any R-hat exceeds this.
    #[arg(long, default_value_t = 1.1)]
    pub rhat_max: f64,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub chain: PathBuf,
    /// Output directory [default: the config's report.output_dir].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub ci: Option<f64>,
    #[arg(long)]
    pub burn: Option<usize>,
    /// Also write the thinned chain next to the report.
    #[arg(long)]
    pub write_thinned: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PlotKind {
    Corner,
    Profile,
}

#[derive(Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// Chain for corner plots; for profiles, selects the posterior median.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// Config for profiles; for corner plots, supplies parameter units.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub burn: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse errors exit 2 and always end with the usage of the subcommand at
/// fault (clap leaves it out for e.g. invalid values).
fn parse() -> Result<Cli, ExitCode> {
    Cli::try_parse().map_err(|e| {
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
            e.exit();
        }
        let _ = e.print();
        if !e.render().to_string().contains("Usage:") {
            let mut cmd = Cli::command();
            cmd.build();
            let sub = std::env::args().skip(1).find(|a| cmd.find_subcommand(a).is_some());
            let usage = match sub {
                Some(name) => cmd.find_subcommand_mut(&name).expect("found above").render_usage(),
                None => cmd.render_usage(),
            };
            eprintln!("\n{usage}");
        }
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = match parse() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Report(a) => commands::report(&a),
        Command::Plot(a) => commands::plot(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
