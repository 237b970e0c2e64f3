use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use reflbayes::chain_io::{read_chain, write_chain, ChainIoError};
use reflbayes::config::{ConfigError, RunConfig};
use reflbayes::diagnostics::DiagnosticsReport;
use reflbayes::pipeline::{analyze, build_report, fit as run_fit, prepare, relative_to, PipelineError, ReportPaths};
use reflbayes::plot::{corner_plot, line_plot, LinePlot};
use reflbayes::sampler::{burn_and_pool, ThinRecord};
use reflbayes::summary::{quantile_sorted, PosteriorSummary, SummaryOptions};
use reflbayes::{profile_depths, sld_profile, BoundModel, Chain};
use serde::Serialize;

use crate::{DiagnoseArgs, FitArgs, PlotArgs, PlotKind, ReportArgs};

pub const CHAIN_FILE: &str = "chain.reflchain";
pub const THINNED_FILE: &str = "chain.thinned.reflchain";

#[derive(Debug)]
pub enum Failure {
    Input(String),
    Sampler(String),
    Gate(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Sampler(_) => 3,
            Failure::Gate(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Sampler(m) | Failure::Gate(m) => m,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Sampler(_) => Failure::Sampler(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn chain_error(path: &Path, e: ChainIoError) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display())))
}

fn load(path: &Path) -> Result<(RunConfig, PathBuf), Failure> {
    Ok(RunConfig::load(path)?)
}

fn summary_options(base: SummaryOptions, threshold: Option<f64>, ci: Option<f64>) -> Result<SummaryOptions, Failure> {
    let mut o = base;
    if let Some(t) = threshold {
        if !(t > 0.0 && t < 1.0) {
            return Err(Failure::Input(format!("--threshold must lie in (0, 1), got {t}")));
        }
        o.threshold = t;
    }
    if let Some(c) = ci {
        if !(c > 0.0 && c < 100.0) {
            return Err(Failure::Input(format!("--ci must lie in (0, 100), got {c}")));
        }
        o.ci_level = c;
    }
    Ok(o)
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn fit(args: &FitArgs) -> Result<(), Failure> {
    let (cfg, base) = load(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| base.join(&cfg.report.output_dir));
    let prep = prepare(cfg, &base, args.seed)?;
    let s = &prep.settings;
    if prep.seed_generated {
        eprintln!("no seed configured; generated seed {} (recorded in the chain)", s.seed);
    }
    log::info!("sampling {} parameters with {} walkers for {} steps", prep.posterior.dim(), s.walkers, s.steps);
    let output = run_fit(&prep)?;
    create_dir(&out)?;
    let chain_path = out.join(CHAIN_FILE);
    write_chain(&output.chain, &chain_path).map_err(|e| chain_error(&chain_path, e))?;

    let best = (0..output.log_prob.len())
        .max_by(|&a, &b| output.log_prob[a].total_cmp(&output.log_prob[b]))
        .expect("non-empty chain");
    let chain = &output.chain;
    let best_pos = chain.position(best / chain.steps(), best % chain.steps());
    let mut log = String::new();
    let _ = writeln!(log, "{}", reflbayes::VERSION);
    let _ = writeln!(log, "config: {}", args.config.display());
    let _ = writeln!(log, "data: {}", prep.data_path.display());
    let _ = writeln!(log, "seed: {}{}", s.seed, if prep.seed_generated { " (generated)" } else { "" });
    let _ = writeln!(log, "walkers: {}", s.walkers);
    let _ = writeln!(log, "steps: {}", s.steps);
    let _ = writeln!(log, "planned burn-in: {}", s.burn);
    let _ = writeln!(log, "stretch: {:?}", s.stretch);
    let _ = writeln!(log, "acceptance fraction: {:.4}", output.acceptance_fraction());
    let _ = writeln!(log, "best log-posterior: {:?}", output.best_log_prob());
    let best_str: Vec<String> = chain.names().iter().zip(best_pos).map(|(n, v)| format!("{n}={v:?}")).collect();
    let _ = writeln!(log, "best position: {}", best_str.join(", "));
    if !output.reset_walkers.is_empty() {
        let _ = writeln!(log, "burn-in outlier reset moved walkers {:?}", output.reset_walkers);
    }
    for w in &output.warnings {
        let _ = writeln!(log, "warning: {w}");
    }
    let _ = writeln!(log, "chain: {}", chain_path.display());
    write_file(&out.join("fit.log"), &log)?;

    println!("wrote {}", chain_path.display());
    println!(
        "acceptance fraction {:.3}, best log-posterior {:.3}",
        output.acceptance_fraction(),
        output.best_log_prob()
    );
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseOutput<'a> {
    software: &'a str,
    chain: String,
    burn_in: usize,
    r_hat_max: f64,
    converged: bool,
    diagnostics: &'a DiagnosticsReport,
    thinning: &'a ThinRecord,
    summaries: &'a [PosteriorSummary],
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<(), Failure> {
    let chain = read_chain(&args.chain).map_err(|e| chain_error(&args.chain, e))?;
    let options = summary_options(SummaryOptions::default(), args.threshold, args.ci)?;
    let analysis = analyze(&chain, &[], args.burn, &options)?;
    let worst = analysis.diagnostics.max_r_hat();
    let converged = worst <= args.rhat_max;
    let doc = DiagnoseOutput {
        software: reflbayes::VERSION,
        chain: args.chain.display().to_string(),
        burn_in: chain.meta().burn_in + analysis.burn_in,
        r_hat_max: args.rhat_max,
        converged,
        diagnostics: &analysis.diagnostics,
        thinning: &analysis.thinning,
        summaries: &analysis.summaries,
    };
    let mut json = serde_json::to_string_pretty(&doc).expect("diagnostics serialise");
    json.push('\n');
    match &args.out {
        Some(path) => write_file(path, &json)?,
        None => print!("{json}"),
    }
    if !converged {
        return Err(Failure::Gate(format!("max R-hat {worst:.4} exceeds {}", args.rhat_max)));
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<(), Failure> {
    let (cfg, base) = load(&args.config)?;
    let out = args.out.clone().unwrap_or_else(|| base.join(&cfg.report.output_dir));
    let mut prep = prepare(cfg, &base, None)?;
    prep.options = summary_options(prep.options, args.threshold, args.ci)?;
    let chain = read_chain(&args.chain).map_err(|e| chain_error(&args.chain, e))?;
    let analysis = analyze(&chain, &prep.units(), args.burn, &prep.options)?;
    create_dir(&out)?;
    let thinned_chain = match (&analysis.thinned, args.write_thinned) {
        (Some(t), true) => {
            let path = out.join(THINNED_FILE);
            write_chain(t, &path).map_err(|e| chain_error(&path, e))?;
            Some(relative_to(&path, &out))
        }
        (None, true) => {
            eprintln!("chain too short or too correlated to thin; no thinned chain written");
            None
        }
        _ => None,
    };
    let paths = ReportPaths {
        data: relative_to(&prep.data_path, &out),
        chain: relative_to(&args.chain, &out),
        thinned_chain,
    };
    let report = build_report(&prep, &chain, &analysis, &paths, &timestamp())?;
    write_file(&out.join("report.json"), &report.to_json())?;
    write_file(&out.join("report.md"), &report.to_markdown())?;
    write_file(&out.join("corner.svg"), &analysis.corner_svg)?;
    println!("wrote report.json, report.md and corner.svg to {}", out.display());
    Ok(())
}

fn bound_model(path: &Path) -> Result<BoundModel, Failure> {
    let (cfg, base) = load(path)?;
    Ok(cfg.bound_model(&base)?)
}

fn burnt_pool(chain: &Chain, burn: Option<usize>) -> Result<reflbayes::sampler::Pooled, Failure> {
    let meta = chain.meta();
    let burn = burn.unwrap_or_else(|| meta.planned_burn.saturating_sub(meta.burn_in));
    burn_and_pool(chain, burn)
        .map(|(_, p)| p)
        .map_err(|e| Failure::Input(e.to_string()))
}

pub fn plot(args: &PlotArgs) -> Result<(), Failure> {
    let svg = match args.kind {
        PlotKind::Corner => {
            let path = args
                .chain
                .as_ref()
                .ok_or_else(|| Failure::Input("--kind corner needs --chain".into()))?;
            let chain = read_chain(path).map_err(|e| chain_error(path, e))?;
            let pooled = burnt_pool(&chain, args.burn)?;
            let units: Vec<String> = match &args.config {
                Some(c) => {
                    let model = bound_model(c)?;
                    chain
                        .names()
                        .iter()
                        .map(|n| {
                            model
                                .free_parameters()
                                .iter()
                                .find(|p| &p.name == n)
                                .map(|p| p.unit.clone())
                                .unwrap_or_default()
                        })
                        .collect()
                }
                None => vec![String::new(); chain.dim()],
            };
            corner_plot(&pooled, chain.names(), &units)
        }
        PlotKind::Profile => {
            let cfg = args
                .config
                .as_ref()
                .ok_or_else(|| Failure::Input("--kind profile needs --config".into()))?;
            let bound = bound_model(cfg)?;
            let (model, title) = match &args.chain {
                Some(path) => {
                    let chain = read_chain(path).map_err(|e| chain_error(path, e))?;
                    if chain.names() != bound.free_names().as_slice() {
                        return Err(Failure::Input(format!(
                            "chain parameters {:?} do not match the model's free parameters {:?}",
                            chain.names(),
                            bound.free_names()
                        )));
                    }
                    let pooled = burnt_pool(&chain, args.burn)?;
                    let medians: Vec<f64> = (0..chain.dim())
                        .map(|j| {
                            let mut xs = pooled.column(j);
                            xs.sort_by(f64::total_cmp);
                            quantile_sorted(&xs, 0.5)
                        })
                        .collect();
                    let model = bound.model_at(&medians).map_err(|e| Failure::Input(e.to_string()))?;
                    (model, "SLD profile at the posterior median")
                }
                None => (bound.template().clone(), "SLD profile at the configured values"),
            };
            let z = profile_depths(&model, 400);
            let rho = sld_profile(&model, &z);
            let opts = LinePlot {
                title,
                x_label: "z / Å",
                y_label: "SLD / 10⁻⁶ Å⁻²",
                log_y: false,
            };
            line_plot(&opts, &z, &rho, None)
        }
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_file(&args.out, &svg)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use reflbayes::sampler::SamplerError;

    #[test]
    fn exit_codes() {
        let sampler: Failure = PipelineError::Sampler(SamplerError::NonFiniteInitialState { walker: 3 }).into();
        assert_eq!(sampler.code(), 3);
        let config: Failure = ConfigError::Json("x".into()).into();
        assert_eq!(config.code(), 2);
        assert_eq!(Failure::Gate("r".into()).code(), 4);
    }

    #[test]
    fn option_overrides_are_checked() {
        let base = SummaryOptions::default();
        assert_eq!(summary_options(base, Some(0.01), Some(68.0)).unwrap().ci_level, 68.0);
        assert!(summary_options(base, Some(1.5), None).is_err());
        assert!(summary_options(base, None, Some(100.0)).is_err());
    }
}
