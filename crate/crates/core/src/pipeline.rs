//! End-to-end workflow: config → posterior → chain → diagnostics → report.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::chain_io::ChainIoError;
use crate::config::{resolve_path, ConfigError, RunConfig};
use crate::data::{load_curve, CurveFormat, DataError};
use crate::diagnostics::{diagnose, DiagnosticsError, DiagnosticsReport};
use crate::likelihood::{LikelihoodError, Posterior};
use crate::plot::corner_plot;
use crate::report::{generate_report, AnalysisReport, OutlierReset, ReportError, ReportInputs};
use crate::sampler::{init_walkers, reset_step, run_sampler, Chain, ChainError, Pooled, SamplerError, SamplerOutput, SamplerSettings, ThinRecord};
use crate::summary::{summarize_parameter, PosteriorSummary, SummaryError, SummaryOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    ChainIo(#[from] ChainIoError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("chain parameters {chain:?} do not match the model's free parameters {model:?}")]
    ChainModelMismatch { chain: Vec<String>, model: Vec<String> },
}

/// A posterior ready to sample.
#[derive(Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub base_dir: PathBuf,
    pub data_path: PathBuf,
    pub posterior: Posterior,
    pub settings: SamplerSettings,
    /// True when no seed was configured and one was generated.
    pub seed_generated: bool,
    pub options: SummaryOptions,
}

impl Prepared {
    pub fn units(&self) -> Vec<String> {
        self.posterior.model().free_parameters().iter().map(|p| p.unit.clone()).collect()
    }
}

pub fn prepare(config: RunConfig, base_dir: &Path, seed_override: Option<u64>) -> Result<Prepared, PipelineError> {
    let data_path = resolve_path(base_dir, &config.data, "data")?;
    let curve = load_curve(&data_path, CurveFormat::Auto)?;
    let model = config.bound_model(base_dir)?;
    let posterior = Posterior::new(model, curve, config.likelihood.clone())?;
    let (settings, seed_generated) = config.sampler_settings(posterior.dim(), seed_override)?;
    let options = config.summary_options()?;
    Ok(Prepared {
        config,
        base_dir: base_dir.to_path_buf(),
        data_path,
        posterior,
        settings,
        seed_generated,
        options,
    })
}

/// Initialises the walkers and runs the sampler; the returned chain is
/// complete (no burn-in removed).
pub fn fit(prep: &Prepared) -> Result<SamplerOutput, PipelineError> {
    let model = prep.posterior.model();
    let names = model.free_names();
    let ranges: Vec<Option<(f64, f64)>> = model.free_parameters().iter().map(|p| p.init_range).collect();
    let init = init_walkers(&names, prep.posterior.priors(), &ranges, prep.settings.walkers, prep.settings.seed)?;
    Ok(run_sampler(|x| prep.posterior.ln_prob(x), &names, &init, &prep.settings)?)
}

/// Post-processing of one chain.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// Steps removed from the start of every walker by this analysis.
    pub burn_in: usize,
    pub burnt: Chain,
    pub pooled: Pooled,
    pub diagnostics: DiagnosticsReport,
    pub thinning: ThinRecord,
    pub thinned: Option<Chain>,
    pub summaries: Vec<PosteriorSummary>,
    pub corner_svg: String,
}

/// Burns in, diagnoses, thins at `⌈max τ⌉` when the chain is long enough,
/// and summarises every parameter from the unthinned post-burn-in pool.
///
/// `burn` defaults to the chain's planned burn-in minus any already removed.
pub fn analyze(
    chain: &Chain,
    units: &[String],
    burn: Option<usize>,
    options: &SummaryOptions,
) -> Result<Analysis, PipelineError> {
    let meta = chain.meta();
    let burn_in = burn.unwrap_or_else(|| meta.planned_burn.saturating_sub(meta.burn_in));
    let burnt = chain.discard_burn_in(burn_in)?;
    let diagnostics = diagnose(&burnt, options.threshold, options.normality_samples)?;
    let taus = diagnostics.taus();
    let interval = diagnostics.thin_interval.max(1);
    let (thinned, thinning) = match burnt.thin(interval, &taus) {
        Ok(t) if interval > 1 => {
            let record = t.meta().thin.clone();
            (Some(t), record)
        }
        Ok(_) | Err(ChainError::IntervalTooLarge { .. }) => (
            None,
            ThinRecord {
                applied: false,
                interval,
                tau: taus.clone(),
            },
        ),
        Err(e) => return Err(e.into()),
    };
    let pooled = burnt.pooled();
    let summaries = burnt
        .names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let unit = units.get(j).map_or("", String::as_str);
            summarize_parameter(name, unit, &pooled.column(j), taus[j], options)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let unit_vec: Vec<String> = (0..burnt.dim()).map(|j| units.get(j).cloned().unwrap_or_default()).collect();
    let corner_svg = corner_plot(&pooled, burnt.names(), &unit_vec);
    Ok(Analysis {
        burn_in,
        burnt,
        pooled,
        diagnostics,
        thinning,
        thinned,
        summaries,
        corner_svg,
    })
}

/// Checks the chain was produced for this model.
pub fn check_chain_matches(prep: &Prepared, chain: &Chain) -> Result<(), PipelineError> {
    let model = prep.posterior.model().free_names();
    if chain.names() != model.as_slice() {
        return Err(PipelineError::ChainModelMismatch {
            chain: chain.names().to_vec(),
            model,
        });
    }
    Ok(())
}

/// Where the report's file references point.
#[derive(Debug, Clone, Default)]
pub struct ReportPaths {
    pub data: String,
    pub chain: String,
    pub thinned_chain: Option<String>,
}

pub fn build_report(
    prep: &Prepared,
    chain: &Chain,
    analysis: &Analysis,
    paths: &ReportPaths,
    timestamp: &str,
) -> Result<AnalysisReport, PipelineError> {
    check_chain_matches(prep, chain)?;
    let inputs = ReportInputs {
        model: prep.posterior.model(),
        likelihood: prep.posterior.likelihood(),
        chain_meta: Some(chain.meta()),
        burn_in: chain.meta().burn_in + analysis.burn_in,
        outlier_reset: reset_step(&prep.settings).map(|step| OutlierReset {
            gap: prep.settings.outlier_gap.expect("reset step implies a gap"),
            step,
        }),
        thinning: Some(&analysis.thinning),
        diagnostics: Some(&analysis.diagnostics),
        summaries: Some(&analysis.summaries),
        options: prep.options,
        data_path: &paths.data,
        data_points: prep.posterior.curve().len(),
        chain_path: &paths.chain,
        thinned_chain_path: paths.thinned_chain.as_deref(),
        timestamp,
    };
    Ok(generate_report(&inputs)?)
}

/// `path` relative to `base` when possible, for portable report references.
pub fn relative_to(path: &Path, base: &Path) -> String {
    let abs = |p: &Path| std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let (p, b) = (abs(path), abs(base));
    let pc: Vec<_> = p.components().collect();
    let bc: Vec<_> = b.components().collect();
    let common = pc.iter().zip(&bc).take_while(|(a, b)| a == b).count();
    if common == 0 {
        return p.display().to_string();
    }
    let mut rel = PathBuf::new();
    for _ in common..bc.len() {
        rel.push("..");
    }
    for c in &pc[common..] {
        rel.push(c);
    }
    rel.display().to_string()
}
