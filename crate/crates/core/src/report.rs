//! The analysis report: a machine-readable JSON record plus a Markdown
//! rendering of the same content.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::BoundModel;
use crate::diagnostics::DiagnosticsReport;
use crate::likelihood::LikelihoodSpec;
use crate::priors::PriorSpec;
use crate::sampler::{ChainMeta, ThinRecord};
use crate::summary::{PosteriorSummary, SummaryForm, SummaryOptions};

pub const REPORT_FORMAT: &str = "reflbayes-report/1";

/// JSON schema the report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("cannot build report: {0}")]
    IncompleteInputs(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

impl Software {
    pub fn current() -> Self {
        Self {
            name: crate::NAME.to_string(),
            version: crate::PKG_VERSION.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRef {
    pub path: String,
    pub points: usize,
    pub uncertainty: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRefs {
    pub full: String,
    pub thinned: Option<String>,
}

/// One row of the prior table: parameter, constrained value, prior range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRow {
    pub name: String,
    pub unit: String,
    pub vary: bool,
    pub constrained_value: f64,
    pub prior: Option<PriorSpec>,
    pub prior_range: String,
    pub init_range: Option<[f64; 2]>,
}

impl PriorRow {
    /// `name/unit` as in a published prior table.
    pub fn label(&self) -> String {
        if self.unit.is_empty() {
            self.name.clone()
        } else {
            format!("{}/{}", self.name, self.unit)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    pub spec: LikelihoodSpec,
    pub description: String,
    pub package: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub algorithm: String,
    pub walkers: usize,
    pub steps: usize,
    pub stretch: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub acceptance_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_reset: Option<OutlierReset>,
}

/// Burn-in outlier reset as configured for the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierReset {
    pub gap: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub normality_test: String,
    pub normality_threshold: f64,
    pub normality_samples: usize,
    pub ci_level: f64,
    pub ci_method: String,
    pub quantile_method: String,
    pub map_estimator: String,
    pub summaries_from: String,
    pub autocorrelation: String,
    pub r_hat: String,
    pub mcse: String,
    pub kde_bandwidth: String,
    pub sld_unit: String,
}

impl Conventions {
    fn new(options: &SummaryOptions) -> Self {
        Self {
            normality_test: "D'Agostino-Pearson K^2 omnibus test, p-value from chi-squared with 2 degrees of freedom"
                .into(),
            normality_threshold: options.threshold,
            normality_samples: options.normality_samples,
            ci_level: options.ci_level,
            ci_method: "equal-tailed".into(),
            quantile_method: "linear interpolation between order statistics, h = (N-1)p".into(),
            map_estimator: "centre of the fullest histogram bin, Freedman-Diaconis bin width".into(),
            summaries_from: "pooled post-burn-in chain, unthinned".into(),
            autocorrelation: "FFT autocovariance averaged over walkers, Sokal window c = 5".into(),
            r_hat: "classic Gelman-Rubin, each walker treated as a chain".into(),
            mcse: "sample std / sqrt(N / tau)".into(),
            kde_bandwidth: "bandwidth = factor x sample standard deviation".into(),
            sld_unit: "10⁻⁶ Å⁻²".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub format: String,
    pub software: Software,
    /// The only field that differs between identical runs.
    pub generated_at: String,
    pub data: DataRef,
    pub chains: ChainRefs,
    pub prior_table: Vec<PriorRow>,
    pub likelihood: LikelihoodReport,
    pub sampler: SamplerReport,
    pub thinning: ThinRecord,
    pub diagnostics: DiagnosticsReport,
    pub summaries: Vec<PosteriorSummary>,
    pub conventions: Conventions,
}

/// Everything [`generate_report`] draws on. Optional fields exist so a
/// partially completed analysis is rejected rather than reported.
#[derive(Debug, Clone)]
pub struct ReportInputs<'a> {
    pub model: &'a BoundModel,
    pub likelihood: &'a LikelihoodSpec,
    pub chain_meta: Option<&'a ChainMeta>,
    pub burn_in: usize,
    pub outlier_reset: Option<OutlierReset>,
    pub thinning: Option<&'a ThinRecord>,
    pub diagnostics: Option<&'a DiagnosticsReport>,
    pub summaries: Option<&'a [PosteriorSummary]>,
    pub options: SummaryOptions,
    pub data_path: &'a str,
    pub data_points: usize,
    pub chain_path: &'a str,
    pub thinned_chain_path: Option<&'a str>,
    pub timestamp: &'a str,
}

pub fn prior_table(model: &BoundModel) -> Vec<PriorRow> {
    model
        .parameters()
        .iter()
        .map(|p| PriorRow {
            name: p.name.clone(),
            unit: p.unit.clone(),
            vary: p.vary,
            constrained_value: p.value,
            prior: p.prior.as_ref().and_then(|pr| pr.to_spec().ok()),
            prior_range: p.prior.as_ref().map_or_else(|| "constrained".to_string(), ToString::to_string),
            init_range: p.init_range.map(|(a, b)| [a, b]),
        })
        .collect()
}

pub fn generate_report(inputs: &ReportInputs<'_>) -> Result<AnalysisReport, ReportError> {
    let missing = |what: &str| ReportError::IncompleteInputs(format!("missing {what}"));
    let meta = inputs.chain_meta.ok_or_else(|| missing("chain metadata"))?;
    let diagnostics = inputs.diagnostics.ok_or_else(|| missing("diagnostics"))?;
    let summaries = inputs.summaries.ok_or_else(|| missing("posterior summaries"))?;
    let thinning = inputs.thinning.ok_or_else(|| missing("thinning record"))?;
    if meta.seed == 0 && meta.version.is_empty() {
        return Err(missing("seed and version"));
    }
    if meta.version.is_empty() {
        return Err(missing("software version in chain metadata"));
    }
    let free = inputs.model.free_names();
    if meta.names != free {
        return Err(ReportError::IncompleteInputs(format!(
            "chain columns {:?} do not match free parameters {free:?}",
            meta.names
        )));
    }
    let diag_names: Vec<&str> = diagnostics.parameters.iter().map(|d| d.name.as_str()).collect();
    let summary_names: Vec<&str> = summaries.iter().map(|s| s.name.as_str()).collect();
    for name in &free {
        if !diag_names.contains(&name.as_str()) {
            return Err(ReportError::IncompleteInputs(format!("no diagnostics for {name}")));
        }
        if !summary_names.contains(&name.as_str()) {
            return Err(ReportError::IncompleteInputs(format!("no summary for {name}")));
        }
    }
    Ok(AnalysisReport {
        format: REPORT_FORMAT.into(),
        software: Software::current(),
        generated_at: inputs.timestamp.to_string(),
        data: DataRef {
            path: inputs.data_path.to_string(),
            points: inputs.data_points,
            uncertainty: "sigma_R are absolute one-standard-deviation uncertainties".into(),
        },
        chains: ChainRefs {
            full: inputs.chain_path.to_string(),
            thinned: inputs.thinned_chain_path.map(str::to_string),
        },
        prior_table: prior_table(inputs.model),
        likelihood: LikelihoodReport {
            spec: inputs.likelihood.clone(),
            description: inputs.likelihood.description(),
            package: crate::NAME.into(),
            version: crate::PKG_VERSION.into(),
        },
        sampler: SamplerReport {
            algorithm: "affine-invariant ensemble sampler, stretch move, red-black half-ensemble updates".into(),
            walkers: meta.shape[0],
            steps: meta.shape[1] + meta.burn_in,
            stretch: meta.stretch,
            seed: meta.seed,
            burn_in: inputs.burn_in,
            acceptance_fraction: meta.acceptance_fraction,
            outlier_reset: inputs.outlier_reset,
        },
        thinning: thinning.clone(),
        diagnostics: diagnostics.clone(),
        summaries: summaries.to_vec(),
        conventions: Conventions::new(&inputs.options),
    })
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Markdown rendering. Posterior values are printed only to the number
    /// of decimals their Monte Carlo standard error supports.
    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(md, "# Bayesian reflectometry analysis\n");
        let _ = writeln!(
            md,
            "Produced by {} version {} ({}). Generated at {}.\n",
            self.software.name, self.software.version, self.format, self.generated_at
        );

        let _ = writeln!(md, "## Data\n");
        let _ = writeln!(md, "- File: `{}` ({} points)", self.data.path, self.data.points);
        let _ = writeln!(md, "- Uncertainties: {}\n", self.data.uncertainty);

        let _ = writeln!(md, "## Priors\n");
        let _ = writeln!(md, "| Parameter | Constrained Value | Prior Range |");
        let _ = writeln!(md, "|---|---|---|");
        for row in &self.prior_table {
            let _ = writeln!(md, "| {} | {:?} | {} |", row.label(), row.constrained_value, row.prior_range);
        }
        let inits: Vec<String> = self
            .prior_table
            .iter()
            .filter_map(|r| r.init_range.map(|[a, b]| format!("{} in [{a:?}, {b:?})", r.name)))
            .collect();
        if !inits.is_empty() {
            let _ = writeln!(md, "\nWalker initialisation ranges: {}.", inits.join(", "));
        }
        md.push('\n');

        let _ = writeln!(md, "## Likelihood\n");
        let _ = writeln!(md, "- {}", self.likelihood.description);
        let _ = writeln!(
            md,
            "- Spec: `{}`",
            serde_json::to_string(&self.likelihood.spec).expect("likelihood spec serialises")
        );
        let _ = writeln!(md, "- Package: {} version {}\n", self.likelihood.package, self.likelihood.version);

        let s = &self.sampler;
        let _ = writeln!(md, "## Sampling\n");
        let _ = writeln!(md, "- Algorithm: {}", s.algorithm);
        let _ = writeln!(md, "- Walkers: {}", s.walkers);
        let _ = writeln!(md, "- Steps per walker: {}", s.steps);
        let _ = writeln!(md, "- Stretch scale a: {:?}", s.stretch);
        let _ = writeln!(md, "- Random seed: {}", s.seed);
        let _ = writeln!(md, "- Burn-in discarded: {} steps per walker", s.burn_in);
        let _ = writeln!(md, "- Mean acceptance fraction: {:.3}", s.acceptance_fraction);
        if let Some(r) = s.outlier_reset {
            let _ = writeln!(
                md,
                "- Burn-in outlier reset: after step {}, walkers trailing the median log-posterior by more than {:?} moved onto other walkers",
                r.step, r.gap
            );
        }
        let t = &self.thinning;
        let taus: Vec<String> = t.tau.iter().map(|v| format!("{v:.1}")).collect();
        if t.applied {
            let _ = writeln!(
                md,
                "- Thinning: every {} steps (from tau = [{}])",
                t.interval,
                taus.join(", ")
            );
        } else {
            let _ = writeln!(md, "- Thinning: not applied (tau = [{}])", taus.join(", "));
        }
        let _ = writeln!(md, "- Full chain: `{}`", self.chains.full);
        if let Some(th) = &self.chains.thinned {
            let _ = writeln!(md, "- Thinned chain: `{th}`");
        }
        md.push('\n');

        let _ = writeln!(md, "## Convergence diagnostics\n");
        let _ = writeln!(
            md,
            "Pooled post-burn-in samples: {}. Recommended thinning interval: {}.\n",
            self.diagnostics.pooled_samples, self.diagnostics.thin_interval
        );
        let _ = writeln!(md, "| Parameter | tau | R-hat | ESS | MCSE (mean) | K^2 | p-value |");
        let _ = writeln!(md, "|---|---|---|---|---|---|---|");
        for d in &self.diagnostics.parameters {
            let _ = writeln!(
                md,
                "| {} | {:.1}{} | {:.4} | {:.0} | {:.2e} | {:.3} | {:.3e} |",
                d.name,
                d.tau,
                if d.tau_reliable { "" } else { " (chain < 50 tau)" },
                d.r_hat,
                d.ess,
                d.mcse_mean,
                d.normality.statistic,
                d.normality.p_value
            );
        }
        md.push('\n');

        let c = &self.conventions;
        let _ = writeln!(md, "## Posterior summaries\n");
        let _ = writeln!(
            md,
            "Normality: {} on {} evenly spaced draws; normal form reported when p >= {}. \
             Otherwise a {}% {} credible interval ({}) with the maximum-probability value ({}).\n",
            c.normality_test, c.normality_samples, c.normality_threshold, c.ci_level, c.ci_method, c.quantile_method, c.map_estimator
        );
        let _ = writeln!(md, "| Parameter | Form | Estimate | Uncertainty | Decimals | MCSE | p-value |");
        let _ = writeln!(md, "|---|---|---|---|---|---|---|");
        for sm in &self.summaries {
            let label = if sm.unit.is_empty() {
                sm.name.clone()
            } else {
                format!("{}/{}", sm.name, sm.unit)
            };
            let (form, estimate, spread) = match &sm.form {
                SummaryForm::Normal { mu, sigma } => ("normal", sm.fmt_value(*mu), sm.fmt_value(*sigma)),
                SummaryForm::Interval {
                    ci_level,
                    ci_low,
                    ci_high,
                    map_value,
                } => (
                    "interval",
                    sm.fmt_value(*map_value),
                    format!("{ci_level}% CI [{}, {}]", sm.fmt_value(*ci_low), sm.fmt_value(*ci_high)),
                ),
            };
            let _ = writeln!(
                md,
                "| {label} | {form} | {estimate} | {spread} | {} | {:.2e} | {:.3e} |",
                sm.decimals, sm.mcse_mean, sm.normality_p
            );
        }
        md
    }
}
