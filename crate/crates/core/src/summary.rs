//! Posterior summaries: normal form when the marginal passes the normality
//! test, otherwise an equal-tailed interval plus the histogram mode.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{ess_and_mcse, even_subsample, normality_test, DiagnosticsError};

#[derive(Debug, Error, PartialEq)]
pub enum SummaryError {
    #[error("need at least 100 samples to summarise, got {0}")]
    TooFewSamples(usize),
    #[error("confidence level must lie in (0, 100), got {0}")]
    InvalidLevel(f64),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

pub const MIN_SUMMARY_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    /// Normality p-value threshold below which the interval form is used.
    pub threshold: f64,
    /// Confidence level in percent.
    pub ci_level: f64,
    /// Maximum number of evenly spaced draws handed to the normality test.
    pub normality_samples: usize,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            threshold: 0.001,
            ci_level: 95.0,
            normality_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SummaryForm {
    Normal {
        mu: f64,
        sigma: f64,
    },
    Interval {
        ci_level: f64,
        ci_low: f64,
        ci_high: f64,
        map_value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    #[serde(flatten)]
    pub form: SummaryForm,
    pub median: f64,
    pub normality_p: f64,
    pub threshold: f64,
    pub mcse_mean: f64,
    /// Decimal places that can be reported: `10^-decimals >= mcse_mean`.
    pub decimals: i32,
}

impl PosteriorSummary {
    pub fn is_normal(&self) -> bool {
        matches!(self.form, SummaryForm::Normal { .. })
    }

    /// Formats `v` at this summary's reportable precision.
    pub fn fmt_value(&self, v: f64) -> String {
        format_decimals(v, self.decimals)
    }

    /// Headline statement, e.g. `N(μ=50.02, σ=0.41)` or `MAP 3.1, 95% CI [2.7, 3.4]`.
    pub fn headline(&self) -> String {
        match &self.form {
            SummaryForm::Normal { mu, sigma } => {
                format!("N(μ={}, σ={})", self.fmt_value(*mu), self.fmt_value(*sigma))
            }
            SummaryForm::Interval {
                ci_level,
                ci_low,
                ci_high,
                map_value,
            } => format!(
                "MAP {}, {ci_level}% CI [{}, {}]",
                self.fmt_value(*map_value),
                self.fmt_value(*ci_low),
                self.fmt_value(*ci_high)
            ),
        }
    }
}

/// Largest decimal count whose resolution is no finer than `mcse`.
pub fn safe_decimals(mcse: f64) -> i32 {
    if !(mcse > 0.0) || !mcse.is_finite() {
        return 15;
    }
    let mut d = (-mcse.log10()).floor() as i32;
    while 10f64.powi(-d) < mcse {
        d -= 1;
    }
    while 10f64.powi(-(d + 1)) >= mcse {
        d += 1;
    }
    d.clamp(-300, 15)
}

/// Rounds to `decimals` places; negative values round to tens, hundreds, ….
pub fn format_decimals(v: f64, decimals: i32) -> String {
    if decimals >= 0 {
        format!("{:.*}", decimals as usize, v)
    } else {
        let unit = 10f64.powi(-decimals);
        format!("{:.0}", (v / unit).round() * unit)
    }
}

/// Quantile by linear interpolation between order statistics of sorted data
/// (`h = (N−1)p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Centre of the fullest histogram bin, with Freedman–Diaconis bin width.
/// Ties go to the lowest bin.
pub fn histogram_mode(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if hi == lo {
        return lo;
    }
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let bins = if width > 0.0 {
        (((hi - lo) / width).ceil() as usize).clamp(1, 100_000)
    } else {
        (n as f64).sqrt().ceil() as usize
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in sorted {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc })
        .0;
    lo + (best as f64 + 0.5) * width
}

/// Summarises one marginal posterior.
///
/// `tau` is the integrated autocorrelation time used for the MCSE.
pub fn summarize_parameter(
    name: &str,
    unit: &str,
    samples: &[f64],
    tau: f64,
    options: &SummaryOptions,
) -> Result<PosteriorSummary, SummaryError> {
    if samples.len() < MIN_SUMMARY_SAMPLES {
        return Err(SummaryError::TooFewSamples(samples.len()));
    }
    if !(options.ci_level > 0.0 && options.ci_level < 100.0) {
        return Err(SummaryError::InvalidLevel(options.ci_level));
    }
    let normality = normality_test(&even_subsample(samples, options.normality_samples))?;
    let mcse = ess_and_mcse(samples, tau).mcse_mean;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile_sorted(&sorted, 0.5);
    let form = if normality.p_value >= options.threshold {
        let n = samples.len() as f64;
        let mu = samples.iter().sum::<f64>() / n;
        let sigma = (samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        SummaryForm::Normal { mu, sigma }
    } else {
        let tail = (1.0 - options.ci_level / 100.0) / 2.0;
        SummaryForm::Interval {
            ci_level: options.ci_level,
            ci_low: quantile_sorted(&sorted, tail),
            ci_high: quantile_sorted(&sorted, 1.0 - tail),
            map_value: histogram_mode(&sorted),
        }
    };
    Ok(PosteriorSummary {
        name: name.to_string(),
        unit: unit.to_string(),
        form,
        median,
        normality_p: normality.p_value,
        threshold: options.threshold,
        mcse_mean: mcse,
        decimals: safe_decimals(mcse),
    })
}
