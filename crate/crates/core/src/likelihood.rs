//! χ², Gaussian and Poisson log-likelihoods, and the unnormalised log-posterior.

use std::f64::consts::{LN_10, PI};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::data::{BoundModel, DataError, ReflectivityCurve};
use crate::kernel::{self, QGrid};
use crate::priors::Prior;

#[derive(Debug, Error, PartialEq)]
pub enum LikelihoodError {
    #[error("log transform needs positive reflectivity (point {index})")]
    NonPositiveReflectivity { index: usize },
    #[error("length mismatch: {expected} data points, {found} model values")]
    LengthMismatch { expected: usize, found: usize },
    #[error("Poisson rate must be > 0 (point {index})")]
    NonPositiveRate { index: usize },
    #[error("Poisson likelihood needs a counts column in the data")]
    MissingCounts,
    #[error("Poisson likelihood needs an exposure map")]
    MissingExposure,
    #[error("Poisson likelihood only supports the linear transform")]
    TransformNotSupported,
    #[error("expected {expected} free values, got {found}")]
    WrongDimension { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] DataError),
}

/// Data transform applied before comparing measured and modelled reflectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Transform {
    #[default]
    #[serde(rename = "linear")]
    Linear,
    /// log₁₀ R
    #[serde(rename = "logR")]
    LogR,
    /// R·q⁴
    #[serde(rename = "Rq4")]
    Rq4,
}

impl Transform {
    /// Transformed value and first-order propagated uncertainty.
    fn apply(self, q: f64, r: f64, sigma: f64, index: usize) -> Result<(f64, f64), LikelihoodError> {
        Ok(match self {
            Transform::Linear => (r, sigma),
            Transform::LogR => {
                if !(r > 0.0) {
                    return Err(LikelihoodError::NonPositiveReflectivity { index });
                }
                (r.log10(), sigma / (r * LN_10))
            }
            Transform::Rq4 => {
                let q4 = q.powi(4);
                (r * q4, sigma * q4)
            }
        })
    }

    fn model(self, q: f64, rm: f64, index: usize) -> Result<f64, LikelihoodError> {
        Ok(match self {
            Transform::Linear => rm,
            Transform::LogR => {
                if !(rm > 0.0) {
                    return Err(LikelihoodError::NonPositiveReflectivity { index });
                }
                rm.log10()
            }
            Transform::Rq4 => rm * q.powi(4),
        })
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Linear => "R",
            Transform::LogR => "log10(R), sigma propagated as sigma_R/(R ln 10)",
            Transform::Rq4 => "R·q^4, sigma propagated as sigma_R·q^4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodKind {
    #[default]
    Gaussian,
    Poisson,
}

/// Expected counts per unit reflectivity, scalar or one value per q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exposure {
    Uniform(f64),
    PerPoint(Vec<f64>),
}

impl Exposure {
    fn at(&self, i: usize) -> f64 {
        match self {
            Exposure::Uniform(v) => *v,
            Exposure::PerPoint(v) => v[i],
        }
    }
}

/// How the likelihood is computed: `{"kind":"gaussian","transform":"logR"}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodSpec {
    #[serde(default)]
    pub kind: LikelihoodKind,
    #[serde(default)]
    pub transform: Transform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure: Option<Exposure>,
    /// Free-form provenance note; appended to [`LikelihoodSpec::description`].
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
}

impl LikelihoodSpec {
    pub fn gaussian(transform: Transform) -> Self {
        Self {
            kind: LikelihoodKind::Gaussian,
            transform,
            ..Self::default()
        }
    }

    pub fn poisson(exposure: Exposure) -> Self {
        Self {
            kind: LikelihoodKind::Poisson,
            transform: Transform::Linear,
            exposure: Some(exposure),
            label: String::new(),
        }
    }

    pub fn validate(&self, curve: &ReflectivityCurve) -> Result<(), LikelihoodError> {
        if self.kind == LikelihoodKind::Poisson {
            if self.transform != Transform::Linear {
                return Err(LikelihoodError::TransformNotSupported);
            }
            if curve.counts().is_none() {
                return Err(LikelihoodError::MissingCounts);
            }
            match &self.exposure {
                None => return Err(LikelihoodError::MissingExposure),
                Some(Exposure::PerPoint(v)) if v.len() != curve.len() => {
                    return Err(LikelihoodError::LengthMismatch {
                        expected: curve.len(),
                        found: v.len(),
                    })
                }
                _ => {}
            }
        } else if self.transform == Transform::LogR {
            if let Some(index) = curve.r().iter().position(|&r| !(r > 0.0)) {
                return Err(LikelihoodError::NonPositiveReflectivity { index });
            }
        }
        Ok(())
    }

    /// The human-readable statement of the likelihood written into reports.
    pub fn description(&self) -> String {
        let base = match self.kind {
            LikelihoodKind::Gaussian => format!(
                "Gaussian: ln L = -1/2 [chi^2 + sum ln(2 pi sigma_T^2)] on T = {}; sigma_R are absolute 1-sigma uncertainties",
                self.transform
            ),
            LikelihoodKind::Poisson => {
                let exposure = match &self.exposure {
                    Some(Exposure::Uniform(v)) => format!("{v:?}"),
                    Some(Exposure::PerPoint(_)) => "per-point map".into(),
                    None => "unset".into(),
                };
                format!("Poisson: ln L = sum[k ln(lambda) - lambda - ln k!], lambda = R_m x exposure ({exposure})")
            }
        };
        if self.label.is_empty() {
            base
        } else {
            format!("{base}; {}", self.label)
        }
    }
}

fn check_len(curve: &ReflectivityCurve, model_r: &[f64]) -> Result<(), LikelihoodError> {
    if curve.len() != model_r.len() {
        return Err(LikelihoodError::LengthMismatch {
            expected: curve.len(),
            found: model_r.len(),
        });
    }
    Ok(())
}

/// Per-point (residual², σ_T²) pairs after the transform.
fn transformed_terms<'a>(
    curve: &'a ReflectivityCurve,
    model_r: &'a [f64],
    transform: Transform,
) -> impl Iterator<Item = Result<(f64, f64), LikelihoodError>> + 'a {
    (0..curve.len()).map(move |i| {
        let q = curve.q()[i];
        let (t, s) = transform.apply(q, curve.r()[i], curve.sigma_r()[i], i)?;
        let tm = transform.model(q, model_r[i], i)?;
        let z = (t - tm) / s;
        Ok((z * z, s * s))
    })
}

pub fn chi_squared(curve: &ReflectivityCurve, model_r: &[f64], transform: Transform) -> Result<f64, LikelihoodError> {
    check_len(curve, model_r)?;
    transformed_terms(curve, model_r, transform).try_fold(0.0, |acc, t| Ok(acc + t?.0))
}

/// `-½ (χ² + Σ ln 2πσ_T²)`.
pub fn log_likelihood_gaussian(
    curve: &ReflectivityCurve,
    model_r: &[f64],
    transform: Transform,
) -> Result<f64, LikelihoodError> {
    check_len(curve, model_r)?;
    let (chi2, norm) = transformed_terms(curve, model_r, transform).try_fold((0.0, 0.0), |(c, n), t| {
        let (z2, s2) = t?;
        Ok::<_, LikelihoodError>((c + z2, n + (2.0 * PI * s2).ln()))
    })?;
    Ok(-0.5 * (chi2 + norm))
}

/// `Σ [k ln λ − λ − ln k!]` with `λ = R_m × exposure`.
pub fn log_likelihood_poisson(
    curve: &ReflectivityCurve,
    model_r: &[f64],
    exposure: &Exposure,
) -> Result<f64, LikelihoodError> {
    check_len(curve, model_r)?;
    let counts = curve.counts().ok_or(LikelihoodError::MissingCounts)?;
    let mut total = 0.0;
    for (i, (&k, &rm)) in counts.iter().zip(model_r).enumerate() {
        total += poisson_term(k, rm * exposure.at(i)).ok_or(LikelihoodError::NonPositiveRate { index: i })?;
    }
    Ok(total)
}

/// One Poisson log-probability term; `None` when the rate is not positive.
pub fn poisson_term(k: f64, lambda: f64) -> Option<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return None;
    }
    let k_ln_lambda = if k == 0.0 { 0.0 } else { k * lambda.ln() };
    Some(k_ln_lambda - lambda - ln_gamma(k + 1.0))
}

/// Unnormalised log-posterior over the free parameters of a bound model.
///
/// Counts kernel evaluations so callers can confirm that out-of-support
/// points never reach the kernel.
#[derive(Debug)]
pub struct Posterior {
    model: BoundModel,
    curve: ReflectivityCurve,
    q: QGrid,
    likelihood: LikelihoodSpec,
    priors: Vec<Prior>,
    kernel_calls: AtomicU64,
}

impl Posterior {
    pub fn new(model: BoundModel, curve: ReflectivityCurve, likelihood: LikelihoodSpec) -> Result<Self, LikelihoodError> {
        likelihood.validate(&curve)?;
        model.template().validate()?;
        let q = QGrid::new(curve.q().to_vec())?;
        let priors = model
            .free_parameters()
            .iter()
            .map(|p| p.prior.clone().expect("free parameters carry priors"))
            .collect();
        Ok(Self {
            model,
            curve,
            q,
            likelihood,
            priors,
            kernel_calls: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.priors.len()
    }

    pub fn model(&self) -> &BoundModel {
        &self.model
    }

    pub fn curve(&self) -> &ReflectivityCurve {
        &self.curve
    }

    pub fn likelihood(&self) -> &LikelihoodSpec {
        &self.likelihood
    }

    pub fn priors(&self) -> &[Prior] {
        &self.priors
    }

    pub fn kernel_calls(&self) -> u64 {
        self.kernel_calls.load(Ordering::Relaxed)
    }

    pub fn log_prior(&self, x: &[f64]) -> f64 {
        self.priors.iter().zip(x).map(|(p, &v)| p.log_pdf(v)).sum()
    }

    pub fn model_reflectivity(&self, x: &[f64]) -> Result<Vec<f64>, LikelihoodError> {
        let model = self.model.model_at(x)?;
        self.kernel_calls.fetch_add(1, Ordering::Relaxed);
        Ok(kernel::compute_reflectivity(&model, &self.q)?)
    }

    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64, LikelihoodError> {
        let model_r = self.model_reflectivity(x)?;
        match self.likelihood.kind {
            LikelihoodKind::Gaussian => log_likelihood_gaussian(&self.curve, &model_r, self.likelihood.transform),
            LikelihoodKind::Poisson => log_likelihood_poisson(
                &self.curve,
                &model_r,
                self.likelihood.exposure.as_ref().ok_or(LikelihoodError::MissingExposure)?,
            ),
        }
    }

    /// `Σ ln p(x_i) + ln L(x)`; returns `-inf` without touching the kernel
    /// when any prior vanishes.
    pub fn log_posterior(&self, x: &[f64]) -> Result<f64, LikelihoodError> {
        if x.len() != self.dim() {
            return Err(LikelihoodError::WrongDimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let lp = self.log_prior(x);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        Ok(lp + self.log_likelihood(x)?)
    }

    /// Sampler-facing form: parameter vectors the model cannot evaluate
    /// (invalid geometry, non-positive model reflectivity under a log
    /// transform) have zero posterior probability.
    pub fn ln_prob(&self, x: &[f64]) -> f64 {
        match self.log_posterior(x) {
            Ok(v) if v.is_nan() => f64::NEG_INFINITY,
            Ok(v) => v,
            Err(_) => f64::NEG_INFINITY,
        }
    }
}
