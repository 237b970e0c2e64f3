//! Prior distributions: evaluation, sampling, and the tagged JSON form used
//! in configs and reports.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PriorError {
    #[error("uniform prior needs lower < upper (got [{lower}, {upper}))")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("normal prior needs sigma > 0 (got {0})")]
    NonPositiveSigma(f64),
    #[error("KDE prior needs at least 2 samples (got {0})")]
    TooFewSamples(usize),
    #[error("KDE samples are all equal; bandwidth would be zero")]
    DegenerateSamples,
    #[error("KDE bandwidth factor must be > 0 (got {0})")]
    NonPositiveBandwidth(f64),
    #[error("cannot draw from an improper prior")]
    ImproperPriorSample,
    #[error("KDE prior built from in-memory samples has no source file to serialise")]
    KdeWithoutSource,
    #[error("non-finite prior parameter")]
    NonFinite,
}

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Where a KDE prior's samples come from: a chain file and, for multi-column
/// chains, the column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeSource {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
}

/// Gaussian kernel density estimate over a fixed sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct KdePrior {
    samples: Arc<[f64]>,
    bandwidth_factor: f64,
    bandwidth: f64,
    source: Option<KdeSource>,
}

impl KdePrior {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth_factor(&self) -> f64 {
        self.bandwidth_factor
    }

    /// Kernel standard deviation: `bandwidth_factor × sample std (n−1)`.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn source(&self) -> Option<&KdeSource> {
        self.source.as_ref()
    }

    pub fn with_source(mut self, source: KdeSource) -> Self {
        self.source = Some(source);
        self
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        // log-sum-exp of the kernel exponents
        let exps = self.samples.iter().map(|&s| {
            let u = (x - s) / h;
            -0.5 * u * u
        });
        let max = exps.clone().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = exps.map(|e| (e - max).exp()).sum();
        max + sum.ln() - (self.samples.len() as f64 * h).ln() - LN_SQRT_2PI
    }
}

/// One-dimensional prior on a single parameter.
///
/// `Uniform` has support `[lower, upper)`. `HalfOpenLower` is improper: a
/// constant (log-density 0) above `lower`.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Uniform { lower: f64, upper: f64 },
    HalfOpenLower { lower: f64 },
    Normal { mu: f64, sigma: f64 },
    Kde(KdePrior),
}

impl Prior {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self, PriorError> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(PriorError::NonFinite);
        }
        if !(lower < upper) {
            return Err(PriorError::InvalidBounds { lower, upper });
        }
        Ok(Prior::Uniform { lower, upper })
    }

    pub fn half_open_lower(lower: f64) -> Result<Self, PriorError> {
        if !lower.is_finite() {
            return Err(PriorError::NonFinite);
        }
        Ok(Prior::HalfOpenLower { lower })
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self, PriorError> {
        if !mu.is_finite() || !sigma.is_finite() {
            return Err(PriorError::NonFinite);
        }
        if !(sigma > 0.0) {
            return Err(PriorError::NonPositiveSigma(sigma));
        }
        Ok(Prior::Normal { mu, sigma })
    }

    pub fn is_proper(&self) -> bool {
        !matches!(self, Prior::HalfOpenLower { .. })
    }

    /// Natural-log density; `-inf` outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        match self {
            Prior::Uniform { lower, upper } => {
                if x >= *lower && x < *upper {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::HalfOpenLower { lower } => {
                if x >= *lower {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Normal { mu, sigma } => {
                let u = (x - mu) / sigma;
                -0.5 * u * u - sigma.ln() - LN_SQRT_2PI
            }
            Prior::Kde(kde) => kde.log_pdf(x),
        }
    }

    /// Attaches a sample source; no-op for non-KDE priors.
    pub fn with_source(self, source: KdeSource) -> Self {
        match self {
            Prior::Kde(kde) => Prior::Kde(kde.with_source(source)),
            other => other,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Draws one value from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, PriorError> {
        match self {
            Prior::Uniform { lower, upper } => loop {
                let x = lower + (upper - lower) * rng.gen::<f64>();
                // rounding can land exactly on the open upper bound
                if x < *upper {
                    return Ok(x);
                }
            },
            Prior::HalfOpenLower { .. } => Err(PriorError::ImproperPriorSample),
            Prior::Normal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                Ok(mu + sigma * z)
            }
            Prior::Kde(kde) => {
                let i = rng.gen_range(0..kde.samples.len());
                let z: f64 = StandardNormal.sample(rng);
                Ok(kde.samples[i] + kde.bandwidth * z)
            }
        }
    }

    /// A finite interval holding essentially all of the prior's mass, used
    /// for numerical integration and plotting. `None` for improper priors.
    pub fn effective_range(&self) -> Option<(f64, f64)> {
        match self {
            Prior::Uniform { lower, upper } => Some((*lower, *upper)),
            Prior::HalfOpenLower { .. } => None,
            Prior::Normal { mu, sigma } => Some((mu - 10.0 * sigma, mu + 10.0 * sigma)),
            Prior::Kde(kde) => {
                let (lo, hi) = kde
                    .samples
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
                Some((lo - 10.0 * kde.bandwidth, hi + 10.0 * kde.bandwidth))
            }
        }
    }

    pub fn to_spec(&self) -> Result<PriorSpec, PriorError> {
        Ok(match self {
            Prior::Uniform { lower, upper } => PriorSpec::Uniform {
                lower: *lower,
                upper: *upper,
            },
            Prior::HalfOpenLower { lower } => PriorSpec::HalfOpenLower { lower: *lower },
            Prior::Normal { mu, sigma } => PriorSpec::Normal { mu: *mu, sigma: *sigma },
            Prior::Kde(kde) => {
                let src = kde.source.clone().ok_or(PriorError::KdeWithoutSource)?;
                PriorSpec::Kde {
                    source: src.path,
                    column: src.column,
                    bandwidth_factor: kde.bandwidth_factor,
                }
            }
        })
    }
}

/// Interval-style rendering used in prior tables, e.g. `[8.0, 16.0)`.
impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::Uniform { lower, upper } => write!(f, "[{lower:?}, {upper:?})"),
            Prior::HalfOpenLower { lower } => write!(f, "[{lower:?}, ∞)"),
            Prior::Normal { mu, sigma } => write!(f, "N(μ={mu:?}, σ={sigma:?})"),
            Prior::Kde(kde) => {
                let src = kde.source.as_ref().map_or("in-memory samples", |s| s.path.as_str());
                write!(
                    f,
                    "Gaussian KDE of {} samples from {src} (bandwidth factor {:?} × sample std)",
                    kde.samples.len(),
                    kde.bandwidth_factor
                )
            }
        }
    }
}

/// Serialised prior: `{"type":"uniform","lower":8.0,"upper":16.0}`.
///
/// KDE priors reference their sample file and never inline the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    Uniform {
        lower: f64,
        upper: f64,
    },
    HalfOpenLower {
        lower: f64,
    },
    Normal {
        mu: f64,
        sigma: f64,
    },
    Kde {
        source: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        column: Option<String>,
        bandwidth_factor: f64,
    },
}

impl PriorSpec {
    /// Builds the prior; `load_samples` supplies KDE samples from a source.
    pub fn resolve<E>(
        &self,
        load_samples: impl FnOnce(&KdeSource) -> Result<Vec<f64>, E>,
    ) -> Result<Prior, ResolveError<E>> {
        Ok(match self {
            PriorSpec::Uniform { lower, upper } => Prior::uniform(*lower, *upper)?,
            PriorSpec::HalfOpenLower { lower } => Prior::half_open_lower(*lower)?,
            PriorSpec::Normal { mu, sigma } => Prior::normal(*mu, *sigma)?,
            PriorSpec::Kde {
                source,
                column,
                bandwidth_factor,
            } => {
                let src = KdeSource {
                    path: source.clone(),
                    column: column.clone(),
                };
                let samples = load_samples(&src).map_err(ResolveError::Load)?;
                kde_from_chain(&samples, *bandwidth_factor)?.with_source(src)
            }
        })
    }
}

#[derive(Debug, Error)]
pub enum ResolveError<E> {
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error("could not load KDE samples: {0}")]
    Load(E),
}

/// Gaussian KDE prior with bandwidth `bandwidth_factor × std(samples)`.
pub fn kde_from_chain(samples: &[f64], bandwidth_factor: f64) -> Result<Prior, PriorError> {
    if samples.len() < 2 {
        return Err(PriorError::TooFewSamples(samples.len()));
    }
    if samples.iter().any(|s| !s.is_finite()) || !bandwidth_factor.is_finite() {
        return Err(PriorError::NonFinite);
    }
    if !(bandwidth_factor > 0.0) {
        return Err(PriorError::NonPositiveBandwidth(bandwidth_factor));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if samples.iter().all(|&s| s == samples[0]) || !(var > 0.0) {
        return Err(PriorError::DegenerateSamples);
    }
    Ok(Prior::Kde(KdePrior {
        samples: samples.into(),
        bandwidth_factor,
        bandwidth: bandwidth_factor * var.sqrt(),
        source: None,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn uniform_table_row() {
        let p = Prior::uniform(8.0, 16.0).unwrap();
        assert!((p.log_pdf(10.0) - (-2.0794415416798357)).abs() < 1e-15);
        assert_eq!(p.log_pdf(16.0), f64::NEG_INFINITY);
        assert_eq!(p.log_pdf(8.0), -(8.0f64).ln());
        assert_eq!(p.to_string(), "[8.0, 16.0)");
    }

    #[test]
    fn normal_peak_density() {
        let p = Prior::normal(2.9, 0.1).unwrap();
        let expected = 1.0 / (0.1 * (2.0 * PI).sqrt());
        assert!((p.log_pdf(2.9) - expected.ln()).abs() < 1e-14);
        assert!((p.pdf(2.9) - 3.9894228).abs() < 1e-7);
    }

    #[test]
    fn half_open_is_improper() {
        let p = Prior::half_open_lower(2.9).unwrap();
        assert_eq!(p.log_pdf(2.9), 0.0);
        assert_eq!(p.log_pdf(1e9), 0.0);
        assert_eq!(p.log_pdf(2.8999), f64::NEG_INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(p.sample(&mut rng), Err(PriorError::ImproperPriorSample));
        assert_eq!(p.to_string(), "[2.9, ∞)");
    }

    #[test]
    fn constructor_invariants() {
        assert!(Prior::uniform(1.0, 1.0).is_err());
        assert!(Prior::normal(0.0, 0.0).is_err());
        assert_eq!(kde_from_chain(&[1.0], 0.1).unwrap_err(), PriorError::TooFewSamples(1));
        assert_eq!(kde_from_chain(&[2.0, 2.0, 2.0], 0.1).unwrap_err(), PriorError::DegenerateSamples);
        assert_eq!(kde_from_chain(&[1.0, 2.0], 0.0).unwrap_err(), PriorError::NonPositiveBandwidth(0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = Prior::uniform(0.0, 1.0).unwrap();
        let a = p.sample(&mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = p.sample(&mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normal_sample_mean() {
        let p = Prior::normal(2.9, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mean = (0..n).map(|_| p.sample(&mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 2.9).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn two_point_kde_hand_sum() {
        // std of {0, 2} is sqrt(2); choose the factor that gives h = 1
        let p = kde_from_chain(&[0.0, 2.0], 1.0 / 2f64.sqrt()).unwrap();
        let Prior::Kde(k) = &p else { unreachable!() };
        assert!((k.bandwidth() - 1.0).abs() < 1e-15);
        let phi1 = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!((p.pdf(1.0) - phi1).abs() < 1e-15);
        assert!((p.pdf(1.0) - 0.2419707).abs() < 1e-7);
    }

    #[test]
    fn proper_priors_normalise() {
        let kde = kde_from_chain(&[1.0, 1.3, 2.0, 5.0, 5.1, 9.0], 0.05).unwrap();
        let priors = [Prior::uniform(8.0, 16.0).unwrap(), Prior::normal(2.9, 0.1).unwrap(), kde];
        for p in priors {
            let (a, b) = p.effective_range().unwrap();
            let area = simpson(|x| p.pdf(x), a, b - 1e-12, 200_000);
            assert!((area - 1.0).abs() < 1e-3, "{p}: {area}");
        }
    }

    #[test]
    fn kde_recovers_standard_normal_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = kde_from_chain(&xs, 0.05).unwrap();
        let peak = p.pdf(0.0);
        assert!((peak - 0.3989).abs() / 0.3989 < 0.1, "{peak}");
    }

    #[test]
    fn spec_round_trip_json() {
        let spec: PriorSpec = serde_json::from_str(r#"{"type":"uniform","lower":8.0,"upper":16.0}"#).unwrap();
        let prior = spec.resolve(|_| Ok::<_, ()>(vec![])).unwrap();
        assert_eq!(prior, Prior::uniform(8.0, 16.0).unwrap());
        assert_eq!(
            serde_json::to_string(&prior.to_spec().unwrap()).unwrap(),
            r#"{"type":"uniform","lower":8.0,"upper":16.0}"#
        );
        let kde: PriorSpec =
            serde_json::from_str(r#"{"type":"kde","source":"md.chain","column":"V_t","bandwidth_factor":0.05}"#)
                .unwrap();
        let prior = kde.resolve(|src| {
            assert_eq!(src.column.as_deref(), Some("V_t"));
            Ok::<_, ()>(vec![1.0, 2.0, 3.0])
        });
        let json = serde_json::to_string(&prior.unwrap().to_spec().unwrap()).unwrap();
        assert!(!json.contains("samples"));
        assert!(json.contains("md.chain"));
        assert_eq!(
            kde_from_chain(&[1.0, 2.0], 0.1).unwrap().to_spec().unwrap_err(),
            PriorError::KdeWithoutSource
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // dyadic offsets keep mu ± delta exact in binary64
            #[test]
            fn normal_log_pdf_is_symmetric(mu_i in -4096i64..4096, d_i in 0i64..4096, s_i in 1i64..1024) {
                let mu = mu_i as f64 / 64.0;
                let delta = d_i as f64 / 64.0;
                let sigma = s_i as f64 / 128.0;
                let p = Prior::normal(mu, sigma).unwrap();
                prop_assert_eq!(p.log_pdf(mu + delta), p.log_pdf(mu - delta));
            }

            #[test]
            fn kde_matches_brute_force_sum(
                samples in proptest::collection::vec(-50.0f64..50.0, 2..40),
                factor in 0.02f64..2.0,
                x in -60.0f64..60.0,
            ) {
                prop_assume!(samples.iter().any(|&s| s != samples[0]));
                let p = kde_from_chain(&samples, factor).unwrap();
                let Prior::Kde(k) = &p else { unreachable!() };
                let h = k.bandwidth();
                let direct: f64 = samples
                    .iter()
                    .map(|s| (-0.5 * ((x - s) / h).powi(2)).exp() / (2.0 * PI).sqrt())
                    .sum::<f64>()
                    / (samples.len() as f64 * h);
                prop_assume!(direct > 1e-280);
                let lp = p.log_pdf(x);
                prop_assert!((lp - direct.ln()).abs() <= 1e-12 * direct.ln().abs().max(1.0));
            }
        }
    }
}
