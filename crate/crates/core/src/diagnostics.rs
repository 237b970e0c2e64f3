//! Chain diagnostics: integrated autocorrelation time, Gelman–Rubin R̂,
//! effective sample size with Monte Carlo standard error, and the
//! D'Agostino–Pearson K² normality test.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::Chain;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("series of length {0} is too short (need at least {1})")]
    SeriesTooShort(usize, usize),
    #[error("series has zero variance; autocorrelation is undefined")]
    DegenerateSeries,
    #[error("need at least 2 chains of equal length")]
    NeedTwoChains,
    #[error("chains have different lengths")]
    UnequalChains,
    #[error("within-chain variance is zero")]
    ZeroWithinVariance,
    #[error("normality test needs at least 20 samples, got {0}")]
    SampleTooSmall(usize),
    #[error("kurtosis transform undefined for this sample")]
    KurtosisUndefined,
}

/// Sokal window constant.
pub const SOKAL_C: f64 = 5.0;
pub const MIN_SERIES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutocorrTime {
    pub tau: f64,
    /// Window where the Sokal criterion was met.
    pub window: usize,
    /// False when the series is shorter than 50·τ.
    pub reliable: bool,
}

/// Normalised autocorrelation function of one series via zero-padded FFT.
pub fn autocorrelation(series: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 0.0) || !(c0 / n as f64 > 1e-300) {
        return Err(DiagnosticsError::DegenerateSeries);
    }
    Ok(buf[..n].iter().map(|c| c.re / c0).collect())
}

/// Integrated autocorrelation time `1 + 2Σρ(t)` over the walker-averaged
/// autocorrelation, truncated at the smallest window `W ≥ 5·τ(W)`.
pub fn autocorr_time(series: &[Vec<f64>]) -> Result<AutocorrTime, DiagnosticsError> {
    let n = series.first().map_or(0, Vec::len);
    if series.iter().any(|s| s.len() != n) {
        return Err(DiagnosticsError::UnequalChains);
    }
    if n < MIN_SERIES {
        return Err(DiagnosticsError::SeriesTooShort(n, MIN_SERIES));
    }
    let acfs: Vec<Vec<f64>> = series.par_iter().map(|s| autocorrelation(s)).collect::<Result<_, _>>()?;
    let mut rho = vec![0.0; n];
    for acf in &acfs {
        for (r, a) in rho.iter_mut().zip(acf) {
            *r += a;
        }
    }
    for r in rho.iter_mut() {
        *r /= acfs.len() as f64;
    }
    let mut tau = 1.0;
    let mut window = n - 1;
    for (w, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if w as f64 >= SOKAL_C * tau {
            window = w;
            break;
        }
    }
    let tau = tau.max(1.0);
    Ok(AutocorrTime {
        tau,
        window,
        reliable: (n as f64) >= 50.0 * tau,
    })
}

/// Classic Gelman–Rubin statistic with each series treated as a chain.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64, DiagnosticsError> {
    if chains.len() < 2 {
        return Err(DiagnosticsError::NeedTwoChains);
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(DiagnosticsError::UnequalChains);
    }
    if n < 10 {
        return Err(DiagnosticsError::SeriesTooShort(n, 10));
    }
    let nf = n as f64;
    let k = chains.len() as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let within = stats.iter().map(|s| s.1).sum::<f64>() / k;
    if !(within > 0.0) {
        return Err(DiagnosticsError::ZeroWithinVariance);
    }
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / k;
    let between = nf * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(((nf - 1.0) / nf + between / (nf * within)).sqrt())
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssMcse {
    pub ess: f64,
    pub mcse_mean: f64,
}

/// `ess = N/τ`, `mcse = std/√ess`.
pub fn ess_and_mcse(pooled: &[f64], tau: f64) -> EssMcse {
    let tau = tau.max(1.0);
    let ess = pooled.len() as f64 / tau;
    let std = mean_var(pooled).1.sqrt();
    EssMcse {
        ess,
        mcse_mean: std / ess.sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    pub statistic: f64,
    pub p_value: f64,
    pub z_skew: f64,
    pub z_kurtosis: f64,
}

/// D'Agostino–Pearson omnibus test: `K² = Z_skew² + Z_kurt²`, p-value from
/// χ² with 2 degrees of freedom.
pub fn normality_test(samples: &[f64]) -> Result<NormalityResult, DiagnosticsError> {
    let n = samples.len();
    if n < 20 {
        return Err(DiagnosticsError::SampleTooSmall(n));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if !(m2 > 0.0) {
        return Err(DiagnosticsError::KurtosisUndefined);
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let z_skew = skew_z(skew, nf);
    let z_kurtosis = kurtosis_z(kurt, nf)?;
    let statistic = z_skew * z_skew + z_kurtosis * z_kurtosis;
    Ok(NormalityResult {
        statistic,
        // χ²₂ survival function
        p_value: (-0.5 * statistic).exp(),
        z_skew,
        z_kurtosis,
    })
}

fn skew_z(skew: f64, n: f64) -> f64 {
    let y = skew * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    delta * (y / alpha).asinh()
}

fn kurtosis_z(b2: f64, n: f64) -> Result<f64, DiagnosticsError> {
    let e = 3.0 * (n - 1.0) / (n + 1.0);
    let var = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    let x = (b2 - e) / var.sqrt();
    let sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    if denom == 0.0 {
        return Err(DiagnosticsError::KurtosisUndefined);
    }
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt();
    Ok((term1 - term2) / (2.0 / (9.0 * a)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityEntry {
    pub statistic: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Samples the test was run on (an evenly spaced subsample of the pool).
    pub sample_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub name: String,
    pub tau: f64,
    pub tau_reliable: bool,
    pub r_hat: f64,
    pub ess: f64,
    pub mcse_mean: f64,
    pub normality: NormalityEntry,
}

/// Per-parameter diagnostics of a (burnt-in) chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub pooled_samples: usize,
    /// `⌈max τ⌉`, the recommended thinning interval.
    pub thin_interval: usize,
    pub parameters: Vec<ParameterDiagnostics>,
}

impl DiagnosticsReport {
    pub fn max_r_hat(&self) -> f64 {
        self.parameters.iter().map(|p| p.r_hat).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn taus(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.tau).collect()
    }
}

/// Evenly spaced subsample of at most `max` values, always including the first.
pub fn even_subsample(xs: &[f64], max: usize) -> Vec<f64> {
    if xs.len() <= max || max == 0 {
        return xs.to_vec();
    }
    (0..max).map(|i| xs[i * xs.len() / max]).collect()
}

/// Runs every diagnostic for each parameter of `chain`.
///
/// The normality test sees at most `normality_samples` evenly spaced draws
/// from the pooled chain.
pub fn diagnose(chain: &Chain, threshold: f64, normality_samples: usize) -> Result<DiagnosticsReport, DiagnosticsError> {
    let pooled = chain.pooled();
    let parameters: Vec<ParameterDiagnostics> = (0..chain.dim())
        .into_par_iter()
        .map(|j| {
            let series = chain.walker_series(j);
            let ac = autocorr_time(&series)?;
            let r_hat = gelman_rubin(&series)?;
            let column = pooled.column(j);
            let em = ess_and_mcse(&column, ac.tau);
            let sub = even_subsample(&column, normality_samples);
            let nt = normality_test(&sub)?;
            Ok(ParameterDiagnostics {
                name: chain.names()[j].clone(),
                tau: ac.tau,
                tau_reliable: ac.reliable,
                r_hat,
                ess: em.ess,
                mcse_mean: em.mcse_mean,
                normality: NormalityEntry {
                    statistic: nt.statistic,
                    p_value: nt.p_value,
                    threshold,
                    passed: nt.p_value >= threshold,
                    sample_size: sub.len(),
                },
            })
        })
        .collect::<Result<_, DiagnosticsError>>()?;
    let max_tau = parameters.iter().map(|p| p.tau).fold(1.0, f64::max);
    Ok(DiagnosticsReport {
        pooled_samples: pooled.rows(),
        thin_interval: max_tau.ceil() as usize,
        parameters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn acf_matches_direct_sum() {
        let xs = normals(1, 300);
        let acf = autocorrelation(&xs).unwrap();
        let mean = xs.iter().sum::<f64>() / 300.0;
        let c = |t: usize| (0..300 - t).map(|i| (xs[i] - mean) * (xs[i + t] - mean)).sum::<f64>();
        for t in [0, 1, 5, 50, 299] {
            assert!((acf[t] - c(t) / c(0)).abs() < 1e-10);
        }
    }

    #[test]
    fn white_noise_tau() {
        let t = autocorr_time(&[normals(2, 100_000)]).unwrap();
        assert!((0.8..=1.5).contains(&t.tau), "{t:?}");
        assert!(t.reliable);
    }

    #[test]
    fn constant_series_is_degenerate() {
        assert_eq!(autocorr_time(&[vec![3.0; 100]]).unwrap_err(), DiagnosticsError::DegenerateSeries);
        assert_eq!(autocorr_time(&[vec![1.0; 10]]).unwrap_err(), DiagnosticsError::SeriesTooShort(10, 50));
    }

    #[test]
    fn rhat_identical_chains() {
        let a = normals(3, 1000);
        let r = gelman_rubin(&[a.clone(), a]).unwrap();
        assert_eq!(r, (999.0f64 / 1000.0).sqrt());
        assert!((r - 0.99950).abs() < 1e-5);
    }

    #[test]
    fn rhat_separated_chains() {
        let a: Vec<f64> = normals(4, 1000).iter().map(|x| x - 10.0).collect();
        let b: Vec<f64> = normals(5, 1000).iter().map(|x| x + 10.0).collect();
        assert!(gelman_rubin(&[a, b]).unwrap() > 5.0);
    }

    #[test]
    fn rhat_errors() {
        assert_eq!(gelman_rubin(&[vec![1.0; 20]]).unwrap_err(), DiagnosticsError::NeedTwoChains);
        assert_eq!(
            gelman_rubin(&[vec![1.0; 20], vec![2.0; 20]]).unwrap_err(),
            DiagnosticsError::ZeroWithinVariance
        );
    }

    #[test]
    fn mcse_scaling() {
        let xs = normals(6, 10_000);
        let std = mean_var(&xs).1.sqrt();
        let one = ess_and_mcse(&xs, 1.0);
        assert!((one.mcse_mean - std / 100.0).abs() < 1e-15);
        let four = ess_and_mcse(&xs, 4.0);
        assert!((four.mcse_mean.powi(2) / one.mcse_mean.powi(2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_two_point_sample_has_no_skew() {
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let r = normality_test(&xs).unwrap();
        assert_eq!(r.z_skew, 0.0);
        assert_eq!(normality_test(&xs[..10]).unwrap_err(), DiagnosticsError::SampleTooSmall(10));
    }

    #[test]
    fn normality_matches_reference_values() {
        // scipy.stats.normaltest on the same inputs
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() + 0.01 * (i * i) as f64).collect();
        let r = normality_test(&xs).unwrap();
        let (k2, p) = REFERENCE_SIN;
        assert!((r.statistic - k2).abs() < 1e-10 * k2.max(1.0), "{} vs {k2}", r.statistic);
        assert!((r.p_value - p).abs() < 1e-10, "{} vs {p}", r.p_value);
        let ys: Vec<f64> = (1..=30).map(|i| (i as f64).powi(2)).collect();
        let r = normality_test(&ys).unwrap();
        let (k2, p) = REFERENCE_SQUARES;
        assert!((r.statistic - k2).abs() < 1e-10 * k2.max(1.0), "{} vs {k2}", r.statistic);
        assert!((r.p_value - p).abs() < 1e-10, "{} vs {p}", r.p_value);
    }

    const REFERENCE_SIN: (f64, f64) = (8.543483928841273, 0.013957448585677148);
    const REFERENCE_SQUARES: (f64, f64) = (3.8582005415682414, 0.14527885132570745);

    #[test]
    fn subsample_is_even() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(even_subsample(&xs, 5), vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(even_subsample(&xs, 20).len(), 10);
    }
}
