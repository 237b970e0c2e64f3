//! Affine-invariant ensemble sampler (stretch move) and the chain it produces.
//!
//! Every random draw for walker `k` at step `t` comes from a ChaCha stream
//! keyed by `(seed, t, k)`, so results do not depend on how many threads
//! evaluate the half-ensemble updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::priors::Prior;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("need at least {needed} walkers for {dim} parameters, got {walkers}")]
    TooFewWalkers { walkers: usize, dim: usize, needed: usize },
    #[error("parameter {0} has an improper prior and no init range")]
    UninitializableParameter(String),
    #[error("could not place walker {walker} at a point with finite log-probability")]
    NonFiniteInitialState { walker: usize },
    #[error("stretch scale must be > 1, got {0}")]
    InvalidStretch(f64),
    #[error("initial positions have wrong shape")]
    BadInitShape,
    #[error("need at least one step")]
    NoSteps,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("burn-in of {burn} steps leaves nothing of a {steps}-step chain")]
    BurnTooLarge { burn: usize, steps: usize },
    #[error("thinning interval must be >= 1")]
    ZeroInterval,
    #[error("thinning interval {interval} leaves fewer than 10 of {steps} steps")]
    IntervalTooLarge { interval: usize, steps: usize },
    #[error("burn-in must be discarded before thinning")]
    AlreadyThinned,
    #[error("chain shape {walkers}x{steps}x{dim} does not match {len} values")]
    ShapeMismatch { walkers: usize, steps: usize, dim: usize, len: usize },
}

/// Which thinning, if any, was applied, and the autocorrelation times that
/// justified it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinRecord {
    pub applied: bool,
    pub interval: usize,
    pub tau: Vec<f64>,
}

impl ThinRecord {
    /// Step spacing of the stored samples.
    pub fn stride(&self) -> usize {
        if self.applied {
            self.interval.max(1)
        } else {
            1
        }
    }
}

impl Default for ThinRecord {
    fn default() -> Self {
        Self {
            applied: false,
            interval: 1,
            tau: Vec::new(),
        }
    }
}

/// Everything about a chain except the sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub names: Vec<String>,
    /// `[walkers, steps, parameters]` of the stored values.
    pub shape: [usize; 3],
    pub seed: u64,
    pub stretch: f64,
    /// Leading steps already removed from the stored values.
    pub burn_in: usize,
    /// Burn-in the analysis should apply to this chain.
    pub planned_burn: usize,
    pub acceptance_fraction: f64,
    pub thin: ThinRecord,
    pub version: String,
}

/// Sampler output of shape (walkers, steps, parameters), walker-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    meta: ChainMeta,
    values: Vec<f64>,
}

impl Chain {
    pub fn from_parts(meta: ChainMeta, values: Vec<f64>) -> Result<Self, ChainError> {
        let [walkers, steps, dim] = meta.shape;
        if walkers * steps * dim != values.len() || meta.names.len() != dim {
            return Err(ChainError::ShapeMismatch {
                walkers,
                steps,
                dim,
                len: values.len(),
            });
        }
        Ok(Self { meta, values })
    }

    pub fn meta(&self) -> &ChainMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut ChainMeta {
        &mut self.meta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.meta.names
    }

    pub fn walkers(&self) -> usize {
        self.meta.shape[0]
    }

    pub fn steps(&self) -> usize {
        self.meta.shape[1]
    }

    pub fn dim(&self) -> usize {
        self.meta.shape[2]
    }

    pub fn get(&self, walker: usize, step: usize, param: usize) -> f64 {
        self.values[(walker * self.steps() + step) * self.dim() + param]
    }

    pub fn position(&self, walker: usize, step: usize) -> &[f64] {
        let start = (walker * self.steps() + step) * self.dim();
        &self.values[start..start + self.dim()]
    }

    /// Original sampler step number of stored step `i`.
    pub fn step_index(&self, i: usize) -> usize {
        self.meta.burn_in + i * self.meta.thin.stride()
    }

    /// One series per walker for parameter `param`.
    pub fn walker_series(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.walkers())
            .map(|w| (0..self.steps()).map(|s| self.get(w, s, param)).collect())
            .collect()
    }

    /// Drops the first `burn` stored steps of every walker.
    pub fn discard_burn_in(&self, burn: usize) -> Result<Chain, ChainError> {
        if self.meta.thin.applied && burn > 0 {
            return Err(ChainError::AlreadyThinned);
        }
        let steps = self.steps();
        if burn >= steps {
            return Err(ChainError::BurnTooLarge { burn, steps });
        }
        let kept = steps - burn;
        let mut values = Vec::with_capacity(self.walkers() * kept * self.dim());
        for w in 0..self.walkers() {
            let start = (w * steps + burn) * self.dim();
            values.extend_from_slice(&self.values[start..start + kept * self.dim()]);
        }
        let mut meta = self.meta.clone();
        meta.shape[1] = kept;
        meta.burn_in += burn;
        Ok(Chain { meta, values })
    }

    /// Keeps stored steps `0, interval, 2·interval, …`.
    pub fn thin(&self, interval: usize, tau: &[f64]) -> Result<Chain, ChainError> {
        if interval == 0 {
            return Err(ChainError::ZeroInterval);
        }
        let steps = self.steps();
        if interval * 10 > steps {
            return Err(ChainError::IntervalTooLarge { interval, steps });
        }
        let kept: Vec<usize> = (0..steps).step_by(interval).collect();
        let mut values = Vec::with_capacity(self.walkers() * kept.len() * self.dim());
        for w in 0..self.walkers() {
            for &s in &kept {
                values.extend_from_slice(self.position(w, s));
            }
        }
        let mut meta = self.meta.clone();
        meta.shape[1] = kept.len();
        let stride = interval * self.meta.thin.stride();
        meta.thin = ThinRecord {
            applied: stride > 1,
            interval: stride,
            tau: tau.to_vec(),
        };
        Ok(Chain { meta, values })
    }

    /// All walkers pooled into `(walkers·steps, parameters)` rows, walker-major.
    pub fn pooled(&self) -> Pooled {
        Pooled {
            rows: self.walkers() * self.steps(),
            dim: self.dim(),
            data: self.values.clone(),
        }
    }
}

/// Drops `burn` steps and pools the remainder.
pub fn burn_and_pool(chain: &Chain, burn: usize) -> Result<(Chain, Pooled), ChainError> {
    let burned = chain.discard_burn_in(burn)?;
    let pooled = burned.pooled();
    Ok((burned, pooled))
}

/// Row-major pooled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Pooled {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.dim + j]).collect()
    }
}

/// Sampler settings; all of them are echoed into chain metadata and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub walkers: usize,
    pub steps: usize,
    pub stretch: f64,
    pub seed: u64,
    pub burn: usize,
    /// Consecutive zero-acceptance steps that trigger a stuck warning.
    pub stuck_window: usize,
    /// Halfway through burn-in, walkers whose log-posterior trails the
    /// ensemble median by more than this are moved onto a random walker
    /// that does not. `None` disables the reset.
    #[serde(default)]
    pub outlier_gap: Option<f64>,
}

/// Default for [`SamplerSettings::outlier_gap`], in nats.
pub const DEFAULT_OUTLIER_GAP: f64 = 100.0;

impl SamplerSettings {
    /// Defaults: `max(2m, 32)` walkers, stretch 2, burn-in of a quarter.
    pub fn with_defaults(dim: usize, steps: usize, seed: u64) -> Self {
        Self {
            walkers: (2 * dim).max(32),
            steps,
            stretch: 2.0,
            seed,
            burn: steps / 4,
            stuck_window: 100,
            outlier_gap: Some(DEFAULT_OUTLIER_GAP),
        }
    }
}

/// Random stream for one (step, walker) pair. The ChaCha key holds the
/// tuple verbatim, so distinct tuples never share a stream.
pub fn substream(seed: u64, step: u64, walker: u64, domain: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&step.to_le_bytes());
    key[16..24].copy_from_slice(&walker.to_le_bytes());
    key[24..].copy_from_slice(&domain.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

const DOMAIN_STEP: u64 = 0x5354_4550;
const DOMAIN_INIT: u64 = 0x494e_4954;
const DOMAIN_RESET: u64 = 0x5253_4554;

/// Step after which the burn-in outlier reset happens, if any.
pub fn reset_step(settings: &SamplerSettings) -> Option<usize> {
    settings.outlier_gap.filter(|_| settings.burn >= 2).map(|_| settings.burn / 2)
}

/// Moves walkers trailing the median log-probability by more than `gap`
/// onto randomly chosen walkers that do not. Returns the moved walkers.
fn reset_outliers(
    positions: &mut [Vec<f64>],
    lp: &mut [f64],
    gap: f64,
    seed: u64,
    step: usize,
) -> Vec<usize> {
    let mut sorted = lp.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[sorted.len() / 2] - gap;
    let donors: Vec<usize> = (0..lp.len()).filter(|&k| lp[k] >= cut).collect();
    let outliers: Vec<usize> = (0..lp.len()).filter(|&k| lp[k] < cut).collect();
    for &k in &outliers {
        let mut rng = substream(seed, step as u64, k as u64, DOMAIN_RESET);
        let d = donors[rng.gen_range(0..donors.len())];
        positions[k] = positions[d].clone();
        lp[k] = lp[d];
    }
    outliers
}

/// Draws `walkers` distinct starting positions from the priors, or from the
/// per-parameter init ranges where given.
pub fn init_walkers(
    names: &[String],
    priors: &[Prior],
    init_ranges: &[Option<(f64, f64)>],
    walkers: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, SamplerError> {
    let dim = priors.len();
    if walkers < 2 * dim || walkers < 2 {
        return Err(SamplerError::TooFewWalkers {
            walkers,
            dim,
            needed: (2 * dim).max(2),
        });
    }
    for (j, prior) in priors.iter().enumerate() {
        if !prior.is_proper() && init_ranges.get(j).copied().flatten().is_none() {
            return Err(SamplerError::UninitializableParameter(names[j].clone()));
        }
    }
    let mut positions: Vec<Vec<f64>> = Vec::with_capacity(walkers);
    for k in 0..walkers {
        let mut rng = substream(seed, 0, k as u64, DOMAIN_INIT);
        let mut attempt = 0;
        let pos = loop {
            attempt += 1;
            if attempt > 1000 {
                return Err(SamplerError::NonFiniteInitialState { walker: k });
            }
            let mut pos = Vec::with_capacity(dim);
            for (j, prior) in priors.iter().enumerate() {
                let v = match init_ranges.get(j).copied().flatten() {
                    Some((lo, hi)) => lo + (hi - lo) * rng.gen::<f64>(),
                    None => prior.sample(&mut rng).expect("proper prior checked above"),
                };
                pos.push(v);
            }
            let finite = priors.iter().zip(&pos).all(|(p, &v)| p.log_pdf(v).is_finite());
            if finite && !positions.contains(&pos) {
                break pos;
            }
        };
        positions.push(pos);
    }
    Ok(positions)
}

/// Result of [`run_sampler`].
#[derive(Debug, Clone)]
pub struct SamplerOutput {
    pub chain: Chain,
    /// Log-probability of every stored sample, shape (walkers, steps).
    pub log_prob: Vec<f64>,
    pub acceptance: Vec<f64>,
    pub warnings: Vec<String>,
    /// Walkers moved by the burn-in outlier reset.
    pub reset_walkers: Vec<usize>,
}

impl SamplerOutput {
    pub fn acceptance_fraction(&self) -> f64 {
        self.acceptance.iter().sum::<f64>() / self.acceptance.len() as f64
    }

    pub fn best_log_prob(&self) -> f64 {
        self.log_prob.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

struct Proposal {
    position: Vec<f64>,
    log_prob: f64,
    accepted: bool,
}

fn propose<F: Fn(&[f64]) -> f64>(
    log_prob: &F,
    settings: &SamplerSettings,
    step: usize,
    k: usize,
    current: &[f64],
    current_lp: f64,
    complement: &[Vec<f64>],
) -> Proposal {
    let mut rng = substream(settings.seed, step as u64, k as u64, DOMAIN_STEP);
    let a = settings.stretch;
    let u: f64 = rng.gen();
    let z = ((a - 1.0) * u + 1.0).powi(2) / a;
    let partner = &complement[rng.gen_range(0..complement.len())];
    let proposal: Vec<f64> = partner.iter().zip(current).map(|(&xj, &xk)| xj + z * (xk - xj)).collect();
    let lp = log_prob(&proposal);
    let dim = current.len() as f64;
    let ln_ratio = (dim - 1.0) * z.ln() + lp - current_lp;
    let accept_u: f64 = rng.gen();
    if lp.is_finite() && accept_u.ln() < ln_ratio {
        Proposal {
            position: proposal,
            log_prob: lp,
            accepted: true,
        }
    } else {
        Proposal {
            position: current.to_vec(),
            log_prob: current_lp,
            accepted: false,
        }
    }
}

/// Runs the stretch-move ensemble sampler from `init` for `settings.steps` steps.
pub fn run_sampler<F>(
    log_prob: F,
    names: &[String],
    init: &[Vec<f64>],
    settings: &SamplerSettings,
) -> Result<SamplerOutput, SamplerError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let walkers = init.len();
    let dim = names.len();
    if !(settings.stretch > 1.0) {
        return Err(SamplerError::InvalidStretch(settings.stretch));
    }
    if settings.steps == 0 {
        return Err(SamplerError::NoSteps);
    }
    if walkers != settings.walkers || init.iter().any(|p| p.len() != dim) {
        return Err(SamplerError::BadInitShape);
    }
    if walkers < 2 * dim || walkers < 2 {
        return Err(SamplerError::TooFewWalkers {
            walkers,
            dim,
            needed: (2 * dim).max(2),
        });
    }
    let mut positions: Vec<Vec<f64>> = init.to_vec();
    let mut current_lp: Vec<f64> = positions.par_iter().map(|p| log_prob(p)).collect();
    if let Some(walker) = current_lp.iter().position(|lp| !lp.is_finite()) {
        return Err(SamplerError::NonFiniteInitialState { walker });
    }

    let steps = settings.steps;
    let mut values = vec![0.0; walkers * steps * dim];
    let mut lp_store = vec![0.0; walkers * steps];
    let mut accepted = vec![0usize; walkers];
    let mut warnings = Vec::new();
    let mut stuck_run = 0usize;
    let mut stuck_reported = false;
    let half = walkers / 2;
    let halves = [(0..half), (half..walkers)];
    let reset_at = reset_step(settings).filter(|&s| s < steps);
    let mut reset_walkers = Vec::new();

    for step in 0..steps {
        let mut any_accepted = false;
        for h in 0..2 {
            let active = halves[h].clone();
            let complement: Vec<Vec<f64>> = halves[1 - h].clone().map(|i| positions[i].clone()).collect();
            let results: Vec<Proposal> = active
                .clone()
                .into_par_iter()
                .map(|k| propose(&log_prob, settings, step, k, &positions[k], current_lp[k], &complement))
                .collect();
            for (k, prop) in active.zip(results) {
                if prop.accepted {
                    accepted[k] += 1;
                    any_accepted = true;
                }
                positions[k] = prop.position;
                current_lp[k] = prop.log_prob;
            }
        }
        if reset_at == Some(step) {
            let gap = settings.outlier_gap.expect("reset step implies a gap");
            reset_walkers = reset_outliers(&mut positions, &mut current_lp, gap, settings.seed, step);
            if !reset_walkers.is_empty() {
                log::info!(
                    "burn-in step {step}: moved {} walker(s) trailing the median log-posterior by > {gap}",
                    reset_walkers.len()
                );
            }
        }
        for k in 0..walkers {
            let at = k * steps + step;
            values[at * dim..(at + 1) * dim].copy_from_slice(&positions[k]);
            lp_store[at] = current_lp[k];
        }
        if any_accepted {
            stuck_run = 0;
        } else {
            stuck_run += 1;
            if stuck_run >= settings.stuck_window.max(1) && !stuck_reported {
                warnings.push(format!(
                    "all walkers stuck: no proposal accepted in steps {}..={step}",
                    step + 1 - stuck_run
                ));
                stuck_reported = true;
            }
        }
    }

    let acceptance: Vec<f64> = accepted.iter().map(|&a| a as f64 / steps as f64).collect();
    let mean_acceptance = acceptance.iter().sum::<f64>() / walkers as f64;
    if mean_acceptance == 0.0 {
        warnings.push("no proposal was accepted during the whole run".into());
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let meta = ChainMeta {
        names: names.to_vec(),
        shape: [walkers, steps, dim],
        seed: settings.seed,
        stretch: settings.stretch,
        burn_in: 0,
        planned_burn: settings.burn,
        acceptance_fraction: mean_acceptance,
        thin: ThinRecord::default(),
        version: crate::VERSION.to_string(),
    };
    Ok(SamplerOutput {
        chain: Chain { meta, values },
        log_prob: lp_store,
        acceptance,
        warnings,
        reset_walkers,
    })
}
