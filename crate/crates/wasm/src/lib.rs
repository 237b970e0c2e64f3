//! Browser bindings: a reflectivity/SLD explorer, a prior density explorer
//! and a quick synthetic fit with a corner plot.
//!
//! Every export takes and returns plain strings (JSON in, JSON out) so the
//! page needs no framework. The `*_json` functions are the native
//! implementations; the `#[wasm_bindgen]` wrappers only convert errors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use reflbayes::data::ModelField;
use reflbayes::kernel::critical_q;
use reflbayes::likelihood::{LikelihoodSpec, Posterior};
use reflbayes::pipeline::analyze;
use reflbayes::plot::{line_plot, LinePlot};
use reflbayes::priors::PriorSpec;
use reflbayes::sampler::{init_walkers, run_sampler, SamplerSettings};
use reflbayes::summary::SummaryOptions;
use reflbayes::{
    compute_reflectivity, profile_depths, sld_profile, BoundModel, Layer, LayerField, Parameter, Prior, QGrid,
    ReflectivityCurve, SlabModel, Transform,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub fn version() -> String {
    reflbayes::VERSION.to_string()
}

#[derive(Debug, Deserialize)]
pub struct ExploreRequest {
    pub model: SlabModel,
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Explored {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub sld: Vec<f64>,
    /// Critical edge of the backing against the fronting, if there is one.
    pub critical_q: Option<f64>,
    pub reflectivity_svg: String,
    pub profile_svg: String,
}

pub fn explore_json(request: &str) -> Result<String, String> {
    let req: ExploreRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if !(req.q_min > 0.0 && req.q_max > req.q_min) || !(2..=5000).contains(&req.points) {
        return Err("need 0 < q_min < q_max and 2..=5000 points".into());
    }
    let ratio = req.q_max / req.q_min;
    let q: Vec<f64> = (0..req.points)
        .map(|i| req.q_min * ratio.powf(i as f64 / (req.points - 1) as f64))
        .collect();
    let grid = QGrid::new(q.clone()).map_err(|e| e.to_string())?;
    let r = compute_reflectivity(&req.model, &grid).map_err(|e| e.to_string())?;
    let z = profile_depths(&req.model, 400);
    let sld = sld_profile(&req.model, &z);
    let delta = req.model.backing.sld - req.model.fronting.sld;
    let reflectivity_svg = line_plot(
        &LinePlot {
            title: "Reflectivity",
            x_label: "q / Å⁻¹",
            y_label: "log₁₀ R",
            log_y: true,
        },
        &q,
        &r,
        None,
    );
    let profile_svg = line_plot(
        &LinePlot {
            title: "SLD profile",
            x_label: "z / Å",
            y_label: "SLD / 10⁻⁶ Å⁻²",
            log_y: false,
        },
        &z,
        &sld,
        None,
    );
    let out = Explored {
        q,
        r,
        z,
        sld,
        critical_q: (delta > 0.0).then(|| critical_q(delta)),
        reflectivity_svg,
        profile_svg,
    };
    Ok(serde_json::to_string(&out).expect("serialises"))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PriorView {
    pub label: String,
    pub proper: bool,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub svg: String,
}

/// Parses whitespace- or comma-separated numbers.
pub fn parse_samples(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

/// A plotting window that shows the bulk of the prior.
fn window(prior: &Prior) -> (f64, f64) {
    match prior {
        Prior::Uniform { lower, upper } => {
            let pad = 0.15 * (upper - lower);
            (lower - pad, upper + pad)
        }
        Prior::HalfOpenLower { lower } => {
            let span = lower.abs().max(1.0) * 2.0;
            (lower - 0.15 * span, lower + span)
        }
        Prior::Normal { mu, sigma } => (mu - 4.0 * sigma, mu + 4.0 * sigma),
        Prior::Kde(kde) => {
            let s = kde.samples();
            let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo - 4.0 * kde.bandwidth(), hi + 4.0 * kde.bandwidth())
        }
    }
}

/// `spec` is a prior as written in a config; KDE priors take their samples
/// from `kde_samples` instead of a file.
pub fn prior_json(spec: &str, kde_samples: &str) -> Result<String, String> {
    let spec: PriorSpec = serde_json::from_str(spec).map_err(|e| e.to_string())?;
    let prior = spec
        .resolve(|_| parse_samples(kde_samples))
        .map_err(|e| e.to_string())?;
    let (lo, hi) = window(&prior);
    let n = 400;
    let x: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let density: Vec<f64> = x.iter().map(|&v| prior.pdf(v)).collect();
    let label = prior.to_string();
    let title = if prior.is_proper() {
        "Prior density".to_string()
    } else {
        "Improper prior (unnormalised)".to_string()
    };
    let svg = line_plot(
        &LinePlot {
            title: &title,
            x_label: "value",
            y_label: "density",
            log_y: false,
        },
        &x,
        &density,
        None,
    );
    let view = PriorView {
        label,
        proper: prior.is_proper(),
        x,
        density,
        svg,
    };
    Ok(serde_json::to_string(&view).expect("serialises"))
}

#[derive(Debug, Deserialize)]
pub struct QuickFitRequest {
    /// Relative Gaussian noise on the synthetic curve.
    pub noise: f64,
    pub walkers: usize,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QuickFitSummary {
    pub name: String,
    pub truth: f64,
    pub headline: String,
    pub r_hat: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QuickFit {
    pub acceptance_fraction: f64,
    pub burn_in: usize,
    pub summaries: Vec<QuickFitSummary>,
    pub corner_svg: String,
    pub data_svg: String,
}

const TRUTH: [f64; 3] = [50.0, 4.0, 3.0];

fn film(d: f64, rho: f64, sigma: f64) -> SlabModel {
    SlabModel::new(Layer::medium(0.0, 0.0), vec![Layer::new(d, rho, sigma)], Layer::medium(2.074, 3.0))
}

/// Synthesises a 50 Å film on silicon, fits thickness, SLD and roughness
/// under uniform priors, and returns summaries plus a corner plot.
pub fn quick_fit_json(request: &str) -> Result<String, String> {
    let req: QuickFitRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if !(req.noise > 0.0 && req.noise < 1.0) {
        return Err("noise must lie in (0, 1)".into());
    }
    if req.steps < 200 || req.steps > 20_000 {
        return Err("steps must lie in 200..=20000".into());
    }
    let q: Vec<f64> = (0..60).map(|i| 0.008 * (0.3f64 / 0.008).powf(i as f64 / 59.0)).collect();
    let truth = film(TRUTH[0], TRUTH[1], TRUTH[2]);
    let r_true = compute_reflectivity(&truth, &QGrid::new(q.clone()).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let sigma: Vec<f64> = r_true.iter().map(|r| req.noise * r).collect();
    let obs: Vec<f64> = r_true
        .iter()
        .zip(&sigma)
        .map(|(r, s)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            (r + s * e).max(f64::MIN_POSITIVE)
        })
        .collect();
    let curve = ReflectivityCurve::new(q.clone(), obs.clone(), sigma, None, "synthetic").map_err(|e| e.to_string())?;

    let uniform = |a, b| Prior::uniform(a, b).expect("valid bounds");
    let params = vec![
        Parameter::varying("thickness", ModelField::Layer(0, LayerField::Thickness), 50.0, uniform(30.0, 70.0)),
        Parameter::varying("sld", ModelField::Layer(0, LayerField::Sld), 4.0, uniform(2.0, 6.0)),
        Parameter::varying("roughness", ModelField::Layer(0, LayerField::Roughness), 3.0, uniform(1.0, 6.0)),
    ];
    let model = BoundModel::new(truth, params).map_err(|e| e.to_string())?;
    let posterior =
        Posterior::new(model, curve, LikelihoodSpec::gaussian(Transform::Linear)).map_err(|e| e.to_string())?;
    let names = posterior.model().free_names();
    let units: Vec<String> = posterior.model().free_parameters().iter().map(|p| p.unit.clone()).collect();
    let mut settings = SamplerSettings::with_defaults(names.len(), req.steps, req.seed);
    settings.walkers = req.walkers;
    let init = init_walkers(&names, posterior.priors(), &[], settings.walkers, settings.seed).map_err(|e| e.to_string())?;
    let out = run_sampler(|x| posterior.ln_prob(x), &names, &init, &settings).map_err(|e| e.to_string())?;
    let analysis = analyze(&out.chain, &units, None, &SummaryOptions::default()).map_err(|e| e.to_string())?;

    let summaries = analysis
        .summaries
        .iter()
        .zip(&analysis.diagnostics.parameters)
        .zip(TRUTH)
        .map(|((s, d), truth)| QuickFitSummary {
            name: s.name.clone(),
            truth,
            headline: s.headline(),
            r_hat: d.r_hat,
        })
        .collect();

    let medians: Vec<f64> = analysis.summaries.iter().map(|s| s.median).collect();
    let best = posterior.model().model_at(&medians).map_err(|e| e.to_string())?;
    let r_fit = compute_reflectivity(&best, &QGrid::new(q.clone()).expect("checked above")).map_err(|e| e.to_string())?;
    let data_svg = line_plot(
        &LinePlot {
            title: "Synthetic data and posterior-median fit",
            x_label: "q / Å⁻¹",
            y_label: "log₁₀ R",
            log_y: true,
        },
        &q,
        &r_fit,
        Some((&q, &obs)),
    );
    let fit = QuickFit {
        acceptance_fraction: out.acceptance_fraction(),
        burn_in: analysis.burn_in,
        summaries,
        corner_svg: analysis.corner_svg,
        data_svg,
    };
    Ok(serde_json::to_string(&fit).expect("serialises"))
}

#[wasm_bindgen]
pub fn explore(request: &str) -> Result<String, JsError> {
    explore_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn prior_density(spec: &str, kde_samples: &str) -> Result<String, JsError> {
    prior_json(spec, kde_samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn quick_fit(request: &str) -> Result<String, JsError> {
    quick_fit_json(request).map_err(|e| JsError::new(&e))
}
