#![allow(dead_code)]

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use reflbayes::config::RunConfig;
use reflbayes::report::AnalysisReport;
use reflbayes::pipeline::{analyze, build_report, fit, prepare, relative_to, ReportPaths};
use reflbayes::{chain_io, compute_reflectivity, Layer, QGrid, ReflectivityCurve, SlabModel};

pub const TRUE_D: f64 = 50.0;
pub const TRUE_RHO: f64 = 4.0;
pub const TRUE_SIGMA: f64 = 3.0;
pub const SI_SLD: f64 = 2.074;

/// One layer on silicon, air fronting.
pub fn film_model(d: f64, rho: f64, sigma: f64) -> SlabModel {
    SlabModel::new(
        Layer::medium(0.0, 0.0),
        vec![Layer::new(d, rho, sigma)],
        Layer::medium(SI_SLD, 3.0),
    )
}

/// Kernel-generated film curve with `noise` relative Gaussian noise; σ_R is
/// the true absolute 1-σ error.
pub fn synthetic_film(noise: f64, seed: u64) -> ReflectivityCurve {
    let q: Vec<f64> = (0..120).map(|i| 0.008 * (0.3f64 / 0.008).powf(i as f64 / 119.0)).collect();
    let grid = QGrid::new(q.clone()).unwrap();
    let r_true = compute_reflectivity(&film_model(TRUE_D, TRUE_RHO, TRUE_SIGMA), &grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma: Vec<f64> = r_true.iter().map(|r| noise * r).collect();
    let r_obs: Vec<f64> = r_true
        .iter()
        .zip(&sigma)
        .map(|(r, s)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            r + s * e
        })
        .collect();
    ReflectivityCurve::new(q, r_obs, sigma, None, "synthetic").unwrap()
}

pub fn film_config(data: &str, walkers: usize, steps: usize, seed: u64) -> String {
    format!(
        r#"{{
  "data": "{data}",
  "model": {{
    "fronting": {{"sld": 0.0}},
    "layers": [{{"name": "film",
      "thickness": {{"value": 50.0, "prior": {{"type": "uniform", "lower": 30.0, "upper": 70.0}}}},
      "sld": {{"value": 4.0, "prior": {{"type": "uniform", "lower": 2.0, "upper": 6.0}}}},
      "roughness": {{"value": 3.0, "prior": {{"type": "uniform", "lower": 1.0, "upper": 6.0}}}}}}],
    "backing": {{"sld": 2.074, "roughness": 3.0}}
  }},
  "likelihood": {{"kind": "gaussian", "transform": "linear"}},
  "sampler": {{"walkers": {walkers}, "steps": {steps}, "seed": {seed}}},
  "report": {{"threshold": 0.001, "ci_level": 95}}
}}"#
    )
}

/// Writes data + config into `dir` and returns the config path.
pub fn write_film_project(dir: &Path, walkers: usize, steps: usize, seed: u64) -> std::path::PathBuf {
    std::fs::write(dir.join("film.dat"), synthetic_film(0.02, 11).to_text()).unwrap();
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, film_config("film.dat", walkers, steps, seed)).unwrap();
    cfg
}

/// Runs config → fit → analyze → report in-process. Returns the chain file
/// text and the report.
pub fn run_pipeline(config: &Path, out: &Path, timestamp: &str) -> (String, AnalysisReport) {
    let (cfg, base) = RunConfig::load(config).unwrap();
    let prep = prepare(cfg, &base, None).unwrap();
    let output = fit(&prep).unwrap();
    std::fs::create_dir_all(out).unwrap();
    let chain_path = out.join("chain.reflchain");
    chain_io::write_chain(&output.chain, &chain_path).unwrap();
    let analysis = analyze(&output.chain, &prep.units(), None, &prep.options).unwrap();
    let paths = ReportPaths {
        data: relative_to(&prep.data_path, out),
        chain: relative_to(&chain_path, out),
        thinned_chain: None,
    };
    let report = build_report(&prep, &output.chain, &analysis, &paths, timestamp).unwrap();
    (std::fs::read_to_string(&chain_path).unwrap(), report)
}

/// The report JSON with its timestamp field blanked.
pub fn without_timestamp(json: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
    v["generated_at"] = serde_json::Value::Null;
    serde_json::to_string_pretty(&v).unwrap()
}

/// x_t = φ x_{t−1} + ε_t, started from the stationary distribution.
pub fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: f64 = {
        let e: f64 = StandardNormal.sample(&mut rng);
        e / (1.0 - phi * phi).sqrt()
    };
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = phi * x + e;
            x
        })
        .collect()
}

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn uniforms(n: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// Lipid-like head/tail bilayer on silicon with Table 1-style priors,
/// including an improper `[2.9, ∞)` roughness prior with an init range.
pub fn write_table1_project(dir: &Path, walkers: usize, steps: usize, seed: u64) -> std::path::PathBuf {
    let truth = SlabModel::new(
        Layer::medium(0.0, 0.0),
        vec![Layer::new(10.0, 1.9, 3.2), Layer::new(21.0, -0.2, 3.2)],
        Layer::medium(SI_SLD, 3.2),
    );
    let q: Vec<f64> = (0..80).map(|i| 0.01 * (0.25f64 / 0.01).powf(i as f64 / 79.0)).collect();
    let r = compute_reflectivity(&truth, &QGrid::new(q.clone()).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sigma: Vec<f64> = r.iter().map(|v| 0.03 * v).collect();
    let obs: Vec<f64> = r
        .iter()
        .zip(&sigma)
        .map(|(v, s)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + s * e
        })
        .collect();
    let curve = ReflectivityCurve::new(q, obs, sigma, None, "bilayer").unwrap();
    std::fs::write(dir.join("bilayer.dat"), curve.to_text()).unwrap();
    let cfg = format!(
        r#"{{
  "data": "bilayer.dat",
  "model": {{
    "fronting": {{"sld": 0.0}},
    "layers": [
      {{"name": "head",
        "thickness": {{"name": "d_h", "value": 10.0, "prior": {{"type": "uniform", "lower": 8.0, "upper": 16.0}}}},
        "sld": {{"name": "rho_h", "value": 1.9, "prior": {{"type": "uniform", "lower": 0.5, "upper": 3.5}}}},
        "roughness": {{"name": "sigma_h", "value": 3.2}}}},
      {{"name": "tail",
        "thickness": {{"name": "d_t", "value": 21.0, "prior": {{"type": "uniform", "lower": 10.0, "upper": 26.0}}}},
        "sld": {{"name": "rho_t", "value": -0.2}},
        "roughness": {{"name": "sigma_t", "value": 3.2}}}}
    ],
    "backing": {{"sld": 2.074,
      "roughness": {{"name": "sigma", "value": 3.2,
                     "prior": {{"type": "half_open_lower", "lower": 2.9}}, "init": [2.9, 4.0]}}}}
  }},
  "likelihood": {{"kind": "gaussian", "transform": "logR"}},
  "sampler": {{"walkers": {walkers}, "steps": {steps}, "seed": {seed}}}
}}"#
    );
    let path = dir.join("bilayer.json");
    std::fs::write(&path, cfg).unwrap();
    path
}
