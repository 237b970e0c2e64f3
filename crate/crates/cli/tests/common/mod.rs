#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use reflbayes::sampler::{ChainMeta, ThinRecord};
use reflbayes::{compute_reflectivity, Chain, Layer, QGrid, ReflectivityCurve, SlabModel};

pub fn reflbayes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reflbayes"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// One 50 Å film (ρ = 4, σ = 3) on silicon with 2 % noise.
pub fn film_data() -> String {
    let truth = SlabModel::new(
        Layer::medium(0.0, 0.0),
        vec![Layer::new(50.0, 4.0, 3.0)],
        Layer::medium(2.074, 3.0),
    );
    let q: Vec<f64> = (0..120).map(|i| 0.008 * (0.3f64 / 0.008).powf(i as f64 / 119.0)).collect();
    let r = compute_reflectivity(&truth, &QGrid::new(q.clone()).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sigma: Vec<f64> = r.iter().map(|v| 0.02 * v).collect();
    let obs: Vec<f64> = r
        .iter()
        .zip(&sigma)
        .map(|(v, s)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + s * e
        })
        .collect();
    ReflectivityCurve::new(q, obs, sigma, None, "film").unwrap().to_text()
}

pub fn film_config(walkers: usize, steps: usize, seed: Option<u64>) -> serde_json::Value {
    let mut sampler = serde_json::json!({"walkers": walkers, "steps": steps});
    if let Some(s) = seed {
        sampler["seed"] = s.into();
    }
    serde_json::json!({
        "data": "film.dat",
        "model": {
            "fronting": {"sld": 0.0},
            "layers": [{"name": "film",
                "thickness": {"value": 50.0, "prior": {"type": "uniform", "lower": 30.0, "upper": 70.0}},
                "sld": {"value": 4.0, "prior": {"type": "uniform", "lower": 2.0, "upper": 6.0}},
                "roughness": {"value": 3.0, "prior": {"type": "uniform", "lower": 1.0, "upper": 6.0}}}],
            "backing": {"sld": 2.074, "roughness": 3.0}
        },
        "likelihood": {"kind": "gaussian", "transform": "linear"},
        "sampler": sampler,
        "report": {"threshold": 0.001, "ci_level": 95}
    })
}

/// Writes film.dat and run.json into `dir`; returns the config path.
pub fn film_project(dir: &Path, config: &serde_json::Value) -> PathBuf {
    std::fs::write(dir.join("film.dat"), film_data()).unwrap();
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

pub fn chain_from(names: &[&str], walkers: usize, steps: usize, values: Vec<f64>) -> Chain {
    Chain::from_parts(
        ChainMeta {
            names: names.iter().map(|s| s.to_string()).collect(),
            shape: [walkers, steps, names.len()],
            seed: 1,
            stretch: 2.0,
            burn_in: 0,
            planned_burn: 0,
            acceptance_fraction: 0.5,
            thin: ThinRecord::default(),
            version: reflbayes::VERSION.into(),
        },
        values,
    )
    .unwrap()
}

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}
