//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero on failure.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reflbayes::chain_io::{chain_from_str, chain_to_string};
use reflbayes::config::RunConfig;
use reflbayes::diagnostics::{autocorr_time, gelman_rubin, normality_test};
use reflbayes::kernel::{critical_q, SLD_UNIT};
use reflbayes::likelihood::{chi_squared, log_likelihood_gaussian};
use reflbayes::pipeline::{analyze, fit, prepare};
use reflbayes::report::REPORT_SCHEMA;
use reflbayes::sampler::{burn_and_pool, init_walkers, run_sampler, ChainMeta, SamplerSettings, ThinRecord};
use reflbayes::summary::quantile_sorted;
use reflbayes::{compute_reflectivity, Chain, Layer, Prior, QGrid, ReflectivityCurve, SlabModel, Transform};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn random_stack(rng: &mut ChaCha8Rng, layers: usize, rough: bool) -> SlabModel {
    let s = |rng: &mut ChaCha8Rng| if rough { rng.gen_range(0.0..6.0) } else { 0.0 };
    let ls = (0..layers)
        .map(|_| Layer::new(rng.gen_range(5.0..100.0), rng.gen_range(-0.5..7.0), s(rng)))
        .collect();
    let back = Layer::medium(rng.gen_range(0.0..6.5), s(rng));
    SlabModel::new(Layer::medium(0.0, 0.0), ls, back)
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| rel(*x, *y)).fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let delta = 2.074;
    let qc = critical_q(delta);
    let grid = QGrid::linspace(0.5 * qc, 10.0 * qc, 500).map_err(|e| e.to_string())?;
    let si = SlabModel::new(Layer::medium(0.0, 0.0), vec![], Layer::medium(delta, 0.0));
    let r = compute_reflectivity(&si, &grid).map_err(|e| e.to_string())?;
    let fresnel: Vec<f64> = grid
        .values()
        .iter()
        .map(|&q| {
            let k0 = Complex64::new(q / 2.0, 0.0);
            let k1 = (k0 * k0 - 4.0 * PI * delta * SLD_UNIT).sqrt();
            ((k0 - k1) / (k0 + k1)).norm_sqr()
        })
        .collect();
    let fres_err = max_rel(&r, &fresnel);
    check(fres_err <= 1e-10, format!("Fresnel deviation {fres_err:.2e}"))?;

    let q = QGrid::linspace(0.005, 0.3, 200).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut zero_err, mut split_err) = (0.0f64, 0.0f64);
    for trial in 0..50 {
        let n = 1 + trial % 4;
        // zero-thickness layer: arbitrary SLD in a smooth stack, and a rough
        // stack with the inserted layer copying the medium below
        for rough in [false, true] {
            let base = random_stack(&mut rng, n, rough);
            let at = rng.gen_range(0..=n);
            let mut with = base.clone();
            let inserted = if rough {
                let below = base.layers.get(at).copied().unwrap_or(base.backing);
                Layer::new(0.0, below.sld, below.roughness)
            } else {
                Layer::new(0.0, rng.gen_range(-0.5..7.0), 0.0)
            };
            with.layers.insert(at, inserted);
            let a = compute_reflectivity(&base, &q).unwrap();
            let b = compute_reflectivity(&with, &q).unwrap();
            zero_err = zero_err.max(max_rel(&b, &a));
        }
        let base = random_stack(&mut rng, n, true);
        let which = rng.gen_range(0..n);
        let frac = rng.gen_range(0.05..0.95);
        let mut split = base.clone();
        let orig = base.layers[which];
        split.layers[which].thickness = orig.thickness * frac;
        split
            .layers
            .insert(which + 1, Layer::new(orig.thickness * (1.0 - frac), orig.sld, 0.0));
        let a = compute_reflectivity(&base, &q).unwrap();
        let b = compute_reflectivity(&split, &q).unwrap();
        split_err = split_err.max(max_rel(&b, &a));
    }
    check(zero_err <= 1e-12, format!("zero-thickness deviation {zero_err:.2e}"))?;
    check(split_err <= 1e-12, format!("layer-split deviation {split_err:.2e}"))?;
    Ok(format!(
        "Fresnel max rel err {fres_err:.1e} over 500 q; zero-thickness {zero_err:.1e}; split {split_err:.1e}"
    ))
}

fn criterion_2() -> Outcome {
    let curve = |q: f64, r: f64, s: f64| ReflectivityCurve::new(vec![q], vec![r], vec![s], None, "t").unwrap();
    let data = ReflectivityCurve::new(
        vec![0.01, 0.05, 0.1, 0.2],
        vec![0.9, 1e-3, 2e-5, 3e-7],
        vec![0.05, 1e-4, 3e-6, 1e-7],
        None,
        "t",
    )
    .unwrap();
    for t in [Transform::Linear, Transform::LogR, Transform::Rq4] {
        let c = chi_squared(&data, data.r(), t).map_err(|e| e.to_string())?;
        check(c == 0.0, format!("chi2 of perfect fit is {c} for {t:?}"))?;
    }
    let s = (2.0 * PI).powf(-0.5);
    let unit = ReflectivityCurve::new(vec![0.01, 0.02, 0.03], vec![0.5, 0.2, 0.1], vec![s; 3], None, "t").unwrap();
    let ln_l = log_likelihood_gaussian(&unit, unit.r(), Transform::Linear).map_err(|e| e.to_string())?;
    check(ln_l == 0.0, format!("lnL with sigma=(2pi)^-1/2 is {ln_l:e}"))?;

    // hand-computed single points
    // Rq4: R=1e-4, σ=1e-5, q=0.1, model 2e-4 → ((1e-8 − 2e-8)/1e-9)² = 100
    let rq4 = chi_squared(&curve(0.1, 1e-4, 1e-5), &[2e-4], Transform::Rq4).unwrap();
    check(rel(rq4, 100.0) < 1e-12, format!("Rq4 chi2 {rq4}"))?;
    // logR: R=1e-3, σ=1e-4, model 1e-2 → (−3 − (−2))² / (1e-4/(1e-3 ln10))² = (ln 10)² · 100
    let logr = chi_squared(&curve(0.1, 1e-3, 1e-4), &[1e-2], Transform::LogR).unwrap();
    let expected = 100.0 * 10f64.ln().powi(2);
    check(rel(logr, expected) < 1e-12, format!("logR chi2 {logr} vs {expected}"))?;
    // linear: (0.5 − 0.3)² / 0.1² = 4
    let lin = chi_squared(&curve(0.1, 0.5, 0.1), &[0.3], Transform::Linear).unwrap();
    check(rel(lin, 4.0) < 1e-12, format!("linear chi2 {lin}"))?;
    Ok(format!("chi2=0 exact, lnL=0 exact; Rq4={rq4:.6}, logR={logr:.6}, linear={lin:.6}"))
}

fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("x{i}")).collect()
}

fn correlated(x: &[f64]) -> f64 {
    -(x[0] * x[0] - 1.6 * x[0] * x[1] + x[1] * x[1]) / (2.0 * 0.36)
}

fn affine_runs(scale: [f64; 2], shift: [f64; 2], steps: usize) -> (Vec<f64>, Vec<f64>, bool) {
    let to_x = move |y: &[f64]| [(y[0] - shift[0]) / scale[0], (y[1] - shift[1]) / scale[1]];
    let settings = SamplerSettings::with_defaults(2, steps, 31);
    let priors = [Prior::normal(0.0, 1.0).unwrap(), Prior::normal(0.0, 1.0).unwrap()];
    let init_x = init_walkers(&names(2), &priors, &[], settings.walkers, 31).unwrap();
    let init_y: Vec<Vec<f64>> = init_x
        .iter()
        .map(|p| vec![scale[0] * p[0] + shift[0], scale[1] * p[1] + shift[1]])
        .collect();
    let a = run_sampler(correlated, &names(2), &init_x, &settings).unwrap();
    let b = run_sampler(|y: &[f64]| correlated(&to_x(y)), &names(2), &init_y, &settings).unwrap();
    let back: Vec<f64> = b.chain.values().chunks(2).flat_map(to_x).collect();
    (a.chain.values().to_vec(), back, a.acceptance == b.acceptance)
}

fn criterion_3() -> Outcome {
    let flat = Prior::uniform(-1e3, 1e3).unwrap();
    let lp = |x: &[f64]| flat.log_pdf(x[0]) - 0.5 * x[0] * x[0];
    let settings = SamplerSettings {
        walkers: 32,
        ..SamplerSettings::with_defaults(1, 5000, 2024)
    };
    let init = init_walkers(&names(1), &[Prior::uniform(-3.0, 3.0).unwrap()], &[], 32, 2024).unwrap();
    let out = run_sampler(lp, &names(1), &init, &settings).map_err(|e| e.to_string())?;
    let (_, pooled) = burn_and_pool(&out.chain, settings.burn).unwrap();
    let xs = pooled.column(0);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    check(mean.abs() < 0.05, format!("mean {mean}"))?;
    check((std - 1.0).abs() <= 0.05, format!("std {std}"))?;

    let (x, y, same) = affine_runs([2.0, -0.25], [0.0, 0.0], 3000);
    let bit_exact = same && x.iter().zip(&y).all(|(a, b)| a.to_bits() == b.to_bits());
    check(bit_exact, "representable affine map not bit-exact")?;
    let (x, y, same) = affine_runs([2.0, 2.0], [5.0, 5.0], 120);
    let dev = x.iter().zip(&y).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max);
    check(same && dev < 1e-9, format!("2x+5: decisions equal {same}, deviation {dev:.1e}"))?;
    Ok(format!(
        "mean {mean:+.4}, std {std:.4}; diag(2,-1/4) bit-exact over 3000 steps; 2x+5 identical decisions, dev {dev:.0e}"
    ))
}

fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    common::ar1(phi, n, seed)
}

fn criterion_4() -> Outcome {
    let tau = autocorr_time(&[ar1(0.9, 1_000_000, 2)]).map_err(|e| e.to_string())?.tau;
    check((tau - 19.0).abs() <= 0.15 * 19.0, format!("AR(1) tau {tau}"))?;

    let a = common::normals(1000, 3);
    let r = gelman_rubin(&[a.clone(), a]).map_err(|e| e.to_string())?;
    check(r == (999.0f64 / 1000.0).sqrt(), format!("identical-chain R-hat {r}"))?;

    let p_u = normality_test(&common::uniforms(1000, 10)).unwrap().p_value;
    let p_n = normality_test(&common::normals(1000, 9)).unwrap().p_value;
    check(p_u < 0.001, format!("uniform p {p_u}"))?;
    check(p_n > 0.001, format!("normal p {p_n}"))?;

    let rejected = (0..2000u64)
        .filter(|&s| normality_test(&common::normals(500, 10_000 + s)).unwrap().p_value < 0.05)
        .count();
    let rate = rejected as f64 / 2000.0;
    check((0.03..=0.07).contains(&rate), format!("calibration rate {rate}"))?;
    Ok(format!(
        "tau {tau:.2} (19 ± 15%); R-hat {r:.6} exact; p(U)={p_u:.1e}, p(N)={p_n:.3}; rejection rate {rate:.4}"
    ))
}

fn criterion_5() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = common::write_film_project(dir.path(), 64, 4000, 20240);
    let (cfg, base) = RunConfig::load(&cfg_path).map_err(|e| e.to_string())?;
    let prep = prepare(cfg, &base, None).map_err(|e| e.to_string())?;
    let out = fit(&prep).map_err(|e| e.to_string())?;
    let analysis = analyze(&out.chain, &prep.units(), None, &prep.options).map_err(|e| e.to_string())?;
    let truth = [common::TRUE_D, common::TRUE_RHO, common::TRUE_SIGMA];
    let mut parts = Vec::new();
    for (j, name) in analysis.burnt.names().iter().enumerate() {
        let mut xs = analysis.pooled.column(j);
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let median = quantile_sorted(&xs, 0.5);
        let z = (median - truth[j]).abs() / std;
        let r_hat = analysis.diagnostics.parameters[j].r_hat;
        check(z <= 3.0, format!("{name}: median {median} is {z:.2} std from {}", truth[j]))?;
        check(r_hat < 1.05, format!("{name}: R-hat {r_hat}"))?;
        parts.push(format!("{name} {median:.3}±{std:.3} ({z:.2}σ, R̂ {r_hat:.3})"));
    }
    Ok(parts.join("; "))
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = common::write_table1_project(dir.path(), 32, 1200, 5);
    let (_, report) = common::run_pipeline(&cfg, &dir.path().join("out"), "2026-01-01T00:00:00Z");
    let instance: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let validator = jsonschema::JSONSchema::compile(&schema).map_err(|e| e.to_string())?;
    if let Err(errors) = validator.validate(&instance) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        return Err(format!("schema: {msgs:?}"));
    }
    let md = report.to_markdown();
    let free = ["d_h", "rho_h", "d_t", "sigma"];
    let checklist: Vec<(&str, bool)> = vec![
        ("prior table header", md.contains("| Parameter | Constrained Value | Prior Range |")),
        ("Table 1 row", md.contains("| d_h/Å | 10.0 | [8.0, 16.0) |")),
        ("improper prior row", md.contains("| sigma/Å | 3.2 | [2.9, ∞) |")),
        ("likelihood spec", md.contains(&report.likelihood.description) && md.contains("\"transform\":\"logR\"")),
        ("seed", md.contains("Random seed: 5") && report.sampler.seed == 5),
        ("version", !report.software.version.is_empty() && md.contains(&report.software.version)),
        ("sampler settings", md.contains("Walkers: 32") && md.contains("Steps per walker: 1200") && md.contains("Stretch scale a: 2.0")),
        ("burn-in", md.contains("Burn-in discarded: 300 steps")),
        ("thin record", md.contains("- Thinning: ")),
        (
            "R-hat/tau/MCSE per parameter",
            free.iter().all(|p| md.lines().any(|l| l.starts_with(&format!("| {p} | ")))),
        ),
        (
            "summaries with form + threshold",
            report.summaries.iter().all(|s| s.threshold == 0.001) && md.contains("normal form reported when p >= 0.001"),
        ),
        (
            "CI level when interval",
            report.summaries.iter().all(|s| s.is_normal() || md.contains("95% CI")),
        ),
        ("chain + data paths", md.contains("`chain.reflchain`") && md.contains("`../bilayer.dat`")),
    ];
    let failed: Vec<&str> = checklist.iter().filter(|c| !c.1).map(|c| c.0).collect();
    check(failed.is_empty(), format!("checklist failures: {failed:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for _ in 0..100 {
        let (w, n, m) = (rng.gen_range(1..6), rng.gen_range(1..40), rng.gen_range(1..5));
        let values: Vec<f64> = (0..w * n * m)
            .map(|_| match rng.gen_range(0..3) {
                0 => f64::from_bits(rng.gen::<u64>() & !(0x7ff << 52) | (rng.gen_range(1..2046u64) << 52)),
                1 => rng.gen_range(-1e4..1e4),
                _ => rng.gen::<f64>() * 1e-300,
            })
            .collect();
        let chain = Chain::from_parts(
            ChainMeta {
                names: (0..m).map(|j| format!("p{j}")).collect(),
                shape: [w, n, m],
                seed: rng.gen(),
                stretch: rng.gen_range(1.1..4.0),
                burn_in: rng.gen_range(0..100),
                planned_burn: rng.gen_range(0..100),
                acceptance_fraction: rng.gen(),
                thin: ThinRecord {
                    applied: true,
                    interval: rng.gen_range(2..9),
                    tau: (0..m).map(|_| rng.gen_range(1.0..30.0)).collect(),
                },
                version: "reflbayes".into(),
            },
            values,
        )
        .unwrap();
        let back = chain_from_str(&chain_to_string(&chain)).map_err(|e| e.to_string())?;
        let exact = back.meta() == chain.meta()
            && back.values().iter().zip(chain.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        check(exact, "chain round trip not bit-exact")?;
    }
    Ok(format!("schema valid; {} checklist items; 100 random chains bit-exact", checklist.len()))
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = common::write_film_project(dir.path(), 32, 1500, 77);
    let run = |threads: usize, sub: &str, stamp: &str| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| common::run_pipeline(&cfg, &dir.path().join(sub), stamp))
    };
    let (chain1, rep1) = run(1, "one", "2026-01-01T00:00:00Z");
    let (chain4, rep4) = run(4, "four", "2026-06-30T12:00:00Z");
    check(chain1 == chain4, "chain files differ between 1 and 4 threads")?;
    let (j1, j4) = (rep1.to_json(), rep4.to_json());
    check(
        common::without_timestamp(&j1) == common::without_timestamp(&j4),
        "reports differ beyond the timestamp",
    )?;
    check(rep1.to_markdown().replace("2026-01-01T00:00:00Z", "") == rep4.to_markdown().replace("2026-06-30T12:00:00Z", ""), "markdown differs")?;
    Ok(format!(
        "1 vs 4 threads: chain files identical ({} bytes), reports identical modulo timestamp",
        chain1.len()
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("1 kernel oracle", criterion_1, Duration::from_secs(1)),
        ("2 likelihood identities", criterion_2, Duration::from_secs(1)),
        ("3 sampler calibration", criterion_3, Duration::from_secs(30)),
        ("4 diagnostics oracles", criterion_4, Duration::from_secs(120)),
        ("5 synthetic recovery", criterion_5, Duration::from_secs(300)),
        ("6 reporting compliance", criterion_6, Duration::from_secs(30)),
        ("7 determinism", criterion_7, Duration::from_secs(600)),
    ];
    let mut failures = 0;
    for (label, run, limit) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= limit {
                Ok(detail)
            } else {
                Err(format!("took {:.2}s, limit {}s ({detail})", elapsed.as_secs_f64(), limit.as_secs()))
            }
        });
        match outcome {
            Ok(detail) => println!("criterion {label}: PASS [{:.2}s] {detail}", elapsed.as_secs_f64()),
            Err(detail) => {
                failures += 1;
                println!("criterion {label}: FAIL [{:.2}s] {detail}", elapsed.as_secs_f64());
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
