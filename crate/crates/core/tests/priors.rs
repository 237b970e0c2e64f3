use proptest::prelude::*;
use reflbayes::priors::{kde_from_chain, PriorSpec};
use reflbayes::Prior;

/// Composite Simpson over [a, b] with n (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Integrates over the prior's support, splitting the range into pieces so
/// narrow KDE kernels are resolved.
fn total_mass(p: &Prior) -> f64 {
    let (lo, hi) = p.effective_range().unwrap();
    let pieces = 200;
    let w = (hi - lo) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (a, b) = (lo + i as f64 * w, lo + (i + 1) as f64 * w);
            // keep the uniform's open upper end out of the last panel
            let b = if i + 1 == pieces { b - 1e-12 * w } else { b };
            simpson(|x| p.pdf(x), a, b, 16)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn proper_priors_integrate_to_one(
        lo in -50.0..50.0f64, width in 0.01..100.0f64, mu in -10.0..10.0f64, sigma in 0.01..20.0f64,
        samples in prop::collection::vec(-5.0..5.0f64, 3..60), factor in 0.05..1.5f64,
    ) {
        let priors = [Prior::uniform(lo, lo + width).unwrap(), Prior::normal(mu, sigma).unwrap()];
        for p in &priors {
            let m = total_mass(p);
            prop_assert!((m - 1.0).abs() < 1e-3, "{p}: {m}");
        }
        if let Ok(kde) = kde_from_chain(&samples, factor) {
            let m = total_mass(&kde);
            prop_assert!((m - 1.0).abs() < 1e-3, "kde: {m}");
        }
    }

    #[test]
    fn specs_round_trip_json(lo in -1e3..1e3f64, width in 1e-3..1e3f64, sigma in 1e-3..1e2f64) {
        for spec in [
            PriorSpec::Uniform { lower: lo, upper: lo + width },
            PriorSpec::HalfOpenLower { lower: lo },
            PriorSpec::Normal { mu: lo, sigma },
        ] {
            let text = serde_json::to_string(&spec).unwrap();
            prop_assert_eq!(serde_json::from_str::<PriorSpec>(&text).unwrap(), spec);
        }
    }
}
