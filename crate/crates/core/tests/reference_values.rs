use mse_core::inference::{estimate_population, p_value, stepwise, Method};
use mse_core::{BuiltinDataset, CaptureDataset, ModelSpec};

fn sig2(x: f64) -> f64 {
    let e = x.abs().log10().floor();
    let scale = 10f64.powf(e - 1.0);
    (x / scale).round() * scale
}

fn full_model_p(d: &CaptureDataset, pair: &str) -> f64 {
    let full = ModelSpec::full(d.t());
    p_value(d, &full, d.parse_pair(pair).unwrap()).unwrap().p
}

#[test]
fn nonoverlap_p_values() {
    let nl = BuiltinDataset::Netherlands.load();
    let uk = BuiltinDataset::Uk.load();
    let cases = [
        (&nl, "I:K", 9.1e-4),
        (&nl, "K:R", 2.1e-5),
        (&uk, "LA:GP", 0.13),
        (&uk, "LA:NCA", 0.30),
    ];
    for (d, pair, want) in cases {
        let p = full_model_p(d, pair);
        assert!((sig2(p) - want).abs() < 1e-3 * want, "{pair}: {p:e}");
    }
}

fn pair_labels(d: &CaptureDataset, s: &mse_core::inference::Stepwise) -> Vec<String> {
    s.fit.spec.pairs().iter().map(|p| d.pair_label(p)).collect()
}

#[test]
fn stepwise_point_estimates() {
    let cases: [(BuiltinDataset, f64, f64, &[&str]); 5] = [
        (BuiltinDataset::NewOrleans, 0.02, 1184.0, &["D:E"]),
        (BuiltinDataset::NewOrleans, 0.01, 997.0, &[]),
        (BuiltinDataset::NewOrleans5, 0.02, 1034.0, &[]),
        (BuiltinDataset::NewOrleans5, 0.05, 1034.0, &[]),
        (BuiltinDataset::Western, 0.02, 2483.0, &["A:E"]),
    ];
    for (which, tau, want, pairs) in cases {
        let d = which.load();
        let s = stepwise(&d, tau).unwrap();
        let est = s.fit.population_estimate;
        assert!((est - want).abs() <= 1.0, "{which} at {tau}: {est}");
        assert_eq!(pair_labels(&d, &s), pairs);
    }
}

#[test]
fn main_effects_new_orleans() {
    let d = BuiltinDataset::NewOrleans.load();
    let e = estimate_population(&d, Method::MainEffects).unwrap();
    assert!((e.estimate() - 997.0).abs() <= 1.0, "{}", e.estimate());
}
