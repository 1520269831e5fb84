mod oracles;

use mse_core::bootstrap::{
    acceleration, bca_interval, bias_correction, bootstrap_estimate, bootstrap_sample, BootstrapConfig,
};
use mse_core::inference::p_value_cells;
use mse_core::loglinear::{fit_cells, FitOptions};
use mse_core::math::{normal_quantile, poisson_cdf};
use mse_core::rng::{multinomial, substream, Domain};
use mse_core::{
    check_model, BuiltinDataset, CaptureDataset, CaptureHistory, CellCounts, Executor, ListPair, Method,
    ModelSpec, Sequential,
};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn table(t: usize) -> impl Strategy<Value = CellCounts> {
    let cell = prop_oneof![1 => Just(0u64), 2 => 1u64..40];
    prop::collection::vec(cell, (1 << t) - 1).prop_filter_map("empty table", move |rest| {
        let mut counts = vec![0];
        counts.extend(rest);
        CellCounts::new(t, counts).ok()
    })
}

fn any_table() -> impl Strategy<Value = CellCounts> {
    (3usize..=5).prop_flat_map(table)
}

fn spec_from_mask(t: usize, mask: u64) -> ModelSpec {
    ModelSpec::with_pairs(
        t,
        ListPair::all(t)
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, p)| p),
    )
    .unwrap()
}

/// Evaluates items back to front, to show order does not leak into results.
struct Reversed;

impl Executor for Reversed {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let mut v: Vec<T> = (0..n).rev().map(f).collect();
        v.reverse();
        v
    }
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn marginal_totals_are_antitone(cells in any_table()) {
        let star = cells.marginal_totals();
        let full = (1u32 << cells.t()) - 1;
        for h in 0..=full {
            prop_assert_eq!(star[h as usize], oracles::star(cells.as_slice(), h));
            for i in 0..cells.t() {
                let bigger = h | (1 << i);
                prop_assert!(star[bigger as usize] <= star[h as usize]);
            }
        }
        prop_assert_eq!(star[0], cells.total());
    }

    #[test]
    fn merging_lists_keeps_the_total(cells in table(5), a in 0usize..5, b in 0usize..5) {
        prop_assume!(a != b);
        let labels = ["A", "B", "C", "D", "E"];
        let d = CaptureDataset::new(labels.iter().map(|s| s.to_string()).collect(), cells).unwrap();
        let merged = d.merge_lists(&[a, b], "M").unwrap();
        prop_assert_eq!(merged.t(), 4);
        prop_assert_eq!(merged.total(), d.total());
        let m = merged.label_index("M").unwrap();
        let either = d.marginal_total(CaptureHistory::singleton(a)) + d.marginal_total(CaptureHistory::singleton(b))
            - d.marginal_total(CaptureHistory::from_lists([a, b]));
        prop_assert_eq!(merged.marginal_total(CaptureHistory::singleton(m)), either);
    }

    #[test]
    fn fit_reproduces_model_margins(cells in any_table(), mask in any::<u64>()) {
        let t = cells.t();
        let spec = spec_from_mask(t, mask);
        prop_assume!(check_model(&cells, &spec).unwrap().is_ok());
        let f = fit_cells(&cells, &spec, &FitOptions::default()).unwrap();
        prop_assert!(f.converged);
        for &h in &f.theta {
            let target = cells.marginal_total(h) as f64;
            prop_assert!((f.fitted_marginal(h) - target).abs() <= 1e-6 * target.max(1.0));
        }
        prop_assert!((f.population_estimate - f.observed_total as f64 - f.dark_figure).abs() < 1e-6 * f.population_estimate);
        prop_assert!(f.deviance >= -1e-9);
    }

    #[test]
    fn p_values_lie_in_unit_interval(cells in any_table(), mask in any::<u64>(), k in 0usize..10) {
        let t = cells.t();
        let pairs: Vec<ListPair> = ListPair::all(t).collect();
        let pair = pairs[k % pairs.len()];
        let spec = spec_from_mask(t, mask).with(pair);
        if let Ok(p) = p_value_cells(&cells, &spec, pair) {
            prop_assert!((0.0..=1.0).contains(&p.p), "p = {}", p.p);
        }
    }

    #[test]
    fn resampling_keeps_total_and_support(cells in any_table(), seed in any::<u64>()) {
        let mut rng = substream(seed, Domain::Bootstrap, 0, 0);
        let r = bootstrap_sample(&cells, &mut rng);
        prop_assert_eq!(r.total(), cells.total());
        for (h, n) in r.observed() {
            prop_assert!(n > 0 && cells.count(h) > 0);
        }
    }

    #[test]
    fn petersen_on_two_lists(cells in any_table(), i in 0usize..5, j in 0usize..5) {
        let t = cells.t();
        let (i, j) = (i % t, j % t);
        prop_assume!(i != j);
        let Ok(two) = cells.restrict(&[i, j]) else { return Ok(()) };
        let (n10, n01, n11) = (
            two.count(CaptureHistory::from_bits(1)) as f64,
            two.count(CaptureHistory::from_bits(2)) as f64,
            two.count(CaptureHistory::from_bits(3)) as f64,
        );
        prop_assume!(n10 > 0.0 && n01 > 0.0 && n11 > 0.0);
        let f = fit_cells(&two, &ModelSpec::main_effects(2), &FitOptions::default()).unwrap();
        let petersen = (n10 + n11) * (n01 + n11) / n11;
        prop_assert!((f.population_estimate - petersen).abs() <= 1e-8 * petersen);
        prop_assert!((f.dark_figure - n10 * n01 / n11).abs() <= 1e-8 * petersen);
    }

    #[test]
    fn jackknife_weights_equal_expanded_values(
        pts in prop::collection::vec((1u64..6, -50.0f64..50.0), 2..12)
    ) {
        let weights: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
        let values: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let mut expanded = Vec::new();
        for &(n, v) in &pts {
            expanded.extend(std::iter::repeat_n(v, n as usize));
        }
        let (a, dot, _) = acceleration(&weights, &values);
        let (b, dot2, _) = acceleration(&vec![1.0; expanded.len()], &expanded);
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        prop_assert!((dot - dot2).abs() <= 1e-10 * (1.0 + dot.abs()));
    }

    #[test]
    fn intervals_nest(
        mut reps in prop::collection::vec(0.0f64..1000.0, 20..400),
        z0 in -1.0f64..1.0,
        a in -0.2f64..0.2,
    ) {
        reps.sort_by(f64::total_cmp);
        let i80 = bca_interval(&reps, z0, a, 0.80);
        let i95 = bca_interval(&reps, z0, a, 0.95);
        prop_assert!(i95.lo <= i80.lo && i80.hi <= i95.hi);
        prop_assert!(i80.lo <= i80.hi);
    }

    #[test]
    fn bias_correction_small_at_median(reps in prop::collection::vec(0.0f64..100.0, 1..300)) {
        let mut sorted = reps.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = sorted[n / 2];
        let (z0, _) = bias_correction(&reps, median);
        prop_assert!(z0.abs() <= normal_quantile(0.5 + 1.0 / n as f64) + 1e-12);
    }

    #[test]
    fn poisson_cdf_matches_direct_sum(n in 0u64..60, lambda in 0.01f64..40.0) {
        let mut term = (-lambda).exp();
        let mut sum = term;
        for k in 1..=n {
            term *= lambda / k as f64;
            sum += term;
        }
        prop_assert!((poisson_cdf(n, lambda) - sum.min(1.0)).abs() < 1e-10);
    }
}

#[test]
fn multinomial_moments() {
    let weights = [0.5, 0.0, 3.0, 1.5, 5.0];
    let total: f64 = weights.iter().sum();
    let n = 200u64;
    let draws = 20_000;
    let mut sums = [0.0f64; 5];
    for k in 0..draws {
        let mut rng = substream(7, Domain::Simulation, k, 0);
        let x = multinomial(n, &weights, &mut rng);
        assert_eq!(x.iter().sum::<u64>(), n);
        assert_eq!(x[1], 0);
        for (s, v) in sums.iter_mut().zip(&x) {
            *s += *v as f64;
        }
    }
    for (s, w) in sums.iter().zip(&weights) {
        let p = w / total;
        let mean = n as f64 * p;
        let se = (n as f64 * p * (1.0 - p) / draws as f64).sqrt();
        assert!(
            (s / draws as f64 - mean).abs() <= 4.0 * se + 1e-12,
            "{} vs {mean}",
            s / draws as f64
        );
    }
}

#[test]
fn bootstrap_ignores_evaluation_order() {
    let d = BuiltinDataset::Western.load();
    let config = BootstrapConfig {
        method: Method::MainEffects,
        n_boot: 60,
        levels: vec![0.8, 0.95],
        seed: 42,
    };
    let a = bootstrap_estimate(d.cells(), &config, &Sequential).unwrap();
    let b = bootstrap_estimate(d.cells(), &config, &Reversed).unwrap();
    assert_eq!(a.replicates, b.replicates);
    assert_eq!(a.intervals, b.intervals);
    let c = bootstrap_estimate(d.cells(), &BootstrapConfig { seed: 43, ..config }, &Sequential).unwrap();
    assert_ne!(a.replicates, c.replicates);
}
