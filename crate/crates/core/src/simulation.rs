//! Model-based Monte Carlo studies.
//!
//! Realizations are drawn from a fitted model treated as the truth, with the
//! population size fixed at the rounded estimate. Two studies are built on
//! that: the choice of stepwise threshold judged by the error in log
//! population size, and the null distribution of the deviance drop for one
//! two-list term.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Poisson};

use crate::bootstrap::quantile_type6;
use crate::capture_data::{CaptureHistory, CellCounts, ListPair};
use crate::error::{Error, Result};
use crate::estimability::check_model;
use crate::exec::{Executor, Sequential};
use crate::inference::{estimate_population_cells, stepwise_cells, Method};
use crate::loglinear::{fit_cells, FitOptions, FitResult, ModelSpec};
use crate::math::{chi2_1_quantile, ln, round};
use crate::rng::{multinomial, substream, Domain};

/// Estimation thresholds of the threshold study.
pub const STUDY_THRESHOLDS: [f64; 9] = [0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 1.0];

/// Thresholds used to build scenario models.
pub const SCENARIO_THRESHOLDS: [f64; 4] = [0.0, 0.001, 0.05, 1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    /// Index of the draw, which also selects its random stream.
    pub index: usize,
    pub cells: CellCounts,
    pub dark_figure: u64,
}

#[derive(Clone, Debug)]
pub struct SimulationBatch {
    pub n_pop: u64,
    /// Dark-figure estimate of the generating fit.
    pub source_dark: f64,
    pub n_sims: usize,
    pub realizations: Vec<Realization>,
    pub n_removed: usize,
}

impl SimulationBatch {
    pub fn dark_figures(&self) -> Vec<u64> {
        self.realizations.iter().map(|r| r.dark_figure).collect()
    }
}

/// Whether both endpoint models of a threshold sweep can be estimated:
/// the main-effects MLE exists and the all-pairs MLE exists and is
/// identifiable.
pub fn endpoints_estimable(cells: &CellCounts) -> Result<bool> {
    let t = cells.t();
    Ok(check_model(cells, &ModelSpec::main_effects(t))?.is_ok()
        && check_model(cells, &ModelSpec::full(t))?.is_ok())
}

/// Drops realizations whose endpoint models cannot be estimated.
pub fn filter_realizations<E: Executor>(
    realizations: Vec<Realization>,
    exec: &E,
) -> Result<(Vec<Realization>, usize)> {
    let keep = exec.map(realizations.len(), |k| {
        endpoints_estimable(&realizations[k].cells)
    });
    let mut kept = Vec::with_capacity(realizations.len());
    let mut removed = 0;
    for (r, ok) in realizations.into_iter().zip(keep) {
        if ok? {
            kept.push(r);
        } else {
            removed += 1;
        }
    }
    Ok((kept, removed))
}

/// Draws `n_sims` tables from the population implied by `fit`.
pub fn simulate_from_fit<E: Executor>(
    fit: &FitResult,
    n_sims: usize,
    seed: u64,
    exec: &E,
) -> Result<SimulationBatch> {
    if !fit.converged {
        return Err(Error::InvalidArgument("simulation needs a converged fit".into()));
    }
    let t = fit.t();
    let n_pop = fit.observed_total + round(fit.dark_figure) as u64;
    let mut weights = Vec::with_capacity(fit.fitted.len() + 1);
    weights.push(fit.dark_figure);
    weights.extend_from_slice(&fit.fitted);

    let drawn = exec.map(n_sims, |i| {
        let mut rng = substream(seed, Domain::Simulation, i as u32, 0);
        let x = multinomial(n_pop, &weights, &mut rng);
        let mut counts = vec![0u64; 1 << t];
        for (w, &n) in fit.omega.iter().zip(&x[1..]) {
            counts[w.bits() as usize] = n;
        }
        // A draw with nobody observed has no estimate at all.
        CellCounts::new(t, counts).ok().map(|cells| Realization {
            index: i,
            cells,
            dark_figure: x[0],
        })
    });
    let empty = drawn.iter().filter(|r| r.is_none()).count();
    let (realizations, removed) = filter_realizations(drawn.into_iter().flatten().collect(), exec)?;
    Ok(SimulationBatch {
        n_pop,
        source_dark: fit.dark_figure,
        n_sims,
        realizations,
        n_removed: removed + empty,
    })
}

/// Population estimates of one table at each threshold (0 is the
/// main-effects model, 1 the full model, others stepwise).
pub fn estimate_realization(cells: &CellCounts, thresholds: &[f64]) -> Result<Vec<f64>> {
    let interior_max = thresholds
        .iter()
        .copied()
        .filter(|&tau| tau > 0.0 && tau < 1.0)
        .fold(None, |acc: Option<f64>, tau| {
            Some(acc.map_or(tau, |a| a.max(tau)))
        });
    // One run at the largest threshold answers every smaller one.
    let trail = match interior_max {
        Some(tau) => Some(stepwise_cells(cells, tau, &Sequential)?.trail),
        None => None,
    };
    let mut main = None;
    let mut full = None;
    thresholds
        .iter()
        .map(|&tau| match Method::from_threshold(tau) {
            Method::Stepwise(tau) => Ok(trail.as_ref().expect("interior threshold").estimate_at(tau)),
            Method::MainEffects => cached(&mut main, cells, Method::MainEffects),
            _ => cached(&mut full, cells, Method::Full),
        })
        .collect()
}

fn cached(slot: &mut Option<f64>, cells: &CellCounts, method: Method) -> Result<f64> {
    if let Some(v) = *slot {
        return Ok(v);
    }
    let v = estimate_population_cells(cells, method, &Sequential)?.estimate();
    *slot = Some(v);
    Ok(v)
}

/// Realization-by-threshold matrix of population estimates.
pub fn estimate_over_thresholds<E: Executor>(
    batch: &SimulationBatch,
    thresholds: &[f64],
    exec: &E,
) -> Result<Vec<Vec<f64>>> {
    exec.map(batch.realizations.len(), |k| {
        estimate_realization(&batch.realizations[k].cells, thresholds)
    })
    .into_iter()
    .collect()
}

/// `ln(mean((ln est - ln n_pop)^2))` for each column.
pub fn log_mse(estimates: &[Vec<f64>], n_pop: u64, columns: usize) -> Vec<f64> {
    let truth = ln(n_pop as f64);
    (0..columns)
        .map(|c| {
            let sq: f64 = estimates
                .iter()
                .map(|row| {
                    let e = ln(row[c]) - truth;
                    e * e
                })
                .sum();
            ln(sq / estimates.len() as f64)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub cells: CellCounts,
    /// Threshold used to build the generating model (0 main, 1 full).
    pub model_threshold: f64,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub name: String,
    pub model_threshold: f64,
    pub n_pop: u64,
    pub n_sims: usize,
    pub n_removed: usize,
    pub log_mse: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SkippedScenario {
    pub name: String,
    pub model_threshold: f64,
    pub reason: Error,
}

#[derive(Clone, Debug)]
pub struct ThresholdStudyResult {
    pub est_thresholds: Vec<f64>,
    pub scenarios: Vec<ScenarioOutcome>,
    pub skipped: Vec<SkippedScenario>,
    pub column_means: Vec<f64>,
}

fn run_scenario<E: Executor>(
    s: &Scenario,
    n_sims: usize,
    est_thresholds: &[f64],
    seed: u64,
    exec: &E,
) -> Result<ScenarioOutcome> {
    let model = estimate_population_cells(&s.cells, Method::from_threshold(s.model_threshold), exec)?;
    let batch = simulate_from_fit(&model.fit, n_sims, seed, exec)?;
    let estimates = estimate_over_thresholds(&batch, est_thresholds, exec)?;
    Ok(ScenarioOutcome {
        name: s.name.clone(),
        model_threshold: s.model_threshold,
        n_pop: batch.n_pop,
        n_sims,
        n_removed: batch.n_removed,
        log_mse: log_mse(&estimates, batch.n_pop, est_thresholds.len()),
    })
}

/// Log mean squared error of the log population estimate for each scenario
/// and estimation threshold. Every scenario reuses `seed`.
pub fn threshold_study<E: Executor>(
    scenarios: &[Scenario],
    n_sims: usize,
    est_thresholds: &[f64],
    seed: u64,
    exec: &E,
) -> Result<ThresholdStudyResult> {
    if let Some(tau) = est_thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(alloc::format!(
            "threshold {tau} outside [0, 1]"
        )));
    }
    let mut outcomes = Vec::new();
    let mut skipped = Vec::new();
    for s in scenarios {
        match run_scenario(s, n_sims, est_thresholds, seed, exec) {
            Ok(o) => outcomes.push(o),
            Err(reason) if reason.is_estimability() => skipped.push(SkippedScenario {
                name: s.name.clone(),
                model_threshold: s.model_threshold,
                reason,
            }),
            Err(e) => return Err(e),
        }
    }
    let column_means = (0..est_thresholds.len())
        .map(|c| outcomes.iter().map(|o| o.log_mse[c]).sum::<f64>() / outcomes.len() as f64)
        .collect();
    Ok(ThresholdStudyResult {
        est_thresholds: est_thresholds.to_vec(),
        scenarios: outcomes,
        skipped,
        column_means,
    })
}

#[derive(Clone, Debug)]
pub struct DevianceStudy {
    /// Deviance reductions of the simulations that could be fitted, in
    /// simulation order.
    pub reductions: Vec<f64>,
    pub n_sims: usize,
    pub n_dropped: usize,
}

impl DevianceStudy {
    pub fn mean(&self) -> f64 {
        self.reductions.iter().sum::<f64>() / self.reductions.len() as f64
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.reductions.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Empirical quantile (type 6) of the reductions.
    pub fn quantile(&self, q: f64) -> f64 {
        quantile_type6(&self.sorted(), q)
    }

    /// Sorted reductions paired with `χ²₁` quantiles at `(i - 0.5) / n`.
    pub fn qq_points(&self) -> Vec<(f64, f64)> {
        let sorted = self.sorted();
        let n = sorted.len() as f64;
        sorted
            .into_iter()
            .enumerate()
            .map(|(i, d)| (d, chi2_1_quantile((i as f64 + 0.5) / n)))
            .collect()
    }
}

/// Deviance drop from adding the first pair of lists to the main-effects
/// model, on independent Poisson tables with capture probabilities `probs`.
pub fn deviance_qq_study<E: Executor>(
    probs: &[f64],
    expected_pop: f64,
    n_sims: usize,
    seed: u64,
    exec: &E,
) -> Result<DevianceStudy> {
    if probs.len() != 3 {
        return Err(Error::InvalidArgument(alloc::format!(
            "expected 3 capture probabilities, got {}",
            probs.len()
        )));
    }
    if probs.iter().any(|p| !(0.0..1.0).contains(p)) || expected_pop.is_nan() || expected_pop <= 0.0 {
        return Err(Error::InvalidArgument(
            "capture probabilities must lie in [0, 1) and the population be positive".into(),
        ));
    }
    let t = probs.len();
    let means: Vec<f64> = (0..1u32 << t)
        .map(CaptureHistory::from_bits)
        .map(|h| {
            if h.is_empty() {
                0.0
            } else {
                independent_cell_mean(probs, expected_pop, h)
            }
        })
        .collect();
    let main = ModelSpec::main_effects(t);
    let pair = main.with(ListPair::new(0, 1)?);
    let opts = FitOptions::default();

    let outcomes = exec.map(n_sims, |i| -> Result<Option<f64>> {
        let mut rng = substream(seed, Domain::Deviance, i as u32, 0);
        let counts: Vec<u64> = means
            .iter()
            .map(|&mu| {
                if mu > 0.0 {
                    Poisson::new(mu).expect("positive mean").sample(&mut rng) as u64
                } else {
                    0
                }
            })
            .collect();
        let Ok(cells) = CellCounts::new(t, counts) else {
            return Ok(None);
        };
        let dev = |spec: &ModelSpec| match fit_cells(&cells, spec, &opts) {
            Ok(f) => Ok(Some(f.deviance)),
            Err(e) if e.is_estimability() => Ok(None),
            Err(e) => Err(e),
        };
        match (dev(&main)?, dev(&pair)?) {
            (Some(d0), Some(d1)) => Ok(Some(d0 - d1)),
            _ => Ok(None),
        }
    });
    let mut reductions = Vec::with_capacity(n_sims);
    for o in outcomes {
        if let Some(d) = o? {
            reductions.push(d);
        }
    }
    Ok(DevianceStudy {
        n_dropped: n_sims - reductions.len(),
        n_sims,
        reductions,
    })
}

/// `pop · ∏_{i∈ω} p_i · ∏_{i∉ω} (1 - p_i)`.
pub fn independent_cell_mean(probs: &[f64], expected_pop: f64, h: CaptureHistory) -> f64 {
    (0..probs.len()).fold(expected_pop, |acc, i| {
        acc * if h.contains_list(i) {
            probs[i]
        } else {
            1.0 - probs[i]
        }
    })
}
