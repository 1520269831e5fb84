//! Significance of two-list terms and forward stepwise selection.

use alloc::vec::Vec;

use crate::capture_data::{CaptureDataset, CellCounts, ListPair};
use crate::error::{Error, Result};
use crate::estimability::{check_model, Verdict};
use crate::exec::{Executor, Sequential};
use crate::loglinear::{fit_cells, FitOptions, FitResult, ModelSpec};
use crate::math::poisson_min_tail;

/// Default p-value threshold for stepwise selection.
pub const DEFAULT_THRESHOLD: f64 = 0.02;

/// Candidates whose p-values differ by less than this are tied.
pub const TIE_TOL: f64 = 1e-12;

/// Significance of one two-list term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PValue {
    pub pair: ListPair,
    pub p: f64,
    /// Fitted `E[N*_θ]` under the model without the term; `None` when that
    /// model has no MLE (the term cannot be removed, so `p = 0`).
    pub lambda: Option<f64>,
    pub observed: u64,
}

fn tail_p(pair: ListPair, observed: u64, lambda: f64) -> PValue {
    PValue {
        pair,
        p: poisson_min_tail(observed, lambda),
        lambda: Some(lambda),
        observed,
    }
}

/// p-value of `pair` in the model `spec ∪ {pair}`.
///
/// The model without the term is fitted and the observed `N*_θ` is compared
/// with a Poisson variable whose mean is the fitted marginal.
pub fn p_value_cells(cells: &CellCounts, spec: &ModelSpec, pair: ListPair) -> Result<PValue> {
    let observed = cells.marginal_total(pair.history());
    match fit_cells(cells, &spec.without(pair), &FitOptions::default()) {
        Ok(f) => Ok(tail_p(pair, observed, f.fitted_marginal(pair.history()))),
        Err(Error::NonexistentMle { .. }) => Ok(PValue {
            pair,
            p: 0.0,
            lambda: None,
            observed,
        }),
        Err(e) => Err(e),
    }
}

pub fn p_value(d: &CaptureDataset, spec: &ModelSpec, pair: ListPair) -> Result<PValue> {
    p_value_cells(d.cells(), spec, pair)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CandidateOutcome {
    Tested(PValue),
    /// Adding the pair fails the estimability check.
    Blocked(Verdict),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub pair: ListPair,
    pub outcome: CandidateOutcome,
}

impl Candidate {
    pub fn p(&self) -> Option<f64> {
        match self.outcome {
            CandidateOutcome::Tested(v) => Some(v.p),
            CandidateOutcome::Blocked(_) => None,
        }
    }
}

/// One pass through Steps 2 and 3.
#[derive(Clone, Debug)]
pub struct StepwiseRound {
    /// Model at the start of the round.
    pub spec: ModelSpec,
    /// Population estimate of that model.
    pub estimate: f64,
    /// Every absent pair, in lexicographic order.
    pub candidates: Vec<Candidate>,
    /// Smallest p-value among tested candidates.
    pub best: Option<PValue>,
    pub added: bool,
}

#[derive(Clone, Debug)]
pub struct StepwiseTrail {
    pub threshold: f64,
    pub rounds: Vec<StepwiseRound>,
    pub final_spec: ModelSpec,
}

impl StepwiseTrail {
    /// Pairs in the order they entered the model.
    pub fn added(&self) -> Vec<ListPair> {
        self.rounds
            .iter()
            .filter(|r| r.added)
            .filter_map(|r| r.best.map(|b| b.pair))
            .collect()
    }

    /// Estimate that a run with threshold `tau <= self.threshold` would
    /// return. The greedy path does not depend on the threshold, only the
    /// stopping round does.
    pub fn estimate_at(&self, tau: f64) -> f64 {
        assert!(tau <= self.threshold, "trail was cut at {}", self.threshold);
        self.spec_and_estimate_at(tau).1
    }

    /// Model that a run with threshold `tau <= self.threshold` would select.
    pub fn spec_at(&self, tau: f64) -> ModelSpec {
        assert!(tau <= self.threshold, "trail was cut at {}", self.threshold);
        self.spec_and_estimate_at(tau).0
    }

    fn spec_and_estimate_at(&self, tau: f64) -> (ModelSpec, f64) {
        for round in &self.rounds {
            match round.best {
                Some(b) if b.p <= tau => continue,
                _ => return (round.spec, round.estimate),
            }
        }
        unreachable!("the last round never adds a pair")
    }
}

/// Result of a stepwise run: the selected fit and how it was reached.
#[derive(Clone, Debug)]
pub struct Stepwise {
    pub fit: FitResult,
    pub trail: StepwiseTrail,
}

fn evaluate_candidates<E: Executor>(
    cells: &CellCounts,
    current: &FitResult,
    exec: &E,
) -> Result<Vec<Candidate>> {
    let spec = current.spec;
    let absent: Vec<ListPair> = ListPair::all(spec.t()).filter(|&p| !spec.contains(p)).collect();
    let evaluated = exec.map(absent.len(), |k| -> Result<Candidate> {
        let pair = absent[k];
        let report = check_model(cells, &spec.with(pair))?;
        let outcome = if report.is_ok() {
            let lambda = current.fitted_marginal(pair.history());
            let observed = cells.marginal_total(pair.history());
            CandidateOutcome::Tested(tail_p(pair, observed, lambda))
        } else {
            CandidateOutcome::Blocked(report.verdict)
        };
        Ok(Candidate { pair, outcome })
    });
    evaluated.into_iter().collect()
}

fn select(candidates: &[Candidate]) -> Option<PValue> {
    let tested = || {
        candidates.iter().filter_map(|c| match c.outcome {
            CandidateOutcome::Tested(v) => Some(v),
            CandidateOutcome::Blocked(_) => None,
        })
    };
    let min = tested().map(|v| v.p).fold(f64::INFINITY, f64::min);
    tested().find(|v| v.p <= min + TIE_TOL)
}

/// Forward stepwise selection from the main-effects model.
pub fn stepwise_cells<E: Executor>(cells: &CellCounts, threshold: f64, exec: &E) -> Result<Stepwise> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(alloc::format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let opts = FitOptions::default();
    let mut current = fit_cells(cells, &ModelSpec::main_effects(cells.t()), &opts)?;
    let mut rounds = Vec::new();
    loop {
        let candidates = evaluate_candidates(cells, &current, exec)?;
        let best = select(&candidates);
        let added = best.is_some_and(|b| b.p <= threshold);
        rounds.push(StepwiseRound {
            spec: current.spec,
            estimate: current.population_estimate,
            candidates,
            best,
            added,
        });
        if !added {
            break;
        }
        let pair = best.expect("added implies a candidate").pair;
        current = fit_cells(cells, &current.spec.with(pair), &opts)?;
    }
    Ok(Stepwise {
        trail: StepwiseTrail {
            threshold,
            rounds,
            final_spec: current.spec,
        },
        fit: current,
    })
}

pub fn stepwise(d: &CaptureDataset, threshold: f64) -> Result<Stepwise> {
    stepwise_cells(d.cells(), threshold, &Sequential)
}

/// How the model behind a population estimate is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    Stepwise(f64),
    Fixed(ModelSpec),
    MainEffects,
    Full,
}

impl Method {
    /// The convention used in threshold sweeps: 0 is the main-effects model,
    /// 1 the full model, anything in between a stepwise threshold.
    pub fn from_threshold(threshold: f64) -> Method {
        if threshold <= 0.0 {
            Method::MainEffects
        } else if threshold >= 1.0 {
            Method::Full
        } else {
            Method::Stepwise(threshold)
        }
    }
}

#[derive(Clone, Debug)]
pub struct PopulationEstimate {
    pub fit: FitResult,
    pub trail: Option<StepwiseTrail>,
}

impl PopulationEstimate {
    pub fn estimate(&self) -> f64 {
        self.fit.population_estimate
    }
}

pub fn estimate_population_cells<E: Executor>(
    cells: &CellCounts,
    method: Method,
    exec: &E,
) -> Result<PopulationEstimate> {
    let opts = FitOptions::default();
    let t = cells.t();
    let fixed = |spec: ModelSpec| -> Result<PopulationEstimate> {
        Ok(PopulationEstimate {
            fit: fit_cells(cells, &spec, &opts)?,
            trail: None,
        })
    };
    match method {
        Method::Stepwise(threshold) => {
            let s = stepwise_cells(cells, threshold, exec)?;
            Ok(PopulationEstimate {
                fit: s.fit,
                trail: Some(s.trail),
            })
        }
        Method::Fixed(spec) => fixed(spec),
        Method::MainEffects => fixed(ModelSpec::main_effects(t)),
        Method::Full => fixed(ModelSpec::full(t)),
    }
}

pub fn estimate_population(d: &CaptureDataset, method: Method) -> Result<PopulationEstimate> {
    estimate_population_cells(d.cells(), method, &Sequential)
}
