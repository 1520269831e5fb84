//! JSON views of results, with list labels in place of bitmasks.

use mse_core::bootstrap::{BootstrapResult, Interval};
use mse_core::estimability::{AllModelsAudit, AuditRecord, EstimabilityReport};
use mse_core::inference::{CandidateOutcome, StepwiseTrail};
use mse_core::simulation::{DevianceStudy, ThresholdStudyResult};
use mse_core::{CaptureDataset, CaptureHistory, FitResult, PairSet};
use serde::Serialize;
use serde_json::{json, Value};

pub const NEG_INF: &str = "-inf";

pub fn pair_labels(d: &CaptureDataset, pairs: PairSet) -> Vec<String> {
    pairs.iter().map(|p| d.pair_label(p)).collect()
}

fn history_labels(d: &CaptureDataset, h: CaptureHistory) -> Vec<String> {
    h.lists().map(|i| d.labels()[i].clone()).collect()
}

fn term_label(d: &CaptureDataset, h: CaptureHistory) -> String {
    match h.order() {
        0 => "(intercept)".to_string(),
        _ => history_labels(d, h).join(":"),
    }
}

#[derive(Serialize)]
pub struct Coefficient {
    pub term: String,
    /// A number, or `"-inf"` for pairs that never overlap.
    pub estimate: Value,
}

#[derive(Serialize)]
pub struct FittedCell {
    pub history: Vec<String>,
    pub observed: u64,
    pub fitted: f64,
}

#[derive(Serialize)]
pub struct FitReport {
    pub model: Vec<String>,
    pub observed_total: u64,
    pub estimate: f64,
    pub dark_figure: f64,
    pub loglik: f64,
    pub deviance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub coefficients: Vec<Coefficient>,
    pub fitted: Vec<FittedCell>,
}

impl FitReport {
    pub fn new(d: &CaptureDataset, f: &FitResult) -> Self {
        let mut coefficients: Vec<Coefficient> = f
            .theta
            .iter()
            .zip(&f.coefficients)
            .map(|(&h, &v)| Coefficient {
                term: term_label(d, h),
                estimate: json!(v),
            })
            .collect();
        coefficients.extend(f.infinite.iter().map(|p| Coefficient {
            term: d.pair_label(*p),
            estimate: json!(NEG_INF),
        }));
        FitReport {
            model: pair_labels(d, f.spec.pairs()),
            observed_total: f.observed_total,
            estimate: f.population_estimate,
            dark_figure: f.dark_figure,
            loglik: f.loglik,
            deviance: f.deviance,
            iterations: f.iterations,
            converged: f.converged,
            coefficients,
            fitted: f
                .omega
                .iter()
                .zip(&f.fitted)
                .map(|(&h, &mu)| FittedCell {
                    history: history_labels(d, h),
                    observed: d.count(h),
                    fitted: mu,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
pub struct CandidateReport {
    pub pair: String,
    pub observed: u64,
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub verdict: &'static str,
}

#[derive(Serialize)]
pub struct RoundReport {
    pub round: usize,
    pub model: Vec<String>,
    pub estimate: f64,
    pub candidates: Vec<CandidateReport>,
    pub best: Option<String>,
    pub best_p: Option<f64>,
    pub action: &'static str,
}

#[derive(Serialize)]
pub struct StepwiseReport {
    pub threshold: f64,
    pub rounds: Vec<RoundReport>,
    pub model: Vec<String>,
}

impl StepwiseReport {
    pub fn new(d: &CaptureDataset, trail: &StepwiseTrail) -> Self {
        let rounds = trail
            .rounds
            .iter()
            .enumerate()
            .map(|(k, r)| RoundReport {
                round: k + 1,
                model: pair_labels(d, r.spec.pairs()),
                estimate: r.estimate,
                candidates: r
                    .candidates
                    .iter()
                    .map(|c| match c.outcome {
                        CandidateOutcome::Tested(v) => CandidateReport {
                            pair: d.pair_label(c.pair),
                            observed: v.observed,
                            p: Some(v.p),
                            lambda: v.lambda,
                            verdict: "ok",
                        },
                        CandidateOutcome::Blocked(verdict) => CandidateReport {
                            pair: d.pair_label(c.pair),
                            observed: d.marginal_total(c.pair.history()),
                            p: None,
                            lambda: None,
                            verdict: verdict.as_str(),
                        },
                    })
                    .collect(),
                best: r.best.map(|b| d.pair_label(b.pair)),
                best_p: r.best.map(|b| b.p),
                action: if r.added { "add" } else { "stop" },
            })
            .collect();
        StepwiseReport {
            threshold: trail.threshold,
            rounds,
            model: pair_labels(d, trail.final_spec.pairs()),
        }
    }

    /// Plain-text trail: one line per candidate, then the action taken.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>5}  {:<16} {:>8} {:>12} {:>12}  {}\n",
            "round", "candidate", "N*", "lambda", "p", "action"
        );
        for r in &self.rounds {
            for c in &r.candidates {
                let chosen = r.best.as_deref() == Some(c.pair.as_str());
                let action = match (chosen, c.verdict) {
                    (true, _) => r.action,
                    (false, "ok") => "",
                    (false, v) => v,
                };
                let dash = || "-".to_string();
                let lambda = c.lambda.map_or_else(dash, |x| format!("{x:.4}"));
                let p = c.p.map_or_else(dash, |x| format!("{x:.3e}"));
                s.push_str(&format!(
                    "{:>5}  {:<16} {:>8} {:>12} {:>12}  {}\n",
                    r.round, c.pair, c.observed, lambda, p, action
                ));
            }
            if r.candidates.is_empty() {
                s.push_str(&format!(
                    "{:>5}  {:<16} {:>8} {:>12} {:>12}  stop\n",
                    r.round, "-", "-", "-", "-"
                ));
            }
        }
        s
    }
}

#[derive(Serialize)]
pub struct CheckReport {
    pub model: Vec<String>,
    pub s_max: f64,
    pub exists: bool,
    pub identifiable: bool,
    pub verdict: &'static str,
}

impl CheckReport {
    pub fn new(d: &CaptureDataset, pairs: PairSet, r: &EstimabilityReport) -> Self {
        CheckReport {
            model: pair_labels(d, pairs),
            s_max: r.s_max,
            exists: r.exists,
            identifiable: r.identifiable,
            verdict: r.verdict.as_str(),
        }
    }
}

#[derive(Serialize)]
pub struct AuditFailure {
    pub model: Vec<String>,
    pub removed: Vec<String>,
    pub s_max: f64,
    pub verdict: &'static str,
}

#[derive(Serialize)]
pub struct AuditReport {
    pub all_ok: bool,
    pub tested: usize,
    pub initial_sweep: usize,
    pub nonoverlapping: Vec<String>,
    pub failures: Vec<AuditFailure>,
}

impl AuditReport {
    pub fn new(d: &CaptureDataset, a: &AllModelsAudit) -> Self {
        let failure = |r: &AuditRecord| AuditFailure {
            model: pair_labels(d, r.spec.pairs()),
            removed: pair_labels(d, r.removed),
            s_max: r.report.s_max,
            verdict: r.report.verdict.as_str(),
        };
        AuditReport {
            all_ok: a.all_ok,
            tested: a.tested,
            initial_sweep: a.initial_sweep,
            nonoverlapping: a.nonoverlapping.iter().map(|p| d.pair_label(*p)).collect(),
            failures: a.failures.iter().map(failure).collect(),
        }
    }
}

#[derive(Serialize)]
pub struct IntervalReport {
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub clamped: bool,
}

impl From<&Interval> for IntervalReport {
    fn from(i: &Interval) -> Self {
        IntervalReport {
            level: i.level,
            lo: i.lo,
            hi: i.hi,
            alpha_lo: i.alpha_lo,
            alpha_hi: i.alpha_hi,
            clamped: i.clamped,
        }
    }
}

#[derive(Serialize)]
pub struct BootstrapReport {
    pub point: f64,
    pub n_boot: usize,
    pub n_failed: usize,
    pub seed: u64,
    pub z0: f64,
    pub z0_clamped: bool,
    pub a: f64,
    pub jackknife_degenerate: bool,
    pub intervals: Vec<IntervalReport>,
}

impl From<&BootstrapResult> for BootstrapReport {
    fn from(r: &BootstrapResult) -> Self {
        BootstrapReport {
            point: r.point,
            n_boot: r.n_requested,
            n_failed: r.n_failed,
            seed: r.seed,
            z0: r.z0,
            z0_clamped: r.z0_clamped,
            a: r.a,
            jackknife_degenerate: r.jackknife.degenerate,
            intervals: r.intervals.iter().map(IntervalReport::from).collect(),
        }
    }
}

/// Label used for a scenario-building threshold.
pub fn scenario_label(threshold: f64) -> String {
    if threshold <= 0.0 {
        "Main".to_string()
    } else if threshold >= 1.0 {
        "Full".to_string()
    } else {
        format!("{threshold}")
    }
}

/// Scenario rows with one log-MSE column per estimation threshold, then the
/// column means.
pub fn threshold_study_csv(r: &ThresholdStudyResult) -> String {
    let mut s = String::from("data");
    for t in &r.est_thresholds {
        s.push_str(&format!(",{t}"));
    }
    s.push_str(",model\n");
    for o in &r.scenarios {
        s.push_str(&o.name);
        for v in &o.log_mse {
            s.push_str(&format!(",{v:.6}"));
        }
        s.push_str(&format!(",{}\n", scenario_label(o.model_threshold)));
    }
    s.push_str("Mean");
    for v in &r.column_means {
        s.push_str(&format!(",{v:.6}"));
    }
    s.push_str(",\n");
    s
}

#[derive(Serialize)]
pub struct ScenarioReport {
    pub data: String,
    pub model: String,
    pub n_pop: u64,
    pub n_sims: usize,
    pub n_removed: usize,
    pub log_mse: Vec<f64>,
}

#[derive(Serialize)]
pub struct ThresholdStudyReport {
    pub seed: u64,
    pub est_thresholds: Vec<f64>,
    pub scenarios: Vec<ScenarioReport>,
    pub skipped: Vec<Value>,
    pub column_means: Vec<f64>,
}

impl ThresholdStudyReport {
    pub fn new(r: &ThresholdStudyResult, seed: u64) -> Self {
        ThresholdStudyReport {
            seed,
            est_thresholds: r.est_thresholds.clone(),
            scenarios: r
                .scenarios
                .iter()
                .map(|o| ScenarioReport {
                    data: o.name.clone(),
                    model: scenario_label(o.model_threshold),
                    n_pop: o.n_pop,
                    n_sims: o.n_sims,
                    n_removed: o.n_removed,
                    log_mse: o.log_mse.clone(),
                })
                .collect(),
            skipped: r
                .skipped
                .iter()
                .map(|s| {
                    json!({
                        "data": s.name,
                        "model": scenario_label(s.model_threshold),
                        "reason": s.reason.to_string(),
                    })
                })
                .collect(),
            column_means: r.column_means.clone(),
        }
    }
}

pub fn deviance_csv(s: &DevianceStudy) -> String {
    let mut out = String::from("reduction,chi2_quantile\n");
    for (d, q) in s.qq_points() {
        out.push_str(&format!("{d},{q}\n"));
    }
    out
}

#[derive(Serialize)]
pub struct DevianceReport {
    pub seed: u64,
    pub n_sims: usize,
    pub n_dropped: usize,
    pub mean: Option<f64>,
    pub q95: Option<f64>,
    pub points: Vec<(f64, f64)>,
}

impl DevianceReport {
    pub fn new(s: &DevianceStudy, seed: u64) -> Self {
        let empty = s.reductions.is_empty();
        DevianceReport {
            seed,
            n_sims: s.n_sims,
            n_dropped: s.n_dropped,
            mean: (!empty).then(|| s.mean()),
            q95: (!empty).then(|| s.quantile(0.95)),
            points: s.qq_points(),
        }
    }
}
