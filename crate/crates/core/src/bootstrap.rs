//! Multinomial bootstrap with BCa intervals.
//!
//! The acceleration constant comes from a jackknife that needs only one fit
//! per distinct observed capture history: every individual sharing a history
//! gives the same leave-one-out estimate, so each is weighted by its count.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::capture_data::{CaptureHistory, CellCounts};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::inference::{estimate_population_cells, Method};
use crate::math::{floor, normal_cdf, normal_quantile, pow, sqrt};
use crate::rng::{multinomial, substream, Domain};

/// Resample `m` individuals with replacement from the observed histories.
pub fn bootstrap_sample<R: Rng + ?Sized>(cells: &CellCounts, rng: &mut R) -> CellCounts {
    let observed = cells.observed();
    let weights: Vec<f64> = observed.iter().map(|&(_, n)| n as f64).collect();
    let draws = multinomial(cells.total(), &weights, rng);
    let mut counts = alloc::vec![0u64; cells.as_slice().len()];
    for (&(h, _), n) in observed.iter().zip(draws) {
        counts[h.bits() as usize] = n;
    }
    CellCounts::new(cells.t(), counts).expect("resample keeps the table shape and total")
}

/// `(â, θ̂_(·), degenerate)` from count-weighted leave-one-out values.
///
/// A vanishing spread makes the formula 0/0; `â = 0` is returned with the
/// flag set.
pub fn acceleration(weights: &[f64], values: &[f64]) -> (f64, f64, bool) {
    assert_eq!(weights.len(), values.len());
    let m: f64 = weights.iter().sum();
    let mean = weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / m;
    let (mut s2, mut s3) = (0.0, 0.0);
    for (w, v) in weights.iter().zip(values) {
        let d = mean - v;
        s2 += w * d * d;
        s3 += w * d * d * d;
    }
    if s2 <= 0.0 || !s2.is_normal() {
        return (0.0, mean, true);
    }
    (s3 / (6.0 * pow(s2, 1.5)), mean, false)
}

#[derive(Clone, Debug)]
pub struct Jackknife {
    pub a_hat: f64,
    pub theta_dot: f64,
    /// `(ω, N_ω, θ̂_ω^(-1))` for each observed history in canonical order.
    pub leave_one_out: Vec<(CaptureHistory, u64, f64)>,
    pub degenerate: bool,
}

/// Count-weighted jackknife over the distinct observed histories.
pub fn weighted_jackknife<E: Executor>(cells: &CellCounts, method: Method, exec: &E) -> Result<Jackknife> {
    let observed = cells.observed();
    let estimates = exec.map(observed.len(), |k| -> Result<f64> {
        let (h, n) = observed[k];
        let wrap = |source: Error| Error::Jackknife {
            history: format!("{h:?}"),
            source: alloc::boxed::Box::new(source),
        };
        let reduced = cells.with_count(h, n - 1).map_err(wrap)?;
        estimate_population_cells(&reduced, method, &Sequential)
            .map(|e| e.estimate())
            .map_err(wrap)
    });
    let values: Vec<f64> = estimates.into_iter().collect::<Result<_>>()?;
    let weights: Vec<f64> = observed.iter().map(|&(_, n)| n as f64).collect();
    let (a_hat, theta_dot, degenerate) = acceleration(&weights, &values);
    Ok(Jackknife {
        a_hat,
        theta_dot,
        leave_one_out: observed
            .iter()
            .zip(values)
            .map(|(&(h, n), v)| (h, n, v))
            .collect(),
        degenerate,
    })
}

/// Share of replicates below `point`, ties counting one half.
pub fn proportion_below(replicates: &[f64], point: f64) -> f64 {
    let below = replicates.iter().filter(|&&r| r < point).count() as f64;
    let ties = replicates.iter().filter(|&&r| r == point).count() as f64;
    (below + 0.5 * ties) / replicates.len() as f64
}

/// Bias correction `ẑ₀`, with a flag when the proportion had to be pulled
/// in from 0 or 1 (by half a replicate) to keep it finite.
pub fn bias_correction(replicates: &[f64], point: f64) -> (f64, bool) {
    let r = replicates.len() as f64;
    let prop = proportion_below(replicates, point);
    let edge = 0.5 / r;
    let clamped = prop.clamp(edge, 1.0 - edge);
    (normal_quantile(clamped), clamped != prop)
}

/// Empirical quantile with plotting position `k = α(R + 1)` on sorted data,
/// linear between order statistics and clamped to the sample range.
pub fn quantile_type6(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (alpha * (n as f64 + 1.0)).clamp(1.0, n as f64);
    let lo = floor(h) as usize;
    let frac = h - lo as f64;
    if lo >= n {
        return sorted[n - 1];
    }
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
    /// Adjusted percentile levels actually used.
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// The acceleration pushed an adjusted level past its singularity.
    pub clamped: bool,
}

fn adjusted_level(z0: f64, a: f64, z: f64, r: usize) -> (f64, bool) {
    let shift = z0 + z;
    let denom = 1.0 - a * shift;
    let (lo, hi) = (1.0 / (r as f64 + 1.0), r as f64 / (r as f64 + 1.0));
    if denom <= 0.0 {
        return (if shift > 0.0 { hi } else { lo }, true);
    }
    (normal_cdf(z0 + shift / denom), false)
}

/// BCa interval at confidence `level` from replicates sorted ascending.
pub fn bca_interval(sorted: &[f64], z0: f64, a: f64, level: f64) -> Interval {
    let tail = 0.5 * (1.0 - level);
    let (alpha_lo, c1) = adjusted_level(z0, a, normal_quantile(tail), sorted.len());
    let (alpha_hi, c2) = adjusted_level(z0, a, normal_quantile(1.0 - tail), sorted.len());
    Interval {
        level,
        lo: quantile_type6(sorted, alpha_lo),
        hi: quantile_type6(sorted, alpha_hi),
        alpha_lo,
        alpha_hi,
        clamped: c1 || c2,
    }
}

#[derive(Clone, Debug)]
pub struct BootstrapConfig {
    pub method: Method,
    pub n_boot: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct BootstrapResult {
    pub point: f64,
    /// Replicate estimates in replicate-index order.
    pub replicates: Vec<f64>,
    pub z0: f64,
    pub z0_clamped: bool,
    pub a: f64,
    pub jackknife: Jackknife,
    pub intervals: Vec<Interval>,
    pub n_requested: usize,
    pub n_failed: usize,
    pub seed: u64,
}

impl BootstrapResult {
    pub fn interval(&self, level: f64) -> Option<&Interval> {
        self.intervals.iter().find(|i| (i.level - level).abs() < 1e-12)
    }

    pub fn failure_rate(&self) -> f64 {
        self.n_failed as f64 / self.n_requested as f64
    }
}

/// Estimate for replicate `index`, redrawing resamples with no estimate.
/// Returns the estimate and the number of failed draws.
fn replicate(cells: &CellCounts, config: &BootstrapConfig, index: usize) -> Result<(Option<f64>, usize)> {
    let max_attempts = config.n_boot + 1;
    for attempt in 0..max_attempts {
        let mut rng = substream(config.seed, Domain::Bootstrap, index as u32, attempt as u32);
        let sample = bootstrap_sample(cells, &mut rng);
        match estimate_population_cells(&sample, config.method, &Sequential) {
            Ok(e) => return Ok((Some(e.estimate()), attempt)),
            Err(e) if e.is_estimability() => continue,
            Err(e) => return Err(e),
        }
    }
    Ok((None, max_attempts))
}

/// Full pipeline: point estimate, `n_boot` resampled estimates, jackknife
/// acceleration and BCa intervals at each level.
pub fn bootstrap_estimate<E: Executor>(
    cells: &CellCounts,
    config: &BootstrapConfig,
    exec: &E,
) -> Result<BootstrapResult> {
    if config.n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be at least 1".into()));
    }
    if let Some(l) = config.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "confidence level {l} outside (0, 1)"
        )));
    }
    let point = estimate_population_cells(cells, config.method, exec)?.estimate();

    let draws = exec.map(config.n_boot, |i| replicate(cells, config, i));
    let mut replicates = Vec::with_capacity(config.n_boot);
    let mut n_failed = 0;
    for d in draws {
        let (est, failed) = d?;
        n_failed += failed;
        if let Some(v) = est {
            replicates.push(v);
        }
    }
    if n_failed > config.n_boot || replicates.len() < config.n_boot {
        return Err(Error::BootstrapAborted {
            failed: n_failed,
            requested: config.n_boot,
        });
    }

    let jackknife = weighted_jackknife(cells, config.method, exec)?;
    let (z0, z0_clamped) = bias_correction(&replicates, point);
    let a = jackknife.a_hat;
    let mut sorted = replicates.clone();
    sorted.sort_by(f64::total_cmp);
    let intervals = config
        .levels
        .iter()
        .map(|&level| bca_interval(&sorted, z0, a, level))
        .collect();
    Ok(BootstrapResult {
        point,
        replicates,
        z0,
        z0_clamped,
        a,
        jackknife,
        intervals,
        n_requested: config.n_boot,
        n_failed,
        seed: config.seed,
    })
}

/// Standard error of the replicates, for reporting.
pub fn replicate_sd(replicates: &[f64]) -> f64 {
    let n = replicates.len() as f64;
    let mean = replicates.iter().sum::<f64>() / n;
    sqrt(replicates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::BuiltinDataset;

    #[test]
    fn single_history_resample_is_identity() {
        let h = CaptureHistory::from_bits(0b101);
        let cells = CellCounts::from_entries(3, [(h, 17)]).unwrap();
        let mut rng = substream(1, Domain::Bootstrap, 0, 0);
        assert_eq!(bootstrap_sample(&cells, &mut rng), cells);
    }

    #[test]
    fn resample_keeps_total() {
        let d = BuiltinDataset::NewOrleans.load();
        for i in 0..50 {
            let mut rng = substream(9, Domain::Bootstrap, i, 0);
            let s = bootstrap_sample(d.cells(), &mut rng);
            assert_eq!(s.total(), d.total());
            for (h, n) in s.observed() {
                assert!(n == 0 || d.count(h) > 0);
            }
        }
    }

    #[test]
    fn symmetric_leave_one_out_has_zero_acceleration() {
        let (a, mean, degenerate) = acceleration(&[2.0, 1.0, 2.0], &[1.0, 2.0, 3.0]);
        assert_eq!(a, 0.0);
        assert_eq!(mean, 2.0);
        assert!(!degenerate);
        assert_eq!(acceleration(&[1.0, 4.0], &[5.0, 5.0]), (0.0, 5.0, true));
    }

    #[test]
    fn percentile_method_when_unadjusted() {
        let sorted: Vec<f64> = (1..=1000).map(f64::from).collect();
        let i = bca_interval(&sorted, 0.0, 0.0, 0.80);
        // k = 0.1 * 1001 = 100.1 and 900.9
        assert!((i.lo - 100.1).abs() < 1e-9, "{}", i.lo);
        assert!((i.hi - 900.9).abs() < 1e-9, "{}", i.hi);
        assert!(!i.clamped);
    }

    #[test]
    fn positive_bias_shifts_up() {
        let sorted: Vec<f64> = (1..=500).map(f64::from).collect();
        let plain = bca_interval(&sorted, 0.0, 0.0, 0.95);
        let shifted = bca_interval(&sorted, 0.2, 0.0, 0.95);
        assert!(shifted.lo > plain.lo && shifted.hi > plain.hi);
    }

    #[test]
    fn singular_acceleration_is_clamped() {
        let sorted: Vec<f64> = (1..=99).map(f64::from).collect();
        let i = bca_interval(&sorted, 0.0, 1.0, 0.95);
        assert!(i.clamped);
        assert!(i.lo <= i.hi);
        assert_eq!(i.alpha_hi, 0.99);
    }

    #[test]
    fn quantile_clamps_to_range() {
        let s = [3.0, 5.0, 8.0];
        assert_eq!(quantile_type6(&s, 0.0), 3.0);
        assert_eq!(quantile_type6(&s, 1.0), 8.0);
        assert_eq!(quantile_type6(&s, 0.5), 5.0);
    }

    #[test]
    fn z0_ties_count_half() {
        let (z0, clamped) = bias_correction(&[1.0, 2.0, 2.0, 3.0], 2.0);
        assert!(z0.abs() < 1e-15 && !clamped);
        let (z0, clamped) = bias_correction(&[5.0, 6.0], 1.0);
        assert!(clamped && z0 < 0.0 && z0.is_finite());
    }
}
