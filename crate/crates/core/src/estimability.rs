//! Existence and identifiability of (extended) maximum likelihood estimates.
//!
//! Existence is decided by a linear program over the reduced problem:
//! maximize `s` subject to `Aᵀx = t` and `x_ω >= s` for every retained cell,
//! where `A` is the cell-by-parameter incidence matrix and `t` the vector of
//! sufficient statistics. The estimate exists iff the optimum is positive.
//! Substituting `x = s·1 + u` with `u >= 0` gives a standard-form problem
//! whose right-hand side is nonnegative.
//!
//! Identifiability can only fail for the model with every pair, and then
//! exactly when no three lists are pairwise overlapping.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::capture_data::{CellCounts, ListPair};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::loglinear::{reduce, ModelSpec, PairSet, ReducedProblem};
use crate::simplex::{self, StandardForm};

/// LP optima at or below this are treated as zero.
pub const LP_EPS: f64 = 1e-9;

/// Largest number of non-overlapping pairs [`check_all_models`] will sweep.
pub const MAX_AUDIT_PAIRS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Ok,
    NonexistentMle,
    Unidentifiable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Ok => "ok",
            Verdict::NonexistentMle => "nonexistent_mle",
            Verdict::Unidentifiable => "unidentifiable",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimabilityReport {
    pub s_max: f64,
    pub exists: bool,
    pub identifiable: bool,
    pub verdict: Verdict,
}

impl EstimabilityReport {
    pub fn is_ok(&self) -> bool {
        self.verdict == Verdict::Ok
    }
}

/// Optimum of the existence LP for an already reduced problem.
pub fn existence_lp_reduced(problem: &ReducedProblem) -> Result<f64> {
    let rows = problem.theta.len();
    let cells = problem.omega.len();
    let cols = cells + 1;
    let mut a = vec![0.0; rows * cols];
    for (r, &theta) in problem.theta.iter().enumerate() {
        let row = &mut a[r * cols..(r + 1) * cols];
        let mut covered = 0.0;
        for (c, w) in problem.omega.iter().enumerate() {
            if w.is_superset_of(theta) {
                row[c] = 1.0;
                covered += 1.0;
            }
        }
        row[cells] = covered;
    }
    let mut objective = vec![0.0; cols];
    objective[cells] = 1.0;
    let lp = StandardForm::new(a, problem.targets.clone(), objective);
    let sol = simplex::maximize(&lp)?;
    Ok(sol.objective.max(0.0))
}

/// `s_max` of the existence LP for `spec` on `cells`.
pub fn existence_lp(cells: &CellCounts, spec: &ModelSpec) -> Result<f64> {
    existence_lp_reduced(&reduce(cells, spec)?)
}

/// Overlap indicator matrix: `J[i][j] = 1` iff lists `i != j` share someone.
pub fn overlap_matrix(cells: &CellCounts) -> Vec<Vec<u64>> {
    let t = cells.t();
    let star = cells.marginal_totals();
    let mut j = vec![vec![0u64; t]; t];
    for p in ListPair::all(t) {
        if star[p.history().bits() as usize] > 0 {
            j[p.i()][p.j()] = 1;
            j[p.j()][p.i()] = 1;
        }
    }
    j
}

/// `trace(J³)`: six times the number of pairwise-overlapping triples.
pub fn overlap_trace_cubed(cells: &CellCounts) -> u64 {
    let j = overlap_matrix(cells);
    let t = j.len();
    let mut trace = 0;
    for a in 0..t {
        for b in 0..t {
            for c in 0..t {
                trace += j[a][b] * j[b][c] * j[c][a];
            }
        }
    }
    trace
}

/// Whether the parameters of `spec` are identifiable on `cells`.
pub fn identifiability(cells: &CellCounts, spec: &ModelSpec) -> bool {
    if !spec.is_full() {
        return true;
    }
    overlap_trace_cubed(cells) > 0
}

/// Existence and identifiability together.
pub fn check_model(cells: &CellCounts, spec: &ModelSpec) -> Result<EstimabilityReport> {
    let s_max = existence_lp(cells, spec)?;
    let exists = s_max > LP_EPS;
    let identifiable = identifiability(cells, spec);
    let verdict = if !exists {
        Verdict::NonexistentMle
    } else if !identifiable {
        Verdict::Unidentifiable
    } else {
        Verdict::Ok
    };
    Ok(EstimabilityReport {
        s_max,
        exists,
        identifiable,
        verdict,
    })
}

/// One model examined by [`check_all_models`].
#[derive(Clone, Copy, Debug)]
pub struct AuditRecord {
    pub spec: ModelSpec,
    pub report: EstimabilityReport,
    /// Overlapping pairs removed from the sweep model this descends from.
    pub removed: PairSet,
}

#[derive(Clone, Debug)]
pub struct AllModelsAudit {
    /// LPs solved in total.
    pub tested: usize,
    /// LPs solved in the sweep over non-overlapping subsets (`2^M`).
    pub initial_sweep: usize,
    pub nonoverlapping: Vec<ListPair>,
    /// Every examined model, sweep first (by subset index), then descents.
    pub records: Vec<AuditRecord>,
    /// Failing models, ordered by sweep subset and then by removed pairs.
    pub failures: Vec<AuditRecord>,
    pub all_ok: bool,
}

fn removed_key(removed: PairSet) -> Vec<ListPair> {
    removed.iter().collect()
}

/// Checks every possible choice of two-list terms.
///
/// Only the `2^M` models holding all overlapping pairs plus a subset of the
/// `M` non-overlapping pairs are solved up front: dropping an overlapping
/// pair removes one LP constraint and cannot lower the optimum. Each failing
/// sweep model is followed by a descent that removes overlapping pairs one
/// at a time, abandoning any branch whose LP is positive.
pub fn check_all_models<E: Executor>(cells: &CellCounts, exec: &E) -> Result<AllModelsAudit> {
    let t = cells.t();
    let non = cells.nonoverlapping_pairs();
    if non.len() > MAX_AUDIT_PAIRS {
        return Err(Error::TooManyNonOverlapping {
            count: non.len(),
            pairs: non
                .iter()
                .map(|p| alloc::format!("{}:{}", p.i(), p.j()))
                .collect(),
        });
    }
    let non_set: PairSet = non.iter().copied().collect();
    let overlapping = PairSet::all(t).difference(non_set);
    let sweep_size = 1usize << non.len();

    let sweep: Vec<Result<AuditRecord>> = exec.map(sweep_size, |mask| {
        let chosen: PairSet = non
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &p)| p)
            .collect();
        let spec = ModelSpec::new(t, overlapping.union(chosen))?;
        Ok(AuditRecord {
            spec,
            report: check_model(cells, &spec)?,
            removed: PairSet::EMPTY,
        })
    });
    let sweep: Vec<AuditRecord> = sweep.into_iter().collect::<Result<_>>()?;

    let mut records = sweep.clone();
    let mut failures = Vec::new();
    for root in sweep.iter().filter(|r| !r.report.is_ok()) {
        let mut found = vec![*root];
        // Removing an overlapping pair from the full model restores
        // identifiability and cannot break existence.
        if root.report.verdict == Verdict::NonexistentMle {
            let mut seen = BTreeSet::new();
            let mut frontier = vec![*root];
            while !frontier.is_empty() {
                let mut next = Vec::new();
                for node in &frontier {
                    for q in node.spec.pairs().intersect(overlapping).iter() {
                        let removed = node.removed.with(q);
                        if !seen.insert(removed) {
                            continue;
                        }
                        let spec = node.spec.without(q);
                        let rec = AuditRecord {
                            spec,
                            report: check_model(cells, &spec)?,
                            removed,
                        };
                        records.push(rec);
                        if !rec.report.is_ok() {
                            next.push(rec);
                            found.push(rec);
                        }
                    }
                }
                frontier = next;
            }
        }
        found.sort_by(|a, b| {
            (a.removed.len(), removed_key(a.removed)).cmp(&(b.removed.len(), removed_key(b.removed)))
        });
        failures.extend(found);
    }

    Ok(AllModelsAudit {
        tested: records.len(),
        initial_sweep: sweep_size,
        nonoverlapping: non,
        all_ok: failures.is_empty(),
        records,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::BuiltinDataset;
    use crate::exec::Sequential;

    fn pairs(list: &[(usize, usize)]) -> ModelSpec {
        ModelSpec::with_pairs(3, list.iter().map(|&(i, j)| ListPair::new(i, j).unwrap())).unwrap()
    }

    #[test]
    fn artificial_lp_values() {
        let d = BuiltinDataset::Artificial3.load();
        let (ab, ac, bc) = ((0, 1), (0, 2), (1, 2));
        type Case<'a> = (&'a [(usize, usize)], f64, Verdict);
        let cases: [Case; 8] = [
            (&[], 1.2, Verdict::Ok),
            (&[ab], 0.0, Verdict::NonexistentMle),
            (&[ac], 3.0, Verdict::Ok),
            (&[bc], 3.0, Verdict::Ok),
            (&[ab, ac], 0.0, Verdict::NonexistentMle),
            (&[ab, bc], 0.0, Verdict::NonexistentMle),
            (&[ac, bc], 6.0, Verdict::Ok),
            (&[ab, ac, bc], 6.0, Verdict::Unidentifiable),
        ];
        for (list, s, verdict) in cases {
            let r = check_model(d.cells(), &pairs(list)).unwrap();
            assert!((r.s_max - s).abs() < 1e-9, "{list:?}: {}", r.s_max);
            assert_eq!(r.verdict, verdict, "{list:?}");
        }
    }

    #[test]
    fn identifiability_only_fails_for_full_model() {
        let d = BuiltinDataset::Artificial3.load();
        assert!(!identifiability(d.cells(), &ModelSpec::full(3)));
        assert!(identifiability(d.cells(), &pairs(&[(0, 1), (0, 2)])));
    }

    #[test]
    fn triangle_trace() {
        let cells = CellCounts::from_entries(
            3,
            [
                (crate::CaptureHistory::from_bits(0b011), 1),
                (crate::CaptureHistory::from_bits(0b110), 1),
                (crate::CaptureHistory::from_bits(0b101), 1),
            ],
        )
        .unwrap();
        assert_eq!(overlap_trace_cubed(&cells), 6);
        assert!(identifiability(&cells, &ModelSpec::full(3)));
    }

    #[test]
    fn audit_artificial() {
        let d = BuiltinDataset::Artificial3.load();
        let audit = check_all_models(d.cells(), &Sequential).unwrap();
        assert_eq!(audit.initial_sweep, 4);
        assert!(!audit.all_ok);
        let failing: Vec<(PairSet, Verdict)> = audit
            .failures
            .iter()
            .map(|r| (r.spec.pairs(), r.report.verdict))
            .collect();
        assert_eq!(
            failing,
            [
                (pairs(&[(0, 1)]).pairs(), Verdict::NonexistentMle),
                (pairs(&[(0, 1), (0, 2)]).pairs(), Verdict::NonexistentMle),
                (pairs(&[(0, 1), (1, 2)]).pairs(), Verdict::NonexistentMle),
                (PairSet::all(3), Verdict::Unidentifiable),
            ]
        );
    }

    #[test]
    fn audit_uk_sweeps_four_models() {
        let d = BuiltinDataset::Uk.load();
        let audit = check_all_models(d.cells(), &Sequential).unwrap();
        assert!(audit.all_ok);
        assert_eq!((audit.initial_sweep, audit.tested), (4, 4));
    }
}
