//! Poisson log-linear fits with exact handling of non-overlapping pairs.
//!
//! A model always holds the intercept and every main effect; it differs only
//! in which two-list interactions it includes. When an included pair never
//! overlaps in the data its interaction's extended MLE is minus infinity,
//! every cell containing that pair has a fitted mean of exactly zero, and
//! the remaining parameters are fitted on the surviving cells alone.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::capture_data::{CaptureDataset, CaptureHistory, CellCounts, ListPair, MAX_LISTS};
use crate::error::{Error, Result};
use crate::estimability;
use crate::math::{exp, fabs, ln};

/// Relative pivot threshold for the rank test on the design.
pub const RANK_TOL: f64 = 1e-10;

/// A set of list pairs packed into a bitmask (at most 120 pairs for 16 lists).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct PairSet(u128);

impl PairSet {
    pub const EMPTY: PairSet = PairSet(0);

    fn slot(p: ListPair) -> u32 {
        let (i, j) = (p.i() as u32, p.j() as u32);
        j * (j - 1) / 2 + i
    }

    pub fn all(t: usize) -> Self {
        ListPair::all(t).collect()
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    pub fn contains(self, p: ListPair) -> bool {
        self.0 & (1u128 << Self::slot(p)) != 0
    }

    pub fn insert(&mut self, p: ListPair) {
        self.0 |= 1u128 << Self::slot(p);
    }

    pub fn remove(&mut self, p: ListPair) {
        self.0 &= !(1u128 << Self::slot(p));
    }

    pub fn with(mut self, p: ListPair) -> Self {
        self.insert(p);
        self
    }

    pub fn without(mut self, p: ListPair) -> Self {
        self.remove(p);
        self
    }

    pub fn union(self, other: PairSet) -> Self {
        PairSet(self.0 | other.0)
    }

    pub fn intersect(self, other: PairSet) -> Self {
        PairSet(self.0 & other.0)
    }

    pub fn difference(self, other: PairSet) -> Self {
        PairSet(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: PairSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Members in lexicographic `(i, j)` order.
    pub fn iter(self) -> impl Iterator<Item = ListPair> {
        ListPair::all(MAX_LISTS).filter(move |&p| self.contains(p))
    }
}

impl FromIterator<ListPair> for PairSet {
    fn from_iter<I: IntoIterator<Item = ListPair>>(iter: I) -> Self {
        let mut s = PairSet::EMPTY;
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl fmt::Debug for PairSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set()
            .entries(self.iter().map(|p| (p.i(), p.j())))
            .finish()
    }
}

/// Parameter set of a model: intercept, all main effects, and `pairs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelSpec {
    t: usize,
    pairs: PairSet,
}

impl ModelSpec {
    pub fn new(t: usize, pairs: PairSet) -> Result<Self> {
        if t == 0 || t > MAX_LISTS {
            return Err(Error::TableSize(t));
        }
        if let Some(p) = pairs.iter().find(|p| p.j() >= t) {
            return Err(Error::ListIndex { index: p.j(), t });
        }
        Ok(ModelSpec { t, pairs })
    }

    pub fn main_effects(t: usize) -> Self {
        ModelSpec {
            t,
            pairs: PairSet::EMPTY,
        }
    }

    pub fn full(t: usize) -> Self {
        ModelSpec {
            t,
            pairs: PairSet::all(t),
        }
    }

    pub fn with_pairs<I: IntoIterator<Item = ListPair>>(t: usize, pairs: I) -> Result<Self> {
        Self::new(t, pairs.into_iter().collect())
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn pairs(&self) -> PairSet {
        self.pairs
    }

    pub fn contains(&self, p: ListPair) -> bool {
        self.pairs.contains(p)
    }

    pub fn with(&self, p: ListPair) -> Self {
        ModelSpec {
            t: self.t,
            pairs: self.pairs.with(p),
        }
    }

    pub fn without(&self, p: ListPair) -> Self {
        ModelSpec {
            t: self.t,
            pairs: self.pairs.without(p),
        }
    }

    pub fn is_full(&self) -> bool {
        self.pairs == PairSet::all(self.t)
    }

    /// Number of parameters `1 + t + |pairs|`.
    pub fn n_params(&self) -> usize {
        1 + self.t + self.pairs.len()
    }
}

/// The problem left after fixing minus-infinity interactions.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    pub t: usize,
    /// Retained parameters; the intercept first, then main effects, then pairs.
    pub theta: Vec<CaptureHistory>,
    /// Retained observable cells in canonical order.
    pub omega: Vec<CaptureHistory>,
    /// Included pairs with no overlap in the data.
    pub infinite: Vec<ListPair>,
    /// `N_ω` for each retained cell.
    pub observed: Vec<f64>,
    /// `N*_θ` for each retained parameter.
    pub targets: Vec<f64>,
}

impl ReducedProblem {
    /// Incidence `θ ⊆ ω` as a 0/1 matrix, cells by parameters.
    pub fn design(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.omega.len(), self.theta.len(), |r, c| {
            if self.omega[r].is_superset_of(self.theta[c]) {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Column rank of the design, via column-pivoted QR.
    pub fn design_rank(&self) -> usize {
        let design = self.design();
        if design.nrows() == 0 {
            return 0;
        }
        let qr = design.col_piv_qr();
        let r = qr.r();
        let k = r.nrows().min(r.ncols());
        let lead = fabs(r[(0, 0)]);
        (0..k).filter(|&i| fabs(r[(i, i)]) > RANK_TOL * lead).count()
    }
}

/// Applies the minus-infinity reduction for `spec` on `cells`.
pub fn reduce(cells: &CellCounts, spec: &ModelSpec) -> Result<ReducedProblem> {
    let t = cells.t();
    if spec.t() != t {
        return Err(Error::ModelMismatch {
            model: spec.t(),
            data: t,
        });
    }
    let star = cells.marginal_totals();
    let mut theta = vec![CaptureHistory::EMPTY];
    theta.extend((0..t).map(CaptureHistory::singleton));
    let mut infinite = Vec::new();
    for p in spec.pairs().iter() {
        if star[p.history().bits() as usize] == 0 {
            infinite.push(p);
        } else {
            theta.push(p.history());
        }
    }
    let omega: Vec<CaptureHistory> = CaptureHistory::all_nonnull(t)
        .into_iter()
        .filter(|w| !infinite.iter().any(|p| w.is_superset_of(p.history())))
        .collect();
    let observed = omega.iter().map(|&w| cells.count(w) as f64).collect();
    let targets = theta.iter().map(|h| star[h.bits() as usize] as f64).collect();
    Ok(ReducedProblem {
        t,
        theta,
        omega,
        infinite,
        observed,
        targets,
    })
}

/// How the Newton iterations are started.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    /// One weighted least-squares step on `log(N + 0.1)`, as GLM software does.
    Glm,
    /// Intercept `log(m / |Ω†|)`, everything else zero.
    Flat,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub max_iter: usize,
    pub score_tol: f64,
    pub rel_loglik_tol: f64,
    pub start: Start,
    /// Run the existence LP before iterating.
    pub check_existence: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            score_tol: 1e-8,
            rel_loglik_tol: 1e-10,
            start: Start::Glm,
            check_existence: true,
        }
    }
}

/// Estimated coefficient of a parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coefficient {
    Finite(f64),
    NegInfinity,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub spec: ModelSpec,
    /// Total observed `m`.
    pub observed_total: u64,
    /// Retained parameters, aligned with `coefficients`.
    pub theta: Vec<CaptureHistory>,
    pub coefficients: Vec<f64>,
    pub infinite: Vec<ListPair>,
    /// Retained cells, aligned with `fitted`.
    pub omega: Vec<CaptureHistory>,
    pub fitted: Vec<f64>,
    /// `Σ N log μ - μ` over retained cells (no data-only constant).
    pub loglik: f64,
    /// Deviance against the saturated model on the retained cells.
    pub deviance: f64,
    pub dark_figure: f64,
    pub population_estimate: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn t(&self) -> usize {
        self.spec.t()
    }

    pub fn coefficient(&self, h: CaptureHistory) -> Option<Coefficient> {
        if let Some(k) = self.theta.iter().position(|&x| x == h) {
            return Some(Coefficient::Finite(self.coefficients[k]));
        }
        if h.order() == 2 && self.infinite.iter().any(|p| p.history() == h) {
            return Some(Coefficient::NegInfinity);
        }
        None
    }

    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    /// Fitted mean of a single cell; zero for cells removed by the reduction.
    pub fn fitted_mean(&self, w: CaptureHistory) -> f64 {
        self.omega
            .iter()
            .position(|&x| x == w)
            .map_or(0.0, |k| self.fitted[k])
    }

    /// Estimated `E[N*_θ]`: fitted means summed over every non-null superset.
    pub fn fitted_marginal(&self, theta: CaptureHistory) -> f64 {
        self.omega
            .iter()
            .zip(&self.fitted)
            .filter(|(w, _)| w.is_superset_of(theta))
            .map(|(_, mu)| mu)
            .sum()
    }
}

/// Fits `spec` to a labelled dataset.
pub fn fit(d: &CaptureDataset, spec: &ModelSpec) -> Result<FitResult> {
    fit_cells(d.cells(), spec, &FitOptions::default())
}

/// Fits `spec` to a raw count table.
pub fn fit_cells(cells: &CellCounts, spec: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    let reduced = reduce(cells, spec)?;
    if opts.check_existence {
        let s_max = estimability::existence_lp_reduced(&reduced)?;
        if s_max <= estimability::LP_EPS {
            return Err(Error::NonexistentMle { s_max });
        }
    }
    if reduced.design_rank() < reduced.theta.len() {
        return Err(Error::Unidentifiable);
    }
    newton(*spec, cells.total(), reduced, opts)
}

fn loglik(observed: &[f64], eta: &DVector<f64>, mu: &[f64]) -> f64 {
    observed
        .iter()
        .zip(eta.iter())
        .zip(mu)
        .map(|((&n, &e), &m)| n * e - m)
        .sum()
}

fn deviance(observed: &[f64], mu: &[f64]) -> f64 {
    2.0 * observed
        .iter()
        .zip(mu)
        .map(|(&n, &m)| {
            let log_term = if n > 0.0 { n * ln(n / m) } else { 0.0 };
            log_term - (n - m)
        })
        .sum::<f64>()
}

fn weighted_gram(design: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut scaled = design.clone();
    for (mut row, &w) in scaled.row_iter_mut().zip(weights) {
        row *= libm::sqrt(w);
    }
    scaled.tr_mul(&scaled)
}

fn newton(spec: ModelSpec, total: u64, reduced: ReducedProblem, opts: &FitOptions) -> Result<FitResult> {
    let design = reduced.design();
    let n_obs = &reduced.observed;
    let p = reduced.theta.len();

    let mut iterations = 0;
    let mut alpha = match opts.start {
        Start::Flat => {
            let mut a = DVector::zeros(p);
            a[0] = ln(total as f64 / reduced.omega.len() as f64);
            a
        }
        Start::Glm => {
            iterations += 1;
            let mu0: Vec<f64> = n_obs.iter().map(|&n| n + 0.1).collect();
            let z = DVector::from_iterator(
                mu0.len(),
                mu0.iter().zip(n_obs).map(|(&m, &n)| ln(m) + (n - m) / m),
            );
            let gram = weighted_gram(&design, &mu0);
            let wz = z.component_mul(&DVector::from_column_slice(&mu0));
            let rhs = design.tr_mul(&wz);
            gram.cholesky().ok_or(Error::Unidentifiable)?.solve(&rhs)
        }
    };

    let evaluate = |alpha: &DVector<f64>| {
        let eta = &design * alpha;
        let mu: Vec<f64> = eta.iter().map(|&e| exp(e)).collect();
        let ll = loglik(n_obs, &eta, &mu);
        (mu, ll)
    };

    let (mut mu, mut ll) = evaluate(&alpha);
    let mut rel_change = f64::INFINITY;
    let mut converged = false;
    loop {
        let resid = DVector::from_iterator(mu.len(), n_obs.iter().zip(&mu).map(|(n, m)| n - m));
        let score = design.tr_mul(&resid);
        let max_score = score.iter().fold(0.0f64, |acc, s| acc.max(fabs(*s)));
        if max_score < opts.score_tol && rel_change < opts.rel_loglik_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let info = weighted_gram(&design, &mu);
        let step_dir = info.cholesky().ok_or(Error::Unidentifiable)?.solve(&score);
        let mut step = 1.0;
        let accepted = loop {
            let trial = &alpha + &step_dir * step;
            let (mu_t, ll_t) = evaluate(&trial);
            if ll_t.is_finite() && ll_t >= ll - 1e-13 * fabs(ll).max(1.0) {
                break Some((trial, mu_t, ll_t));
            }
            step *= 0.5;
            if step < 1e-12 {
                break None;
            }
        };
        iterations += 1;
        let Some((trial, mu_t, ll_t)) = accepted else {
            break;
        };
        rel_change = fabs(ll_t - ll) / fabs(ll_t).max(1.0);
        alpha = trial;
        mu = mu_t;
        ll = ll_t;
    }
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }

    let dark_figure = exp(alpha[0]);
    let dev = deviance(n_obs, &mu);
    Ok(FitResult {
        spec,
        observed_total: total,
        theta: reduced.theta,
        coefficients: alpha.iter().copied().collect(),
        infinite: reduced.infinite,
        omega: reduced.omega,
        fitted: mu,
        loglik: ll,
        deviance: dev,
        dark_figure,
        population_estimate: total as f64 + dark_figure,
        iterations,
        converged,
    })
}
