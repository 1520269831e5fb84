//! Slow, independent reference implementations used by the tests.
//!
//! Nothing here calls into the fitting or LP code of the crate under test.

#![allow(dead_code)]

/// Superset sum `N*_h` straight from the dense table.
pub fn star(counts: &[u64], h: u32) -> u64 {
    counts
        .iter()
        .enumerate()
        .filter(|(w, _)| (*w as u32) & h == h)
        .map(|(_, c)| c)
        .sum()
}

/// Retained parameters and cells for a model given as pair bitmasks.
pub struct Reduced {
    pub theta: Vec<u32>,
    pub omega: Vec<u32>,
}

pub fn reduce(t: usize, counts: &[u64], pairs: &[u32]) -> Reduced {
    let mut theta = vec![0u32];
    theta.extend((0..t).map(|i| 1u32 << i));
    let mut dead = Vec::new();
    for &p in pairs {
        if star(counts, p) == 0 {
            dead.push(p);
        } else {
            theta.push(p);
        }
    }
    let omega = (1u32..1 << t)
        .filter(|w| dead.iter().all(|d| w & d != *d))
        .collect();
    Reduced { theta, omega }
}

pub struct OracleFit {
    pub theta: Vec<u32>,
    pub alpha: Vec<f64>,
    pub omega: Vec<u32>,
    pub mu: Vec<f64>,
    pub converged: bool,
}

impl OracleFit {
    pub fn dark_figure(&self) -> f64 {
        self.alpha[0].exp()
    }

    pub fn coefficient(&self, h: u32) -> Option<f64> {
        self.theta.iter().position(|&x| x == h).map(|k| self.alpha[k])
    }
}

/// Cyclic coordinate ascent on the Poisson log-likelihood.
///
/// Each coordinate has a closed-form maximizer because every cell mean is
/// linear in `exp(α_θ)`: set `α_θ += ln(N*_θ / Σ_{ω ⊇ θ} μ_ω)`.
pub fn coordinate_ascent(t: usize, counts: &[u64], pairs: &[u32], max_sweeps: usize) -> OracleFit {
    let Reduced { theta, omega } = reduce(t, counts, pairs);
    let targets: Vec<f64> = theta.iter().map(|&h| star(counts, h) as f64).collect();
    let m = targets[0];
    let mut alpha = vec![0.0; theta.len()];
    alpha[0] = (m / omega.len() as f64).ln();
    let mut mu = vec![0.0; omega.len()];
    let refresh = |alpha: &[f64], mu: &mut [f64]| {
        for (k, &w) in omega.iter().enumerate() {
            let eta: f64 = theta
                .iter()
                .zip(alpha)
                .filter(|(&h, _)| w & h == h)
                .map(|(_, a)| a)
                .sum();
            mu[k] = eta.exp();
        }
    };
    refresh(&alpha, &mut mu);
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut worst: f64 = 0.0;
        for (j, &h) in theta.iter().enumerate() {
            let fitted: f64 = omega
                .iter()
                .zip(&mu)
                .filter(|(&w, _)| w & h == h)
                .map(|(_, x)| x)
                .sum();
            let step = (targets[j] / fitted).ln();
            worst = worst.max(step.abs());
            alpha[j] += step;
            let factor = step.exp();
            for (k, &w) in omega.iter().enumerate() {
                if w & h == h {
                    mu[k] *= factor;
                }
            }
        }
        if worst < 1e-13 {
            converged = true;
            break;
        }
    }
    refresh(&alpha, &mut mu);
    OracleFit {
        theta,
        alpha,
        omega,
        mu,
        converged,
    }
}

/// Rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn bareiss_rank(mut a: Vec<Vec<i128>>) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut rank = 0;
    let mut prev = 1i128;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| a[r][c] != 0) else {
            continue;
        };
        a.swap(rank, p);
        for r in rank + 1..rows {
            for k in c + 1..cols {
                a[r][k] = (a[rank][c] * a[r][k] - a[r][c] * a[rank][k]) / prev;
            }
            a[r][c] = 0;
        }
        prev = a[rank][c];
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

/// Whether the reduced design (cells × parameters, 1 when θ ⊆ ω) has full
/// column rank.
pub fn design_full_rank(t: usize, counts: &[u64], pairs: &[u32]) -> bool {
    let Reduced { theta, omega } = reduce(t, counts, pairs);
    let rows: Vec<Vec<i128>> = omega
        .iter()
        .map(|&w| theta.iter().map(|&h| i128::from(w & h == h)).collect())
        .collect();
    bareiss_rank(rows) == theta.len()
}

/// Every two-list bitmask for `t` lists, in (i, j) lexicographic order.
pub fn all_pairs(t: usize) -> Vec<u32> {
    let mut v = Vec::new();
    for i in 0..t {
        for j in i + 1..t {
            v.push((1 << i) | (1 << j));
        }
    }
    v
}

/// Two-list bitmasks selected by `mask` over [`all_pairs`].
pub fn subset(t: usize, mask: u64) -> Vec<u32> {
    all_pairs(t)
        .into_iter()
        .enumerate()
        .filter(|(k, _)| mask & (1 << k) != 0)
        .map(|(_, p)| p)
        .collect()
}
