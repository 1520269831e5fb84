//! Dense two-phase primal simplex for small standard-form problems.
//!
//! Solves `maximize c·x  subject to  A x = b, x >= 0`. Entering columns
//! follow Dantzig's rule until a run of degenerate pivots is seen, after
//! which Bland's smallest-index rule takes over so cycling cannot occur.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-9;
const ZERO_CLEAN: f64 = 1e-12;
const DEGENERATE_STREAK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("problem is infeasible")]
    Infeasible,
    #[error("objective is unbounded")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
}

/// A standard-form linear program with a row-major constraint matrix.
#[derive(Clone, Debug)]
pub struct StandardForm {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl StandardForm {
    /// `a` has `b.len()` rows and `c.len()` columns, row-major.
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Self {
        assert_eq!(a.len(), b.len() * c.len(), "constraint matrix shape");
        StandardForm {
            rows: b.len(),
            cols: c.len(),
            a,
            b,
            c,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    // reduced costs c_j - c_B B^-1 A_j over all columns, plus the objective
    // value (with sign flipped) in the last slot
    cost: Vec<f64>,
    pivots: usize,
    degenerate_run: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.data[row * w + col];
        let inv = 1.0 / p;
        for v in &mut self.data[row * w..(row + 1) * w] {
            *v *= inv;
        }
        self.data[row * w + col] = 1.0;
        let (before, rest) = self.data.split_at_mut(row * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |other: &mut [f64]| {
            let f = other[col];
            if f != 0.0 {
                for (o, &q) in other.iter_mut().zip(prow.iter()) {
                    *o -= f * q;
                    if o.abs() < ZERO_CLEAN {
                        *o = 0.0;
                    }
                }
                other[col] = 0.0;
            }
        };
        for chunk in before.chunks_mut(w) {
            eliminate(chunk);
        }
        for chunk in after.chunks_mut(w) {
            eliminate(chunk);
        }
        eliminate(&mut self.cost);
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Runs simplex iterations over columns `0..active`.
    fn optimize(&mut self, active: usize, max_pivots: usize) -> Result<(), LpError> {
        loop {
            if self.pivots > max_pivots {
                return Err(LpError::IterationLimit);
            }
            let bland = self.degenerate_run >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = PIVOT_EPS;
            for j in 0..active {
                let d = self.cost[j];
                if d > best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(col) = enter else { return Ok(()) };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, col);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, r)) => {
                            if ratio < r - ZERO_CLEAN
                                || (ratio <= r + ZERO_CLEAN && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, r))
                            }
                        }
                    };
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio <= ZERO_CLEAN {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(row, col);
        }
    }

    fn remove_row(&mut self, row: usize) {
        let w = self.width;
        self.data.drain(row * w..(row + 1) * w);
        self.basis.remove(row);
        self.rows -= 1;
    }
}

/// Maximizes `c·x` over `A x = b, x >= 0`.
pub fn maximize(lp: &StandardForm) -> Result<LpSolution, LpError> {
    let (m, n) = (lp.rows, lp.cols);
    let width = n + m + 1;
    let mut data = vec![0.0; m * width];
    for i in 0..m {
        let sign = if lp.b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            data[i * width + j] = sign * lp.a[i * n + j];
        }
        data[i * width + n + i] = 1.0;
        data[i * width + width - 1] = sign * lp.b[i];
    }
    // Phase 1: maximize -sum(artificials); artificials start basic.
    let mut cost = vec![0.0; width];
    for i in 0..m {
        for j in 0..n {
            cost[j] += data[i * width + j];
        }
        cost[width - 1] += data[i * width + width - 1];
    }
    let mut tab = Tableau {
        rows: m,
        width,
        data,
        basis: (n..n + m).collect(),
        cost,
        pivots: 0,
        degenerate_run: 0,
    };
    let max_pivots = 50 * (n + m) + 1000;
    tab.optimize(n, max_pivots)?;

    let scale = 1.0 + lp.b.iter().map(|v| v.abs()).sum::<f64>();
    if tab.cost[width - 1] > 1e-9 * scale {
        return Err(LpError::Infeasible);
    }

    // Drive artificials out of the basis; rows where that is impossible are
    // linear combinations of the others.
    let mut i = 0;
    while i < tab.rows {
        if tab.basis[i] >= n {
            let col = (0..n).find(|&j| tab.at(i, j).abs() > PIVOT_EPS);
            match col {
                Some(j) => {
                    tab.pivot(i, j);
                    i += 1;
                }
                None => tab.remove_row(i),
            }
        } else {
            i += 1;
        }
    }

    // Phase 2 reduced costs.
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.c);
    for (r, &bcol) in tab.basis.iter().enumerate() {
        let cb = lp.c[bcol];
        if cb != 0.0 {
            for (c, a) in cost.iter_mut().zip(&tab.data[r * width..(r + 1) * width]) {
                *c -= cb * a;
            }
        }
    }
    tab.cost = cost;
    tab.degenerate_run = 0;
    tab.optimize(n, max_pivots)?;

    let mut x = vec![0.0; n];
    for (r, &bcol) in tab.basis.iter().enumerate() {
        x[bcol] = tab.rhs(r);
    }
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        objective,
        x,
        pivots: tab.pivots,
    })
}
