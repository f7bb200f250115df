//! Banded LU factorization with partial pivoting.
//!
//! P1 operators on the row-major structured mesh have bandwidth `nx + 2`,
//! so a band factorization costs `O(n·bw²)` and is exact to rounding, which
//! the discrete adjoint relies on.

use crate::error::{check_len, Error, Result};
use crate::sparse::SparseMatrix;

/// Relative residual accepted after a solve (with one refinement sweep).
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of `U`, i.e. `ku + kl` after pivoting fill.
    ku_fill: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    matrix: SparseMatrix,
}

impl BandLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        check_len("band LU (square)", n, a.ncols())?;
        let (kl, ku) = a.bandwidth();
        let ku_fill = ku + kl;
        let width = kl + ku_fill + 1;
        let mut lu = Self {
            n,
            kl,
            ku_fill,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            matrix: a.clone(),
        };
        for (r, c, v) in a.triplets() {
            *lu.at_mut(r, c) += v;
        }

        let scale = a.max_abs();
        for col in 0..n {
            let last = (col + kl).min(n.saturating_sub(1));
            let mut p = col;
            let mut best = lu.at(col, col).abs();
            for r in col + 1..=last {
                let v = lu.at(r, col).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || best <= f64::EPSILON * scale * 1e-3 {
                return Err(Error::SolverFailure {
                    step: 0,
                    reason: format!("zero pivot in column {col} (matrix is singular)"),
                });
            }
            lu.pivots[col] = p;
            let right = (col + ku_fill).min(n - 1);
            if p != col {
                for c in col..=right {
                    let a_ = lu.at(col, c);
                    let b_ = lu.at(p, c);
                    *lu.at_mut(col, c) = b_;
                    *lu.at_mut(p, c) = a_;
                }
            }
            let piv = lu.at(col, col);
            for r in col + 1..=last {
                let l = lu.at(r, col) / piv;
                *lu.at_mut(r, col) = l;
                if l != 0.0 {
                    for c in col + 1..=right {
                        let u = lu.at(col, c);
                        *lu.at_mut(r, c) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.ku_fill);
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[self.idx(r, c)]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        let i = self.idx(r, c);
        &mut self.data[i]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for col in 0..n {
            let p = self.pivots[col];
            if p != col {
                x.swap(col, p);
            }
            let xc = x[col];
            if xc != 0.0 {
                for r in col + 1..=(col + self.kl).min(n - 1) {
                    x[r] -= self.at(r, col) * xc;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + self.ku_fill).min(n - 1) {
                s -= self.at(i, c) * x[c];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }

    /// Solves `A x = b`, refining once if the residual misses [`RESIDUAL_TOL`].
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len("band LU solve", self.n, b.len())?;
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let mut x = self.solve_raw(b);
        let mut res = self.residual(&x, b);
        if relative(&res, b) > RESIDUAL_TOL {
            let dx = self.solve_raw(&res);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            res = self.residual(&x, b);
        }
        let rel = relative(&res, b);
        if !(rel <= RESIDUAL_TOL) {
            return Err(Error::SolverFailure {
                step: 0,
                reason: format!("relative residual {rel:.3e} exceeds {RESIDUAL_TOL:e}"),
            });
        }
        Ok(x)
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let ax = self.matrix.mul_vec(x).expect("dimensions checked");
        b.iter().zip(&ax).map(|(bi, a)| bi - a).collect()
    }
}

fn relative(res: &[f64], b: &[f64]) -> f64 {
    let rn = res.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bn == 0.0 {
        rn
    } else {
        rn / bn
    }
}
