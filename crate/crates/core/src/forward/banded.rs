//! Symmetric positive definite band matrices and their Cholesky factors.

use crate::error::{DotError, Result};

/// Lower band of a symmetric matrix; row `i` stores columns `i − bw ..= i`.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw + j - i)
    }

    /// Entry `(i, j)` of the symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.offset(i, j)]
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)` / `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(
            i - j <= self.bw,
            "entry ({i}, {j}) outside band {}",
            self.bw
        );
        let k = self.offset(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..i {
                let a = self.data[self.offset(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[self.offset(i, i)] * x[i];
        }
        y
    }

    /// In-place band Cholesky `A = L Lᵀ`.
    pub fn cholesky(mut self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                let dot: f64 = self.data[ri + k0..ri + j]
                    .iter()
                    .zip(&self.data[rj + k0..rj + j])
                    .map(|(a, b)| a * b)
                    .sum();
                let s = self.data[ri + j] - dot;
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(DotError::SolverFailure {
                            pivot: i,
                            detail: format!(
                                "non-positive pivot {s:e}; pivot range so far [{dmin:e}, {dmax:e}]"
                            ),
                        });
                    }
                    let d = s.sqrt();
                    dmin = dmin.min(d * d);
                    dmax = dmax.max(d * d);
                    self.data[ri + j] = d;
                } else {
                    self.data[ri + j] = s / self.data[rj + j];
                }
            }
        }
        if dmin / dmax < 1e-15 {
            return Err(DotError::SolverFailure {
                pivot: n.saturating_sub(1),
                detail: format!("ill-conditioned system, pivot ratio {:e}", dmin / dmax),
            });
        }
        Ok(BandedCholesky { l: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandedCholesky {
    l: BandedMatrix,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.l;
        let (n, bw, w) = (l.n, l.bw, l.bw + 1);
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // forward: L z = b
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let ri = i * w + bw - i;
            let dot: f64 = l.data[ri + j0..ri + i]
                .iter()
                .zip(&x[j0..i])
                .map(|(a, b)| a * b)
                .sum();
            x[i] = (x[i] - dot) / l.data[ri + i];
        }
        // backward: Lᵀ x = z
        for i in (0..n).rev() {
            let ri = i * w + bw - i;
            x[i] /= l.data[ri + i];
            let xi = x[i];
            let j0 = i.saturating_sub(bw);
            for (xj, a) in x[j0..i].iter_mut().zip(&l.data[ri + j0..ri + i]) {
                *xj -= a * xi;
            }
        }
        x
    }
}
