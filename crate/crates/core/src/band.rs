//! Banded LU factorization with partial pivoting.
//!
//! The geodesic Jacobian couples each unknown to its time neighbours and a
//! five-point spatial stencil, so the assembled matrix is banded with
//! kl = ku = n_theta + 2. Partial pivoting widens the upper band by kl; the
//! storage layout matches the usual general-band convention: entry (r, c)
//! lives at `a[c * ldab + kl + ku + r - c]` with ldab = 2*kl + ku + 1.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BandError {
    #[error("matrix is numerically singular at pivot column {col} (|pivot| = {pivot:.3e})")]
    Singular { col: usize, pivot: f64 },
    #[error("dimension mismatch: matrix has n = {n}, rhs has length {len}")]
    DimensionMismatch { n: usize, len: usize },
}

/// General banded matrix with kl subdiagonals and ku superdiagonals.
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    a: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            a: vec![0.0; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(r < self.n && c < self.n);
        debug_assert!(c + self.kl >= r && r + self.ku + self.kl >= c);
        c * self.ldab + (self.kl + self.ku + r) - c
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.a[s] += v;
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || r + self.ku < c {
            return 0.0;
        }
        self.a[self.slot(r, c)]
    }

    /// Factors in place (row pivoting within the band) and returns the LU
    /// data plus the smallest pivot magnitude seen, a cheap ellipticity
    /// diagnostic for the assembled operator.
    ///
    /// The elimination is right-looking with the inner axpy running down a
    /// contiguous column segment of the band storage.
    pub fn factor(mut self) -> Result<BandLu, BandError> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let ldab = self.ldab;
        let mut pivots = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        let mut l_col = vec![0.0f64; kl];
        for col in 0..n {
            // Pivot search among the kl rows below the diagonal; the column
            // segment rows col..=last_row is contiguous in storage.
            let last_row = usize::min(col + kl, n - 1);
            let diag_slot = col * ldab + kl + ku;
            let mut piv_row = col;
            let mut piv_val = self.a[diag_slot].abs();
            for r in (col + 1)..=last_row {
                let v = self.a[diag_slot + (r - col)].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val == 0.0 || !piv_val.is_finite() {
                return Err(BandError::Singular {
                    col,
                    pivot: piv_val,
                });
            }
            min_pivot = min_pivot.min(piv_val);
            pivots[col] = piv_row;
            let last_col = usize::min(col + kl + ku, n - 1);
            if piv_row != col {
                for c in col..=last_col {
                    let s1 = self.slot(col, c);
                    let s2 = self.slot(piv_row, c);
                    self.a.swap(s1, s2);
                }
            }
            let diag = self.a[diag_slot];
            let n_below = last_row - col;
            for i in 0..n_below {
                let f = self.a[diag_slot + 1 + i] / diag;
                self.a[diag_slot + 1 + i] = f;
                l_col[i] = f;
            }
            for c in (col + 1)..=last_col {
                let piv_slot = self.slot(col, c);
                let v = self.a[piv_slot];
                if v != 0.0 {
                    let seg = &mut self.a[piv_slot + 1..=piv_slot + n_below];
                    for (x, &f) in seg.iter_mut().zip(&l_col[..n_below]) {
                        *x -= f * v;
                    }
                }
            }
        }
        Ok(BandLu {
            mat: self,
            pivots,
            min_pivot,
        })
    }
}

pub struct BandLu {
    mat: BandMatrix,
    pivots: Vec<usize>,
    min_pivot: f64,
}

impl BandLu {
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, BandError> {
        let n = self.mat.n;
        if rhs.len() != n {
            return Err(BandError::DimensionMismatch { n, len: rhs.len() });
        }
        let kl = self.mat.kl;
        let ku = self.mat.ku;
        let mut x = rhs.to_vec();
        // Forward: apply permutation and L.
        for col in 0..n {
            let p = self.pivots[col];
            if p != col {
                x.swap(col, p);
            }
            let last_row = usize::min(col + kl, n - 1);
            for r in (col + 1)..=last_row {
                let l = self.mat.a[self.mat.slot(r, col)];
                if l != 0.0 {
                    x[r] -= l * x[col];
                }
            }
        }
        // Backward: solve U x = y.
        for col in (0..n).rev() {
            let last_col = usize::min(col + kl + ku, n - 1);
            let mut s = x[col];
            for c in (col + 1)..=last_col {
                let u = self.mat.a[self.mat.slot(col, c)];
                if u != 0.0 {
                    s -= u * x[c];
                }
            }
            x[col] = s / self.mat.a[self.mat.slot(col, col)];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a[r][col].abs() > a[piv][col].abs() {
                    piv = r;
                }
            }
            a.swap(col, piv);
            b.swap(col, piv);
            for r in (col + 1)..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        for col in (0..n).rev() {
            let mut s = b[col];
            for c in (col + 1)..n {
                s -= a[col][c] * b[c];
            }
            b[col] = s / a[col][col];
        }
        b
    }

    #[test]
    fn matches_dense_solver_on_random_banded_systems() {
        let mut rng = SplitMix64::stream(31, "band-lu");
        for trial in 0..50 {
            let n = 12 + (trial % 17);
            let kl = 1 + (trial % 4);
            let ku = 1 + ((trial / 2) % 4);
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for r in 0..n {
                for c in 0..n {
                    if c + kl >= r && r + ku >= c {
                        let v = rng.symmetric_unit() + if r == c { 4.0 } else { 0.0 };
                        band.add(r, c, v);
                        dense[r][c] = v;
                    }
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.symmetric_unit()).collect();
            let lu = band.factor().unwrap();
            let x = lu.solve(&rhs).unwrap();
            let x_ref = dense_solve(dense, rhs);
            for (a, b) in x.iter().zip(x_ref.iter()) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            assert!(lu.min_pivot() > 0.0);
        }
    }

    #[test]
    fn detects_singular_matrix() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.add(0, 0, 1.0);
        band.add(1, 1, 0.0);
        band.add(2, 2, 1.0);
        // Column 1 is entirely zero.
        assert!(matches!(band.factor(), Err(BandError::Singular { .. })));
    }
}
