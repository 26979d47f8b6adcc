//! Elementary symmetric polynomials, Newton transforms, and Garding cones
//! on 4x4 real symmetric matrices.
//!
//! Everything here is pointwise matrix algebra: sigma_k as sums of principal
//! minors, the Newton transform recursion T_0 = I, T_k = sigma_k(A) I - A T_{k-1},
//! their fully polarized (multilinear) counterparts defined through the
//! generalized Kronecker delta, and the quadratic identities and inequalities
//! that the downstream geometry relies on. The minor route and the delta route
//! are implemented independently so each can check the other.

use thiserror::Error;

use crate::rng::SplitMix64;

const N: usize = 4;

/// Position of (i, j), i <= j, in the packed upper triangle.
#[inline]
fn upos(i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < N);
    // Row-major upper triangle of a 4x4: offsets 0, 4, 7, 9.
    const ROW_OFFSET: [usize; 4] = [0, 4, 7, 9];
    ROW_OFFSET[i] + (j - i)
}

/// A real symmetric 4x4 matrix stored as its 10 upper-triangle coefficients,
/// so symmetry is structural rather than a runtime invariant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat4 {
    upper: [f64; 10],
}

impl SymMat4 {
    pub fn zero() -> Self {
        Self { upper: [0.0; 10] }
    }

    pub fn identity() -> Self {
        Self::from_diag([1.0; 4])
    }

    pub fn from_upper(upper: [f64; 10]) -> Self {
        Self { upper }
    }

    pub fn from_diag(d: [f64; 4]) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            m.set(i, i, d[i]);
        }
        m
    }

    /// Builds the rank-one matrix x (x) x.
    pub fn outer(x: [f64; 4]) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            for j in i..N {
                m.set(i, j, x[i] * x[j]);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.upper[upos(i, j)]
        } else {
            self.upper[upos(j, i)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        if i <= j {
            self.upper[upos(i, j)] = v;
        } else {
            self.upper[upos(j, i)] = v;
        }
    }

    pub fn to_dense(&self) -> [[f64; 4]; 4] {
        let mut a = [[0.0; 4]; 4];
        for i in 0..N {
            for j in 0..N {
                a[i][j] = self.get(i, j);
            }
        }
        a
    }

    /// Symmetric part of a dense matrix.
    pub fn from_dense_symmetrized(a: &[[f64; 4]; 4]) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            for j in i..N {
                m.set(i, j, 0.5 * (a[i][j] + a[j][i]));
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        (0..N).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut upper = self.upper;
        for v in &mut upper {
            *v *= c;
        }
        Self { upper }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut upper = self.upper;
        for (v, w) in upper.iter_mut().zip(other.upper.iter()) {
            *v += w;
        }
        Self { upper }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Full tensor pairing sum_ij a_ij b_ij (off-diagonal entries counted twice).
    pub fn inner(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            for j in 0..N {
                s += self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    /// Quadratic form x^T A x.
    pub fn quad_form(&self, x: [f64; 4]) -> f64 {
        self.inner(&Self::outer(x))
    }

    /// Symmetrized product (AB + BA) / 2. For commuting factors (for example a
    /// matrix and a polynomial in it) this is the exact product.
    pub fn sym_product(&self, other: &Self) -> Self {
        let a = self.to_dense();
        let b = other.to_dense();
        let mut p = [[0.0; 4]; 4];
        for i in 0..N {
            for j in 0..N {
                let mut s = 0.0;
                for l in 0..N {
                    s += a[i][l] * b[l][j];
                }
                p[i][j] = s;
            }
        }
        Self::from_dense_symmetrized(&p)
    }

    /// Conjugation Q^T A Q.
    pub fn conjugate(&self, q: &[[f64; 4]; 4]) -> Self {
        let a = self.to_dense();
        let mut aq = [[0.0; 4]; 4];
        for i in 0..N {
            for j in 0..N {
                let mut s = 0.0;
                for l in 0..N {
                    s += a[i][l] * q[l][j];
                }
                aq[i][j] = s;
            }
        }
        let mut out = [[0.0; 4]; 4];
        for i in 0..N {
            for j in 0..N {
                let mut s = 0.0;
                for l in 0..N {
                    s += q[l][i] * aq[l][j];
                }
                out[i][j] = s;
            }
        }
        Self::from_dense_symmetrized(&out)
    }

    /// Smallest eigenvalue via cyclic Jacobi rotations. Used by the inequality
    /// suites; accurate to roughly machine precision for these small matrices.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut a = self.to_dense();
        for _sweep in 0..30 {
            let mut off = 0.0;
            for i in 0..N {
                for j in (i + 1)..N {
                    off += a[i][j] * a[i][j];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..N {
                for q in (p + 1)..N {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for l in 0..N {
                        let alp = a[l][p];
                        let alq = a[l][q];
                        a[l][p] = c * alp - s * alq;
                        a[l][q] = s * alp + c * alq;
                    }
                    for l in 0..N {
                        let apl = a[p][l];
                        let aql = a[q][l];
                        a[p][l] = c * apl - s * aql;
                        a[q][l] = s * apl + c * aql;
                    }
                }
            }
        }
        (0..N).map(|i| a[i][i]).fold(f64::INFINITY, f64::min)
    }
}

/// Cone order k in 1..=4, selecting the Garding cone Gamma_k+.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConeLevel(u8);

impl ConeLevel {
    pub const K1: ConeLevel = ConeLevel(1);
    pub const K2: ConeLevel = ConeLevel(2);
    pub const K3: ConeLevel = ConeLevel(3);
    pub const K4: ConeLevel = ConeLevel(4);

    pub fn new(k: usize) -> Result<Self, SymconeError> {
        if (1..=4).contains(&k) {
            Ok(ConeLevel(k as u8))
        } else {
            Err(SymconeError::BadConeLevel { k })
        }
    }

    #[inline]
    pub fn k(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error)]
pub enum SymconeError {
    #[error("cone level must satisfy 1 <= k <= 4, got {k}")]
    BadConeLevel { k: usize },
    #[error("matrix `{name}` is not in the cone Gamma_{k}+ (sigma_{j} = {value:.6e} <= 0)")]
    NotInCone {
        name: &'static str,
        k: usize,
        j: usize,
        value: f64,
    },
}

/// Determinant of the principal submatrix selected by `idx`.
fn principal_minor(a: &SymMat4, idx: &[usize]) -> f64 {
    match idx.len() {
        0 => 1.0,
        1 => a.get(idx[0], idx[0]),
        2 => {
            let (i, j) = (idx[0], idx[1]);
            a.get(i, i) * a.get(j, j) - a.get(i, j) * a.get(i, j)
        }
        3 => {
            let m = |r: usize, c: usize| a.get(idx[r], idx[c]);
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        }
        4 => det4(&a.to_dense()),
        _ => unreachable!(),
    }
}

fn det4(m: &[[f64; 4]; 4]) -> f64 {
    let mut det = 0.0;
    for c in 0..4 {
        let mut sub = [[0.0; 3]; 3];
        for r in 1..4 {
            let mut cc = 0;
            for c2 in 0..4 {
                if c2 == c {
                    continue;
                }
                sub[r - 1][cc] = m[r][c2];
                cc += 1;
            }
        }
        let d3 = sub[0][0] * (sub[1][1] * sub[2][2] - sub[1][2] * sub[2][1])
            - sub[0][1] * (sub[1][0] * sub[2][2] - sub[1][2] * sub[2][0])
            + sub[0][2] * (sub[1][0] * sub[2][1] - sub[1][1] * sub[2][0]);
        det += if c % 2 == 0 { 1.0 } else { -1.0 } * m[0][c] * d3;
    }
    det
}

/// sigma_k(A): sum of all k x k principal minors, equal to the k-th elementary
/// symmetric polynomial of the eigenvalues. Minor enumeration avoids
/// eigensolver noise; the eigenvalue route lives in the test oracle.
pub fn sigma(a: &SymMat4, k: ConeLevel) -> f64 {
    let k = k.k();
    let mut total = 0.0;
    let mut idx = [0usize; 4];
    // Enumerate increasing index subsets of size k.
    fn rec(a: &SymMat4, k: usize, start: usize, depth: usize, idx: &mut [usize; 4], acc: &mut f64) {
        if depth == k {
            *acc += principal_minor(a, &idx[..k]);
            return;
        }
        for i in start..N {
            idx[depth] = i;
            rec(a, k, i + 1, depth + 1, idx, acc);
        }
    }
    rec(a, k, 0, 0, &mut idx, &mut total);
    total
}

/// Newton transform by the recursion T_0 = I, T_k = sigma_k(A) I - A T_{k-1}.
/// Valid for 0 <= k <= 3; commutes with its argument.
pub fn newton(a: &SymMat4, k: usize) -> SymMat4 {
    assert!(k <= 3, "Newton transform order must satisfy 0 <= k <= 3");
    let mut t = SymMat4::identity();
    for j in 1..=k {
        let sj = sigma(a, ConeLevel::new(j).expect("1..=3 is a valid cone level"));
        let at = a.sym_product(&t);
        t = SymMat4::from_diag([sj; 4]).sub(&at);
    }
    t
}

/// Enumerates ordered tuples of `len` distinct values drawn from `pool`.
fn for_each_ordered_distinct(pool: &[usize], len: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(
        pool: &[usize],
        len: usize,
        chosen: &mut Vec<usize>,
        used: &mut [bool],
        f: &mut impl FnMut(&[usize]),
    ) {
        if chosen.len() == len {
            f(chosen);
            return;
        }
        for (p, &v) in pool.iter().enumerate() {
            if !used[p] {
                used[p] = true;
                chosen.push(v);
                rec(pool, len, chosen, used, f);
                chosen.pop();
                used[p] = false;
            }
        }
    }
    let mut used = vec![false; pool.len()];
    rec(pool, len, &mut Vec::with_capacity(len), &mut used, f);
}

/// Parity of the permutation taking `from` to `to` (both orderings of the same
/// distinct values).
fn permutation_sign(from: &[usize], to: &[usize]) -> f64 {
    let perm: Vec<usize> = to
        .iter()
        .map(|v| from.iter().position(|w| w == v).expect("same value set"))
        .collect();
    let mut inversions = 0;
    for a in 0..perm.len() {
        for b in (a + 1)..perm.len() {
            if perm[a] > perm[b] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Generalized Newton transform of k matrices (1 <= k <= 3),
///
///   [T_k]_{ij}(A_1, ..., A_k) = (1/k!) delta^{i i_1 .. i_k}_{j j_1 .. j_k}
///                               (A_1)_{i_1 j_1} ... (A_k)_{i_k j_k},
///
/// evaluated by direct contraction of the generalized Kronecker delta. The
/// 1/k! prefactor makes the diagonal restriction agree with `newton` exactly:
/// [T_k](A, ..., A) = T_k(A).
pub fn newton_multi(args: &[SymMat4]) -> SymMat4 {
    let k = args.len();
    assert!((1..=3).contains(&k), "newton_multi takes 1 to 3 matrices");
    let mut out = SymMat4::zero();
    let all: Vec<usize> = (0..N).collect();
    let mut fact = 1.0;
    for m in 1..=k {
        fact *= m as f64;
    }
    for i in 0..N {
        for j in i..N {
            let mut acc = 0.0;
            // Upper tuple (i, i_1..i_k): all distinct.
            let pool: Vec<usize> = all.iter().copied().filter(|&v| v != i).collect();
            for_each_ordered_distinct(&pool, k, &mut |rest| {
                let mut upper = Vec::with_capacity(k + 1);
                upper.push(i);
                upper.extend_from_slice(rest);
                if !upper.contains(&j) {
                    return;
                }
                // Lower tuple: permutations of the upper values with j first.
                for_each_ordered_distinct(&upper.clone(), k + 1, &mut |lower| {
                    if lower[0] != j {
                        return;
                    }
                    let sign = permutation_sign(&upper, lower);
                    let mut prod = sign;
                    for m in 0..k {
                        prod *= args[m].get(upper[m + 1], lower[m + 1]);
                    }
                    acc += prod;
                });
            });
            out.set(i, j, acc / fact);
        }
    }
    out
}

/// Fully polarized symmetric function of k matrices (1 <= k <= 4),
///
///   Sigma_k(A_1, ..., A_k) = (1/(k-1)!) delta^{i_1 .. i_k}_{j_1 .. j_k}
///                            (A_1)_{i_1 j_1} ... (A_k)_{i_k j_k}.
///
/// With this prefactor the diagonal restriction satisfies
/// Sigma_k(A, ..., A) = k * sigma_k(A); the constant k is forced by the
/// k!/(k-1)! mismatch of the two delta normalizations and preserves the
/// monotonicity statements, since it is positive.
pub fn sigma_polarized(args: &[SymMat4]) -> f64 {
    let k = args.len();
    assert!((1..=4).contains(&k), "sigma_polarized takes 1 to 4 matrices");
    let mut fact = 1.0;
    for m in 1..k {
        fact *= m as f64;
    }
    let all: Vec<usize> = (0..N).collect();
    let mut acc = 0.0;
    for_each_ordered_distinct(&all, k, &mut |upper| {
        let upper_owned = upper.to_vec();
        for_each_ordered_distinct(&upper_owned, k, &mut |lower| {
            let sign = permutation_sign(&upper_owned, lower);
            let mut prod = sign;
            for m in 0..k {
                prod *= args[m].get(upper_owned[m], lower[m]);
            }
            acc += prod;
        });
    });
    acc / fact
}

/// Diagonal-restriction constant: sigma_polarized(A, ..., A) = k * sigma(A, k).
pub fn sigma_polarized_diag_constant(k: ConeLevel) -> f64 {
    k.k() as f64
}

/// Strict cone membership: sigma_j(A) > 0 for every j <= k. No tolerance
/// slack; callers that need margins add their own.
pub fn in_cone(a: &SymMat4, k: ConeLevel) -> bool {
    for j in 1..=k.k() {
        if sigma(a, ConeLevel::new(j).expect("j in 1..=4")) <= 0.0 {
            return false;
        }
    }
    true
}

fn require_in_cone(a: &SymMat4, k: ConeLevel, name: &'static str) -> Result<(), SymconeError> {
    for j in 1..=k.k() {
        let v = sigma(a, ConeLevel::new(j).expect("j in 1..=4"));
        if v <= 0.0 {
            return Err(SymconeError::NotInCone {
                name,
                k: k.k(),
                j,
                value: v,
            });
        }
    }
    Ok(())
}

/// Rank-one drop identity: returns the pair
///   ( sigma_k(A - X(x)X),  sigma_k(A) - <T_{k-1}(A), X(x)X> ),
/// whose components agree for every symmetric A and vector X.
pub fn rank_one_drop(a: &SymMat4, x: [f64; 4], k: ConeLevel) -> (f64, f64) {
    let dropped = a.sub(&SymMat4::outer(x));
    let lhs = sigma(&dropped, k);
    let t = newton(a, k.k() - 1);
    let rhs = sigma(a, k) - t.quad_form(x);
    (lhs, rhs)
}

/// Companion invariance: returns ( <T_k(A - X(x)X), X(x)X>, <T_k(A), X(x)X> ),
/// equal for every A, X and 1 <= k <= 3.
pub fn rank_one_newton_pairing(a: &SymMat4, x: [f64; 4], k: usize) -> (f64, f64) {
    assert!((1..=3).contains(&k));
    let dropped = a.sub(&SymMat4::outer(x));
    (newton(&dropped, k).quad_form(x), newton(a, k).quad_form(x))
}

/// Quadratic Cauchy-Schwarz-type pairing for Gamma_2+ matrices: returns
/// ( <T_1(B), A>^2, 4 sigma_2(A) sigma_2(B) ); the first dominates the second.
pub fn t1_cauchy_schwarz(a: &SymMat4, b: &SymMat4) -> Result<(f64, f64), SymconeError> {
    require_in_cone(a, ConeLevel::K2, "A")?;
    require_in_cone(b, ConeLevel::K2, "B")?;
    let lhs = newton(b, 1).inner(a).powi(2);
    let rhs = 4.0 * sigma(a, ConeLevel::K2) * sigma(b, ConeLevel::K2);
    Ok((lhs, rhs))
}

/// Plane-restricted quadratic form
///   -T_1(X,X) T_1(Y,Y) + T_1(X,Y)^2 + sigma_2(A) [ |X|^2|Y|^2 - <X,Y>^2 ],
/// nonpositive whenever A is in Gamma_2+.
pub fn sg_quadratic(a: &SymMat4, x: [f64; 4], y: [f64; 4]) -> Result<f64, SymconeError> {
    require_in_cone(a, ConeLevel::K2, "A")?;
    let t1 = newton(a, 1);
    let txx = t1.quad_form(x);
    let tyy = t1.quad_form(y);
    let txy = {
        // Bilinear form T_1(X, Y) via polarization of the quadratic form.
        let mut s = 0.0;
        for i in 0..N {
            for j in 0..N {
                s += t1.get(i, j) * x[i] * y[j];
            }
        }
        s
    };
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let xy: f64 = x.iter().zip(y.iter()).map(|(u, v)| u * v).sum();
    Ok(-txx * tyy + txy * txy + sigma(a, ConeLevel::K2) * (xx * yy - xy * xy))
}

// ---------------------------------------------------------------------------
// Seeded sampling
// ---------------------------------------------------------------------------

/// Random symmetric matrix with entries uniform in [-1, 1].
pub fn random_sym(rng: &mut SplitMix64) -> SymMat4 {
    let mut upper = [0.0; 10];
    for v in &mut upper {
        *v = rng.symmetric_unit();
    }
    SymMat4::from_upper(upper)
}

/// Random cone sample: a Wigner-type draw shifted by the smallest half-integer
/// t >= 0 with A + t I in Gamma_k+. Capped well above the Gershgorin bound, so
/// the scan always terminates.
pub fn random_in_cone(rng: &mut SplitMix64, k: ConeLevel) -> SymMat4 {
    let a = random_sym(rng);
    let mut t = 0.0;
    while t <= 16.0 {
        let shifted = a.add(&SymMat4::from_diag([t; 4]));
        if in_cone(&shifted, k) {
            return shifted;
        }
        t += 0.5;
    }
    unreachable!("shift by 16 I always lands in the cone for entries in [-1,1]")
}

/// Random vector with entries uniform in [-1, 1].
pub fn random_vec(rng: &mut SplitMix64) -> [f64; 4] {
    [
        rng.symmetric_unit(),
        rng.symmetric_unit(),
        rng.symmetric_unit(),
        rng.symmetric_unit(),
    ]
}

/// Random rotation from Gram-Schmidt on a uniform random matrix, retrying on
/// near-degenerate draws.
pub fn random_rotation(rng: &mut SplitMix64) -> [[f64; 4]; 4] {
    loop {
        let mut cols = [[0.0f64; 4]; 4];
        for col in &mut cols {
            for v in col.iter_mut() {
                *v = rng.symmetric_unit();
            }
        }
        let mut ok = true;
        for c in 0..4 {
            for prev in 0..c {
                let dot: f64 = (0..4).map(|r| cols[c][r] * cols[prev][r]).sum();
                for r in 0..4 {
                    cols[c][r] -= dot * cols[prev][r];
                }
            }
            let norm: f64 = (0..4).map(|r| cols[c][r] * cols[c][r]).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for r in 0..4 {
                cols[c][r] /= norm;
            }
        }
        if ok {
            let mut q = [[0.0; 4]; 4];
            for r in 0..4 {
                for c in 0..4 {
                    q[r][c] = cols[c][r];
                }
            }
            return q;
        }
    }
}
