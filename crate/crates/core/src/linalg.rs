//! Small dense linear algebra: just enough for local polynomial fits of low
//! order and 2×2 covariance work.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `uᵀ M v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        assert_eq!(u.len(), self.rows);
        dot(u, &self.mul_vec(v))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[k] = 1.0;
    e
}

/// Householder QR with column pivoting, `A P = Q R`.
///
/// Only the pieces needed for least squares and for solves against `AᵀA` are
/// kept: the Householder vectors (to apply `Qᵀ`), the upper triangle `R` and
/// the column permutation.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    m: usize,
    n: usize,
    // Householder vectors stored column by column below the diagonal of `qr`;
    // `r` holds the upper triangle.
    qr: Matrix,
    betas: Vec<f64>,
    r_diag: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factorizes an `m × n` matrix (`m ≥ n`). Columns whose remaining norm
    /// falls below `rel_tol · |R₀₀|` are treated as rank deficient.
    pub fn new(a: &Matrix, rel_tol: f64) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut betas = vec![0.0; n];
        let mut r_diag = vec![0.0; n];
        let steps = m.min(n);

        let mut col_norms: Vec<f64> = (0..n).map(|j| (0..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum()).collect();

        for k in 0..steps {
            // Pivot on the largest remaining column; recompute norms exactly
            // since n is tiny.
            for (j, norm) in col_norms.iter_mut().enumerate().skip(k) {
                *norm = (k..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum();
            }
            let (piv, _) = col_norms
                .iter()
                .enumerate()
                .skip(k)
                .fold((k, -1.0), |best, (j, &v)| if v > best.1 { (j, v) } else { best });
            if piv != k {
                for i in 0..m {
                    let tmp = qr[(i, k)];
                    qr[(i, k)] = qr[(i, piv)];
                    qr[(i, piv)] = tmp;
                }
                perm.swap(k, piv);
                col_norms.swap(k, piv);
            }

            let norm = math::sqrt((k..m).map(|i| qr[(i, k)] * qr[(i, k)]).sum());
            if norm == 0.0 {
                betas[k] = 0.0;
                r_diag[k] = 0.0;
                continue;
            }
            let alpha = if qr[(k, k)] > 0.0 { -norm } else { norm };
            let v0 = qr[(k, k)] - alpha;
            qr[(k, k)] = v0;
            // v = x - alpha e_k, beta = 2 / (vᵀv)
            let vtv: f64 = (k..m).map(|i| qr[(i, k)] * qr[(i, k)]).sum();
            let beta = 2.0 / vtv;
            betas[k] = beta;
            r_diag[k] = alpha;
            for j in (k + 1)..n {
                let s: f64 = (k..m).map(|i| qr[(i, k)] * qr[(i, j)]).sum();
                let f = beta * s;
                for i in k..m {
                    let vk = qr[(i, k)];
                    qr[(i, j)] -= f * vk;
                }
            }
        }

        let lead = r_diag.first().map_or(0.0, |d| d.abs());
        let rank = r_diag
            .iter()
            .take(steps)
            .take_while(|d| lead > 0.0 && d.abs() > rel_tol * lead)
            .count();

        PivotedQr {
            m,
            n,
            qr,
            betas,
            r_diag,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.n
    }

    /// Ratio of the largest to the smallest diagonal entry of `R`; a cheap
    /// estimate of the 2-norm condition number of `A`.
    pub fn condition_estimate(&self) -> f64 {
        let max = self.r_diag.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        let min = self.r_diag.iter().fold(f64::INFINITY, |a, d| a.min(d.abs()));
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.r_diag[i]
        } else {
            self.qr[(i, j)]
        }
    }

    fn apply_qt(&self, b: &mut [f64]) {
        for k in 0..self.n.min(self.m) {
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            let s: f64 = (k..self.m).map(|i| self.qr[(i, k)] * b[i]).sum();
            let f = beta * s;
            for (i, bi) in b.iter_mut().enumerate().take(self.m).skip(k) {
                *bi -= f * self.qr[(i, k)];
            }
        }
    }

    /// Solves `R z = c` for the leading `n` entries.
    fn back_substitute(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.r(i, j) * z[j]).sum();
            z[i] = (c[i] - s) / self.r(i, i);
        }
        z
    }

    /// Solves `Rᵀ z = c`.
    fn forward_substitute_transposed(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.r(j, i) * z[j]).sum();
            z[i] = (c[i] - s) / self.r(i, i);
        }
        z
    }

    /// Least-squares solution of `A x ≈ b`. Requires full rank.
    pub fn solve_least_squares(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.m);
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let z = self.back_substitute(&qtb[..self.n]);
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }

    /// Solves `(AᵀA) x = v` using `AᵀA = P Rᵀ R Pᵀ`. Requires full rank.
    pub fn solve_normal(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let pv: Vec<f64> = self.perm.iter().map(|&p| v[p]).collect();
        let w = self.forward_substitute_transposed(&pv);
        let z = self.back_substitute(&w);
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }
}

/// Symmetric 2×2 matrix `[[a, b], [b, d]]`.
pub type Sym2 = [[f64; 2]; 2];

/// Eigen-decomposition of a symmetric 2×2 matrix in closed form.
///
/// Returns eigenvalues in ascending order and the matching unit eigenvectors.
pub fn sym2_eigen(m: &Sym2) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let mean = 0.5 * (a + d);
    let half_diff = 0.5 * (a - d);
    let rad = math::hypot(half_diff, b);
    let lo = mean - rad;
    let hi = mean + rad;
    if b == 0.0 {
        return if a <= d {
            ([a, d], [[1.0, 0.0], [0.0, 1.0]])
        } else {
            ([d, a], [[0.0, 1.0], [1.0, 0.0]])
        };
    }
    // Rotation angle of the principal axes.
    let theta = 0.5 * math::atan2(2.0 * b, a - d);
    let (c, s) = (math::cos(theta), math::sin(theta));
    // (c, s) is the eigenvector for `hi`.
    ([lo, hi], [[-s, c], [c, s]])
}

/// Symmetric positive semidefinite square root of a 2×2 matrix.
pub fn sym2_sqrt(m: &Sym2) -> Sym2 {
    let (vals, vecs) = sym2_eigen(m);
    let mut out = [[0.0; 2]; 2];
    for k in 0..2 {
        let s = math::sqrt(vals[k].max(0.0));
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += s * vecs[k][i] * vecs[k][j];
            }
        }
    }
    out
}

pub fn sym2_det(m: &Sym2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn sym2_inverse(m: &Sym2) -> Option<Sym2> {
    let det = sym2_det(m);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// `(1, x) M (1, y)ᵀ`.
pub fn sym2_gram(m: &Sym2, x: f64, y: f64) -> f64 {
    m[0][0] + m[0][1] * y + m[1][0] * x + m[1][1] * x * y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_solves_square_system() {
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 3.0], &[0.0, 1.0]]);
        let qr = PivotedQr::new(&a, 1e-12);
        assert!(qr.is_full_rank());
        // Normal equations solved by hand: AᵀA = [[5,5],[5,11]].
        let x = qr.solve_normal(&[5.0, 11.0]);
        assert!((x[0] - 0.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn qr_detects_rank_deficiency() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]);
        let qr = PivotedQr::new(&a, 1e-12);
        assert_eq!(qr.rank(), 1);
    }

    #[test]
    fn least_squares_matches_exact_fit() {
        let a = Matrix::from_rows(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0]]);
        let qr = PivotedQr::new(&a, 1e-12);
        let x = qr.solve_least_squares(&[1.0, 3.0, 5.0]);
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sym2_eigen_reconstructs() {
        let m = [[4.0, 1.5], [1.5, 1.0]];
        let (vals, vecs) = sym2_eigen(&m);
        assert!(vals[0] <= vals[1]);
        for k in 0..2 {
            let v = vecs[k];
            let mv = [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
            assert!((mv[0] - vals[k] * v[0]).abs() < 1e-12);
            assert!((mv[1] - vals[k] * v[1]).abs() < 1e-12);
        }
        let r = sym2_sqrt(&m);
        let sq = [
            [
                r[0][0] * r[0][0] + r[0][1] * r[1][0],
                r[0][0] * r[0][1] + r[0][1] * r[1][1],
            ],
            [
                r[1][0] * r[0][0] + r[1][1] * r[1][0],
                r[1][0] * r[0][1] + r[1][1] * r[1][1],
            ],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!((sq[i][j] - m[i][j]).abs() < 1e-12);
            }
        }
    }
}
