//! Small dense complex matrices and a Hermitian eigensolver.
//!
//! Matrices here are at most a few hundred on a side (single-mode density
//! operators, photon-number blocks of two-mode unitaries), so a cyclic
//! Jacobi sweep is accurate and fast enough.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::math::{cis, exp, sqrt};
use crate::C64;

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![C64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Panics if `data.len() != n * n`.
    pub fn from_vec(n: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), n * n, "matrix data has wrong length");
        Self { n, data }
    }

    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        assert_eq!(u.len(), v.len());
        let n = u.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = u[i] * v[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, r) in dst.iter_mut().zip(row) {
                    *d += a * r;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.n);
        (0..self.n).map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Self { n: self.n, data }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Self { n: self.n, data }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn add_assign_scaled(&mut self, rhs: &Self, s: C64) {
        assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn kron(&self, rhs: &Self) -> Self {
        let (n, m) = (self.n, rhs.n);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Largest elementwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| f64::max(m, z.norm()))
    }

    /// Largest elementwise distance to another matrix of the same size.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.n, rhs.n);
        self.data.iter().zip(&rhs.data).fold(0.0, |m, (a, b)| f64::max(m, (a - b).norm()))
    }

    /// Largest `|A - A^dagger|` entry.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Sub-matrix on the leading `k` rows and columns.
    pub fn leading(&self, k: usize) -> Self {
        assert!(k <= self.n);
        let mut out = Self::zeros(k);
        for i in 0..k {
            for j in 0..k {
                out[(i, j)] = self[(i, j)];
            }
        }
        out
    }

    /// Embed into the leading block of a larger zero matrix.
    pub fn padded(&self, k: usize) -> Self {
        assert!(k >= self.n);
        let mut out = Self::zeros(k);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(i, j)] = self[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

/// Eigen-decomposition `A = V diag(values) V^dagger` of a Hermitian matrix.
/// Eigenvalues ascend; column `k` of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Cyclic complex Jacobi. Only the Hermitian part of `a` is used.
    pub fn new(a: &CMatrix) -> Self {
        let n = a.dim();
        let mut m = a.clone();
        // symmetrise so round-off in the input cannot stall convergence
        for i in 0..n {
            m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
            for j in i + 1..n {
                let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                m[(i, j)] = avg;
                m[(j, i)] = avg.conj();
            }
        }
        let mut v = CMatrix::identity(n);
        let scale = m.max_abs().max(f64::MIN_POSITIVE);

        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += m[(i, j)].norm_sqr();
                }
            }
            if sqrt(off) <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    let b = apq.norm();
                    if b <= 1e-300 || b <= 1e-18 * scale {
                        continue;
                    }
                    let alpha = apq.arg();
                    let (app, aqq) = (m[(p, p)].re, m[(q, q)].re);
                    let tau = (aqq - app) / (2.0 * b);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + sqrt(1.0 + tau * tau))
                    } else {
                        -1.0 / (-tau + sqrt(1.0 + tau * tau))
                    };
                    let c = 1.0 / sqrt(1.0 + t * t);
                    let s = t * c;
                    let ph = cis(-alpha);
                    // U = [[c, s], [-s e^{-i alpha}, c e^{-i alpha}]] on (p, q)
                    for k in 0..n {
                        let (xp, xq) = (m[(k, p)], m[(k, q)]);
                        m[(k, p)] = xp * c - xq * ph * s;
                        m[(k, q)] = xp * s + xq * ph * c;
                    }
                    for k in 0..n {
                        let (xp, xq) = (m[(p, k)], m[(q, k)]);
                        m[(p, k)] = xp * c - xq * ph.conj() * s;
                        m[(q, k)] = xp * s + xq * ph.conj() * c;
                    }
                    m[(p, q)] = C64::new(0.0, 0.0);
                    m[(q, p)] = C64::new(0.0, 0.0);
                    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                    for k in 0..n {
                        let (xp, xq) = (v[(k, p)], v[(k, q)]);
                        v[(k, p)] = xp * c - xq * ph * s;
                        v[(k, q)] = xp * s + xq * ph * c;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| m[(x, x)].re.total_cmp(&m[(y, y)].re));
        let values = order.iter().map(|&k| m[(k, k)].re).collect();
        let mut vectors = CMatrix::zeros(n);
        for (dst, &src) in order.iter().enumerate() {
            for r in 0..n {
                vectors[(r, dst)] = v[(r, src)];
            }
        }
        Self { values, vectors }
    }

    /// `V diag(f(values)) V^dagger`
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.values.len();
        let fv: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (k, f) in fv.iter().enumerate() {
                    acc += self.vectors[(i, k)] * f * self.vectors[(j, k)].conj();
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

/// `exp(G)` for anti-Hermitian `G`, through the eigenbasis of `iG`.
pub fn expm_anti_hermitian(g: &CMatrix) -> CMatrix {
    let h = g.scale(C64::new(0.0, 1.0));
    HermitianEigen::new(&h).map(|lambda| cis(-lambda))
}

/// Principal square root of a positive-semidefinite Hermitian matrix; tiny
/// negative eigenvalues from round-off are clipped to zero.
pub fn psd_sqrt(a: &CMatrix) -> CMatrix {
    HermitianEigen::new(a).map(|x| C64::new(sqrt(x.max(0.0)), 0.0))
}

/// `exp(H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix) -> CMatrix {
    HermitianEigen::new(h).map(|x| C64::new(exp(x), 0.0))
}

/// Eigen-decomposition of a real symmetric tridiagonal matrix by implicit
/// QL with Wilkinson shifts. `diag` has length `n`, `off[i]` couples `i`
/// and `i + 1`. Returns eigenvalues (unsorted) and the row-major
/// orthogonal matrix whose columns are the eigenvectors.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    assert!(n == 0 || off.len() + 1 == n, "off-diagonal must have n - 1 entries");
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 64, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let row = &mut z[k * n..(k + 1) * n];
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    (d, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = C64::new(next(), next());
            }
        }
        m.add(&m.adjoint())
    }

    #[test]
    fn eigen_reconstructs_hermitian() {
        for (n, seed) in [(1, 3), (2, 5), (7, 11), (24, 17)] {
            let a = lcg_matrix(n, seed);
            let eig = HermitianEigen::new(&a);
            let back = eig.map(|x| C64::new(x, 0.0));
            assert!(back.max_abs_diff(&a) < 1e-12, "n = {n}");
            let vv = eig.vectors.adjoint().matmul(&eig.vectors);
            assert!(vv.max_abs_diff(&CMatrix::identity(n)) < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigen_of_pauli_y() {
        let mut y = CMatrix::zeros(2);
        y[(0, 1)] = C64::new(0.0, -1.0);
        y[(1, 0)] = C64::new(0.0, 1.0);
        let eig = HermitianEigen::new(&y);
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn expm_rotation_generator() {
        // exp(theta [[0, -1], [1, 0]]) is a plane rotation
        let theta = 0.7;
        let mut g = CMatrix::zeros(2);
        g[(0, 1)] = C64::new(-theta, 0.0);
        g[(1, 0)] = C64::new(theta, 0.0);
        let u = expm_anti_hermitian(&g);
        assert!((u[(0, 0)].re - theta.cos()).abs() < 1e-14);
        assert!((u[(0, 1)].re + theta.sin()).abs() < 1e-14);
        assert!((u[(1, 0)].re - theta.sin()).abs() < 1e-14);
        assert!(u[(0, 0)].im.abs() < 1e-14);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = lcg_matrix(6, 23);
        let psd = a.matmul(&a);
        let r = psd_sqrt(&psd);
        assert!(r.matmul(&r).max_abs_diff(&psd) < 1e-11);
    }

    #[test]
    fn tridiagonal_eigen_reconstructs() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 1.0 + (i as f64 * 0.11).cos()).collect();
        let (vals, z) = symmetric_tridiagonal_eigen(&diag, &off);
        for r in 0..n {
            for c in 0..n {
                let mut a = 0.0;
                let mut id = 0.0;
                for k in 0..n {
                    a += z[r * n + k] * vals[k] * z[c * n + k];
                    id += z[k * n + r] * z[k * n + c];
                }
                let expect = if r == c {
                    diag[r]
                } else if r + 1 == c {
                    off[r]
                } else if c + 1 == r {
                    off[c]
                } else {
                    0.0
                };
                assert!((a - expect).abs() < 1e-12);
                assert!((id - if r == c { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }
}
