//! Small dense complex matrices.
//!
//! The functionals evaluate thousands of tiny determinants and inverses per
//! pattern, so the hot paths work on flat row-major buffers instead of going
//! through a general-purpose matrix library.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_real(n: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), n * n);
        Self {
            n,
            data: values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |i, j| rows[i][j])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self[(i, j)].conj())
    }

    pub fn scale(&self, s: C64) -> CMat {
        CMat {
            n: self.n,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &CMat) -> CMat {
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMat) -> CMat {
        CMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Principal submatrix on `idx` (indices may repeat).
    pub fn select(&self, idx: &[usize]) -> CMat {
        CMat::from_fn(idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// (M + Mᵀ)/2.
    pub fn symmetrized(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)]) * 0.5)
    }

    pub fn determinant(&self) -> C64 {
        let mut buf = self.data.clone();
        lu_determinant_in_place(&mut buf, self.n)
    }

    pub fn inverse(&self) -> Option<CMat> {
        invert(&self.data, self.n).map(|data| CMat { n: self.n, data })
    }

    /// Block swap X for a 2k×2k matrix in (α, α*) ordering.
    pub fn block_swap(n2: usize) -> CMat {
        assert!(n2.is_multiple_of(2));
        let k = n2 / 2;
        let mut x = CMat::zeros(n2);
        for i in 0..k {
            x[(i, i + k)] = ONE;
            x[(i + k, i)] = ONE;
        }
        x
    }

    /// Rows of `self` permuted by the block swap, i.e. X·self.
    pub fn swap_blocks_rows(&self) -> CMat {
        let k = self.n / 2;
        CMat::from_fn(self.n, |i, j| {
            let r = if i < k { i + k } else { i - k };
            self[(r, j)]
        })
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

/// Determinant by LU with partial pivoting; destroys `a`.
pub fn lu_determinant_in_place(a: &mut [C64], n: usize) -> C64 {
    let mut det = ONE;
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].norm_sqr();
        for r in (k + 1)..n {
            let v = a[r * n + k].norm_sqr();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 {
            return ZERO;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        let inv = pivot.inv();
        for r in (k + 1)..n {
            let f = a[r * n + k] * inv;
            if f == ZERO {
                continue;
            }
            for c in (k + 1)..n {
                let v = a[k * n + c];
                a[r * n + c] -= f * v;
            }
        }
    }
    det
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[C64], n: usize) -> Option<Vec<C64>> {
    let mut m = a.to_vec();
    let mut inv = vec![ZERO; n * n];
    for i in 0..n {
        inv[i * n + i] = ONE;
    }
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    for k in 0..n {
        let mut p = k;
        let mut best = m[k * n + k].norm();
        for r in (k + 1)..n {
            let v = m[r * n + k].norm();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best <= scale * 1e-15 {
            return None;
        }
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
                inv.swap(k * n + c, p * n + c);
            }
        }
        let pinv = m[k * n + k].inv();
        for c in 0..n {
            m[k * n + c] *= pinv;
            inv[k * n + c] *= pinv;
        }
        for r in 0..n {
            if r == k {
                continue;
            }
            let f = m[r * n + k];
            if f == ZERO {
                continue;
            }
            for c in 0..n {
                let mv = m[k * n + c];
                let iv = inv[k * n + c];
                m[r * n + c] -= f * mv;
                inv[r * n + c] -= f * iv;
            }
        }
    }
    Some(inv)
}

/// Square root of a determinant that must be real and positive.
///
/// Returns `None` when the real part is not positive or the imaginary residue
/// is larger than `1e-8` relative to the magnitude.
pub fn positive_sqrt(det: C64) -> Option<f64> {
    if det.re <= 0.0 || det.im.abs() > 1e-8 * det.re.max(1.0) {
        return None;
    }
    Some(det.re.sqrt())
}

/// Coefficients `q_0..=q_m` of det(I − ηC) as a polynomial in η.
///
/// Reduces C to upper Hessenberg form by stabilised elementary similarity
/// transforms and expands the characteristic polynomial with the Hessenberg
/// recurrence.
pub fn det_one_minus_eta(c: &mut [C64], m: usize) -> Vec<C64> {
    hessenberg_in_place(c, m);
    // p_k(λ) = det(λI − H_k); stored as coefficient vectors.
    let h = |i: usize, j: usize| c[i * m + j];
    let mut polys: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    polys.push(vec![ONE]);
    for k in 1..=m {
        let kk = k - 1;
        // (λ − h_kk) p_{k−1}
        let prev = &polys[k - 1];
        let mut p = vec![ZERO; k + 1];
        for (d, &coef) in prev.iter().enumerate() {
            p[d + 1] += coef;
            p[d] -= h(kk, kk) * coef;
        }
        let mut prod = ONE;
        for i in (0..kk).rev() {
            prod *= h(i + 1, i);
            if prod == ZERO {
                break;
            }
            let factor = h(i, kk) * prod;
            for (d, &coef) in polys[i].iter().enumerate() {
                p[d] -= factor * coef;
            }
        }
        polys.push(p);
    }
    // det(I − ηC) = η^m p(1/η) → coefficient of η^j is a_{m−j}.
    let p = &polys[m];
    (0..=m).map(|j| p[m - j]).collect()
}

fn hessenberg_in_place(a: &mut [C64], n: usize) {
    if n < 3 {
        return;
    }
    for k in 0..(n - 2) {
        let mut p = k + 1;
        let mut best = a[(k + 1) * n + k].norm_sqr();
        for r in (k + 2)..n {
            let v = a[r * n + k].norm_sqr();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 {
            continue;
        }
        if p != k + 1 {
            for c in 0..n {
                a.swap(p * n + c, (k + 1) * n + c);
            }
            for r in 0..n {
                a.swap(r * n + p, r * n + k + 1);
            }
        }
        let pivot_inv = a[(k + 1) * n + k].inv();
        for i in (k + 2)..n {
            let f = a[i * n + k] * pivot_inv;
            if f == ZERO {
                continue;
            }
            for c in 0..n {
                let v = a[(k + 1) * n + c];
                a[i * n + c] -= f * v;
            }
            for r in 0..n {
                let v = a[r * n + i];
                a[r * n + k + 1] += f * v;
            }
        }
    }
}

/// Real symmetric eigenvalues via nalgebra.
pub fn symmetric_eigenvalues(n: usize, values: &[f64]) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_row_slice(n, n, values);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}
