//! Matrix functionals that turn the kernel A into click-pattern probabilities.

pub mod apd;
pub mod expectation;
pub mod hafnian;
pub mod kensingtonian;
pub mod reduce;
pub mod snspd;
pub mod subsets;
pub mod torontonian;

pub use apd::apd_functional;
pub use expectation::{expand_functional, gaussian_expectation, SymbolTerm};
pub use hafnian::{hafnian, hafnian_brute_force, MAX_HAFNIAN_HALF_DIM};
pub use kensingtonian::{kensingtonian, kensingtonian_via_torontonian};
pub use snspd::{snspd_functional, SnspdValue};
pub use torontonian::torontonian;

use crate::error::{GbsError, Result};
use crate::gaussian::KernelMatrix;
use crate::linalg::{CMat, C64};

/// Imaginary parts up to this size (relative to the magnitude, floor 1) are
/// treated as rounding noise.
pub const IMAGINARY_TOL: f64 = 1e-10;

/// Kernel restricted to the outputs that registered clicks.
#[derive(Clone, Debug)]
pub struct ReducedKernel {
    /// A_{S(n)}: 2N×2N, rows (l₁…l_N, l₁+M…l_N+M) of the full kernel.
    pub a_s: CMat,
    /// Triggered outputs l₁ < … < l_N.
    pub support: Vec<usize>,
    /// Click counts c_i on the support, all positive.
    pub clicks: Vec<usize>,
    pub norm_q: f64,
}

impl ReducedKernel {
    /// Number of triggered outputs N.
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_clicks(&self) -> usize {
        self.clicks.iter().sum()
    }

    pub fn is_collision_free(&self) -> bool {
        self.clicks.iter().all(|&c| c == 1)
    }

    /// A_n: each support row/column repeated c_i times in both blocks.
    pub fn repeated(&self) -> CMat {
        repeat_blocks(&self.a_s, &self.clicks)
    }

    /// A_{S(n),Z} for a subset Z of support positions.
    pub fn restricted(&self, z: &[usize]) -> CMat {
        restrict_pairs(&self.a_s, z)
    }

    /// A reduced kernel built directly from a 2N×2N matrix (for tests and
    /// callers that already hold A_S).
    pub fn from_matrix(a_s: CMat, clicks: Vec<usize>) -> Result<Self> {
        if a_s.dim() != 2 * clicks.len() {
            return Err(GbsError::Dimension(format!(
                "A_S is {}x{} but {} click counts were given",
                a_s.dim(),
                a_s.dim(),
                clicks.len()
            )));
        }
        if clicks.contains(&0) {
            return Err(crate::error::invalid(
                "clicks",
                "support click counts must be positive",
            ));
        }
        let support = (0..clicks.len()).collect();
        Ok(Self {
            a_s,
            support,
            clicks,
            norm_q: 1.0,
        })
    }
}

/// Keeps the rows and columns of the outputs with nonzero counts.
pub fn reduce(kernel: &KernelMatrix, pattern: &[usize]) -> Result<ReducedKernel> {
    let m = kernel.modes();
    if pattern.len() != m {
        return Err(GbsError::Dimension(format!(
            "pattern has {} entries for {} modes",
            pattern.len(),
            m
        )));
    }
    let support: Vec<usize> = (0..m).filter(|&i| pattern[i] > 0).collect();
    let clicks: Vec<usize> = support.iter().map(|&i| pattern[i]).collect();
    let idx: Vec<usize> = support
        .iter()
        .copied()
        .chain(support.iter().map(|&i| i + m))
        .collect();
    Ok(ReducedKernel {
        a_s: kernel.a.select(&idx),
        support,
        clicks,
        norm_q: kernel.norm_q,
    })
}

/// Repeats pair (i, i+N) of a 2N×2N matrix `counts[i]` times.
pub fn repeat_blocks(a: &CMat, counts: &[usize]) -> CMat {
    let n = counts.len();
    debug_assert_eq!(a.dim(), 2 * n);
    let mut first = Vec::new();
    for (i, &c) in counts.iter().enumerate() {
        first.extend(std::iter::repeat_n(i, c));
    }
    let idx: Vec<usize> = first
        .iter()
        .copied()
        .chain(first.iter().map(|&i| i + n))
        .collect();
    a.select(&idx)
}

/// Principal submatrix on pairs (z, z+N) of a 2N×2N matrix.
pub fn restrict_pairs(a: &CMat, z: &[usize]) -> CMat {
    let n = a.dim() / 2;
    let idx: Vec<usize> = z.iter().copied().chain(z.iter().map(|&i| i + n)).collect();
    a.select(&idx)
}

/// Drops a negligible imaginary part or reports it.
pub fn real_part(value: C64, what: &str) -> Result<f64> {
    if value.im.abs() > IMAGINARY_TOL * value.re.abs().max(1.0) {
        return Err(GbsError::Numerical(format!(
            "{what} has imaginary residue {:e} (value {value})",
            value.im
        )));
    }
    Ok(value.re)
}

/// 1/√det(M) for a matrix whose determinant must be real and positive.
pub(crate) fn inverse_sqrt_det(m: &CMat, subset: &[usize]) -> Result<f64> {
    let det = m.determinant();
    match crate::linalg::positive_sqrt(det) {
        Some(root) => Ok(1.0 / root),
        None => Err(GbsError::NonPositiveDeterminant {
            value: det.re,
            subset: subset.to_vec(),
        }),
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}
