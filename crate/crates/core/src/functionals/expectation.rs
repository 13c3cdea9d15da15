//! The Gaussian expectation that underlies every detector functional:
//!
//! F(W, m, a) = Π_i (∂²/∂α_i∂α_i*)^{m_i} exp(a_i ∂²/∂α_i∂α_i*) exp(½ ξ†(I − W)ξ) |_{ξ=0}
//!
//! A normal-ordered symbol μ^q e^{−sμ} on mode i becomes the operator
//! (∂²)^q exp((1 − s)∂²) acting on exp(½ ξ†Aξ) after the exp(∂²) of the
//! anti-normal Q-function kernel is absorbed, so a = 1 − s.

use super::hafnian::hafnian;
use super::subsets::{indexed_sum, mixed_radix};
use super::{inverse_sqrt_det, repeat_blocks};
use crate::error::{invalid, GbsError, Result};
use crate::linalg::{CMat, C64, ONE, ZERO};

/// Ω = A (I − D_a A)⁻¹ and det(I − D_a A) with D_a = diag(a, a).
///
/// This is the same matrix as diag(1−a) − (W⁻¹ + diag(a/(1−a)))⁻¹ but needs
/// neither W⁻¹ nor any division by 1 − a_i.
fn omega(a_mat: &CMat, a: &[f64]) -> Result<(CMat, f64)> {
    let n = a.len();
    let da = CMat::from_fn(2 * n, |i, j| a_mat[(i, j)] * a[i % n]);
    let m = CMat::identity(2 * n).sub(&da);
    let inv_sqrt = inverse_sqrt_det(&m, &[])?;
    let inv = m
        .inverse()
        .ok_or_else(|| GbsError::Singular("I − D_a A".into()))?;
    Ok((a_mat.matmul(&inv), inv_sqrt))
}

/// F(W, m, a) evaluated through a Hafnian of the repeated matrix X·Ω_m.
pub fn gaussian_expectation(w: &CMat, m: &[usize], a: &[f64]) -> Result<C64> {
    let l = m.len();
    if w.dim() != 2 * l || a.len() != l {
        return Err(GbsError::Dimension(format!(
            "W is {}x{}, m has {} entries, a has {}",
            w.dim(),
            w.dim(),
            l,
            a.len()
        )));
    }
    if let Some(x) = a.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(invalid("a", format!("entries must lie in [0, 1], got {x}")));
    }
    expectation_from_kernel(&CMat::identity(2 * l).sub(w), m, a)
}

/// Same as [`gaussian_expectation`] with A = I − W supplied directly.
pub(crate) fn expectation_from_kernel(a_mat: &CMat, m: &[usize], a: &[f64]) -> Result<C64> {
    let (om, inv_sqrt) = omega(a_mat, a)?;
    let xo = repeat_blocks(&om, m).swap_blocks_rows().symmetrized();
    Ok(hafnian(&xo)? * inv_sqrt)
}

/// One term Σ_l poly[l] μ^l e^{−sμ} of a per-mode normal-ordered symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTerm {
    pub s: f64,
    pub poly: Vec<f64>,
}

impl SymbolTerm {
    pub fn monomial(s: f64, degree: usize, weight: f64) -> Self {
        let mut poly = vec![0.0; degree + 1];
        poly[degree] = weight;
        Self { s, poly }
    }

    fn degree(&self) -> usize {
        self.poly.len().saturating_sub(1)
    }
}

/// Merges terms that share the same exponent.
pub fn merge_terms(terms: Vec<SymbolTerm>) -> Vec<SymbolTerm> {
    let mut out: Vec<SymbolTerm> = Vec::new();
    for t in terms {
        if let Some(e) = out.iter_mut().find(|e| e.s == t.s) {
            if e.poly.len() < t.poly.len() {
                e.poly.resize(t.poly.len(), 0.0);
            }
            for (x, y) in e.poly.iter_mut().zip(&t.poly) {
                *x += y;
            }
        } else {
            out.push(t);
        }
    }
    for t in &mut out {
        while t.poly.len() > 1 && *t.poly.last().unwrap() == 0.0 {
            t.poly.pop();
        }
    }
    out.retain(|t| t.poly.iter().any(|&c| c != 0.0));
    out
}

/// Σ over products of per-mode symbol terms of the Gaussian expectation,
/// evaluated with a derivative recursion on exp(½ ξᵀ XΩ ξ) instead of
/// Hafnians. `terms[i]` holds the symbol of the outcome on support mode i.
pub fn expand_functional(a_s: &CMat, terms: &[Vec<SymbolTerm>]) -> Result<C64> {
    let n = terms.len();
    if a_s.dim() != 2 * n {
        return Err(GbsError::Dimension(format!(
            "kernel is {}x{} but {} modes carry symbols",
            a_s.dim(),
            a_s.dim(),
            n
        )));
    }
    if terms.iter().any(|t| t.is_empty()) {
        return Ok(ZERO);
    }
    let radices: Vec<usize> = terms.iter().map(|t| t.len()).collect();
    let total: usize = radices.iter().product();
    indexed_sum(total, |idx| {
        let mut pick = vec![0usize; n];
        mixed_radix(idx, &radices, &mut pick);
        let chosen: Vec<&SymbolTerm> = (0..n).map(|i| &terms[i][pick[i]]).collect();
        combination_value(a_s, &chosen)
    })
}

fn combination_value(a_s: &CMat, chosen: &[&SymbolTerm]) -> Result<C64> {
    // Modes with a = 0 and no derivatives act as the identity and are dropped.
    let keep: Vec<usize> = (0..chosen.len())
        .filter(|&i| !(chosen[i].s == 1.0 && chosen[i].degree() == 0))
        .collect();
    let mut constant = ONE;
    for (i, t) in chosen.iter().enumerate() {
        if !keep.contains(&i) {
            constant *= t.poly[0];
        }
    }
    if keep.is_empty() {
        return Ok(constant);
    }
    let sub = super::restrict_pairs(a_s, &keep);
    let a: Vec<f64> = keep.iter().map(|&i| 1.0 - chosen[i].s).collect();
    let polys: Vec<&[f64]> = keep.iter().map(|&i| chosen[i].poly.as_slice()).collect();
    let (om, inv_sqrt) = omega(&sub, &a)?;
    let b = om.swap_blocks_rows().symmetrized();
    Ok(constant * inv_sqrt * derivative_box(&b, &polys))
}

/// Σ_l Π_i poly_i[l_i] ∂^{(l, l)} exp(½ ξᵀ B ξ)|₀ for symmetric B over the box
/// l_i ≤ deg poly_i, with ∂^{(l,l)} = Π_i (∂_{ξ_i} ∂_{ξ_{i+N}})^{l_i}.
pub fn derivative_box(b: &CMat, polys: &[&[f64]]) -> C64 {
    let n = polys.len();
    let dims: Vec<usize> = (0..2 * n).map(|k| polys[k % n].len()).collect();
    let mut strides = vec![1usize; 2 * n];
    for k in 1..2 * n {
        strides[k] = strides[k - 1] * dims[k - 1];
    }
    let size: usize = dims.iter().product();
    let mut t = vec![ZERO; size];
    t[0] = ONE;
    let mut idx = vec![0usize; 2 * n];
    for flat in 1..size {
        mixed_radix(flat, &dims, &mut idx);
        let i = idx.iter().position(|&v| v > 0).unwrap();
        // T_{k} = Σ_j B_ij (k − e_i)_j T_{k − e_i − e_j}
        let base = flat - strides[i];
        let mut acc = ZERO;
        for j in 0..2 * n {
            let kj = if j == i { idx[j] - 1 } else { idx[j] };
            if kj == 0 {
                continue;
            }
            acc += b[(i, j)] * kj as f64 * t[base - strides[j]];
        }
        t[flat] = acc;
    }
    let mut total = ZERO;
    let ranges: Vec<usize> = polys.iter().map(|p| p.len()).collect();
    let count: usize = ranges.iter().product();
    let mut l = vec![0usize; n];
    for flat in 0..count {
        mixed_radix(flat, &ranges, &mut l);
        let coef: f64 = (0..n).map(|i| polys[i][l[i]]).product();
        if coef == 0.0 {
            continue;
        }
        let pos: usize = (0..n).map(|i| l[i] * (strides[i] + strides[i + n])).sum();
        total += coef * t[pos];
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{factorial, reduce};
    use crate::gaussian::{
        assemble_and_propagate, haar_random_unitary, kernel, make_thermal,
        make_thermalized_squeezed,
    };

    fn two_mode_kernel() -> crate::gaussian::KernelMatrix {
        let inputs = vec![
            make_thermalized_squeezed(0.4, 0.1).unwrap(),
            make_thermal(0.2).unwrap(),
        ];
        let s = assemble_and_propagate(&inputs, &haar_random_unitary(2, 9).unwrap(), 0.85).unwrap();
        kernel(&s).unwrap()
    }

    #[test]
    fn empty_multiplicity_is_the_determinant() {
        let k = two_mode_kernel();
        let w = CMat::identity(4).sub(&k.a);
        let a = [0.3, 0.8];
        let f = gaussian_expectation(&w, &[0, 0], &a).unwrap();
        let da = CMat::from_fn(4, |i, j| k.a[(i, j)] * a[i % 2]);
        let det = CMat::identity(4).sub(&da).determinant();
        assert!((f - 1.0 / det.re.sqrt()).norm() < 1e-13);
    }

    #[test]
    fn zero_a_gives_the_hafnian_form() {
        let k = two_mode_kernel();
        let rk = reduce(&k, &[2, 1]).unwrap();
        let w = CMat::identity(4).sub(&rk.a_s);
        let f = gaussian_expectation(&w, &[2, 1], &[0.0, 0.0]).unwrap();
        let h = hafnian(&rk.repeated().swap_blocks_rows()).unwrap();
        assert!((f - h).norm() < 1e-12);
    }

    #[test]
    fn single_mode_matches_series() {
        // A thermal kernel t: F(m, a) = Σ_k (a^k/k!) ∂^{2(m+k)} exp(t|α|²)
        // = Σ_k (a^k/k!) (m+k)! t^{m+k}.
        let t: f64 = 0.35;
        let w = CMat::from_real(2, &[1.0 - t, 0.0, 0.0, 1.0 - t]);
        for (m, a) in [(1usize, 0.4f64), (2, 0.9), (3, 1.0)] {
            let mut term = factorial(m) * t.powi(m as i32);
            let mut series = 0.0;
            for k in 0..2000 {
                series += term;
                term *= a * t * (m + k + 1) as f64 / (k + 1) as f64;
            }
            let f = gaussian_expectation(&w, &[m], &[a]).unwrap();
            assert!((f.re - series).abs() < 1e-10 * series, "m={m} a={a}");
            assert!(f.im.abs() < 1e-14);
        }
    }

    #[test]
    fn expansion_matches_hafnian_route() {
        let k = two_mode_kernel();
        let rk = reduce(&k, &[2, 1]).unwrap();
        let w = CMat::identity(4).sub(&rk.a_s);
        let a = [0.25, 0.6];
        let direct = gaussian_expectation(&w, &[2, 1], &a).unwrap();
        let terms = vec![
            vec![SymbolTerm::monomial(1.0 - a[0], 2, 1.0)],
            vec![SymbolTerm::monomial(1.0 - a[1], 1, 1.0)],
        ];
        let expanded = expand_functional(&rk.a_s, &terms).unwrap();
        assert!((direct - expanded).norm() < 1e-12);
    }

    #[test]
    fn identity_modes_can_be_dropped() {
        let k = two_mode_kernel();
        let full = reduce(&k, &[1, 1]).unwrap();
        let terms = vec![
            vec![SymbolTerm::monomial(0.3, 1, 1.0)],
            vec![SymbolTerm::monomial(1.0, 0, 1.0)],
        ];
        let with_identity = expand_functional(&full.a_s, &terms).unwrap();
        let single = reduce(&k, &[1, 0]).unwrap();
        let alone = expand_functional(&single.a_s, &terms[..1]).unwrap();
        assert!((with_identity - alone).norm() < 1e-13);
    }

    #[test]
    fn merge_combines_equal_exponents() {
        let merged = merge_terms(vec![
            SymbolTerm {
                s: 0.5,
                poly: vec![1.0, 2.0],
            },
            SymbolTerm {
                s: 0.5,
                poly: vec![-1.0, 0.0, 3.0],
            },
            SymbolTerm {
                s: 1.0,
                poly: vec![0.0],
            },
        ]);
        assert_eq!(
            merged,
            vec![SymbolTerm {
                s: 0.5,
                poly: vec![0.0, 2.0, 3.0]
            }]
        );
    }
}
