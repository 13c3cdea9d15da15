//! Kensingtonian for K-fold multiplexed click detectors.

use super::subsets::{indexed_sum, mixed_radix};
use super::{binomial, inverse_sqrt_det, real_part, torontonian, ReducedKernel};
use crate::error::{invalid, Result};
use crate::linalg::{CMat, C64};

fn check(rk: &ReducedKernel, k: usize) -> Result<()> {
    if k == 0 {
        return Err(invalid("K", "must be at least 1"));
    }
    if let Some(&c) = rk.clicks.iter().find(|&&c| c > k) {
        return Err(invalid(
            "pattern",
            format!("{c} clicks are impossible with K = {k} detectors"),
        ));
    }
    Ok(())
}

/// B = diag(d) A diag(d) with the same scaling in both blocks.
fn scaled(a_s: &CMat, d: &[f64]) -> CMat {
    let n = d.len();
    CMat::from_fn(2 * n, |i, j| a_s[(i, j)] * (d[i % n] * d[j % n]))
}

fn prefactor(rk: &ReducedKernel, k: usize) -> f64 {
    rk.clicks.iter().map(|&c| binomial(k, c)).product()
}

/// Complete binomial sum over 0 ≤ k_i ≤ c_i of determinant terms.
pub fn kensingtonian(rk: &ReducedKernel, k: usize) -> Result<f64> {
    check(rk, k)?;
    let n = rk.len();
    let radices: Vec<usize> = rk.clicks.iter().map(|&c| c + 1).collect();
    let total: usize = radices.iter().product();
    let sum = indexed_sum(total, |idx| {
        let mut ks = vec![0usize; n];
        mixed_radix(idx, &radices, &mut ks);
        let mut coef = 1.0;
        let mut d = vec![0.0; n];
        for i in 0..n {
            let (c, ki) = (rk.clicks[i], ks[i]);
            coef *= binomial(c, ki) * if ki % 2 == 0 { 1.0 } else { -1.0 };
            d[i] = ((c - ki) as f64 / k as f64).sqrt();
        }
        let b = scaled(&rk.a_s, &d);
        let m = CMat::identity(2 * n).sub(&b);
        Ok(C64::new(coef * inverse_sqrt_det(&m, &ks)?, 0.0))
    })?;
    Ok(prefactor(rk, k) * real_part(sum, "kensingtonian")?)
}

/// Equivalent form as a binomial sum of Torontonians over 0 ≤ k_i < c_i.
pub fn kensingtonian_via_torontonian(rk: &ReducedKernel, k: usize) -> Result<f64> {
    check(rk, k)?;
    let n = rk.len();
    let radices: Vec<usize> = rk.clicks.clone();
    let total: usize = radices.iter().product();
    let mut acc = 0.0;
    let mut ks = vec![0usize; n];
    for idx in 0..total {
        mixed_radix(idx, &radices, &mut ks);
        let mut coef = 1.0;
        let mut d = vec![0.0; n];
        for i in 0..n {
            let (c, ki) = (rk.clicks[i], ks[i]);
            coef *= binomial(c, ki) * if ki % 2 == 0 { 1.0 } else { -1.0 };
            d[i] = ((c - ki) as f64 / k as f64).sqrt();
        }
        acc += coef * torontonian(&scaled(&rk.a_s, &d))?;
    }
    Ok(prefactor(rk, k) * acc)
}
