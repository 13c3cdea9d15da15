//! Hafnian of a symmetric 2n×2n matrix: the sum over perfect matchings of the
//! index set of the product of matched entries.

use crate::error::{invalid, GbsError, Result};
use crate::linalg::{det_one_minus_eta, CMat, C64, ONE, ZERO};
use rayon::prelude::*;

/// Largest supported half-dimension n.
pub const MAX_HAFNIAN_HALF_DIM: usize = 16;

/// Half-dimension up to which the matching enumeration is used as the oracle.
pub const BRUTE_FORCE_HALF_DIM: usize = 6;

/// Subset count above which the power-trace sum is split across threads.
const PARALLEL_SUBSETS: usize = 1 << 10;

/// Hafnian with the default algorithm choice.
pub fn hafnian(b: &CMat) -> Result<C64> {
    let n2 = b.dim();
    if !n2.is_multiple_of(2) {
        return Err(GbsError::Dimension(format!(
            "hafnian needs even dimension, got {n2}"
        )));
    }
    let n = n2 / 2;
    if n > MAX_HAFNIAN_HALF_DIM {
        return Err(GbsError::Infeasible(format!(
            "hafnian of half-dimension {n} exceeds the limit {MAX_HAFNIAN_HALF_DIM}"
        )));
    }
    match n {
        0 => Ok(ONE),
        1 => Ok(b[(0, 1)]),
        2 => Ok(b[(0, 1)] * b[(2, 3)] + b[(0, 2)] * b[(1, 3)] + b[(0, 3)] * b[(1, 2)]),
        _ => Ok(hafnian_power_trace(b)),
    }
}

/// Direct enumeration of all (2n−1)!! perfect matchings.
pub fn hafnian_brute_force(b: &CMat) -> Result<C64> {
    let n2 = b.dim();
    if !n2.is_multiple_of(2) {
        return Err(GbsError::Dimension(format!(
            "hafnian needs even dimension, got {n2}"
        )));
    }
    if n2 / 2 > BRUTE_FORCE_HALF_DIM {
        return Err(invalid(
            "matrix",
            format!("matching enumeration is limited to n ≤ {BRUTE_FORCE_HALF_DIM}"),
        ));
    }
    let mut remaining: Vec<usize> = (0..n2).collect();
    Ok(matchings(b, &mut remaining))
}

fn matchings(b: &CMat, remaining: &mut Vec<usize>) -> C64 {
    if remaining.is_empty() {
        return ONE;
    }
    let first = remaining.remove(0);
    let mut total = ZERO;
    for pos in 0..remaining.len() {
        let partner = remaining.remove(pos);
        let w = b[(first, partner)];
        if w != ZERO {
            total += w * matchings(b, remaining);
        }
        remaining.insert(pos, partner);
    }
    remaining.insert(0, first);
    total
}

/// Inclusion–exclusion over index pairs (2i, 2i+1) with the power-trace
/// generating function det(I − ηC)^{−1/2}.
pub fn hafnian_power_trace(b: &CMat) -> C64 {
    let n = b.dim() / 2;
    if n == 0 {
        return ONE;
    }
    let subsets = 1usize << n;
    let term = |z: usize| -> C64 {
        let pairs: Vec<usize> = (0..n).filter(|&i| z >> i & 1 == 1).collect();
        let k = pairs.len();
        let sign = if (n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        if k == 0 {
            // f of the empty matrix is the η^n coefficient of 1, zero for n ≥ 1.
            return ZERO;
        }
        let m = 2 * k;
        let mut c = vec![ZERO; m * m];
        // (B·X) restricted to the chosen pairs; X swaps the two members of a pair.
        for (ri, &pi) in pairs.iter().enumerate() {
            for r_off in 0..2 {
                let row = 2 * pi + r_off;
                for (ci, &pj) in pairs.iter().enumerate() {
                    for c_off in 0..2 {
                        let col = 2 * pj + (1 - c_off);
                        c[(2 * ri + r_off) * m + 2 * ci + c_off] = b[(row, col)];
                    }
                }
            }
        }
        let q = det_one_minus_eta(&mut c, m);
        sign * inverse_sqrt_coefficient(&q, n)
    };
    if subsets >= PARALLEL_SUBSETS {
        let parts: Vec<C64> = (0..subsets / 256)
            .into_par_iter()
            .map(|chunk| (chunk * 256..(chunk + 1) * 256).map(term).sum::<C64>())
            .collect();
        crate::functionals::reduce::pairwise_sum(&parts)
    } else {
        (0..subsets).map(term).sum()
    }
}

/// Coefficient of ηⁿ in q(η)^{−1/2} where q(0) = 1.
fn inverse_sqrt_coefficient(q: &[C64], n: usize) -> C64 {
    let alpha = -0.5;
    let mut s = vec![ZERO; n + 1];
    s[0] = ONE;
    for k in 1..=n {
        let mut acc = ZERO;
        for j in 1..=k.min(q.len() - 1) {
            acc += q[j] * s[k - j] * ((alpha + 1.0) * j as f64 - k as f64);
        }
        s[k] = acc / k as f64;
    }
    s[n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_symmetric(n2: usize, seed: u64) -> CMat {
        let mut s = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s % 10_000) as f64 / 10_000.0 - 0.5
        };
        let mut m = CMat::zeros(n2);
        for i in 0..n2 {
            for j in i..n2 {
                let v = C64::new(next(), next());
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn small_cases() {
        assert_eq!(hafnian(&CMat::zeros(0)).unwrap(), ONE);
        let c = C64::new(0.3, -1.2);
        let b = CMat::from_fn(2, |i, j| if i != j { c } else { ZERO });
        assert_eq!(hafnian(&b).unwrap(), c);
        let b = random_symmetric(4, 1);
        let expect = b[(0, 1)] * b[(2, 3)] + b[(0, 2)] * b[(1, 3)] + b[(0, 3)] * b[(1, 2)];
        assert!((hafnian_power_trace(&b) - expect).norm() < 1e-14);
        assert!((hafnian_brute_force(&b).unwrap() - expect).norm() < 1e-14);
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(hafnian(&CMat::zeros(3)).is_err());
        assert!(hafnian(&CMat::zeros(34)).is_err());
    }

    #[test]
    fn all_ones_counts_matchings() {
        for n in 1..=7usize {
            let b = CMat::from_fn(2 * n, |_, _| ONE);
            let double_factorial: f64 = (1..=n).map(|k| (2 * k - 1) as f64).product();
            assert!(
                (hafnian_power_trace(&b).re - double_factorial).abs() < 1e-8 * double_factorial
            );
        }
    }

    #[test]
    fn fast_path_matches_enumeration() {
        for n in 1..=6usize {
            for seed in 0..5 {
                let b = random_symmetric(2 * n, 100 * n as u64 + seed);
                let slow = hafnian_brute_force(&b).unwrap();
                let fast = hafnian(&b).unwrap();
                assert!((slow - fast).norm() < 1e-11 * (1.0 + slow.norm()), "n={n}");
            }
        }
    }

    #[test]
    fn parallel_path_matches_enumeration_scale() {
        // n = 10 crosses the parallel threshold; compare against a block-diagonal
        // matrix whose hafnian factorizes.
        let a = random_symmetric(10, 5);
        let b = random_symmetric(10, 6);
        let mut big = CMat::zeros(20);
        for i in 0..10 {
            for j in 0..10 {
                big[(i, j)] = a[(i, j)];
                big[(i + 10, j + 10)] = b[(i, j)];
            }
        }
        let expect = hafnian(&a).unwrap() * hafnian(&b).unwrap();
        assert!((hafnian(&big).unwrap() - expect).norm() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn permutation_invariance(seed in 0u64..10_000, perm_seed in 0u64..10_000) {
            let b = random_symmetric(6, seed);
            let mut p: Vec<usize> = (0..6).collect();
            let mut s = perm_seed;
            for i in (1..6).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                p.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted = b.select(&p);
            let d = (hafnian(&b).unwrap() - hafnian(&permuted).unwrap()).norm();
            prop_assert!(d < 1e-12);
        }
    }
}
