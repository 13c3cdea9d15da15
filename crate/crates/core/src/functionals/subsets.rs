//! Enumeration of the subset lattice P([N]) in Gray-code order.
//!
//! The 2^N subsets are cut into fixed-size ranges of consecutive Gray codes.
//! Ranges are evaluated in parallel and their partial sums combined by a
//! pairwise tree in range order, so the result does not depend on the number
//! of worker threads.

use super::reduce::pairwise_sum;
use crate::error::{GbsError, Result};
use crate::linalg::C64;
use rayon::prelude::*;

const RANGE_LEN: usize = 256;

/// Largest N for which a full subset sum is attempted.
pub const MAX_SUBSET_BITS: usize = 30;

#[inline]
pub fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Calls `term(members, mask)` once for every subset of `0..n` and returns the
/// deterministic sum together with the number of terms visited.
pub fn subset_sum<F>(n: usize, term: F) -> Result<(C64, usize)>
where
    F: Fn(&[usize], usize) -> Result<C64> + Sync,
{
    if n > MAX_SUBSET_BITS {
        return Err(GbsError::Infeasible(format!(
            "subset sum over 2^{n} terms is beyond reach"
        )));
    }
    let sum = indexed_sum(1usize << n, |i| {
        let mask = gray(i);
        let members: Vec<usize> = (0..n).filter(|&b| mask >> b & 1 == 1).collect();
        term(&members, mask)
    })?;
    Ok((sum, 1usize << n))
}

/// Deterministic parallel sum of `term(i)` for `i` in `0..total`.
pub fn indexed_sum<F>(total: usize, term: F) -> Result<C64>
where
    F: Fn(usize) -> Result<C64> + Sync,
{
    let ranges = total.div_ceil(RANGE_LEN);
    let run_range = |r: usize| -> Result<C64> {
        let start = r * RANGE_LEN;
        let end = (start + RANGE_LEN).min(total);
        let mut acc = Vec::with_capacity(end - start);
        for i in start..end {
            acc.push(term(i)?);
        }
        Ok(pairwise_sum(&acc))
    };
    let parts: Vec<Result<C64>> = if ranges > 1 {
        (0..ranges).into_par_iter().map(run_range).collect()
    } else {
        (0..ranges).map(run_range).collect()
    };
    let sums = parts.into_iter().collect::<Result<Vec<C64>>>()?;
    Ok(pairwise_sum(&sums))
}

/// Decodes `index` into mixed-radix digits with the given radices (first digit fastest).
pub fn mixed_radix(mut index: usize, radices: &[usize], digits: &mut [usize]) {
    for (d, &r) in digits.iter_mut().zip(radices) {
        *d = index % r;
        index /= r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use std::collections::HashSet;
    use std::sync::Mutex;

    #[test]
    fn visits_every_subset_once() {
        for n in [0usize, 1, 5, 11] {
            let seen = Mutex::new(HashSet::new());
            let (sum, count) = subset_sum(n, |_, mask| {
                assert!(seen.lock().unwrap().insert(mask));
                Ok(ONE)
            })
            .unwrap();
            assert_eq!(count, 1 << n);
            assert_eq!(sum.re as usize, 1 << n);
        }
    }

    #[test]
    fn mixed_radix_round_trip() {
        let radices = [3usize, 1, 4];
        let mut digits = [0usize; 3];
        mixed_radix(11, &radices, &mut digits);
        assert_eq!(digits, [2, 0, 3]);
    }

    #[test]
    fn consecutive_gray_codes_differ_in_one_bit() {
        for i in 0..1000usize {
            assert_eq!((gray(i) ^ gray(i + 1)).count_ones(), 1);
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let f = |m: &[usize], _: usize| Ok(C64::new(1.0 / (1.0 + m.len() as f64).sqrt(), 0.1));
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| subset_sum(14, f).unwrap());
        let b = four.install(|| subset_sum(14, f).unwrap());
        assert_eq!(a, b);
    }
}
