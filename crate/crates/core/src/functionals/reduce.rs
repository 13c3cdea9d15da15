//! Deterministic summation helpers shared by the subset sums.

use std::ops::Add;

/// Sums `parts` by a balanced binary tree in index order, so the rounding
/// pattern depends only on the number of parts.
pub fn pairwise_sum<T: Copy + Add<Output = T> + Default>(parts: &[T]) -> T {
    match parts.len() {
        0 => T::default(),
        1 => parts[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&parts[..mid]) + pairwise_sum(&parts[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_sum_matches_plain_sum_for_integers() {
        let v: Vec<f64> = (1..=1000).map(|x| x as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }
}
