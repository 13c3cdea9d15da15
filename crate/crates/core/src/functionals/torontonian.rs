//! Torontonian: Σ_Z (−1)^{N−|Z|} / √det(I − A_Z) over subsets Z of the N pairs.

use super::subsets::subset_sum;
use super::{inverse_sqrt_det, real_part, restrict_pairs};
use crate::error::{GbsError, Result};
use crate::linalg::{CMat, C64};

pub fn torontonian(a_s: &CMat) -> Result<f64> {
    if !a_s.dim().is_multiple_of(2) {
        return Err(GbsError::Dimension(
            "torontonian needs an even dimension".into(),
        ));
    }
    let n = a_s.dim() / 2;
    let (sum, _) = subset_sum(n, |z, _| {
        let sign = if (n - z.len()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        if z.is_empty() {
            return Ok(C64::new(sign, 0.0));
        }
        let az = restrict_pairs(a_s, z);
        let m = CMat::identity(az.dim()).sub(&az);
        Ok(C64::new(sign * inverse_sqrt_det(&m, z)?, 0.0))
    })?;
    real_part(sum, "torontonian")
}
