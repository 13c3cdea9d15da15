//! APD functional for collision-free patterns: a subset sum over Hafnians of
//! the matrices D_Z = X{2I − [η₁(I − A_Z)⁻¹ + (1 − η₁)I]⁻¹}.

use super::hafnian::hafnian;
use super::subsets::subset_sum;
use super::{inverse_sqrt_det, real_part, ReducedKernel};
use crate::error::{invalid, GbsError, Result};
use crate::linalg::{CMat, C64};

pub fn apd_functional(rk: &ReducedKernel, eta1: f64) -> Result<f64> {
    if !(eta1 > 0.0 && eta1 <= 1.0) {
        return Err(invalid("eta1", format!("must lie in (0, 1], got {eta1}")));
    }
    if !rk.is_collision_free() {
        return Err(GbsError::Unsupported(
            "the closed APD form covers one click per output; use the symbol expansion or snspd_functional for collisions".into(),
        ));
    }
    let n = rk.len();
    let (sum, _) = subset_sum(n, |z, _| {
        let sign = if (n - z.len()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        if z.is_empty() {
            return Ok(C64::new(sign, 0.0));
        }
        let az = rk.restricted(z);
        let dim = az.dim();
        let id = CMat::identity(dim);
        let lossy = id.sub(&az.scale(C64::new(1.0 - eta1, 0.0)));
        let weight = inverse_sqrt_det(&lossy, z)?;
        let resolvent = id
            .sub(&az)
            .inverse()
            .ok_or_else(|| GbsError::Singular(format!("I − A_Z for subset {z:?}")))?;
        let inner = resolvent
            .scale(C64::new(eta1, 0.0))
            .add(&id.scale(C64::new(1.0 - eta1, 0.0)))
            .inverse()
            .ok_or_else(|| GbsError::Singular(format!("APD inner matrix for subset {z:?}")))?;
        let d = id
            .scale(C64::new(2.0, 0.0))
            .sub(&inner)
            .swap_blocks_rows()
            .symmetrized();
        Ok(hafnian(&d)? * (sign * weight))
    })?;
    real_part(sum, "APD functional")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::reduce;
    use crate::gaussian::{kernel, make_thermal};

    #[test]
    fn zero_kernel_gives_zero() {
        let rk = ReducedKernel::from_matrix(CMat::zeros(6), vec![1, 1, 1]).unwrap();
        assert!(apd_functional(&rk, 0.9).unwrap().abs() < 1e-15);
    }

    #[test]
    fn single_thermal_mode() {
        // P(1|m) = (1 − η₁)^m + mη₁(1 − η₁)^{m−1} for m ≥ 1, weighted by the
        // geometric photon distribution of the thermal state.
        let n: f64 = 0.6;
        let eta1 = 0.95;
        let mut expect = 0.0;
        for m in 1..500 {
            let pm = n.powi(m) / (n + 1.0).powi(m + 1);
            let p1 = m as f64 * eta1 * (1.0 - eta1).powi(m - 1) + (1.0 - eta1).powi(m);
            expect += pm * p1;
        }
        let k = kernel(&make_thermal(n).unwrap()).unwrap();
        let rk = reduce(&k, &[1]).unwrap();
        let p = apd_functional(&rk, eta1).unwrap() / k.norm_q;
        assert!((p - expect).abs() < 1e-13, "{p} vs {expect}");
    }

    #[test]
    fn collisions_are_rejected() {
        let rk = ReducedKernel::from_matrix(CMat::zeros(2), vec![2]).unwrap();
        assert!(matches!(
            apd_functional(&rk, 0.9),
            Err(GbsError::Unsupported(_))
        ));
    }
}
