//! SNSPD functional: the Gaussian expectation with a_i = 1 − Ξ_{c_i}(t_i)
//! integrated over the ordered pulse times of every triggered output.

use super::expectation::expectation_from_kernel;
use super::subsets::{indexed_sum, mixed_radix};
use super::{real_part, ReducedKernel};
use crate::detectors::{compressed_rule, QuadSpec, Timing};
use crate::error::{GbsError, Result};
use crate::linalg::C64;

/// Default cap on the total number of clicks among triggered outputs.
pub const DEFAULT_MAX_SNSPD_CLICKS: usize = 4;

/// Integral value with the difference to the half-order rule as error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnspdValue {
    pub value: f64,
    pub error: f64,
}

pub fn snspd_functional(rk: &ReducedKernel, timing: &Timing, quad: QuadSpec) -> Result<SnspdValue> {
    snspd_functional_capped(rk, timing, quad, DEFAULT_MAX_SNSPD_CLICKS)
}

pub fn snspd_functional_capped(
    rk: &ReducedKernel,
    timing: &Timing,
    quad: QuadSpec,
    max_clicks: usize,
) -> Result<SnspdValue> {
    if rk.total_clicks() > max_clicks {
        return Err(GbsError::Infeasible(format!(
            "{} clicks exceed the SNSPD quadrature cap of {max_clicks}",
            rk.total_clicks()
        )));
    }
    let value = tensor_integral(rk, timing, quad)?;
    let coarse = QuadSpec {
        order: (quad.order / 2).max(2),
        ..quad
    };
    let error = (value - tensor_integral(rk, timing, coarse)?).abs();
    if error > 1e-3 * value.abs() + 1e-10 {
        return Err(GbsError::Numerical(format!(
            "SNSPD quadrature not converged: value {value:e}, step-doubling difference {error:e}"
        )));
    }
    Ok(SnspdValue { value, error })
}

fn tensor_integral(rk: &ReducedKernel, timing: &Timing, quad: QuadSpec) -> Result<f64> {
    let n = rk.len();
    if n == 0 {
        return Ok(1.0);
    }
    let rules: Vec<_> = rk
        .clicks
        .iter()
        .map(|&c| compressed_rule(timing, c, quad))
        .collect();
    if rules.iter().any(|r| r.is_empty()) {
        return Ok(0.0);
    }
    let radices: Vec<usize> = rules.iter().map(|r| r.len()).collect();
    let total: usize = radices.iter().product();
    let sum = indexed_sum(total, |idx| {
        let mut pick = vec![0usize; n];
        mixed_radix(idx, &radices, &mut pick);
        let mut weight = 1.0;
        let mut a = vec![0.0; n];
        for i in 0..n {
            weight *= rules[i].weights[pick[i]];
            a[i] = (1.0 - rules[i].xi[pick[i]]).clamp(0.0, 1.0);
        }
        if weight == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(expectation_from_kernel(&rk.a_s, &rk.clicks, &a)? * weight)
    })?;
    real_part(sum, "SNSPD functional")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::Envelope;
    use crate::functionals::{apd_functional, reduce};
    use crate::gaussian::{kernel, make_thermal};
    use crate::linalg::CMat;

    fn rect(d: f64, r: f64) -> Timing {
        Timing {
            dead_time: d,
            relax_time: r,
            envelope: Envelope::Rectangular,
        }
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let rk = ReducedKernel::from_matrix(CMat::zeros(4), vec![1, 2]).unwrap();
        let v = snspd_functional(&rk, &rect(0.1, 0.2), QuadSpec::default()).unwrap();
        assert!(v.value.abs() < 1e-15);
    }

    #[test]
    fn single_thermal_mode_scalar_oracle() {
        // For one mode, F = ∫ dt I(t) t̄ / (1 − (1 − Ξ₁(t)) t̄)², t̄ = n/(n+1),
        // integrated here with a plain composite midpoint rule.
        let n = 0.7;
        let tbar = n / (n + 1.0);
        let timing = Timing {
            dead_time: 0.15,
            relax_time: 0.1,
            envelope: Envelope::TruncatedGaussian {
                center: 0.45,
                width: 0.2,
            },
        };
        let steps = 200_000;
        let h = 1.0 / steps as f64;
        let mut oracle = 0.0;
        for i in 0..steps {
            let t = (i as f64 + 0.5) * h;
            let xi = timing.effective_window(&[t]).unwrap();
            oracle += h * timing.envelope.intensity(t) * tbar / (1.0 - (1.0 - xi) * tbar).powi(2);
        }
        let k = kernel(&make_thermal(n).unwrap()).unwrap();
        let rk = reduce(&k, &[1]).unwrap();
        let v = snspd_functional(&rk, &timing, QuadSpec::default()).unwrap();
        assert!((v.value - oracle).abs() < 1e-8, "{} vs {oracle}", v.value);
    }

    #[test]
    fn fast_recovery_matches_apd() {
        let k = kernel(&make_thermal(0.5).unwrap()).unwrap();
        let rk = reduce(&k, &[1]).unwrap();
        let apd = apd_functional(&rk, 0.95).unwrap();
        let v = snspd_functional(&rk, &rect(0.05, 1e-6), QuadSpec::default()).unwrap();
        assert!((apd - v.value).abs() < 1e-4);
    }

    #[test]
    fn click_cap_enforced() {
        let rk = ReducedKernel::from_matrix(CMat::zeros(4), vec![3, 2]).unwrap();
        assert!(snspd_functional(&rk, &rect(0.1, 0.1), QuadSpec::default()).is_err());
    }
}
