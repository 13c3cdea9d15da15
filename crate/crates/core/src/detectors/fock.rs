//! Fock-basis response P_{n|m}: probability of n clicks given m photons.

use super::model::{adjustment_efficiency, apd_capacity, DetectorModel};
use super::{pulse_rule, QuadSpec};
use crate::error::Result;
use crate::functionals::binomial;

/// Response matrix truncated to n ≤ n_max, m ≤ m_max; `p[n][m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockResponse {
    pub p: Vec<Vec<f64>>,
}

impl FockResponse {
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.p
            .get(n)
            .and_then(|row| row.get(m))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn n_max(&self) -> usize {
        self.p.len() - 1
    }

    pub fn m_max(&self) -> usize {
        self.p[0].len() - 1
    }

    pub fn column_sum(&self, m: usize) -> f64 {
        self.p.iter().map(|row| row[m]).sum()
    }
}

pub fn fock_response(det: &DetectorModel, n_max: usize, m_max: usize) -> Result<FockResponse> {
    det.validate()?;
    let mut p = vec![vec![0.0; m_max + 1]; n_max + 1];
    for (n, row) in p.iter_mut().enumerate() {
        for (m, v) in row.iter_mut().enumerate() {
            if m >= n {
                *v = response_entry(det, n, m)?;
            }
        }
    }
    Ok(FockResponse { p })
}

/// P_{n|m} for a single entry.
pub fn response_entry(det: &DetectorModel, n: usize, m: usize) -> Result<f64> {
    if m < n {
        return Ok(0.0);
    }
    Ok(match det {
        DetectorModel::Pnr => f64::from(n == m),
        DetectorModel::OnOff => click_entry(1, n, m),
        DetectorModel::Click { k } => click_entry(*k, n, m),
        DetectorModel::Apd { dead_time } => apd_entry(*dead_time, n, m),
        DetectorModel::Snspd(timing) => {
            if n == 0 {
                return Ok(f64::from(m == 0));
            }
            let rule = pulse_rule(timing, n, QuadSpec::default().order);
            let falling: f64 = (0..n).map(|i| (m - i) as f64).product();
            falling * rule.integrate(|xi| (1.0 - xi).max(0.0).powi((m - n) as i32))
        }
    })
}

fn click_entry(k: usize, n: usize, m: usize) -> f64 {
    if n > k {
        return 0.0;
    }
    let mut s = 0.0;
    for j in 0..=n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let base = (n - j) as f64 / k as f64;
        let pow = if m == 0 { 1.0 } else { base.powi(m as i32) };
        s += sign * binomial(n, j) * pow;
    }
    (binomial(k, n) * s).max(0.0)
}

fn binomial_cdf(k: usize, m: usize, eta: f64) -> f64 {
    if eta <= 0.0 {
        return 1.0;
    }
    if k >= m {
        return 1.0;
    }
    (0..=k)
        .map(|l| binomial(m, l) * eta.powi(l as i32) * (1.0 - eta).powi((m - l) as i32))
        .sum()
}

fn apd_entry(dead: f64, n: usize, m: usize) -> f64 {
    if dead == 0.0 {
        return f64::from(n == m);
    }
    let cap = apd_capacity(dead);
    if n == 0 {
        return f64::from(m == 0);
    }
    if n > cap + 1 {
        return 0.0;
    }
    if n == cap + 1 {
        return (1.0 - binomial_cdf(cap, m, adjustment_efficiency(dead, cap))).max(0.0);
    }
    let hi = binomial_cdf(n, m, adjustment_efficiency(dead, n));
    let lo = binomial_cdf(n - 1, m, adjustment_efficiency(dead, n - 1));
    (hi - lo).max(0.0)
}
