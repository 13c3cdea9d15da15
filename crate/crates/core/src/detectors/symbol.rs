//! Normal-ordered symbols of the POVM elements, evaluated at μ = αβ.

use super::model::{adjustment_efficiency, DetectorModel};
use super::quadrature::NodeRule;
use super::{compressed_rule, pulse_rule, QuadSpec};
use crate::error::{GbsError, Result};
use crate::functionals::{binomial, factorial, SymbolTerm};
use crate::linalg::{C64, ONE, ZERO};
use std::sync::Arc;

/// Half-width times |μ| above which the Chebyshev-compressed SNSPD rule is
/// replaced by the full node rule.
const COMPRESSION_REACH: f64 = 6.0;

/// π(q | μ) restricted to the outcomes 0, 1, 2 used by the orbit pipeline.
pub fn symbol(det: &DetectorModel, q: usize, mu: C64) -> Result<C64> {
    if q > 2 {
        return Err(GbsError::Unsupported(format!(
            "symbols are tracked for outcomes 0, 1, 2 only, got {q}"
        )));
    }
    normal_symbol(det, q, mu, QuadSpec::default())
}

/// π(q | μ) for any outcome q.
pub fn normal_symbol(det: &DetectorModel, q: usize, mu: C64, quad: QuadSpec) -> Result<C64> {
    det.validate()?;
    Ok(match det {
        DetectorModel::Pnr => pnr_symbol(q, mu),
        DetectorModel::OnOff => click_symbol(1, q, mu),
        DetectorModel::Click { k } => click_symbol(*k, q, mu),
        DetectorModel::Apd { dead_time } => apd_symbol(*dead_time, q, mu),
        DetectorModel::Snspd(t) => {
            if q == 0 {
                (-mu).exp()
            } else {
                let raw = pulse_rule(t, q, quad.order);
                let small = compressed_rule(t, q, quad);
                rule_symbol(&raw, &small, q, mu)
            }
        }
    })
}

fn pnr_symbol(q: usize, mu: C64) -> C64 {
    mu.powu(q as u32) * (-mu).exp() / factorial(q)
}

fn click_symbol(k: usize, q: usize, mu: C64) -> C64 {
    if q > k {
        return ZERO;
    }
    let x = mu / k as f64;
    // 1 − e^{−x} without cancellation for small |x|.
    let one_minus = if x.norm() < 1e-3 {
        x * (ONE - x / 2.0 * (ONE - x / 3.0 * (ONE - x / 4.0)))
    } else {
        ONE - (-x).exp()
    };
    binomial(k, q) * one_minus.powu(q as u32) * (-(mu * ((k - q) as f64 / k as f64))).exp()
}

fn truncated_exp(eta: f64, upto: usize, mu: C64) -> C64 {
    let x = mu * eta;
    let mut term = ONE;
    let mut sum = ONE;
    for l in 1..=upto {
        term = term * x / l as f64;
        sum += term;
    }
    sum * (-x).exp()
}

fn apd_symbol(dead: f64, q: usize, mu: C64) -> C64 {
    if q == 0 {
        return (-mu).exp();
    }
    let hi = adjustment_efficiency(dead, q);
    let lo = adjustment_efficiency(dead, q - 1);
    truncated_exp(hi, q, mu) - truncated_exp(lo, q - 1, mu)
}

fn rule_symbol(raw: &NodeRule, small: &NodeRule, q: usize, mu: C64) -> C64 {
    let (lo, hi) = small.range();
    let rule = if mu.norm() * 0.5 * (hi - lo) <= COMPRESSION_REACH {
        small
    } else {
        raw
    };
    let s: C64 = rule
        .weights
        .iter()
        .zip(&rule.xi)
        .map(|(&w, &x)| w * (-(mu * x)).exp())
        .sum();
    mu.powu(q as u32) * s
}

/// Symbol of outcome `c` as a sum of terms Σ_l p_l μ^l e^{−sμ}.
pub fn symbol_terms(det: &DetectorModel, c: usize, quad: QuadSpec) -> Result<Vec<SymbolTerm>> {
    det.validate()?;
    let terms = match det {
        DetectorModel::Pnr => vec![SymbolTerm::monomial(1.0, c, 1.0 / factorial(c))],
        DetectorModel::OnOff => click_terms(1, c),
        DetectorModel::Click { k } => click_terms(*k, c),
        DetectorModel::Apd { dead_time } => {
            if c == 0 {
                vec![SymbolTerm::monomial(1.0, 0, 1.0)]
            } else {
                let mut t = vec![poisson_partial(
                    adjustment_efficiency(*dead_time, c),
                    c,
                    1.0,
                )];
                t.push(poisson_partial(
                    adjustment_efficiency(*dead_time, c - 1),
                    c - 1,
                    -1.0,
                ));
                t
            }
        }
        DetectorModel::Snspd(timing) => {
            if c == 0 {
                vec![SymbolTerm::monomial(1.0, 0, 1.0)]
            } else {
                let rule = compressed_rule(timing, c, quad);
                rule.weights
                    .iter()
                    .zip(&rule.xi)
                    .map(|(&w, &x)| SymbolTerm::monomial(x, c, w))
                    .collect()
            }
        }
    };
    Ok(crate::functionals::expectation::merge_terms(terms))
}

fn click_terms(k: usize, c: usize) -> Vec<SymbolTerm> {
    if c > k {
        return Vec::new();
    }
    (0..=c)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            SymbolTerm::monomial(
                (k - c + j) as f64 / k as f64,
                0,
                sign * binomial(k, c) * binomial(c, j),
            )
        })
        .collect()
}

fn poisson_partial(eta: f64, upto: usize, sign: f64) -> SymbolTerm {
    SymbolTerm {
        s: eta,
        poly: (0..=upto)
            .map(|l| sign * eta.powi(l as i32) / factorial(l))
            .collect(),
    }
}

/// Precomputed symbol evaluator for the outcomes 0, 1, 2.
#[derive(Clone, Debug)]
pub struct SymbolTable {
    det: DetectorModel,
    rules: Vec<(Arc<NodeRule>, Arc<NodeRule>)>,
}

impl SymbolTable {
    pub fn new(det: &DetectorModel, quad: QuadSpec) -> Result<Self> {
        det.validate()?;
        let rules = match det {
            DetectorModel::Snspd(t) => (1..=2)
                .map(|q| (pulse_rule(t, q, quad.order), compressed_rule(t, q, quad)))
                .collect(),
            _ => Vec::new(),
        };
        Ok(Self {
            det: det.clone(),
            rules,
        })
    }

    pub fn detector(&self) -> &DetectorModel {
        &self.det
    }

    /// [π(0|μ), π(1|μ), π(2|μ)].
    pub fn outcomes(&self, mu: C64) -> [C64; 3] {
        match &self.det {
            DetectorModel::Snspd(_) => {
                let e = (-mu).exp();
                let one = rule_symbol(&self.rules[0].0, &self.rules[0].1, 1, mu);
                let two = rule_symbol(&self.rules[1].0, &self.rules[1].1, 2, mu);
                [e, one, two]
            }
            DetectorModel::Pnr => {
                let e = (-mu).exp();
                [e, mu * e, mu * mu * e * 0.5]
            }
            DetectorModel::OnOff => [click_symbol(1, 0, mu), click_symbol(1, 1, mu), ZERO],
            DetectorModel::Click { k } => [
                click_symbol(*k, 0, mu),
                click_symbol(*k, 1, mu),
                click_symbol(*k, 2, mu),
            ],
            DetectorModel::Apd { dead_time } => [
                apd_symbol(*dead_time, 0, mu),
                apd_symbol(*dead_time, 1, mu),
                apd_symbol(*dead_time, 2, mu),
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::fock::response_entry;
    use crate::detectors::model::{Envelope, Timing};

    fn all_detectors() -> Vec<DetectorModel> {
        vec![
            DetectorModel::Pnr,
            DetectorModel::OnOff,
            DetectorModel::Click { k: 2 },
            DetectorModel::Click { k: 3 },
            DetectorModel::Apd { dead_time: 0.05 },
            DetectorModel::Apd { dead_time: 0.3 },
            DetectorModel::Snspd(Timing {
                dead_time: 0.05,
                relax_time: 0.2,
                envelope: Envelope::Rectangular,
            }),
            DetectorModel::Snspd(Timing {
                dead_time: 0.1,
                relax_time: 0.1,
                envelope: Envelope::TruncatedGaussian {
                    center: 0.4,
                    width: 0.2,
                },
            }),
        ]
    }

    #[test]
    fn vacuum_outcome_at_zero() {
        for d in all_detectors() {
            assert!((symbol(&d, 0, ZERO).unwrap() - ONE).norm() < 1e-15);
        }
        assert!(symbol(&DetectorModel::Pnr, 3, ONE).is_err());
    }

    #[test]
    fn pnr_single_photon_term() {
        let mu = C64::new(0.7, 0.0);
        let v = symbol(&DetectorModel::Pnr, 1, mu).unwrap();
        assert!((v.re - 0.7 * (-0.7f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn symbols_sum_to_one() {
        for d in all_detectors() {
            // Pulse-counting rules grow as order^(q−1), so the SNSPD sums use a
            // lighter rule and fewer outcomes.
            let (q_max, quad, tol) = match d {
                DetectorModel::Snspd(_) => (
                    6,
                    QuadSpec {
                        order: 10,
                        compress: 24,
                    },
                    1e-5,
                ),
                _ => (12, QuadSpec::default(), 1e-6),
            };
            for mu in [0.5, 2.0] {
                if q_max < 12 && mu > 1.0 {
                    continue;
                }
                let total: C64 = (0..=q_max)
                    .map(|q| normal_symbol(&d, q, C64::new(mu, 0.0), quad).unwrap())
                    .sum();
                assert!((total - ONE).norm() < tol, "{d:?} mu={mu}: {total}");
            }
        }
    }

    #[test]
    fn symbol_matches_fock_response() {
        for d in all_detectors() {
            for q in 0..=2usize {
                for mu in [0.1f64, 0.8, 2.5] {
                    let series: f64 = (q..60)
                        .map(|m| {
                            response_entry(&d, q, m).unwrap() * mu.powi(m as i32) * (-mu).exp()
                                / factorial(m)
                        })
                        .sum();
                    let direct =
                        normal_symbol(&d, q, C64::new(mu, 0.0), QuadSpec::default()).unwrap();
                    assert!((direct.re - series).abs() < 1e-8, "{d:?} q={q} mu={mu}");
                }
            }
        }
    }

    #[test]
    fn table_matches_direct_evaluation() {
        for d in all_detectors() {
            let table = SymbolTable::new(&d, QuadSpec::default()).unwrap();
            for mu in [C64::new(0.3, 0.2), C64::new(-0.4, 1.1), C64::new(3.0, -2.0)] {
                let row = table.outcomes(mu);
                for q in 0..=2 {
                    let direct = symbol(&d, q, mu).unwrap();
                    assert!(
                        (row[q] - direct).norm() < 1e-12 * (1.0 + direct.norm()),
                        "{d:?} q={q}"
                    );
                }
            }
        }
    }

    #[test]
    fn terms_reproduce_symbols() {
        for d in all_detectors() {
            for c in 0..=3usize {
                let terms = symbol_terms(&d, c, QuadSpec::default()).unwrap();
                for mu in [C64::new(0.4, 0.0), C64::new(1.2, 0.5)] {
                    let from_terms: C64 = terms
                        .iter()
                        .map(|t| {
                            t.poly
                                .iter()
                                .enumerate()
                                .map(|(l, p)| *p * mu.powu(l as u32))
                                .sum::<C64>()
                                * (-(mu * t.s)).exp()
                        })
                        .sum();
                    let direct = normal_symbol(&d, c, mu, QuadSpec::default()).unwrap();
                    assert!((from_terms - direct).norm() < 1e-10, "{d:?} c={c}");
                }
            }
        }
    }
}
