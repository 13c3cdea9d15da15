use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Normalized intensity envelope I(t) on the window [0, 1] (times in units of τ_m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Envelope {
    #[default]
    Rectangular,
    /// Gaussian pulse centred at `center` with standard deviation `width`,
    /// truncated to the window and renormalized.
    TruncatedGaussian { center: f64, width: f64 },
}

/// Timing parameters of a pulse-counting detector, in units of τ_m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub dead_time: f64,
    pub relax_time: f64,
    #[serde(default)]
    pub envelope: Envelope,
}

/// The supported detection techniques.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorModel {
    /// Ideal photon-number resolution.
    Pnr,
    /// Single on-off detector.
    OnOff,
    /// K on-off detectors behind a balanced K-way split.
    Click { k: usize },
    /// Pulse counting with a hard dead time (τ_d/τ_m) and a rectangular envelope.
    Apd { dead_time: f64 },
    /// Pulse counting with dead time, exponential recovery and an envelope.
    Snspd(Timing),
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DetectorModel::Pnr | DetectorModel::OnOff => Ok(()),
            DetectorModel::Click { k } => {
                if *k == 0 {
                    Err(invalid("k", "click detectors need at least one bin"))
                } else {
                    Ok(())
                }
            }
            DetectorModel::Apd { dead_time } => check_dead_time(*dead_time),
            DetectorModel::Snspd(t) => {
                check_dead_time(t.dead_time)?;
                if !(t.relax_time >= 0.0 && t.relax_time.is_finite()) {
                    return Err(invalid("relax_time", "must be finite and non-negative"));
                }
                if let Envelope::TruncatedGaussian { center, width } = t.envelope {
                    if !(width > 0.0 && width.is_finite() && center.is_finite()) {
                        return Err(invalid("envelope", "Gaussian width must be positive"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Largest outcome with nonzero probability, `None` when unbounded.
    pub fn max_outcome(&self) -> Option<usize> {
        match self {
            DetectorModel::Pnr => None,
            DetectorModel::OnOff => Some(1),
            DetectorModel::Click { k } => Some(*k),
            DetectorModel::Apd { dead_time } => {
                if *dead_time == 0.0 {
                    None
                } else {
                    Some(apd_capacity(*dead_time) + 1)
                }
            }
            DetectorModel::Snspd(t) => {
                if t.dead_time == 0.0 {
                    None
                } else {
                    // n pulses need (n − 1) dead times inside the window.
                    let mut n = 1;
                    while 1.0 - n as f64 * t.dead_time > 0.0 {
                        n += 1;
                    }
                    Some(n)
                }
            }
        }
    }

    /// Short label used in artifacts.
    pub fn label(&self) -> String {
        match self {
            DetectorModel::Pnr => "pnr".into(),
            DetectorModel::OnOff => "on-off".into(),
            DetectorModel::Click { k } => format!("click-k{k}"),
            DetectorModel::Apd { dead_time } => format!("apd-d{dead_time}"),
            DetectorModel::Snspd(t) => format!("snspd-d{}-r{}", t.dead_time, t.relax_time),
        }
    }
}

fn check_dead_time(d: f64) -> Result<()> {
    if !(0.0..1.0).contains(&d) {
        return Err(invalid(
            "dead_time",
            format!("τ_d/τ_m must lie in [0, 1), got {d}"),
        ));
    }
    Ok(())
}

/// K = ⌊τ_m/τ_d⌋, the number of regular APD outcomes.
pub fn apd_capacity(dead_time: f64) -> usize {
    if dead_time == 0.0 {
        usize::MAX
    } else {
        (1.0 / dead_time + 1e-12).floor() as usize
    }
}

/// η_k = (τ_m − kτ_d)/τ_m clamped at zero, with η₀ = 1.
pub fn adjustment_efficiency(dead_time: f64, k: usize) -> f64 {
    (1.0 - k as f64 * dead_time).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjustment_efficiencies() {
        assert_eq!(adjustment_efficiency(0.05, 0), 1.0);
        assert!((adjustment_efficiency(0.05, 1) - 0.95).abs() < 1e-15);
        assert_eq!(adjustment_efficiency(0.3, 4), 0.0);
        assert_eq!(apd_capacity(0.05), 20);
        assert_eq!(apd_capacity(0.3), 3);
    }

    #[test]
    fn serde_round_trip() {
        let models = vec![
            DetectorModel::Pnr,
            DetectorModel::Click { k: 3 },
            DetectorModel::Apd { dead_time: 0.05 },
            DetectorModel::Snspd(Timing {
                dead_time: 0.05,
                relax_time: 0.2,
                envelope: Envelope::TruncatedGaussian {
                    center: 0.5,
                    width: 0.2,
                },
            }),
        ];
        for m in models {
            let text = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<DetectorModel>(&text).unwrap(), m);
        }
    }

    #[test]
    fn validation() {
        assert!(DetectorModel::Click { k: 0 }.validate().is_err());
        assert!(DetectorModel::Apd { dead_time: 1.0 }.validate().is_err());
        assert_eq!(DetectorModel::OnOff.max_outcome(), Some(1));
        assert_eq!(DetectorModel::Apd { dead_time: 0.3 }.max_outcome(), Some(4));
    }
}
