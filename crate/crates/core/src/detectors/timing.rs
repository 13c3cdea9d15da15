//! Recovery efficiency ξ(t), the effective window Ξ_n(t) and the pulse
//! density 𝓘_n(t) of pulse-counting detectors. Times are in units of τ_m.

use super::model::{Envelope, Timing};
use super::quadrature::gauss_legendre;
use crate::error::{invalid, Result};
use statrs::function::erf::erf;
use std::sync::OnceLock;

const SEGMENT_ORDER: usize = 32;

fn segment_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(SEGMENT_ORDER))
}

impl Envelope {
    /// I(t) on [0, 1].
    pub fn intensity(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match *self {
            Envelope::Rectangular => 1.0,
            Envelope::TruncatedGaussian { center, width } => {
                let z = (t - center) / width;
                (-0.5 * z * z).exp() / (width * (2.0 * std::f64::consts::PI).sqrt() * self.mass())
            }
        }
    }

    /// ∫₀ᵗ I.
    pub fn cumulative(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match *self {
            Envelope::Rectangular => t,
            Envelope::TruncatedGaussian { .. } => {
                (normal_cdf(self, t) - normal_cdf(self, 0.0)) / self.mass()
            }
        }
    }

    fn mass(&self) -> f64 {
        match *self {
            Envelope::Rectangular => 1.0,
            Envelope::TruncatedGaussian { .. } => normal_cdf(self, 1.0) - normal_cdf(self, 0.0),
        }
    }
}

fn normal_cdf(env: &Envelope, t: f64) -> f64 {
    match *env {
        Envelope::Rectangular => t,
        Envelope::TruncatedGaussian { center, width } => {
            0.5 * (1.0 + erf((t - center) / (width * std::f64::consts::SQRT_2)))
        }
    }
}

impl Timing {
    /// ξ(t) = θ(t − τ_d)(1 − e^{−(t−τ_d)/τ_r}); a step when τ_r = 0.
    pub fn recovery(&self, t: f64) -> f64 {
        let u = t - self.dead_time;
        if u < 0.0 {
            0.0
        } else if self.relax_time == 0.0 {
            1.0
        } else {
            -(-u / self.relax_time).exp_m1()
        }
    }

    /// ∫_{t0}^{end} I(t) ξ(t − t0) dt.
    pub fn recovered_mass(&self, t0: f64, end: f64) -> f64 {
        let start = t0 + self.dead_time;
        if end <= start {
            return 0.0;
        }
        match self.envelope {
            Envelope::Rectangular => {
                let g = end - start;
                if self.relax_time == 0.0 {
                    g
                } else {
                    g + self.relax_time * (-g / self.relax_time).exp_m1()
                }
            }
            Envelope::TruncatedGaussian { .. } => {
                let (x, w) = segment_rule();
                let half = 0.5 * (end - start);
                let mid = 0.5 * (end + start);
                x.iter()
                    .zip(w)
                    .map(|(&xi, &wi)| {
                        let t = mid + half * xi;
                        wi * self.envelope.intensity(t) * self.recovery(t - t0)
                    })
                    .sum::<f64>()
                    * half
            }
        }
    }

    /// Ξ_n(t) for ordered pulse times; Ξ₀ = 1.
    pub fn effective_window(&self, times: &[f64]) -> Result<f64> {
        check_ordered(times)?;
        Ok(self.effective_window_unchecked(times))
    }

    pub(crate) fn effective_window_unchecked(&self, times: &[f64]) -> f64 {
        if times.is_empty() {
            return 1.0;
        }
        let mut total = self.envelope.cumulative(times[0]);
        for pair in times.windows(2) {
            total += self.recovered_mass(pair[0], pair[1]);
        }
        total + self.recovered_mass(*times.last().unwrap(), 1.0)
    }

    /// 𝓘_n(t) = I(t₁) Π_{i≥2} I(t_i) ξ(t_i − t_{i−1}).
    pub fn pulse_density(&self, times: &[f64]) -> Result<f64> {
        check_ordered(times)?;
        Ok(self.pulse_density_unchecked(times))
    }

    pub(crate) fn pulse_density_unchecked(&self, times: &[f64]) -> f64 {
        let mut v: f64 = times.iter().map(|&t| self.envelope.intensity(t)).product();
        for pair in times.windows(2) {
            v *= self.recovery(pair[1] - pair[0]);
        }
        v
    }
}

fn check_ordered(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(invalid(
            "times",
            "pulse times must lie in the window [0, 1]",
        ));
    }
    if times.windows(2).any(|p| p[1] < p[0]) {
        return Err(invalid("times", "pulse times must be ordered"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(d: f64, r: f64) -> Timing {
        Timing {
            dead_time: d,
            relax_time: r,
            envelope: Envelope::Rectangular,
        }
    }

    #[test]
    fn no_pulses_sees_whole_window() {
        assert_eq!(rect(0.1, 0.2).effective_window(&[]).unwrap(), 1.0);
        let g = Timing {
            dead_time: 0.1,
            relax_time: 0.2,
            envelope: Envelope::TruncatedGaussian {
                center: 0.4,
                width: 0.15,
            },
        };
        assert!((g.effective_window(&[]).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn blind_during_dead_time() {
        let t = rect(0.1, 0.2);
        assert_eq!(t.recovery(0.05), 0.0);
        assert_eq!(t.recovery(0.0999), 0.0);
        assert!(t.recovery(0.3) > 0.0);
    }

    #[test]
    fn single_pulse_step_recovery() {
        let d = 0.2;
        let t = rect(d, 0.0);
        for t1 in [0.1, 0.5, 0.85, 0.95] {
            let expect = 1.0 - f64::min(d, 1.0 - t1);
            assert!((t.effective_window(&[t1]).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_segments_match_rectangular_limit() {
        // A very wide Gaussian is nearly flat; compare the numeric segment
        // integral against the closed form.
        let wide = Timing {
            dead_time: 0.1,
            relax_time: 0.15,
            envelope: Envelope::TruncatedGaussian {
                center: 0.5,
                width: 1e4,
            },
        };
        let flat = rect(0.1, 0.15);
        let a = wide.effective_window(&[0.2, 0.5]).unwrap();
        let b = flat.effective_window(&[0.2, 0.5]).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn unordered_times_rejected() {
        assert!(rect(0.1, 0.0).effective_window(&[0.5, 0.2]).is_err());
        assert!(rect(0.1, 0.0).pulse_density(&[0.5, 1.2]).is_err());
    }
}
