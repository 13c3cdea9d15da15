//! Quadrature over the ordered pulse-time simplex.
//!
//! Only the gaps larger than τ_d contribute (ξ vanishes below), so the n pulse
//! times are written as t₁ = s and t_{i+1} = t_i + τ_d + u_i. The variables
//! (s, u₁…u_{n−1}) fill the simplex Σ ≤ T′ = 1 − (n−1)τ_d, which is split
//! into a radius σ = s + Σu and a direction on the unit simplex. Ξ_n has a
//! kink where the last gap reaches τ_d, that is at σ = T′ − τ_d, so the
//! radial rule is split there. Directions use collapsed (Duffy) coordinates.

use super::model::Timing;

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// A discrete measure Σ_k w_k δ(Ξ − Ξ_k).
#[derive(Clone, Debug, Default)]
pub struct NodeRule {
    pub weights: Vec<f64>,
    pub xi: Vec<f64>,
}

impl NodeRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.xi)
            .map(|(w, &x)| w * f(x))
            .sum()
    }

    pub fn range(&self) -> (f64, f64) {
        let lo = self.xi.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Re-expresses the measure on `points` Chebyshev nodes spanning the Ξ
    /// range; exact for polynomials of degree below `points`.
    pub fn compress(&self, points: usize) -> NodeRule {
        if self.is_empty() {
            return NodeRule::default();
        }
        let (lo, hi) = self.range();
        if hi - lo < 1e-14 || points <= 1 {
            return NodeRule {
                weights: vec![self.weights.iter().sum()],
                xi: vec![0.5 * (lo + hi)],
            };
        }
        let nodes: Vec<f64> = (0..points)
            .map(|j| {
                let c = (std::f64::consts::PI * (2 * j + 1) as f64 / (2 * points) as f64).cos();
                0.5 * (lo + hi) + 0.5 * (hi - lo) * c
            })
            .collect();
        // Barycentric weights of the Chebyshev points of the first kind.
        let bary: Vec<f64> = (0..points)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * (std::f64::consts::PI * (2 * j + 1) as f64 / (2 * points) as f64).sin()
            })
            .collect();
        let mut out = vec![0.0; points];
        for (&w, &x) in self.weights.iter().zip(&self.xi) {
            if let Some(j) = nodes.iter().position(|&n| (n - x).abs() < 1e-15) {
                out[j] += w;
                continue;
            }
            let terms: Vec<f64> = (0..points).map(|j| bary[j] / (x - nodes[j])).collect();
            let denom: f64 = terms.iter().sum();
            for j in 0..points {
                out[j] += w * terms[j] / denom;
            }
        }
        NodeRule {
            weights: out,
            xi: nodes,
        }
    }
}

/// Nodes (weight · 𝓘_n, Ξ_n) for n pulses with `order` points per dimension.
pub fn simplex_rule(timing: &Timing, n: usize, order: usize) -> NodeRule {
    if n == 0 {
        return NodeRule {
            weights: vec![1.0],
            xi: vec![1.0],
        };
    }
    let span = 1.0 - (n as f64 - 1.0) * timing.dead_time;
    if span <= 0.0 {
        return NodeRule::default();
    }
    let (gx, gw) = gauss_legendre(order);
    let kink = span - timing.dead_time;
    let mut radial: Vec<(f64, f64)> = Vec::new();
    let mut push_interval = |a: f64, b: f64| {
        if b <= a {
            return;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &w) in gx.iter().zip(&gw) {
            radial.push((mid + half * x, w * half));
        }
    };
    if kink > 0.0 {
        push_interval(0.0, kink);
        push_interval(kink, span);
    } else {
        push_interval(0.0, span);
    }
    let directions = simplex_directions(n, &gx, &gw);
    let mut rule = NodeRule {
        weights: Vec::with_capacity(radial.len() * directions.len()),
        xi: Vec::with_capacity(radial.len() * directions.len()),
    };
    let mut times = vec![0.0; n];
    for &(sigma, wr) in &radial {
        let jac = sigma.powi(n as i32 - 1);
        for (y, wd) in &directions {
            times[0] = sigma * y[0];
            for i in 1..n {
                times[i] = times[i - 1] + timing.dead_time + sigma * y[i];
            }
            let w = wr * wd * jac * timing.pulse_density_unchecked(&times);
            if w == 0.0 {
                continue;
            }
            rule.weights.push(w);
            rule.xi.push(timing.effective_window_unchecked(&times));
        }
    }
    rule
}

/// Points y on the unit simplex {y ≥ 0, Σy = 1} in n coordinates with
/// weights integrating to 1/(n−1)!.
///
/// y_k = v_k Π_{j<k}(1 − v_j) for k < n and y_n takes the remainder; the
/// Jacobian of this map is Π_k Π_{j<k}(1 − v_j).
fn simplex_directions(n: usize, gx: &[f64], gw: &[f64]) -> Vec<(Vec<f64>, f64)> {
    if n == 1 {
        return vec![(vec![1.0], 1.0)];
    }
    let dim = n - 1;
    let q = gx.len();
    let total = q.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; dim];
    for flat in 0..total {
        crate::functionals::subsets::mixed_radix(flat, &vec![q; dim], &mut digits);
        let mut y = vec![0.0; n];
        let mut remaining = 1.0;
        let mut weight = 1.0;
        for k in 0..dim {
            let v = 0.5 * (gx[digits[k]] + 1.0);
            weight *= 0.5 * gw[digits[k]] * remaining;
            y[k] = remaining * v;
            remaining *= 1.0 - v;
        }
        y[dim] = remaining;
        out.push((y, weight));
    }
    out
}
