//! Click-pattern probabilities through the matrix functionals, plus an
//! independent Fock-space oracle built from a derivative recursion.

use crate::detectors::{
    adjustment_efficiency, response_entry, symbol_terms, DetectorModel, QuadSpec,
};
use crate::error::{invalid, GbsError, Result};
use crate::functionals::{
    apd_functional, expand_functional, factorial, hafnian, kensingtonian, reduce,
    snspd::snspd_functional_capped, torontonian, MAX_HAFNIAN_HALF_DIM,
};
use crate::gaussian::{kernel, GaussianState, KernelMatrix};
use crate::linalg::{CMat, C64, ZERO};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Outcome vector n = (n₁, …, n_M).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClickPattern(pub Vec<usize>);

impl ClickPattern {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0; m])
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<usize>> for ClickPattern {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Tuning of the functional evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub quad: QuadSpec,
    pub snspd_max_clicks: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            quad: QuadSpec::default(),
            snspd_max_clicks: crate::functionals::snspd::DEFAULT_MAX_SNSPD_CLICKS,
        }
    }
}

/// Evaluates P(n) = F[A]/√det σ_Q for many patterns of one state.
#[derive(Clone, Debug)]
pub struct PatternEvaluator {
    kernel: KernelMatrix,
    det: DetectorModel,
    options: EvalOptions,
}

impl PatternEvaluator {
    pub fn new(state: &GaussianState, det: &DetectorModel) -> Result<Self> {
        Self::with_options(state, det, EvalOptions::default())
    }

    pub fn with_options(
        state: &GaussianState,
        det: &DetectorModel,
        options: EvalOptions,
    ) -> Result<Self> {
        det.validate()?;
        Ok(Self {
            kernel: kernel(state)?,
            det: det.clone(),
            options,
        })
    }

    pub fn kernel(&self) -> &KernelMatrix {
        &self.kernel
    }

    pub fn detector(&self) -> &DetectorModel {
        &self.det
    }

    pub fn probability(&self, pattern: &[usize]) -> Result<f64> {
        let raw = self.functional(pattern)? / self.kernel.norm_q;
        if raw < -1e-10 {
            log::warn!("pattern {pattern:?} has negative probability {raw:e}; clamped to 0");
        }
        Ok(raw.max(0.0))
    }

    /// The matrix functional F[A] for this pattern, before normalization.
    pub fn functional(&self, pattern: &[usize]) -> Result<f64> {
        if let Some(max) = self.det.max_outcome() {
            if pattern.iter().any(|&n| n > max) {
                return Ok(0.0);
            }
        }
        let rk = reduce(&self.kernel, pattern)?;
        if rk.is_empty() {
            return Ok(1.0);
        }
        match &self.det {
            DetectorModel::Pnr => {
                let n = rk.total_clicks();
                if n > MAX_HAFNIAN_HALF_DIM {
                    return Err(GbsError::Infeasible(format!(
                        "{n} photons exceed the Hafnian limit of {MAX_HAFNIAN_HALF_DIM}"
                    )));
                }
                let b = rk.repeated().swap_blocks_rows().symmetrized();
                let denom: f64 = rk.clicks.iter().map(|&c| factorial(c)).product();
                // The residue is judged on the probability scale, after the n! division.
                crate::functionals::real_part(hafnian(&b)? / denom, "hafnian")
            }
            DetectorModel::OnOff => torontonian(&rk.a_s),
            DetectorModel::Click { k } => kensingtonian(&rk, *k),
            DetectorModel::Apd { dead_time } => {
                if rk.is_collision_free() {
                    apd_functional(&rk, adjustment_efficiency(*dead_time, 1))
                } else {
                    self.expanded(&rk.a_s, &rk.clicks)
                }
            }
            DetectorModel::Snspd(t) => Ok(snspd_functional_capped(
                &rk,
                t,
                self.options.quad,
                self.options.snspd_max_clicks,
            )?
            .value),
        }
    }

    /// F[A] through the per-mode symbol expansion, valid for every detector.
    pub fn functional_by_expansion(&self, pattern: &[usize]) -> Result<f64> {
        let rk = reduce(&self.kernel, pattern)?;
        self.expanded(&rk.a_s, &rk.clicks)
    }

    fn expanded(&self, a_s: &CMat, clicks: &[usize]) -> Result<f64> {
        let terms = clicks
            .iter()
            .map(|&c| symbol_terms(&self.det, c, self.options.quad))
            .collect::<Result<Vec<_>>>()?;
        crate::functionals::real_part(expand_functional(a_s, &terms)?, "symbol expansion")
    }

    /// Probabilities of many patterns, evaluated in parallel in input order.
    pub fn probabilities(&self, patterns: &[ClickPattern]) -> Result<Vec<f64>> {
        patterns
            .par_iter()
            .map(|p| self.probability(&p.0))
            .collect()
    }
}

/// P(n) for a single pattern.
pub fn pattern_probability(
    state: &GaussianState,
    det: &DetectorModel,
    pattern: &ClickPattern,
) -> Result<f64> {
    if pattern.modes() != state.modes() {
        return Err(GbsError::Dimension(format!(
            "pattern has {} entries for {} modes",
            pattern.modes(),
            state.modes()
        )));
    }
    PatternEvaluator::new(state, det)?.probability(&pattern.0)
}

/// Photon-number distribution of an ideal detector up to a per-mode cutoff.
#[derive(Clone, Debug)]
pub struct IdealDistribution {
    pub probabilities: BTreeMap<ClickPattern, f64>,
    /// 1 − Σ of the listed probabilities.
    pub tail: f64,
    pub warning: Option<String>,
}

/// All P(m) with m_i ≤ `cutoff`, through Hafnians.
pub fn ideal_distribution(state: &GaussianState, cutoff: usize) -> Result<IdealDistribution> {
    let m = state.modes();
    if m > 4 || cutoff > 6 {
        return Err(invalid(
            "cutoff",
            "the ideal distribution is limited to M ≤ 4 and cutoff ≤ 6",
        ));
    }
    let eval = PatternEvaluator::new(state, &DetectorModel::Pnr)?;
    let patterns = lattice(m, cutoff);
    let values = eval.probabilities(&patterns)?;
    let probabilities: BTreeMap<ClickPattern, f64> = patterns.into_iter().zip(values).collect();
    let tail = 1.0 - probabilities.values().sum::<f64>();
    let warning = (tail > 1e-8).then(|| format!("cutoff {cutoff} leaves tail mass {tail:e}"));
    Ok(IdealDistribution {
        probabilities,
        tail,
        warning,
    })
}

/// Every pattern with entries 0..=cutoff, last mode fastest.
pub fn lattice(m: usize, cutoff: usize) -> Vec<ClickPattern> {
    let base = cutoff + 1;
    let count = base.pow(m as u32);
    (0..count)
        .map(|mut i| {
            let mut v = vec![0; m];
            for slot in v.iter_mut().rev() {
                *slot = i % base;
                i /= base;
            }
            ClickPattern(v)
        })
        .collect()
}

/// Fock-space photon statistics from the normalized derivative recursion
/// ψ_{k+e_i} = (k_i+1)^{−1/2} Σ_j B_ij √k_j ψ_{k−e_j}, B = XA, over
/// multi-indices (p, q) with |p|, |q| ≤ T; P(n) = Re ψ_{(n,n)} / √det σ_Q.
#[derive(Clone, Debug)]
pub struct FockOracle {
    modes: usize,
    photons: usize,
    half: Vec<Vec<u8>>,
    rank: HashMap<Vec<u8>, usize>,
    psi: Vec<C64>,
    norm_q: f64,
}

impl FockOracle {
    pub fn new(kernel: &KernelMatrix, photons: usize) -> Result<Self> {
        let m = kernel.modes();
        if m == 0 {
            return Err(invalid("state", "needs at least one mode"));
        }
        let mut half: Vec<Vec<u8>> = Vec::new();
        for d in 0..=photons {
            compositions(m, d, &mut half);
        }
        let size = half.len();
        if size.saturating_mul(size) > 40_000_000 {
            return Err(GbsError::Infeasible(format!(
                "Fock lattice with {m} modes and {photons} photons is too large"
            )));
        }
        let rank: HashMap<Vec<u8>, usize> = half
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let degree: Vec<usize> = half
            .iter()
            .map(|v| v.iter().map(|&x| x as usize).sum())
            .collect();
        let step = |r: usize, i: usize, up: bool| -> Option<usize> {
            let mut v = half[r].clone();
            if up {
                v[i] += 1;
            } else {
                if v[i] == 0 {
                    return None;
                }
                v[i] -= 1;
            }
            rank.get(&v).copied()
        };
        let down: Vec<Vec<Option<usize>>> = (0..size)
            .map(|r| (0..m).map(|i| step(r, i, false)).collect())
            .collect();
        let b = kernel.a.swap_blocks_rows();
        let mut psi = vec![ZERO; size * size];
        psi[0] = C64::new(1.0, 0.0);
        // Visit (p, q) by total degree so every ψ_{k−e_i−e_j} already exists.
        let mut by_degree: Vec<Vec<usize>> = vec![Vec::new(); photons + 1];
        for (r, &d) in degree.iter().enumerate() {
            by_degree[d].push(r);
        }
        for total in 1..=2 * photons {
            for dp in total.saturating_sub(photons)..=total.min(photons) {
                let dq = total - dp;
                for &rp in &by_degree[dp] {
                    for &rq in &by_degree[dq] {
                        let (p, q) = (&half[rp], &half[rq]);
                        // Lower along the first nonzero coordinate of (p, q).
                        let (i, prev_p, prev_q) = match p.iter().position(|&x| x > 0) {
                            Some(i) => (i, down[rp][i].unwrap(), rq),
                            None => {
                                let j = q.iter().position(|&x| x > 0).unwrap();
                                (m + j, rp, down[rq][j].unwrap())
                            }
                        };
                        let kp = &half[prev_p];
                        let kq = &half[prev_q];
                        let ki = if i < m { kp[i] } else { kq[i - m] } as f64;
                        let mut acc = ZERO;
                        for j in 0..2 * m {
                            let kj = if j < m { kp[j] } else { kq[j - m] };
                            if kj == 0 {
                                continue;
                            }
                            let (sp, sq) = if j < m {
                                (down[prev_p][j].unwrap(), prev_q)
                            } else {
                                (prev_p, down[prev_q][j - m].unwrap())
                            };
                            acc += b[(i, j)] * (kj as f64).sqrt() * psi[sp * size + sq];
                        }
                        psi[rp * size + rq] = acc / (ki + 1.0).sqrt();
                    }
                }
            }
        }
        Ok(Self {
            modes: m,
            photons,
            half,
            rank,
            psi,
            norm_q: kernel.norm_q,
        })
    }

    /// Oracle with the smallest photon cutoff (stepping by 2) whose tail is below `tol`.
    pub fn adaptive(kernel: &KernelMatrix, tol: f64) -> Result<Self> {
        let mut t = 4;
        loop {
            match Self::new(kernel, t) {
                Ok(o) => {
                    if o.tail() < tol {
                        return Ok(o);
                    }
                    t += 2;
                }
                Err(GbsError::Infeasible(msg)) => {
                    if t <= 4 {
                        return Err(GbsError::Infeasible(msg));
                    }
                    log::warn!("Fock oracle capped at {} photons: {msg}", t - 2);
                    return Self::new(kernel, t - 2);
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn photons(&self) -> usize {
        self.photons
    }

    /// P(m) for a photon-number pattern; zero outside the lattice.
    pub fn probability(&self, m: &[usize]) -> f64 {
        if m.len() != self.modes || m.iter().sum::<usize>() > self.photons {
            return 0.0;
        }
        let key: Vec<u8> = m.iter().map(|&x| x as u8).collect();
        match self.rank.get(&key) {
            Some(&r) => self.psi[r * self.half.len() + r].re / self.norm_q,
            None => 0.0,
        }
    }

    /// Probability mass beyond the photon cutoff.
    pub fn tail(&self) -> f64 {
        let size = self.half.len();
        let total: f64 = (0..size).map(|r| self.psi[r * size + r].re).sum::<f64>() / self.norm_q;
        (1.0 - total).max(0.0)
    }

    /// Every photon-number pattern inside the lattice.
    pub fn patterns(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.half
            .iter()
            .map(|v| v.iter().map(|&x| x as usize).collect())
    }
}

fn compositions(m: usize, d: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(prefix: &mut Vec<u8>, m: usize, left: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == m - 1 {
            prefix.push(left as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for x in (0..=left).rev() {
            prefix.push(x as u8);
            rec(prefix, m, left - x, out);
            prefix.pop();
        }
    }
    rec(&mut Vec::with_capacity(m), m, d, out);
}

/// Oracle value with the Fock-lattice truncation it was computed on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub tail: f64,
    pub photons: usize,
}

/// Σ_m Π_i P_{n_i|m_i} P(m) over the truncated Fock lattice.
pub fn brute_force_probability(
    state: &GaussianState,
    det: &DetectorModel,
    pattern: &ClickPattern,
    cutoff: Option<usize>,
) -> Result<OracleValue> {
    let k = kernel(state)?;
    let oracle = match cutoff {
        Some(t) => FockOracle::new(&k, t)?,
        None => FockOracle::adaptive(&k, 1e-10)?,
    };
    brute_force_with_oracle(&oracle, det, pattern)
}

pub fn brute_force_with_oracle(
    oracle: &FockOracle,
    det: &DetectorModel,
    pattern: &ClickPattern,
) -> Result<OracleValue> {
    det.validate()?;
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut total = 0.0;
    for m in oracle.patterns() {
        if m.iter().zip(&pattern.0).any(|(mi, ni)| mi < ni) {
            continue;
        }
        let mut weight = 1.0;
        for (&ni, &mi) in pattern.0.iter().zip(&m) {
            let e = match cache.get(&(ni, mi)) {
                Some(v) => *v,
                None => {
                    let v = response_entry(det, ni, mi)?;
                    cache.insert((ni, mi), v);
                    v
                }
            };
            weight *= e;
            if weight == 0.0 {
                break;
            }
        }
        if weight != 0.0 {
            total += weight * oracle.probability(&m);
        }
    }
    Ok(OracleValue {
        value: total,
        tail: oracle.tail(),
        photons: oracle.photons(),
    })
}
