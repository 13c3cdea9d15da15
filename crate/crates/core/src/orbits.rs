//! Orbit probabilities: combinatorics, the direct pattern-sampling estimator,
//! and the phase-space estimator built on the discrete characteristic function.

use crate::detectors::{DetectorModel, QuadSpec, SymbolTable};
use crate::error::{invalid, GbsError, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{C64, ONE, ZERO};
use crate::probability::{ClickPattern, PatternEvaluator};
use crate::sampling::{mean_and_se, sample_rng, ClassicalSampleSet, SampleSource};
use itertools::Itertools;
use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

/// Orbit with `m1` single-click outputs and `m2` double-click outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrbitId {
    pub m1: usize,
    pub m2: usize,
}

impl OrbitId {
    pub fn new(m1: usize, m2: usize) -> Self {
        Self { m1, m2 }
    }

    /// Orbit with `n` total clicks of which `l` outputs show two clicks.
    pub fn from_nl(n: usize, l: usize) -> Result<Self> {
        if 2 * l > n {
            return Err(invalid(
                "l",
                format!("{l} double clicks exceed {n} total clicks"),
            ));
        }
        Ok(Self {
            m1: n - 2 * l,
            m2: l,
        })
    }

    pub fn n(&self) -> usize {
        self.m1 + 2 * self.m2
    }

    pub fn l(&self) -> usize {
        self.m2
    }

    /// Orbit of a pattern, or `None` if any output has more than two clicks.
    pub fn of(pattern: &[usize]) -> Option<Self> {
        let mut id = Self::new(0, 0);
        for &c in pattern {
            match c {
                0 => {}
                1 => id.m1 += 1,
                2 => id.m2 += 1,
                _ => return None,
            }
        }
        Some(id)
    }

    fn check(&self, modes: usize) -> Result<()> {
        if self.m1 + self.m2 > modes {
            return Err(invalid(
                "orbit",
                format!(
                    "{} occupied outputs exceed {modes} modes",
                    self.m1 + self.m2
                ),
            ));
        }
        Ok(())
    }
}

/// |O| = M! / (m1! m2! (M − m1 − m2)!).
pub fn orbit_cardinality(modes: usize, m1: usize, m2: usize) -> Result<BigUint> {
    OrbitId::new(m1, m2).check(modes)?;
    let choose = |n: usize, k: usize| -> BigUint {
        let mut acc = BigUint::from(1u32);
        for i in 0..k {
            acc *= n - i;
            acc /= i + 1;
        }
        acc
    };
    Ok(choose(modes, m1 + m2) * choose(m1 + m2, m2))
}

/// ln |O| through log-gamma.
pub fn ln_orbit_cardinality(modes: usize, m1: usize, m2: usize) -> f64 {
    let rest = modes - m1 - m2;
    ln_gamma(modes as f64 + 1.0)
        - ln_gamma(m1 as f64 + 1.0)
        - ln_gamma(m2 as f64 + 1.0)
        - ln_gamma(rest as f64 + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Direct,
    PhaseSpace,
    PhaseSpaceFolded,
    Classical,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Direct => "direct",
            Method::PhaseSpace => "phase_space",
            Method::PhaseSpaceFolded => "phase_space_folded",
            Method::Classical => "classical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitEntry {
    pub probability: f64,
    pub stderr: f64,
    pub method: Method,
}

/// Orbit probabilities with standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitTable {
    pub modes: usize,
    pub entries: BTreeMap<OrbitId, OrbitEntry>,
    pub seed: u64,
    /// Sample budget behind the estimates (E_S or N_S; 0 for exact tables).
    pub samples: u64,
}

impl OrbitTable {
    pub fn probability(&self, id: OrbitId) -> f64 {
        self.entries.get(&id).map_or(0.0, |e| e.probability)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().map(|e| e.probability).sum()
    }

    /// Quadrature sum of the per-orbit standard errors.
    pub fn total_stderr(&self) -> f64 {
        self.entries
            .values()
            .map(|e| e.stderr * e.stderr)
            .sum::<f64>()
            .sqrt()
    }

    /// Orbits with l double clicks, keyed by total clicks n.
    pub fn slice(&self, l: usize) -> BTreeMap<usize, OrbitEntry> {
        self.entries
            .iter()
            .filter(|(id, _)| id.l() == l)
            .map(|(id, e)| (id.n(), *e))
            .collect()
    }

    /// CSV body with columns n, l, probability, stderr, method, seed, E_S.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "n,l,probability,stderr,method,seed,E_S")?;
        let mut rows: Vec<_> = self.entries.iter().collect();
        rows.sort_by_key(|(id, _)| (id.n(), id.l()));
        for (id, e) in rows {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e},{},{},{}",
                id.n(),
                id.l(),
                e.probability,
                e.stderr,
                e.method.tag(),
                self.seed,
                self.samples
            )?;
        }
        Ok(())
    }
}

fn clamp(id: OrbitId, p: f64) -> f64 {
    if p < 0.0 {
        log::debug!(
            "orbit (n={}, l={}) estimate {p:e} clamped to 0",
            id.n(),
            id.l()
        );
        0.0
    } else {
        p
    }
}

/// Every orbit with at most `max_clicks` clicks that fits into `modes` outputs.
pub fn orbits_up_to(modes: usize, max_clicks: usize) -> Vec<OrbitId> {
    let mut out = Vec::new();
    for n in 0..=max_clicks {
        for l in 0..=n / 2 {
            let id = OrbitId::new(n - 2 * l, l);
            if id.m1 + id.m2 <= modes {
                out.push(id);
            }
        }
    }
    out
}

fn place(modes: usize, ones: &[usize], twos: &[usize]) -> Vec<usize> {
    let mut p = vec![0; modes];
    for &i in ones {
        p[i] = 1;
    }
    for &i in twos {
        p[i] = 2;
    }
    p
}

/// All patterns of an orbit.
pub fn orbit_patterns(modes: usize, id: OrbitId) -> Vec<Vec<usize>> {
    let occupied = id.m1 + id.m2;
    let mut out = Vec::new();
    for sites in (0..modes).combinations(occupied) {
        for twos in (0..occupied).combinations(id.m2) {
            let mut p = vec![0; modes];
            for &s in &sites {
                p[s] = 1;
            }
            for &t in &twos {
                p[sites[t]] = 2;
            }
            out.push(p);
        }
    }
    out
}

/// |O|·mean P(n) over `n_s` uniformly drawn patterns of the orbit, or the
/// exact sum when the orbit has at most `n_s` patterns.
pub fn estimate_orbit_direct(
    eval: &PatternEvaluator,
    id: OrbitId,
    n_s: usize,
    seed: u64,
) -> Result<OrbitEntry> {
    let modes = eval.kernel().modes();
    id.check(modes)?;
    if n_s == 0 {
        return Err(invalid("n_s", "must be at least 1"));
    }
    let size = orbit_cardinality(modes, id.m1, id.m2)?;
    if size <= BigUint::from(n_s) {
        let probs: Vec<f64> = orbit_patterns(modes, id)
            .par_iter()
            .map(|p| eval.probability(p))
            .collect::<Result<_>>()?;
        return Ok(OrbitEntry {
            probability: crate::functionals::reduce::pairwise_sum(&probs),
            stderr: 0.0,
            method: Method::Exact,
        });
    }
    let mut rng = sample_rng(seed, ((id.m1 as u64) << 32) | id.m2 as u64);
    let occupied = id.m1 + id.m2;
    let patterns: Vec<Vec<usize>> = (0..n_s)
        .map(|_| {
            // Partial Fisher–Yates: the first m1 + m2 slots are the occupied outputs.
            let mut idx: Vec<usize> = (0..modes).collect();
            for i in 0..occupied {
                let j = rng.random_range(i..modes);
                idx.swap(i, j);
            }
            place(modes, &idx[..id.m1], &idx[id.m1..occupied])
        })
        .collect();
    let probs: Vec<f64> = patterns
        .par_iter()
        .map(|p| eval.probability(p))
        .collect::<Result<_>>()?;
    let scale = (ln_orbit_cardinality(modes, id.m1, id.m2)).exp();
    let (mean, se) = mean_and_se(&probs);
    Ok(OrbitEntry {
        probability: clamp(id, scale * mean),
        stderr: if se.is_nan() { 0.0 } else { scale * se },
        method: Method::Direct,
    })
}

/// Direct estimates for a list of orbits.
pub fn direct_orbit_table(
    eval: &PatternEvaluator,
    orbits: &[OrbitId],
    n_s: usize,
    seed: u64,
) -> Result<OrbitTable> {
    let mut entries = BTreeMap::new();
    for &id in orbits {
        entries.insert(id, estimate_orbit_direct(eval, id, n_s, seed)?);
    }
    Ok(OrbitTable {
        modes: eval.kernel().modes(),
        entries,
        seed,
        samples: n_s as u64,
    })
}

/// Exact probabilities of every orbit with at most `max_clicks` clicks, by
/// exhaustive pattern enumeration.
pub fn exact_orbit_table(eval: &PatternEvaluator, max_clicks: usize) -> Result<OrbitTable> {
    let modes = eval.kernel().modes();
    let mut entries = BTreeMap::new();
    for id in orbits_up_to(modes, max_clicks) {
        let probs: Vec<f64> = orbit_patterns(modes, id)
            .par_iter()
            .map(|p| eval.probability(p))
            .collect::<Result<_>>()?;
        entries.insert(
            id,
            OrbitEntry {
                probability: crate::functionals::reduce::pairwise_sum(&probs),
                stderr: 0.0,
                method: Method::Exact,
            },
        );
    }
    Ok(OrbitTable {
        modes,
        entries,
        seed: 0,
        samples: 0,
    })
}

/// Empirical orbit frequencies of a classical sample set.
pub fn classical_orbit_table(set: &ClassicalSampleSet) -> OrbitTable {
    let mut counts: BTreeMap<OrbitId, u64> = BTreeMap::new();
    for (p, &c) in &set.counts {
        if let Some(id) = OrbitId::of(&p.0) {
            *counts.entry(id).or_insert(0) += c;
        }
    }
    let n = set.total as f64;
    let entries = counts
        .into_iter()
        .map(|(id, c)| {
            let f = c as f64 / n;
            (
                id,
                OrbitEntry {
                    probability: f,
                    stderr: (f * (1.0 - f) / n).sqrt(),
                    method: Method::Classical,
                },
            )
        })
        .collect();
    OrbitTable {
        modes: set.modes,
        entries,
        seed: set.seed,
        samples: set.total,
    }
}

/// Orbit counts of a classical sample set.
pub fn orbit_counts(set: &ClassicalSampleSet) -> BTreeMap<OrbitId, u64> {
    let mut counts = BTreeMap::new();
    for (p, &c) in &set.counts {
        if let Some(id) = OrbitId::of(&p.0) {
            *counts.entry(id).or_insert(0) += c;
        }
    }
    counts
}

/// Evaluation grid of the characteristic function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "grid", rename_all = "snake_case")]
pub enum Grid {
    /// (M+1)² points, θ = 2π/(M+1).
    Full,
    /// J·⌊M/D⌋ points, θ̃ = 2π/(J⌊M/D⌋).
    Folded { d: usize, j: usize },
}

impl Grid {
    fn validate(&self, modes: usize) -> Result<()> {
        if let Grid::Folded { d, j } = *self {
            if d == 0 || d > modes || j == 0 {
                return Err(invalid(
                    "grid",
                    format!("need 1 ≤ D ≤ M and J ≥ 1, got D={d}, J={j}"),
                ));
            }
        }
        Ok(())
    }

    /// Number of grid points.
    pub fn points(&self, modes: usize) -> usize {
        match *self {
            Grid::Full => (modes + 1) * (modes + 1),
            Grid::Folded { d, j } => j * (modes / d),
        }
    }

    /// Phase factors (e^{−i·θ₁}, e^{−i·θ₂}) applied to one and two clicks at every point.
    fn phases(&self, modes: usize) -> Vec<(C64, C64)> {
        match *self {
            Grid::Full => {
                let g = modes + 1;
                let theta = TAU / g as f64;
                (0..g)
                    .flat_map(|k1| {
                        (0..g).map(move |k2| {
                            (
                                C64::from_polar(1.0, -theta * k1 as f64),
                                C64::from_polar(1.0, -theta * k2 as f64),
                            )
                        })
                    })
                    .collect()
            }
            Grid::Folded { d, j } => {
                let l = modes / d;
                let k = j * l;
                let theta = TAU / k as f64;
                (0..k)
                    .map(|p| {
                        (
                            C64::from_polar(1.0, -theta * p as f64),
                            C64::from_polar(1.0, -theta * ((p * l) % k) as f64),
                        )
                    })
                    .collect()
            }
        }
    }
}

/// Options of the characteristic-function estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharOptions {
    pub batches: usize,
    pub quad: QuadSpec,
    /// Largest tolerated fraction of rejected (non-finite) samples.
    pub max_rejection: f64,
}

impl Default for CharOptions {
    fn default() -> Self {
        Self {
            batches: 100,
            quad: QuadSpec::default(),
            max_rejection: 1e-3,
        }
    }
}

/// Monte Carlo estimate of the characteristic function on a grid.
#[derive(Clone, Debug)]
pub struct CharTable {
    pub modes: usize,
    pub grid: Grid,
    /// Mean over all accepted samples at every grid point.
    pub values: Vec<C64>,
    /// Per-batch means, used for batch-means standard errors.
    pub batch_values: Vec<Vec<C64>>,
    pub samples: usize,
    pub rejected: usize,
}

impl CharTable {
    /// Batch-means standard error of the real and imaginary parts combined.
    pub fn stderr(&self) -> Vec<f64> {
        let b = self.batch_values.len() as f64;
        (0..self.values.len())
            .map(|i| {
                let mean = self.batch_values.iter().map(|v| v[i]).sum::<C64>() / b;
                let var = self
                    .batch_values
                    .iter()
                    .map(|v| (v[i] - mean).norm_sqr())
                    .sum::<f64>()
                    / (b - 1.0);
                (var / b).sqrt()
            })
            .collect()
    }

    /// Table with exact values, e.g. from [`forward_dft`].
    pub fn from_values(modes: usize, grid: Grid, values: Vec<C64>) -> Result<Self> {
        grid.validate(modes)?;
        if values.len() != grid.points(modes) {
            return Err(GbsError::Dimension(format!(
                "{} values for {} grid points",
                values.len(),
                grid.points(modes)
            )));
        }
        Ok(Self {
            modes,
            grid,
            batch_values: vec![values.clone()],
            values,
            samples: 0,
            rejected: 0,
        })
    }
}

/// C(k) = E[Π_i (π(0|μ_i) + π(1|μ_i)e^{−iθ₁(k)} + π(2|μ_i)e^{−iθ₂(k)})], μ_i = α_iβ_i.
pub fn characteristic_function(
    source: &dyn SampleSource,
    det: &DetectorModel,
    grid: Grid,
    options: CharOptions,
) -> Result<CharTable> {
    let modes = source.modes();
    grid.validate(modes)?;
    let total = source.len();
    if total == 0 {
        return Err(invalid("samples", "the sample source is empty"));
    }
    let table = SymbolTable::new(det, options.quad)?;
    let phases = grid.phases(modes);
    let points = phases.len();
    let batches = options.batches.clamp(1, total);
    let sums: Vec<(Vec<C64>, usize, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let start = b * total / batches;
            let end = (b + 1) * total / batches;
            let mut acc = vec![ZERO; points];
            let mut prod = vec![ZERO; points];
            let mut alpha = vec![ZERO; modes];
            let mut beta = vec![ZERO; modes];
            let mut symbols = vec![[ZERO; 3]; modes];
            let mut accepted = 0;
            let mut rejected = 0;
            for e in start..end {
                source.fill(e, &mut alpha, &mut beta);
                for i in 0..modes {
                    symbols[i] = table.outcomes(alpha[i] * beta[i]);
                }
                prod.iter_mut().for_each(|p| *p = ONE);
                for s in &symbols {
                    if s[1] == ZERO && s[2] == ZERO {
                        if s[0] != ONE {
                            prod.iter_mut().for_each(|p| *p *= s[0]);
                        }
                        continue;
                    }
                    for (p, (z1, z2)) in prod.iter_mut().zip(&phases) {
                        *p *= s[0] + s[1] * z1 + s[2] * z2;
                    }
                }
                if prod.iter().all(|p| p.re.is_finite() && p.im.is_finite()) {
                    for (a, p) in acc.iter_mut().zip(&prod) {
                        *a += p;
                    }
                    accepted += 1;
                } else {
                    rejected += 1;
                }
            }
            (acc, accepted, rejected)
        })
        .collect();
    let accepted: usize = sums.iter().map(|s| s.1).sum();
    let rejected: usize = sums.iter().map(|s| s.2).sum();
    let rate = rejected as f64 / total as f64;
    if rate > options.max_rejection {
        return Err(GbsError::Numerical(format!(
            "{rejected} of {total} samples gave non-finite products (rate {rate:.2e})"
        )));
    }
    if rejected > 0 {
        log::warn!("rejected {rejected} of {total} phase-space samples");
    }
    let mut values = vec![ZERO; points];
    for (acc, _, _) in &sums {
        for (v, a) in values.iter_mut().zip(acc) {
            *v += a;
        }
    }
    values.iter_mut().for_each(|v| *v /= accepted as f64);
    let batch_values = sums
        .into_iter()
        .filter(|s| s.1 > 0)
        .map(|(acc, n, _)| acc.into_iter().map(|a| a / n as f64).collect())
        .collect();
    Ok(CharTable {
        modes,
        grid,
        values,
        batch_values,
        samples: total,
        rejected,
    })
}

/// Orbit probabilities from a grid of characteristic-function values.
fn invert_values(modes: usize, grid: Grid, values: &[C64]) -> BTreeMap<OrbitId, C64> {
    let mut out = BTreeMap::new();
    match grid {
        Grid::Full => {
            let g = modes + 1;
            let theta = TAU / g as f64;
            let w: Vec<C64> = (0..g)
                .map(|k| C64::from_polar(1.0, theta * k as f64))
                .collect();
            // Transform along k2 first, then along k1.
            let mut half = vec![ZERO; g * g];
            for k1 in 0..g {
                for m2 in 0..g {
                    let mut s = ZERO;
                    for k2 in 0..g {
                        s += values[k1 * g + k2] * w[(k2 * m2) % g];
                    }
                    half[k1 * g + m2] = s;
                }
            }
            for m1 in 0..g {
                for m2 in 0..g - m1 {
                    let mut s = ZERO;
                    for k1 in 0..g {
                        s += half[k1 * g + m2] * w[(k1 * m1) % g];
                    }
                    out.insert(OrbitId::new(m1, m2), s / (g * g) as f64);
                }
            }
        }
        Grid::Folded { d, j } => {
            let l = modes / d;
            let k = j * l;
            let theta = TAU / k as f64;
            for m2 in 0..j {
                for m1 in 0..l {
                    if m1 + m2 > modes {
                        continue;
                    }
                    let m = m1 + m2 * l;
                    let s: C64 = (0..k)
                        .map(|p| values[p] * C64::from_polar(1.0, theta * ((p * m) % k) as f64))
                        .sum();
                    out.insert(OrbitId::new(m1, m2), s / k as f64);
                }
            }
        }
    }
    out
}

/// Inverse DFT of a characteristic-function table into an orbit table.
pub fn inverse_dft(table: &CharTable) -> OrbitTable {
    let method = match table.grid {
        Grid::Full => Method::PhaseSpace,
        Grid::Folded { .. } => Method::PhaseSpaceFolded,
    };
    let central = invert_values(table.modes, table.grid, &table.values);
    let per_batch: Vec<BTreeMap<OrbitId, C64>> = table
        .batch_values
        .iter()
        .map(|v| invert_values(table.modes, table.grid, v))
        .collect();
    let b = per_batch.len() as f64;
    let mut worst_imag = 0.0f64;
    let entries = central
        .into_iter()
        .map(|(id, v)| {
            worst_imag = worst_imag.max(v.im.abs());
            let stderr = if per_batch.len() > 1 {
                let xs: Vec<f64> = per_batch.iter().map(|m| m[&id].re).collect();
                let mean = xs.iter().sum::<f64>() / b;
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0) / b).sqrt()
            } else {
                0.0
            };
            (
                id,
                OrbitEntry {
                    probability: clamp(id, v.re),
                    stderr,
                    method,
                },
            )
        })
        .collect();
    if worst_imag > 0.0 {
        log::debug!("largest imaginary residue after inverse DFT: {worst_imag:e}");
    }
    OrbitTable {
        modes: table.modes,
        entries,
        seed: 0,
        samples: table.samples as u64,
    }
}

/// Characteristic-function values implied by an orbit table on a grid.
pub fn forward_dft(orbits: &OrbitTable, grid: Grid) -> Result<CharTable> {
    let modes = orbits.modes;
    grid.validate(modes)?;
    let values = grid
        .phases(modes)
        .into_iter()
        .map(|(z1, z2)| {
            orbits
                .entries
                .iter()
                .map(|(id, e)| z1.powu(id.m1 as u32) * z2.powu(id.m2 as u32) * e.probability)
                .sum()
        })
        .collect();
    CharTable::from_values(modes, grid, values)
}

/// Surrogate p(n) for the total photon number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surrogate {
    /// p(n) = Γ(n+r)/(Γ(r) n!) q^r (1−q)^n with q = mean/variance.
    NegativeBinomial {
        mean: f64,
        variance: f64,
        r: f64,
        q: f64,
    },
    Poisson {
        mean: f64,
    },
}

impl Surrogate {
    /// Negative binomial matched to the mean and variance, Poisson if not overdispersed.
    pub fn fit(mean: f64, variance: f64) -> Self {
        if variance > mean * (1.0 + 1e-12) && mean > 0.0 {
            let q = mean / variance;
            Surrogate::NegativeBinomial {
                mean,
                variance,
                r: mean * q / (1.0 - q),
                q,
            }
        } else {
            Surrogate::Poisson { mean }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Surrogate::NegativeBinomial { mean, .. } | Surrogate::Poisson { mean } => mean,
        }
    }

    pub fn ln_pmf(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            Surrogate::NegativeBinomial { r, q, .. } => {
                ln_gamma(nf + r) - ln_gamma(r) - ln_gamma(nf + 1.0)
                    + r * q.ln()
                    + nf * (1.0 - q).ln()
            }
            Surrogate::Poisson { mean } => {
                if mean == 0.0 {
                    if n == 0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    nf * mean.ln() - mean - ln_gamma(nf + 1.0)
                }
            }
        }
    }

    pub fn pmf(&self, n: usize) -> f64 {
        self.ln_pmf(n).exp()
    }
}

/// Folding parameters chosen for a state and sample budget.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldingChoice {
    pub grid: Grid,
    /// Two-click resolution J from the rule, also reported when the grid falls back to full.
    pub j: usize,
    pub surrogate: Surrogate,
    pub warning: Option<String>,
}

/// Smallest folded grid J ≥ 3 (so l = 0, 1, 2 stay resolved) fitting in M.
pub const MIN_FOLD_J: usize = 3;

/// Picks the largest D with p(⌊M/D⌋) < 1/E_S (and ⌊M/D⌋ above the mean) and
/// the smallest J ≥ 3 with p(max(⌊⟨n⟩⌋, 2J))/J! < 1/E_S, using a negative-binomial
/// surrogate of the photon-number distribution after loss.
pub fn select_folding_params(state: &GaussianState, e_s: usize) -> Result<FoldingChoice> {
    if e_s == 0 {
        return Err(invalid("e_s", "must be at least 1"));
    }
    let modes = state.modes();
    let surrogate = Surrogate::fit(state.mean_photons(), state.photon_variance());
    let ln_bound = -(e_s as f64).ln();
    let mean = surrogate.mean();
    let d = (1..=modes).rev().find(|&d| {
        let l = modes / d;
        l as f64 > mean && surrogate.ln_pmf(l) < ln_bound
    });
    // O_J^n needs n ≥ 2J clicks, so the photon number is raised to 2J when the mean is lower.
    let n_mean = mean.floor() as usize;
    let mut j = MIN_FOLD_J;
    while surrogate.ln_pmf(n_mean.max(2 * j)) - ln_gamma(j as f64 + 1.0) >= ln_bound {
        j += 1;
    }
    let fallback = |why: String| FoldingChoice {
        grid: Grid::Full,
        j,
        surrogate,
        warning: Some(why),
    };
    let Some(d) = d else {
        return Ok(fallback(format!(
            "no folding factor keeps the surrogate tail below 1/E_S = {:.1e}; using the full grid",
            1.0 / e_s as f64
        )));
    };
    let l = modes / d;
    if j * l >= (modes + 1) * (modes + 1) || j > l.max(1) * modes {
        return Ok(fallback(format!(
            "folded grid J={j}, D={d} is no smaller than the full grid"
        )));
    }
    Ok(FoldingChoice {
        grid: Grid::Folded { d, j },
        j,
        surrogate,
        warning: None,
    })
}

/// Orbit table from a phase-space source in one call.
pub fn phase_space_orbits(
    source: &dyn SampleSource,
    det: &DetectorModel,
    grid: Grid,
    options: CharOptions,
    seed: u64,
) -> Result<OrbitTable> {
    let table = characteristic_function(source, det, grid, options)?;
    let mut orbits = inverse_dft(&table);
    orbits.seed = seed;
    Ok(orbits)
}

/// Patterns of `orbits` grouped for reporting, mainly for tests.
pub fn patterns_of(modes: usize, orbits: &[OrbitId]) -> Vec<ClickPattern> {
    orbits
        .iter()
        .flat_map(|&id| orbit_patterns(modes, id).into_iter().map(ClickPattern))
        .collect()
}
