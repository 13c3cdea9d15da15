//! χ² over conditional click-number distributions and the Bayesian
//! confidence between a quantum and a classical orbit table.

use crate::error::{invalid, GbsError, Result};
use crate::orbits::{orbit_counts, OrbitId, OrbitTable};
use crate::sampling::{mean_and_se, sample_rng, ClassicalSampleSet};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// P(n | l) over a support of total click numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDist {
    pub l: usize,
    pub probs: BTreeMap<usize, f64>,
}

impl ConditionalDist {
    /// Normalizes the l-slice of `table`, optionally restricted to `support`.
    pub fn from_table(table: &OrbitTable, l: usize, support: Option<&[usize]>) -> Result<Self> {
        let slice = table.slice(l);
        let mut probs: BTreeMap<usize, f64> = match support {
            Some(s) => s
                .iter()
                .map(|n| (*n, slice.get(n).map_or(0.0, |e| e.probability)))
                .collect(),
            None => slice.into_iter().map(|(n, e)| (n, e.probability)).collect(),
        };
        let total: f64 = probs.values().sum();
        if total <= 0.0 {
            return Err(GbsError::EmptySupport(format!(
                "no probability mass at l = {l}"
            )));
        }
        probs.values_mut().for_each(|p| *p /= total);
        Ok(Self { l, probs })
    }

    pub fn support(&self) -> Vec<usize> {
        self.probs.keys().copied().collect()
    }
}

/// Pearson statistic of one l-slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub chi2: f64,
    /// Number of orbits kept, k_l.
    pub k: usize,
    /// Classical patterns counted in the kept orbits, N_l.
    pub n: u64,
}

impl ChiSquare {
    pub fn per_degree(&self) -> f64 {
        self.chi2 / self.k as f64
    }
}

/// χ²(l) = N_l Σ_i (P(n_i|l) − P^cl(n_i|l))² / P(n_i|l) over orbits observed
/// more than `min_count` times.
pub fn chi_square(
    quantum: &OrbitTable,
    classical: &ClassicalSampleSet,
    l: usize,
    min_count: u64,
) -> Result<ChiSquare> {
    chi_square_counts(quantum, &orbit_counts(classical), l, min_count)
}

pub fn chi_square_counts(
    quantum: &OrbitTable,
    counts: &BTreeMap<OrbitId, u64>,
    l: usize,
    min_count: u64,
) -> Result<ChiSquare> {
    let selected: BTreeMap<usize, u64> = counts
        .iter()
        .filter(|(id, &c)| id.l() == l && c > min_count)
        .map(|(id, &c)| (id.n(), c))
        .collect();
    if selected.is_empty() {
        return Err(GbsError::EmptySupport(format!(
            "no orbit with l = {l} appears more than {min_count} times"
        )));
    }
    let n_l: u64 = selected.values().sum();
    let support: Vec<usize> = selected.keys().copied().collect();
    let q = ConditionalDist::from_table(quantum, l, Some(&support))?;
    let mut chi2 = 0.0;
    for (n, &c) in &selected {
        let p = q.probs[n];
        if p <= 0.0 {
            return Err(GbsError::Numerical(format!(
                "quantum table has no mass on observed orbit (n={n}, l={l})"
            )));
        }
        let pc = c as f64 / n_l as f64;
        chi2 += (p - pc).powi(2) / p;
    }
    Ok(ChiSquare {
        chi2: n_l as f64 * chi2,
        k: selected.len(),
        n: n_l,
    })
}

/// Bayesian confidence estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesResult {
    pub delta_h: f64,
    pub stderr: f64,
    pub draws: usize,
    /// Draws where a zero probability was replaced by the floor.
    pub floored: usize,
}

/// Normalized (orbit, probability) list with its cumulative sums.
struct Categorical {
    ids: Vec<OrbitId>,
    cdf: Vec<f64>,
}

impl Categorical {
    fn new(table: &OrbitTable) -> Result<Self> {
        let mut ids = Vec::new();
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for (id, e) in &table.entries {
            if e.probability > 0.0 {
                acc += e.probability;
                ids.push(*id);
                cdf.push(acc);
            }
        }
        if acc <= 0.0 {
            return Err(GbsError::EmptySupport("orbit table carries no mass".into()));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { ids, cdf })
    }

    fn draw(&self, u: f64) -> OrbitId {
        let i = self.cdf.partition_point(|&c| c < u);
        self.ids[i.min(self.ids.len() - 1)]
    }
}

fn normalized(table: &OrbitTable) -> BTreeMap<OrbitId, f64> {
    let total: f64 = table.entries.values().map(|e| e.probability.max(0.0)).sum();
    table
        .entries
        .iter()
        .map(|(id, e)| (*id, e.probability.max(0.0) / total))
        .collect()
}

/// ΔH = mean of ln[P(n,l)/P^cl(n,l)] over `draws` orbits drawn from the
/// normalized quantum table, or from the classical table when `swap` is set.
///
/// A zero probability on a drawn orbit is replaced by 1/(10·N) with N the
/// sample budget of the table it belongs to (`draws` for exact tables).
pub fn bayesian_confidence(
    quantum: &OrbitTable,
    classical: &OrbitTable,
    draws: usize,
    seed: u64,
    swap: bool,
) -> Result<BayesResult> {
    if draws < 2 {
        return Err(invalid("draws", "need at least two draws"));
    }
    let source = Categorical::new(if swap { classical } else { quantum })?;
    let pq = normalized(quantum);
    let pc = normalized(classical);
    let floor = |t: &OrbitTable| {
        1.0 / (10.0
            * if t.samples > 0 {
                t.samples
            } else {
                draws as u64
            } as f64)
    };
    let (fq, fc) = (floor(quantum), floor(classical));
    let samples: Vec<(f64, bool)> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let u: f64 = sample_rng(seed, i as u64).random();
            let id = source.draw(u);
            let a = pq.get(&id).copied().unwrap_or(0.0);
            let b = pc.get(&id).copied().unwrap_or(0.0);
            let hit = a <= 0.0 || b <= 0.0;
            let a = if a > 0.0 { a } else { fq };
            let b = if b > 0.0 { b } else { fc };
            ((a / b).ln(), hit)
        })
        .collect();
    let floored = samples.iter().filter(|s| s.1).count();
    let values: Vec<f64> = samples.into_iter().map(|s| s.0).collect();
    let (delta_h, stderr) = mean_and_se(&values);
    if floored > 0 {
        log::info!("{floored} of {draws} draws hit a zero probability and were floored");
    }
    Ok(BayesResult {
        delta_h,
        stderr,
        draws,
        floored,
    })
}

/// One line of a validation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub test: String,
    pub l: Option<usize>,
    pub statistic: f64,
    pub k: Option<usize>,
    pub n: Option<u64>,
    pub seed: u64,
}

/// CSV with columns test, l, statistic, k_l, N_l, seed; absent fields stay empty.
pub fn write_validation_csv(rows: &[ValidationRow], w: &mut impl Write) -> Result<()> {
    writeln!(w, "test,l,statistic,k_l,N_l,seed")?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{:.16e},{},{},{}",
            r.test,
            opt(r.l.map(|v| v.to_string())),
            r.statistic,
            opt(r.k.map(|v| v.to_string())),
            opt(r.n.map(|v| v.to_string())),
            r.seed
        )?;
    }
    Ok(())
}
