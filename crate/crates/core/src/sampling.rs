//! Positive-P phase-space samples and direct click-pattern sampling for
//! classical (non-negative P) inputs.
//!
//! Every sample draws from its own ChaCha8 stream selected by the sample
//! index, so batches regenerate identically whatever the thread count.

use crate::detectors::{response_entry, DetectorModel};
use crate::error::{invalid, GbsError, Result};
use crate::gaussian::Interferometer;
use crate::linalg::{C64, ZERO};
use crate::probability::ClickPattern;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// Random stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Single-mode input described by its normally ordered moments
/// ⟨a†a⟩ = n and ⟨a²⟩ = i·m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceInput {
    pub n: f64,
    pub m: f64,
}

impl PhaseSpaceInput {
    pub fn squeezed(r: f64, epsilon: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(invalid(
                "r",
                format!("must be finite and non-negative, got {r}"),
            ));
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(invalid(
                "epsilon",
                format!("must lie in [0, 1], got {epsilon}"),
            ));
        }
        Ok(Self {
            n: r.sinh().powi(2),
            m: (1.0 - epsilon) * r.sinh() * r.cosh(),
        })
    }

    pub fn thermal(n_th: f64) -> Result<Self> {
        check_occupation(n_th)?;
        Ok(Self { n: n_th, m: 0.0 })
    }

    pub fn squashed(n_th: f64) -> Result<Self> {
        check_occupation(n_th)?;
        Ok(Self { n: n_th, m: n_th })
    }

    /// (δ₊, δ₋) with δ±² = (n ± m)/2; δ₋ is imaginary when m > n.
    pub fn deltas(&self) -> (f64, C64) {
        let plus = ((self.n + self.m) / 2.0).max(0.0).sqrt();
        let minus = C64::new((self.n - self.m) / 2.0, 0.0).sqrt();
        (plus, minus)
    }

    /// Whether the state has a non-negative P function.
    pub fn is_classical(&self) -> bool {
        self.m <= self.n + 1e-15
    }
}

fn check_occupation(n_th: f64) -> Result<()> {
    if !(n_th >= 0.0 && n_th.is_finite()) {
        return Err(invalid(
            "n_th",
            format!("must be finite and non-negative, got {n_th}"),
        ));
    }
    Ok(())
}

/// e^{iπ/4}: aligns the real sampling axis with the ⟨a²⟩ = i·m phase.
fn quarter_phase() -> C64 {
    C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    Input,
    Output,
}

/// Anything that yields positive-P samples (α, β) on demand by index.
pub trait SampleSource: Sync {
    fn modes(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Writes sample `index` into `alpha` and `beta` (length `modes`).
    fn fill(&self, index: usize, alpha: &mut [C64], beta: &mut [C64]);
}

/// Stored samples, E rows of M complex amplitudes each.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceBatch {
    pub modes: usize,
    pub alphas: Vec<C64>,
    pub betas: Vec<C64>,
    pub seed: u64,
    pub plane: Plane,
}

impl PhaseSpaceBatch {
    pub fn samples(&self) -> usize {
        self.alphas.len().checked_div(self.modes).unwrap_or(0)
    }

    pub fn alpha(&self, e: usize) -> &[C64] {
        &self.alphas[e * self.modes..(e + 1) * self.modes]
    }

    pub fn beta(&self, e: usize) -> &[C64] {
        &self.betas[e * self.modes..(e + 1) * self.modes]
    }

    /// Sample mean and standard error of Σ_i Re(β_i α_i).
    pub fn mean_photons(&self) -> (f64, f64) {
        let values: Vec<f64> = (0..self.samples())
            .map(|e| {
                self.alpha(e)
                    .iter()
                    .zip(self.beta(e))
                    .map(|(a, b)| (a * b).re)
                    .sum()
            })
            .collect();
        mean_and_se(&values)
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_u64::<LittleEndian>(self.modes as u64)?;
        w.write_u64::<LittleEndian>(self.samples() as u64)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        w.write_u8(match self.plane {
            Plane::Input => 0,
            Plane::Output => 1,
        })?;
        for e in 0..self.samples() {
            for z in self.alpha(e).iter().chain(self.beta(e)) {
                w.write_f64::<LittleEndian>(z.re)?;
                w.write_f64::<LittleEndian>(z.im)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(GbsError::Format("not a phase-space batch file".into()));
        }
        let modes = r.read_u64::<LittleEndian>()? as usize;
        let samples = r.read_u64::<LittleEndian>()? as usize;
        let seed = r.read_u64::<LittleEndian>()?;
        let plane = match r.read_u8()? {
            0 => Plane::Input,
            1 => Plane::Output,
            other => return Err(GbsError::Format(format!("unknown plane tag {other}"))),
        };
        let mut alphas = Vec::with_capacity(modes * samples);
        let mut betas = Vec::with_capacity(modes * samples);
        let read = |r: &mut dyn Read| -> Result<C64> {
            let re = r.read_f64::<LittleEndian>()?;
            let im = r.read_f64::<LittleEndian>()?;
            Ok(C64::new(re, im))
        };
        for _ in 0..samples {
            for _ in 0..modes {
                alphas.push(read(r)?);
            }
            for _ in 0..modes {
                betas.push(read(r)?);
            }
        }
        Ok(Self {
            modes,
            alphas,
            betas,
            seed,
            plane,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Leading bytes of the batch cache: magic, then little-endian u64 M, E and
/// seed, a plane byte, and E rows of M α then M β values as (re, im) f64 pairs.
pub const CACHE_MAGIC: &[u8; 8] = b"PSBATCH1";

impl SampleSource for PhaseSpaceBatch {
    fn modes(&self) -> usize {
        self.modes
    }

    fn len(&self) -> usize {
        self.samples()
    }

    fn fill(&self, index: usize, alpha: &mut [C64], beta: &mut [C64]) {
        alpha.copy_from_slice(self.alpha(index));
        beta.copy_from_slice(self.beta(index));
    }
}

/// Input-plane sample: α̃_j = e^{iπ/4}(δ₊ω_j + iδ₋ω_{j+M}), β̃_j = e^{−iπ/4}(δ₊ω_j − iδ₋ω_{j+M}).
fn draw_inputs(
    inputs: &[PhaseSpaceInput],
    deltas: &[(f64, C64)],
    rng: &mut ChaCha8Rng,
    alpha: &mut [C64],
    beta: &mut [C64],
) {
    let m = inputs.len();
    let mut omega = [0.0f64; 2];
    let rot = quarter_phase();
    for j in 0..m {
        omega[0] = StandardNormal.sample(rng);
        omega[1] = StandardNormal.sample(rng);
        let (dp, dm) = deltas[j];
        let i_dm = C64::i() * dm * omega[1];
        alpha[j] = rot * (dp * omega[0] + i_dm);
        beta[j] = rot.conj() * (dp * omega[0] - i_dm);
    }
}

/// Draws E input-plane samples for the given single-mode inputs.
pub fn sample_positive_p(
    inputs: &[PhaseSpaceInput],
    samples: usize,
    seed: u64,
) -> Result<PhaseSpaceBatch> {
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    let m = inputs.len();
    let deltas: Vec<_> = inputs.iter().map(|i| i.deltas()).collect();
    let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..samples)
        .into_par_iter()
        .map(|e| {
            let mut rng = sample_rng(seed, e as u64);
            let mut a = vec![ZERO; m];
            let mut b = vec![ZERO; m];
            draw_inputs(inputs, &deltas, &mut rng, &mut a, &mut b);
            (a, b)
        })
        .collect();
    let mut alphas = Vec::with_capacity(m * samples);
    let mut betas = Vec::with_capacity(m * samples);
    for (a, b) in rows {
        alphas.extend(a);
        betas.extend(b);
    }
    Ok(PhaseSpaceBatch {
        modes: m,
        alphas,
        betas,
        seed,
        plane: Plane::Input,
    })
}

/// α = √η U α̃, β = √η U* β̃ for every stored input-plane sample; inputs
/// occupy the first modes of the interferometer.
pub fn propagate_batch(
    batch: &PhaseSpaceBatch,
    u: &Interferometer,
    eta: f64,
) -> Result<PhaseSpaceBatch> {
    check_eta(eta)?;
    if batch.plane != Plane::Input {
        return Err(invalid("batch", "already propagated"));
    }
    let out_modes = u.modes();
    if batch.modes > out_modes {
        return Err(GbsError::Dimension(format!(
            "{} input modes exceed {} interferometer modes",
            batch.modes, out_modes
        )));
    }
    let prop = Propagator::new(u, batch.modes, eta);
    let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..batch.samples())
        .into_par_iter()
        .map(|e| {
            let mut a = vec![ZERO; out_modes];
            let mut b = vec![ZERO; out_modes];
            prop.apply(batch.alpha(e), batch.beta(e), &mut a, &mut b);
            (a, b)
        })
        .collect();
    let mut alphas = Vec::with_capacity(out_modes * batch.samples());
    let mut betas = Vec::with_capacity(out_modes * batch.samples());
    for (a, b) in rows {
        alphas.extend(a);
        betas.extend(b);
    }
    Ok(PhaseSpaceBatch {
        modes: out_modes,
        alphas,
        betas,
        seed: batch.seed,
        plane: Plane::Output,
    })
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(invalid("eta", format!("must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

/// Columns of √η U (and its conjugate) restricted to the occupied inputs.
#[derive(Clone, Debug)]
struct Propagator {
    out_modes: usize,
    inputs: usize,
    cols: Vec<C64>,
}

impl Propagator {
    fn new(u: &Interferometer, inputs: usize, eta: f64) -> Self {
        let m = u.modes();
        let s = eta.sqrt();
        let mat = u.matrix();
        let mut cols = Vec::with_capacity(m * inputs);
        for i in 0..m {
            for j in 0..inputs {
                cols.push(mat[(i, j)] * s);
            }
        }
        Self {
            out_modes: m,
            inputs,
            cols,
        }
    }

    fn apply(&self, a_in: &[C64], b_in: &[C64], a_out: &mut [C64], b_out: &mut [C64]) {
        for i in 0..self.out_modes {
            let row = &self.cols[i * self.inputs..(i + 1) * self.inputs];
            let mut a = ZERO;
            let mut b = ZERO;
            for j in 0..self.inputs {
                a += row[j] * a_in[j];
                b += row[j].conj() * b_in[j];
            }
            a_out[i] = a;
            b_out[i] = b;
        }
    }
}

/// Output-plane samples generated on the fly, never stored.
#[derive(Clone, Debug)]
pub struct PositivePSource {
    inputs: Vec<PhaseSpaceInput>,
    deltas: Vec<(f64, C64)>,
    prop: Propagator,
    samples: usize,
    seed: u64,
}

impl PositivePSource {
    pub fn new(
        inputs: &[PhaseSpaceInput],
        u: &Interferometer,
        eta: f64,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        check_eta(eta)?;
        if inputs.len() > u.modes() {
            return Err(GbsError::Dimension(format!(
                "{} inputs exceed {} interferometer modes",
                inputs.len(),
                u.modes()
            )));
        }
        if samples == 0 {
            return Err(invalid("samples", "must be at least 1"));
        }
        Ok(Self {
            inputs: inputs.to_vec(),
            deltas: inputs.iter().map(|i| i.deltas()).collect(),
            prop: Propagator::new(u, inputs.len(), eta),
            samples,
            seed,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl SampleSource for PositivePSource {
    fn modes(&self) -> usize {
        self.prop.out_modes
    }

    fn len(&self) -> usize {
        self.samples
    }

    fn fill(&self, index: usize, alpha: &mut [C64], beta: &mut [C64]) {
        let k = self.inputs.len();
        let mut a_in = [ZERO; 64];
        let mut b_in = [ZERO; 64];
        let mut rng = sample_rng(self.seed, index as u64);
        if k <= 64 {
            draw_inputs(
                &self.inputs,
                &self.deltas,
                &mut rng,
                &mut a_in[..k],
                &mut b_in[..k],
            );
            self.prop.apply(&a_in[..k], &b_in[..k], alpha, beta);
        } else {
            let mut a = vec![ZERO; k];
            let mut b = vec![ZERO; k];
            draw_inputs(&self.inputs, &self.deltas, &mut rng, &mut a, &mut b);
            self.prop.apply(&a, &b, alpha, beta);
        }
    }
}

/// Input state family for the classical pattern sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateClass {
    Thermal,
    Squashed,
    Squeezed,
}

/// Classical click patterns with multiplicities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSampleSet {
    pub modes: usize,
    pub counts: BTreeMap<ClickPattern, u64>,
    pub total: u64,
    pub class: StateClass,
    pub seed: u64,
}

impl ClassicalSampleSet {
    /// Pools two sets drawn from the same source family.
    pub fn merged(&self, other: &Self) -> Result<Self> {
        if self.modes != other.modes {
            return Err(GbsError::Dimension(
                "sample sets differ in mode count".into(),
            ));
        }
        let mut counts = self.counts.clone();
        for (p, c) in &other.counts {
            *counts.entry(p.clone()).or_insert(0) += c;
        }
        Ok(Self {
            modes: self.modes,
            counts,
            total: self.total + other.total,
            class: self.class,
            seed: self.seed,
        })
    }

    pub fn frequency(&self, pattern: &ClickPattern) -> f64 {
        self.counts.get(pattern).copied().unwrap_or(0) as f64 / self.total as f64
    }
}

/// Poisson variate: inversion for λ < 10, the library sampler above.
pub fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < 10.0 {
        let u: f64 = rng.random();
        let mut p = (-lambda).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u > cdf && k < 1000 {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
        }
        k
    } else {
        Poisson::new(lambda)
            .expect("finite positive rate")
            .sample(rng) as u64
    }
}

/// Response columns P_{·|m}, cached for small m.
struct ResponseSampler {
    det: DetectorModel,
    columns: Vec<Vec<f64>>,
}

const CACHED_PHOTONS: usize = 48;

impl ResponseSampler {
    fn new(det: &DetectorModel) -> Result<Self> {
        let columns = (0..=CACHED_PHOTONS)
            .map(|m| Self::column(det, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            det: det.clone(),
            columns,
        })
    }

    fn column(det: &DetectorModel, m: usize) -> Result<Vec<f64>> {
        let top = det.max_outcome().map_or(m, |k| k.min(m));
        (0..=top).map(|n| response_entry(det, n, m)).collect()
    }

    fn draw(&self, m: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        let owned;
        let col = if m <= CACHED_PHOTONS {
            &self.columns[m]
        } else {
            owned = Self::column(&self.det, m)?;
            &owned
        };
        let u: f64 = rng.random();
        let mut cdf = 0.0;
        for (n, p) in col.iter().enumerate() {
            cdf += p;
            if u < cdf {
                return Ok(n);
            }
        }
        Ok(col.len() - 1)
    }
}

/// Draws `samples` click patterns from a classical Gaussian input ensemble.
///
/// Each input mode j receives occupation `n_th[j]`; the remaining
/// interferometer modes start in vacuum.
pub fn sample_classical_patterns(
    class: StateClass,
    n_th: &[f64],
    u: &Interferometer,
    eta: f64,
    det: &DetectorModel,
    samples: usize,
    seed: u64,
) -> Result<ClassicalSampleSet> {
    if class == StateClass::Squeezed {
        return Err(GbsError::Unsupported(
            "quantum pattern sampling out of scope; use thermal or squashed inputs".into(),
        ));
    }
    check_eta(eta)?;
    det.validate()?;
    for &n in n_th {
        check_occupation(n)?;
    }
    let inputs: Vec<PhaseSpaceInput> = n_th
        .iter()
        .map(|&n| match class {
            StateClass::Thermal => PhaseSpaceInput::thermal(n),
            _ => PhaseSpaceInput::squashed(n),
        })
        .collect::<Result<_>>()?;
    let m = u.modes();
    let prop = Propagator::new(u, inputs.len(), eta);
    let response = ResponseSampler::new(det)?;
    let rot = quarter_phase();
    let draws: Vec<Vec<usize>> = (0..samples)
        .into_par_iter()
        .map(|e| {
            let mut rng = sample_rng(seed, e as u64);
            let k = inputs.len();
            let mut a_in = vec![ZERO; k];
            for (j, inp) in inputs.iter().enumerate() {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                a_in[j] = match class {
                    StateClass::Thermal => C64::new(x, y) * (inp.n / 2.0).sqrt(),
                    _ => rot * (x * inp.n.sqrt()),
                };
            }
            let b_in: Vec<C64> = a_in.iter().map(|a| a.conj()).collect();
            let mut a = vec![ZERO; m];
            let mut b = vec![ZERO; m];
            prop.apply(&a_in, &b_in, &mut a, &mut b);
            a.iter()
                .map(|ai| {
                    let photons = poisson(ai.norm_sqr(), &mut rng) as usize;
                    response.draw(photons, &mut rng)
                })
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<_>>()?;
    let mut counts = BTreeMap::new();
    for d in draws {
        *counts.entry(ClickPattern(d)).or_insert(0u64) += 1;
    }
    Ok(ClassicalSampleSet {
        modes: m,
        counts,
        total: samples as u64,
        class,
        seed,
    })
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
