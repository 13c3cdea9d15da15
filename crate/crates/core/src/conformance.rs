//! Self-checks against independent oracles, sized to finish in seconds.

use crate::detectors::{DetectorModel, Envelope, Timing};
use crate::error::Result;
use crate::functionals::{
    apd_functional, hafnian, kensingtonian, snspd_functional, torontonian, ReducedKernel,
};
use crate::gaussian::{
    assemble_and_propagate, haar_random_unitary, kernel, make_thermal, make_thermalized_squeezed,
    photons_after_loss, solve_squeezing, GaussianState,
};
use crate::probability::{brute_force_with_oracle, ClickPattern, FockOracle, PatternEvaluator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    /// Largest observed deviation in the suite's own metric.
    pub worst: f64,
    pub tolerance: f64,
}

/// Random M-mode state mixing squeezed, thermal and vacuum inputs.
pub fn random_state(rng: &mut ChaCha8Rng, modes: usize) -> Result<GaussianState> {
    let inputs = (0..modes)
        .map(|_| match rng.random_range(0..3) {
            0 => make_thermalized_squeezed(rng.random_range(0.05..0.5), rng.random_range(0.0..0.3)),
            1 => make_thermal(rng.random_range(0.02..0.4)),
            _ => make_thermal(0.0),
        })
        .collect::<Result<Vec<_>>>()?;
    let u = haar_random_unitary(modes, rng.random())?;
    assemble_and_propagate(&inputs, &u, rng.random_range(0.5..=1.0))
}

/// A random detector from every family.
pub fn random_detector(rng: &mut ChaCha8Rng) -> DetectorModel {
    match rng.random_range(0..6) {
        0 => DetectorModel::Pnr,
        1 => DetectorModel::OnOff,
        2 => DetectorModel::Click {
            k: rng.random_range(2..=3),
        },
        3 => DetectorModel::Apd {
            dead_time: rng.random_range(0.05..0.3),
        },
        4 => DetectorModel::Snspd(Timing {
            dead_time: rng.random_range(0.05..0.2),
            relax_time: rng.random_range(0.02..0.3),
            envelope: Envelope::Rectangular,
        }),
        _ => DetectorModel::Snspd(Timing {
            dead_time: rng.random_range(0.05..0.15),
            relax_time: rng.random_range(0.02..0.2),
            envelope: Envelope::TruncatedGaussian {
                center: 0.5,
                width: rng.random_range(0.15..0.4),
            },
        }),
    }
}

/// Random pattern with at most `max_total` clicks, respecting the detector range.
pub fn random_pattern(
    rng: &mut ChaCha8Rng,
    modes: usize,
    det: &DetectorModel,
    max_total: usize,
) -> ClickPattern {
    let cap = det.max_outcome().unwrap_or(usize::MAX);
    let budget = rng.random_range(0..=max_total);
    let mut p = vec![0; modes];
    for _ in 0..budget {
        let i = rng.random_range(0..modes);
        if p[i] < cap {
            p[i] += 1;
        }
    }
    ClickPattern(p)
}

fn relative_gap(a: f64, b: f64, rel: f64, floor: f64) -> f64 {
    (a - b).abs() / (rel * b.abs()).max(floor)
}

/// Functional route versus Fock-space oracle; `worst` is the error in units of the tolerance.
pub fn oracle_equivalence(trials: usize, max_modes: usize, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let m = rng.random_range(1..=max_modes);
        let state = random_state(&mut rng, m)?;
        let det = random_detector(&mut rng);
        let pat = random_pattern(&mut rng, m, &det, 4);
        let eval = PatternEvaluator::new(&state, &det)?;
        let a = eval.probability(&pat.0)?;
        let oracle = FockOracle::adaptive(eval.kernel(), 1e-10)?;
        let b = brute_force_with_oracle(&oracle, &det, &pat)?.value;
        worst = worst.max(relative_gap(a, b, 1e-6, 1e-10));
    }
    Ok(SuiteResult {
        name: "oracle_equivalence",
        passed: worst < 1.0,
        cases: trials,
        worst,
        tolerance: 1.0,
    })
}

fn random_reduced(rng: &mut ChaCha8Rng, n: usize) -> Result<ReducedKernel> {
    let state = random_state(rng, n)?;
    let k = kernel(&state)?;
    ReducedKernel::from_matrix(k.a, vec![1; n])
}

/// Ken(K=1) = Tor, APD(η₁=1) = Hafnian, SNSPD(τ_r→0) ≈ APD.
pub fn reduction_identities(trials: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ken, mut apd, mut sn) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..trials {
        let n = rng.random_range(1..=4);
        let rk = random_reduced(&mut rng, n)?;
        ken = ken.max((kensingtonian(&rk, 1)? - torontonian(&rk.a_s)?).abs());
        let b = rk.a_s.swap_blocks_rows().symmetrized();
        let h = hafnian(&b)?.re;
        apd = apd.max((apd_functional(&rk, 1.0)? - h).abs());
        if t % 4 == 0 {
            let n = rng.random_range(1..=2);
            let rk = random_reduced(&mut rng, n)?;
            let d = rng.random_range(0.05..0.3);
            let timing = Timing {
                dead_time: d,
                relax_time: 1e-6,
                envelope: Envelope::Rectangular,
            };
            let s = snspd_functional(&rk, &timing, Default::default())?.value;
            let a = apd_functional(&rk, 1.0 - d)?;
            sn = sn.max((s - a).abs());
        }
    }
    Ok(vec![
        SuiteResult {
            name: "kensingtonian_k1_is_torontonian",
            passed: ken < 1e-10,
            cases: trials,
            worst: ken,
            tolerance: 1e-10,
        },
        SuiteResult {
            name: "apd_unit_efficiency_is_hafnian",
            passed: apd < 1e-10,
            cases: trials,
            worst: apd,
            tolerance: 1e-10,
        },
        SuiteResult {
            name: "snspd_fast_recovery_is_apd",
            passed: sn < 1e-4,
            cases: trials.div_ceil(4),
            worst: sn,
            tolerance: 1e-4,
        },
    ])
}

/// Every pattern with at most `max_total` clicks and entries within the detector range.
pub fn bounded_patterns(modes: usize, det: &DetectorModel, max_total: usize) -> Vec<ClickPattern> {
    let cap = det.max_outcome().unwrap_or(max_total).min(max_total);
    crate::probability::lattice(modes, cap)
        .into_iter()
        .filter(|p| p.total() <= max_total)
        .collect()
}

/// |Σ P(n) − 1| over the truncated pattern set for a weakly excited state.
pub fn normalization(
    det: &DetectorModel,
    modes: usize,
    max_total: usize,
    seed: u64,
) -> Result<f64> {
    let inputs: Vec<_> = (0..modes)
        .map(|j| {
            if j % 2 == 0 {
                make_thermalized_squeezed(0.08, 0.1)
            } else {
                make_thermal(0.02)
            }
        })
        .collect::<Result<_>>()?;
    let state = assemble_and_propagate(&inputs, &haar_random_unitary(modes, seed)?, 0.9)?;
    let eval = PatternEvaluator::new(&state, det)?;
    let probs = eval.probabilities(&bounded_patterns(modes, det, max_total))?;
    Ok((crate::functionals::reduce::pairwise_sum(&probs) - 1.0).abs())
}

/// Device parameters: (r for 20 photons over 200 inputs at η = 0.8, photons for r = 1 over 50 inputs).
pub fn parameter_checks() -> Result<(f64, f64)> {
    Ok((
        solve_squeezing(20.0, 200, 0.8)?,
        photons_after_loss(1.0, 50, 0.8),
    ))
}

/// Single-mode squeezed vacuum against its closed-form photon distribution.
pub fn squeezed_distribution(r: f64) -> Result<f64> {
    let state = make_thermalized_squeezed(r, 0.0)?;
    let eval = PatternEvaluator::new(&state, &DetectorModel::Pnr)?;
    let mut worst = 0.0f64;
    let mut factor = 1.0 / r.cosh();
    for k in 0..6usize {
        if k > 0 {
            let kf = k as f64;
            factor *= (2.0 * kf) * (2.0 * kf - 1.0) / (4.0 * kf * kf) * r.tanh().powi(2);
        }
        worst = worst.max((eval.probability(&[2 * k])? - factor).abs());
        worst = worst.max(eval.probability(&[2 * k + 1])?.abs());
    }
    Ok(worst)
}

/// All quick suites.
pub fn run_all(seed: u64) -> Result<Vec<SuiteResult>> {
    let mut out = vec![oracle_equivalence(25, 2, seed)?];
    out.extend(reduction_identities(40, seed)?);
    let mut norm = 0.0f64;
    for det in [
        DetectorModel::Pnr,
        DetectorModel::OnOff,
        DetectorModel::Click { k: 2 },
        DetectorModel::Apd { dead_time: 0.1 },
        DetectorModel::Snspd(Timing {
            dead_time: 0.1,
            relax_time: 0.1,
            envelope: Envelope::Rectangular,
        }),
    ] {
        norm = norm.max(normalization(&det, 2, 4, seed)?);
    }
    out.push(SuiteResult {
        name: "normalization",
        passed: norm < 1e-6,
        cases: 5,
        worst: norm,
        tolerance: 1e-6,
    });
    let sq = squeezed_distribution(0.5)?;
    out.push(SuiteResult {
        name: "squeezed_distribution",
        passed: sq < 1e-13,
        cases: 12,
        worst: sq,
        tolerance: 1e-13,
    });
    let (r, n) = parameter_checks()?;
    let dev = ((r - 0.3466) / 5e-5).abs().max(((n - 55.24) / 0.01).abs());
    out.push(SuiteResult {
        name: "device_parameters",
        passed: dev < 1.0,
        cases: 2,
        worst: dev,
        tolerance: 1.0,
    });
    Ok(out)
}
