//! Python module `pygbsval`: pattern probabilities, orbit tables and validation
//! statistics on top of the `gbsval` core.

use gbsval::config::ExperimentConfig;
use gbsval::detectors::DetectorModel;
use gbsval::experiment::Experiment;
use gbsval::gaussian::GaussianState;
use gbsval::orbits::{ln_orbit_cardinality, orbit_cardinality, OrbitTable};
use gbsval::probability::{ClickPattern, PatternEvaluator};
use gbsval::GbsError;
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: GbsError) -> PyErr {
    match e {
        GbsError::Io(_) | GbsError::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn detector(json: &str) -> PyResult<DetectorModel> {
    let det: DetectorModel =
        serde_json::from_str(json).map_err(|e| PyValueError::new_err(format!("detector: {e}")))?;
    det.validate().map_err(to_py)?;
    Ok(det)
}

fn state(cov: Vec<Vec<f64>>) -> PyResult<GaussianState> {
    let n = cov.len();
    if cov.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err(
            "covariance must be a square nested list",
        ));
    }
    let flat: Vec<f64> = cov.into_iter().flatten().collect();
    GaussianState::from_covariance(DMatrix::from_row_slice(n, n, &flat)).map_err(to_py)
}

fn rows(table: &OrbitTable) -> Vec<(usize, usize, f64, f64)> {
    table
        .entries
        .iter()
        .map(|(id, e)| (id.n(), id.l(), e.probability, e.stderr))
        .collect()
}

fn experiment(config_json: &str) -> PyResult<Experiment> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    Experiment::new(&cfg).map_err(to_py)
}

/// Probability of `pattern` for a zero-mean state given by its (x, p) covariance.
/// `detector` is JSON such as `{"kind": "click", "k": 2}`.
#[pyfunction]
fn pattern_probability(
    covariance: Vec<Vec<f64>>,
    detector_json: &str,
    pattern: Vec<usize>,
) -> PyResult<f64> {
    let eval =
        PatternEvaluator::new(&state(covariance)?, &detector(detector_json)?).map_err(to_py)?;
    eval.probability(&ClickPattern(pattern).0).map_err(to_py)
}

#[pyfunction]
fn solve_squeezing(n_ph: f64, inputs: usize, eta: f64) -> PyResult<f64> {
    gbsval::gaussian::solve_squeezing(n_ph, inputs, eta).map_err(to_py)
}

#[pyfunction]
fn photons_after_loss(r: f64, inputs: usize, eta: f64) -> f64 {
    gbsval::gaussian::photons_after_loss(r, inputs, eta)
}

/// Number of patterns with m1 single and m2 double clicks, as a Python int.
#[pyfunction]
fn orbit_size(py: Python<'_>, modes: usize, m1: usize, m2: usize) -> PyResult<PyObject> {
    let digits = orbit_cardinality(modes, m1, m2).map_err(to_py)?.to_string();
    let int = py.import("builtins")?.getattr("int")?.call1((digits,))?;
    Ok(int.unbind())
}

#[pyfunction]
fn ln_orbit_size(modes: usize, m1: usize, m2: usize) -> f64 {
    ln_orbit_cardinality(modes, m1, m2)
}

/// Orbit table of the configured state as (n, l, probability, stderr) tuples.
#[pyfunction]
fn orbit_table(py: Python<'_>, config_json: &str) -> PyResult<Vec<(usize, usize, f64, f64)>> {
    let exp = experiment(config_json)?;
    let table = py
        .allow_threads(|| exp.orbit_table(exp.config.state, &exp.config.detector))
        .map_err(to_py)?;
    Ok(rows(&table))
}

/// χ² rows (l, χ², k_l, N_l); the config needs a `classical` section.
#[pyfunction]
fn chi_square(py: Python<'_>, config_json: &str) -> PyResult<Vec<(usize, f64, usize, u64)>> {
    let exp = experiment(config_json)?;
    let out = py.allow_threads(|| exp.chi_square_rows()).map_err(to_py)?;
    Ok(out
        .into_iter()
        .map(|r| {
            (
                r.l.unwrap_or(0),
                r.statistic,
                r.k.unwrap_or(0),
                r.n.unwrap_or(0),
            )
        })
        .collect())
}

/// (ΔH, stderr) between the configured state and the `bayes` hypothesis.
#[pyfunction]
#[pyo3(signature = (config_json, swap = false))]
fn bayes(py: Python<'_>, config_json: &str, swap: bool) -> PyResult<(f64, f64)> {
    let exp = experiment(config_json)?;
    let res = py.allow_threads(|| exp.bayes(swap)).map_err(to_py)?;
    Ok((res.delta_h, res.stderr))
}

#[pymodule]
fn pygbsval(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(pattern_probability, m)?)?;
    m.add_function(wrap_pyfunction!(solve_squeezing, m)?)?;
    m.add_function(wrap_pyfunction!(photons_after_loss, m)?)?;
    m.add_function(wrap_pyfunction!(orbit_size, m)?)?;
    m.add_function(wrap_pyfunction!(ln_orbit_size, m)?)?;
    m.add_function(wrap_pyfunction!(orbit_table, m)?)?;
    m.add_function(wrap_pyfunction!(chi_square, m)?)?;
    m.add_function(wrap_pyfunction!(bayes, m)?)?;
    Ok(())
}
