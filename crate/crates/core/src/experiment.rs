//! Builds states from an [`ExperimentConfig`] and runs the estimator pipelines.

use crate::config::{EstimatorSpec, ExperimentConfig, GridSpec};
use crate::detectors::DetectorModel;
use crate::error::{GbsError, Result};
use crate::functionals::MAX_HAFNIAN_HALF_DIM;
use crate::gaussian::{
    assemble_and_propagate, haar_random_unitary, make_squashed, make_thermal,
    make_thermalized_squeezed, GaussianState, Interferometer,
};
use crate::orbits::{
    direct_orbit_table, exact_orbit_table, orbits_up_to, phase_space_orbits, select_folding_params,
    CharOptions, Grid, OrbitTable,
};
use crate::probability::PatternEvaluator;
use crate::sampling::{
    sample_classical_patterns, ClassicalSampleSet, PhaseSpaceInput, PositivePSource, StateClass,
};
use crate::validation::{bayesian_confidence, chi_square, BayesResult, ValidationRow};

/// A configured device: interferometer, inputs and loss.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub unitary: Interferometer,
    pub r: f64,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            unitary: haar_random_unitary(config.modes, config.seeds.unitary)?,
            r: config.squeezing()?,
            config: config.clone(),
        })
    }

    /// Photons per input of the classical families, matched to sinh²r.
    pub fn matched_occupation(&self) -> f64 {
        self.r.sinh().powi(2)
    }

    pub fn phase_space_inputs(&self, class: StateClass) -> Result<Vec<PhaseSpaceInput>> {
        let n = self.matched_occupation();
        let one = match class {
            StateClass::Squeezed => PhaseSpaceInput::squeezed(self.r, self.config.epsilon)?,
            StateClass::Thermal => PhaseSpaceInput::thermal(n)?,
            StateClass::Squashed => PhaseSpaceInput::squashed(n)?,
        };
        Ok(vec![one; self.config.inputs])
    }

    /// Output Gaussian state for an input family.
    pub fn state(&self, class: StateClass) -> Result<GaussianState> {
        let n = self.matched_occupation();
        let one = match class {
            StateClass::Squeezed => make_thermalized_squeezed(self.r, self.config.epsilon)?,
            StateClass::Thermal => make_thermal(n)?,
            StateClass::Squashed => make_squashed(n)?,
        };
        let inputs = vec![one; self.config.inputs];
        assemble_and_propagate(&inputs, &self.unitary, self.config.eta)
    }

    /// Grid used by the phase-space estimator.
    pub fn grid(&self, class: StateClass) -> Result<Grid> {
        let (e_s, spec) = match &self.config.estimator {
            EstimatorSpec::PhaseSpace { e_s, grid } => (*e_s, grid),
            _ => return Ok(Grid::Full),
        };
        Ok(match spec {
            GridSpec::Full => Grid::Full,
            GridSpec::Folded { d, j } => Grid::Folded { d: *d, j: *j },
            GridSpec::Auto => {
                let choice = select_folding_params(&self.state(class)?, e_s)?;
                if let Some(w) = &choice.warning {
                    log::warn!("{w}");
                }
                choice.grid
            }
        })
    }

    /// Orbit table of an input family under the configured estimator.
    pub fn orbit_table(&self, class: StateClass, det: &DetectorModel) -> Result<OrbitTable> {
        let seed = self.config.seeds.sampling;
        match &self.config.estimator {
            EstimatorSpec::Exact { max_clicks } => {
                let eval = PatternEvaluator::new(&self.state(class)?, det)?;
                let mut t = exact_orbit_table(&eval, *max_clicks)?;
                t.seed = seed;
                Ok(t)
            }
            EstimatorSpec::Direct { n_s, max_clicks } => {
                if *max_clicks > MAX_HAFNIAN_HALF_DIM {
                    return Err(GbsError::Infeasible(format!(
                        "direct estimation is limited to {MAX_HAFNIAN_HALF_DIM} clicks; lower max_clicks or use the phase_space method"
                    )));
                }
                let eval = PatternEvaluator::new(&self.state(class)?, det)?;
                direct_orbit_table(
                    &eval,
                    &orbits_up_to(self.config.modes, *max_clicks),
                    *n_s,
                    seed,
                )
            }
            EstimatorSpec::PhaseSpace { e_s, .. } => {
                let inputs = self.phase_space_inputs(class)?;
                let source =
                    PositivePSource::new(&inputs, &self.unitary, self.config.eta, *e_s, seed)?;
                phase_space_orbits(
                    &source,
                    det,
                    self.grid(class)?,
                    CharOptions::default(),
                    seed,
                )
            }
        }
    }

    /// Classical pattern samples as configured under `classical`.
    pub fn classical_samples(&self) -> Result<ClassicalSampleSet> {
        let spec = self
            .config
            .classical
            .ok_or_else(|| GbsError::InvalidParameter {
                name: "classical".into(),
                reason: "section required for classical sampling".into(),
            })?;
        let n = vec![self.matched_occupation(); self.config.inputs];
        sample_classical_patterns(
            spec.class,
            &n,
            &self.unitary,
            self.config.eta,
            &self.config.detector,
            spec.samples,
            self.config.seeds.sampling,
        )
    }

    /// χ² rows for l = 0, 1, 2 where the classical set has enough support.
    pub fn chi_square_rows(&self) -> Result<Vec<ValidationRow>> {
        let quantum = self.orbit_table(self.config.state, &self.config.detector)?;
        let classical = self.classical_samples()?;
        let min_count = self.config.classical.map_or(10, |c| c.min_count);
        let mut rows = Vec::new();
        for l in 0..=2 {
            match chi_square(&quantum, &classical, l, min_count) {
                Ok(c) => rows.push(ValidationRow {
                    test: "chi2".into(),
                    l: Some(l),
                    statistic: c.chi2,
                    k: Some(c.k),
                    n: Some(c.n),
                    seed: self.config.seeds.sampling,
                }),
                Err(GbsError::EmptySupport(_)) if l > 0 => {}
                Err(e) => return Err(e),
            }
        }
        Ok(rows)
    }

    /// ΔH between the configured state and the `bayes` classical hypothesis.
    pub fn bayes(&self, swap: bool) -> Result<BayesResult> {
        let spec = self
            .config
            .bayes
            .ok_or_else(|| GbsError::InvalidParameter {
                name: "bayes".into(),
                reason: "section required for the Bayesian test".into(),
            })?;
        let det = &self.config.detector;
        let quantum = self.orbit_table(self.config.state, det)?;
        let classical = self.orbit_table(spec.class, det)?;
        bayesian_confidence(
            &quantum,
            &classical,
            spec.draws,
            self.config.seeds.sampling,
            swap,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(estimator: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"modes": 4, "inputs": 2, "r": 0.4, "epsilon": 0.1, "eta": 0.8,
                "detector": {{"kind": "click", "k": 2}}, "estimator": {estimator},
                "classical": {{"class": "thermal", "samples": 20000}},
                "bayes": {{"class": "squashed", "draws": 20000}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn estimators_agree() {
        let exact = Experiment::new(&config(r#"{"method": "exact", "max_clicks": 4}"#)).unwrap();
        let ps = Experiment::new(&config(
            r#"{"method": "phase_space", "e_s": 100000, "grid": "full"}"#,
        ))
        .unwrap();
        let det = DetectorModel::Click { k: 2 };
        let a = exact.orbit_table(StateClass::Squeezed, &det).unwrap();
        let b = ps.orbit_table(StateClass::Squeezed, &det).unwrap();
        for (id, e) in &a.entries {
            let f = b.entries[id];
            assert!(
                (e.probability - f.probability).abs() < 4.0 * f.stderr + 1e-9,
                "{id:?}"
            );
        }
    }

    #[test]
    fn validation_pipelines_run() {
        let exp = Experiment::new(&config(r#"{"method": "exact", "max_clicks": 6}"#)).unwrap();
        let rows = exp.chi_square_rows().unwrap();
        assert!(!rows.is_empty());
        let fwd = exp.bayes(false).unwrap();
        let back = exp.bayes(true).unwrap();
        assert!(fwd.delta_h > 0.0);
        assert!(back.delta_h < 0.0);
    }

    #[test]
    fn direct_estimator_respects_hafnian_limit() {
        let exp = Experiment::new(&config(
            r#"{"method": "direct", "n_s": 10, "max_clicks": 20}"#,
        ))
        .unwrap();
        assert!(matches!(
            exp.orbit_table(StateClass::Squeezed, &DetectorModel::Pnr),
            Err(GbsError::Infeasible(_))
        ));
    }
}
