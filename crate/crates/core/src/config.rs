//! JSON experiment description consumed by the command-line runner.

use crate::detectors::DetectorModel;
use crate::error::{invalid as field, GbsError, Result};
use crate::orbits::Grid;
use crate::sampling::StateClass;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Interferometer modes M.
    pub modes: usize,
    /// Occupied input modes M′.
    pub inputs: usize,
    /// Squeezing parameter per input; exclusive with `n_ph`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Target total photon number after loss; exclusive with `r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ph: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
    pub eta: f64,
    /// Input family of the state under test.
    #[serde(default = "default_class")]
    pub state: StateClass,
    pub detector: DetectorModel,
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bayes: Option<BayesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_class() -> StateClass {
    StateClass::Squeezed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Exhaustive enumeration of every pattern up to `max_clicks` clicks.
    Exact { max_clicks: usize },
    /// Uniform pattern sampling inside each orbit.
    Direct { n_s: usize, max_clicks: usize },
    /// Positive-P characteristic function and inverse DFT.
    PhaseSpace {
        e_s: usize,
        #[serde(default)]
        grid: GridSpec,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// Folding chosen from the photon-number surrogate.
    #[default]
    Auto,
    Full,
    Folded {
        d: usize,
        j: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub unitary: u64,
    pub sampling: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            unitary: 1,
            sampling: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSpec {
    /// Classical input family, thermal or squashed, with matched photon numbers.
    pub class: StateClass,
    pub samples: usize,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
}

fn default_min_count() -> u64 {
    10
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesSpec {
    /// Classical hypothesis: thermal or squashed inputs, same estimator.
    pub class: StateClass,
    pub draws: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            GbsError::Format(format!(
                "config line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("config serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(field("modes", "must be positive"));
        }
        if self.inputs == 0 || self.inputs > self.modes {
            return Err(field("inputs", format!("must lie in 1..={}", self.modes)));
        }
        match (self.r, self.n_ph) {
            (Some(_), Some(_)) => return Err(field("r", "give exactly one of r and n_ph")),
            (None, None) => return Err(field("n_ph", "give exactly one of r and n_ph")),
            (Some(r), None) if !(r >= 0.0 && r.is_finite()) => {
                return Err(field(
                    "r",
                    format!("must be finite and non-negative, got {r}"),
                ))
            }
            (None, Some(n)) if !(n >= 0.0 && n.is_finite()) => {
                return Err(field(
                    "n_ph",
                    format!("must be finite and non-negative, got {n}"),
                ))
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(field("epsilon", "must lie in [0, 1]"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(field("eta", "must lie in (0, 1]"));
        }
        self.detector
            .validate()
            .map_err(|e| field("detector", e.to_string()))?;
        match &self.estimator {
            EstimatorSpec::Exact { .. } => {}
            EstimatorSpec::Direct { n_s, .. } if *n_s == 0 => {
                return Err(field("estimator.n_s", "must be positive"))
            }
            EstimatorSpec::PhaseSpace { e_s, grid } => {
                if *e_s < 2 {
                    return Err(field("estimator.e_s", "must be at least 2"));
                }
                if let GridSpec::Folded { d, j } = grid {
                    if *d == 0 || *d > self.modes || *j == 0 {
                        return Err(field("estimator.grid", "need 1 ≤ d ≤ modes and j ≥ 1"));
                    }
                }
            }
            _ => {}
        }
        if let Some(c) = &self.classical {
            if c.class == StateClass::Squeezed {
                return Err(field("classical.class", "must be thermal or squashed"));
            }
            if c.samples == 0 {
                return Err(field("classical.samples", "must be positive"));
            }
        }
        if let Some(b) = &self.bayes {
            if b.class == StateClass::Squeezed {
                return Err(field("bayes.class", "must be thermal or squashed"));
            }
            if b.draws < 2 {
                return Err(field("bayes.draws", "must be at least 2"));
            }
        }
        if self.threads == Some(0) {
            return Err(field("threads", "must be positive"));
        }
        Ok(())
    }

    /// Per-input squeezing r, solved from `n_ph` when needed.
    pub fn squeezing(&self) -> Result<f64> {
        match (self.r, self.n_ph) {
            (Some(r), _) => Ok(r),
            (None, Some(n)) => crate::gaussian::solve_squeezing(n, self.inputs, self.eta),
            _ => Err(field("n_ph", "give exactly one of r and n_ph")),
        }
    }

    /// The estimator grid, resolved against the folding rule for `Auto`.
    pub fn grid_spec(&self) -> Option<&GridSpec> {
        match &self.estimator {
            EstimatorSpec::PhaseSpace { grid, .. } => Some(grid),
            _ => None,
        }
    }
}

impl From<&GridSpec> for Option<Grid> {
    fn from(g: &GridSpec) -> Self {
        match *g {
            GridSpec::Auto => None,
            GridSpec::Full => Some(Grid::Full),
            GridSpec::Folded { d, j } => Some(Grid::Folded { d, j }),
        }
    }
}
