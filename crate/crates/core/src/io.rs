//! Problem files: one JSON document carrying the control problem, cones, grid,
//! tolerances and seeds, so every run is reproducible from the file alone.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cone::{ConeError, ConePair, OrderingCone};
use crate::control::{ControlError, ControlProblem};
use crate::dp::{DpError, GridConfig, StateGrid};
use crate::oracle::DEFAULT_CAP;

pub const PROBLEM_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema {0} (expected {PROBLEM_SCHEMA})")]
    Schema(u32),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Grid(#[from] DpError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed excess over the a-priori estimates.
    #[serde(default = "estimate_tol")]
    pub estimate: f64,
    /// DP-equation gap; derived from the grid budget when absent.
    #[serde(default)]
    pub dpp: Option<f64>,
    /// Fraction of sampled triples that must satisfy both contingent conditions.
    #[serde(default = "contingent_fraction")]
    pub contingent_fraction: f64,
    #[serde(default = "polarity_tol")]
    pub polarity: f64,
}

fn estimate_tol() -> f64 {
    1e-6
}

fn contingent_fraction() -> f64 {
    0.95
}

fn polarity_tol() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            estimate: estimate_tol(),
            dpp: None,
            contingent_fraction: contingent_fraction(),
            polarity: polarity_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    #[serde(default = "seed_probes")]
    pub probes: u64,
    #[serde(default = "seed_sampling")]
    pub sampling: u64,
}

fn seed_probes() -> u64 {
    1
}

fn seed_sampling() -> u64 {
    2
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            probes: seed_probes(),
            sampling: seed_sampling(),
        }
    }
}

/// Sample sizes for `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default = "hundred")]
    pub estimate_probes: usize,
    #[serde(default = "twenty")]
    pub dpp_nodes: usize,
    #[serde(default = "hundred")]
    pub contingent_triples: usize,
    #[serde(default = "twenty")]
    pub proximal_points: usize,
    #[serde(default = "hundred")]
    pub lipschitz_pairs: usize,
}

fn hundred() -> usize {
    100
}

fn twenty() -> usize {
    20
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            estimate_probes: 100,
            dpp_nodes: 20,
            contingent_triples: 100,
            proximal_points: 20,
            lipschitz_pairs: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub problem: ControlProblem,
    /// Preference cone `P`.
    pub cone: OrderingCone,
    /// Comparison cone `C ⊃ P`, needed by the Lipschitz certificate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_cone: Option<OrderingCone>,
    pub grid: StateGrid,
    pub config: GridConfig,
    pub initial_state: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_cap")]
    pub oracle_cap: u64,
}

fn default_cap() -> u64 {
    DEFAULT_CAP
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        let bytes = fs::read(path).map_err(|source| ProblemError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&bytes)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, ProblemError> {
        let pf: ProblemFile = serde_json::from_slice(bytes)?;
        pf.validate()?;
        Ok(pf)
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.schema != PROBLEM_SCHEMA {
            return Err(ProblemError::Schema(self.schema));
        }
        self.problem.validate()?;
        self.grid.validate()?;
        let invalid = |m: String| Err(ProblemError::Invalid(m));
        if self.grid.dim() != self.problem.state_dim {
            return invalid(format!("grid dimension {} != state dimension {}", self.grid.dim(), self.problem.state_dim));
        }
        if self.cone.dim() != self.problem.cost_dim {
            return invalid(format!("cone dimension {} != cost dimension {}", self.cone.dim(), self.problem.cost_dim));
        }
        if self.initial_state.len() != self.problem.state_dim {
            return invalid("initial_state has the wrong dimension".into());
        }
        if !self.grid.contains(&self.initial_state) {
            return invalid("initial_state lies outside the grid box".into());
        }
        if self.config.steps == 0 || self.config.substeps == 0 {
            return invalid("steps and substeps must be positive".into());
        }
        if !(self.config.front_epsilon >= 0.0) {
            return invalid("front_epsilon must be non-negative".into());
        }
        let t = &self.tolerances;
        if !(t.estimate >= 0.0 && t.polarity >= 0.0 && (0.0..=1.0).contains(&t.contingent_fraction)) || t.dpp.is_some_and(|d| !(d > 0.0)) {
            return invalid("tolerances out of range".into());
        }
        self.cone_pair().transpose()?;
        Ok(())
    }

    pub fn cone_pair(&self) -> Option<Result<ConePair, ConeError>> {
        self.outer_cone.as_ref().map(|c| ConePair::new(self.cone.clone(), c.clone()))
    }

    pub fn step(&self) -> f64 {
        self.problem.horizon / self.config.steps as f64
    }

    /// SHA-256 of the canonical (re-serialized, compact) JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("problem files serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESK: &str = include_str!("../problems/desk1.json");

    #[test]
    fn bundled_desk_parses_and_hash_is_stable() {
        let a = ProblemFile::parse(DESK.as_bytes()).unwrap();
        let again = ProblemFile::parse(&serde_json::to_vec_pretty(&a).unwrap()).unwrap();
        assert_eq!(a.hash(), again.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn schema_and_shape_errors() {
        let mut v: serde_json::Value = serde_json::from_str(DESK).unwrap();
        v["schema"] = 2.into();
        assert!(matches!(ProblemFile::parse(v.to_string().as_bytes()), Err(ProblemError::Schema(2))));

        let mut v: serde_json::Value = serde_json::from_str(DESK).unwrap();
        v["initial_state"] = serde_json::json!([0.0, 0.0]);
        assert!(matches!(ProblemFile::parse(v.to_string().as_bytes()), Err(ProblemError::Invalid(_))));

        let mut v: serde_json::Value = serde_json::from_str(DESK).unwrap();
        v["surprise"] = 1.into();
        assert!(matches!(ProblemFile::parse(v.to_string().as_bytes()), Err(ProblemError::Json(_))));

        assert!(matches!(ProblemFile::parse(b"{not json"), Err(ProblemError::Json(_))));
    }
}
