//! Brute-force ground truth: every control sequence evaluated independently,
//! and the classical scalar DP for single-objective problems.
//!
//! The enumeration deliberately does no pruning or prefix sharing. It uses the
//! same one-step integrator as the solver, so any disagreement points at the
//! recursion rather than at quadrature.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cone::OrderingCone;
use crate::control::{sequence_count, ControlError, ControlProblem};
use crate::dp::{GridConfig, Interpolation, StateGrid};
use crate::pareto::{minimal_elements, ParetoFront, PointCloud};

pub const DEFAULT_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("{count} control sequences exceed the enumeration cap {cap}")]
    CapExceeded { count: f64, cap: u64 },
    #[error("sequence {sequence:?} leaves the state box at x = {x:?}")]
    Escape { sequence: Vec<usize>, x: Vec<f64> },
    #[error("scalar DP needs a single objective, got cost dimension {0}")]
    NotScalar(usize),
    #[error("grid dimension {grid} does not match state dimension {state}")]
    GridDimension { grid: usize, state: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct EnumerationResult {
    /// `|U|^steps`.
    pub count: u64,
    pub cloud: PointCloud,
    #[serde(serialize_with = "serialize_front")]
    pub front: ParetoFront,
}

fn serialize_front<S: serde::Serializer>(f: &ParetoFront, s: S) -> Result<S::Ok, S::Error> {
    f.points().serialize(s)
}

/// Decodes sequence number `k` into base-`|U|` digits, first interval first.
fn decode(mut k: u64, base: usize, len: usize) -> Vec<usize> {
    let mut digits = vec![0; len];
    for d in digits.iter_mut().rev() {
        *d = (k % base as u64) as usize;
        k /= base as u64;
    }
    digits
}

/// Exact discrete front at `(t, x)` over all `|U|^steps` sequences.
///
/// With `landing`, the state is replaced by its nearest lattice node after each
/// interval, mirroring the solver's nearest-node mode; a sequence leaving the
/// box is an error.
pub fn enumerate_front(
    prob: &ControlProblem,
    cone: &OrderingCone,
    t: f64,
    x: &[f64],
    grid: &GridConfig,
    landing: Option<&StateGrid>,
    cap: u64,
) -> Result<EnumerationResult, OracleError> {
    prob.validate()?;
    let h = prob.horizon / grid.steps as f64;
    let steps = prob.steps_remaining(t, h)?;
    let nu = prob.controls.len();
    let total = sequence_count(nu, steps);
    if total > cap as f64 {
        return Err(OracleError::CapExceeded { count: total, cap });
    }
    let count = total as u64;
    let start = match landing {
        Some(g) => g.node(g.nearest(x).ok_or_else(|| OracleError::Escape {
            sequence: vec![],
            x: x.to_vec(),
        })?),
        None => x.to_vec(),
    };
    let costs: Result<Vec<Vec<f64>>, OracleError> = (0..count)
        .into_par_iter()
        .map(|k| {
            let seq = decode(k, nu, steps);
            let mut state = start.clone();
            let mut cost = vec![0.0; prob.cost_dim];
            for &u in &seq {
                let (nx, c) = prob.step(&state, &prob.controls[u], h, grid.substeps)?;
                for (a, b) in cost.iter_mut().zip(&c) {
                    *a += b;
                }
                state = match landing {
                    Some(g) => match g.nearest(&nx) {
                        Some(n) => g.node(n),
                        None => {
                            return Err(OracleError::Escape {
                                sequence: seq.clone(),
                                x: nx,
                            })
                        }
                    },
                    None => nx,
                };
            }
            Ok(cost)
        })
        .collect();
    let cloud = PointCloud::new(prob.cost_dim, costs?).expect("finite costs");
    let front = minimal_elements(&cloud, cone).expect("cloud is nonempty and dimensions agree");
    Ok(EnumerationResult { count, cloud, front })
}

/// Scalar value table `v[i][node]`; `None` where some sequence leaves the box.
#[derive(Clone, Debug, Serialize)]
pub struct ScalarTable {
    pub values: Vec<Vec<Option<f64>>>,
}

/// Backward value iteration `v(t_i, x) = min_u { J(t_i, t_i+h, x, u) + v(t_{i+1}, x_u) }`
/// on the solver's lattice and interpolation rule.
pub fn scalar_dp(prob: &ControlProblem, grid: &StateGrid, cfg: &GridConfig) -> Result<ScalarTable, OracleError> {
    prob.validate()?;
    if prob.cost_dim != 1 {
        return Err(OracleError::NotScalar(prob.cost_dim));
    }
    if grid.dim() != prob.state_dim {
        return Err(OracleError::GridDimension {
            grid: grid.dim(),
            state: prob.state_dim,
        });
    }
    let h = prob.horizon / cfg.steps as f64;
    let mut values = vec![Vec::new(); cfg.steps + 1];
    values[cfg.steps] = vec![Some(0.0); grid.len()];
    for i in (0..cfg.steps).rev() {
        let next = &values[i + 1];
        let slice: Result<Vec<Option<f64>>, OracleError> = (0..grid.len())
            .into_par_iter()
            .map(|j| {
                let x = grid.node(j);
                let mut best = f64::INFINITY;
                for u in &prob.controls {
                    let (nx, c) = prob.step(&x, u, h, cfg.substeps)?;
                    let landed = match cfg.interpolation {
                        Interpolation::Nearest => grid.nearest(&nx).and_then(|k| next[k]),
                        Interpolation::CornerUnion => grid.corners(&nx).and_then(|ks| {
                            ks.iter()
                                .map(|&k| next[k])
                                .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
                        }),
                    };
                    match landed {
                        Some(v) => best = best.min(c[0] + v),
                        None => return Ok(None),
                    }
                }
                Ok(Some(best))
            })
            .collect();
        values[i] = slice?;
    }
    Ok(ScalarTable { values })
}
