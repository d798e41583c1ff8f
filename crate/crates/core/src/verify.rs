//! The checks behind `conedp verify`: each takes a problem file (and, where
//! needed, its solved field) and returns a serializable report with a verdict.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cone::ConeError;
use crate::control::{
    check_cost_estimate, check_objective_estimate, check_trajectory_estimate, sequence_count, CloudConfig, ConstantsReport, ControlError,
    ControlSequence, EstimateReport,
};
use crate::dp::{dp_consistency_check, default_dpp_tolerance, DpError, DppReport, ValueField};
use crate::io::ProblemFile;
use crate::pareto::{lipschitz_certificate, perturb_in_class, random_class_cloud, ParetoError};
use crate::tangent::{
    contingent_solution_residual, field_ladder, graph_tangent_estimate, polarity_excess, proximal_residual, ContingentReport, Ladder,
    ProximalConfig, ResidualConfig, TangentError,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Pareto(#[from] ParetoError),
    #[error(transparent)]
    Tangent(#[from] TangentError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("cone C required")]
    NoOuterCone,
    #[error("no interior sample points: the grid box is too small for the residual ladder")]
    NoSamples,
}

/// Sub-box of the grid in which a trajectory of duration `T` cannot leave the grid.
fn safe_box(pf: &ProblemFile, margin: f64) -> Vec<(f64, f64)> {
    pf.grid
        .lower
        .iter()
        .zip(&pf.grid.upper)
        .map(|(&lo, &hi)| {
            if hi - lo > 2.0 * margin {
                (lo + margin, hi - margin)
            } else {
                let c = 0.5 * (lo + hi);
                (c, c)
            }
        })
        .collect()
}

fn sample_in<R: Rng>(b: &[(f64, f64)], rng: &mut R) -> Vec<f64> {
    b.iter()
        .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimatesReport {
    pub constants: ConstantsReport,
    pub trajectory: EstimateReport,
    pub cost: EstimateReport,
    pub objective: EstimateReport,
    pub tolerance: f64,
    pub passed: bool,
}

/// Spot-checks the declared constants, then the trajectory, cost and
/// objective-space estimates on seeded random probes.
pub fn check_estimates(pf: &ProblemFile) -> Result<EstimatesReport, VerifyError> {
    let prob = &pf.problem;
    let h = pf.step();
    let n = pf.config.steps;
    let sub = pf.config.substeps;
    let full: Vec<(f64, f64)> = pf.grid.lower.iter().copied().zip(pf.grid.upper.iter().copied()).collect();
    let constants = prob.validate_constants(&full, pf.budgets.estimate_probes.max(1) * 10, pf.seeds.probes)?;
    let inner = safe_box(pf, prob.constants.m_f * prob.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(pf.seeds.probes);
    let nu = prob.controls.len();
    let mut trajectory = EstimateReport::empty();
    let mut cost = EstimateReport::empty();
    let mut objective = EstimateReport::empty();
    // objective clouds are enumerated, so only start times with few remaining steps qualify
    let min_k = (0..=n).find(|&k| sequence_count(nu, n - k) <= 2000.0).unwrap_or(n);
    for probe in 0..pf.budgets.estimate_probes {
        let x1 = sample_in(&inner, &mut rng);
        let x2 = sample_in(&inner, &mut rng);
        let k1 = rng.gen_range(0..n);
        let seq = ControlSequence::random(nu, n - k1, h, &mut rng);
        trajectory.merge(&check_trajectory_estimate(prob, k1 as f64 * h, &x1, &x2, &seq, sub)?);
        let k2 = rng.gen_range(0..n);
        let long = ControlSequence::random(nu, n - k1.min(k2), h, &mut rng);
        cost.merge(&check_cost_estimate(prob, k1 as f64 * h, k2 as f64 * h, &x1, &x2, &long, sub)?);
        if probe % 5 == 0 {
            let cfg = CloudConfig {
                step: h,
                substeps: sub,
                cap: 2000,
                samples: None,
                seed: pf.seeds.sampling,
            };
            let a = rng.gen_range(min_k..=n);
            let b = rng.gen_range(min_k..=n);
            objective.merge(&check_objective_estimate(prob, (a as f64 * h, &x1), (b as f64 * h, &x2), &cfg)?);
        }
    }
    let tolerance = pf.tolerances.estimate;
    let passed = [&trajectory, &cost, &objective].iter().all(|r| r.max_violation <= tolerance);
    Ok(EstimatesReport {
        constants,
        trajectory,
        cost,
        objective,
        tolerance,
        passed,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DppCheck {
    pub checks: Vec<DppReport>,
    pub worst_gap: f64,
    pub worst_ratio: f64,
    pub passed: bool,
}

/// The dynamic programming equation over `k = min(2, N − i)` steps at the
/// initial node and at seeded random defined nodes.
pub fn check_dpp(pf: &ProblemFile, field: &ValueField) -> Result<DppCheck, VerifyError> {
    let prob = &pf.problem;
    let mut rng = ChaCha8Rng::seed_from_u64(pf.seeds.sampling);
    let oracle = CloudConfig {
        step: pf.step(),
        substeps: pf.config.substeps,
        cap: pf.oracle_cap,
        samples: Some(4096),
        seed: pf.seeds.sampling,
    };
    let tolerance = pf.tolerances.dpp.unwrap_or_else(|| default_dpp_tolerance(prob, &pf.grid, pf.step()));
    let mut points = Vec::new();
    if let Some(node) = pf.grid.nearest(&pf.initial_state) {
        points.push((0, node));
    }
    let n = field.steps();
    let mut attempts = 0;
    while points.len() < pf.budgets.dpp_nodes && attempts < 100 * pf.budgets.dpp_nodes {
        attempts += 1;
        let i = rng.gen_range(0..n);
        let node = rng.gen_range(0..pf.grid.len());
        if field.front(i, node).is_some() && !points.contains(&(i, node)) {
            points.push((i, node));
        }
    }
    let mut checks = Vec::new();
    for (i, node) in points {
        if field.front(i, node).is_none() {
            continue;
        }
        let mut r = dp_consistency_check(field, prob, i, node, 2.min(n - i), &oracle)?;
        r.tolerance = tolerance;
        checks.push(r);
    }
    let worst_gap = checks.iter().map(|r| r.max_gap()).fold(0.0, f64::max);
    Ok(DppCheck {
        passed: checks.iter().all(|r| r.passed()),
        worst_ratio: worst_gap / tolerance,
        worst_gap,
        checks,
    })
}

/// `(i, node)` pairs whose neighbourhood (in time, the residual ladder's
/// reach; in space, the ladder's travel plus one cell diagonal) is defined.
pub fn interior_points(field: &ValueField, pf: &ProblemFile, rungs: usize) -> Vec<(usize, usize)> {
    let ladder = field_ladder(field, rungs);
    let reach = ladder.last().copied().unwrap_or(0.0);
    let span = ((reach / field.step()).round() as usize).max(1);
    let radius = reach * pf.problem.constants.m_f + field.grid().diagonal();
    let grid = field.grid();
    let inner = safe_box(pf, radius);
    let mut out = Vec::new();
    for i in 0..=field.steps() {
        for node in 0..grid.len() {
            let x = grid.node(node);
            if !x.iter().zip(&inner).all(|(v, &(lo, hi))| *v >= lo - 1e-12 && *v <= hi + 1e-12) {
                continue;
            }
            let lo = i.saturating_sub(span);
            let hi = (i + span).min(field.steps());
            let defined = (lo..=hi).all(|j| {
                (0..grid.len()).all(|k| crate::nnls::distance(&grid.node(k), &x) > radius + 1e-12 || field.front(j, k).is_some())
            });
            if defined {
                out.push((i, node));
            }
        }
    }
    out
}

fn sample_triples<R: Rng>(field: &ValueField, pool: &[(usize, usize)], n: usize, rng: &mut R) -> Vec<(usize, usize, usize)> {
    (0..n)
        .map(|_| {
            let (i, node) = pool[rng.gen_range(0..pool.len())];
            let len = field.front(i, node).map_or(1, |f| f.len());
            (i, node, rng.gen_range(0..len))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ContingentCheck {
    pub sampled: usize,
    pub satisfied: usize,
    pub fraction: f64,
    pub required_fraction: f64,
    /// Largest `residual / tolerance` among satisfied triples.
    pub worst_satisfied_ratio: f64,
    /// Every failing triple with its ladder trace.
    pub failures: Vec<ContingentReport>,
    pub passed: bool,
}

/// Both contingent-solution conditions at seeded random interior triples `(t, x, y)`.
pub fn check_contingent(pf: &ProblemFile, field: &ValueField) -> Result<ContingentCheck, VerifyError> {
    let cfg = ResidualConfig::default();
    let pool = interior_points(field, pf, cfg.rungs);
    if pool.is_empty() {
        return Err(VerifyError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(pf.seeds.sampling ^ 0xc0);
    let triples = sample_triples(field, &pool, pf.budgets.contingent_triples, &mut rng);
    let mut satisfied = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (i, node, k) in triples.iter().copied() {
        let r = contingent_solution_residual(field, &pf.problem, i, node, k, &cfg)?;
        if r.ok() {
            satisfied += 1;
            for c in [&r.cond1, &r.cond2].into_iter().flatten() {
                worst = worst.max(c.ratio);
            }
        } else {
            failures.push(r);
        }
    }
    let fraction = satisfied as f64 / triples.len() as f64;
    Ok(ContingentCheck {
        sampled: triples.len(),
        satisfied,
        fraction,
        required_fraction: pf.tolerances.contingent_fraction,
        worst_satisfied_ratio: worst,
        failures,
        passed: fraction >= pf.tolerances.contingent_fraction,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProximalPoint {
    pub time_index: usize,
    pub node: usize,
    pub y: Vec<f64>,
    pub normals: usize,
    /// Normals whose second-nearest sample clears the uniqueness factor.
    pub robust: usize,
    pub ambiguous: usize,
    pub not_nearest: usize,
    pub tangents: usize,
    pub max_residual: Option<f64>,
    pub polarity_excess: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProximalCheck {
    pub points: Vec<ProximalPoint>,
    pub normals: usize,
    pub robust: usize,
    pub max_residual: Option<f64>,
    pub polarity_excess: Option<f64>,
    pub polarity_tolerance: f64,
    /// Worst `gap − budget` of the boundary probes at `t ∈ {0, T}`.
    pub boundary_excess: Option<f64>,
    pub passed: bool,
}

/// Proximal normals at seeded random interior graph points, their proximal
/// equation residuals (reported), and polarity against the sampled-graph
/// tangents (checked); plus boundary probes at `t ∈ {0, T}`.
pub fn check_proximal(pf: &ProblemFile, field: &ValueField) -> Result<ProximalCheck, VerifyError> {
    let pool: Vec<(usize, usize)> = interior_points(field, pf, 1)
        .into_iter()
        .filter(|&(i, _)| i > 0 && i < field.steps())
        .collect();
    if pool.is_empty() {
        return Err(VerifyError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(pf.seeds.sampling ^ 0x9a);
    let cfg = ProximalConfig::default();
    let mut points = Vec::new();
    let mut all_normals = 0;
    let mut robust = 0;
    let mut max_residual: Option<f64> = None;
    let mut excess: Option<f64> = None;
    for (i, node, k) in sample_triples(field, &pool, pf.budgets.proximal_points, &mut rng) {
        let rep = proximal_residual(field, &pf.problem, i, node, k, &cfg)?;
        let tangent = graph_tangent_estimate(field, i, node, k, &Ladder::default(), 256, pf.seeds.probes)?;
        let pe = (!rep.normals.is_empty()).then(|| polarity_excess(&rep.normals, &tangent));
        all_normals += rep.normals.len();
        robust += rep.robust;
        if let Some(r) = rep.max_residual {
            max_residual = Some(max_residual.map_or(r, |m| m.max(r)));
        }
        if let Some(e) = pe {
            excess = Some(excess.map_or(e, |m| m.max(e)));
        }
        points.push(ProximalPoint {
            time_index: i,
            node,
            y: rep.y,
            normals: rep.normals.len(),
            robust: rep.robust,
            ambiguous: rep.ambiguous,
            not_nearest: rep.not_nearest,
            tangents: tangent.count_in(),
            max_residual: rep.max_residual,
            polarity_excess: pe,
        });
    }
    let mut boundary_excess: Option<f64> = None;
    if let Some(node) = pf.grid.nearest(&pf.initial_state) {
        for i in [0, field.steps()] {
            if field.front(i, node).is_some() {
                let rep = proximal_residual(field, &pf.problem, i, node, 0, &cfg)?;
                if let (Some(g), Some(b)) = (rep.boundary_gap, rep.boundary_budget) {
                    boundary_excess = Some(boundary_excess.map_or(g - b, |m| m.max(g - b)));
                }
            }
        }
    }
    let tol = pf.tolerances.polarity;
    Ok(ProximalCheck {
        passed: excess.map_or(true, |e| e <= tol) && boundary_excess.map_or(true, |e| e <= 0.0),
        points,
        normals: all_normals,
        robust,
        max_residual,
        polarity_excess: excess,
        polarity_tolerance: tol,
        boundary_excess,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzCheck {
    pub pairs: usize,
    pub violations: usize,
    pub constant: f64,
    pub max_ratio: f64,
    pub passed: bool,
}

/// `H(E(K₁), E(K₂)) ≤ M(C,P)·H(K₁, K₂)` on seeded random pairs in `K(C,P)`.
pub fn check_lipschitz(pf: &ProblemFile, pairs: usize, points: usize) -> Result<LipschitzCheck, VerifyError> {
    let pair = pf.cone_pair().ok_or(VerifyError::NoOuterCone)??;
    let mut rng = ChaCha8Rng::seed_from_u64(pf.seeds.sampling ^ 0x11);
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    let constant = pair.lipschitz_constant()?;
    for k in 0..pairs {
        let k1 = random_class_cloud(&pair, points, &mut rng);
        let sigma = [0.002, 0.02, 0.1][k % 3];
        let k2 = perturb_in_class(&k1, &pair, sigma, &mut rng);
        let r = lipschitz_certificate(&k1, &k2, &pair)?;
        if !r.satisfied {
            violations += 1;
        }
        max_ratio = max_ratio.max(r.ratio());
    }
    Ok(LipschitzCheck {
        pairs,
        violations,
        constant,
        max_ratio,
        passed: violations == 0,
    })
}
