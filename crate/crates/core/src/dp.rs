//! Backward set-valued dynamic programming on a time/state lattice, plus the
//! consistency and semicontinuity probes that compare the computed field with
//! direct enumeration.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{ConeError, OrderingCone};
use crate::control::{objective_cloud, CloudConfig, ControlError, ControlProblem};
use crate::nnls::{add, distance, dot, norm, scale, sub};
use crate::pareto::{
    directed_hausdorff, format_row, hausdorff_points, minimal_points, upper_set_distance,
    ParetoFront, PointCloud,
};

#[derive(Debug, Error)]
pub enum DpError {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("value undefined at t = {t}, x = {x:?}: some control sequence leaves the state box")]
    Undefined { t: f64, x: Vec<f64> },
    #[error("malformed field export: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Rectangular lattice over a box; the last coordinate varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
}

/// States within this fraction of the box size outside the box still count as inside.
const BOX_SLACK: f64 = 1e-9;

impl StateGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, nodes: Vec<usize>) -> Result<Self, DpError> {
        let g = Self { lower, upper, nodes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), DpError> {
        let n = self.lower.len();
        if n == 0 || self.upper.len() != n || self.nodes.len() != n {
            return Err(DpError::Grid("lower, upper and nodes must have equal nonzero length".into()));
        }
        for i in 0..n {
            let (lo, hi, k) = (self.lower[i], self.upper[i], self.nodes[i]);
            if !(lo.is_finite() && hi.is_finite()) || k == 0 {
                return Err(DpError::Grid(format!("axis {i}: bad bounds or zero nodes")));
            }
            if (k == 1) != (lo == hi) || hi < lo {
                return Err(DpError::Grid(format!(
                    "axis {i}: a single node needs lower == upper, more nodes need lower < upper"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        if self.nodes[axis] <= 1 {
            0.0
        } else {
            (self.upper[axis] - self.lower[axis]) / (self.nodes[axis] - 1) as f64
        }
    }

    /// Euclidean length of a cell diagonal.
    pub fn diagonal(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest axis spacing.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    fn coord(&self, axis: usize, k: usize) -> f64 {
        let n = self.nodes[axis];
        if n <= 1 {
            self.lower[axis]
        } else {
            self.lower[axis] + (self.upper[axis] - self.lower[axis]) * k as f64 / (n - 1) as f64
        }
    }

    pub fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = index % self.nodes[a];
            index /= self.nodes[a];
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.nodes)
            .fold(0, |acc, (&k, &n)| acc * n + k)
    }

    pub fn node(&self, index: usize) -> Vec<f64> {
        self.multi_index(index)
            .iter()
            .enumerate()
            .map(|(a, &k)| self.coord(a, k))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(a, &v)| {
            let tol = BOX_SLACK * (self.upper[a] - self.lower[a]).max(1.0);
            v >= self.lower[a] - tol && v <= self.upper[a] + tol
        })
    }

    /// Fractional lattice position of `x` along each axis, `None` outside the box.
    fn position(&self, x: &[f64]) -> Option<Vec<f64>> {
        if x.len() != self.dim() || !self.contains(x) {
            return None;
        }
        Some(
            (0..self.dim())
                .map(|a| {
                    let d = self.spacing(a);
                    if d == 0.0 {
                        0.0
                    } else {
                        ((x[a] - self.lower[a]) / d).clamp(0.0, (self.nodes[a] - 1) as f64)
                    }
                })
                .collect(),
        )
    }

    /// Nearest lattice node; ties round away from the lower corner.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let pos = self.position(x)?;
        let multi: Vec<usize> = pos.iter().map(|p| p.round() as usize).collect();
        Some(self.flat_index(&multi))
    }

    /// Corners of the cell containing `x`; axes where `x` sits on a node contribute one index.
    pub fn corners(&self, x: &[f64]) -> Option<Vec<usize>> {
        let pos = self.position(x)?;
        let mut axes: Vec<Vec<usize>> = Vec::with_capacity(pos.len());
        for (a, &p) in pos.iter().enumerate() {
            let r = p.round();
            if (p - r).abs() <= 1e-9 {
                axes.push(vec![r as usize]);
            } else {
                let lo = p.floor() as usize;
                axes.push(vec![lo, (lo + 1).min(self.nodes[a] - 1)]);
            }
        }
        let mut out = vec![Vec::new()];
        for choices in axes {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    choices.iter().map(move |&c| {
                        let mut p = prefix.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        Some(out.iter().map(|m| self.flat_index(m)).collect())
    }

    /// Lattice neighbours differing by one step along a single axis.
    pub fn neighbours(&self, index: usize) -> Vec<usize> {
        let m = self.multi_index(index);
        let mut out = Vec::new();
        for a in 0..self.dim() {
            for delta in [-1i64, 1] {
                let k = m[a] as i64 + delta;
                if k >= 0 && (k as usize) < self.nodes[a] {
                    let mut n = m.clone();
                    n[a] = k as usize;
                    out.push(self.flat_index(&n));
                }
            }
        }
        out
    }
}

/// How a value at an off-lattice landing state is read from the next slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Front of the nearest node.
    Nearest,
    /// Minimal elements of the union of the cell-corner fronts.
    CornerUnion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Number of time steps `N`; the step is `T / N`.
    pub steps: usize,
    /// RK4 substeps per time step.
    #[serde(default = "one")]
    pub substeps: usize,
    #[serde(default = "nearest")]
    pub interpolation: Interpolation,
    /// ε of the ε-dominance archive used to thin fronts; 0 keeps every minimal point.
    #[serde(default)]
    pub front_epsilon: f64,
}

fn one() -> usize {
    1
}

fn nearest() -> Interpolation {
    Interpolation::Nearest
}

impl GridConfig {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            substeps: 1,
            interpolation: Interpolation::Nearest,
            front_epsilon: 0.0,
        }
    }
}

/// Fronts `V(t_i, x_j)` on the lattice. `None` marks nodes from which some
/// control sequence leaves the state box.
#[derive(Clone, Debug)]
pub struct ValueField {
    cone: OrderingCone,
    grid: StateGrid,
    config: GridConfig,
    horizon: f64,
    fronts: Vec<Vec<Option<ParetoFront>>>,
}

/// Two points of one stored front that are comparable under the cone.
#[derive(Clone, Debug, Serialize)]
pub struct AntichainWitness {
    pub time_index: usize,
    pub node: usize,
    pub dominated: Vec<f64>,
    pub dominating: Vec<f64>,
}

impl ValueField {
    pub fn cone(&self) -> &OrderingCone {
        &self.cone
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.config.steps
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.config.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.config.steps as f64
    }

    pub fn front(&self, i: usize, node: usize) -> Option<&ParetoFront> {
        self.fronts.get(i)?.get(node)?.as_ref()
    }

    /// Front at a lattice node, or the `Undefined` error naming its coordinates.
    pub fn front_checked(&self, i: usize, node: usize) -> Result<&ParetoFront, DpError> {
        self.front(i, node).ok_or_else(|| DpError::Undefined {
            t: self.time(i),
            x: self.grid.node(node),
        })
    }

    /// Front of the node nearest to `x` at slice `i`.
    pub fn front_at(&self, i: usize, x: &[f64]) -> Result<&ParetoFront, DpError> {
        let node = self.grid.nearest(x).ok_or_else(|| DpError::Undefined {
            t: self.time(i),
            x: x.to_vec(),
        })?;
        self.front_checked(i, node)
    }

    pub fn slice(&self, i: usize) -> &[Option<ParetoFront>] {
        &self.fronts[i]
    }

    pub fn defined_nodes(&self, i: usize) -> usize {
        self.fronts[i].iter().filter(|f| f.is_some()).count()
    }

    /// First stored front containing two comparable points.
    pub fn antichain_witness(&self) -> Option<AntichainWitness> {
        for (i, slice) in self.fronts.iter().enumerate() {
            for (node, f) in slice.iter().enumerate() {
                if let Some(f) = f {
                    if let Some((a, b)) = f.antichain_violation() {
                        return Some(AntichainWitness {
                            time_index: i,
                            node,
                            dominated: f.points()[a].clone(),
                            dominating: f.points()[b].clone(),
                        });
                    }
                }
            }
        }
        None
    }

    /// Landing front used by the recursion at slice `i`.
    fn landing_points(&self, i: usize, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        match self.config.interpolation {
            Interpolation::Nearest => {
                let k = self.grid.nearest(x)?;
                self.fronts[i][k].as_ref().map(|f| f.points().to_vec())
            }
            Interpolation::CornerUnion => {
                let mut pts = Vec::new();
                for k in self.grid.corners(x)? {
                    pts.extend_from_slice(self.fronts[i][k].as_ref()?.points());
                }
                Some(pts)
            }
        }
    }
}

fn check_inputs(prob: &ControlProblem, cone: &OrderingCone, grid: &StateGrid, cfg: &GridConfig) -> Result<(), DpError> {
    prob.validate()?;
    grid.validate()?;
    if grid.dim() != prob.state_dim {
        return Err(DpError::Grid(format!(
            "grid dimension {} does not match state dimension {}",
            grid.dim(),
            prob.state_dim
        )));
    }
    if cone.dim() != prob.cost_dim {
        return Err(ConeError::DimensionMismatch {
            expected: prob.cost_dim,
            got: cone.dim(),
        }
        .into());
    }
    if cfg.steps == 0 || cfg.substeps == 0 {
        return Err(DpError::Grid("steps and substeps must be positive".into()));
    }
    if !(cfg.front_epsilon.is_finite() && cfg.front_epsilon >= 0.0) {
        return Err(DpError::Grid("front_epsilon must be non-negative".into()));
    }
    Ok(())
}

/// Greedy ε-dominance thinning: a point is dropped when a kept point is
/// within `ε` of dominating it along the cone's deep direction.
fn epsilon_archive(points: Vec<Vec<f64>>, cone: &OrderingCone, eps: f64) -> Vec<Vec<f64>> {
    if eps <= 0.0 || points.len() <= 1 {
        return points;
    }
    let key = cone.key();
    let shift = scale(key, eps / norm(key));
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| dot(key, &points[a]).total_cmp(&dot(key, &points[b])).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let lifted = add(&points[i], &shift);
        if !kept
            .iter()
            .any(|&k| cone.contains_h(&sub(&lifted, &points[k]), 1e-9))
        {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.into_iter().map(|i| points[i].clone()).collect()
}

/// `E(candidates, P)` with canonical ordering; `cl` is a no-op on finite sets.
fn minimal_front(cone: &OrderingCone, dim: usize, candidates: Vec<Vec<f64>>, eps: f64) -> ParetoFront {
    let cloud = PointCloud::new(dim, candidates).expect("finite candidates");
    let pts = epsilon_archive(minimal_points(cloud.points(), cone), cone, eps);
    ParetoFront::from_minimal(cone, pts)
}

/// Solves `V(t,x) = E({J(t,t+h,x,u) + V(t+h, x_u)}, P)` backward from `V(T,·) = {0}`.
pub fn backward_solve(
    prob: &ControlProblem,
    cone: &OrderingCone,
    grid: &StateGrid,
    cfg: &GridConfig,
) -> Result<ValueField, DpError> {
    check_inputs(prob, cone, grid, cfg)?;
    let p = prob.cost_dim;
    let terminal = ParetoFront::from_minimal(cone, vec![vec![0.0; p]]);
    let mut field = ValueField {
        cone: cone.clone(),
        grid: grid.clone(),
        config: *cfg,
        horizon: prob.horizon,
        fronts: vec![Vec::new(); cfg.steps + 1],
    };
    field.fronts[cfg.steps] = vec![Some(terminal); grid.len()];
    let h = field.step();
    for i in (0..cfg.steps).rev() {
        let slice: Result<Vec<Option<ParetoFront>>, DpError> = (0..grid.len())
            .into_par_iter()
            .map(|j| backup(prob, &field, i, j, h))
            .collect();
        field.fronts[i] = slice?;
    }
    Ok(field)
}

fn backup(prob: &ControlProblem, field: &ValueField, i: usize, j: usize, h: f64) -> Result<Option<ParetoFront>, DpError> {
    let x = field.grid.node(j);
    let mut candidates = Vec::new();
    for u in &prob.controls {
        let (landed, cost) = prob.step(&x, u, h, field.config.substeps)?;
        let Some(next) = field.landing_points(i + 1, &landed) else {
            return Ok(None);
        };
        candidates.extend(next.iter().map(|y| add(&cost, y)));
    }
    Ok(Some(minimal_front(&field.cone, prob.cost_dim, candidates, field.config.front_epsilon)))
}

/// `10·δ·(K_L/K_f)e^{K_f T} + 10·h·M_L`.
pub fn default_dpp_tolerance(prob: &ControlProblem, grid: &StateGrid, step: f64) -> f64 {
    let c = prob.constants;
    10.0 * grid.max_spacing() * c.cost_sensitivity(prob.horizon) + 10.0 * step * c.m_l
}

/// Gaps between the `k`-step composite candidate set `Ỹ` and the objective cloud `Y`.
#[derive(Clone, Debug, Serialize)]
pub struct DppReport {
    pub time_index: usize,
    pub node: usize,
    pub k_steps: usize,
    /// `sup_{c ∈ Ỹ} d(c, Y)`; only defined when `Y` is enumerated exhaustively.
    pub gap_candidates_in_cloud: Option<f64>,
    /// `sup_{y ∈ Y} d(y, Ỹ + P)`.
    pub gap_cloud_in_candidates: f64,
    /// `H(E(Ỹ), E(Y))`; only defined when `Y` is exhaustive.
    pub front_gap: Option<f64>,
    pub tolerance: f64,
    pub oracle_exhaustive: bool,
    pub oracle_count: u64,
}

impl DppReport {
    pub fn max_gap(&self) -> f64 {
        self.gap_candidates_in_cloud
            .unwrap_or(0.0)
            .max(self.gap_cloud_in_candidates)
            .max(self.front_gap.unwrap_or(0.0))
    }

    pub fn passed(&self) -> bool {
        self.max_gap() <= self.tolerance
    }
}

/// Compares `Ỹ(kh, t, x) = {J(t, t+kh, x, σ) + V(t+kh, x_σ)}` — controls
/// integrated without intermediate snapping, the landing front read with the
/// field's interpolation — against the directly enumerated objective cloud.
pub fn dp_consistency_check(
    field: &ValueField,
    prob: &ControlProblem,
    i: usize,
    node: usize,
    k: usize,
    oracle: &CloudConfig,
) -> Result<DppReport, DpError> {
    if i + k > field.steps() {
        return Err(DpError::Grid(format!("t_{i} + {k} steps is past the horizon")));
    }
    field.front_checked(i, node)?;
    let h = field.step();
    let x = field.grid.node(node);
    let p = prob.cost_dim;

    let mut candidates = Vec::new();
    let mut stack: Vec<(Vec<f64>, Vec<f64>, usize)> = vec![(x.clone(), vec![0.0; p], 0)];
    while let Some((xs, cost, depth)) = stack.pop() {
        if depth == k {
            let next = field.landing_points(i + k, &xs).ok_or_else(|| DpError::Undefined {
                t: field.time(i + k),
                x: xs.clone(),
            })?;
            candidates.extend(next.iter().map(|y| add(&cost, y)));
            continue;
        }
        for u in prob.controls.iter().rev() {
            let (nx, c) = prob.step(&xs, u, h, field.config.substeps)?;
            stack.push((nx, add(&cost, &c), depth + 1));
        }
    }
    let candidates = PointCloud::new(p, candidates).expect("finite candidates");

    let cfg = CloudConfig {
        step: h,
        substeps: field.config.substeps,
        ..*oracle
    };
    let y = objective_cloud(prob, field.time(i), &x, &cfg)?;
    let cone = &field.cone;
    let gap_b = y
        .cloud
        .points()
        .par_iter()
        .map(|q| upper_set_distance(candidates.points(), cone, q))
        .reduce(|| 0.0, f64::max);
    let (gap_a, front_gap) = if y.exhaustive {
        let ea = minimal_points(candidates.points(), cone);
        let eb = minimal_points(y.cloud.points(), cone);
        (
            Some(directed_hausdorff(candidates.points(), y.cloud.points())),
            Some(hausdorff_points(&ea, &eb).expect("nonempty fronts")),
        )
    } else {
        (None, None)
    };
    Ok(DppReport {
        time_index: i,
        node,
        k_steps: k,
        gap_candidates_in_cloud: gap_a,
        gap_cloud_in_candidates: gap_b,
        front_gap,
        tolerance: default_dpp_tolerance(prob, &field.grid, h),
        oracle_exhaustive: y.exhaustive,
        oracle_count: y.count,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NeighbourGap {
    pub time_index: usize,
    pub node: usize,
    pub distance: f64,
    /// `sup_{y' ∈ V(t',x')} d(y', V(t,x) + P)`.
    pub gap: f64,
    /// Objective-space estimate for the pair of nodes.
    pub budget: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SemicontinuityReport {
    pub time_index: usize,
    pub node: usize,
    pub neighbours: Vec<NeighbourGap>,
    pub max_gap: f64,
    pub max_budget: f64,
}

/// Probes `V(t,x) + P` against the fronts of adjacent lattice nodes (same and next slice).
pub fn outer_semicontinuity_probe(
    field: &ValueField,
    prob: &ControlProblem,
    i: usize,
    node: usize,
) -> Result<SemicontinuityReport, DpError> {
    let base = field.front_checked(i, node)?;
    let x = field.grid.node(node);
    let c = prob.constants;
    let mut spots: Vec<(usize, usize)> = field.grid.neighbours(node).into_iter().map(|n| (i, n)).collect();
    if i + 1 <= field.steps() {
        spots.push((i + 1, node));
    }
    if i > 0 {
        spots.push((i - 1, node));
    }
    let mut neighbours = Vec::new();
    for (ti, n) in spots {
        let Some(f) = field.front(ti, n) else { continue };
        let xn = field.grid.node(n);
        let dt = (field.time(ti) - field.time(i)).abs();
        let gap = f
            .points()
            .iter()
            .map(|y| base.upper_set_distance(y))
            .fold(0.0, f64::max);
        neighbours.push(NeighbourGap {
            time_index: ti,
            node: n,
            distance: distance(&x, &xn).hypot(dt),
            gap,
            budget: c.cost_sensitivity(prob.horizon) * distance(&x, &xn) + c.m_l * dt,
        });
    }
    let max_gap = neighbours.iter().map(|n| n.gap).fold(0.0, f64::max);
    let max_budget = neighbours.iter().map(|n| n.budget).fold(0.0, f64::max);
    Ok(SemicontinuityReport {
        time_index: i,
        node,
        neighbours,
        max_gap,
        max_budget,
    })
}

pub const MANIFEST_SCHEMA: u32 = 1;

/// Describes an exported field directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub problem_hash: String,
    pub horizon: f64,
    pub cost_dim: usize,
    pub grid: StateGrid,
    pub config: GridConfig,
    pub cone: OrderingCone,
    pub slices: Vec<String>,
}

pub fn slice_file_name(i: usize) -> String {
    format!("slice_{i:04}.csv")
}

/// Writes one CSV per time slice (`node,y_1,…,y_p` per front point; undefined
/// nodes have no rows) and `manifest.json`.
pub fn export_field(field: &ValueField, dir: &Path, problem_hash: &str) -> Result<Manifest, DpError> {
    fs::create_dir_all(dir)?;
    let mut slices = Vec::new();
    for (i, slice) in field.fronts.iter().enumerate() {
        let name = slice_file_name(i);
        let mut w = BufWriter::new(fs::File::create(dir.join(&name))?);
        for (node, f) in slice.iter().enumerate() {
            if let Some(f) = f {
                for y in f.points() {
                    writeln!(w, "{node},{}", format_row(y))?;
                }
            }
        }
        w.flush()?;
        slices.push(name);
    }
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        problem_hash: problem_hash.into(),
        horizon: field.horizon,
        cost_dim: field.cone.dim(),
        grid: field.grid.clone(),
        config: field.config,
        cone: field.cone.clone(),
        slices,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DpError> {
    let m: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if m.schema != MANIFEST_SCHEMA {
        return Err(DpError::Format(format!("unsupported manifest schema {}", m.schema)));
    }
    m.grid.validate()?;
    if m.slices.len() != m.config.steps + 1 {
        return Err(DpError::Format("slice count does not match the step count".into()));
    }
    Ok(m)
}

/// Reads an exported field. Fronts are taken as stored; use
/// [`ValueField::antichain_witness`] to validate them.
pub fn import_field(dir: &Path) -> Result<(ValueField, Manifest), DpError> {
    let m = read_manifest(dir)?;
    let n_nodes = m.grid.len();
    let mut fronts = Vec::with_capacity(m.slices.len());
    for name in &m.slices {
        let file = BufReader::new(fs::File::open(dir.join(name))?);
        let mut pts: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n_nodes];
        for (ln, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| DpError::Format(format!("{name}:{}: {msg}", ln + 1));
            let mut it = line.split(',');
            let node: usize = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad("bad node index"))?;
            if node >= n_nodes {
                return Err(bad("node index out of range"));
            }
            let y: Vec<f64> = it
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad("bad coordinate"))?;
            if y.len() != m.cost_dim || y.iter().any(|v| !v.is_finite()) {
                return Err(bad("bad point"));
            }
            pts[node].push(y);
        }
        fronts.push(
            pts.into_iter()
                .map(|p| (!p.is_empty()).then(|| ParetoFront::from_minimal(&m.cone, p)))
                .collect(),
        );
    }
    let field = ValueField {
        cone: m.cone.clone(),
        grid: m.grid.clone(),
        config: m.config,
        horizon: m.horizon,
        fronts,
    };
    Ok((field, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{Constants, Term, VectorField};

    fn desk(p2: bool) -> ControlProblem {
        let sq = |x: u32, u: u32| Term {
            coef: 1.0,
            x_pow: vec![x],
            u_pow: vec![u],
            trig: None,
        };
        let components = if p2 {
            vec![vec![sq(0, 2)], vec![sq(2, 0)]]
        } else {
            vec![vec![sq(0, 2), sq(2, 0)]]
        };
        ControlProblem {
            state_dim: 1,
            cost_dim: components.len(),
            control_dim: 1,
            horizon: 0.4,
            dynamics: VectorField::Linear {
                a: vec![],
                b: vec![vec![1.0]],
                c: vec![],
            },
            running_cost: VectorField::Terms { components },
            controls: vec![vec![-1.0], vec![0.0], vec![1.0]],
            constants: Constants {
                k_f: 0.1,
                m_f: 1.0,
                k_l: 4.0,
                m_l: 5.0,
            },
        }
    }

    fn grid() -> StateGrid {
        StateGrid::new(vec![-2.0], vec![2.0], vec![41]).unwrap()
    }

    #[test]
    fn grid_indexing() {
        let g = StateGrid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![3, 5]).unwrap();
        assert_eq!(g.len(), 15);
        for k in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(k)), k);
        }
        assert_eq!(g.node(7), vec![0.5, 0.0]);
        assert_eq!(g.nearest(&[0.74, 0.26]), Some(g.flat_index(&[1, 3])));
        assert_eq!(g.nearest(&[1.2, 0.0]), None);
        assert_eq!(g.corners(&[0.5, 0.25]).unwrap().len(), 2);
        assert_eq!(g.corners(&[0.25, 0.25]).unwrap().len(), 4);
        assert_eq!(g.neighbours(0).len(), 2);
        assert!(StateGrid::new(vec![0.0], vec![1.0], vec![1]).is_err());
    }

    #[test]
    fn terminal_slice_is_origin() {
        let f = backward_solve(&desk(true), &OrderingCone::orthant(2), &grid(), &GridConfig::new(2)).unwrap();
        for j in 0..grid().len() {
            assert_eq!(f.front(2, j).unwrap().points(), &[vec![0.0, 0.0]]);
        }
        assert!(f.antichain_witness().is_none());
    }

    #[test]
    fn one_step_matches_direct_minimal_elements() {
        let mut prob = desk(true);
        prob.horizon = 0.2;
        let cone = OrderingCone::orthant(2);
        let f = backward_solve(&prob, &cone, &grid(), &GridConfig::new(1)).unwrap();
        let node = grid().nearest(&[0.5]).unwrap();
        let x = grid().node(node);
        let direct: Vec<Vec<f64>> = prob
            .controls
            .iter()
            .map(|u| prob.step(&x, u, 0.2, 1).unwrap().1)
            .collect();
        let e = crate::pareto::minimal_elements(&PointCloud::new(2, direct).unwrap(), &cone).unwrap();
        assert_eq!(f.front(0, node).unwrap().points(), e.points());
    }

    #[test]
    fn escape_marks_nodes_undefined() {
        let g = StateGrid::new(vec![-0.5], vec![0.5], vec![11]).unwrap();
        let f = backward_solve(&desk(true), &OrderingCone::orthant(2), &g, &GridConfig::new(2)).unwrap();
        assert!(f.front(0, 0).is_none());
        assert!(f.front(0, 5).is_some());
        let err = f.front_checked(0, 0).unwrap_err().to_string();
        assert!(err.contains("-0.5"), "{err}");
    }

    #[test]
    fn scalar_fronts_are_singletons() {
        let f = backward_solve(&desk(false), &OrderingCone::orthant(1), &grid(), &GridConfig::new(2)).unwrap();
        for i in 0..=2 {
            for front in f.slice(i).iter().flatten() {
                assert_eq!(front.len(), 1);
            }
        }
    }

    #[test]
    fn consistency_full_horizon_and_one_step() {
        let prob = desk(true);
        let f = backward_solve(&prob, &OrderingCone::orthant(2), &grid(), &GridConfig::new(2)).unwrap();
        let node = grid().nearest(&[0.5]).unwrap();
        let oracle = CloudConfig {
            step: 0.2,
            substeps: 1,
            cap: 1_000_000,
            samples: None,
            seed: 0,
        };
        for k in [1, 2] {
            let r = dp_consistency_check(&f, &prob, 0, node, k, &oracle).unwrap();
            assert!(r.oracle_exhaustive);
            assert!(r.max_gap() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn epsilon_archive_thins_dense_front() {
        let cone = OrderingCone::orthant(2);
        let pts: Vec<Vec<f64>> = (0..=100)
            .map(|k| {
                let s = k as f64 / 100.0;
                vec![s, 1.0 - s]
            })
            .collect();
        let thin = epsilon_archive(pts.clone(), &cone, 0.05);
        assert!(thin.len() < pts.len() / 2);
        for y in &pts {
            let lifted = add(y, &[0.05 / 2f64.sqrt(); 2]);
            assert!(upper_set_distance(&thin, &cone, &lifted) <= 1e-9);
        }
    }

    #[test]
    fn export_round_trip() {
        let prob = desk(true);
        let f = backward_solve(&prob, &OrderingCone::orthant(2), &grid(), &GridConfig::new(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_field(&f, dir.path(), "abc").unwrap();
        let (g, m) = import_field(dir.path()).unwrap();
        assert_eq!(m.problem_hash, "abc");
        for i in 0..=2 {
            assert_eq!(f.slice(i), g.slice(i));
        }
    }
}
