//! Finite-horizon control problems with vector-valued running cost: problem
//! definition from coefficient tables, fixed-step RK4 integration of state and
//! cost together, and numerical checks of the trajectory/cost/objective-space
//! estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nnls::{distance, norm};
use crate::pareto::{directed_hausdorff, PointCloud};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("constant {name} must be {requirement}, got {value}")]
    InvalidConstant {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("declared {name} = {declared} is violated: observed {observed} at x = {x:?}, u = {u:?}")]
    ConstantViolated {
        name: &'static str,
        declared: f64,
        observed: f64,
        x: Vec<f64>,
        u: Vec<f64>,
    },
    #[error("non-finite value while integrating from x = {x:?} under u = {u:?}")]
    NonFinite { x: Vec<f64>, u: Vec<f64> },
    #[error("the control set is empty")]
    NoControls,
    #[error("control index {0} is out of range")]
    ControlIndex(usize),
    #[error("time {t} is not a multiple of the step {step} before the horizon {horizon}")]
    OffGrid { t: f64, step: f64, horizon: f64 },
    #[error("control sequence covers {covered} time units, expected {expected}")]
    SequenceLength { covered: f64, expected: f64 },
    #[error("{count} control sequences exceed the enumeration cap {cap}")]
    CapExceeded { count: f64, cap: u64 },
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigFn {
    Sin,
    Cos,
}

/// `trig(⟨x_coef, x⟩ + ⟨u_coef, u⟩ + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigFactor {
    pub fun: TrigFn,
    #[serde(default)]
    pub x_coef: Vec<f64>,
    #[serde(default)]
    pub u_coef: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

/// `coef · Π x_i^{x_pow_i} · Π u_j^{u_pow_j} · trig(...)`; missing exponents are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x_pow: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u_pow: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trig: Option<TrigFactor>,
}

impl Term {
    fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        let mut v = self.coef;
        for (xi, &p) in x.iter().zip(&self.x_pow) {
            v *= xi.powi(p as i32);
        }
        for (ui, &p) in u.iter().zip(&self.u_pow) {
            v *= ui.powi(p as i32);
        }
        if let Some(t) = &self.trig {
            let arg = t.phase
                + t.x_coef.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + t.u_coef.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
            v *= match t.fun {
                TrigFn::Sin => arg.sin(),
                TrigFn::Cos => arg.cos(),
            };
        }
        v
    }
}

/// A map `(x, u) ↦ R^k` built from coefficient tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VectorField {
    /// `A x + B u + c`; empty tables are zero.
    Linear {
        #[serde(default)]
        a: Vec<Vec<f64>>,
        #[serde(default)]
        b: Vec<Vec<f64>>,
        #[serde(default)]
        c: Vec<f64>,
    },
    /// `A x + B u + c + Σ_j x_j (D_j u)`.
    Bilinear {
        #[serde(default)]
        a: Vec<Vec<f64>>,
        #[serde(default)]
        b: Vec<Vec<f64>>,
        #[serde(default)]
        c: Vec<f64>,
        d: Vec<Vec<Vec<f64>>>,
    },
    /// Component `i` is the sum of `components[i]`.
    Terms { components: Vec<Vec<Term>> },
}

impl VectorField {
    pub fn zero(out: usize) -> Self {
        VectorField::Linear {
            a: Vec::new(),
            b: Vec::new(),
            c: vec![0.0; out],
        }
    }

    pub fn eval(&self, x: &[f64], u: &[f64], out: usize) -> Vec<f64> {
        match self {
            VectorField::Linear { a, b, c } => affine(a, b, c, x, u, out),
            VectorField::Bilinear { a, b, c, d } => {
                let mut v = affine(a, b, c, x, u, out);
                for (j, dj) in d.iter().enumerate() {
                    for (i, row) in dj.iter().enumerate() {
                        v[i] += x[j] * row.iter().zip(u).map(|(p, q)| p * q).sum::<f64>();
                    }
                }
                v
            }
            VectorField::Terms { components } => components
                .iter()
                .map(|terms| terms.iter().map(|t| t.eval(x, u)).sum())
                .collect(),
        }
    }

    fn validate(&self, what: &str, out: usize, n: usize, m: usize) -> Result<(), ControlError> {
        let dim = |w: String, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(ControlError::Dimension { what: w, expected, got })
            }
        };
        let check_affine = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>, c: &Vec<f64>| {
            if !a.is_empty() {
                dim(format!("{what}.a rows"), out, a.len())?;
                for r in a {
                    dim(format!("{what}.a columns"), n, r.len())?;
                }
            }
            if !b.is_empty() {
                dim(format!("{what}.b rows"), out, b.len())?;
                for r in b {
                    dim(format!("{what}.b columns"), m, r.len())?;
                }
            }
            if !c.is_empty() {
                dim(format!("{what}.c"), out, c.len())?;
            }
            Ok(())
        };
        match self {
            VectorField::Linear { a, b, c } => check_affine(a, b, c),
            VectorField::Bilinear { a, b, c, d } => {
                check_affine(a, b, c)?;
                dim(format!("{what}.d"), n, d.len())?;
                for dj in d {
                    dim(format!("{what}.d rows"), out, dj.len())?;
                    for r in dj {
                        dim(format!("{what}.d columns"), m, r.len())?;
                    }
                }
                Ok(())
            }
            VectorField::Terms { components } => {
                dim(format!("{what} components"), out, components.len())?;
                for t in components.iter().flatten() {
                    if !t.x_pow.is_empty() {
                        dim(format!("{what} x_pow"), n, t.x_pow.len())?;
                    }
                    if !t.u_pow.is_empty() {
                        dim(format!("{what} u_pow"), m, t.u_pow.len())?;
                    }
                    if let Some(tr) = &t.trig {
                        if !tr.x_coef.is_empty() {
                            dim(format!("{what} trig x_coef"), n, tr.x_coef.len())?;
                        }
                        if !tr.u_coef.is_empty() {
                            dim(format!("{what} trig u_coef"), m, tr.u_coef.len())?;
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

fn affine(a: &[Vec<f64>], b: &[Vec<f64>], c: &[f64], x: &[f64], u: &[f64], out: usize) -> Vec<f64> {
    let mut v = if c.is_empty() { vec![0.0; out] } else { c.to_vec() };
    for (vi, row) in v.iter_mut().zip(a) {
        *vi += row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
    }
    for (vi, row) in v.iter_mut().zip(b) {
        *vi += row.iter().zip(u).map(|(p, q)| p * q).sum::<f64>();
    }
    v
}

/// Declared Lipschitz and bound constants of `f` and `L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub k_f: f64,
    pub m_f: f64,
    pub k_l: f64,
    pub m_l: f64,
}

impl Constants {
    /// `(K_L / K_f) e^{K_f T}`: the state-sensitivity factor of the cost.
    pub fn cost_sensitivity(&self, horizon: f64) -> f64 {
        self.k_l / self.k_f * (self.k_f * horizon).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    pub state_dim: usize,
    pub cost_dim: usize,
    pub control_dim: usize,
    pub horizon: f64,
    pub dynamics: VectorField,
    pub running_cost: VectorField,
    /// Finite sample of the control set `U`.
    pub controls: Vec<Vec<f64>>,
    pub constants: Constants,
}

/// Largest observed values of the four constants over a probe run.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsReport {
    pub probes: usize,
    pub max_f: f64,
    pub max_l: f64,
    pub lip_f: f64,
    pub lip_l: f64,
}

impl ControlProblem {
    /// Structural checks: dimensions, finite coefficients, `K_f > 0`.
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(ControlError::Horizon(self.horizon));
        }
        if self.controls.is_empty() {
            return Err(ControlError::NoControls);
        }
        for u in &self.controls {
            if u.len() != self.control_dim {
                return Err(ControlError::Dimension {
                    what: "control sample".into(),
                    expected: self.control_dim,
                    got: u.len(),
                });
            }
        }
        let c = &self.constants;
        if !(c.k_f.is_finite() && c.k_f > 0.0) {
            return Err(ControlError::InvalidConstant {
                name: "K_f",
                requirement: "positive",
                value: c.k_f,
            });
        }
        for (name, value) in [("M_f", c.m_f), ("K_L", c.k_l), ("M_L", c.m_l)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ControlError::InvalidConstant {
                    name,
                    requirement: "non-negative",
                    value,
                });
            }
        }
        self.dynamics
            .validate("dynamics", self.state_dim, self.state_dim, self.control_dim)?;
        self.running_cost
            .validate("running_cost", self.cost_dim, self.state_dim, self.control_dim)?;
        Ok(())
    }

    pub fn f(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.dynamics.eval(x, u, self.state_dim)
    }

    pub fn l(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.running_cost.eval(x, u, self.cost_dim)
    }

    pub fn control(&self, index: usize) -> Result<&[f64], ControlError> {
        self.controls
            .get(index)
            .map(Vec::as_slice)
            .ok_or(ControlError::ControlIndex(index))
    }

    /// Spot-checks the declared constants on random states in `probe_box`
    /// against every control sample. A violation is a configuration error.
    pub fn validate_constants(
        &self,
        probe_box: &[(f64, f64)],
        n_probes: usize,
        seed: u64,
    ) -> Result<ConstantsReport, ControlError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            probe_box
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect()
        };
        let c = self.constants;
        let slack = |d: f64| d * (1.0 + 1e-9) + 1e-12;
        let mut rep = ConstantsReport {
            probes: n_probes,
            max_f: 0.0,
            max_l: 0.0,
            lip_f: 0.0,
            lip_l: 0.0,
        };
        for _ in 0..n_probes {
            let x1 = sample(&mut rng);
            // nearby and far partners so both local and global slopes are probed
            let x2 = if rng.gen_bool(0.5) {
                sample(&mut rng)
            } else {
                x1.iter().map(|v| v + rng.gen_range(-1e-3..1e-3)).collect()
            };
            let dx = distance(&x1, &x2);
            for u in &self.controls {
                let (f1, l1) = (self.f(&x1, u), self.l(&x1, u));
                let (f2, l2) = (self.f(&x2, u), self.l(&x2, u));
                let violated = |name, declared, observed: f64| {
                    if observed.is_nan() || observed > slack(declared) {
                        Err(ControlError::ConstantViolated {
                            name,
                            declared,
                            observed,
                            x: x1.clone(),
                            u: u.clone(),
                        })
                    } else {
                        Ok(observed)
                    }
                };
                rep.max_f = rep.max_f.max(violated("M_f", c.m_f, norm(&f1))?);
                rep.max_l = rep.max_l.max(violated("M_L", c.m_l, norm(&l1))?);
                if dx > 0.0 {
                    rep.lip_f = rep.lip_f.max(violated("K_f", c.k_f, distance(&f1, &f2) / dx)?);
                    rep.lip_l = rep.lip_l.max(violated("K_L", c.k_l, distance(&l1, &l2) / dx)?);
                }
            }
        }
        Ok(rep)
    }

    /// One control interval of length `h` under a constant control, using
    /// `substeps` RK4 steps on the augmented state `(x, J)`. Returns the new
    /// state and the accumulated cost.
    pub fn step(
        &self,
        x: &[f64],
        u: &[f64],
        h: f64,
        substeps: usize,
    ) -> Result<(Vec<f64>, Vec<f64>), ControlError> {
        let n = self.state_dim;
        let dt = h / substeps.max(1) as f64;
        let mut xs = x.to_vec();
        let mut cost = vec![0.0; self.cost_dim];
        let rhs = |x: &[f64]| (self.f(x, u), self.l(x, u));
        let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> {
            x.iter().zip(k).map(|(a, b)| a + s * b).collect()
        };
        for _ in 0..substeps.max(1) {
            let (f1, l1) = rhs(&xs);
            let (f2, l2) = rhs(&axpy(&xs, &f1, dt / 2.0));
            let (f3, l3) = rhs(&axpy(&xs, &f2, dt / 2.0));
            let (f4, l4) = rhs(&axpy(&xs, &f3, dt));
            for i in 0..n {
                xs[i] += dt / 6.0 * (f1[i] + 2.0 * f2[i] + 2.0 * f3[i] + f4[i]);
            }
            for i in 0..self.cost_dim {
                cost[i] += dt / 6.0 * (l1[i] + 2.0 * l2[i] + 2.0 * l3[i] + l4[i]);
            }
        }
        if xs.iter().chain(&cost).any(|v| !v.is_finite()) {
            return Err(ControlError::NonFinite {
                x: x.to_vec(),
                u: u.to_vec(),
            });
        }
        Ok((xs, cost))
    }

    /// Number of control intervals of length `step` in `[t, T]`.
    pub fn steps_remaining(&self, t: f64, step: f64) -> Result<usize, ControlError> {
        let r = (self.horizon - t) / step;
        let k = r.round();
        if t < -1e-12 || k < 0.0 || (r - k).abs() > 1e-9 * r.abs().max(1.0) {
            return Err(ControlError::OffGrid {
                t,
                step,
                horizon: self.horizon,
            });
        }
        Ok(k as usize)
    }
}

/// Piecewise-constant control: `controls[k]` indexes the control sample used on
/// the `k`-th interval of length `step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    pub step: f64,
    pub controls: Vec<usize>,
}

impl ControlSequence {
    pub fn duration(&self) -> f64 {
        self.step * self.controls.len() as f64
    }

    pub fn random<R: Rng>(n_controls: usize, len: usize, step: f64, rng: &mut R) -> Self {
        Self {
            step,
            controls: (0..len).map(|_| rng.gen_range(0..n_controls)).collect(),
        }
    }

    pub fn constant(index: usize, len: usize, step: f64) -> Self {
        Self {
            step,
            controls: vec![index; len],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `J(t0, T, x0, u)`.
    pub cost: Vec<f64>,
    /// Cost accumulated up to each entry of `times`.
    pub partial_costs: Vec<Vec<f64>>,
}

/// Applies the first `len` intervals of `seq` starting at `t0`.
fn run(
    prob: &ControlProblem,
    t0: f64,
    x0: &[f64],
    seq: &ControlSequence,
    len: usize,
    substeps: usize,
) -> Result<Trajectory, ControlError> {
    let mut x = x0.to_vec();
    let mut cost = vec![0.0; prob.cost_dim];
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x.clone()],
        cost: Vec::new(),
        partial_costs: vec![cost.clone()],
    };
    for (k, &ui) in seq.controls[..len].iter().enumerate() {
        let (nx, dc) = prob.step(&x, prob.control(ui)?, seq.step, substeps)?;
        x = nx;
        for (c, d) in cost.iter_mut().zip(&dc) {
            *c += d;
        }
        traj.times.push(t0 + (k + 1) as f64 * seq.step);
        traj.states.push(x.clone());
        traj.partial_costs.push(cost.clone());
    }
    traj.cost = cost;
    Ok(traj)
}

/// Integrates state and cost from `(t0, x0)` to the horizon.
pub fn integrate(
    prob: &ControlProblem,
    t0: f64,
    x0: &[f64],
    seq: &ControlSequence,
    substeps: usize,
) -> Result<Trajectory, ControlError> {
    check_state(prob, x0)?;
    let expected = prob.horizon - t0;
    if t0 < 0.0 || expected < 0.0 {
        return Err(ControlError::OffGrid {
            t: t0,
            step: seq.step,
            horizon: prob.horizon,
        });
    }
    if (seq.duration() - expected).abs() > 1e-9 * prob.horizon.max(1.0) {
        return Err(ControlError::SequenceLength {
            covered: seq.duration(),
            expected,
        });
    }
    run(prob, t0, x0, seq, seq.controls.len(), substeps)
}

fn check_state(prob: &ControlProblem, x: &[f64]) -> Result<(), ControlError> {
    if x.len() != prob.state_dim {
        return Err(ControlError::Dimension {
            what: "state".into(),
            expected: prob.state_dim,
            got: x.len(),
        });
    }
    Ok(())
}

/// Largest excess of a computed quantity over its a-priori bound.
#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub max_gap: f64,
    pub bound_at_max_gap: f64,
    /// `max(0, gap − bound)` over all checked points.
    pub max_violation: f64,
    pub checked: usize,
}

impl EstimateReport {
    pub fn empty() -> Self {
        Self {
            max_gap: 0.0,
            bound_at_max_gap: 0.0,
            max_violation: 0.0,
            checked: 0,
        }
    }

    fn record(&mut self, gap: f64, bound: f64) {
        if gap >= self.max_gap {
            self.max_gap = gap;
            self.bound_at_max_gap = bound;
        }
        self.max_violation = self.max_violation.max(gap - bound);
        self.checked += 1;
    }

    pub fn merge(&mut self, other: &EstimateReport) {
        if other.max_gap >= self.max_gap {
            self.max_gap = other.max_gap;
            self.bound_at_max_gap = other.bound_at_max_gap;
        }
        self.max_violation = self.max_violation.max(other.max_violation);
        self.checked += other.checked;
    }
}

/// `‖x(s;t,x₁,u) − x(s;t,x₂,u)‖ ≤ e^{K_f(s−t)} ‖x₁ − x₂‖` at every grid time.
pub fn check_trajectory_estimate(
    prob: &ControlProblem,
    t: f64,
    x1: &[f64],
    x2: &[f64],
    seq: &ControlSequence,
    substeps: usize,
) -> Result<EstimateReport, ControlError> {
    let a = integrate(prob, t, x1, seq, substeps)?;
    let b = integrate(prob, t, x2, seq, substeps)?;
    let d0 = distance(x1, x2);
    let mut rep = EstimateReport::empty();
    for ((s, xa), xb) in a.times.iter().zip(&a.states).zip(&b.states) {
        rep.record(distance(xa, xb), (prob.constants.k_f * (s - t)).exp() * d0);
    }
    Ok(rep)
}

/// Cost estimate `‖J(t₁,T,x₁,u) − J(t₂,T,x₂,u)‖ ≤ (K_L/K_f)e^{K_f T}‖x₁−x₂‖ + M_L|t₁−t₂|`.
///
/// `seq` covers `[min(t₁,t₂), T]` and is read relative to each start time:
/// both runs apply the same controls from their own initial instant, the later
/// start using a prefix. With the controls pinned to absolute time instead, the
/// two runs would see different controls and the bound does not hold.
pub fn check_cost_estimate(
    prob: &ControlProblem,
    t1: f64,
    t2: f64,
    x1: &[f64],
    x2: &[f64],
    seq: &ControlSequence,
    substeps: usize,
) -> Result<EstimateReport, ControlError> {
    check_state(prob, x1)?;
    check_state(prob, x2)?;
    let n1 = prob.steps_remaining(t1, seq.step)?;
    let n2 = prob.steps_remaining(t2, seq.step)?;
    if seq.controls.len() < n1.max(n2) {
        return Err(ControlError::SequenceLength {
            covered: seq.duration(),
            expected: seq.step * n1.max(n2) as f64,
        });
    }
    let a = run(prob, t1, x1, seq, n1, substeps)?;
    let b = run(prob, t2, x2, seq, n2, substeps)?;
    let c = prob.constants;
    let bound = c.cost_sensitivity(prob.horizon) * distance(x1, x2) + c.m_l * (t1 - t2).abs();
    let mut rep = EstimateReport::empty();
    rep.record(distance(&a.cost, &b.cost), bound);
    Ok(rep)
}

/// Sampling policy for objective clouds.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CloudConfig {
    pub step: f64,
    pub substeps: usize,
    /// Largest number of sequences enumerated exhaustively.
    pub cap: u64,
    /// Number of random sequences used beyond the cap; `None` makes exceeding it an error.
    pub samples: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ObjectiveCloud {
    pub cloud: PointCloud,
    pub exhaustive: bool,
    /// Number of sequences evaluated (before deduplication).
    pub count: u64,
}

/// `|U|^steps` as a float so overflow cannot hide a cap violation.
pub fn sequence_count(n_controls: usize, steps: usize) -> f64 {
    (n_controls as f64).powi(steps as i32)
}

/// Costs of all (or of `samples` random) control sequences from `(t, x)`.
pub fn objective_cloud(
    prob: &ControlProblem,
    t: f64,
    x: &[f64],
    cfg: &CloudConfig,
) -> Result<ObjectiveCloud, ControlError> {
    check_state(prob, x)?;
    let steps = prob.steps_remaining(t, cfg.step)?;
    let nu = prob.controls.len();
    let total = sequence_count(nu, steps);
    if total <= cfg.cap as f64 {
        let costs = if steps == 0 {
            vec![vec![0.0; prob.cost_dim]]
        } else {
            let per_first: Result<Vec<Vec<Vec<f64>>>, ControlError> = (0..nu)
                .into_par_iter()
                .map(|u0| {
                    let (nx, c) = prob.step(x, &prob.controls[u0], cfg.step, cfg.substeps)?;
                    let mut out = Vec::new();
                    enumerate_costs(prob, &nx, &c, steps - 1, cfg, &mut out)?;
                    Ok(out)
                })
                .collect();
            per_first?.into_iter().flatten().collect()
        };
        let count = costs.len() as u64;
        return Ok(ObjectiveCloud {
            cloud: PointCloud::new(prob.cost_dim, costs).expect("costs are finite"),
            exhaustive: true,
            count,
        });
    }
    let Some(samples) = cfg.samples else {
        return Err(ControlError::CapExceeded {
            count: total,
            cap: cfg.cap,
        });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seqs: Vec<ControlSequence> = (0..samples)
        .map(|_| ControlSequence::random(nu, steps, cfg.step, &mut rng))
        .collect();
    let costs: Result<Vec<Vec<f64>>, ControlError> = seqs
        .par_iter()
        .map(|s| run(prob, t, x, s, steps, cfg.substeps).map(|tr| tr.cost))
        .collect();
    Ok(ObjectiveCloud {
        cloud: PointCloud::new(prob.cost_dim, costs?).expect("costs are finite"),
        exhaustive: false,
        count: samples as u64,
    })
}

fn enumerate_costs(
    prob: &ControlProblem,
    x: &[f64],
    acc: &[f64],
    remaining: usize,
    cfg: &CloudConfig,
    out: &mut Vec<Vec<f64>>,
) -> Result<(), ControlError> {
    if remaining == 0 {
        out.push(acc.to_vec());
        return Ok(());
    }
    for u in &prob.controls {
        let (nx, c) = prob.step(x, u, cfg.step, cfg.substeps)?;
        let next: Vec<f64> = acc.iter().zip(&c).map(|(a, b)| a + b).collect();
        enumerate_costs(prob, &nx, &next, remaining - 1, cfg, out)?;
    }
    Ok(())
}

/// Directed gap `sup_{y ∈ Y(t₁,x₁)} d(y, Y(t₂,x₂))` against the
/// objective-space estimate. Both clouds must be exhaustive.
pub fn check_objective_estimate(
    prob: &ControlProblem,
    (t1, x1): (f64, &[f64]),
    (t2, x2): (f64, &[f64]),
    cfg: &CloudConfig,
) -> Result<EstimateReport, ControlError> {
    let exhaustive = CloudConfig { samples: None, ..*cfg };
    let y1 = objective_cloud(prob, t1, x1, &exhaustive)?;
    let y2 = objective_cloud(prob, t2, x2, &exhaustive)?;
    let c = prob.constants;
    let bound = c.cost_sensitivity(prob.horizon) * distance(x1, x2) + c.m_l * (t1 - t2).abs();
    let mut rep = EstimateReport::empty();
    rep.record(directed_hausdorff(y1.cloud.points(), y2.cloud.points()), bound);
    Ok(rep)
}
