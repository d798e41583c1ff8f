//! Ladder-based estimates of contingent cones, contingent derivatives and
//! epiderivatives, proper minimality, recession directions, and the
//! contingent/proximal solution residuals of a computed value field.
//!
//! Contingent objects are limits, so every estimate is certified only along a
//! finite ladder of step sizes: a direction counts as tangent when the
//! distance quotient stays under a slack profile at every rung.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr_free::gaussian;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cone::OrderingCone;
use crate::control::ControlProblem;
use crate::dp::ValueField;
use crate::nnls::{add, distance, dot, norm, scale, sub};
use crate::pareto::{minimal_points, upper_set_distance, ParetoFront, PointCloud};

/// Gaussian sampling via Box–Muller; avoids a dependency for one distribution.
mod rand_distr_free {
    use rand::Rng;

    pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen::<f64>();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[derive(Debug, Error)]
pub enum TangentError {
    #[error("point is not in the set: distance {0}")]
    NotInSet(f64),
    #[error("point is not on the graph: distance {0}")]
    NotOnGraph(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("front point index {index} out of range at t_{time_index}, node {node}")]
    NotOnFront {
        time_index: usize,
        node: usize,
        index: usize,
    },
    #[error("value undefined at t_{time_index}, node {node}")]
    Undefined { time_index: usize, node: usize },
}

/// Membership tolerance for "z ∈ S" preconditions.
pub const TAU_SET: f64 = 1e-9;

/// Distance oracle for a closed set `S ⊂ R^d`.
pub trait SetProbe: Sync {
    fn dim(&self) -> usize;
    fn distance(&self, z: &[f64]) -> f64;
    fn contains(&self, z: &[f64]) -> bool {
        self.distance(z) <= TAU_SET * norm(z).max(1.0)
    }
}

/// `x ↦ F(x) ⊂ R^p`, evaluated deterministically.
pub trait SetMap: Sync {
    fn domain_dim(&self) -> usize;
    fn range_dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> PointCloud;
    /// `d(y, F(x))`.
    fn value_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.evaluate(x)
            .points()
            .iter()
            .map(|f| distance(f, y))
            .fold(f64::INFINITY, f64::min)
    }
    /// `d(y, F(x) + P)`.
    fn upper_distance(&self, x: &[f64], y: &[f64], cone: &OrderingCone) -> f64 {
        upper_set_distance(self.evaluate(x).points(), cone, y)
    }
    /// Spacing of the value samples; zero for exact maps.
    fn density(&self) -> f64 {
        0.0
    }
    /// Whether the map is declared Lipschitz.
    fn lipschitz(&self) -> bool {
        true
    }
}

/// Step sizes `h₁ > … > h_K`.
#[derive(Clone, Debug, Serialize)]
pub struct Ladder(pub Vec<f64>);

impl Default for Ladder {
    fn default() -> Self {
        Ladder(vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    }
}

/// `slack(h) = c₁·h + c₂·density + floor`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlackProfile {
    pub c1: f64,
    pub c2: f64,
    pub density: f64,
    pub floor: f64,
}

impl Default for SlackProfile {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            density: 0.0,
            floor: 1e-9,
        }
    }
}

impl SlackProfile {
    /// Only exact hits count (up to rounding).
    pub fn exact() -> Self {
        Self {
            c1: 0.0,
            c2: 0.0,
            density: 0.0,
            floor: 1e-9,
        }
    }

    pub fn with_density(self, density: f64) -> Self {
        Self { density, ..self }
    }

    pub fn slack(&self, h: f64) -> f64 {
        self.c1 * h + self.c2 * self.density + self.floor
    }
}

/// Unit directions: evenly spaced angles in 2D, a Fibonacci sphere in 3D,
/// seeded Gaussian samples otherwise.
pub fn sample_directions(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| {
                    let v: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
                    let l = norm(&v);
                    scale(&v, 1.0 / l)
                })
                .collect()
        }
    }
}

/// Typical angular gap between neighbouring sampled directions.
pub fn angular_resolution(dim: usize, n: usize) -> f64 {
    match dim {
        0 | 1 => 0.0,
        2 => std::f64::consts::TAU / n as f64,
        d => {
            // surface area of S^{d-1} per sample, as an angle
            let area = 2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d);
            (area / n as f64).powf(1.0 / (d - 1) as f64)
        }
    }
}

/// `Γ(d/2)`.
fn gamma_half(d: usize) -> f64 {
    if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut k = 0.5;
        while k < d as f64 / 2.0 - 0.25 {
            g *= k;
            k += 1.0;
        }
        g
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeEstimate {
    pub directions: Vec<Vec<f64>>,
    pub inside: Vec<bool>,
    pub ladder: Ladder,
    pub slack: SlackProfile,
}

impl ConeEstimate {
    pub fn in_directions(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.directions
            .iter()
            .zip(&self.inside)
            .filter(|(_, &i)| i)
            .map(|(d, _)| d)
    }

    pub fn count_in(&self) -> usize {
        self.inside.iter().filter(|&&i| i).count()
    }
}

/// `v ∈ T_S(z)` iff `d(z + h v, S) / h ≤ slack(h)` at every rung.
pub fn contingent_cone_estimate(
    set: &dyn SetProbe,
    z: &[f64],
    ladder: &Ladder,
    directions: Vec<Vec<f64>>,
    slack: SlackProfile,
) -> Result<ConeEstimate, TangentError> {
    if z.len() != set.dim() {
        return Err(TangentError::Dimension {
            expected: set.dim(),
            got: z.len(),
        });
    }
    let d0 = set.distance(z);
    if d0 > TAU_SET * norm(z).max(1.0) {
        return Err(TangentError::NotInSet(d0));
    }
    let inside = directions
        .par_iter()
        .map(|v| {
            ladder
                .0
                .iter()
                .all(|&h| set.distance(&add(z, &scale(v, h))) / h <= slack.slack(h))
        })
        .collect();
    Ok(ConeEstimate {
        directions,
        inside,
        ladder: ladder.clone(),
        slack,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Minimality {
    Proper,
    MinimalNotProper,
    NotMinimal,
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimalityReport {
    pub class: Minimality,
    /// Tangent direction closest to `−P` (largest interior margin of its negation).
    pub witness: Option<Vec<f64>>,
    pub angular_tolerance: f64,
    pub tangent: ConeEstimate,
}

/// Classifies `y` from the estimated tangent cone of `S + P` at `y`:
/// a tangent inside `−int P` means not minimal; a tangent on `−P` (but none
/// inside) means minimal but not properly minimal.
pub fn properly_minimal(
    upper: &dyn SetProbe,
    y: &[f64],
    cone: &OrderingCone,
    ladder: &Ladder,
    n_dirs: usize,
    slack: SlackProfile,
) -> Result<MinimalityReport, TangentError> {
    let dim = cone.dim();
    let dirs = sample_directions(dim, n_dirs, 0x5eed);
    let tol = 2.0 * angular_resolution(dim, dirs.len());
    let tangent = contingent_cone_estimate(upper, y, ladder, dirs, slack)?;
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for d in tangent.in_directions() {
        if norm(d) == 0.0 {
            continue;
        }
        let m = cone.h_margin(&scale(d, -1.0));
        if best.map_or(true, |(b, _)| m > b) {
            best = Some((m, d));
        }
    }
    let class = match best {
        Some((m, _)) if m > tol => Minimality::NotMinimal,
        Some((m, _)) if m >= -tol => Minimality::MinimalNotProper,
        _ => Minimality::Proper,
    };
    Ok(MinimalityReport {
        class,
        witness: best.map(|(_, d)| d.clone()),
        angular_tolerance: tol,
        tangent,
    })
}

/// Recession directions: unit `v` with `d(R v, S) / R ≤ tol` for every radius.
/// An empty result stands for `S⁺ = {0}`.
pub fn recession_probe(set: &dyn SetProbe, radii: &[f64], directions: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    directions
        .par_iter()
        .filter(|v| radii.iter().all(|&r| set.distance(&scale(v, r)) / r <= tol))
        .cloned()
        .collect()
}

pub fn default_recession_radii() -> Vec<f64> {
    vec![1e2, 1e3, 1e4, 1e5, 1e6]
}

/// Box of candidate derivative directions `w`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WGrid {
    pub half_width: f64,
    pub per_axis: usize,
}

impl WGrid {
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        let n = self.per_axis.max(2);
        let axis: Vec<f64> = (0..n)
            .map(|k| -self.half_width + 2.0 * self.half_width * k as f64 / (n - 1) as f64)
            .collect();
        let mut out = vec![Vec::new()];
        for _ in 0..dim {
            out = out
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    axis.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        out
    }

    fn on_boundary(&self, w: &[f64]) -> bool {
        let step = 2.0 * self.half_width / (self.per_axis.max(2) - 1) as f64;
        w.iter().any(|v| v.abs() >= self.half_width - 0.5 * step)
    }
}

/// Either the plain map or its epigraphical version `F + P`.
#[derive(Clone, Copy)]
enum Values<'a> {
    Plain,
    Upper(&'a OrderingCone),
}

/// `d((x + h v, y + h w), Graph F) / h`, searching domain points within
/// `h·radius` of `x + h v` on a small lattice, then zooming in around the best
/// lattice point down to float resolution (steep maps such as `x^{1/3}` hide
/// their preimages in tiny neighbourhoods).
fn graph_quotient(map: &dyn SetMap, values: Values, x: &[f64], y: &[f64], v: &[f64], w: &[f64], h: f64, radius: f64) -> f64 {
    let center = add(x, &scale(v, h));
    let target = add(y, &scale(w, h));
    let r = h * radius;
    let n = map.domain_dim();
    let per_axis: usize = match n {
        1 => 41,
        2 => 9,
        3 => 5,
        _ => 1,
    };
    let eval = |off: &[f64]| -> f64 {
        let xp = add(&center, off);
        let dy = match values {
            Values::Plain => map.value_distance(&xp, &target),
            Values::Upper(c) => map.upper_distance(&xp, &target, c),
        };
        norm(off).hypot(dy)
    };
    if per_axis == 1 || r <= 0.0 {
        return eval(&vec![0.0; n]) / h;
    }
    let mut best = f64::INFINITY;
    let mut best_off = vec![0.0; n];
    let mut mid = vec![0.0; n];
    let mut half = r;
    let floor = 1e-15 * norm(&center).max(f64::MIN_POSITIVE.sqrt());
    for _round in 0..40 {
        let step = 2.0 * half / (per_axis - 1) as f64;
        let mut idx = vec![0usize; n];
        loop {
            let off: Vec<f64> = idx.iter().zip(&mid).map(|(&k, m)| m - half + step * k as f64).collect();
            if norm(&off) <= r * (1.0 + 1e-12) {
                let d = eval(&off);
                if d < best {
                    best = d;
                    best_off = off;
                }
            }
            // odometer over the offset lattice
            let mut a = 0;
            while a < n {
                idx[a] += 1;
                if idx[a] < per_axis {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == n {
                break;
            }
        }
        mid = best_off.clone();
        half = step;
        if step <= floor {
            break;
        }
    }
    best / h
}

fn derivative_member(map: &dyn SetMap, values: Values, x: &[f64], y: &[f64], v: &[f64], w: &[f64], ladder: &Ladder, slack: &SlackProfile) -> bool {
    ladder.0.iter().all(|&h| {
        let s = slack.slack(h);
        graph_quotient(map, values, x, y, v, w, h, s) <= s
    })
}

fn check_on_graph(map: &dyn SetMap, values: Values, x: &[f64], y: &[f64]) -> Result<(), TangentError> {
    if x.len() != map.domain_dim() {
        return Err(TangentError::Dimension {
            expected: map.domain_dim(),
            got: x.len(),
        });
    }
    if y.len() != map.range_dim() {
        return Err(TangentError::Dimension {
            expected: map.range_dim(),
            got: y.len(),
        });
    }
    let d = match values {
        Values::Plain => map.value_distance(x, y),
        Values::Upper(c) => map.upper_distance(x, y, c),
    };
    if d > TAU_SET * norm(y).max(1.0) {
        return Err(TangentError::NotOnGraph(d));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivativeEstimate {
    /// Directions `w` classified as belonging to `DF((x,y);v)`.
    pub inside: Vec<Vec<f64>>,
    pub sampled: usize,
    pub grid: WGrid,
    pub ladder: Ladder,
}

/// `w ∈ DF((x,y); v)` iff `(v, w)` is an estimated tangent to `Graph F` at `(x, y)`.
pub fn contingent_derivative_estimate(
    map: &dyn SetMap,
    x: &[f64],
    y: &[f64],
    v: &[f64],
    ladder: &Ladder,
    grid: WGrid,
    slack: SlackProfile,
) -> Result<DerivativeEstimate, TangentError> {
    check_on_graph(map, Values::Plain, x, y)?;
    let slack = slack.with_density(map.density());
    let ws = grid.points(map.range_dim());
    let inside: Vec<Vec<f64>> = ws
        .par_iter()
        .filter(|w| derivative_member(map, Values::Plain, x, y, v, w, ladder, &slack))
        .cloned()
        .collect();
    Ok(DerivativeEstimate {
        inside,
        sampled: ws.len(),
        grid,
        ladder: ladder.clone(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EpiderivativeEstimate {
    /// Minimal elements of the sampled `DF↑((x,y);v)`, excluding points on the sampling-box boundary.
    pub points: Vec<Vec<f64>>,
    /// Some minimal sample sat on the box boundary: the true set may be unbounded below.
    pub truncated: bool,
    pub in_count: usize,
    pub sampled: usize,
}

impl EpiderivativeEstimate {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_front(&self, cone: &OrderingCone) -> ParetoFront {
        ParetoFront::from_minimal(cone, self.points.clone())
    }
}

/// `D↑F((x,y);v) = E(DF↑((x,y);v), P)` over a bounded `w` grid. For `p = 1`
/// the lower threshold is refined by bisection, since `DF↑` is then an up-ray.
pub fn epiderivative_estimate(
    map: &dyn SetMap,
    x: &[f64],
    y: &[f64],
    v: &[f64],
    cone: &OrderingCone,
    ladder: &Ladder,
    grid: WGrid,
    slack: SlackProfile,
) -> Result<EpiderivativeEstimate, TangentError> {
    let values = Values::Upper(cone);
    check_on_graph(map, values, x, y)?;
    let slack = slack.with_density(map.density());
    let member = |w: &[f64]| derivative_member(map, values, x, y, v, w, ladder, &slack);
    let p = map.range_dim();
    if p == 1 && cone.generators()[0][0] > 0.0 {
        let (lo, hi) = (-grid.half_width, grid.half_width);
        if !member(&[hi]) {
            return Ok(EpiderivativeEstimate {
                points: Vec::new(),
                truncated: false,
                in_count: 0,
                sampled: 1,
            });
        }
        if member(&[lo]) {
            return Ok(EpiderivativeEstimate {
                points: Vec::new(),
                truncated: true,
                in_count: 1,
                sampled: 2,
            });
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if member(&[m]) {
                b = m;
            } else {
                a = m;
            }
        }
        return Ok(EpiderivativeEstimate {
            points: vec![vec![b]],
            truncated: false,
            in_count: 1,
            sampled: 62,
        });
    }
    let ws = grid.points(p);
    let inside: Vec<Vec<f64>> = ws.par_iter().filter(|w| member(w)).cloned().collect();
    let minimal = minimal_points(&inside, cone);
    let truncated = minimal.iter().any(|w| grid.on_boundary(w));
    let points = minimal.into_iter().filter(|w| !grid.on_boundary(w)).collect();
    Ok(EpiderivativeEstimate {
        points,
        truncated,
        in_count: inside.len(),
        sampled: ws.len(),
    })
}

// ---------------------------------------------------------------------------
// Analytic sets and maps

/// `{z : ⟨n, z⟩ ≥ offset}`.
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl SetProbe for HalfSpace {
    fn dim(&self) -> usize {
        self.normal.len()
    }
    fn distance(&self, z: &[f64]) -> f64 {
        (self.offset - dot(&self.normal, z)).max(0.0) / norm(&self.normal)
    }
}

/// A finite point set.
pub struct CloudSet(pub PointCloud);

impl SetProbe for CloudSet {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn distance(&self, z: &[f64]) -> f64 {
        self.0
            .points()
            .iter()
            .map(|p| distance(p, z))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `points + P`.
pub struct UpperCloud {
    pub points: Vec<Vec<f64>>,
    pub cone: OrderingCone,
}

impl SetProbe for UpperCloud {
    fn dim(&self) -> usize {
        self.cone.dim()
    }
    fn distance(&self, z: &[f64]) -> f64 {
        upper_set_distance(&self.points, &self.cone, z)
    }
}

/// A (possibly lower-dimensional) cone given by generators.
pub struct ConeSet(pub OrderingCone);

impl SetProbe for ConeSet {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn distance(&self, z: &[f64]) -> f64 {
        self.0.distance(z).expect("dimension checked by caller")
    }
}

/// `[a, b] + P` for a segment `[a, b]`; the distance is convex along the segment.
pub struct UpperSegment {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub cone: OrderingCone,
}

impl SetProbe for UpperSegment {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn distance(&self, z: &[f64]) -> f64 {
        let f = |s: f64| {
            let p: Vec<f64> = self.a.iter().zip(&self.b).map(|(a, b)| a + s * (b - a)).collect();
            self.cone.distance(&sub(z, &p)).expect("dimensions agree")
        };
        // golden-section search on [0, 1]
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (0.0, 1.0);
        let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..80 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - g * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + g * (hi - lo);
                fd = f(d);
            }
        }
        f(0.0).min(f(1.0)).min(fc).min(fd)
    }
}

/// Real roots of `s³ + p s + q = 0`, polished by Newton steps.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let mut roots = if disc > 0.0 {
        let r = disc.sqrt();
        vec![(-q / 2.0 + r).cbrt() + (-q / 2.0 - r).cbrt()]
    } else if p == 0.0 {
        vec![0.0]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        let th = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (th - std::f64::consts::TAU * k as f64 / 3.0).cos())
            .collect()
    };
    for s in roots.iter_mut() {
        for _ in 0..3 {
            let f = *s * *s * *s + p * *s + q;
            let df = 3.0 * *s * *s + p;
            if df.abs() > 1e-300 {
                *s -= f / df;
            }
        }
    }
    roots
}

/// Distance from `(a, b)` to the parabola arc `{(s, s²) : s ∈ [lo, hi]}`.
fn parabola_arc_distance(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    // stationary points of (s−a)² + (s²−b)²: 2s³ + (1−2b)s − a = 0
    let mut cands = depressed_cubic_roots((1.0 - 2.0 * b) / 2.0, -a / 2.0);
    cands.extend([lo, hi].iter().filter(|v| v.is_finite()));
    cands
        .into_iter()
        .map(|s| s.clamp(lo, hi))
        .map(|s| (s - a).hypot(s * s - b))
        .fold(f64::INFINITY, f64::min)
}

/// Epigraph `{(a, b) : b ≥ a²}`.
pub struct ParabolaEpigraph;

impl SetProbe for ParabolaEpigraph {
    fn dim(&self) -> usize {
        2
    }
    fn distance(&self, z: &[f64]) -> f64 {
        if z[1] >= z[0] * z[0] {
            0.0
        } else {
            parabola_arc_distance(z[0], z[1], f64::NEG_INFINITY, f64::INFINITY)
        }
    }
}

/// `S + R²₊` for `S = {(s, s²) : s ≤ 0} ∪ {(s, −s) : s > 0}`, which is the
/// epigraph of `g(a) = a²` for `a ≤ 0` and `g(a) = −a` for `a > 0`.
pub struct ParabolaLineUpper;

impl SetProbe for ParabolaLineUpper {
    fn dim(&self) -> usize {
        2
    }
    fn distance(&self, z: &[f64]) -> f64 {
        let (a, b) = (z[0], z[1]);
        let g = if a <= 0.0 { a * a } else { -a };
        if b >= g {
            return 0.0;
        }
        let arc = parabola_arc_distance(a, b, f64::NEG_INFINITY, 0.0);
        let s = ((a - b) / 2.0).max(0.0);
        arc.min((s - a).hypot(-s - b))
    }
}

/// `x ↦ {A x + b}`.
pub struct AffineMap {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl AffineMap {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| dot(row, x) + bi)
            .collect()
    }
}

impl SetMap for AffineMap {
    fn domain_dim(&self) -> usize {
        self.a.first().map_or(0, |r| r.len())
    }
    fn range_dim(&self) -> usize {
        self.b.len()
    }
    fn evaluate(&self, x: &[f64]) -> PointCloud {
        PointCloud::singleton(self.apply(x))
    }
}

/// `x ↦ {x^{1/3}}` on the reals.
pub struct CubeRoot;

impl SetMap for CubeRoot {
    fn domain_dim(&self) -> usize {
        1
    }
    fn range_dim(&self) -> usize {
        1
    }
    fn evaluate(&self, x: &[f64]) -> PointCloud {
        PointCloud::singleton(vec![x[0].cbrt()])
    }
    fn lipschitz(&self) -> bool {
        false
    }
}

/// `x ↦ [lower_coef·|x|, |x|]` on the reals.
pub struct AbsInterval {
    pub lower_coef: f64,
}

impl SetMap for AbsInterval {
    fn domain_dim(&self) -> usize {
        1
    }
    fn range_dim(&self) -> usize {
        1
    }
    fn evaluate(&self, x: &[f64]) -> PointCloud {
        let r = x[0].abs();
        PointCloud::new(1, vec![vec![self.lower_coef * r], vec![r]]).expect("finite")
    }
    fn value_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let r = x[0].abs();
        (self.lower_coef * r - y[0]).max(y[0] - r).max(0.0)
    }
}

/// `x ↦ {φ(x)}` for a smooth scalar function.
pub struct ScalarFn<F: Fn(f64) -> f64 + Sync>(pub F);

impl<F: Fn(f64) -> f64 + Sync> SetMap for ScalarFn<F> {
    fn domain_dim(&self) -> usize {
        1
    }
    fn range_dim(&self) -> usize {
        1
    }
    fn evaluate(&self, x: &[f64]) -> PointCloud {
        PointCloud::singleton(vec![(self.0)(x[0])])
    }
}

/// The constant map `x ↦ S`, described through a probe for `S + P`.
pub struct ConstantUpperMap<S: SetProbe> {
    pub upper: S,
    pub domain_dim: usize,
    /// A finite sample of `S`, used for plain evaluations.
    pub sample: PointCloud,
}

impl<S: SetProbe> SetMap for ConstantUpperMap<S> {
    fn domain_dim(&self) -> usize {
        self.domain_dim
    }
    fn range_dim(&self) -> usize {
        self.upper.dim()
    }
    fn evaluate(&self, _x: &[f64]) -> PointCloud {
        self.sample.clone()
    }
    fn upper_distance(&self, _x: &[f64], y: &[f64], _cone: &OrderingCone) -> f64 {
        self.upper.distance(y)
    }
}

// ---------------------------------------------------------------------------
// Residuals on a computed value field

/// Vertices of `(FL)(x)` plus convex combinations of vertex pairs with weights `k/m`.
pub fn fl_samples(prob: &ControlProblem, x: &[f64], m: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let verts: Vec<(Vec<f64>, Vec<f64>)> = prob.controls.iter().map(|u| (prob.f(x, u), prob.l(x, u))).collect();
    let mut out = verts.clone();
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            for k in 1..m {
                let s = k as f64 / m as f64;
                let mix = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| (1.0 - s) * p + s * q).collect() };
                out.push((mix(&verts[i].0, &verts[j].0), mix(&verts[i].1, &verts[j].1)));
            }
        }
    }
    out
}

/// `d((t, x, y), graph V↑)` over lattice slices and nodes near `(t, x)`; `None`
/// when no defined node lies within `radius`.
pub fn graph_distance(field: &ValueField, t: f64, x: &[f64], y: &[f64], radius: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (_, _, dt, dx, front) in nearby(field, t, x, radius) {
        let base = dt.hypot(dx);
        if best.is_some_and(|b| base >= b) {
            break;
        }
        let dy = front.upper_set_distance(y);
        let d = base.hypot(dy);
        best = Some(best.map_or(d, |b| b.min(d)));
    }
    best
}

/// Defined nodes within `radius` of `(t, x)` as `(i, node, |t_i − t|, ‖x_node − x‖, front)`,
/// nearest first.
fn nearby<'a>(field: &'a ValueField, t: f64, x: &[f64], radius: f64) -> Vec<(usize, usize, f64, f64, &'a ParetoFront)> {
    let grid = field.grid();
    let dt_step = field.step();
    let slack = 1e-9 * dt_step;
    let mut out = Vec::new();
    let i_lo = ((t - radius) / dt_step - 1e-9).ceil().max(0.0);
    let i_hi = ((t + radius) / dt_step + 1e-9).floor().min(field.steps() as f64);
    if i_hi < i_lo {
        return out;
    }
    // per-axis index windows
    let mut ranges = Vec::with_capacity(grid.dim());
    for a in 0..grid.dim() {
        let d = grid.spacing(a);
        if d == 0.0 {
            ranges.push((0usize, 0usize));
            continue;
        }
        let lo = ((x[a] - radius - grid.lower[a]) / d - 1e-9).ceil().max(0.0);
        let hi = ((x[a] + radius - grid.lower[a]) / d + 1e-9).floor().min((grid.nodes[a] - 1) as f64);
        if hi < lo {
            return out;
        }
        ranges.push((lo as usize, hi as usize));
    }
    for i in i_lo as usize..=i_hi as usize {
        let dt = (field.time(i) - t).abs();
        if dt > radius + slack {
            continue;
        }
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let node = grid.flat_index(&idx);
            if let Some(front) = field.front(i, node) {
                let dx = distance(&grid.node(node), x);
                if dt.hypot(dx) <= radius * (1.0 + 1e-12) + slack {
                    out.push((i, node, dt, dx, front));
                }
            }
            let mut a = 0;
            while a < idx.len() {
                idx[a] += 1;
                if idx[a] <= ranges[a].1 {
                    break;
                }
                idx[a] = ranges[a].0;
                a += 1;
            }
            if a == idx.len() {
                break;
            }
        }
    }
    out.sort_by(|p, q| p.2.hypot(p.3).total_cmp(&q.2.hypot(q.3)).then((p.0, p.1).cmp(&(q.0, q.1))));
    out
}

/// The field's residual ladder: `h = 2^k Δt` for `k < rungs`, within the horizon.
pub fn field_ladder(field: &ValueField, rungs: usize) -> Vec<f64> {
    (0..rungs)
        .map(|k| field.step() * (1u64 << k) as f64)
        .filter(|&h| h <= field.horizon() + 1e-12)
        .collect()
}

/// `L_V = (K_L/K_f) e^{K_f T}`, the state-Lipschitz bound of the value map.
fn value_lipschitz(prob: &ControlProblem) -> f64 {
    prob.constants.cost_sensitivity(prob.horizon)
}

/// Grid budget for a quotient at step `h`: the one-step quadrature defect
/// `(K_L + L_V K_f) M_f h / 2` plus the landing error `(1/2 + L_V)·diag / h`,
/// doubled for safety.
pub fn tangent_tolerance(prob: &ControlProblem, field: &ValueField, h: f64) -> f64 {
    let c = prob.constants;
    let lv = value_lipschitz(prob);
    let diag = field.grid().diagonal();
    2.0 * ((c.k_l + lv * c.k_f) * c.m_f * h / 2.0 + (0.5 + lv) * diag / h) + 1e-9
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderStep {
    pub h: f64,
    /// `d(z + h d, graph V↑) / h`; infinite when no defined node is in reach.
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionOutcome {
    pub ok: bool,
    /// Index into the `(FL)(x)` samples: the best sample for the existential
    /// condition, the worst for the universal one.
    pub witness: usize,
    pub witness_f: Vec<f64>,
    pub witness_l: Vec<f64>,
    /// Smallest `residual / tolerance` over the ladder for the witness.
    pub ratio: f64,
    pub trace: Vec<LadderStep>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContingentReport {
    pub time_index: usize,
    pub node: usize,
    pub y: Vec<f64>,
    /// `None` at `t = T`, where the existential condition is vacuous.
    pub cond1: Option<ConditionOutcome>,
    /// `None` at `t = 0`, where the universal condition is vacuous.
    pub cond2: Option<ConditionOutcome>,
    /// At `t = T`: the front equals `{0}`.
    pub terminal_ok: Option<bool>,
    pub fl_samples: usize,
}

impl ContingentReport {
    pub fn ok(&self) -> bool {
        self.cond1.as_ref().map_or(true, |c| c.ok) && self.cond2.as_ref().map_or(true, |c| c.ok) && self.terminal_ok.unwrap_or(true)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResidualConfig {
    /// Rungs of the `2^k Δt` ladder.
    pub rungs: usize,
    /// Denominator of the convex-combination weights in `(FL)(x)`.
    pub hull_weights: usize,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self { rungs: 3, hull_weights: 2 }
    }
}

fn front_point(field: &ValueField, i: usize, node: usize, y_index: usize) -> Result<Vec<f64>, TangentError> {
    let front = field.front(i, node).ok_or(TangentError::Undefined { time_index: i, node })?;
    front
        .points()
        .get(y_index)
        .cloned()
        .ok_or(TangentError::NotOnFront {
            time_index: i,
            node,
            index: y_index,
        })
}

fn evaluate_condition(
    field: &ValueField,
    prob: &ControlProblem,
    z: (f64, &[f64], &[f64]),
    dirs: &[(Vec<f64>, Vec<f64>, f64, Vec<f64>)],
    ladder: &[f64],
    universal: bool,
) -> ConditionOutcome {
    let (t, x, y) = z;
    let traces: Vec<Vec<LadderStep>> = dirs
        .iter()
        .map(|(dx, dy, dt, _)| {
            ladder
                .iter()
                .map(|&h| {
                    let tol = tangent_tolerance(prob, field, h);
                    let radius = field.grid().diagonal().max(h * tol).max(1e-12);
                    let px = add(x, &scale(dx, h));
                    let py = add(y, &scale(dy, h));
                    let residual = graph_distance(field, t + dt * h, &px, &py, radius).map_or(f64::INFINITY, |d| d / h);
                    LadderStep { h, residual, tolerance: tol }
                })
                .collect()
        })
        .collect();
    let ratio = |tr: &Vec<LadderStep>| tr.iter().map(|s| s.residual / s.tolerance).fold(f64::INFINITY, f64::min);
    let ratios: Vec<f64> = traces.iter().map(ratio).collect();
    let pick = if universal {
        (0..ratios.len()).max_by(|&a, &b| ratios[a].total_cmp(&ratios[b]).then(b.cmp(&a)))
    } else {
        (0..ratios.len()).min_by(|&a, &b| ratios[a].total_cmp(&ratios[b]).then(a.cmp(&b)))
    }
    .expect("at least one control sample");
    let (f, l) = &dirs[pick].3.split_at(prob.state_dim);
    ConditionOutcome {
        ok: ratios[pick] <= 1.0,
        witness: pick,
        witness_f: f.to_vec(),
        witness_l: l.to_vec(),
        ratio: ratios[pick],
        trace: traces[pick].clone(),
    }
}

/// Residuals of the two contingent-solution conditions at `(t_i, x_node, y)`:
/// some `(f̄, L̄) ∈ (FL)(x)` with `(1, f̄, −L̄)` tangent to `graph V↑`, and
/// `(−1, −f, L)` tangent for every `(f, L)`. Tangency at step `h` means
/// `d(z + h d, graph V↑)/h` within the grid budget; a condition holds when
/// some rung of the ladder meets its budget.
pub fn contingent_solution_residual(
    field: &ValueField,
    prob: &ControlProblem,
    i: usize,
    node: usize,
    y_index: usize,
    cfg: &ResidualConfig,
) -> Result<ContingentReport, TangentError> {
    let y = front_point(field, i, node, y_index)?;
    let x = field.grid().node(node);
    let t = field.time(i);
    let samples = fl_samples(prob, &x, cfg.hull_weights);
    let full = field_ladder(field, cfg.rungs);
    let tag = |f: &Vec<f64>, l: &Vec<f64>| -> Vec<f64> { f.iter().chain(l).copied().collect() };

    let cond1 = (i < field.steps()).then(|| {
        let ladder: Vec<f64> = full.iter().copied().filter(|&h| t + h <= field.horizon() + 1e-12).collect();
        let dirs: Vec<_> = samples.iter().map(|(f, l)| (f.clone(), scale(l, -1.0), 1.0, tag(f, l))).collect();
        evaluate_condition(field, prob, (t, &x, &y), &dirs, &ladder, false)
    });
    let cond2 = (i > 0).then(|| {
        let ladder: Vec<f64> = full.iter().copied().filter(|&h| t - h >= -1e-12).collect();
        let dirs: Vec<_> = samples.iter().map(|(f, l)| (scale(f, -1.0), l.clone(), -1.0, tag(f, l))).collect();
        evaluate_condition(field, prob, (t, &x, &y), &dirs, &ladder, true)
    });
    let terminal_ok = (i == field.steps()).then(|| {
        field
            .front(i, node)
            .is_some_and(|f| f.len() == 1 && f.points()[0].iter().all(|&v| v == 0.0))
    });
    Ok(ContingentReport {
        time_index: i,
        node,
        y,
        cond1,
        cond2,
        terminal_ok,
        fl_samples: samples.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveredNormal {
    pub rho: f64,
    /// Unit normal `(ξ*, v*, −w*)` to `graph V↑`.
    pub normal: Vec<f64>,
    /// `|ξ* + min_{(f,L)} ⟨v*, f⟩ + ⟨w*, L⟩|`.
    pub residual: f64,
    /// Second-nearest candidate distance over `ρ`.
    pub separation: f64,
    /// `separation` reaches the configured uniqueness factor.
    pub robust: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProximalConfig {
    pub rho_factors: [f64; 3],
    /// Separation at which a normal counts as robust. On densely sampled
    /// graphs neighbouring samples sit near `√(ρ² + s²)`, so few normals reach it.
    pub uniqueness: f64,
}

impl Default for ProximalConfig {
    fn default() -> Self {
        Self {
            rho_factors: [2.0, 4.0, 8.0],
            uniqueness: 1.5,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProximalReport {
    pub time_index: usize,
    pub node: usize,
    pub y: Vec<f64>,
    pub attempted: usize,
    /// Probes whose projection was some other graph point.
    pub not_nearest: usize,
    /// Probes with a tie for the nearest point.
    pub ambiguous: usize,
    pub robust: usize,
    pub normals: Vec<RecoveredNormal>,
    pub max_residual: Option<f64>,
    /// At `t ∈ {0, T}`: `sup_{y ∈ V(t,x)} d(y, V↑ at the adjacent slice near x)`.
    pub boundary_gap: Option<f64>,
    pub boundary_budget: Option<f64>,
}

/// Sampling density of `graph V↑` in `(t, x)`.
pub fn graph_density(field: &ValueField) -> f64 {
    field.step().max(field.grid().max_spacing())
}

/// Outward probe directions in `(t, x, y)` space: `y`-parts along `−P`
/// generators and the negated cone key, `(t, x)`-parts zero or half a unit
/// along each axis.
fn probe_directions(field: &ValueField) -> Vec<Vec<f64>> {
    let cone = field.cone();
    let n = field.grid().dim();
    // the polar cone is generated by the negated facet normals
    let facets = cone.facet_normals();
    let mut ys: Vec<Vec<f64>> = facets.iter().map(|g| scale(g, -1.0)).collect();
    for a in 0..facets.len() {
        for b in a + 1..facets.len() {
            let s = add(&facets[a], &facets[b]);
            ys.push(scale(&s, -1.0 / norm(&s)));
        }
    }
    let k = cone.key();
    ys.push(scale(k, -1.0 / norm(k)));
    let mut txs: Vec<Vec<f64>> = vec![vec![0.0; n + 1]];
    for a in 0..=n {
        for s in [-0.5, -0.25, 0.25, 0.5] {
            let mut v = vec![0.0; n + 1];
            v[a] = s;
            txs.push(v);
        }
    }
    let mut out = Vec::new();
    for tx in &txs {
        for y in &ys {
            let v: Vec<f64> = tx.iter().chain(y).copied().collect();
            out.push(scale(&v, 1.0 / norm(&v)));
        }
    }
    out
}

/// Samples proximal normals to `graph V↑` at `(t_i, x_node, y)` by projecting
/// probe points `z + ρη` back onto the sampled graph, and evaluates the
/// proximal equation on every normal whose projection is `z` and unique.
pub fn proximal_residual(
    field: &ValueField,
    prob: &ControlProblem,
    i: usize,
    node: usize,
    y_index: usize,
    cfg: &ProximalConfig,
) -> Result<ProximalReport, TangentError> {
    let y = front_point(field, i, node, y_index)?;
    let x = field.grid().node(node);
    let t = field.time(i);
    let n = x.len();
    let density = graph_density(field);
    let mut report = ProximalReport {
        time_index: i,
        node,
        y: y.clone(),
        attempted: 0,
        not_nearest: 0,
        ambiguous: 0,
        robust: 0,
        normals: Vec::new(),
        max_residual: None,
        boundary_gap: None,
        boundary_budget: None,
    };
    if i == 0 || i == field.steps() {
        let j = if i == 0 { 1 } else { field.steps() - 1 };
        // one step moves the state at most M_f Δt, plus a cell for landing
        let reach = prob.constants.m_f * field.step() + field.grid().diagonal();
        let radius = reach.max(1e-12);
        let front = field.front(i, node).ok_or(TangentError::Undefined { time_index: i, node })?;
        let mut gap: f64 = 0.0;
        for q in front.points() {
            let mut best = f64::INFINITY;
            for (_, _, _, dx, f) in nearby(field, field.time(j), &x, radius) {
                if dx >= best {
                    break;
                }
                best = best.min(dx.hypot(f.upper_set_distance(q)));
            }
            gap = gap.max(best);
        }
        report.boundary_gap = Some(gap);
        report.boundary_budget = Some(reach + prob.constants.m_l * field.step());
        return Ok(report);
    }
    let verts: Vec<(Vec<f64>, Vec<f64>)> = prob.controls.iter().map(|u| (prob.f(&x, u), prob.l(&x, u))).collect();
    let facets = field.cone().facet_normals();
    for eta in probe_directions(field) {
        for factor in cfg.rho_factors {
            let rho = factor * density;
            report.attempted += 1;
            let q: Vec<f64> = [t].iter().chain(&x).chain(&y).zip(&eta).map(|(z, e)| z + rho * e).collect();
            let (qt, qx, qy) = (q[0], &q[1..=n], &q[n + 1..]);
            // nearest and second-nearest (slice, node, front point) candidates
            let mut best: Option<(f64, (usize, usize, usize), Vec<f64>)> = None;
            let mut second = f64::INFINITY;
            let radius = (cfg.uniqueness + 1.0) * rho;
            for (ti, nd, dt, dx, front) in nearby(field, qt, qx, radius) {
                if dt.hypot(dx) >= second {
                    break;
                }
                let base2 = dt * dt + dx * dx;
                for (k, f) in front.points().iter().enumerate() {
                    // ⟨n, ·⟩ is bounded below by ⟨n, f⟩ on f + P for unit facet normals n
                    let lower = facets.iter().map(|n| dot(n, f) - dot(n, qy)).fold(0.0, f64::max);
                    if (base2 + lower * lower).sqrt() >= second {
                        continue;
                    }
                    let proj = add(f, &front.cone().project(&sub(qy, f)).expect("dimensions agree"));
                    let d = (dt * dt + dx * dx + distance(qy, &proj).powi(2)).sqrt();
                    match &best {
                        Some((b, _, _)) if d >= *b => second = second.min(d),
                        _ => {
                            if let Some((b, _, _)) = &best {
                                second = second.min(*b);
                            }
                            best = Some((d, (ti, nd, k), proj));
                        }
                    }
                }
            }
            let Some((b, id, proj)) = best else { continue };
            let projects_to_z = id == (i, node, y_index) && distance(&proj, &y) <= 1e-9 * norm(&y).max(1.0) && (b - rho).abs() <= 1e-9 * rho.max(1.0);
            if !projects_to_z {
                report.not_nearest += 1;
                continue;
            }
            if second <= b * (1.0 + 1e-9) {
                report.ambiguous += 1;
                continue;
            }
            let separation = second / b;
            let robust = separation >= cfg.uniqueness;
            report.robust += robust as usize;
            let (xi, vstar, wneg) = (eta[0], &eta[1..=n], &eta[n + 1..]);
            let wstar = scale(wneg, -1.0);
            let inf = verts
                .iter()
                .map(|(f, l)| dot(vstar, f) + dot(&wstar, l))
                .fold(f64::INFINITY, f64::min);
            report.normals.push(RecoveredNormal {
                rho,
                normal: eta.clone(),
                residual: (xi + inf).abs(),
                separation,
                robust,
            });
        }
    }
    report.max_residual = report.normals.iter().map(|r| r.residual).reduce(f64::max);
    Ok(report)
}

/// Tangent estimate of the sampled `graph V↑` at `(t_i, x_node, y)` under the
/// exact slack profile: `z + h d` must lie on the sampled graph at every rung.
pub fn graph_tangent_estimate(
    field: &ValueField,
    i: usize,
    node: usize,
    y_index: usize,
    ladder: &Ladder,
    n_random: usize,
    seed: u64,
) -> Result<ConeEstimate, TangentError> {
    let y = front_point(field, i, node, y_index)?;
    let x = field.grid().node(node);
    let t = field.time(i);
    let n = x.len();
    let p = y.len();
    let dim = 1 + n + p;
    let mut dirs = sample_directions(dim, n_random, seed);
    let embed_y = |w: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; 1 + n];
        v.extend_from_slice(w);
        scale(&v, 1.0 / norm(&v))
    };
    let cone = field.cone();
    for g in cone.unit_generators() {
        dirs.push(embed_y(g));
        dirs.push(embed_y(&scale(g, -1.0)));
    }
    dirs.push(embed_y(cone.key()));
    for a in 0..dim {
        for s in [-1.0, 1.0] {
            let mut v = vec![0.0; dim];
            v[a] = s;
            dirs.push(v);
        }
    }
    let slack = SlackProfile::exact();
    let radius = graph_density(field);
    let inside = dirs
        .par_iter()
        .map(|d| {
            ladder.0.iter().all(|&h| {
                let pt = t + h * d[0];
                let px = add(&x, &scale(&d[1..=n], h));
                let py = add(&y, &scale(&d[n + 1..], h));
                graph_distance(field, pt, &px, &py, radius).map_or(false, |dist| dist / h <= slack.slack(h))
            })
        })
        .collect();
    Ok(ConeEstimate {
        directions: dirs,
        inside,
        ladder: ladder.clone(),
        slack,
    })
}

/// Largest `⟨normal, d⟩` over recovered normals and estimated tangent directions;
/// polarity requires it to be `≤ 0`.
pub fn polarity_excess(normals: &[RecoveredNormal], tangent: &ConeEstimate) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for nrm in normals {
        for d in tangent.in_directions() {
            worst = worst.max(dot(&nrm.normal, d));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn angles_in(est: &ConeEstimate) -> Vec<f64> {
        est.in_directions()
            .map(|d| d[1].atan2(d[0]).to_degrees().rem_euclid(360.0))
            .collect()
    }

    #[test]
    fn half_plane_tangent_cone() {
        let s = HalfSpace {
            normal: vec![0.0, 1.0],
            offset: 0.0,
        };
        let est = contingent_cone_estimate(&s, &[0.0, 0.0], &Ladder::default(), sample_directions(2, 720, 0), SlackProfile::default()).unwrap();
        for a in angles_in(&est) {
            assert!(a <= 180.0 + 1e-9, "{a}");
        }
        assert_eq!(est.count_in(), 361);
    }

    #[test]
    fn isolated_point_has_no_tangents() {
        let cloud = PointCloud::new(2, vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let est = contingent_cone_estimate(&CloudSet(cloud), &[0.0, 0.0], &Ladder::default(), sample_directions(2, 720, 0), SlackProfile::default()).unwrap();
        assert_eq!(est.count_in(), 0);
    }

    #[test]
    fn point_outside_set_is_rejected() {
        let s = HalfSpace {
            normal: vec![0.0, 1.0],
            offset: 0.0,
        };
        assert!(matches!(
            contingent_cone_estimate(&s, &[0.0, -1.0], &Ladder::default(), sample_directions(2, 8, 0), SlackProfile::default()),
            Err(TangentError::NotInSet(_))
        ));
    }

    #[test]
    fn cubic_roots() {
        // (s-1)(s-2)(s+3) = s³ - 7s + 6
        let mut r = depressed_cubic_roots(-7.0, 6.0);
        r.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(r[0], -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r[2], 2.0, epsilon = 1e-12);
        let r = depressed_cubic_roots(1.0, -2.0);
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn parabola_distance_matches_brute_force() {
        for &(a, b) in &[(-1.0, -0.5), (0.3, 0.0), (-0.2, -3.0), (2.0, 1.0), (0.0, -1.0)] {
            let brute = (0..=400_000)
                .map(|k| -4.0 + 8.0 * k as f64 / 400_000.0)
                .map(|s: f64| (s - a).hypot(s * s - b))
                .fold(f64::INFINITY, f64::min);
            let d = ParabolaEpigraph.distance(&[a, b]);
            let d = if b >= a * a { brute.min(0.0) } else { d };
            assert!((d - brute).abs() < 1e-4 || b >= a * a, "({a},{b}): {d} vs {brute}");
        }
    }

    #[test]
    fn segment_is_properly_minimal() {
        let up = UpperSegment {
            a: vec![0.0, 1.0],
            b: vec![1.0, 0.0],
            cone: OrderingCone::orthant(2),
        };
        let r = properly_minimal(&up, &[0.5, 0.5], &OrderingCone::orthant(2), &Ladder::default(), 720, SlackProfile::default()).unwrap();
        assert_eq!(r.class, Minimality::Proper);
        let r = properly_minimal(&up, &[1.0, 1.0], &OrderingCone::orthant(2), &Ladder::default(), 720, SlackProfile::default()).unwrap();
        assert_eq!(r.class, Minimality::NotMinimal);
    }

    #[test]
    fn recession_examples() {
        let dirs = sample_directions(2, 720, 0);
        let cloud = PointCloud::new(2, vec![vec![0.0, 0.0], vec![1.0, 3.0]]).unwrap();
        assert!(recession_probe(&CloudSet(cloud), &default_recession_radii(), &dirs, 1e-3).is_empty());

        let ray = ConeSet(OrderingCone::new(2, vec![vec![1.0, 1.0]]).unwrap());
        let r = recession_probe(&ray, &default_recession_radii(), &dirs, 1e-3);
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0][0], r[0][1], epsilon = 1e-12);

        let r = recession_probe(&ParabolaEpigraph, &default_recession_radii(), &dirs, 1e-3);
        assert_eq!(r.len(), 1);
        assert_abs_diff_eq!(r[0][0], 0.0, epsilon = 1e-12);
        assert!(r[0][1] > 0.0);
    }

    #[test]
    fn linear_map_derivative() {
        let map = AffineMap {
            a: vec![vec![2.0]],
            b: vec![1.0],
        };
        let grid = WGrid {
            half_width: 5.0,
            per_axis: 101,
        };
        let est = contingent_derivative_estimate(&map, &[0.3], &[1.6], &[1.5], &Ladder::default(), grid, SlackProfile::default()).unwrap();
        assert_eq!(est.inside, vec![vec![3.0]]);
        let epi = epiderivative_estimate(&map, &[0.3], &[1.6], &[1.5], &OrderingCone::orthant(1), &Ladder::default(), grid, SlackProfile::default()).unwrap();
        assert_abs_diff_eq!(epi.points[0][0], 3.0, epsilon = 0.01);
    }

    #[test]
    fn directions_are_unit() {
        for (d, n) in [(2, 16), (3, 64), (5, 32)] {
            let dirs = sample_directions(d, n, 1);
            assert_eq!(dirs.len(), n);
            for v in dirs {
                assert_abs_diff_eq!(norm(&v), 1.0, epsilon = 1e-12);
            }
        }
        assert!(angular_resolution(3, 512) > 0.05 && angular_resolution(3, 512) < 0.2);
    }
}
