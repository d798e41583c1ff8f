//! Finite point clouds, minimal-element sets under an ordering cone, and the
//! set identities they satisfy (external stability, Hausdorff distance,
//! sandwich lemma, Hausdorff–Lipschitz certificate).
//!
//! Every cloud is finite, so it is its own closure and compactness is automatic.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cone::{ConeError, ConePair, OrderingCone, TAU_MEM};
use crate::nnls::{distance, dot, sub};

/// Points closer than this are the same point.
pub const TAU_EQ: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ParetoError {
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("operation requires a nonempty point set")]
    Empty,
    #[error("cloud {which} is not in K(C,P): its P-minimal and C-minimal sets differ")]
    NotInComparisonClass { which: usize },
    #[error(transparent)]
    Cone(#[from] ConeError),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Sort lexicographically and merge points within `TAU_EQ` of each other.
fn canonicalize(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    points.sort_by(|a, b| lex_cmp(a, b));
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        let dup = kept
            .iter()
            .rev()
            .take_while(|k| p[0] - k[0] <= TAU_EQ)
            .any(|k| distance(k, &p) <= TAU_EQ);
        if !dup {
            kept.push(p);
        }
    }
    kept
}

/// Finite subset of `R^p`, deduplicated and stored in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self, ParetoError> {
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(ParetoError::DimensionMismatch {
                    index,
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(ParetoError::NonFinite(index));
            }
        }
        let points = if dim == 0 {
            points.into_iter().take(1).collect()
        } else {
            canonicalize(points)
        };
        Ok(Self { dim, points })
    }

    /// Infers the dimension from the first point.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self, ParetoError> {
        let dim = points.first().map(|p| p.len()).ok_or(ParetoError::Empty)?;
        Self::new(dim, points)
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
        }
    }

    pub fn singleton(point: Vec<f64>) -> Self {
        Self {
            dim: point.len(),
            points: vec![point],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    pub fn translate(&self, c: &[f64]) -> Self {
        let pts = self
            .points
            .iter()
            .map(|p| p.iter().zip(c).map(|(a, b)| a + b).collect())
            .collect();
        Self::new(self.dim, pts).expect("translation keeps dimension")
    }

    pub fn scale(&self, s: f64) -> Self {
        let pts = self
            .points
            .iter()
            .map(|p| p.iter().map(|a| a * s).collect())
            .collect();
        Self::new(self.dim, pts).expect("scaling keeps dimension")
    }

    pub fn union(&self, other: &Self) -> Result<Self, ParetoError> {
        let mut pts = self.points.clone();
        pts.extend(other.points.iter().cloned());
        Self::new(self.dim, pts)
    }

    /// Some member lies within `TAU_EQ` of `y`.
    pub fn contains_point(&self, y: &[f64]) -> bool {
        self.points.iter().any(|p| distance(p, y) <= TAU_EQ)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_points_csv(&self.points, &mut w)
    }

    pub fn read_csv<R: BufRead>(r: R, dim: usize) -> Result<Self, ParetoError> {
        Self::new(dim, read_points_csv(r)?)
    }
}

impl Serialize for PointCloud {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.points.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PointCloud {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let points = Vec::<Vec<f64>>::deserialize(d)?;
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        PointCloud::new(dim, points).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn format_row(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format!("{v:?}"));
    }
    s
}

pub fn write_points_csv<W: Write>(points: &[Vec<f64>], w: &mut W) -> std::io::Result<()> {
    for p in points {
        writeln!(w, "{}", format_row(p))?;
    }
    Ok(())
}

pub fn read_points_csv<R: BufRead>(r: R) -> Result<Vec<Vec<f64>>, ParetoError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        out.push(row.map_err(|e| ParetoError::Csv {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Minimal-element set `E(S, P)`: an antichain under the cone order.
#[derive(Clone, Debug)]
pub struct ParetoFront {
    cone: OrderingCone,
    points: Vec<Vec<f64>>,
}

impl PartialEq for ParetoFront {
    fn eq(&self, other: &Self) -> bool {
        self.cone == other.cone && self.points == other.points
    }
}

impl ParetoFront {
    /// Wraps already-minimal points; the antichain property is not rechecked.
    pub fn from_minimal(cone: &OrderingCone, mut points: Vec<Vec<f64>>) -> Self {
        points.sort_by(|a, b| lex_cmp(a, b));
        Self {
            cone: cone.clone(),
            points,
        }
    }

    pub fn empty(cone: &OrderingCone) -> Self {
        Self {
            cone: cone.clone(),
            points: Vec::new(),
        }
    }

    pub fn cone(&self) -> &OrderingCone {
        &self.cone
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_cloud(&self) -> PointCloud {
        PointCloud {
            dim: self.cone.dim(),
            points: self.points.clone(),
        }
    }

    /// A pair `(i, j)` with `points[i] ∈ points[j] + P`, if the antichain property fails.
    pub fn antichain_violation(&self) -> Option<(usize, usize)> {
        for i in 0..self.points.len() {
            for j in 0..self.points.len() {
                if i != j && dominated_by(&self.cone, &self.points[i], &self.points[j]) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// `z ∈ E + P`.
    pub fn upper_set_contains(&self, z: &[f64]) -> bool {
        self.points
            .iter()
            .any(|f| distance(f, z) <= TAU_EQ || dominated_by(&self.cone, z, f))
    }

    /// Distance from `z` to `E + P`.
    pub fn upper_set_distance(&self, z: &[f64]) -> f64 {
        upper_set_distance(&self.points, &self.cone, z)
    }
}

/// Distance from `z` to `points + P`.
///
/// Each facet inequality bounds `d(z − f, P)` from below, so exact projections
/// are computed only for translates that could still beat the best so far.
pub fn upper_set_distance(points: &[Vec<f64>], cone: &OrderingCone, z: &[f64]) -> f64 {
    let mut bounds: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    for (k, f) in points.iter().enumerate() {
        let m = cone.h_margin(&sub(z, f));
        if m >= 0.0 {
            return 0.0;
        }
        bounds.push((-m, k));
    }
    bounds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = f64::INFINITY;
    for (lb, k) in bounds {
        if lb >= best {
            break;
        }
        best = best.min(cone.distance(&sub(z, &points[k])).expect("dimensions agree"));
    }
    best
}

/// `y ∈ x + P` (with relative tolerance `TAU_MEM`).
pub fn dominated_by(cone: &OrderingCone, y: &[f64], x: &[f64]) -> bool {
    cone.contains_h(&sub(y, x), TAU_MEM)
}

/// Strict dominance used by the minimal-element scans. Mutually dominating
/// points (only possible within tolerance) are resolved in favour of the one
/// with the smaller canonical index.
fn strictly_dominates(
    cone: &OrderingCone,
    points: &[Vec<f64>],
    dominator: usize,
    dominated: usize,
) -> bool {
    let (x, y) = (&points[dominator], &points[dominated]);
    if !dominated_by(cone, y, x) {
        return false;
    }
    !dominated_by(cone, x, y) || dominator < dominated
}

/// Reference `O(n²)` pairwise scan over canonicalized points.
pub fn minimal_points_reference(points: &[Vec<f64>], cone: &OrderingCone) -> Vec<Vec<f64>> {
    (0..points.len())
        .filter(|&i| !(0..points.len()).any(|j| j != i && strictly_dominates(cone, points, j, i)))
        .map(|i| points[i].clone())
        .collect()
}

/// Archive scan in increasing order of the cone key: a point can only be
/// dominated by points with a smaller key, so each candidate is compared
/// against the current archive only.
pub fn minimal_points(points: &[Vec<f64>], cone: &OrderingCone) -> Vec<Vec<f64>> {
    let key = cone.key();
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (dot(key, p), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut archive: Vec<usize> = Vec::new();
    for &(_, i) in &order {
        if archive
            .iter()
            .any(|&j| strictly_dominates(cone, points, j, i))
        {
            continue;
        }
        archive.retain(|&j| !strictly_dominates(cone, points, i, j));
        archive.push(i);
    }
    archive.sort_unstable();
    archive.into_iter().map(|i| points[i].clone()).collect()
}

/// `E(S, P)`.
pub fn minimal_elements(cloud: &PointCloud, cone: &OrderingCone) -> Result<ParetoFront, ParetoError> {
    if cloud.is_empty() {
        return Err(ParetoError::Empty);
    }
    check_cone_dim(cloud, cone)?;
    Ok(ParetoFront {
        cone: cone.clone(),
        points: minimal_points(cloud.points(), cone),
    })
}

fn check_cone_dim(cloud: &PointCloud, cone: &OrderingCone) -> Result<(), ParetoError> {
    if cloud.dim() != cone.dim() {
        return Err(ConeError::DimensionMismatch {
            expected: cone.dim(),
            got: cloud.dim(),
        }
        .into());
    }
    Ok(())
}

/// Every point of the cloud lies in `front + P`.
pub fn is_externally_stable(cloud: &PointCloud, front: &ParetoFront) -> bool {
    cloud.points().iter().all(|y| front.upper_set_contains(y))
}

/// `sup_{a ∈ A} d(a, B)`.
pub fn directed_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| distance(x, y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two nonempty clouds.
pub fn hausdorff(a: &PointCloud, b: &PointCloud) -> Result<f64, ParetoError> {
    hausdorff_points(a.points(), b.points())
}

pub fn hausdorff_points(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, ParetoError> {
    if a.is_empty() || b.is_empty() {
        return Err(ParetoError::Empty);
    }
    if a[0].len() != b[0].len() {
        return Err(ParetoError::DimensionMismatch {
            index: 0,
            expected: a[0].len(),
            got: b[0].len(),
        });
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// Outcome of checking `K₁ ⊂ K₂ ⊂ K₁ + P ⇒ E(K₁,P) = E(K₂,P)` on a pair.
#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub k1_subset_k2: bool,
    pub k2_in_k1_plus_cone: bool,
    pub fronts_agree: bool,
    pub front_distance: f64,
}

impl SandwichReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.k1_subset_k2 && self.k2_in_k1_plus_cone
    }

    pub fn holds(&self) -> bool {
        self.hypotheses_hold() && self.fronts_agree
    }
}

pub fn check_sandwich_lemma(
    k1: &PointCloud,
    k2: &PointCloud,
    cone: &OrderingCone,
) -> Result<SandwichReport, ParetoError> {
    let e1 = minimal_elements(k1, cone)?;
    let e2 = minimal_elements(k2, cone)?;
    let k1_subset_k2 = k1.points().iter().all(|p| k2.contains_point(p));
    let k2_in_k1_plus_cone = k2.points().iter().all(|p| e1.upper_set_contains(p));
    let fronts_agree = same_points(e1.points(), e2.points());
    let front_distance = hausdorff_points(e1.points(), e2.points())?;
    Ok(SandwichReport {
        k1_subset_k2,
        k2_in_k1_plus_cone,
        fronts_agree,
        front_distance,
    })
}

fn same_points(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| distance(x, y) <= TAU_EQ)
}

/// `K ∈ K(C,P)`: the P-minimal and C-minimal sets coincide.
pub fn in_comparison_class(cloud: &PointCloud, pair: &ConePair) -> Result<bool, ParetoError> {
    let ep = minimal_elements(cloud, pair.inner())?;
    let ec = minimal_elements(cloud, pair.outer())?;
    Ok(same_points(ep.points(), ec.points()))
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub h_inputs: f64,
    pub h_fronts: f64,
    pub constant: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl LipschitzReport {
    /// `h_fronts / h_inputs`, zero for identical inputs.
    pub fn ratio(&self) -> f64 {
        if self.h_inputs > 0.0 {
            self.h_fronts / self.h_inputs
        } else {
            0.0
        }
    }
}

/// Checks `H(E(K₁,P), E(K₂,P)) ≤ M(C,P) · H(K₁,K₂)` for two clouds in `K(C,P)`.
pub fn lipschitz_certificate(
    k1: &PointCloud,
    k2: &PointCloud,
    pair: &ConePair,
) -> Result<LipschitzReport, ParetoError> {
    for (which, k) in [(1, k1), (2, k2)] {
        if !in_comparison_class(k, pair)? {
            return Err(ParetoError::NotInComparisonClass { which });
        }
    }
    let constant = pair.lipschitz_constant()?;
    let e1 = minimal_elements(k1, pair.inner())?;
    let e2 = minimal_elements(k2, pair.inner())?;
    let h_inputs = hausdorff(k1, k2)?;
    let h_fronts = hausdorff_points(e1.points(), e2.points())?;
    let bound = constant * h_inputs;
    Ok(LipschitzReport {
        h_inputs,
        h_fronts,
        constant,
        bound,
        satisfied: h_fronts <= bound + TAU_EQ,
    })
}

/// A random cloud in `K(C,P)`: the `C`-minimal points of `n` uniform samples
/// in `[0, 1]^p`, plus as many points pushed strictly into `front + P`.
pub fn random_class_cloud<R: Rng>(pair: &ConePair, n: usize, rng: &mut R) -> PointCloud {
    let p = pair.inner().dim();
    let raw: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen::<f64>()).collect()).collect();
    let front = minimal_points(&raw, pair.outer());
    let gens = pair.inner().unit_generators();
    let mut pts = front.clone();
    for _ in 0..n {
        let a = &front[rng.gen_range(0..front.len())];
        let mut y = a.clone();
        for g in gens {
            let w = 0.05 + 0.5 * rng.gen::<f64>();
            for (yk, gk) in y.iter_mut().zip(g) {
                *yk += w * gk;
            }
        }
        pts.push(y);
    }
    PointCloud::new(p, pts).expect("finite samples")
}

/// `k` jittered by up to `sigma` per coordinate, retried with halved `sigma`
/// until it lands in `K(C,P)`; falls back to `k` itself.
pub fn perturb_in_class<R: Rng>(k: &PointCloud, pair: &ConePair, sigma: f64, rng: &mut R) -> PointCloud {
    let mut s = sigma;
    for _ in 0..30 {
        let pts = k
            .points()
            .iter()
            .map(|y| y.iter().map(|v| v + s * (2.0 * rng.gen::<f64>() - 1.0)).collect())
            .collect();
        let cand = PointCloud::new(k.dim(), pts).expect("finite samples");
        if in_comparison_class(&cand, pair).unwrap_or(false) {
            return cand;
        }
        s *= 0.5;
    }
    k.clone()
}
