//! Finitely generated pointed convex ordering cones and the geometric
//! constants used by the Hausdorff–Lipschitz bound on minimal-element sets.
//!
//! A cone is stored in both representations: the generators it was built from
//! (V-representation) and the unit facet normals plus span equalities
//! (H-representation) computed once at construction. Membership through the
//! public [`OrderingCone::contains`] is the non-negative least-squares
//! residual test; dominance scans use the H-representation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nnls::{self, dot, norm};

/// Residual tolerance for cone membership.
pub const TAU_MEM: f64 = 1e-9;
/// Strict-interior margin.
pub const TAU_INT: f64 = 1e-9;

const SIGN_EPS: f64 = 1e-10;
const MAX_FACET_SUBSETS: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("a cone needs at least one generator")]
    NoGenerators,
    #[error("generator {0} is zero or not finite")]
    DegenerateGenerator(usize),
    #[error("generators do not span a pointed cone")]
    NotPointed,
    #[error("cone has empty interior (generators span {rank} of {dim} dimensions)")]
    NotSolid { rank: usize, dim: usize },
    #[error("inner generator {index} is not in the interior of the outer cone (margin {margin:e})")]
    InvalidPair { index: usize, margin: f64 },
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("facet enumeration exceeds {MAX_FACET_SUBSETS} generator subsets")]
    TooManyGenerators,
}

#[derive(Serialize, Deserialize)]
struct ConeSpec {
    dim: usize,
    generators: Vec<Vec<f64>>,
}

/// Pointed convex cone `cone{g_1, …, g_m} ⊂ R^p`. Cheap to clone.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ConeSpec", into = "ConeSpec")]
pub struct OrderingCone(Arc<ConeData>);

#[derive(Debug)]
struct ConeData {
    dim: usize,
    generators: Vec<Vec<f64>>,
    unit_generators: Vec<Vec<f64>>,
    /// Orthonormal basis of the orthogonal complement of the span.
    equalities: Vec<Vec<f64>>,
    /// Unit inward facet normals (within the span).
    facets: Vec<Vec<f64>>,
    /// Strictly positive on every nonzero cone element.
    key: Vec<f64>,
}

impl TryFrom<ConeSpec> for OrderingCone {
    type Error = ConeError;
    fn try_from(spec: ConeSpec) -> Result<Self, Self::Error> {
        OrderingCone::new(spec.dim, spec.generators)
    }
}

impl From<OrderingCone> for ConeSpec {
    fn from(c: OrderingCone) -> Self {
        ConeSpec {
            dim: c.0.dim,
            generators: c.0.generators.clone(),
        }
    }
}

impl PartialEq for OrderingCone {
    fn eq(&self, other: &Self) -> bool {
        self.0.dim == other.0.dim && self.0.generators == other.0.generators
    }
}

impl OrderingCone {
    pub fn new(dim: usize, generators: Vec<Vec<f64>>) -> Result<Self, ConeError> {
        if generators.is_empty() {
            return Err(ConeError::NoGenerators);
        }
        let mut unit_generators = Vec::with_capacity(generators.len());
        for (i, g) in generators.iter().enumerate() {
            if g.len() != dim {
                return Err(ConeError::DimensionMismatch {
                    expected: dim,
                    got: g.len(),
                });
            }
            let n = norm(g);
            if !(n.is_finite() && n > 0.0) {
                return Err(ConeError::DegenerateGenerator(i));
            }
            unit_generators.push(nnls::scale(g, 1.0 / n));
        }

        let span = nnls::orthonormal_basis(&unit_generators, 1e-10);
        let equalities = nnls::orthogonal_complement(&span, dim);
        let facets = enumerate_facets(&unit_generators, &span)?;

        let mut key = vec![0.0; dim];
        for n in &facets {
            for (k, v) in key.iter_mut().zip(n) {
                *k += v;
            }
        }
        // pointed iff the summed facet normals are strictly positive on every generator
        if unit_generators.iter().any(|g| dot(&key, g) <= SIGN_EPS) {
            return Err(ConeError::NotPointed);
        }

        Ok(Self(Arc::new(ConeData {
            dim,
            generators,
            unit_generators,
            equalities,
            facets,
            key,
        })))
    }

    /// The non-negative orthant `R^p_+`.
    pub fn orthant(dim: usize) -> Self {
        let gens = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        Self::new(dim, gens).expect("orthant is a valid cone")
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.0.generators
    }

    pub fn unit_generators(&self) -> &[Vec<f64>] {
        &self.0.unit_generators
    }

    pub fn facet_normals(&self) -> &[Vec<f64>] {
        &self.0.facets
    }

    pub fn rank(&self) -> usize {
        self.0.dim - self.0.equalities.len()
    }

    pub fn is_solid(&self) -> bool {
        self.0.equalities.is_empty()
    }

    /// Linear functional that is strictly increasing along the cone order.
    pub fn key(&self) -> &[f64] {
        &self.0.key
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), ConeError> {
        if v.len() != self.0.dim {
            return Err(ConeError::DimensionMismatch {
                expected: self.0.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Euclidean projection onto the cone.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, ConeError> {
        self.check_dim(v)?;
        Ok(nnls::nnls(&self.0.unit_generators, v).fitted)
    }

    /// Distance from `v` to the cone (the NNLS residual).
    pub fn distance(&self, v: &[f64]) -> Result<f64, ConeError> {
        self.check_dim(v)?;
        Ok(nnls::nnls(&self.0.unit_generators, v).residual)
    }

    /// `v` is a non-negative combination of the generators, up to `TAU_MEM`.
    pub fn contains(&self, v: &[f64]) -> Result<bool, ConeError> {
        let r = self.distance(v)?;
        Ok(r <= TAU_MEM * norm(v).max(1.0))
    }

    /// Worst violation of the H-representation: non-negative iff `v ∈ P`.
    pub fn h_margin(&self, v: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for n in &self.0.facets {
            m = m.min(dot(n, v));
        }
        for e in &self.0.equalities {
            m = m.min(-dot(e, v).abs());
        }
        m
    }

    /// Fast membership through the facet inequalities with relative tolerance `tol`.
    pub fn contains_h(&self, v: &[f64], tol: f64) -> bool {
        self.h_margin(v) >= -tol * norm(v).max(1.0)
    }

    /// Distance from a cone point `v` to the cone boundary; negative outside.
    pub fn interior_margin(&self, v: &[f64]) -> Result<f64, ConeError> {
        self.check_dim(v)?;
        self.require_solid()?;
        Ok(self
            .0
            .facets
            .iter()
            .map(|n| dot(n, v))
            .fold(f64::INFINITY, f64::min))
    }

    /// `B(v, TAU_INT) ⊂ P`.
    pub fn interior_contains(&self, v: &[f64]) -> Result<bool, ConeError> {
        Ok(self.interior_margin(v)? > TAU_INT)
    }

    fn require_solid(&self) -> Result<(), ConeError> {
        if self.is_solid() {
            Ok(())
        } else {
            Err(ConeError::NotSolid {
                rank: self.rank(),
                dim: self.0.dim,
            })
        }
    }

    /// Nearest point to the origin of `P_l = {x : B(x, l) ⊂ P}`.
    ///
    /// `P_l` is `{x : ⟨n_i, x⟩ ≥ l}` over the unit facet normals; the projection
    /// of the origin is found by Hildreth's dual coordinate ascent and then
    /// polished on the detected active set.
    pub fn deep_point(&self, l: f64) -> Result<Vec<f64>, ConeError> {
        self.require_solid()?;
        if !(l > 0.0 && l.is_finite()) {
            return Err(ConeError::NonPositiveRadius(l));
        }
        Ok(project_origin_onto_polyhedron(&self.0.facets, l))
    }

    /// `μ(P) = ‖d_1‖`.
    pub fn mu(&self) -> Result<f64, ConeError> {
        Ok(norm(&self.deep_point(1.0)?))
    }
}

fn project_origin_onto_polyhedron(normals: &[Vec<f64>], l: f64) -> Vec<f64> {
    let dim = normals[0].len();
    let m = normals.len();
    let mut lambda = vec![0.0; m];
    let mut x = vec![0.0; dim];
    for _sweep in 0..200_000 {
        let mut change = 0.0f64;
        for (i, n) in normals.iter().enumerate() {
            let step = (l - dot(n, &x)).max(-lambda[i]);
            if step != 0.0 {
                lambda[i] += step;
                for (xi, ni) in x.iter_mut().zip(n) {
                    *xi += step * ni;
                }
                change = change.max(step.abs());
            }
        }
        if change <= 1e-15 * l {
            break;
        }
    }

    // exact solve on the active set
    let active: Vec<&Vec<f64>> = normals
        .iter()
        .zip(&lambda)
        .filter(|(_, &lam)| lam > 1e-10 * l)
        .map(|(n, _)| n)
        .collect();
    if !active.is_empty() {
        let gram: Vec<Vec<f64>> = active
            .iter()
            .map(|a| active.iter().map(|b| dot(a, b)).collect())
            .collect();
        if let Some(mu) = nnls::solve_square(&gram, &vec![l; active.len()]) {
            if mu.iter().all(|&v| v >= 0.0) {
                let mut polished = vec![0.0; dim];
                for (a, coef) in active.iter().zip(&mu) {
                    for (p, ai) in polished.iter_mut().zip(a.iter()) {
                        *p += coef * ai;
                    }
                }
                let feasible = normals
                    .iter()
                    .all(|n| dot(n, &polished) >= l * (1.0 - 1e-10));
                if feasible {
                    return polished;
                }
            }
        }
    }
    x
}

fn enumerate_facets(
    unit_generators: &[Vec<f64>],
    span: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, ConeError> {
    let k = span.len();
    let coords: Vec<Vec<f64>> = unit_generators
        .iter()
        .map(|g| span.iter().map(|b| dot(g, b)).collect())
        .collect();
    let lift = |c: &[f64]| -> Vec<f64> {
        let dim = span[0].len();
        let mut out = vec![0.0; dim];
        for (ci, b) in c.iter().zip(span) {
            for (o, bi) in out.iter_mut().zip(b) {
                *o += ci * bi;
            }
        }
        out
    };

    let mut facets: Vec<Vec<f64>> = Vec::new();
    if k == 1 {
        let sign = if coords[0][0] >= 0.0 { 1.0 } else { -1.0 };
        facets.push(lift(&[sign]));
        return Ok(facets);
    }

    let m = coords.len();
    if binomial(m, k - 1) > MAX_FACET_SUBSETS {
        return Err(ConeError::TooManyGenerators);
    }
    for subset in Combinations::new(m, k - 1) {
        let rows: Vec<Vec<f64>> = subset.iter().map(|&i| coords[i].clone()).collect();
        let basis = nnls::orthonormal_basis(&rows, 1e-9);
        if basis.len() != k - 1 {
            continue;
        }
        let comp = nnls::orthogonal_complement(&basis, k);
        let Some(mut n) = comp.into_iter().next() else {
            continue;
        };
        let vals: Vec<f64> = coords.iter().map(|c| dot(c, &n)).collect();
        let pos = vals.iter().any(|&v| v > SIGN_EPS);
        let neg = vals.iter().any(|&v| v < -SIGN_EPS);
        if pos && neg {
            continue;
        }
        if neg {
            n.iter_mut().for_each(|v| *v = -*v);
        }
        if !pos && !neg {
            continue;
        }
        let full = lift(&n);
        if !facets.iter().any(|f| nnls::distance(f, &full) < 1e-9) {
            facets.push(full);
        }
    }
    Ok(facets)
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Inner cone `P` together with a solid comparison cone `C`, `P ⊂ int(C) ∪ {0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConePair {
    inner: OrderingCone,
    outer: OrderingCone,
}

impl ConePair {
    pub fn new(inner: OrderingCone, outer: OrderingCone) -> Result<Self, ConeError> {
        if inner.dim() != outer.dim() {
            return Err(ConeError::DimensionMismatch {
                expected: outer.dim(),
                got: inner.dim(),
            });
        }
        outer.require_solid()?;
        for (index, g) in inner.unit_generators().iter().enumerate() {
            let margin = outer.interior_margin(g)?;
            if margin <= TAU_INT {
                return Err(ConeError::InvalidPair { index, margin });
            }
        }
        Ok(Self { inner, outer })
    }

    pub fn inner(&self) -> &OrderingCone {
        &self.inner
    }

    pub fn outer(&self) -> &OrderingCone {
        &self.outer
    }

    /// `α(C,P)`: distance between the unit vectors of `P` and the complement of `int(C)`.
    pub fn alpha(&self) -> f64 {
        let mut a = f64::INFINITY;
        for n in self.outer.facet_normals() {
            for g in self.inner.unit_generators() {
                a = a.min(dot(n, g));
            }
        }
        a
    }

    /// `α′(C,P) = 1 + 1/α(C,P)`.
    pub fn alpha_prime(&self) -> f64 {
        1.0 + 1.0 / self.alpha()
    }

    /// `M(C,P) = (1 + α′) μ(C) + α′`.
    pub fn lipschitz_constant(&self) -> Result<f64, ConeError> {
        let ap = self.alpha_prime();
        Ok((1.0 + ap) * self.outer.mu()? + ap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cone(gens: &[[f64; 2]]) -> OrderingCone {
        OrderingCone::new(2, gens.iter().map(|g| g.to_vec()).collect()).unwrap()
    }

    #[test]
    fn membership_examples() {
        let p = OrderingCone::orthant(2);
        assert!(p.contains(&[1.0, 2.0]).unwrap());
        assert!(!p.contains(&[-1.0, 0.0]).unwrap());
        let q = cone(&[[1.0, 0.0], [1.0, 1.0]]);
        assert!(q.contains(&[2.0, 1.0]).unwrap());
        assert!(q.contains_h(&[2.0, 1.0], TAU_MEM));
        assert!(!q.contains(&[0.0, 1.0]).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = OrderingCone::orthant(2);
        assert!(matches!(
            p.contains(&[1.0, 2.0, 3.0]),
            Err(ConeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn interior_examples() {
        let p = OrderingCone::orthant(2);
        assert!(p.interior_contains(&[1.0, 1.0]).unwrap());
        assert!(!p.interior_contains(&[1.0, 0.0]).unwrap());
        assert!(!p.interior_contains(&[0.0, 0.0]).unwrap());
        let ray = cone(&[[1.0, 1.0]]);
        assert!(matches!(
            ray.interior_contains(&[1.0, 1.0]),
            Err(ConeError::NotSolid { .. })
        ));
    }

    #[test]
    fn rejects_non_pointed() {
        let r = OrderingCone::new(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(r.unwrap_err(), ConeError::NotPointed);
        let r = OrderingCone::new(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert_eq!(r.unwrap_err(), ConeError::NotPointed);
        let r = OrderingCone::new(2, vec![vec![0.0, 0.0]]);
        assert_eq!(r.unwrap_err(), ConeError::DegenerateGenerator(0));
    }

    #[test]
    fn generators_in_and_negatives_out() {
        let cones = [
            cone(&[[2.0, 1.0], [1.0, 2.0]]),
            cone(&[[1.0, -1.0], [1.0, 1.0]]),
            cone(&[[1.0, 1.0]]),
            OrderingCone::new(
                3,
                vec![
                    vec![1.0, 0.0, 0.0],
                    vec![0.0, 1.0, 0.0],
                    vec![0.0, 0.0, 1.0],
                    vec![1.0, 1.0, 0.2],
                ],
            )
            .unwrap(),
        ];
        for c in &cones {
            for g in c.generators() {
                assert!(c.contains(g).unwrap());
                let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                assert!(!c.contains(&neg).unwrap());
                assert!(!c.contains_h(&neg, TAU_MEM));
            }
        }
    }

    #[test]
    fn deep_point_values() {
        let p = OrderingCone::orthant(2);
        let d1 = p.deep_point(1.0).unwrap();
        assert_relative_eq!(d1[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(d1[1], 1.0, epsilon = 1e-12);
        let d2 = p.deep_point(2.0).unwrap();
        assert_relative_eq!(d2[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(d2[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.mu().unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(
            OrderingCone::orthant(3).mu().unwrap(),
            3f64.sqrt(),
            epsilon = 1e-12
        );
        let skew = cone(&[[2.0, 1.0], [1.0, 2.0]]);
        assert_relative_eq!(skew.mu().unwrap(), 10f64.sqrt(), epsilon = 1e-10);
        assert!(matches!(
            p.deep_point(0.0),
            Err(ConeError::NonPositiveRadius(_))
        ));
    }

    #[test]
    fn alpha_and_lipschitz_constant() {
        let c = OrderingCone::orthant(2);
        let pair = ConePair::new(cone(&[[2.0, 1.0], [1.0, 2.0]]), c.clone()).unwrap();
        assert_relative_eq!(pair.alpha(), 1.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(pair.alpha_prime(), 1.0 + 5f64.sqrt(), epsilon = 1e-12);
        let m = pair.lipschitz_constant().unwrap();
        let expected = (2.0 + 5f64.sqrt()) * 2f64.sqrt() + 1.0 + 5f64.sqrt();
        assert_relative_eq!(m, expected, epsilon = 1e-10);
        assert_relative_eq!(m, 9.22677, epsilon = 1e-5);

        let ray = ConePair::new(cone(&[[1.0, 1.0]]), c.clone()).unwrap();
        assert_relative_eq!(ray.alpha(), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_pair_is_rejected_before_alpha_vanishes() {
        let c = OrderingCone::orthant(2);
        let same = ConePair::new(c.clone(), c.clone());
        assert!(matches!(same, Err(ConeError::InvalidPair { .. })));
        for eps in [1e-2, 1e-4, 1e-6] {
            let p = cone(&[[1.0, eps], [eps, 1.0]]);
            let pair = ConePair::new(p, c.clone()).unwrap();
            assert!(pair.alpha() > 0.0);
        }
        let p = cone(&[[1.0, 1e-12], [1e-12, 1.0]]);
        assert!(ConePair::new(p, c).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = cone(&[[2.0, 1.0], [1.0, 2.0]]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"dim":2,"generators":[[2.0,1.0],[1.0,2.0]]}"#);
        let back: OrderingCone = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let bad: Result<OrderingCone, _> =
            serde_json::from_str(r#"{"dim":2,"generators":[[1,0],[-1,0]]}"#);
        assert!(bad.is_err());
    }
}
