//! Small dense linear-algebra helpers: non-negative least squares and
//! orthonormal bases, sized for cones with a handful of generators.

use nalgebra::{DMatrix, DVector};

/// Result of a non-negative least-squares solve `min ‖A λ − b‖, λ ≥ 0`.
#[derive(Clone, Debug)]
pub struct NnlsSolution {
    pub coefficients: Vec<f64>,
    /// `A λ`, the projection of `b` onto the cone spanned by the columns of `A`.
    pub fitted: Vec<f64>,
    pub residual: f64,
}

/// Lawson–Hanson active-set NNLS. `columns` are the columns of `A`.
pub fn nnls(columns: &[Vec<f64>], b: &[f64]) -> NnlsSolution {
    let m = b.len();
    let k = columns.len();
    let a = DMatrix::from_fn(m, k, |r, c| columns[c][r]);
    let bv = DVector::from_column_slice(b);

    let scale = columns
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0)
        * b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-13 * scale * (m.max(k) as f64);

    let mut x = DVector::<f64>::zeros(k);
    let mut passive = vec![false; k];
    let max_outer = 3 * k + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (&bv - &a * &x);
        let candidate = (0..k)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = candidate else { break };
        if w[t] <= tol {
            break;
        }
        passive[t] = true;

        let mut inner = 0;
        loop {
            inner += 1;
            let s = solve_passive(&a, &bv, &passive);
            let all_positive = (0..k).filter(|&j| passive[j]).all(|j| s[j] > 0.0);
            if all_positive || inner > 3 * k + 10 {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in 0..k {
                if passive[j] && s[j] <= 0.0 {
                    let denom = x[j] - s[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x = &x + (&s - &x) * alpha;
            for j in 0..k {
                if passive[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }

    let fitted = &a * &x;
    let residual = (&bv - &fitted).norm();
    NnlsSolution {
        coefficients: x.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        residual,
    }
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let mut out = DVector::<f64>::zeros(passive.len());
    if idx.is_empty() {
        return out;
    }
    let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
    let svd = sub.svd(true, true);
    if let Ok(sol) = svd.solve(b, 1e-14) {
        for (c, &j) in idx.iter().enumerate() {
            out[j] = sol[c];
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Orthonormal basis of `span(vectors)` by modified Gram–Schmidt.
pub fn orthonormal_basis(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        // two passes keep the basis orthogonal to working precision
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&r, q);
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= c * qi;
                }
            }
        }
        let n = norm(&r);
        if n > tol * norm(v).max(1.0) {
            basis.push(r.iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of an orthonormal `basis` in `R^dim`.
pub fn orthogonal_complement(basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut all = basis.to_vec();
    let start = all.len();
    for i in 0..dim {
        let mut r = vec![0.0; dim];
        r[i] = 1.0;
        for _ in 0..2 {
            for q in &all {
                let c = dot(&r, q);
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= c * qi;
                }
            }
        }
        let n = norm(&r);
        if n > 1e-8 {
            all.push(r.iter().map(|x| x / n).collect());
        }
        if all.len() == dim {
            break;
        }
    }
    all.split_off(start)
}

/// Solve a small square system; `None` when singular.
pub fn solve_square(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    let m = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
    let b = DVector::from_column_slice(rhs);
    m.lu().solve(&b).map(|s| s.iter().copied().collect())
}
