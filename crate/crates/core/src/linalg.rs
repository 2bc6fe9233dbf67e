//! Small dense linear algebra on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default condition-number threshold separating regular from singular.
pub const COND_TOL: f64 = 1e12;

fn norm1(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse via LU with partial pivoting together with the 1-norm condition number.
/// Returns `None` when the factorization is exactly singular or non-finite.
pub fn inverse_with_condition(a: &Mat) -> Option<(Mat, f64)> {
    assert!(a.is_square(), "inverse of a non-square matrix");
    if a.nrows() == 0 {
        return Some((Mat::zeros(0, 0), 1.0));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let inv = a.clone().lu().try_inverse()?;
    if inv.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let cond = norm1(a) * norm1(&inv);
    Some((inv, cond))
}

/// 1-norm condition estimate; infinite for singular input.
pub fn condition(a: &Mat) -> f64 {
    inverse_with_condition(a).map_or(f64::INFINITY, |(_, c)| c)
}

/// Inverse that fails with a regularity error when the condition exceeds `cond_tol`.
pub fn regular_inverse(a: &Mat, cond_tol: f64, what: &str) -> Result<(Mat, f64)> {
    match inverse_with_condition(a) {
        Some((inv, c)) if c <= cond_tol => Ok((inv, c)),
        Some((_, c)) => Err(Error::NotRegular {
            what: what.to_string(),
            condition: c,
        }),
        None => Err(Error::NotRegular {
            what: what.to_string(),
            condition: f64::INFINITY,
        }),
    }
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve(a: &Mat, b: &Vector, cond_tol: f64, what: &str) -> Result<Vector> {
    let (inv, _) = regular_inverse(a, cond_tol, what)?;
    Ok(inv * b)
}

/// Numerical rank from singular values relative to the largest one.
pub fn rank(a: &Mat, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let s = a.clone().svd(false, false).singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Orthonormal basis of the null space of `a` (columns).
pub fn null_space(a: &Mat, rel_tol: f64) -> Mat {
    let n = a.ncols();
    // Pad to at least n rows so the thin SVD exposes every right singular vector.
    let mut padded = Mat::zeros(a.nrows().max(n), n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<Vector> = (0..n)
        .filter(|&k| svd.singular_values[k] <= rel_tol * smax.max(f64::MIN_POSITIVE))
        .map(|k| vt.row(k).transpose())
        .collect();
    if cols.is_empty() {
        Mat::zeros(n, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

/// Euclidean residual of the least-squares fit of `target` by the columns of `basis`.
pub fn span_residual(basis: &Mat, target: &Vector) -> f64 {
    if basis.ncols() == 0 {
        return target.norm();
    }
    let svd = basis.clone().svd(true, true);
    let coeffs = svd
        .solve(target, 1e-13 * svd.singular_values.max())
        .expect("SVD solve with both factors");
    (basis * coeffs - target).norm()
}

/// Minimum-norm `dx` with `a (x + dx) = a x - resid`, i.e. `a dx = -resid`, for full row rank `a`.
pub fn min_norm_correction(a: &Mat, resid: &Vector, cond_tol: f64) -> Result<Vector> {
    let gram = a * a.transpose();
    let (inv, _) = regular_inverse(&gram, cond_tol, "constraint Gram matrix")
        .map_err(|_| Error::Rank("constraint rows are linearly dependent".into()))?;
    Ok(-(a.transpose() * (inv * resid)))
}

fn combinations(n: usize, r: usize, limit: usize) -> Option<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        if out.len() > limit {
            return None;
        }
        let Some(i) = (0..r).rev().find(|&i| idx[i] < n - r + i) else {
            return Some(out);
        };
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Columns of the best-conditioned `r x r` minor of an `r x n` matrix.
/// Exhaustive for moderate sizes, greedy column pivoting otherwise.
pub fn best_conditioned_columns(a: &Mat) -> Result<Vec<usize>> {
    let (r, n) = a.shape();
    if r == 0 || r > n {
        return Err(Error::Rank(format!("cannot select {r} columns out of {n}")));
    }
    let best = match combinations(n, r, 20_000) {
        Some(all) => all
            .into_iter()
            .map(|cols| {
                let c = condition(&a.select_columns(&cols));
                (c, cols)
            })
            .filter(|(c, _)| c.is_finite())
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .map(|(_, cols)| cols),
        None => greedy_columns(a),
    };
    best.ok_or_else(|| Error::Rank("no nonsingular square minor".into()))
}

fn greedy_columns(a: &Mat) -> Option<Vec<usize>> {
    let (r, n) = a.shape();
    let mut work = a.clone();
    let mut chosen = Vec::with_capacity(r);
    for _ in 0..r {
        let (k, norm) = (0..n)
            .filter(|k| !chosen.contains(k))
            .map(|k| (k, work.column(k).norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if norm == 0.0 {
            return None;
        }
        let q = work.column(k) / norm;
        for j in 0..n {
            let proj = q.dot(&work.column(j));
            let updated = work.column(j) - &q * proj;
            work.set_column(j, &updated);
        }
        chosen.push(k);
    }
    chosen.sort_unstable();
    Some(chosen)
}
