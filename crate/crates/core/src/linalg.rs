//! Small dense linear-algebra helpers shared by the analysis modules.

use nalgebra::{DMatrix, DVector};

/// `|det(M)| / prod_i ||row_i||`, a scale-free measure of singularity in
/// `[0, 1]` (Hadamard's inequality). Zero when any row vanishes.
pub fn hadamard_ratio(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let mut ratio = m.clone().lu().determinant().abs();
    for row in m.row_iter() {
        let norm = row.norm();
        if norm == 0.0 {
            return 0.0;
        }
        ratio /= norm;
    }
    ratio
}

/// Singular value decomposition with columns ordered by decreasing
/// singular value. Returns `(U, sigma, V)` with `M = U diag(sigma) V^T`.
pub fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "sorted_svd expects a square matrix");
    if n == 0 {
        return (DMatrix::zeros(0, 0), Vec::new(), DMatrix::zeros(0, 0));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("U requested");
    let v = svd.v_t.expect("V^T requested").transpose();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&k| svd.singular_values[k]).collect();
    let u = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    let v = DMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    (u, sigma, v)
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0_f64, |a, &b| a.max(b));
    let min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Number of singular values strictly above `threshold`.
pub fn numerical_rank(m: &DMatrix<f64>, threshold: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    m.clone()
        .singular_values()
        .iter()
        .filter(|&&s| s > threshold)
        .count()
}

/// Solves `A x = b` by partially pivoted LU followed by one step of
/// iterative refinement. `None` when a pivot is exactly zero.
pub fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu.solve(b)?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Some(x)
}

/// Smallest-to-largest pivot magnitude ratio of a partially pivoted LU;
/// a cheap singularity indicator.
pub fn pivot_ratio(u: &DMatrix<f64>) -> f64 {
    let diag = u.diagonal();
    let max = diag.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let min = diag.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Block-diagonal matrix `diag(a, b)`.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_ratio_is_scale_free() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert!((hadamard_ratio(&m) - 1.0).abs() < 1e-15);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(hadamard_ratio(&s) < 1e-15);
        assert_eq!(hadamard_ratio(&DMatrix::zeros(2, 2)), 0.0);
    }

    #[test]
    fn sorted_svd_reconstructs() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 5.0, 3.0, 0.0, 1.0]);
        let (u, s, v) = sorted_svd(&m);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let back = &u * DMatrix::from_diagonal(&DVector::from_vec(s)) * v.transpose();
        assert!((back - m).norm() < 1e-13);
    }

    #[test]
    fn rank_and_condition() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(numerical_rank(&m, 1e-12), 1);
        assert!(condition_number(&m) > 1e15);
        assert!((condition_number(&DMatrix::identity(3, 3)) - 1.0).abs() < 1e-15);
    }
}
