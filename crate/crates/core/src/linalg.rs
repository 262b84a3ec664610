//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Singular values below `RANK_REL_TOL * σ_max` count as zero.
pub const RANK_REL_TOL: f64 = 1e-8;
const RANK_ABS_FLOOR: f64 = 1e-12;

/// Numerical rank of a row-major matrix.
pub fn rank(rows: &[Vec<f64>]) -> usize {
    if rows.is_empty() || rows[0].is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
    rank_of(&m)
}

pub fn rank_of(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max <= RANK_ABS_FLOOR {
        return 0;
    }
    sv.iter().filter(|s| **s > RANK_REL_TOL * max).count()
}

/// Least-squares solution of `A c ≈ b` (columns of `A` given as vectors),
/// with singular values truncated at the rank tolerance.
/// Returns the coefficients and the residual norm.
pub fn least_squares(columns: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64) {
    let n = b.len();
    let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if columns.is_empty() {
        return (Vec::new(), bnorm);
    }
    let a = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let rhs = DVector::from_column_slice(b);
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if max <= RANK_ABS_FLOOR {
        return (vec![0.0; columns.len()], bnorm);
    }
    let c = svd
        .solve(&rhs, RANK_REL_TOL * max)
        .unwrap_or_else(|_| DVector::zeros(columns.len()));
    let r = (&a * &c - rhs).norm();
    (c.iter().cloned().collect(), r)
}

/// Orthonormal basis (as rows) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let ncols = m.ncols();
    if m.nrows() == 0 {
        return (0..ncols)
            .map(|i| (0..ncols).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    // Pad to at least square so the SVD exposes all right singular vectors.
    let padded = if m.nrows() < ncols {
        let mut p = DMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = if max <= RANK_ABS_FLOOR { f64::INFINITY } else { RANK_REL_TOL * max };
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol)
        .map(|(i, _)| vt.row(i).iter().cloned().collect())
        .collect()
}

/// Projector onto the orthogonal complement of the span of `columns` in `R^n`.
pub fn complement_projector(columns: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::<f64>::identity(n, n);
    if columns.is_empty() {
        return p;
    }
    let a = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
    let svd = a.svd(true, false);
    let u = svd.u.expect("requested U");
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if max <= RANK_ABS_FLOOR {
        return p;
    }
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > RANK_REL_TOL * max {
            let col = u.column(k);
            p -= &col * col.transpose();
        }
    }
    p
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&[vec![0.0, 0.0]]), 0);
        assert_eq!(rank(&[vec![1.0, 1.0], vec![2.0, 2.0]]), 1);
        assert_eq!(rank(&[vec![1.0, 0.0], vec![0.0, 1.0]]), 2);
    }

    #[test]
    fn least_squares_line_through_one_one() {
        // (0,1) projected on span{(1,1)} leaves residual 1/sqrt(2).
        let (c, r) = least_squares(&[vec![1.0, 1.0]], &[0.0, 1.0]);
        assert!((c[0] - 0.5).abs() < 1e-12);
        assert!((r - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn complement_projector_kills_the_span() {
        let p = complement_projector(&[vec![1.0, 1.0]], 2);
        let v = &p * DVector::from_vec(vec![2.0, 2.0]);
        assert!(v.norm() < 1e-12);
        let w = &p * DVector::from_vec(vec![1.0, -1.0]);
        assert!((w.norm() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn null_space_dimensions() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        assert_eq!(null_space(&m).len(), 2);
        let z = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(null_space(&z).len(), 2);
    }
}
