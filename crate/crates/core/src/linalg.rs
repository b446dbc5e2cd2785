//! Dense helpers for the small coefficient blocks.

use nalgebra::DMatrix;

pub fn to_matrix(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return None;
    }
    Some(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn determinant(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    m.clone().lu().determinant()
}

/// Classical adjugate (transposed cofactor matrix): `m · adj(m) = det(m) · I`.
pub fn adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |i, j| {
        // entry (i, j) is the cofactor of m[j][i]
        let minor = m.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * determinant(&minor)
    })
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let m = b.nrows();
        out.view_mut((off, off), (m, m)).copy_from(b);
        off += m;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjugate_identity() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, 0.3, 4.0, 1.0, -2.0, 0.0, 1.5]);
        let adj = adjugate(&m);
        let det = determinant(&m);
        let prod = &m * &adj;
        let want = DMatrix::<f64>::identity(3, 3) * det;
        assert!((prod - want).amax() < 1e-12 * det.abs().max(1.0));
    }

    #[test]
    fn adjugate_2x2_by_hand() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let adj = adjugate(&m);
        assert_eq!(adj, DMatrix::from_row_slice(2, 2, &[4.0, -2.0, -3.0, 1.0]));
        assert!((determinant(&m) + 2.0).abs() < 1e-14);
    }
}
