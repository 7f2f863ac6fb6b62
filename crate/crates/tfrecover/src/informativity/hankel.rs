//! Hankel matrices of trajectory windows.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::TimeSeries;

/// Hankel matrix of depth `depth` of a sample sequence: entry `(i, j)` is
/// `seq[i + j]`, giving `depth + 1` rows and `len - depth` columns.
pub fn build_hankel(seq: &[f64], depth: usize) -> Result<DMatrix<f64>> {
    if seq.len() < depth + 1 {
        return Err(Error::InsufficientData {
            context: "Hankel matrix",
            needed: depth + 1,
            got: seq.len(),
        });
    }
    let cols = seq.len() - depth;
    Ok(DMatrix::from_fn(depth + 1, cols, |i, j| seq[i + j]))
}

/// Stacked input-over-output Hankel matrix of one trajectory window.
#[derive(Debug, Clone)]
pub struct HankelStack {
    /// `2(depth+1) x (window_length - depth)` stacked matrix.
    pub matrix: DMatrix<f64>,
    pub depth: usize,
    pub window_start: usize,
    pub window_length: usize,
}

/// Builds the stacked Hankel matrix of the window
/// `[window_start, window_start + window_length)` at the given depth.
pub fn build_gn(
    ts: &TimeSeries,
    depth: usize,
    window_start: usize,
    window_length: usize,
) -> Result<HankelStack> {
    if window_start + window_length > ts.len() {
        return Err(Error::InvalidParameter(format!(
            "window [{window_start}, {}) exceeds trajectory length {}",
            window_start + window_length,
            ts.len()
        )));
    }
    if window_length < depth + 1 {
        return Err(Error::InsufficientData {
            context: "stacked Hankel window",
            needed: depth + 1,
            got: window_length,
        });
    }
    let range = window_start..window_start + window_length;
    let hu = build_hankel(&ts.u()[range.clone()], depth)?;
    let hy = build_hankel(&ts.y()[range], depth)?;
    let rows = hu.nrows() + hy.nrows();
    let cols = hu.ncols();
    let mut matrix = DMatrix::<f64>::zeros(rows, cols);
    matrix.view_mut((0, 0), (hu.nrows(), cols)).copy_from(&hu);
    matrix
        .view_mut((hu.nrows(), 0), (hy.nrows(), cols))
        .copy_from(&hy);
    Ok(HankelStack {
        matrix,
        depth,
        window_start,
        window_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn definition_unrolled() {
        let h = build_hankel(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0, 3.0, 4.0, 5.0]);
        assert_eq!(h, expect);
    }

    #[test]
    fn antidiagonals_are_constant() {
        let seq: Vec<f64> = (0..30).map(|k| (k as f64 * 0.37).sin()).collect();
        let h = build_hankel(&seq, 7).unwrap();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                for i2 in 0..h.nrows() {
                    let j2 = (i + j).checked_sub(i2);
                    if let Some(j2) = j2 {
                        if j2 < h.ncols() {
                            assert_eq!(h[(i, j)], h[(i2, j2)]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn constant_sequence_has_rank_one() {
        let h = build_hankel(&vec![3.5; 12], 4).unwrap();
        let s = h.clone().svd(false, false).singular_values;
        assert!(s[0] > 0.0);
        assert_eq!(
            linalg::numerical_rank(s.as_slice(), h.nrows(), h.ncols(), Some(1e-12)),
            1
        );
    }

    #[test]
    fn impulse_response_rank_matches_order() {
        // Depth-1 output Hankel of an order-1 system has rank 1.
        let seq: Vec<f64> = (0..20).map(|k| 0.5f64.powi(k)).collect();
        let h = build_hankel(&seq, 1).unwrap();
        let s = h.clone().svd(false, false).singular_values;
        assert_eq!(
            linalg::numerical_rank(s.as_slice(), h.nrows(), h.ncols(), Some(1e-12)),
            1
        );
    }

    #[test]
    fn too_short_sequence_reports_requirement() {
        let err = build_hankel(&[1.0, 2.0], 4).unwrap_err();
        match err {
            Error::InsufficientData { needed, got, .. } => {
                assert_eq!(needed, 5);
                assert_eq!(got, 2);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn stacked_window_shape_and_overlap() {
        let sys = crate::lti::random_stable_system(3, 4).unwrap();
        let u: Vec<f64> = (0..40).map(|k| ((k * k) as f64 * 0.11).sin()).collect();
        let ts = sys.simulate(&u, &nalgebra::DVector::zeros(3)).unwrap();
        let n = 3;
        let t = 12;
        let g = build_gn(&ts, n, 5, t + 1).unwrap();
        assert_eq!(g.matrix.nrows(), 2 * (n + 1));
        assert_eq!(g.matrix.ncols(), t - n + 1);
        // Overlapping windows share the columns indexed by absolute time.
        let g2 = build_gn(&ts, n, 8, t + 1).unwrap();
        for j in 0..g.matrix.ncols() - 3 {
            let col_a = g.matrix.column(j + 3);
            let col_b = g2.matrix.column(j);
            assert_eq!(col_a, col_b);
        }
        // Full window reproduces the unwindowed stack.
        let gf = build_gn(&ts, n, 0, ts.len()).unwrap();
        assert_eq!(gf.matrix.ncols(), ts.len() - n);
    }

    #[test]
    fn window_out_of_range_rejected() {
        let sys = crate::lti::random_stable_system(2, 4).unwrap();
        let ts = sys
            .simulate(&vec![1.0; 20], &nalgebra::DVector::zeros(2))
            .unwrap();
        assert!(build_gn(&ts, 2, 15, 10).is_err());
        assert!(build_gn(&ts, 5, 0, 4).is_err());
    }
}
