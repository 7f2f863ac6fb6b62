//! Subspace-style estimation of the system order from input/output data.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::informativity::build_hankel;
use crate::linalg;
use crate::lti::TimeSeries;

/// Outcome of [`estimate_order`].
#[derive(Debug, Clone)]
pub struct OrderEstimate {
    /// Estimated order: singular values of the projected output block at or
    /// above `threshold_used` times the largest one.
    pub n: usize,
    /// Inspected singular spectrum, nonincreasing.
    pub singular_values: Vec<f64>,
    /// Relative cutoff applied.
    pub threshold_used: f64,
    /// Block-Hankel depth used.
    pub depth: usize,
}

/// Default block depth: `min((T+1)/4, 150)`.
pub fn default_depth(ts: &TimeSeries) -> usize {
    (ts.len() / 4).min(150).max(1)
}

/// Estimates the order with default depth and a relative singular-value
/// threshold of `1e-6`.
pub fn estimate_order_default(ts: &TimeSeries) -> Result<OrderEstimate> {
    estimate_order(ts, default_depth(ts), 1e-6)
}

/// Estimates the system order by projecting the row space of the output
/// block Hankel matrix onto the orthogonal complement of the input row
/// space. The projection comes from the triangular factor of an orthogonal
/// factorization of the stacked data; the order is read off the singular
/// values of the projected block.
pub fn estimate_order(ts: &TimeSeries, depth: usize, sv_tol: f64) -> Result<OrderEstimate> {
    if depth < 1 {
        return Err(Error::InvalidParameter(
            "order estimation needs depth >= 1".into(),
        ));
    }
    if sv_tol <= 0.0 {
        return Err(Error::InvalidParameter(
            "singular-value threshold must be positive".into(),
        ));
    }
    if ts.len() < 4 * depth {
        return Err(Error::InsufficientData {
            context: "order estimation",
            needed: 4 * depth,
            got: ts.len(),
        });
    }
    let hu = build_hankel(ts.u(), depth - 1)?;
    let hy = build_hankel(ts.y(), depth - 1)?;
    let rows = 2 * depth;
    let cols = hu.ncols();
    let mut stacked_t = DMatrix::<f64>::zeros(cols, rows);
    stacked_t
        .view_mut((0, 0), (cols, depth))
        .copy_from(&hu.transpose());
    stacked_t
        .view_mut((0, depth), (cols, depth))
        .copy_from(&hy.transpose());
    // The R factor of the transposed stack is the transposed L factor of the
    // data; its trailing block carries the output rows with the input row
    // space projected out.
    let qr = stacked_t.qr();
    let r = qr.r();
    let l22 = r.view((depth, depth), (depth, depth)).transpose();
    let s = l22.svd(false, false).singular_values;
    let n = linalg::numerical_rank(s.as_slice(), depth, depth, Some(sv_tol));
    Ok(OrderEstimate {
        n,
        singular_values: s.as_slice().to_vec(),
        threshold_used: sv_tol,
        depth,
    })
}
