//! Error and conditioning diagnostics: peak-gain norms over the unit
//! circle, vector and pointwise relative errors, and indicator-fidelity
//! statistics.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Frequency response samples over strictly increasing angles.
#[derive(Debug, Clone)]
pub struct FrequencySweep {
    pub omegas: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl FrequencySweep {
    pub fn new(omegas: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if omegas.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "frequency sweep",
                expected: omegas.len(),
                got: values.len(),
            });
        }
        if omegas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "sweep angles must be strictly increasing".into(),
            ));
        }
        Ok(Self { omegas, values })
    }
}

/// Evaluates a transfer function over the given angles on the unit circle.
pub fn sweep<F>(mut eval: F, omegas: &[f64]) -> Result<FrequencySweep>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let values = omegas
        .iter()
        .map(|&w| eval(Complex64::from_polar(1.0, w)))
        .collect::<Result<Vec<_>>>()?;
    FrequencySweep::new(omegas.to_vec(), values)
}

/// Peak modulus of `H(e^{iω})` over `ω ∈ [-π, π]`: a coarse uniform grid
/// followed by golden-section refinement around the best cell. Returns the
/// peak value and its angle. Grid points where the evaluator fails are
/// skipped; it is an error when every point fails.
pub fn hinf_norm<F>(mut eval: F, grid_size: usize, refine_iters: usize) -> Result<(f64, f64)>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    if grid_size < 16 {
        return Err(Error::InvalidParameter(
            "peak-gain grid needs at least 16 points".into(),
        ));
    }
    let pi = std::f64::consts::PI;
    let step = 2.0 * pi / grid_size as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut failures = 0usize;
    for i in 0..grid_size {
        let w = -pi + step * i as f64;
        match eval(Complex64::from_polar(1.0, w)) {
            Ok(v) => {
                let m = v.norm();
                if best.map_or(true, |(bv, _)| m > bv) {
                    best = Some((m, w));
                }
            }
            Err(_) => failures += 1,
        }
    }
    let (grid_val, grid_w) = best.ok_or_else(|| {
        Error::Numerical(format!(
            "transfer function evaluation failed at all {failures} grid points"
        ))
    })?;

    // Golden-section ascent on the bracket around the best grid cell.
    let mut magnitude = |w: f64| -> f64 {
        eval(Complex64::from_polar(1.0, w))
            .map(|v| v.norm())
            .unwrap_or(f64::NEG_INFINITY)
    };
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = grid_w - step;
    let mut b = grid_w + step;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = magnitude(x1);
    let mut f2 = magnitude(x2);
    for _ in 0..refine_iters {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = magnitude(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = magnitude(x1);
        }
    }
    let (mut val, mut w) = (grid_val, grid_w);
    for (fv, fw) in [(f1, x1), (f2, x2)] {
        if fv > val {
            val = fv;
            w = fw;
        }
    }
    Ok((val, w))
}

/// Euclidean relative error `‖truth - estimate‖₂ / ‖truth‖₂`.
pub fn vector_errors(truth: &[Complex64], estimate: &[Complex64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            context: "vector error",
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let denom: f64 = truth.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(Error::InvalidParameter(
            "reference vector must not be identically zero".into(),
        ));
    }
    let num: f64 = truth
        .iter()
        .zip(estimate.iter())
        .map(|(t, e)| (t - e).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// One pointwise relative error; `absolute` marks entries where the
/// reference was zero and the error is reported unnormalized.
#[derive(Debug, Clone, Copy)]
pub struct PointwiseError {
    pub value: f64,
    pub absolute: bool,
}

/// Elementwise relative errors `|truth - estimate| / |truth|`.
pub fn pointwise_errors(truth: &[Complex64], estimate: &[Complex64]) -> Result<Vec<PointwiseError>> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            context: "pointwise error",
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    Ok(truth
        .iter()
        .zip(estimate.iter())
        .map(|(t, e)| {
            let diff = (t - e).norm();
            if t.norm() == 0.0 {
                PointwiseError {
                    value: diff,
                    absolute: true,
                }
            } else {
                PointwiseError {
                    value: diff / t.norm(),
                    absolute: false,
                }
            }
        })
        .collect())
}

/// How well the indicator tracks the true relative error, on a log scale.
#[derive(Debug, Clone, Copy)]
pub struct IndicatorFidelity {
    /// Median of `|log10(indicator) - log10(error)|`.
    pub median_log_gap: f64,
    /// Fraction of points with that gap at most two decades.
    pub fraction_within_2_decades: f64,
    /// Number of points that entered the statistic.
    pub used: usize,
}

/// Compares an error indicator against true relative errors pointwise;
/// pairs with nonpositive or nonfinite entries are excluded.
pub fn indicator_fidelity(indicator: &[f64], eps_rel: &[f64]) -> Result<IndicatorFidelity> {
    if indicator.len() != eps_rel.len() {
        return Err(Error::DimensionMismatch {
            context: "indicator fidelity",
            expected: indicator.len(),
            got: eps_rel.len(),
        });
    }
    let mut gaps: Vec<f64> = indicator
        .iter()
        .zip(eps_rel.iter())
        .filter(|(s, e)| s.is_finite() && e.is_finite() && **s > 0.0 && **e > 0.0)
        .map(|(s, e)| (s.log10() - e.log10()).abs())
        .collect();
    if gaps.is_empty() {
        return Err(Error::InvalidParameter(
            "no usable indicator/error pairs after filtering".into(),
        ));
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let used = gaps.len();
    let median = if used % 2 == 1 {
        gaps[used / 2]
    } else {
        0.5 * (gaps[used / 2 - 1] + gaps[used / 2])
    };
    let within = gaps.iter().filter(|g| **g <= 2.0).count();
    Ok(IndicatorFidelity {
        median_log_gap: median,
        fraction_within_2_decades: within as f64 / used as f64,
        used,
    })
}

/// Two-norm condition number of a complex matrix.
pub fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let s = linalg::singular_values_complex(m);
    if s.is_empty() || s[s.len() - 1] == 0.0 {
        return f64::INFINITY;
    }
    s[0] / s[s.len() - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_norm() {
        let (v, _) = hinf_norm(|_| Ok(Complex64::new(1.0, 0.0)), 64, 10).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn real_pole_peak_at_zero() {
        let f = |z: Complex64| Ok(Complex64::new(1.0, 0.0) / (z - 0.9));
        let (v, w) = hinf_norm(f, 512, 40).unwrap();
        assert!((v - 10.0).abs() < 1e-6, "value {v}");
        assert!(w.abs() < 1e-3, "argmax {w}");
    }

    #[test]
    fn grid_refinement_self_consistency() {
        let sys = crate::lti::random_stable_system(5, 77).unwrap();
        let f = |z: Complex64| sys.eval_tf(z);
        let (v1, _) = hinf_norm(f, 4096, 40).unwrap();
        let f = |z: Complex64| sys.eval_tf(z);
        let (v2, _) = hinf_norm(f, 65536, 40).unwrap();
        assert!((v1 - v2).abs() <= 1e-4 * v2, "{v1} vs {v2}");
    }

    #[test]
    fn conjugation_invariance_for_real_systems() {
        let sys = crate::lti::random_stable_system(6, 5).unwrap();
        let (full, _) = hinf_norm(|z| sys.eval_tf(z), 2048, 30).unwrap();
        // Sweep over [0, π] only; realness mirrors the other half.
        let mut best = 0f64;
        for i in 0..1024 {
            let w = std::f64::consts::PI * i as f64 / 1023.0;
            let v = sys.eval_tf(Complex64::from_polar(1.0, w)).unwrap().norm();
            best = best.max(v);
        }
        assert!((best - full).abs() <= 1e-3 * full);
    }

    #[test]
    fn vector_error_reference_cases() {
        let t = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        assert_eq!(vector_errors(&t, &t).unwrap(), 0.0);
        let double: Vec<Complex64> = t.iter().map(|v| v * 2.0).collect();
        assert!((vector_errors(&t, &double).unwrap() - 1.0).abs() < 1e-15);
        let est = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let e = vector_errors(&t, &est).unwrap();
        assert!((e - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn vector_error_scale_invariance() {
        let t = vec![Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.4)];
        let e = vec![Complex64::new(0.31, -1.19), Complex64::new(1.9, 0.42)];
        let base = vector_errors(&t, &e).unwrap();
        let alpha = Complex64::new(-3.7, 1.1);
        let ts: Vec<Complex64> = t.iter().map(|v| v * alpha).collect();
        let es: Vec<Complex64> = e.iter().map(|v| v * alpha).collect();
        let scaled = vector_errors(&ts, &es).unwrap();
        assert!((base - scaled).abs() <= 1e-12 * base);
    }

    #[test]
    fn pointwise_zero_reference_flagged() {
        let t = vec![Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)];
        let e = vec![Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0)];
        let errs = pointwise_errors(&t, &e).unwrap();
        assert!(errs[0].absolute);
        assert!((errs[0].value - 0.5).abs() < 1e-15);
        assert!(!errs[1].absolute);
        assert!((errs[1].value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fidelity_reference_cases() {
        let eps = vec![1e-5, 1e-6, 1e-7];
        let same = indicator_fidelity(&eps, &eps).unwrap();
        assert_eq!(same.median_log_gap, 0.0);
        assert_eq!(same.fraction_within_2_decades, 1.0);
        let tenfold: Vec<f64> = eps.iter().map(|e| e * 10.0).collect();
        let shifted = indicator_fidelity(&tenfold, &eps).unwrap();
        assert!((shifted.median_log_gap - 1.0).abs() < 1e-12);
        assert_eq!(shifted.fraction_within_2_decades, 1.0);
    }

    #[test]
    fn fidelity_rejects_empty_filter_result() {
        assert!(indicator_fidelity(&[f64::INFINITY], &[0.0]).is_err());
    }

    #[test]
    fn condition_number_of_unitary_is_one() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        );
        assert!((condition_number(&m) - 1.0).abs() < 1e-12);
    }
}
