//! Rational transfer functions in coefficient form.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::StateSpaceSystem;

/// Order-`n` rational function `H(z) = Q(z) / P(z)` with real coefficients,
/// `P` monic of degree `n`, `Q` of degree at most `n` (so proper transfer
/// functions with a nonzero feedthrough are representable).
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransferFunction {
    /// Denominator coefficients `p0..p(n-1)`, low order first; the leading
    /// `z^n` coefficient is an implied one.
    p: Vec<f64>,
    /// Numerator coefficients `q0..qn`, low order first.
    q: Vec<f64>,
}

impl RationalTransferFunction {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() + 1 {
            return Err(Error::DimensionMismatch {
                context: "numerator coefficients (must be denominator order + 1)",
                expected: p.len() + 1,
                got: q.len(),
            });
        }
        Ok(Self { p, q })
    }

    pub fn order(&self) -> usize {
        self.p.len()
    }

    pub fn denominator(&self) -> &[f64] {
        &self.p
    }

    pub fn numerator(&self) -> &[f64] {
        &self.q
    }

    /// Evaluates `Q(z) / P(z)`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.eval_num(z) / self.eval_den(z)
    }

    /// Evaluates the derivative `(Q'P - QP') / P²`.
    pub fn eval_deriv(&self, z: Complex64) -> Complex64 {
        let p = self.eval_den(z);
        let q = self.eval_num(z);
        let dp = horner(&poly_deriv(&monic(&self.p)), z);
        let dq = horner(&poly_deriv(&self.q), z);
        (dq * p - q * dp) / (p * p)
    }

    fn eval_den(&self, z: Complex64) -> Complex64 {
        horner(&monic(&self.p), z)
    }

    fn eval_num(&self, z: Complex64) -> Complex64 {
        horner(&self.q, z)
    }

    /// Builds the coefficient form from a conjugate-closed set of poles and
    /// residues plus a constant offset:
    /// `H(z) = offset + Σ residues[i] / (z - poles[i])`.
    pub fn from_pole_residues(
        poles: &[Complex64],
        residues: &[Complex64],
        offset: f64,
    ) -> Result<Self> {
        if poles.len() != residues.len() {
            return Err(Error::DimensionMismatch {
                context: "pole/residue lists",
                expected: poles.len(),
                got: residues.len(),
            });
        }
        let groups = group_conjugate(poles, residues)?;
        // Real factors of the denominator, one per group.
        let factors: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| match g {
                PoleGroup::Real { pole, .. } => vec![-pole, 1.0],
                PoleGroup::Pair { pole, .. } => {
                    vec![pole.norm_sqr(), -2.0 * pole.re, 1.0]
                }
            })
            .collect();
        let den = factors.iter().fold(vec![1.0], |acc, f| poly_mul(&acc, f));
        let n = den.len() - 1;
        let mut num = vec![0.0; n + 1];
        poly_add_scaled(&mut num, &den, offset);
        for (idx, g) in groups.iter().enumerate() {
            // Product of all other factors = den / factor(idx).
            let rest = factors
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != idx)
                .fold(vec![1.0], |acc, (_, f)| poly_mul(&acc, f));
            match g {
                PoleGroup::Real { residue, .. } => {
                    poly_add_scaled(&mut num, &rest, *residue);
                }
                PoleGroup::Pair { pole, residue } => {
                    let (g1, h1) = (residue.re, residue.im);
                    // residue/(z-p) + conj pair over the common quadratic.
                    let lin = vec![-2.0 * (g1 * pole.re + h1 * pole.im), 2.0 * g1];
                    let contrib = poly_mul(&rest, &lin);
                    poly_add_scaled(&mut num, &contrib, 1.0);
                }
            }
        }
        num.truncate(n + 1);
        let p = den[..n].to_vec();
        RationalTransferFunction::new(p, num)
    }
}

pub(crate) enum PoleGroup {
    Real { pole: f64, residue: f64 },
    Pair { pole: Complex64, residue: Complex64 },
}

pub(crate) fn group_conjugate(
    poles: &[Complex64],
    residues: &[Complex64],
) -> Result<Vec<PoleGroup>> {
    let mut used = vec![false; poles.len()];
    let mut groups = Vec::new();
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        let tol = 1e-8 * (1.0 + poles[i].norm());
        if poles[i].im.abs() <= tol {
            groups.push(PoleGroup::Real {
                pole: poles[i].re,
                residue: residues[i].re,
            });
            used[i] = true;
            continue;
        }
        // Find the closest unused conjugate partner.
        let mut best: Option<(usize, f64)> = None;
        for (j, used_j) in used.iter().enumerate().skip(i + 1) {
            if *used_j {
                continue;
            }
            let d = (poles[j] - poles[i].conj()).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        match best {
            Some((j, d)) if d <= 1e-6 * (1.0 + poles[i].norm()) => {
                used[i] = true;
                used[j] = true;
                let rep = if poles[i].im > 0.0 { i } else { j };
                groups.push(PoleGroup::Pair {
                    pole: poles[rep],
                    residue: residues[rep],
                });
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "pole set is not closed under conjugation: no partner for {}",
                    poles[i]
                )))
            }
        }
    }
    Ok(groups)
}

fn monic(p: &[f64]) -> Vec<f64> {
    let mut full = p.to_vec();
    full.push(1.0);
    full
}

fn horner(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn poly_deriv(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_add_scaled(acc: &mut [f64], other: &[f64], scale: f64) {
    for (a, &o) in acc.iter_mut().zip(other.iter()) {
        *a += scale * o;
    }
}

/// Coefficient form of `cᵀ(zI - A)⁻¹b` via the Faddeev-LeVerrier recursion,
/// which yields the characteristic polynomial and the adjugate expansion in
/// one pass.
pub(super) fn from_state_space(sys: &StateSpaceSystem) -> RationalTransferFunction {
    let n = sys.order();
    let a = sys.a();
    let mut m = DMatrix::<f64>::identity(n, n);
    // p[i] holds the z^i coefficient of the characteristic polynomial.
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n + 1];
    q[n - 1] = (sys.c().transpose() * &m * sys.b())[(0, 0)];
    let am = a * &m;
    p[n - 1] = -am.trace();
    let mut am_prev = am;
    for k in 2..=n {
        m = &am_prev + DMatrix::<f64>::identity(n, n) * p[n - k + 1];
        q[n - k] = (sys.c().transpose() * &m * sys.b())[(0, 0)];
        let am = a * &m;
        p[n - k] = -am.trace() / k as f64;
        am_prev = am;
    }
    RationalTransferFunction { p, q }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn scalar_coefficients() {
        let sys = StateSpaceSystem::new(
            DMatrix::from_element(1, 1, 0.5),
            DVector::from_element(1, 2.0),
            DVector::from_element(1, 3.0),
        )
        .unwrap();
        let rat = sys.transfer_function();
        assert_eq!(rat.denominator(), &[-0.5]);
        assert_eq!(rat.numerator(), &[6.0, 0.0]);
        let z = Complex64::new(2.0, 0.0);
        assert!((rat.eval(z) - Complex64::new(4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn two_mode_expansion() {
        let sys = StateSpaceSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]),
            DVector::from_row_slice(&[1.0, 1.0]),
            DVector::from_row_slice(&[1.0, 1.0]),
        )
        .unwrap();
        let rat = sys.transfer_function();
        // 1/(z-0.5) + 1/(z-0.25) = (2z - 0.75) / (z² - 0.75z + 0.125)
        assert!((rat.denominator()[0] - 0.125).abs() < 1e-14);
        assert!((rat.denominator()[1] + 0.75).abs() < 1e-14);
        assert!((rat.numerator()[0] + 0.75).abs() < 1e-14);
        assert!((rat.numerator()[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn coefficient_form_tracks_resolvent_on_the_circle() {
        for seed in [2u64, 13, 29] {
            let sys = crate::lti::random_stable_system(8, seed).unwrap();
            let rat = sys.transfer_function();
            for k in 0..50 {
                let z = Complex64::from_polar(1.0, 1e-3 + k as f64 * 0.125);
                let truth = sys.eval_tf(z).unwrap();
                let got = rat.eval(z);
                assert!(
                    (got - truth).norm() <= 1e-8 * truth.norm().max(1.0),
                    "seed {seed}: mismatch at {z}"
                );
            }
        }
    }

    #[test]
    fn pole_residue_round_trip() {
        let poles = vec![
            Complex64::new(0.4, 0.3),
            Complex64::new(0.4, -0.3),
            Complex64::new(-0.6, 0.0),
        ];
        let residues = vec![
            Complex64::new(1.0, -0.5),
            Complex64::new(1.0, 0.5),
            Complex64::new(2.0, 0.0),
        ];
        let rat = RationalTransferFunction::from_pole_residues(&poles, &residues, 0.7).unwrap();
        assert_eq!(rat.order(), 3);
        for k in 0..10 {
            let z = Complex64::from_polar(1.3, 0.2 + 0.6 * k as f64);
            let direct: Complex64 = poles
                .iter()
                .zip(residues.iter())
                .map(|(p, r)| r / (z - p))
                .sum::<Complex64>()
                + 0.7;
            assert!((rat.eval(z) - direct).norm() < 1e-12 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let rat = RationalTransferFunction::new(vec![0.125, -0.75], vec![-0.75, 2.0, 0.3]).unwrap();
        let z = Complex64::new(0.9, 0.4);
        let h = 1e-6;
        let fd = (rat.eval(z + h) - rat.eval(z - h)) / Complex64::new(2.0 * h, 0.0);
        assert!((rat.eval_deriv(z) - fd).norm() < 1e-8);
    }

    #[test]
    fn unpaired_complex_pole_rejected() {
        let err = RationalTransferFunction::from_pole_residues(
            &[Complex64::new(0.1, 0.5)],
            &[Complex64::new(1.0, 0.0)],
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }
}
