//! Discrete-time SISO LTI systems: representation, simulation, and
//! transfer-function evaluation.
//!
//! A [`StateSpaceSystem`] holds real matrices `(A, b, c)` of
//!
//! ```text
//! x[k+1] = A x[k] + b u[k],    y[k] = cᵀ x[k],
//! ```
//!
//! with transfer function `H(z) = cᵀ (zI - A)⁻¹ b`. Systems are strictly
//! proper (no feedthrough term). All evaluations go through linear solves,
//! never an explicit inverse.

mod generators;
mod rational;

pub use generators::{heat_rod_system, penzl_system, random_stable_system};
pub(crate) use generators::realization_from_modes;
pub use rational::RationalTransferFunction;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

/// Splits a conjugate-closed pole/residue set into real modes and
/// representative upper-half-plane pairs.
pub(crate) fn group_pole_residues(
    poles: &[Complex64],
    residues: &[Complex64],
) -> Result<(Vec<(f64, f64)>, Vec<(Complex64, Complex64)>)> {
    let groups = rational::group_conjugate(poles, residues)?;
    let mut reals = Vec::new();
    let mut pairs = Vec::new();
    for g in groups {
        match g {
            rational::PoleGroup::Real { pole, residue } => reals.push((pole, residue)),
            rational::PoleGroup::Pair { pole, residue } => pairs.push((pole, residue)),
        }
    }
    Ok((reals, pairs))
}

/// State-space realization of a discrete-time SISO LTI system.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl StateSpaceSystem {
    /// Builds a system from `(A, b, c)`, checking dimension consistency.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "system order must be at least 1".into(),
            ));
        }
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "state map A (must be square)",
                expected: n,
                got: a.ncols(),
            });
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                context: "input map b",
                expected: n,
                got: b.len(),
            });
        }
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                context: "output map c",
                expected: n,
                got: c.len(),
            });
        }
        Ok(Self { a, b, c })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// Largest eigenvalue modulus of `A`.
    pub fn spectral_radius(&self) -> Result<f64> {
        linalg::spectral_radius(&self.a)
    }

    /// True when the spectral radius of `A` is strictly below one.
    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.spectral_radius()? < 1.0)
    }

    /// Simulates the system from initial state `x0` under input `u`,
    /// returning the paired input/output trajectory. `y[k] = cᵀ x[k]`.
    pub fn simulate(&self, u: &[f64], x0: &DVector<f64>) -> Result<TimeSeries> {
        let n = self.order();
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                context: "initial state x0",
                expected: n,
                got: x0.len(),
            });
        }
        if u.is_empty() {
            return Err(Error::InsufficientData {
                context: "simulate input",
                needed: 2,
                got: 0,
            });
        }
        let mut x = x0.clone();
        let mut y = Vec::with_capacity(u.len());
        for &uk in u {
            y.push(self.c.dot(&x));
            x = &self.a * &x + &self.b * uk;
        }
        TimeSeries::new(u.to_vec(), y)
    }

    /// Evaluates `H(z) = cᵀ (zI - A)⁻¹ b` by one linear solve.
    pub fn eval_tf(&self, z: Complex64) -> Result<Complex64> {
        let lu = self.resolvent_lu(z)?;
        let rhs = self.b.map(|x| Complex64::new(x, 0.0));
        let x = lu
            .solve(&rhs)
            .ok_or(Error::SingularResolvent { z })?;
        let h = self
            .c
            .iter()
            .zip(x.iter())
            .map(|(&ci, xi)| xi * ci)
            .sum::<Complex64>();
        if !h.re.is_finite() || !h.im.is_finite() {
            return Err(Error::SingularResolvent { z });
        }
        Ok(h)
    }

    /// Evaluates `H'(z) = -cᵀ (zI - A)⁻² b` by two linear solves sharing one
    /// factorization.
    pub fn eval_tf_deriv(&self, z: Complex64) -> Result<Complex64> {
        let lu = self.resolvent_lu(z)?;
        let rhs = self.b.map(|x| Complex64::new(x, 0.0));
        let w = lu
            .solve(&rhs)
            .ok_or(Error::SingularResolvent { z })?;
        let w2 = lu.solve(&w).ok_or(Error::SingularResolvent { z })?;
        let d = -self
            .c
            .iter()
            .zip(w2.iter())
            .map(|(&ci, xi)| xi * ci)
            .sum::<Complex64>();
        if !d.re.is_finite() || !d.im.is_finite() {
            return Err(Error::SingularResolvent { z });
        }
        Ok(d)
    }

    /// Coefficient form of the transfer function, derived from the
    /// characteristic polynomial of `A`. Accurate for moderate orders; the
    /// resolvent form stays authoritative for large systems.
    pub fn transfer_function(&self) -> RationalTransferFunction {
        rational::from_state_space(self)
    }

    fn resolvent_lu(&self, z: Complex64) -> Result<nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>> {
        let n = self.order();
        let mut m = self.a.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            m[(i, i)] += z;
        }
        let lu = m.lu();
        // Near-singularity shows up as a collapsed diagonal of U.
        let u = lu.u();
        let mut dmax: f64 = 0.0;
        let mut dmin = f64::INFINITY;
        for i in 0..n {
            let d = u[(i, i)].norm();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        if dmin <= dmax * n as f64 * f64::EPSILON {
            return Err(Error::SingularResolvent { z });
        }
        Ok(lu)
    }
}

/// Paired input/output samples of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    u: Vec<f64>,
    y: Vec<f64>,
}

impl TimeSeries {
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "time series (input vs output length)",
                expected: u.len(),
                got: y.len(),
            });
        }
        if u.len() < 2 {
            return Err(Error::InsufficientData {
                context: "time series",
                needed: 2,
                got: u.len(),
            });
        }
        Ok(Self { u, y })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Number of samples, `T + 1`.
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Number of time steps `T`.
    pub fn t_steps(&self) -> usize {
        self.u.len() - 1
    }
}

/// Cached transfer-function evaluator for repeated frequency sweeps.
///
/// Reduces `A` to upper Hessenberg form once; each subsequent evaluation of
/// `H(z)` (or `H'(z)`) costs one `O(n²)` structured solve instead of an
/// `O(n³)` dense factorization.
pub struct ResolventEvaluator {
    h: DMatrix<f64>,
    bt: DVector<f64>,
    ct: DVector<f64>,
}

impl ResolventEvaluator {
    pub fn new(sys: &StateSpaceSystem) -> Self {
        let hess = nalgebra::linalg::Hessenberg::new(sys.a.clone());
        let (q, h) = hess.unpack();
        let bt = q.transpose() * &sys.b;
        let ct = q.transpose() * &sys.c;
        Self { h, bt, ct }
    }

    pub fn order(&self) -> usize {
        self.h.nrows()
    }

    /// `H(z)` via a Hessenberg solve.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let f = HessenbergLu::factor(&self.h, z)?;
        let w = f.solve(&self.bt);
        Ok(dot_unconjugated_real(&self.ct, &w))
    }

    /// `(H(z), H'(z))` sharing one factorization.
    pub fn eval_with_deriv(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let f = HessenbergLu::factor(&self.h, z)?;
        let w = f.solve(&self.bt);
        let v = f.solve_transposed(&self.ct);
        let h = dot_unconjugated_real(&self.ct, &w);
        let d = -v
            .iter()
            .zip(w.iter())
            .map(|(a, b)| a * b)
            .sum::<Complex64>();
        Ok((h, d))
    }
}

fn dot_unconjugated_real(a: &DVector<f64>, b: &DVector<Complex64>) -> Complex64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, y)| y * x)
        .sum::<Complex64>()
}

/// LU factorization of `zI - H` for upper Hessenberg `H`, with adjacent-row
/// partial pivoting. Solves both `Mx = r` and `Mᵀx = r` in `O(n²)`.
struct HessenbergLu {
    u: DMatrix<Complex64>,
    mults: Vec<Complex64>,
    swaps: Vec<bool>,
}

impl HessenbergLu {
    fn factor(h: &DMatrix<f64>, z: Complex64) -> Result<Self> {
        let n = h.nrows();
        let mut m = DMatrix::from_fn(n, n, |i, j| {
            let mut v = Complex64::new(-h[(i, j)], 0.0);
            if i == j {
                v += z;
            }
            if i > j + 1 {
                v = Complex64::new(0.0, 0.0);
            }
            v
        });
        let mut mults = Vec::with_capacity(n.saturating_sub(1));
        let mut swaps = Vec::with_capacity(n.saturating_sub(1));
        let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(Error::SingularResolvent { z });
        }
        for i in 0..n.saturating_sub(1) {
            let swap = m[(i + 1, i)].norm() > m[(i, i)].norm();
            if swap {
                m.swap_rows(i, i + 1);
            }
            swaps.push(swap);
            let piv = m[(i, i)];
            if piv.norm() <= scale * f64::EPSILON {
                return Err(Error::SingularResolvent { z });
            }
            let f = m[(i + 1, i)] / piv;
            mults.push(f);
            m[(i + 1, i)] = Complex64::new(0.0, 0.0);
            for j in (i + 1)..n {
                let mij = m[(i, j)];
                m[(i + 1, j)] -= f * mij;
            }
        }
        if m[(n - 1, n - 1)].norm() <= scale * f64::EPSILON {
            return Err(Error::SingularResolvent { z });
        }
        Ok(Self { u: m, mults, swaps })
    }

    /// Solves `(zI - H) x = r`.
    fn solve(&self, r: &DVector<f64>) -> DVector<Complex64> {
        let n = self.u.nrows();
        let mut x: DVector<Complex64> = r.map(|v| Complex64::new(v, 0.0));
        for i in 0..n - 1 {
            if self.swaps[i] {
                x.swap_rows(i, i + 1);
            }
            let xi = x[i];
            x[i + 1] -= self.mults[i] * xi;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.u[(i, j)] * x[j];
            }
            x[i] = s / self.u[(i, i)];
        }
        x
    }

    /// Solves `(zI - H)ᵀ x = r` from the same factors.
    fn solve_transposed(&self, r: &DVector<f64>) -> DVector<Complex64> {
        let n = self.u.nrows();
        let mut x: DVector<Complex64> = r.map(|v| Complex64::new(v, 0.0));
        // Forward substitution with Uᵀ (lower triangular).
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.u[(j, i)] * x[j];
            }
            x[i] = s / self.u[(i, i)];
        }
        // Apply transposed elimination steps in reverse.
        for i in (0..n - 1).rev() {
            let xi1 = x[i + 1];
            x[i] -= self.mults[i] * xi1;
            if self.swaps[i] {
                x.swap_rows(i, i + 1);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system(a: f64, b: f64, c: f64) -> StateSpaceSystem {
        StateSpaceSystem::new(
            DMatrix::from_element(1, 1, a),
            DVector::from_element(1, b),
            DVector::from_element(1, c),
        )
        .unwrap()
    }

    #[test]
    fn simulate_delay_integrator() {
        let sys = scalar_system(0.0, 1.0, 1.0);
        let ts = sys
            .simulate(&[1.0, 2.0, 3.0], &DVector::zeros(1))
            .unwrap();
        assert_eq!(ts.y(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn simulate_zero_input_zero_state() {
        let sys = crate::lti::random_stable_system(4, 3).unwrap();
        let ts = sys.simulate(&vec![0.0; 20], &DVector::zeros(4)).unwrap();
        assert!(ts.y().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simulate_matches_hand_rolled_recurrence() {
        let sys = StateSpaceSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]),
            DVector::from_row_slice(&[1.0, 1.0]),
            DVector::from_row_slice(&[1.0, 1.0]),
        )
        .unwrap();
        let u = [1.0, 0.0, 0.0, 0.0];
        // Four steps of the recurrence by hand: x1 = b, x2 = A b, x3 = A² b.
        let expected = [0.0, 2.0, 0.75, 0.3125];
        let ts = sys.simulate(&u, &DVector::zeros(2)).unwrap();
        for (got, want) in ts.y().iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-14, "got {got}, want {want}");
        }
    }

    #[test]
    fn simulate_is_linear_in_the_input() {
        let sys = crate::lti::random_stable_system(6, 11).unwrap();
        let x0 = DVector::zeros(6);
        let u1: Vec<f64> = (0..40).map(|k| (k as f64 * 0.7).sin()).collect();
        let u2: Vec<f64> = (0..40).map(|k| (k as f64 * 0.3).cos()).collect();
        let (alpha, beta) = (1.7, -0.4);
        let combo: Vec<f64> = u1
            .iter()
            .zip(u2.iter())
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let y1 = sys.simulate(&u1, &x0).unwrap();
        let y2 = sys.simulate(&u2, &x0).unwrap();
        let yc = sys.simulate(&combo, &x0).unwrap();
        let scale = yc.y().iter().map(|v| v.abs()).fold(0.0, f64::max);
        for k in 0..combo.len() {
            let want = alpha * y1.y()[k] + beta * y2.y()[k];
            assert!((yc.y()[k] - want).abs() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn simulate_rejects_bad_x0() {
        let sys = scalar_system(0.5, 1.0, 1.0);
        let err = sys.simulate(&[1.0, 2.0], &DVector::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn eval_tf_scalar_resolvent() {
        let sys = scalar_system(0.5, 2.0, 3.0);
        let h = sys.eval_tf(Complex64::new(1.0, 0.0)).unwrap();
        assert!((h - Complex64::new(12.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eval_tf_strictly_proper_decay() {
        let sys = crate::lti::random_stable_system(5, 1).unwrap();
        let h = sys.eval_tf(Complex64::new(1e8, 0.0)).unwrap();
        assert!(h.norm() < 1e-6);
    }

    #[test]
    fn eval_tf_rejects_eigenvalue() {
        let sys = scalar_system(0.5, 2.0, 3.0);
        let err = sys.eval_tf(Complex64::new(0.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SingularResolvent { .. }));
    }

    #[test]
    fn eval_tf_matches_rational_form() {
        let sys = crate::lti::random_stable_system(3, 5).unwrap();
        let rat = sys.transfer_function();
        for k in 0..8 {
            let z = Complex64::from_polar(1.0, 0.3 + 0.31 * k as f64);
            let a = sys.eval_tf(z).unwrap();
            let b = rat.eval(z);
            assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
        }
    }

    #[test]
    fn deriv_scalar_value() {
        let sys = scalar_system(0.5, 2.0, 3.0);
        let d = sys.eval_tf_deriv(Complex64::new(1.0, 0.0)).unwrap();
        assert!((d - Complex64::new(-24.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn deriv_matches_finite_differences() {
        let sys = crate::lti::random_stable_system(5, 9).unwrap();
        for k in 0..20 {
            let z = Complex64::from_polar(1.05, 0.1 + 0.15 * k as f64);
            let d = sys.eval_tf_deriv(z).unwrap();
            let h = 1e-6;
            let fd = (sys.eval_tf(z + h).unwrap() - sys.eval_tf(z - h).unwrap())
                / Complex64::new(2.0 * h, 0.0);
            assert!(
                (d - fd).norm() <= 1e-5 * d.norm().max(1.0),
                "z={z}, d={d}, fd={fd}"
            );
        }
    }

    #[test]
    fn zero_order_rejected() {
        let err = StateSpaceSystem::new(DMatrix::zeros(0, 0), DVector::zeros(0), DVector::zeros(0))
            .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn resolvent_evaluator_matches_direct() {
        let sys = crate::lti::random_stable_system(12, 17).unwrap();
        let ev = ResolventEvaluator::new(&sys);
        for k in 0..10 {
            let z = Complex64::from_polar(1.0, 0.05 + 0.29 * k as f64);
            let direct = sys.eval_tf(z).unwrap();
            let (fast, dfast) = ev.eval_with_deriv(z).unwrap();
            let ddirect = sys.eval_tf_deriv(z).unwrap();
            assert!((fast - direct).norm() <= 1e-11 * direct.norm().max(1.0));
            assert!((dfast - ddirect).norm() <= 1e-9 * ddirect.norm().max(1.0));
        }
    }
}
