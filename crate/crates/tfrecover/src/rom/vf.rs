//! Iterative pole-relocation least-squares fit of a fixed-order rational
//! function to frequency samples.
//!
//! The fit is parameterized over a real basis built from the current pole
//! set (one partial fraction per real pole, a mirrored pair of real-valued
//! functions per conjugate pole pair), so conjugate-closed data produces a
//! real-coefficient model directly. Each iteration solves one weighted
//! linear least-squares problem for numerator and denominator coefficients
//! and relocates the poles to the zeros of the fitted denominator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti::RationalTransferFunction;
use crate::rom::InterpolationData;

/// Initial pole placement strategy.
#[derive(Debug, Clone)]
pub enum PoleInit {
    /// Conjugate pairs at log-spaced angles on a circle of the given radius
    /// (default radius 0.9), one real pole when the order is odd.
    LogSpacedCircle { radius: f64 },
    /// Explicit starting poles (must be conjugate-closed).
    Fixed(Vec<Complex64>),
}

impl Default for PoleInit {
    fn default() -> Self {
        PoleInit::LogSpacedCircle { radius: 0.9 }
    }
}

/// Pole set in grouped real form.
#[derive(Debug, Clone, PartialEq)]
enum Pole {
    Real(f64),
    /// Upper-half representative of a conjugate pair.
    Pair(Complex64),
}

fn state_dim(poles: &[Pole]) -> usize {
    poles
        .iter()
        .map(|p| match p {
            Pole::Real(_) => 1,
            Pole::Pair(_) => 2,
        })
        .sum()
}

fn expand(poles: &[Pole]) -> Vec<Complex64> {
    let mut out = Vec::new();
    for p in poles {
        match p {
            Pole::Real(a) => out.push(Complex64::new(*a, 0.0)),
            Pole::Pair(c) => {
                out.push(*c);
                out.push(c.conj());
            }
        }
    }
    out
}

/// Values of the real basis functions at `z`: `1/(z-a)` per real pole,
/// `[1/(z-p) + 1/(z-p̄), i/(z-p) - i/(z-p̄)]` per pair.
fn basis_row(poles: &[Pole], z: Complex64) -> Vec<Complex64> {
    let mut row = Vec::with_capacity(state_dim(poles));
    let i = Complex64::new(0.0, 1.0);
    for p in poles {
        match p {
            Pole::Real(a) => row.push(Complex64::new(1.0, 0.0) / (z - *a)),
            Pole::Pair(c) => {
                let f1 = Complex64::new(1.0, 0.0) / (z - c);
                let f2 = Complex64::new(1.0, 0.0) / (z - c.conj());
                row.push(f1 + f2);
                row.push(i * (f1 - f2));
            }
        }
    }
    row
}

/// Fitted rational model with its pole/residue form retained for stable
/// evaluation at high orders.
#[derive(Debug, Clone)]
pub struct VfModel {
    pub rational: RationalTransferFunction,
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    /// Constant (feedthrough) term.
    pub offset: f64,
    /// Weighted objective after each pole-relocation iteration; the final
    /// entry is the objective of the returned model.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl VfModel {
    /// Evaluates through the pole/residue form.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.offset
            + self
                .poles
                .iter()
                .zip(self.residues.iter())
                .map(|(p, r)| r / (z - p))
                .sum::<Complex64>()
    }
}

fn initial_poles(data: &InterpolationData, r: usize, init: &PoleInit) -> Result<Vec<Pole>> {
    match init {
        PoleInit::Fixed(list) => {
            if list.len() != r {
                return Err(Error::InvalidParameter(format!(
                    "fixed pole list has {} entries, expected {r}",
                    list.len()
                )));
            }
            let residues = vec![Complex64::new(0.0, 0.0); list.len()];
            let (reals, pairs) = crate::lti::group_pole_residues(list, &residues)?;
            let mut poles: Vec<Pole> = reals.iter().map(|(a, _)| Pole::Real(*a)).collect();
            poles.extend(pairs.iter().map(|(p, _)| Pole::Pair(*p)));
            Ok(poles)
        }
        PoleInit::LogSpacedCircle { radius } => {
            if !(0.0 < *radius) {
                return Err(Error::InvalidParameter(
                    "pole initialization radius must be positive".into(),
                ));
            }
            let mut angles: Vec<f64> = data
                .points()
                .iter()
                .map(|p| p.arg().abs())
                .filter(|a| *a > 0.0)
                .collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let lo = angles.first().copied().unwrap_or(1e-3).max(1e-6);
            let hi = angles
                .last()
                .copied()
                .unwrap_or(std::f64::consts::PI * 0.99)
                .min(std::f64::consts::PI * 0.999)
                .max(lo * 1.0001);
            let n_pairs = r / 2;
            let mut poles = Vec::new();
            for j in 0..n_pairs {
                let f = if n_pairs == 1 {
                    0.5
                } else {
                    j as f64 / (n_pairs - 1) as f64
                };
                let theta = lo * (hi / lo).powf(f);
                poles.push(Pole::Pair(Complex64::from_polar(*radius, theta)));
            }
            if r % 2 == 1 {
                poles.push(Pole::Real(*radius));
            }
            Ok(poles)
        }
    }
}

/// Zeros of `1 + Σ c̃_j φ_j(z)`: eigenvalues of the basis realization with
/// the rank-one denominator feedback applied.
fn relocated_poles(poles: &[Pole], c_tilde: &[f64]) -> Result<Vec<Pole>> {
    let dim = state_dim(poles);
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    // Row vector of the denominator output map: c̃ᵀ C_basis.
    let mut row = DVector::<f64>::zeros(dim);
    let mut i = 0;
    let mut k = 0;
    for p in poles {
        match p {
            Pole::Real(alpha) => {
                a[(i, i)] = *alpha;
                b[i] = 1.0;
                row[i] += c_tilde[k];
                i += 1;
                k += 1;
            }
            Pole::Pair(c) => {
                let (al, be) = (c.re, c.im);
                a[(i, i)] = al;
                a[(i, i + 1)] = be;
                a[(i + 1, i)] = -be;
                a[(i + 1, i + 1)] = al;
                b[i] = 1.0;
                // Basis output rows: phi1 -> (2, 0), phi2 -> (0, 2).
                row[i] += 2.0 * c_tilde[k];
                row[i + 1] += 2.0 * c_tilde[k + 1];
                i += 2;
                k += 2;
            }
        }
    }
    let m = &a - &b * row.transpose();
    let eigs = linalg::eigenvalues_real(&m)?;
    if eigs.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
        return Err(Error::Numerical(
            "pole relocation produced non-finite eigenvalues".into(),
        ));
    }
    let mut reals = Vec::new();
    let mut pairs = Vec::new();
    let mut leftover_pos = 0usize;
    for e in &eigs {
        let tol = 1e-9 * (1.0 + e.norm());
        if e.im.abs() <= tol {
            reals.push(e.re);
        } else if e.im > 0.0 {
            pairs.push(*e);
        } else {
            leftover_pos += 1;
        }
    }
    if pairs.len() != leftover_pos {
        return Err(Error::Numerical(
            "pole relocation produced an unpaired complex eigenvalue".into(),
        ));
    }
    let mut out: Vec<Pole> = reals.into_iter().map(Pole::Real).collect();
    out.extend(pairs.into_iter().map(Pole::Pair));
    Ok(out)
}

fn pole_movement(a: &[Pole], b: &[Pole]) -> f64 {
    let mut ea = expand(a);
    let mut eb = expand(b);
    let key = |c: &Complex64| (c.re, c.im);
    ea.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
    eb.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
    if ea.len() != eb.len() {
        return f64::INFINITY;
    }
    ea.iter()
        .zip(eb.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

struct LsqFit {
    coeffs: DVector<f64>,
}

/// Weighted real least squares over complex sample rows.
fn solve_real_lsq(rows: &[(Vec<Complex64>, Complex64, f64)]) -> Result<LsqFit> {
    let m = rows.len();
    let n = rows[0].0.len();
    let mut a = DMatrix::<f64>::zeros(2 * m, n);
    let mut rhs = DVector::<f64>::zeros(2 * m);
    for (i, (row, y, w)) in rows.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            a[(2 * i, j)] = w * c.re;
            a[(2 * i + 1, j)] = w * c.im;
        }
        rhs[2 * i] = w * y.re;
        rhs[2 * i + 1] = w * y.im;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values[0];
    let coeffs = svd
        .solve(&rhs, smax * 1e-13)
        .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?;
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical(
            "least-squares solution is not finite".into(),
        ));
    }
    Ok(LsqFit { coeffs })
}

/// Fits an order-`r` rational function to the samples by barycentric pole
/// relocation, stopping after `max_iters` iterations or when the poles move
/// by less than `1e-10`. Sample weights (when present) multiply the
/// corresponding least-squares rows.
pub fn vector_fitting(
    data: &InterpolationData,
    r: usize,
    max_iters: usize,
    init: &PoleInit,
) -> Result<VfModel> {
    if r < 1 {
        return Err(Error::InvalidParameter("fit order must be >= 1".into()));
    }
    if data.len() <= r {
        return Err(Error::InvalidParameter(format!(
            "need more than {r} samples for an order-{r} fit, have {}",
            data.len()
        )));
    }
    if max_iters < 1 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    let weights: Vec<f64> = data
        .weights()
        .map(|w| w.to_vec())
        .unwrap_or_else(|| vec![1.0; data.len()]);

    let mut poles = initial_poles(data, r, init)?;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..max_iters {
        iterations += 1;
        // Columns: numerator basis, constant, then denominator basis scaled
        // by -H.
        let dim = state_dim(&poles);
        let rows: Vec<(Vec<Complex64>, Complex64, f64)> = data
            .points()
            .iter()
            .zip(data.values().iter())
            .zip(weights.iter())
            .map(|((&z, &h), &w)| {
                let phi = basis_row(&poles, z);
                let mut row = Vec::with_capacity(2 * dim + 1);
                row.extend_from_slice(&phi);
                row.push(Complex64::new(1.0, 0.0));
                row.extend(phi.iter().map(|f| -h * f));
                (row, h, w)
            })
            .collect();
        let fit = solve_real_lsq(&rows)?;
        let c_tilde: Vec<f64> = fit.coeffs.as_slice()[dim + 1..].to_vec();

        // Objective of the current barycentric iterate.
        let obj: f64 = data
            .points()
            .iter()
            .zip(data.values().iter())
            .zip(weights.iter())
            .map(|((&z, &h), &w)| {
                let phi = basis_row(&poles, z);
                let num: Complex64 = phi
                    .iter()
                    .enumerate()
                    .map(|(j, f)| f * fit.coeffs[j])
                    .sum::<Complex64>()
                    + fit.coeffs[dim];
                let den: Complex64 = Complex64::new(1.0, 0.0)
                    + phi
                        .iter()
                        .enumerate()
                        .map(|(j, f)| f * c_tilde[j])
                        .sum::<Complex64>();
                let model = num / den;
                (w * (h - model).norm()).powi(2)
            })
            .sum();
        history.push(obj);

        let new_poles = relocated_poles(&poles, &c_tilde).map_err(|e| {
            Error::Numerical(format!(
                "{e}; objective trace {history:?} after {iterations} iterations"
            ))
        })?;
        let movement = pole_movement(&poles, &new_poles);
        poles = new_poles;
        if movement < 1e-10 {
            converged = true;
            break;
        }
    }

    // Final residue-only fit on the relocated poles.
    let dim = state_dim(&poles);
    let rows: Vec<(Vec<Complex64>, Complex64, f64)> = data
        .points()
        .iter()
        .zip(data.values().iter())
        .zip(weights.iter())
        .map(|((&z, &h), &w)| {
            let phi = basis_row(&poles, z);
            let mut row = Vec::with_capacity(dim + 1);
            row.extend_from_slice(&phi);
            row.push(Complex64::new(1.0, 0.0));
            (row, h, w)
        })
        .collect();
    let fit = solve_real_lsq(&rows)?;
    let offset = fit.coeffs[dim];

    // Convert basis coefficients to complex residues.
    let mut out_poles = Vec::new();
    let mut out_residues = Vec::new();
    let mut k = 0;
    for p in &poles {
        match p {
            Pole::Real(a) => {
                out_poles.push(Complex64::new(*a, 0.0));
                out_residues.push(Complex64::new(fit.coeffs[k], 0.0));
                k += 1;
            }
            Pole::Pair(c) => {
                let res = Complex64::new(fit.coeffs[k], fit.coeffs[k + 1]);
                out_poles.push(*c);
                out_residues.push(res);
                out_poles.push(c.conj());
                out_residues.push(res.conj());
                k += 2;
            }
        }
    }

    let model = VfModel {
        rational: RationalTransferFunction::from_pole_residues(&out_poles, &out_residues, offset)?,
        poles: out_poles,
        residues: out_residues,
        offset,
        objective_history: history,
        iterations,
        converged,
    };
    let final_obj: f64 = data
        .points()
        .iter()
        .zip(data.values().iter())
        .zip(weights.iter())
        .map(|((&z, &h), &w)| (w * (h - model.eval(z)).norm()).powi(2))
        .sum();
    let mut model = model;
    model.objective_history.push(final_obj);
    Ok(model)
}
