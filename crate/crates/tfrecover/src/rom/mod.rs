//! Data-driven reduced-order models from frequency samples.

mod loewner;
mod vf;

pub use loewner::{
    build_loewner_pencil, hermite_loewner_rom, loewner_rom, partition_interweave, LoewnerPencil,
};
pub use vf::{vector_fitting, PoleInit, VfModel};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::lti;

/// Frequency samples used to fit a reduced model: points, values, optional
/// derivatives, optional per-sample weights.
#[derive(Debug, Clone)]
pub struct InterpolationData {
    points: Vec<Complex64>,
    values: Vec<Complex64>,
    derivs: Option<Vec<Complex64>>,
    weights: Option<Vec<f64>>,
    conjugate_closed: bool,
}

impl InterpolationData {
    pub fn new(points: Vec<Complex64>, values: Vec<Complex64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "interpolation data (points vs values)",
                expected: points.len(),
                got: values.len(),
            });
        }
        let mut data = Self {
            points,
            values,
            derivs: None,
            weights: None,
            conjugate_closed: false,
        };
        data.conjugate_closed = data.detect_conjugate_closed();
        Ok(data)
    }

    pub fn with_derivs(mut self, derivs: Vec<Complex64>) -> Result<Self> {
        if derivs.len() != self.points.len() {
            return Err(Error::DimensionMismatch {
                context: "interpolation data (points vs derivatives)",
                expected: self.points.len(),
                got: derivs.len(),
            });
        }
        self.derivs = Some(derivs);
        self.conjugate_closed = self.detect_conjugate_closed();
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.points.len() {
            return Err(Error::DimensionMismatch {
                context: "interpolation data (points vs weights)",
                expected: self.points.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn derivs(&self) -> Option<&[Complex64]> {
        self.derivs.as_deref()
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_conjugate_closed(&self) -> bool {
        self.conjugate_closed
    }

    /// Adds the conjugate of every non-real point with conjugated value (and
    /// derivative), yielding a conjugate-closed set.
    pub fn append_conjugates(&self) -> Result<Self> {
        let mut points = self.points.clone();
        let mut values = self.values.clone();
        let mut derivs = self.derivs.clone();
        let mut weights = self.weights.clone();
        for i in 0..self.points.len() {
            let p = self.points[i];
            if p.im.abs() > 1e-14 * (1.0 + p.norm()) {
                points.push(p.conj());
                values.push(self.values[i].conj());
                if let Some(d) = derivs.as_mut() {
                    d.push(self.derivs.as_ref().unwrap()[i].conj());
                }
                if let Some(w) = weights.as_mut() {
                    w.push(self.weights.as_ref().unwrap()[i]);
                }
            }
        }
        let mut out = Self::new(points, values)?;
        if let Some(d) = derivs {
            out = out.with_derivs(d)?;
        }
        if let Some(w) = weights {
            out = out.with_weights(w)?;
        }
        Ok(out)
    }

    fn detect_conjugate_closed(&self) -> bool {
        let tol = 1e-8;
        'outer: for i in 0..self.points.len() {
            let p = self.points[i];
            let scale = 1.0 + p.norm();
            if p.im.abs() <= tol * scale {
                // Real point: value (and derivative) must be essentially real.
                if self.values[i].im.abs() > tol * (1.0 + self.values[i].norm()) {
                    return false;
                }
                continue;
            }
            for j in 0..self.points.len() {
                if (self.points[j] - p.conj()).norm() <= tol * scale
                    && (self.values[j] - self.values[i].conj()).norm()
                        <= tol.max(1e-8) * (1.0 + self.values[i].norm())
                {
                    if let Some(d) = &self.derivs {
                        if (d[j] - d[i].conj()).norm() > tol * (1.0 + d[i].norm()) {
                            continue;
                        }
                    }
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }
}

/// Reduced model in descriptor form, `H(z) = cᵀ (zE - A)⁻¹ b` with real
/// matrices.
#[derive(Debug, Clone)]
pub struct DescriptorROM {
    pub e: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl DescriptorROM {
    pub fn new(e: DMatrix<f64>, a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let r = e.nrows();
        if e.ncols() != r || a.nrows() != r || a.ncols() != r || b.len() != r || c.len() != r {
            return Err(Error::DimensionMismatch {
                context: "descriptor realization",
                expected: r,
                got: a.nrows().max(b.len()).max(c.len()),
            });
        }
        Ok(Self { e, a, b, c })
    }

    pub fn order(&self) -> usize {
        self.e.nrows()
    }

    /// Evaluates the transfer function by solving `(zE - A) x = b`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let r = self.order();
        if r == 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let m = DMatrix::from_fn(r, r, |i, j| z * self.e[(i, j)] - self.a[(i, j)]);
        let lu = m.lu();
        let u = lu.u();
        let mut dmax: f64 = 0.0;
        let mut dmin = f64::INFINITY;
        for i in 0..r {
            let d = u[(i, i)].norm();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        if !(dmin > dmax * r as f64 * f64::EPSILON) {
            return Err(Error::SingularPencil { z });
        }
        let rhs = self.b.map(|x| Complex64::new(x, 0.0));
        let x = lu.solve(&rhs).ok_or(Error::SingularPencil { z })?;
        Ok(self
            .c
            .iter()
            .zip(x.iter())
            .map(|(&ci, xi)| xi * ci)
            .sum::<Complex64>())
    }

    /// Pole/residue form of the pencil (finite modes plus a constant from
    /// any modes at infinity). Useful for cheap dense frequency sweeps.
    pub fn modal_form(&self) -> Result<ModalSystem> {
        modal_form(self)
    }
}

/// Pole/residue evaluation form of a descriptor model.
#[derive(Debug, Clone)]
pub struct ModalSystem {
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
    /// Constant contribution of modes at infinity.
    pub offset: Complex64,
}

impl ModalSystem {
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

fn modal_form(rom: &DescriptorROM) -> Result<ModalSystem> {
    let r = rom.order();
    if r == 0 {
        return Ok(ModalSystem {
            poles: vec![],
            residues: vec![],
            offset: Complex64::new(0.0, 0.0),
        });
    }
    // Shift-and-invert reduction to a standard eigenproblem: with
    // F = A - tau E nonsingular and W = F⁻¹E = S diag(theta) S⁻¹, the pencil
    // eigenvalues are tau + 1/theta and the transfer function splits into
    // partial fractions over them.
    let shifts = [1.234567890123, -1.876543210987, 3.210987654321, 0.135792468013, -0.975318642097];
    let mut chosen: Option<(f64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;
    for &tau in &shifts {
        let f = &rom.a - &rom.e * tau;
        let lu = f.lu();
        let u = lu.u();
        let mut dmax: f64 = 0.0;
        let mut dmin = f64::INFINITY;
        for i in 0..r {
            let d = u[(i, i)].abs();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        if dmin > dmax * (r as f64) * f64::EPSILON * 1e3 && dmax > 0.0 {
            chosen = Some((tau, lu));
            break;
        }
    }
    let (tau, f_lu) = chosen.ok_or_else(|| Error::Numerical(
        "pencil appears singular for every trial shift".into(),
    ))?;
    let w = f_lu
        .solve(&rom.e)
        .ok_or_else(|| Error::Numerical("shifted pencil solve failed".into()))?;
    let (thetas, s) = linalg::eigen_real(&w)?;

    // Diagonalization quality gate.
    let wc = w.map(|x| Complex64::new(x, 0.0));
    let theta_diag = DMatrix::from_fn(r, r, |i, j| {
        if i == j {
            thetas[i]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let resid = (&wc * &s - &s * &theta_diag).norm() / wc.norm().max(f64::MIN_POSITIVE);
    if resid > 1e-7 {
        return Err(Error::DefectivePencil {
            eigenvalues: thetas.clone(),
        });
    }

    let fb = f_lu
        .solve(&rom.b)
        .ok_or_else(|| Error::Numerical("shifted pencil solve failed".into()))?;
    let s_lu = s.clone().lu();
    let fvec = s_lu
        .solve(&fb.map(|x| Complex64::new(x, 0.0)))
        .ok_or(Error::DefectivePencil {
            eigenvalues: thetas.clone(),
        })?;
    let gvec = s.transpose() * rom.c.map(|x| Complex64::new(x, 0.0));

    let theta_max = thetas.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let mut poles = Vec::new();
    let mut residues = Vec::new();
    let mut offset = Complex64::new(0.0, 0.0);
    for i in 0..r {
        let coef = gvec[i] * fvec[i];
        if thetas[i].norm() <= theta_max * 1e-13 {
            offset -= coef;
        } else {
            poles.push(tau + 1.0 / thetas[i]);
            residues.push(coef / thetas[i]);
        }
    }
    Ok(ModalSystem {
        poles,
        residues,
        offset,
    })
}

/// Restricts a descriptor model to its stable part: finite eigenvalues with
/// modulus below one are kept and rebuilt into a real block-diagonal
/// realization; everything else is discarded. Returns the reduced model and
/// the number of discarded modes.
pub fn stable_part(rom: &DescriptorROM) -> Result<(DescriptorROM, usize)> {
    let modal = rom.modal_form()?;
    let mut keep_poles = Vec::new();
    let mut keep_res = Vec::new();
    for (p, res) in modal.poles.iter().zip(modal.residues.iter()) {
        if p.norm() < 1.0 {
            keep_poles.push(*p);
            keep_res.push(*res);
        }
    }
    let discarded = rom.order() - keep_poles.len();
    if keep_poles.is_empty() {
        return Ok((
            DescriptorROM::new(
                DMatrix::zeros(0, 0),
                DMatrix::zeros(0, 0),
                DVector::zeros(0),
                DVector::zeros(0),
            )?,
            discarded,
        ));
    }
    let (reals, pairs) = lti::group_pole_residues(&keep_poles, &keep_res)?;
    let sys = lti::realization_from_modes(&reals, &pairs)?;
    let r = sys.order();
    let rom_out = DescriptorROM::new(
        DMatrix::identity(r, r),
        sys.a().clone(),
        sys.b().clone(),
        sys.c().clone(),
    )?;
    Ok((rom_out, discarded))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_rom(poles: &[f64]) -> DescriptorROM {
        let r = poles.len();
        let a = DMatrix::from_fn(r, r, |i, j| if i == j { poles[i] } else { 0.0 });
        DescriptorROM::new(
            DMatrix::identity(r, r),
            a,
            DVector::from_element(r, 1.0),
            DVector::from_element(r, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn eval_reduces_to_state_space_for_identity_e() {
        let rom = diag_rom(&[0.5, -0.25]);
        let sys = crate::lti::StateSpaceSystem::new(
            rom.a.clone(),
            rom.b.clone(),
            rom.c.clone(),
        )
        .unwrap();
        for k in 0..6 {
            let z = Complex64::from_polar(1.1, 0.2 + k as f64);
            let a = rom.eval(z).unwrap();
            let b = sys.eval_tf(z).unwrap();
            assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn eval_rejects_pencil_eigenvalue() {
        let rom = diag_rom(&[0.5]);
        assert!(matches!(
            rom.eval(Complex64::new(0.5, 0.0)),
            Err(Error::SingularPencil { .. })
        ));
    }

    #[test]
    fn stable_part_keeps_only_contracting_modes() {
        let rom = diag_rom(&[0.5, 1.5]);
        let (stable, discarded) = stable_part(&rom).unwrap();
        assert_eq!(discarded, 1);
        assert_eq!(stable.order(), 1);
        let z = Complex64::new(2.0, 0.3);
        let expect = 1.0 / (z - 0.5);
        assert!((stable.eval(z).unwrap() - expect).norm() < 1e-10);
    }

    #[test]
    fn stable_part_of_stable_model_preserves_transfer_function() {
        let sys = crate::lti::random_stable_system(7, 33).unwrap();
        let rom = DescriptorROM::new(
            DMatrix::identity(7, 7),
            sys.a().clone(),
            sys.b().clone(),
            sys.c().clone(),
        )
        .unwrap();
        let (stable, discarded) = stable_part(&rom).unwrap();
        assert_eq!(discarded, 0);
        assert_eq!(stable.order(), 7);
        for k in 0..12 {
            let z = Complex64::from_polar(1.0, 0.1 + 0.25 * k as f64);
            let a = rom.eval(z).unwrap();
            let b = stable.eval(z).unwrap();
            assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0), "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn modal_form_handles_singular_e() {
        // E singular: one differential mode plus one algebraic (constant) mode.
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        let b = DVector::from_row_slice(&[1.0, 1.0]);
        let c = DVector::from_row_slice(&[1.0, 1.0]);
        // H(z) = 1/(z-0.5) + cᵀ... second block: (z*0 - 1) x = b -> x = -1.
        let rom = DescriptorROM::new(e, a, b, c).unwrap();
        let modal = rom.modal_form().unwrap();
        assert_eq!(modal.poles.len(), 1);
        assert!((modal.poles[0] - Complex64::new(0.5, 0.0)).norm() < 1e-10);
        for k in 0..5 {
            let z = Complex64::from_polar(1.3, 0.4 * k as f64);
            let direct = rom.eval(z).unwrap();
            let via_modal = modal.eval(z);
            assert!((direct - via_modal).norm() < 1e-10 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn conjugate_detection_and_completion() {
        let pts = vec![Complex64::new(0.1, 0.9), Complex64::new(0.5, 0.2)];
        let vals = vec![Complex64::new(1.0, -2.0), Complex64::new(0.3, 0.7)];
        let data = InterpolationData::new(pts, vals).unwrap();
        assert!(!data.is_conjugate_closed());
        let full = data.append_conjugates().unwrap();
        assert!(full.is_conjugate_closed());
        assert_eq!(full.len(), 4);
    }
}
