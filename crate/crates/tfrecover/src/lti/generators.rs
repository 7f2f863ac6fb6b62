//! Benchmark system constructors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lti::StateSpaceSystem;

/// Real block-diagonal realization of a conjugate-closed pole/residue set.
/// Each real pole becomes a 1x1 block, each conjugate pair a 2x2 rotation
/// block; `b` gets a unit entry per block and `c` carries the residue.
pub(crate) fn realization_from_modes(
    real_modes: &[(f64, f64)],
    pair_modes: &[(Complex64, Complex64)],
) -> Result<StateSpaceSystem> {
    let n = real_modes.len() + 2 * pair_modes.len();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "realization needs at least one mode".into(),
        ));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    let mut c = DVector::<f64>::zeros(n);
    let mut i = 0;
    for &(pole, residue) in pair_modes {
        let (al, be) = (pole.re, pole.im);
        a[(i, i)] = al;
        a[(i, i + 1)] = be;
        a[(i + 1, i)] = -be;
        a[(i + 1, i + 1)] = al;
        b[i] = 1.0;
        c[i] = 2.0 * residue.re;
        c[i + 1] = 2.0 * residue.im;
        i += 2;
    }
    for &(pole, residue) in real_modes {
        a[(i, i)] = pole;
        b[i] = 1.0;
        c[i] = residue;
        i += 1;
    }
    StateSpaceSystem::new(a, b, c)
}

/// Random stable system of order `n`: poles drawn uniformly from the open
/// unit disc and closed under conjugation, residues Gaussian. Deterministic
/// per seed.
pub fn random_stable_system(n: usize, seed: u64) -> Result<StateSpaceSystem> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "system order must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let n_pairs = n / 2;
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        // sqrt for uniform density over the disc area
        let r = rng.random::<f64>().sqrt();
        let theta = rng.random::<f64>() * std::f64::consts::PI;
        let pole = Complex64::from_polar(r, theta);
        let residue = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        pairs.push((pole, residue));
    }
    let mut reals = Vec::new();
    if n % 2 == 1 {
        let pole = rng.random_range(-1.0..1.0);
        let residue: f64 = normal.sample(&mut rng);
        reals.push((pole, residue));
    }
    realization_from_modes(&reals, &pairs)
}

/// Order-`n` finite-difference model of heat diffusion in a thin rod with
/// Dirichlet ends, heat injected at one third of the length and temperature
/// read at two thirds, discretized in time by the Crank-Nicolson rule.
pub fn heat_rod_system(n: usize, dt: f64) -> Result<StateSpaceSystem> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "heat rod needs order >= 3, got {n}"
        )));
    }
    if dt <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let h = 1.0 / (n as f64 + 1.0);
    let coef = 1.0 / (h * h);
    let mut a_c = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a_c[(i, i)] = -2.0 * coef;
        if i + 1 < n {
            a_c[(i, i + 1)] = coef;
            a_c[(i + 1, i)] = coef;
        }
    }
    let j_in = ((n as f64 / 3.0).round() as usize).clamp(1, n) - 1;
    let j_out = ((2.0 * n as f64 / 3.0).round() as usize).clamp(1, n) - 1;
    let mut b_c = DVector::<f64>::zeros(n);
    b_c[j_in] = 1.0;
    let mut c = DVector::<f64>::zeros(n);
    c[j_out] = 1.0;

    let identity = DMatrix::<f64>::identity(n, n);
    let m_minus = &identity - &a_c * (dt / 2.0);
    let m_plus = &identity + &a_c * (dt / 2.0);
    let lu = m_minus.lu();
    let a_d = lu
        .solve(&m_plus)
        .ok_or_else(|| Error::Numerical("Crank-Nicolson step matrix is singular".into()))?;
    let b_d = lu
        .solve(&(b_c * dt))
        .ok_or_else(|| Error::Numerical("Crank-Nicolson step matrix is singular".into()))?;
    StateSpaceSystem::new(a_d, b_d, c)
}

/// Standard spiral-plus-tail benchmark system of order 1006 (three 2x2
/// blocks with off-diagonal pairs ±100, ±200, ±400 and real parts -1, a
/// diagonal tail -1..-1000, and `b = c` with tens on the first six states),
/// discretized with the implicit Euler rule at step `dt`.
pub fn penzl_system(dt: f64) -> Result<StateSpaceSystem> {
    if dt <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let n = 1006;
    let mut a_c = DMatrix::<f64>::zeros(n, n);
    for (blk, w) in [100.0, 200.0, 400.0].iter().enumerate() {
        let i = 2 * blk;
        a_c[(i, i)] = -1.0;
        a_c[(i, i + 1)] = *w;
        a_c[(i + 1, i)] = -*w;
        a_c[(i + 1, i + 1)] = -1.0;
    }
    for k in 0..1000 {
        a_c[(6 + k, 6 + k)] = -(k as f64 + 1.0);
    }
    let mut b = DVector::<f64>::from_element(n, 1.0);
    for i in 0..6 {
        b[i] = 10.0;
    }
    let c = b.clone();

    // One-time inverse of (I - dt A), realized as n solves against identity.
    let m = DMatrix::<f64>::identity(n, n) - &a_c * dt;
    let lu = m.lu();
    let a_d = lu
        .solve(&DMatrix::<f64>::identity(n, n))
        .ok_or_else(|| Error::Numerical("implicit Euler step matrix is singular".into()))?;
    let b_d = &a_d * &b * dt;
    StateSpaceSystem::new(a_d, b_d, c)
}
