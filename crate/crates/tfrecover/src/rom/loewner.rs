//! Loewner-type interpolatory reduced models built from divided differences
//! of frequency samples.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rom::{DescriptorROM, InterpolationData};

/// Loewner and shifted Loewner matrices with the defining value vectors.
#[derive(Debug, Clone)]
pub struct LoewnerPencil {
    /// `L[i][j] = (v_i - w_j) / (mu_i - sigma_j)`.
    pub l: DMatrix<Complex64>,
    /// `Ls[i][j] = (mu_i v_i - sigma_j w_j) / (mu_i - sigma_j)`.
    pub ls: DMatrix<Complex64>,
    /// Left values `v`.
    pub v: DVector<Complex64>,
    /// Right values `w`.
    pub wv: DVector<Complex64>,
}

/// Builds the divided-difference pencil from left points/values `(mu, v)`
/// and right points/values `(sigma, w)`.
pub fn build_loewner_pencil(
    left_pts: &[Complex64],
    left_vals: &[Complex64],
    right_pts: &[Complex64],
    right_vals: &[Complex64],
) -> Result<LoewnerPencil> {
    if left_pts.len() != left_vals.len() || right_pts.len() != right_vals.len() {
        return Err(Error::InvalidParameter(
            "points and values must have equal lengths per side".into(),
        ));
    }
    let q = left_pts.len();
    let k = right_pts.len();
    if q == 0 || k == 0 {
        return Err(Error::InvalidParameter(
            "both interpolation point sets must be nonempty".into(),
        ));
    }
    let mut l = DMatrix::from_element(q, k, Complex64::new(0.0, 0.0));
    let mut ls = l.clone();
    for i in 0..q {
        for j in 0..k {
            let denom = left_pts[i] - right_pts[j];
            if denom.norm() < 1e-14 * (1.0 + left_pts[i].norm()) {
                return Err(Error::InvalidParameter(format!(
                    "left point {} coincides with a right point; the two sets must be disjoint",
                    left_pts[i]
                )));
            }
            l[(i, j)] = (left_vals[i] - right_vals[j]) / denom;
            ls[(i, j)] = (left_pts[i] * left_vals[i] - right_pts[j] * right_vals[j]) / denom;
        }
    }
    Ok(LoewnerPencil {
        l,
        ls,
        v: DVector::from_column_slice(left_vals),
        wv: DVector::from_column_slice(right_vals),
    })
}

/// One conjugate group of point indices: a real point or an (upper, lower)
/// half-plane pair.
#[derive(Debug, Clone, Copy)]
enum Group {
    Real(usize),
    Pair(usize, usize),
}

impl Group {
    fn indices(&self) -> Vec<usize> {
        match self {
            Group::Real(i) => vec![*i],
            Group::Pair(u, l) => vec![*u, *l],
        }
    }

    fn sort_key(&self, points: &[Complex64]) -> (f64, f64) {
        match self {
            Group::Real(i) => (0.0, points[*i].re),
            Group::Pair(u, _) => (points[*u].im, points[*u].re),
        }
    }
}

fn conjugate_groups(points: &[Complex64]) -> Result<Vec<Group>> {
    let mut used = vec![false; points.len()];
    let mut groups = Vec::new();
    for i in 0..points.len() {
        if used[i] {
            continue;
        }
        let tol = 1e-12 * (1.0 + points[i].norm());
        if points[i].im.abs() <= tol {
            used[i] = true;
            groups.push(Group::Real(i));
            continue;
        }
        let mut partner = None;
        for (j, used_j) in used.iter().enumerate().skip(i + 1) {
            if !*used_j && (points[j] - points[i].conj()).norm() <= 1e-9 * (1.0 + points[i].norm())
            {
                partner = Some(j);
                break;
            }
        }
        let j = partner.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "point set is not conjugate-closed: no partner for {}",
                points[i]
            ))
        })?;
        used[i] = true;
        used[j] = true;
        let (upper, lower) = if points[i].im > 0.0 { (i, j) } else { (j, i) };
        groups.push(Group::Pair(upper, lower));
    }
    groups.sort_by(|a, b| {
        let ka = a.sort_key(points);
        let kb = b.sort_key(points);
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(groups)
}

fn subset(data: &InterpolationData, idx: &[usize]) -> Result<InterpolationData> {
    let points = idx.iter().map(|&i| data.points()[i]).collect();
    let values = idx.iter().map(|&i| data.values()[i]).collect();
    let mut out = InterpolationData::new(points, values)?;
    if let Some(d) = data.derivs() {
        out = out.with_derivs(idx.iter().map(|&i| d[i]).collect())?;
    }
    if let Some(w) = data.weights() {
        out = out.with_weights(idx.iter().map(|&i| w[i]).collect())?;
    }
    Ok(out)
}

/// Splits interpolation data into left and right sets by sorting points by
/// imaginary part (conjugate pairs travel together) and alternating the
/// assignment. With an odd number of groups the left set gets the extra one.
pub fn partition_interweave(
    data: &InterpolationData,
) -> Result<(InterpolationData, InterpolationData)> {
    if data.len() < 2 {
        return Err(Error::InvalidParameter(
            "partitioning needs at least two points".into(),
        ));
    }
    let (left_idx, right_idx) = if data.is_conjugate_closed() {
        let groups = conjugate_groups(data.points())?;
        if groups.len() == 1 {
            // A single conjugate pair can only be split across the sides.
            match groups[0] {
                Group::Pair(u, l) => (vec![u], vec![l]),
                Group::Real(_) => {
                    return Err(Error::InvalidParameter(
                        "cannot partition a single point".into(),
                    ))
                }
            }
        } else {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for (gi, g) in groups.iter().enumerate() {
                let target = if gi % 2 == 0 { &mut left } else { &mut right };
                target.extend(g.indices());
            }
            (left, right)
        }
    } else {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| {
            let ka = (data.points()[a].im, data.points()[a].re, a);
            let kb = (data.points()[b].im, data.points()[b].re, b);
            ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            if pos % 2 == 0 {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        (left, right)
    };
    Ok((subset(data, &left_idx)?, subset(data, &right_idx)?))
}

/// Unitary pair-mixing transform: one scalar 1 per real point, one 2x2 block
/// per adjacent (upper, lower) conjugate pair.
fn pair_mixing_transform(points: &[Complex64]) -> DMatrix<Complex64> {
    let n = points.len();
    let mut j = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut i = 0;
    while i < n {
        let is_pair = i + 1 < n
            && points[i].im.abs() > 1e-12 * (1.0 + points[i].norm())
            && (points[i + 1] - points[i].conj()).norm() <= 1e-9 * (1.0 + points[i].norm());
        if is_pair {
            j[(i, i)] = Complex64::new(s, 0.0);
            j[(i, i + 1)] = Complex64::new(s, 0.0);
            j[(i + 1, i)] = Complex64::new(0.0, -s);
            j[(i + 1, i + 1)] = Complex64::new(0.0, s);
            i += 2;
        } else {
            j[(i, i)] = Complex64::new(1.0, 0.0);
            i += 1;
        }
    }
    j
}

fn realify_matrix(m: &DMatrix<Complex64>, context: &'static str) -> Result<DMatrix<f64>> {
    let norm = m.norm();
    let imag: f64 = m.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
    if imag > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "{context}: transformed matrix kept an imaginary part ({imag:.3e} vs norm {norm:.3e})"
        )));
    }
    Ok(m.map(|c| c.re))
}

fn realify_vector(v: &DVector<Complex64>, context: &'static str) -> Result<DVector<f64>> {
    let norm = v.norm();
    let imag: f64 = v.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
    if imag > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "{context}: transformed vector kept an imaginary part ({imag:.3e} vs norm {norm:.3e})"
        )));
    }
    Ok(v.map(|c| c.re))
}

/// Orders conjugate-closed data so pairs sit adjacently (upper first),
/// groups sorted by imaginary part.
fn order_by_groups(data: &InterpolationData) -> Result<InterpolationData> {
    let groups = conjugate_groups(data.points())?;
    let mut idx = Vec::with_capacity(data.len());
    for g in &groups {
        idx.extend(g.indices());
    }
    subset(data, &idx)
}

struct RealPencil {
    l: DMatrix<f64>,
    ls: DMatrix<f64>,
    v: DVector<f64>,
    w: DVector<f64>,
}

fn realify_pencil(
    pencil: &LoewnerPencil,
    left_pts: &[Complex64],
    right_pts: &[Complex64],
) -> Result<RealPencil> {
    let jq = pair_mixing_transform(left_pts);
    let jk = pair_mixing_transform(right_pts);
    let jk_h = jk.adjoint();
    let l = realify_matrix(&(&jq * &pencil.l * &jk_h), "Loewner matrix")?;
    let ls = realify_matrix(&(&jq * &pencil.ls * &jk_h), "shifted Loewner matrix")?;
    let v = realify_vector(&(&jq * &pencil.v), "left value vector")?;
    let w = realify_vector(&(jk.map(|c| c.conj()) * &pencil.wv), "right value vector")?;
    Ok(RealPencil { l, ls, v, w })
}

fn assemble_truncated(pencil: RealPencil, r: usize) -> Result<DescriptorROM> {
    let q = pencil.l.nrows();
    let k = pencil.l.ncols();
    let mut row_stack = DMatrix::<f64>::zeros(q, 2 * k);
    row_stack.view_mut((0, 0), (q, k)).copy_from(&pencil.l);
    row_stack.view_mut((0, k), (q, k)).copy_from(&pencil.ls);
    let mut col_stack = DMatrix::<f64>::zeros(2 * q, k);
    col_stack.view_mut((0, 0), (q, k)).copy_from(&pencil.l);
    col_stack.view_mut((q, 0), (q, k)).copy_from(&pencil.ls);

    let (y_full, s_row, _) = linalg::thin_svd_real(&row_stack)?;
    let (_, s_col, x_full) = linalg::thin_svd_real(&col_stack)?;
    let rank_row = linalg::numerical_rank(s_row.as_slice(), q, 2 * k, Some(1e-12));
    let rank_col = linalg::numerical_rank(s_col.as_slice(), 2 * q, k, Some(1e-12));
    let r_eff = r.min(rank_row).min(rank_col);
    if r_eff == 0 {
        return Err(Error::Numerical(
            "Loewner pencil has numerical rank zero".into(),
        ));
    }
    let y = y_full.columns(0, r_eff);
    let x = x_full.columns(0, r_eff);
    let e = -(y.transpose() * &pencil.l * x);
    let a = -(y.transpose() * &pencil.ls * x);
    let b = y.transpose() * &pencil.v;
    let c = x.transpose() * &pencil.w;
    DescriptorROM::new(e, a, b, c)
}

/// Builds an order-`r` interpolatory model from value samples: the data is
/// interweaved into left/right sets, the divided-difference pencil is
/// assembled, transformed to real form, and truncated through the singular
/// vectors of the stacked pencil. When `r` exceeds the numerical pencil rank
/// the order is silently capped at that rank (check `order()` on the
/// result).
pub fn loewner_rom(data: &InterpolationData, r: usize) -> Result<DescriptorROM> {
    if r < 1 {
        return Err(Error::InvalidParameter("model order must be >= 1".into()));
    }
    let (left, right) = partition_interweave(data)?;
    if left.len().min(right.len()) < r {
        return Err(Error::InvalidParameter(format!(
            "order {r} needs at least {r} points per side; have {} and {}",
            left.len(),
            right.len()
        )));
    }
    let pencil = build_loewner_pencil(left.points(), left.values(), right.points(), right.values())?;
    if data.is_conjugate_closed() && !(left.is_conjugate_closed() && right.is_conjugate_closed()) {
        // Single conjugate pair split across the sides: the divided
        // differences are real and the value product is |H|².
        if left.len() == 1 && right.len() == 1 {
            let l = pencil.l[(0, 0)];
            let ls = pencil.ls[(0, 0)];
            let cb = pencil.wv[0] * pencil.v[0];
            if l.im.abs() > 1e-8 * l.norm() || cb.im.abs() > 1e-8 * cb.norm() {
                return Err(Error::Numerical(
                    "conjugate-pair Loewner data did not reduce to real form".into(),
                ));
            }
            return DescriptorROM::new(
                DMatrix::from_element(1, 1, -l.re),
                DMatrix::from_element(1, 1, -ls.re),
                DVector::from_element(1, 1.0),
                DVector::from_element(1, cb.re),
            );
        }
        return Err(Error::InvalidParameter(
            "conjugate-closed data must stay conjugate-closed per side".into(),
        ));
    }
    if !data.is_conjugate_closed() {
        return Err(Error::InvalidParameter(
            "a real realization needs conjugate-closed (or real) data".into(),
        ));
    }
    let real = realify_pencil(&pencil, left.points(), right.points())?;
    assemble_truncated(real, r)
}

/// Builds an order-`r` model matching both values and first derivatives at
/// a single point set (diagonal entries of the pencil use the derivative
/// limits of the divided differences).
pub fn hermite_loewner_rom(data: &InterpolationData, r: usize) -> Result<DescriptorROM> {
    if r < 1 {
        return Err(Error::InvalidParameter("model order must be >= 1".into()));
    }
    let derivs = data.derivs().ok_or_else(|| {
        Error::InvalidParameter("Hermite construction needs derivative samples".into())
    })?;
    let _ = derivs;
    if !data.is_conjugate_closed() {
        return Err(Error::InvalidParameter(
            "a real realization needs conjugate-closed (or real) data".into(),
        ));
    }
    if data.len() < r {
        return Err(Error::InvalidParameter(format!(
            "order {r} needs at least {r} Hermite points, have {}",
            data.len()
        )));
    }
    let ordered = order_by_groups(data)?;
    let pts = ordered.points();
    let vals = ordered.values();
    let ders = ordered.derivs().expect("derivatives preserved by reorder");
    let m = ordered.len();
    let mut l = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
    let mut ls = l.clone();
    for i in 0..m {
        for j in 0..m {
            if i == j {
                l[(i, j)] = ders[i];
                ls[(i, j)] = vals[i] + pts[i] * ders[i];
            } else {
                let denom = pts[i] - pts[j];
                if denom.norm() < 1e-14 * (1.0 + pts[i].norm()) {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate Hermite point {}",
                        pts[i]
                    )));
                }
                l[(i, j)] = (vals[i] - vals[j]) / denom;
                ls[(i, j)] = (pts[i] * vals[i] - pts[j] * vals[j]) / denom;
            }
        }
    }
    let pencil = LoewnerPencil {
        l,
        ls,
        v: DVector::from_column_slice(vals),
        wv: DVector::from_column_slice(vals),
    };
    let real = realify_pencil(&pencil, pts, pts)?;
    assemble_truncated(real, r)
}
