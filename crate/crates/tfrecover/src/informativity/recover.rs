//! Windowed moment recovery with residual-based window selection, averaged
//! estimates, and the normalized-standard-deviation error indicator.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::informativity::checks::{
    check_informativity, check_rhs_against_v, moment_vectors, orth_basis, OrthBasis, Tolerances,
};
use crate::informativity::hankel::build_gn;
use crate::lti::TimeSeries;

/// Which windows of a trajectory participate in recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPlan {
    /// Window length parameter; each window holds `t + 1` samples.
    pub t: usize,
    /// Number of windows sampled.
    pub k: usize,
    /// Number of lowest-residual estimates kept for averaging.
    pub w: usize,
    /// Window start indices, each in `[0, T - t]`.
    pub starts: Vec<usize>,
}

impl WindowPlan {
    /// `k` windows with deterministic, evenly spaced starts over `[0, T-t]`.
    pub fn evenly_spaced(t_steps: usize, t: usize, k: usize, w: usize) -> Result<Self> {
        Self::check_counts(t_steps, t, k, w)?;
        let span = t_steps - t;
        let starts = if k == 1 {
            vec![0]
        } else {
            (0..k)
                .map(|i| ((i as f64) * (span as f64) / ((k - 1) as f64)).round() as usize)
                .collect()
        };
        Ok(Self { t, k, w, starts })
    }

    /// `k` windows with seeded random distinct starts.
    pub fn seeded_random(t_steps: usize, t: usize, k: usize, w: usize, seed: u64) -> Result<Self> {
        Self::check_counts(t_steps, t, k, w)?;
        let span = t_steps - t;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut starts = Vec::with_capacity(k);
        while starts.len() < k {
            let s = (rng.random::<f64>() * (span as f64 + 1.0)).floor() as usize;
            let s = s.min(span);
            if !starts.contains(&s) {
                starts.push(s);
            }
        }
        starts.sort_unstable();
        Ok(Self { t, k, w, starts })
    }

    fn check_counts(t_steps: usize, t: usize, k: usize, w: usize) -> Result<()> {
        if t >= t_steps + 1 {
            return Err(Error::InsufficientData {
                context: "window plan",
                needed: t + 1,
                got: t_steps + 1,
            });
        }
        let available = t_steps - t + 1;
        if w < 1 || k < w || k > available {
            return Err(Error::InvalidParameter(format!(
                "window counts must satisfy 1 <= W <= K <= {available}, got K={k}, W={w}"
            )));
        }
        Ok(())
    }

    /// Validates the plan against a trajectory and Hankel depth.
    pub fn validate_for(&self, ts: &TimeSeries, depth: usize) -> Result<()> {
        if self.t < depth {
            return Err(Error::InvalidParameter(format!(
                "window length parameter t={} must be at least the depth {depth}",
                self.t
            )));
        }
        let t_steps = ts.t_steps();
        if self.t >= t_steps + 1 {
            return Err(Error::InsufficientData {
                context: "window plan",
                needed: self.t + 1,
                got: t_steps + 1,
            });
        }
        if self.starts.len() != self.k || self.w > self.k || self.w < 1 {
            return Err(Error::InvalidParameter(
                "window plan counts are inconsistent".into(),
            ));
        }
        for &s in &self.starts {
            if s + self.t > t_steps {
                return Err(Error::InvalidParameter(format!(
                    "window start {s} exceeds T - t = {}",
                    t_steps - self.t
                )));
            }
        }
        Ok(())
    }
}

/// Default plan shape: window length `t_factor * n`, `k` windows, keep `w`.
#[derive(Debug, Clone, Copy)]
pub struct PlanTemplate {
    pub t_factor: usize,
    pub k: usize,
    pub w: usize,
}

impl Default for PlanTemplate {
    fn default() -> Self {
        Self {
            t_factor: 3,
            k: 20,
            w: 10,
        }
    }
}

impl PlanTemplate {
    pub fn build(&self, t_steps: usize, depth: usize) -> Result<WindowPlan> {
        let t = self.t_factor * depth;
        let available = t_steps.saturating_sub(t).saturating_add(1);
        let k = self.k.min(available.max(1));
        let w = self.w.min(k);
        WindowPlan::evenly_spaced(t_steps, t, k, w)
    }
}

/// Per-window bookkeeping of one recovery point.
#[derive(Debug, Clone)]
pub struct WindowEstimate {
    /// Index of the window within the plan.
    pub window: usize,
    /// Absolute start index of the window in the trajectory.
    pub start: usize,
    pub unique: bool,
    pub exists: bool,
    /// Estimate and least-squares residual when both checks passed.
    pub value: Option<Complex64>,
    pub residual: Option<f64>,
    /// True when this window entered the kept average.
    pub kept: bool,
}

/// Recovered moments at one evaluation point.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub sigma: Complex64,
    /// Mean of the kept per-window estimates; `None` when no window passed.
    pub m0: Option<Complex64>,
    /// Derivative estimate when requested and recoverable.
    pub m1: Option<Complex64>,
    /// Normalized sample standard deviation of the kept estimates;
    /// `+inf` when fewer than two windows passed.
    pub sw0: f64,
    pub sw1: Option<f64>,
    /// False when the standard deviation could not be normalized by `|M0|`.
    pub sw0_normalized: bool,
    pub per_window: Vec<WindowEstimate>,
    /// Plan indices of the kept windows, in selection order.
    pub kept: Vec<usize>,
    pub n_used: usize,
    /// True when at least two windows passed both checks.
    pub informative: bool,
}

struct Averaged {
    mean: Complex64,
    sw: f64,
    normalized: bool,
    kept: Vec<usize>,
}

/// Mean, normalized sample standard deviation, and kept indices of the `w`
/// lowest-residual estimates (ties broken by lower window index).
fn select_and_average(
    estimates: &[(usize, Complex64, f64)],
    w: usize,
) -> Option<Averaged> {
    if estimates.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..estimates.len()).collect();
    order.sort_by(|&a, &b| {
        estimates[a]
            .2
            .partial_cmp(&estimates[b].2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(estimates[a].0.cmp(&estimates[b].0))
    });
    order.truncate(w);
    let kept: Vec<usize> = order.iter().map(|&i| estimates[i].0).collect();
    let count = order.len();
    let mean = order
        .iter()
        .map(|&i| estimates[i].1)
        .sum::<Complex64>()
        / count as f64;
    if count < 2 {
        return Some(Averaged {
            mean,
            sw: f64::INFINITY,
            normalized: false,
            kept,
        });
    }
    let var = order
        .iter()
        .map(|&i| (estimates[i].1 - mean).norm_sqr())
        .sum::<f64>()
        / (count - 1) as f64;
    let s = var.sqrt();
    let max_kept = order
        .iter()
        .map(|&i| estimates[i].1.norm())
        .fold(0.0, f64::max);
    // Normalization by |M0| breaks down when the mean nearly cancels.
    let degenerate = mean.norm() < 1e-14 * max_kept || max_kept < 1e-30;
    if degenerate {
        Some(Averaged {
            mean,
            sw: s,
            normalized: false,
            kept,
        })
    } else {
        Some(Averaged {
            mean,
            sw: s / mean.norm(),
            normalized: true,
            kept,
        })
    }
}

/// Recovers transfer-function values (and optionally derivatives) at each
/// point in `sigmas` from a single trajectory.
///
/// One orthonormal basis is computed per window and shared across all
/// points. For each point, every window is checked for uniqueness and
/// existence; the passing windows are solved, the `w` lowest-residual
/// estimates are averaged, and the normalized sample standard deviation is
/// recorded as the error indicator. Points with fewer than two passing
/// windows come back flagged with an infinite indicator rather than as
/// errors.
pub fn recover(
    ts: &TimeSeries,
    sigmas: &[Complex64],
    n_used: usize,
    plan: &WindowPlan,
    tol: &Tolerances,
    want_deriv: bool,
) -> Result<Vec<RecoveryResult>> {
    tol.validate()?;
    if n_used < 1 {
        return Err(Error::InvalidParameter(
            "recovery depth must be at least 1".into(),
        ));
    }
    plan.validate_for(ts, n_used)?;

    // Window bases are independent of sigma and computed once.
    let bases: Vec<OrthBasis> = plan
        .starts
        .iter()
        .map(|&s| orth_basis(&build_gn(ts, n_used, s, plan.t + 1)?, tol.rank_tol))
        .collect::<Result<_>>()?;

    let results: Vec<RecoveryResult> = sigmas
        .par_iter()
        .map(|&sigma| recover_one(sigma, n_used, plan, tol, &bases, want_deriv))
        .collect::<Result<_>>()?;
    Ok(results)
}

fn recover_one(
    sigma: Complex64,
    n_used: usize,
    plan: &WindowPlan,
    tol: &Tolerances,
    bases: &[OrthBasis],
    want_deriv: bool,
) -> Result<RecoveryResult> {
    let mv = moment_vectors(sigma, n_used)?;
    let mut per_window = Vec::with_capacity(bases.len());
    let mut passing: Vec<(usize, Complex64, f64)> = Vec::new();
    // v and b⊥ are retained per window for the derivative pass.
    let mut projections: Vec<Option<DVector<Complex64>>> = Vec::with_capacity(bases.len());

    for (idx, basis) in bases.iter().enumerate() {
        let chk = check_informativity(basis, &mv, tol);
        let mut est = WindowEstimate {
            window: idx,
            start: plan.starts[idx],
            unique: chk.unique,
            exists: chk.exists,
            value: None,
            residual: None,
            kept: false,
        };
        if chk.unique && chk.exists {
            let v_norm = chk.v.norm();
            let value = chk.v.dotc(&chk.b_perp) / Complex64::new(v_norm * v_norm, 0.0);
            let residual = (&chk.b_perp - &chk.v * value).norm();
            est.value = Some(value);
            est.residual = Some(residual);
            passing.push((idx, value, residual));
            projections.push(Some(chk.v));
        } else if chk.unique {
            // Keep v for the derivative pass diagnostics even when the value
            // right-hand side was inconsistent.
            projections.push(Some(chk.v));
        } else {
            projections.push(None);
        }
        per_window.push(est);
    }

    let averaged = select_and_average(&passing, plan.w);
    let (m0, sw0, sw0_normalized, kept, informative) = match &averaged {
        Some(avg) => {
            for &k in &avg.kept {
                per_window[k].kept = true;
            }
            (
                Some(avg.mean),
                avg.sw,
                avg.normalized,
                avg.kept.clone(),
                avg.kept.len() >= 2,
            )
        }
        None => (None, f64::INFINITY, false, Vec::new(), false),
    };

    let mut m1 = None;
    let mut sw1 = None;
    if want_deriv && informative {
        let m0_val = m0.expect("informative result carries a mean");
        let rhs = mv.hermite_rhs(m0_val);
        let rhs_norm = rhs.norm();
        let mut passing1: Vec<(usize, Complex64, f64)> = Vec::new();
        for (idx, basis) in bases.iter().enumerate() {
            let Some(v) = &projections[idx] else {
                continue;
            };
            if !per_window[idx].unique {
                continue;
            }
            let mut re = DVector::from_fn(rhs.len(), |i, _| rhs[i].re);
            let mut im = DVector::from_fn(rhs.len(), |i, _| rhs[i].im);
            let u = basis.basis();
            if u.ncols() > 0 {
                for _ in 0..2 {
                    re -= u * (u.transpose() * &re);
                    im -= u * (u.transpose() * &im);
                }
            }
            let rhs_perp = DVector::from_fn(rhs.len(), |i, _| Complex64::new(re[i], im[i]));
            let (_, ratio) = check_rhs_against_v(v, &rhs_perp, rhs_norm);
            if ratio > tol.tau2 {
                continue;
            }
            let v_norm = v.norm();
            if v_norm == 0.0 {
                continue;
            }
            let value = v.dotc(&rhs_perp) / Complex64::new(v_norm * v_norm, 0.0);
            let residual = (&rhs_perp - v * value).norm();
            passing1.push((idx, value, residual));
        }
        if let Some(avg) = select_and_average(&passing1, plan.w) {
            if avg.kept.len() >= 2 {
                m1 = Some(avg.mean);
                sw1 = Some(avg.sw);
            }
        }
    }

    Ok(RecoveryResult {
        sigma,
        m0,
        m1,
        sw0,
        sw1,
        sw0_normalized,
        per_window,
        kept,
        n_used,
        informative,
    })
}

/// One attempt of [`adapt_order`].
#[derive(Debug, Clone)]
pub struct AttemptSummary {
    pub n_used: usize,
    pub median_sw: f64,
    pub informative_points: usize,
}

/// Result of [`adapt_order`].
#[derive(Debug)]
pub struct AdaptResult {
    pub n_used: usize,
    pub results: Vec<RecoveryResult>,
    /// True when the indicator target was met.
    pub converged: bool,
    pub attempts: Vec<AttemptSummary>,
}

fn median(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::INFINITY;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Grows the working depth until the median error indicator over the
/// evaluation points drops below `s_target`, starting at `n_init` and
/// multiplying by 1.5 (rounded up) per attempt, capped at `n_max`.
/// Non-informative points enter the median at the `+inf` sentinel, so a
/// depth that leaves most points unrecoverable cannot pass the gate.
///
/// Returns the first passing attempt, or the best-indicator attempt with
/// `converged = false` when the cap is reached first.
pub fn adapt_order(
    ts: &TimeSeries,
    sigmas: &[Complex64],
    template: &PlanTemplate,
    tol: &Tolerances,
    s_target: f64,
    n_init: usize,
    n_max: usize,
) -> Result<AdaptResult> {
    if n_init < 1 {
        return Err(Error::InvalidParameter(
            "initial depth must be at least 1".into(),
        ));
    }
    if n_max < n_init {
        return Err(Error::InvalidParameter(format!(
            "depth cap {n_max} is below the initial depth {n_init}"
        )));
    }
    if template.t_factor * n_max > ts.t_steps() {
        return Err(Error::InvalidParameter(format!(
            "depth cap {n_max} needs windows of {} steps but the trajectory has {}",
            template.t_factor * n_max,
            ts.t_steps()
        )));
    }
    let mut n = n_init;
    let mut attempts = Vec::new();
    let mut best: Option<(f64, usize, Vec<RecoveryResult>)> = None;
    loop {
        let plan = template.build(ts.t_steps(), n)?;
        let results = recover(ts, sigmas, n, &plan, tol, false)?;
        let mut sws: Vec<f64> = results
            .iter()
            .map(|r| if r.informative { r.sw0 } else { f64::INFINITY })
            .collect();
        let informative_points = results.iter().filter(|r| r.informative).count();
        let med = median(&mut sws);
        attempts.push(AttemptSummary {
            n_used: n,
            median_sw: med,
            informative_points,
        });
        // Ties at the infinite sentinel prefer the deeper attempt.
        let better = best
            .as_ref()
            .map_or(true, |(b, _, _)| med < *b || (med == *b && med.is_infinite()));
        if better {
            best = Some((med, n, results));
        }
        if med <= s_target {
            let (_, n_used, results) = best.expect("attempt recorded");
            return Ok(AdaptResult {
                n_used,
                results,
                converged: true,
                attempts,
            });
        }
        if n >= n_max {
            let (_, n_used, results) = best.expect("attempt recorded");
            return Ok(AdaptResult {
                n_used,
                results,
                converged: false,
                attempts,
            });
        }
        n = (((n as f64) * 1.5).ceil() as usize).min(n_max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::random_stable_system;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_input(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn unit_circle_points(count: usize, lo: f64, hi: f64) -> Vec<Complex64> {
        let ratio = hi / lo;
        (0..count)
            .map(|i| {
                let f = i as f64 / (count.max(2) - 1) as f64;
                Complex64::from_polar(1.0, lo * ratio.powf(f))
            })
            .collect()
    }

    #[test]
    fn evenly_spaced_starts_are_distinct_and_in_range() {
        let plan = WindowPlan::evenly_spaced(100, 15, 20, 10).unwrap();
        assert_eq!(plan.starts.len(), 20);
        assert_eq!(plan.starts[0], 0);
        assert_eq!(*plan.starts.last().unwrap(), 85);
        let mut sorted = plan.starts.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 20);
    }

    #[test]
    fn seeded_random_plan_is_reproducible() {
        let a = WindowPlan::seeded_random(200, 30, 12, 6, 9).unwrap();
        let b = WindowPlan::seeded_random(200, 30, 12, 6, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.starts.iter().all(|&s| s <= 170));
    }

    #[test]
    fn infeasible_plans_rejected() {
        assert!(WindowPlan::evenly_spaced(10, 15, 2, 1).is_err());
        assert!(WindowPlan::evenly_spaced(100, 90, 20, 10).is_err());
        assert!(WindowPlan::evenly_spaced(100, 15, 10, 20).is_err());
    }

    #[test]
    fn exact_data_full_order_recovery() {
        let n = 5;
        let sys = random_stable_system(n, 42).unwrap();
        let ts = sys
            .simulate(&gaussian_input(101, 7), &DVector::zeros(n))
            .unwrap();
        let plan = PlanTemplate::default().build(ts.t_steps(), n).unwrap();
        let sigmas = unit_circle_points(12, 1e-2, 3.0);
        let results = recover(&ts, &sigmas, n, &plan, &Tolerances::default(), true).unwrap();
        for r in &results {
            assert!(r.informative, "sigma {} not informative", r.sigma);
            let truth = sys.eval_tf(r.sigma).unwrap();
            let err = (r.m0.unwrap() - truth).norm() / truth.norm();
            assert!(err < 1e-8, "sigma {}: relative error {err}", r.sigma);
            let dtruth = sys.eval_tf_deriv(r.sigma).unwrap();
            let derr = (r.m1.unwrap() - dtruth).norm() / dtruth.norm();
            assert!(derr < 1e-6, "sigma {}: derivative error {derr}", r.sigma);
        }
    }

    #[test]
    fn order_overestimates_still_recover() {
        let n = 4;
        let sys = random_stable_system(n, 11).unwrap();
        let ts = sys
            .simulate(&gaussian_input(161, 3), &DVector::zeros(n))
            .unwrap();
        let sigmas = unit_circle_points(8, 5e-2, 3.0);
        for n_used in [n, n + 1, n + 5] {
            let plan = PlanTemplate::default().build(ts.t_steps(), n_used).unwrap();
            let results =
                recover(&ts, &sigmas, n_used, &plan, &Tolerances::default(), false).unwrap();
            for r in &results {
                if !r.informative {
                    continue;
                }
                let truth = sys.eval_tf(r.sigma).unwrap();
                let err = (r.m0.unwrap() - truth).norm() / truth.norm();
                assert!(err < 1e-8, "n_used {n_used}, sigma {}: {err}", r.sigma);
            }
            assert!(results.iter().filter(|r| r.informative).count() >= 6);
        }
    }

    #[test]
    fn conjugate_symmetry_of_recovered_values() {
        let n = 6;
        let sys = random_stable_system(n, 23).unwrap();
        let ts = sys
            .simulate(&gaussian_input(201, 5), &DVector::zeros(n))
            .unwrap();
        let plan = PlanTemplate::default().build(ts.t_steps(), n).unwrap();
        let sigmas: Vec<Complex64> = unit_circle_points(6, 1e-1, 3.0);
        let conj: Vec<Complex64> = sigmas.iter().map(|s| s.conj()).collect();
        let up = recover(&ts, &sigmas, n, &plan, &Tolerances::default(), false).unwrap();
        let dn = recover(&ts, &conj, n, &plan, &Tolerances::default(), false).unwrap();
        for (a, b) in up.iter().zip(dn.iter()) {
            if a.informative && b.informative && a.kept == b.kept {
                let diff = (a.m0.unwrap().conj() - b.m0.unwrap()).norm();
                assert!(diff <= 1e-10 * a.m0.unwrap().norm().max(1.0));
            }
        }
    }

    #[test]
    fn recovery_is_deterministic() {
        let n = 4;
        let sys = random_stable_system(n, 2).unwrap();
        let ts = sys
            .simulate(&gaussian_input(121, 9), &DVector::zeros(n))
            .unwrap();
        let plan = PlanTemplate::default().build(ts.t_steps(), n).unwrap();
        let sigmas = unit_circle_points(7, 1e-2, 3.0);
        let a = recover(&ts, &sigmas, n, &plan, &Tolerances::default(), true).unwrap();
        let b = recover(&ts, &sigmas, n, &plan, &Tolerances::default(), true).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.m0, y.m0);
            assert_eq!(x.m1, y.m1);
            assert!(x.sw0 == y.sw0 || (x.sw0.is_infinite() && y.sw0.is_infinite()));
            assert_eq!(x.kept, y.kept);
        }
    }

    #[test]
    fn under_order_is_flagged_or_noisy() {
        let n = 5;
        let sys = random_stable_system(n, 42).unwrap();
        let ts = sys
            .simulate(&gaussian_input(101, 7), &DVector::zeros(n))
            .unwrap();
        let n_used = 3;
        let plan = PlanTemplate::default().build(ts.t_steps(), n_used).unwrap();
        let sigmas = unit_circle_points(12, 1e-2, 3.0);
        let results = recover(&ts, &sigmas, n_used, &plan, &Tolerances::default(), false).unwrap();
        let bad = results.iter().filter(|r| r.sw0 > 1e-3).count();
        assert!(
            bad * 2 > results.len(),
            "expected a majority of points to show a large indicator, got {bad}/{}",
            results.len()
        );
    }

    #[test]
    fn adapt_order_stops_immediately_when_sufficient() {
        let n = 5;
        let sys = random_stable_system(n, 42).unwrap();
        let ts = sys
            .simulate(&gaussian_input(101, 7), &DVector::zeros(n))
            .unwrap();
        let sigmas = unit_circle_points(10, 1e-2, 3.0);
        let out = adapt_order(
            &ts,
            &sigmas,
            &PlanTemplate::default(),
            &Tolerances::default(),
            1e-6,
            n,
            20,
        )
        .unwrap();
        assert!(out.converged);
        assert_eq!(out.n_used, n);
        assert_eq!(out.attempts.len(), 1);
    }

    #[test]
    fn adapt_order_escalates_from_underestimate() {
        let n = 8;
        let sys = random_stable_system(n, 5).unwrap();
        let ts = sys
            .simulate(&gaussian_input(301, 13), &DVector::zeros(n))
            .unwrap();
        let sigmas = unit_circle_points(10, 1e-2, 3.0);
        let out = adapt_order(
            &ts,
            &sigmas,
            &PlanTemplate::default(),
            &Tolerances::default(),
            1e-6,
            2,
            40,
        )
        .unwrap();
        assert!(out.attempts.len() > 1, "expected escalation");
        assert!(out.converged);
        assert!(out.n_used >= n || out.attempts.last().unwrap().median_sw <= 1e-6);
    }

    #[test]
    fn adapt_order_reports_nonconvergence_at_cap() {
        let n = 8;
        let sys = random_stable_system(n, 5).unwrap();
        let ts = sys
            .simulate(&gaussian_input(301, 13), &DVector::zeros(n))
            .unwrap();
        let sigmas = unit_circle_points(6, 1e-2, 3.0);
        let out = adapt_order(
            &ts,
            &sigmas,
            &PlanTemplate::default(),
            &Tolerances::default(),
            1e-30,
            2,
            4,
        )
        .unwrap();
        assert!(!out.converged);
        assert!(out.n_used <= 4);
    }
}
