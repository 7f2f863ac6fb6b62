//! Experiment driver behind the command-line interface: config-driven
//! generate/simulate/recover/rom stages plus self-contained reproduction
//! experiments that emit figure data and a machine-readable summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{spaced, ExperimentConfig};
use crate::error::{Error, Result};
use crate::informativity::{
    adapt_order, build_gn, moment_vectors, orth_basis, recover, PlanTemplate, RecoveryResult,
    Tolerances, WindowPlan,
};
use crate::io;
use crate::lti::{ResolventEvaluator, StateSpaceSystem};
use crate::metrics::{self, FrequencySweep};
use crate::order_est;
use crate::rom::{
    hermite_loewner_rom, loewner_rom, stable_part, vector_fitting, DescriptorROM,
    InterpolationData, ModalSystem, PoleInit, VfModel,
};

pub fn gaussian_input(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn sigma_grid(omegas: &[f64]) -> Vec<Complex64> {
    omegas.iter().map(|&w| Complex64::from_polar(1.0, w)).collect()
}

fn tolerances(cfg: &ExperimentConfig) -> Tolerances {
    Tolerances {
        tau1: cfg.recovery.tau1,
        tau2: cfg.recovery.tau2,
        rank_tol: cfg.recovery.rank_tol,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Builds the configured system and writes it as JSON.
pub fn cmd_generate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let sys = cfg.make_system()?;
    let path = out_dir.join("system.json");
    io::write_state_space_json(&path, &sys)?;
    Ok(path)
}

/// Simulates the configured trajectory and writes it as CSV (plus the
/// system JSON for provenance).
pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    ensure_dir(out_dir)?;
    let sys = cfg.make_system()?;
    io::write_state_space_json(&out_dir.join("system.json"), &sys)?;
    let u = gaussian_input(cfg.trajectory.steps + 1, cfg.trajectory.input_seed);
    let ts = sys.simulate(&u, &DVector::zeros(sys.order()))?;
    let path = out_dir.join("trajectory.csv");
    io::write_time_series_csv(&path, &ts)?;
    Ok(path)
}

/// Artifacts of the recovery stage.
pub struct RecoverOutput {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub n_used: usize,
    pub results: Vec<RecoveryResult>,
}

/// Recovers transfer-function data from the trajectory in the output
/// directory (simulating it first when absent).
pub fn cmd_recover(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RecoverOutput> {
    ensure_dir(out_dir)?;
    let traj_path = out_dir.join("trajectory.csv");
    if !traj_path.exists() {
        cmd_simulate(cfg, out_dir)?;
    }
    let ts = io::read_time_series_csv(&traj_path)?;
    let sigmas = sigma_grid(&cfg.frequencies());
    let tol = tolerances(cfg);
    let template = PlanTemplate {
        t_factor: cfg.recovery.t_factor,
        k: cfg.recovery.k_windows,
        w: cfg.recovery.w_keep,
    };

    let mut diagnostics = BTreeMap::<String, serde_json::Value>::new();
    let (n_used, results) = if cfg.recovery.n_used > 0 {
        let n = cfg.recovery.n_used;
        let plan = template.build(ts.t_steps(), n)?;
        let results = recover(&ts, &sigmas, n, &plan, &tol, cfg.recovery.derivatives)?;
        (n, results)
    } else {
        let est = order_est::estimate_order_default(&ts)?;
        diagnostics.insert("order_estimate".into(), serde_json::json!(est.n));
        let n_init = est.n.max(1);
        let n_max = if cfg.recovery.n_max > 0 {
            cfg.recovery.n_max
        } else {
            (ts.t_steps() / cfg.recovery.t_factor).max(n_init)
        };
        let adapt = adapt_order(
            &ts,
            &sigmas,
            &template,
            &tol,
            cfg.recovery.s_target,
            n_init,
            n_max,
        )?;
        diagnostics.insert(
            "adapt_attempts".into(),
            serde_json::json!(adapt
                .attempts
                .iter()
                .map(|a| serde_json::json!({
                    "n_used": a.n_used,
                    "median_sw": a.median_sw,
                    "informative_points": a.informative_points,
                }))
                .collect::<Vec<_>>()),
        );
        diagnostics.insert("converged".into(), serde_json::json!(adapt.converged));
        let results = if cfg.recovery.derivatives {
            let plan = template.build(ts.t_steps(), adapt.n_used)?;
            recover(&ts, &sigmas, adapt.n_used, &plan, &tol, true)?
        } else {
            adapt.results
        };
        (adapt.n_used, results)
    };

    let json = out_dir.join("recovery.json");
    let csv = out_dir.join("recovery.csv");
    io::write_recovery_json(&json, &results)?;
    io::write_recovery_csv(&csv, &results)?;
    diagnostics.insert("n_used".into(), serde_json::json!(n_used));
    std::fs::write(
        out_dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&diagnostics).expect("serialize"),
    )?;
    Ok(RecoverOutput {
        json,
        csv,
        n_used,
        results,
    })
}

/// Model evaluation route: pole/residue form when diagonalizable, direct
/// pencil solves otherwise.
enum ModelEval {
    Modal(ModalSystem),
    Direct(DescriptorROM),
    Fitted(VfModel),
}

impl ModelEval {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        match self {
            ModelEval::Modal(m) => Ok(m.eval(z)),
            ModelEval::Direct(rom) => rom.eval(z),
            ModelEval::Fitted(m) => Ok(m.eval(z)),
        }
    }
}

/// Picks an evaluator for a descriptor model, replacing it by its stable
/// part when it has modes on or outside the unit circle. Returns the
/// evaluator and the number of discarded modes (0 when already stable).
fn descriptor_evaluator(rom: &DescriptorROM) -> Result<(ModelEval, usize)> {
    match rom.modal_form() {
        Ok(modal) => {
            if modal.poles.iter().any(|p| p.norm() >= 1.0) {
                let (st, discarded) = stable_part(rom)?;
                let m = st.modal_form()?;
                Ok((ModelEval::Modal(m), discarded))
            } else {
                Ok((ModelEval::Modal(modal), 0))
            }
        }
        Err(_) => Ok((ModelEval::Direct(rom.clone()), 0)),
    }
}

fn rel_hinf_error(
    truth: &dyn Fn(Complex64) -> Result<Complex64>,
    model: &ModelEval,
    grid: usize,
    refine: usize,
) -> Result<f64> {
    let (hn, _) = metrics::hinf_norm(|z| truth(z), grid, refine)?;
    let (en, _) = metrics::hinf_norm(|z| Ok(truth(z)? - model.eval(z)?), grid, refine)?;
    Ok(en / hn)
}

/// Artifacts of the model-fitting stage.
pub struct RomOutput {
    pub model_path: PathBuf,
    pub rel_hinf_error: Option<f64>,
}

/// Fits the configured reduced model to the recovery output in the
/// directory and compares it against the configured system.
pub fn cmd_rom(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RomOutput> {
    ensure_dir(out_dir)?;
    let rec_path = out_dir.join("recovery.json");
    if !rec_path.exists() {
        return Err(Error::Config(format!(
            "{} not found; run the recover step first",
            rec_path.display()
        )));
    }
    let records = io::read_recovery_json(&rec_path)?;
    let mut data = io::records_to_interpolation(&records)?;
    if cfg.rom.method == "vector-fitting" && cfg.rom.vf_weight_exponent != 0.0 {
        let kept: Vec<&io::RecoveryRecord> = records
            .iter()
            .filter(|r| r.informative && r.m0_re.is_some())
            .collect();
        let weights: Vec<f64> = kept
            .iter()
            .map(|r| {
                r.sw0
                    .unwrap_or(1.0)
                    .max(1e-16)
                    .powf(cfg.rom.vf_weight_exponent)
            })
            .collect();
        data = data.with_weights(weights)?;
    }
    let data = data.append_conjugates()?;

    let r = cfg.rom.order;
    let (model_path, eval): (PathBuf, ModelEval) = match cfg.rom.method.as_str() {
        "loewner" => {
            let rom = loewner_rom(&data, r)?;
            let path = out_dir.join("rom.json");
            io::write_rom_json(&path, &rom)?;
            let (ev, _) = descriptor_evaluator(&rom)?;
            (path, ev)
        }
        "hermite-loewner" => {
            let rom = hermite_loewner_rom(&data, r)?;
            let path = out_dir.join("rom.json");
            io::write_rom_json(&path, &rom)?;
            let (ev, _) = descriptor_evaluator(&rom)?;
            (path, ev)
        }
        "vector-fitting" => {
            let model = vector_fitting(&data, r, cfg.rom.vf_iters, &PoleInit::default())?;
            let path = out_dir.join("vf.json");
            io::write_vf_json(&path, &model)?;
            (path, ModelEval::Fitted(model))
        }
        _ => unreachable!("validated"),
    };

    // Compare against the configured system when it can be built.
    let rel = match cfg.make_system() {
        Ok(sys) => {
            let evaluator = ResolventEvaluator::new(&sys);
            let omegas = cfg.frequencies();
            let sweep_vals = omegas
                .iter()
                .map(|&w| eval.eval(Complex64::from_polar(1.0, w)))
                .collect::<Result<Vec<_>>>()?;
            io::write_sweep_csv(
                &out_dir.join("rom_sweep.csv"),
                &FrequencySweep::new(omegas.clone(), sweep_vals)?,
            )?;
            let truth_vals = omegas
                .iter()
                .map(|&w| evaluator.eval(Complex64::from_polar(1.0, w)))
                .collect::<Result<Vec<_>>>()?;
            io::write_sweep_csv(
                &out_dir.join("truth_sweep.csv"),
                &FrequencySweep::new(omegas, truth_vals)?,
            )?;
            let truth = |z: Complex64| evaluator.eval(z);
            let rel = rel_hinf_error(&truth, &eval, 2048, 40)?;
            std::fs::write(
                out_dir.join("rom_errors.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "rel_hinf_error": rel,
                }))
                .expect("serialize"),
            )?;
            Some(rel)
        }
        Err(_) => None,
    };
    Ok(RomOutput {
        model_path,
        rel_hinf_error: rel,
    })
}

/// Evaluates a stored model (system, descriptor, or fitted rational) over a
/// unit-circle grid and writes the sweep CSV.
pub fn cmd_eval(model_path: &Path, points: usize, out_file: &Path) -> Result<PathBuf> {
    if points < 2 {
        return Err(Error::InvalidParameter(
            "evaluation grid needs at least 2 points".into(),
        ));
    }
    let text = std::fs::read_to_string(model_path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?;
    let omegas = spaced(1e-4, std::f64::consts::PI, points, "log");
    let values: Vec<Complex64> = if value.get("poles").is_some() {
        let model = io::read_vf_json(model_path)?;
        omegas
            .iter()
            .map(|&w| Ok(model.eval(Complex64::from_polar(1.0, w))))
            .collect::<Result<Vec<_>>>()?
    } else if value.get("E").is_some() {
        let rom = io::read_rom_json(model_path)?;
        omegas
            .iter()
            .map(|&w| rom.eval(Complex64::from_polar(1.0, w)))
            .collect::<Result<Vec<_>>>()?
    } else if value.get("A").is_some() {
        let sys = io::read_state_space_json(model_path)?;
        let ev = ResolventEvaluator::new(&sys);
        omegas
            .iter()
            .map(|&w| ev.eval(Complex64::from_polar(1.0, w)))
            .collect::<Result<Vec<_>>>()?
    } else {
        return Err(Error::Config(format!(
            "{}: unrecognized model file",
            model_path.display()
        )));
    };
    if let Some(parent) = out_file.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    io::write_sweep_csv(out_file, &FrequencySweep::new(omegas, values)?)?;
    Ok(out_file.to_path_buf())
}

/// Machine-readable outcome of a reproduction experiment.
#[derive(Debug, Serialize)]
pub struct ReproSummary {
    pub experiment: String,
    pub seed: u64,
    pub full: bool,
    pub metrics: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
}

impl ReproSummary {
    fn new(experiment: &str, seed: u64, full: bool) -> Self {
        Self {
            experiment: experiment.into(),
            seed,
            full,
            metrics: BTreeMap::new(),
            checks: BTreeMap::new(),
        }
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.values().all(|&b| b)
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        std::fs::write(
            out_dir.join("summary.json"),
            serde_json::to_string_pretty(self).expect("serialize"),
        )?;
        Ok(())
    }
}

fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| {
        if e.is_validation() {
            Error::Config(format!("stage '{name}' failed: {e}"))
        } else {
            Error::Numerical(format!("stage '{name}' failed: {e}"))
        }
    })
}

/// Runs one of the named reproduction experiments into `out_dir`.
pub fn repro(experiment: &str, seed: u64, out_dir: &Path, full: bool) -> Result<ReproSummary> {
    ensure_dir(out_dir)?;
    let summary = match experiment {
        "synthetic" => repro_synthetic(seed, out_dir, full)?,
        "heat" => repro_heat(seed, out_dir, full)?,
        "penzl" => repro_penzl(seed, out_dir, full)?,
        "conditioning" => repro_conditioning(seed, out_dir)?,
        "windows" => repro_windows(seed, out_dir)?,
        "ordersweep" => repro_ordersweep(seed, out_dir, full)?,
        other => {
            return Err(Error::InvalidParameter(format!(
                "unknown experiment '{other}' \
                 (expected synthetic|heat|penzl|conditioning|windows|ordersweep)"
            )))
        }
    };
    summary.write(out_dir)?;
    Ok(summary)
}

struct PipelineData {
    truth: Vec<Complex64>,
    truth_deriv: Vec<Complex64>,
    results: Vec<RecoveryResult>,
    n_used: usize,
    order_estimate: usize,
    evaluator: ResolventEvaluator,
}

/// Shared simulate -> estimate -> adapt -> recover pipeline.
fn run_pipeline(
    sys: &StateSpaceSystem,
    t_steps: usize,
    input_seed: u64,
    omegas: &[f64],
    template: &PlanTemplate,
    s_target: f64,
) -> Result<PipelineData> {
    let u = gaussian_input(t_steps + 1, input_seed);
    let ts = stage("simulate", sys.simulate(&u, &DVector::zeros(sys.order())))?;
    let sigmas = sigma_grid(omegas);
    let est = stage("estimate-order", order_est::estimate_order_default(&ts))?;
    let n_init = est.n.max(1);
    let n_max = (t_steps / template.t_factor).max(n_init);
    let adapt = stage(
        "adapt-order",
        adapt_order(&ts, &sigmas, template, &Tolerances::default(), s_target, n_init, n_max),
    )?;
    let plan = template.build(ts.t_steps(), adapt.n_used)?;
    let results = stage(
        "recover",
        recover(&ts, &sigmas, adapt.n_used, &plan, &Tolerances::default(), true),
    )?;
    let evaluator = ResolventEvaluator::new(sys);
    let mut truth = Vec::with_capacity(sigmas.len());
    let mut truth_deriv = Vec::with_capacity(sigmas.len());
    for &s in &sigmas {
        let (h, d) = stage("truth-evaluation", evaluator.eval_with_deriv(s))?;
        truth.push(h);
        truth_deriv.push(d);
    }
    Ok(PipelineData {
        truth,
        truth_deriv,
        results,
        n_used: adapt.n_used,
        order_estimate: est.n,
        evaluator,
    })
}

/// Euclidean relative error with missing estimates counted at full weight.
fn eps_vector(truth: &[Complex64], estimates: &[Option<Complex64>]) -> f64 {
    let est: Vec<Complex64> = estimates
        .iter()
        .map(|o| o.unwrap_or(Complex64::new(0.0, 0.0)))
        .collect();
    metrics::vector_errors(truth, &est).unwrap_or(f64::INFINITY)
}

fn write_recovery_figure_csv(
    path: &Path,
    omegas: &[f64],
    truth: &[Complex64],
    results: &[RecoveryResult],
) -> Result<()> {
    let mut out = String::from("omega,habs,m0abs,eps_rel,sw\n");
    for ((w, h), r) in omegas.iter().zip(truth.iter()).zip(results.iter()) {
        let m0abs = r.m0.map(|m| m.norm()).unwrap_or(f64::NAN);
        let eps = r
            .m0
            .map(|m| (m - h).norm() / h.norm())
            .unwrap_or(f64::NAN);
        let sw = if r.sw0.is_finite() { r.sw0 } else { f64::NAN };
        out.push_str(&format!(
            "{w:.16e},{:.16e},{m0abs:.16e},{eps:.16e},{sw:.16e}\n",
            h.norm()
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct RomTableRow {
    method: &'static str,
    rec_err: f64,
    true_err: f64,
    cross_err: f64,
}

/// Builds the three model types from recovered and true data and tabulates
/// relative peak-gain errors (model vs truth, true-data model vs truth,
/// recovered-data model vs true-data model). Weights attached to the
/// recovered data apply to the fitted model only.
fn rom_table(
    evaluator: &ResolventEvaluator,
    recovered: &InterpolationData,
    true_data: &InterpolationData,
    r: usize,
    vf_iters: usize,
    grid: usize,
    out_dir: &Path,
    omegas: &[f64],
) -> Result<Vec<RomTableRow>> {
    let truth = |z: Complex64| evaluator.eval(z);
    let mut rows = Vec::new();
    let builders: [(&'static str, Box<dyn Fn(&InterpolationData) -> Result<ModelEval>>); 3] = [
        (
            "loewner",
            Box::new(move |d: &InterpolationData| {
                let rom = loewner_rom(d, r)?;
                Ok(descriptor_evaluator(&rom)?.0)
            }),
        ),
        (
            "hermite-loewner",
            Box::new(move |d: &InterpolationData| {
                let rom = hermite_loewner_rom(d, r)?;
                Ok(descriptor_evaluator(&rom)?.0)
            }),
        ),
        (
            "vector-fitting",
            Box::new(move |d: &InterpolationData| {
                Ok(ModelEval::Fitted(vector_fitting(
                    d,
                    r,
                    vf_iters,
                    &PoleInit::default(),
                )?))
            }),
        ),
    ];
    for (name, build) in &builders {
        let method: &'static str = *name;
        let rec_model = stage(method, build(recovered))?;
        let true_model = stage(method, build(true_data))?;
        let rec_err = rel_hinf_error(&truth, &rec_model, grid, 40)?;
        let true_err = rel_hinf_error(&truth, &true_model, grid, 40)?;
        let (tn, _) = metrics::hinf_norm(|z| true_model.eval(z), grid, 40)?;
        let (cn, _) =
            metrics::hinf_norm(|z| Ok(true_model.eval(z)? - rec_model.eval(z)?), grid, 40)?;
        let cross_err = cn / tn;
        // Figure data: response of the recovered-data model on the grid.
        let vals = omegas
            .iter()
            .map(|&w| rec_model.eval(Complex64::from_polar(1.0, w)))
            .collect::<Result<Vec<_>>>()?;
        io::write_sweep_csv(
            &out_dir.join(format!("response_{method}.csv")),
            &FrequencySweep::new(omegas.to_vec(), vals)?,
        )?;
        rows.push(RomTableRow {
            method,
            rec_err,
            true_err,
            cross_err,
        });
    }
    let mut table = String::from("method,recovered_vs_truth,true_vs_truth,recovered_vs_true\n");
    for row in &rows {
        table.push_str(&format!(
            "{},{:.6e},{:.6e},{:.6e}\n",
            row.method, row.rec_err, row.true_err, row.cross_err
        ));
    }
    std::fs::write(out_dir.join("errors.csv"), table)?;
    Ok(rows)
}

fn interpolation_from_results(
    results: &[RecoveryResult],
    with_derivs: bool,
) -> Result<InterpolationData> {
    let kept: Vec<&RecoveryResult> = results
        .iter()
        .filter(|r| r.informative && r.m0.is_some() && (!with_derivs || r.m1.is_some()))
        .collect();
    if kept.is_empty() {
        return Err(Error::Numerical(
            "no informative points to build models from".into(),
        ));
    }
    let points: Vec<Complex64> = kept.iter().map(|r| r.sigma).collect();
    let values: Vec<Complex64> = kept.iter().map(|r| r.m0.unwrap()).collect();
    let mut data = InterpolationData::new(points, values)?;
    if with_derivs {
        data = data.with_derivs(kept.iter().map(|r| r.m1.unwrap()).collect())?;
    }
    Ok(data)
}

fn true_interpolation(
    evaluator: &ResolventEvaluator,
    results: &[RecoveryResult],
    with_derivs: bool,
) -> Result<InterpolationData> {
    let kept: Vec<&RecoveryResult> = results
        .iter()
        .filter(|r| r.informative && r.m0.is_some() && (!with_derivs || r.m1.is_some()))
        .collect();
    let points: Vec<Complex64> = kept.iter().map(|r| r.sigma).collect();
    let mut values = Vec::with_capacity(points.len());
    let mut derivs = Vec::with_capacity(points.len());
    for &p in &points {
        let (h, d) = evaluator.eval_with_deriv(p)?;
        values.push(h);
        derivs.push(d);
    }
    let mut data = InterpolationData::new(points, values)?;
    if with_derivs {
        data = data.with_derivs(derivs)?;
    }
    Ok(data)
}

fn sw_weights(results: &[RecoveryResult], exponent: f64) -> Vec<f64> {
    results
        .iter()
        .filter(|r| r.informative && r.m0.is_some() && r.m1.is_some())
        .map(|r| {
            if r.sw0.is_finite() {
                r.sw0.max(1e-16).powf(exponent)
            } else {
                1.0
            }
        })
        .collect()
}

fn repro_synthetic(seed: u64, out_dir: &Path, full: bool) -> Result<ReproSummary> {
    let mut summary = ReproSummary::new("synthetic", seed, full);
    let n = if full { 1000 } else { 200 };
    let t_steps = 1000;
    let sys = stage("generate", crate::lti::random_stable_system(n, seed))?;
    let omegas = spaced(1e-2, std::f64::consts::PI, 400, "log");
    let template = PlanTemplate::default();
    let pipe = run_pipeline(&sys, t_steps, seed.wrapping_add(1000), &omegas, &template, 1e-7)?;

    let eps0 = eps_vector(&pipe.truth, &pipe.results.iter().map(|r| r.m0).collect::<Vec<_>>());
    let eps1 = eps_vector(
        &pipe.truth_deriv,
        &pipe.results.iter().map(|r| r.m1).collect::<Vec<_>>(),
    );
    write_recovery_figure_csv(
        &out_dir.join("recovery.csv"),
        &omegas,
        &pipe.truth,
        &pipe.results,
    )?;
    let sw: Vec<f64> = pipe.results.iter().map(|r| r.sw0).collect();
    let eps_rel: Vec<f64> = pipe
        .results
        .iter()
        .zip(pipe.truth.iter())
        .map(|(r, h)| r.m0.map(|m| (m - h).norm() / h.norm()).unwrap_or(f64::NAN))
        .collect();
    let fidelity = metrics::indicator_fidelity(&sw, &eps_rel)?;

    let r = 100;
    let recovered = interpolation_from_results(&pipe.results, true)?.append_conjugates()?;
    let true_data = true_interpolation(&pipe.evaluator, &pipe.results, true)?.append_conjugates()?;
    let rows = rom_table(
        &pipe.evaluator,
        &recovered,
        &true_data,
        r,
        20,
        2048,
        out_dir,
        &omegas,
    )?;

    summary.metrics.insert("eps0".into(), eps0);
    summary.metrics.insert("eps1".into(), eps1);
    summary
        .metrics
        .insert("order_estimate".into(), pipe.order_estimate as f64);
    summary.metrics.insert("n_used".into(), pipe.n_used as f64);
    summary
        .metrics
        .insert("indicator_fraction_2dec".into(), fidelity.fraction_within_2_decades);
    for row in &rows {
        summary
            .metrics
            .insert(format!("hinf_recovered_{}", row.method), row.rec_err);
        summary
            .metrics
            .insert(format!("hinf_true_{}", row.method), row.true_err);
        summary
            .metrics
            .insert(format!("hinf_cross_{}", row.method), row.cross_err);
    }
    summary.checks.insert("eps0_below_1e-6".into(), eps0 <= 1e-6);
    summary
        .checks
        .insert("derivatives_recovered".into(), eps1.is_finite());
    Ok(summary)
}

fn repro_heat(seed: u64, out_dir: &Path, full: bool) -> Result<ReproSummary> {
    let mut summary = ReproSummary::new("heat", seed, full);
    let sys = stage("generate", crate::lti::heat_rod_system(200, 1e-2))?;
    let omegas = spaced(1e-4, std::f64::consts::PI, 500, "log");
    let template = PlanTemplate::default();
    let pipe = run_pipeline(&sys, 1000, seed.wrapping_add(1000), &omegas, &template, 1e-7)?;

    let eps0 = eps_vector(&pipe.truth, &pipe.results.iter().map(|r| r.m0).collect::<Vec<_>>());
    let eps1 = eps_vector(
        &pipe.truth_deriv,
        &pipe.results.iter().map(|r| r.m1).collect::<Vec<_>>(),
    );
    write_recovery_figure_csv(
        &out_dir.join("recovery.csv"),
        &omegas,
        &pipe.truth,
        &pipe.results,
    )?;

    let recovered = interpolation_from_results(&pipe.results, true)?.append_conjugates()?;
    let true_data = true_interpolation(&pipe.evaluator, &pipe.results, true)?.append_conjugates()?;
    let rows = rom_table(
        &pipe.evaluator,
        &recovered,
        &true_data,
        10,
        20,
        2048,
        out_dir,
        &omegas,
    )?;

    summary.metrics.insert("eps0".into(), eps0);
    summary.metrics.insert("eps1".into(), eps1);
    summary
        .metrics
        .insert("order_estimate".into(), pipe.order_estimate as f64);
    summary.metrics.insert("n_used".into(), pipe.n_used as f64);
    for row in &rows {
        summary
            .metrics
            .insert(format!("hinf_recovered_{}", row.method), row.rec_err);
        summary
            .metrics
            .insert(format!("hinf_true_{}", row.method), row.true_err);
    }
    summary.checks.insert("eps0_below_1e-6".into(), eps0 <= 1e-6);
    for row in &rows {
        summary.checks.insert(
            format!("hinf_recovered_{}_below_1e-4", row.method),
            row.rec_err <= 1e-4,
        );
    }
    Ok(summary)
}

fn repro_penzl(seed: u64, out_dir: &Path, full: bool) -> Result<ReproSummary> {
    let mut summary = ReproSummary::new("penzl", seed, full);
    let sys = stage("generate", crate::lti::penzl_system(1e-4))?;
    let t_steps = 10_000;
    let freq_count = if full { 140 } else { 60 };
    let k_windows = if full { 40 } else { 20 };
    let omegas = spaced(1e-5, std::f64::consts::PI, freq_count, "log");
    let sigmas = sigma_grid(&omegas);
    let template = PlanTemplate {
        t_factor: 3,
        k: k_windows,
        w: 10,
    };
    let u = gaussian_input(t_steps + 1, seed.wrapping_add(1000));
    let ts = stage("simulate", sys.simulate(&u, &DVector::zeros(sys.order())))?;
    let est = stage("estimate-order", order_est::estimate_order_default(&ts))?;
    let n_init = est.n.max(1);

    let evaluator = ResolventEvaluator::new(&sys);
    let mut truth = Vec::new();
    let mut truth_deriv = Vec::new();
    for &s in &sigmas {
        let (h, d) = stage("truth-evaluation", evaluator.eval_with_deriv(s))?;
        truth.push(h);
        truth_deriv.push(d);
    }

    // Initial attempt at the estimated order.
    let plan0 = template.build(t_steps, n_init)?;
    let initial = stage(
        "recover-initial",
        recover(&ts, &sigmas, n_init, &plan0, &Tolerances::default(), false),
    )?;
    let eps0_init = eps_vector(&truth, &initial.iter().map(|r| r.m0).collect::<Vec<_>>());

    let n_max = t_steps / template.t_factor;
    let adapt = stage(
        "adapt-order",
        adapt_order(
            &ts,
            &sigmas,
            &template,
            &Tolerances::default(),
            1e-2,
            n_init,
            n_max,
        ),
    )?;
    let plan = template.build(t_steps, adapt.n_used)?;
    let results = stage(
        "recover",
        recover(&ts, &sigmas, adapt.n_used, &plan, &Tolerances::default(), true),
    )?;
    let eps0 = eps_vector(&truth, &results.iter().map(|r| r.m0).collect::<Vec<_>>());
    let eps1 = eps_vector(&truth_deriv, &results.iter().map(|r| r.m1).collect::<Vec<_>>());
    write_recovery_figure_csv(&out_dir.join("recovery.csv"), &omegas, &truth, &results)?;

    // Weighted least squares for the fitted model; weights follow the
    // per-point indicator through the fourth-root exponent.
    let recovered = interpolation_from_results(&results, true)?
        .with_weights(sw_weights(&results, 0.25))?
        .append_conjugates()?;
    let true_data = true_interpolation(&evaluator, &results, true)?.append_conjugates()?;
    let rows = rom_table(
        &evaluator,
        &recovered,
        &true_data,
        14,
        20,
        2048,
        out_dir,
        &omegas,
    )?;

    summary.metrics.insert("eps0_initial".into(), eps0_init);
    summary.metrics.insert("eps0".into(), eps0);
    summary.metrics.insert("eps1".into(), eps1);
    summary
        .metrics
        .insert("order_estimate".into(), est.n as f64);
    summary.metrics.insert("n_used".into(), adapt.n_used as f64);
    for row in &rows {
        summary
            .metrics
            .insert(format!("hinf_recovered_{}", row.method), row.rec_err);
        summary
            .metrics
            .insert(format!("hinf_true_{}", row.method), row.true_err);
    }
    summary.checks.insert(
        "eps0_improved_two_orders".into(),
        eps0_init / eps0 >= 1e2,
    );
    summary.checks.insert("eps0_final_below_0.1".into(), eps0 <= 1e-1);
    Ok(summary)
}

fn repro_conditioning(seed: u64, out_dir: &Path) -> Result<ReproSummary> {
    let mut summary = ReproSummary::new("conditioning", seed, false);
    let n = 100;
    let t_steps = 300;
    let sys = stage("generate", crate::lti::random_stable_system(n, seed))?;
    let u = gaussian_input(t_steps + 1, seed.wrapping_add(1000));
    let ts = stage("simulate", sys.simulate(&u, &DVector::zeros(n)))?;
    let g = stage("hankel", build_gn(&ts, n, 0, ts.len()))?;
    let basis_c = stage("orthogonalize", orth_basis(&g, 1e-10))?;
    let basis_full = stage("orthogonalize", orth_basis(&g, 0.0))?;
    let mv = moment_vectors(Complex64::from_polar(1.0, 0.5), n)?;

    let augment_real = |m: &nalgebra::DMatrix<f64>| {
        let rows = m.nrows();
        let cols = m.ncols();
        let mut out = nalgebra::DMatrix::from_element(rows, cols + 1, Complex64::new(0.0, 0.0));
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = Complex64::new(m[(i, j)], 0.0);
            }
        }
        out.column_mut(cols).copy_from(&mv.z_sigma);
        out
    };
    let aug_g = augment_real(&g.matrix);
    let aug_uc = augment_real(basis_c.basis());
    let aug_u = augment_real(basis_full.basis());

    let write_spectrum = |name: &str, m: &nalgebra::DMatrix<Complex64>| -> Result<f64> {
        let svals = m.clone().svd(false, false).singular_values;
        let mut text = String::from("index,sigma\n");
        for (i, s) in svals.iter().enumerate() {
            text.push_str(&format!("{i},{s:.16e}\n"));
        }
        std::fs::write(out_dir.join(name), text)?;
        Ok(svals[0] / svals[svals.len() - 1].max(f64::MIN_POSITIVE))
    };
    let kappa_g = write_spectrum("sv_hankel_augmented.csv", &aug_g)?;
    let kappa_uc = write_spectrum("sv_truncated_basis_augmented.csv", &aug_uc)?;
    let kappa_u = write_spectrum("sv_full_basis_augmented.csv", &aug_u)?;

    summary.metrics.insert("kappa_hankel".into(), kappa_g);
    summary.metrics.insert("kappa_truncated_basis".into(), kappa_uc);
    summary.metrics.insert("kappa_full_basis".into(), kappa_u);
    summary
        .metrics
        .insert("basis_rank".into(), basis_c.rank() as f64);
    summary
        .checks
        .insert("kappa_truncated_below_1e6".into(), kappa_uc <= 1e6);
    summary
        .checks
        .insert("conditioning_gain_1e8".into(), kappa_g / kappa_uc >= 1e8);
    Ok(summary)
}

fn repro_windows(seed: u64, out_dir: &Path) -> Result<ReproSummary> {
    let mut summary = ReproSummary::new("windows", seed, false);
    let n = 100;
    let t_steps = 1000;
    let sys = stage("generate", crate::lti::random_stable_system(n, seed))?;
    let u = gaussian_input(t_steps + 1, seed.wrapping_add(1000));
    let ts = stage("simulate", sys.simulate(&u, &DVector::zeros(n)))?;
    let sigma = Complex64::from_polar(1.0, 1e-2);
    let truth = sys.eval_tf(sigma)?;
    let mut text = String::from("k,abs_err,sw\n");
    let mut errs = Vec::new();
    for k in [10usize, 20, 30, 70, 150] {
        let plan = WindowPlan::evenly_spaced(t_steps, 3 * n, k, 10)?;
        let res = stage(
            "recover",
            recover(&ts, &[sigma], n, &plan, &Tolerances::default(), false),
        )?;
        let r = &res[0];
        let err = r.m0.map(|m| (m - truth).norm()).unwrap_or(f64::NAN);
        let sw = if r.sw0.is_finite() { r.sw0 } else { f64::NAN };
        text.push_str(&format!("{k},{err:.16e},{sw:.16e}\n"));
        if k <= 70 {
            errs.push(err);
        }
        summary.metrics.insert(format!("abs_err_k{k}"), err);
    }
    std::fs::write(out_dir.join("windows.csv"), text)?;
    let max = errs.iter().cloned().fold(0.0, f64::max);
    let min = errs.iter().cloned().fold(f64::INFINITY, f64::min);
    summary.metrics.insert("err_spread_ratio".into(), max / min);
    summary
        .checks
        .insert("error_within_one_decade_across_k".into(), max / min < 10.0);
    Ok(summary)
}

fn repro_ordersweep(seed: u64, out_dir: &Path, full: bool) -> Result<ReproSummary> {
    let mut summary = ReproSummary::new("ordersweep", seed, full);
    let n = 100;
    let t_steps = 1000;
    let sys = stage("generate", crate::lti::random_stable_system(n, seed))?;
    let u = gaussian_input(t_steps + 1, seed.wrapping_add(1000));
    let ts = stage("simulate", sys.simulate(&u, &DVector::zeros(n)))?;
    let sigma = Complex64::from_polar(1.0, 0.5);
    let truth = sys.eval_tf(sigma)?;
    let step = if full { 1 } else { 5 };
    let mut text = String::from("n_used,eps_rel,sw\n");
    let mut plateau_ok = true;
    let mut depth = 20usize;
    while depth <= 200 {
        let plan = WindowPlan::evenly_spaced(t_steps, 3 * depth, 20, 10)?;
        let res = stage(
            "recover",
            recover(&ts, &[sigma], depth, &plan, &Tolerances::default(), false),
        )?;
        let r = &res[0];
        let eps = r
            .m0
            .map(|m| (m - truth).norm() / truth.norm())
            .unwrap_or(f64::NAN);
        let sw = if r.sw0.is_finite() { r.sw0 } else { f64::NAN };
        text.push_str(&format!("{depth},{eps:.16e},{sw:.16e}\n"));
        if depth >= n && !(eps <= 1e-8) {
            plateau_ok = false;
        }
        depth += step;
    }
    std::fs::write(out_dir.join("ordersweep.csv"), text)?;
    summary
        .checks
        .insert("machine_precision_plateau".into(), plateau_ok);
    Ok(summary)
}
