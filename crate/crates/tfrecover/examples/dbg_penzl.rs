use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tfrecover::informativity::{recover, PlanTemplate, Tolerances};
use tfrecover::lti::{penzl_system, ResolventEvaluator};
use tfrecover::metrics;
use std::time::Instant;

fn main() {
    let sys = penzl_system(1e-4).unwrap();
    let t_steps = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let u: Vec<f64> = (0..t_steps + 1).map(|_| StandardNormal.sample(&mut rng)).collect();
    let ts = sys.simulate(&u, &DVector::zeros(1006)).unwrap();
    let pi = std::f64::consts::PI;
    let sigmas: Vec<Complex64> = (0..60)
        .map(|i| Complex64::from_polar(1.0, 1e-5 * (pi / 1e-5f64).powf(i as f64 / 60.0)))
        .collect();
    let ev = ResolventEvaluator::new(&sys);
    let truth: Vec<Complex64> = sigmas.iter().map(|&s| ev.eval(s).unwrap()).collect();
    let tol = Tolerances { rank_tol: 1e-13, ..Default::default() };
    for (n_used, k) in [(905usize, 20usize), (905, 40)] {
        let t0 = Instant::now();
        let template = PlanTemplate { t_factor: 3, k, w: 10 };
        let plan = template.build(t_steps, n_used).unwrap();
        let results = recover(&ts, &sigmas, n_used, &plan, &tol, false).unwrap();
        let n_inf = results.iter().filter(|r| r.informative).count();
        let mut sws: Vec<f64> = results.iter().map(|r| if r.informative { r.sw0 } else { f64::INFINITY }).collect();
        sws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = sws[sws.len() / 2];
        let p90 = sws[(sws.len() * 9) / 10];
        let est: Vec<Complex64> = results.iter().map(|r| r.m0.unwrap_or(Complex64::new(0.0, 0.0))).collect();
        let eps0 = metrics::vector_errors(&truth, &est).unwrap();
        println!(
            "n={n_used} K={k}: informative {n_inf}/60, median sw {med:.2e}, p90 sw {p90:.2e}, eps0 {eps0:.2e}, {:.0}s",
            t0.elapsed().as_secs_f64()
        );
    }
}
