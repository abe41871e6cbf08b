//! Invariant checks shared by the property tests and the acceptance suite.
//! Each returns `Err(description)` on the first violation.
#![allow(dead_code)]

use ce2nd::baselines::{weighted_moments, BatchAlgorithm, MonteCarloConfig};
use ce2nd::incremental::update_tcmp;
use ce2nd::oracles::{self, FixedPointSettings, QuadratureSettings};
use ce2nd::{
    make_benchmark, write_trace, BatchOptimizer, Ce2nd, GaussianParams, Matrix, RngState, Schedule, Schedules,
    StopRule,
};

pub type Check = Result<(), String>;

pub fn schedules(rho: f64, r: f64, beta: f64, c: f64) -> Schedules {
    Schedules {
        rho,
        eps1: 0.9,
        r,
        beta: Schedule::Constant(beta),
        c: Schedule::Constant(c),
        lambda: Schedule::Constant(0.05),
        k_gamma: 1.0,
        projection: true,
    }
}

/// Every iterate of the comparison recursion stays strictly inside (-1, 1).
pub fn tcmp_stays_bounded(c: f64, t0: f64, outcomes: &[bool]) -> Check {
    let mut t = t0;
    for (k, &o) in outcomes.iter().enumerate() {
        t = update_tcmp(t, c, o);
        if !(t > -1.0 && t < 1.0) {
            return Err(format!("T = {t} at step {k} (c = {c}, T0 = {t0})"));
        }
    }
    Ok(())
}

/// Runs the optimizer for `steps` iterations on a random rotated problem and
/// checks exact symmetry of the tracked second moment and the model covariance.
pub fn symmetry_after_steps(seed: u64, m: usize, steps: usize) -> Check {
    let mut f = make_benchmark::<f64>("rastrigin", m).map_err(|e| e.to_string())?;
    let mut rng = RngState::new(seed, 7);
    let mu: Vec<f64> = (0..m).map(|_| 3.0 * rng.standard_normal()).collect();
    let a = Matrix::from_fn(m, m, |_, _| rng.standard_normal());
    let sigma = a.matmul(&a.transpose());
    let theta0 = GaussianParams::new(mu, sigma).map_err(|e| e.to_string())?;
    let mut opt = Ce2nd::new(schedules(0.2, 0.05, 0.1, 0.3), theta0, RngState::new(seed, 0)).map_err(|e| e.to_string())?;
    for k in 0..steps {
        opt.step(&mut f).map_err(|e| e.to_string())?;
        let s = opt.state();
        if !s.xi1.is_symmetric() {
            return Err(format!("xi1 lost symmetry at step {k}"));
        }
        if !s.theta.sigma().is_symmetric() {
            return Err(format!("model covariance lost symmetry at step {k}"));
        }
    }
    if opt.state().n_updates == 0 {
        return Err("no model update happened; the check exercised nothing".into());
    }
    Ok(())
}

/// The repaired factor reproduces PSD inputs and always yields a symmetric
/// PSD product.
pub fn psd_repair(seed: u64, m: usize) -> Check {
    let mut rng = RngState::new(seed, 3);
    let a = Matrix::from_fn(m, m, |_, _| rng.standard_normal());
    // rank-deficient PSD, then an indefinite perturbation
    let rank = 1 + (seed as usize) % m;
    let b = Matrix::from_fn(m, rank, |i, j| a[(i, j)]);
    let psd = b.matmul(&b.transpose());
    let f = psd.psd_factor().factor;
    let back = f.matmul(&f.transpose());
    let scale = 1.0 + psd.max_abs();
    for i in 0..m {
        for j in 0..m {
            if (back[(i, j)] - psd[(i, j)]).abs() > 1e-6 * scale {
                return Err(format!("PSD input not reproduced at ({i},{j}): {} vs {}", back[(i, j)], psd[(i, j)]));
            }
        }
    }
    let indefinite = Matrix::from_fn(m, m, |i, j| a[(i, j)] + a[(j, i)]);
    let f = indefinite.psd_factor().factor;
    let back = f.matmul(&f.transpose());
    if !back.is_symmetric() && (0..m).any(|i| (0..m).any(|j| (back[(i, j)] - back[(j, i)]).abs() > 1e-12 * (1.0 + back.max_abs()))) {
        return Err("repaired product not symmetric".into());
    }
    let (eig, _) = back.symmetric_eigen();
    let floor = -1e-9 * (1.0 + back.max_abs());
    if let Some(e) = eig.iter().find(|&&e| e < floor) {
        return Err(format!("repaired product has eigenvalue {e}"));
    }
    if !back.all_finite() {
        return Err("non-finite repair".into());
    }
    Ok(())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

/// Batch elite moments are unchanged when every weight is scaled by `k`.
pub fn batch_weight_scale_invariance(seed: u64, m: usize, n: usize, k: f64) -> Check {
    let mut rng = RngState::new(seed, 5);
    let points: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.standard_normal() * 4.0).collect()).collect();
    let w: Vec<f64> = (0..n).map(|_| if rng.uniform() < 0.3 { 0.0 } else { rng.uniform() }).collect();
    if w.iter().all(|&x| x == 0.0) {
        return Ok(());
    }
    let scaled: Vec<f64> = w.iter().map(|&x| x * k).collect();
    let (m1, s1) = weighted_moments(&points, &w).ok_or("no moments")?;
    let (m2, s2) = weighted_moments(&points, &scaled).ok_or("no moments after scaling")?;
    for i in 0..m {
        if !close(m1[i], m2[i], 1e-10) {
            return Err(format!("mean[{i}] {} vs {}", m1[i], m2[i]));
        }
        for j in 0..m {
            if !close(s1[(i, j)], s2[(i, j)], 1e-10) {
                return Err(format!("cov[{i},{j}] {} vs {}", s1[(i, j)], s2[(i, j)]));
            }
        }
    }
    Ok(())
}

/// Tracker fixed-point targets agree at two different weight shifts.
pub fn fixed_point_shift_invariance(seed: u64, shift_a: f64, shift_b: f64) -> Check {
    let mut rng = RngState::new(seed, 9);
    let mean = 2.0 * rng.standard_normal();
    let var = 0.2 + 2.0 * rng.uniform();
    let theta = GaussianParams::new(vec![mean], Matrix::from_rows(&[vec![var]])).map_err(|e| e.to_string())?;
    let theta0 = GaussianParams::new(vec![0.0], Matrix::from_rows(&[vec![4.0]])).map_err(|e| e.to_string())?;
    let gamma = mean - 1.0 + rng.uniform();
    let r = 0.1 + rng.uniform();
    let est = |shift| {
        let cfg = FixedPointSettings { lambda: 0.1, gamma: Some(-(gamma * gamma)), r, shift: Some(shift), n_samples: 20_000 };
        oracles::fixed_point_oracle(|x: &[f64]| -x[0] * x[0], &theta, &theta0, &cfg, &mut RngState::new(seed, 1))
    };
    let a = est(shift_a).map_err(|e| e.to_string())?;
    let b = est(shift_b).map_err(|e| e.to_string())?;
    if !close(a.mean[0], b.mean[0], 1e-9) || !close(a.second[(0, 0)], b.second[(0, 0)], 1e-9) {
        return Err(format!(
            "shift {shift_a}: ({}, {}) vs shift {shift_b}: ({}, {})",
            a.mean[0], a.second[(0, 0)], b.mean[0], b.second[(0, 0)]
        ));
    }
    Ok(())
}

/// One-dimensional test objectives, picked by index.
pub fn objective_1d(kind: usize) -> (&'static str, fn(f64) -> f64) {
    const ALL: [(&str, fn(f64) -> f64); 5] = [
        ("identity", |x| x),
        ("neg-square", |x| -x * x),
        ("triangle", |x| if x.abs() <= 0.4 { 3.0 - 7.5 * x.abs() } else { 0.0 }),
        ("neg-abs-cubic", |x| -(x.abs().powi(3))),
        ("wave", |x| x.sin() - 0.1 * x * x),
    ];
    ALL[kind % ALL.len()]
}

/// Loss-minimizing and direct quantiles agree within grid resolution, and
/// the identity case matches the closed form `μ + σ z_{1-ρ}`.
pub fn quantile_duality(kind: usize, mean: f64, var: f64, rho: f64) -> Check {
    let (name, h) = objective_1d(kind);
    let theta = GaussianParams::new(vec![mean], Matrix::from_rows(&[vec![var]])).map_err(|e| e.to_string())?;
    let quad = QuadratureSettings { nodes: 4001, ..QuadratureSettings::default() };
    let q = oracles::quantile_by_minimization(h, &theta, rho, quad).map_err(|e| format!("{name}: {e}"))?;
    if (q.by_minimization - q.direct).abs() > q.resolution {
        return Err(format!("{name}: {} vs {} (resolution {})", q.by_minimization, q.direct, q.resolution));
    }
    if name == "identity" {
        use statrs::distribution::{ContinuousCDF, Normal};
        let exact = mean + var.sqrt() * Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - rho);
        let tol = 2.0 * q.resolution + 1e-6 * (1.0 + var.sqrt());
        if (q.direct - exact).abs() > tol {
            return Err(format!("identity quantile {} vs closed form {exact}", q.direct));
        }
    }
    Ok(())
}

/// Two runs from the same seed serialize to identical CSV bytes.
pub fn seed_determinism(seed: u64) -> Check {
    let run = || -> Result<(Vec<u8>, Vec<u8>), String> {
        let mut f = make_benchmark::<f64>("levy", 4).map_err(|e| e.to_string())?;
        let theta0 = GaussianParams::isotropic(vec![3.0; 4], 9.0).map_err(|e| e.to_string())?;
        let mut opt = Ce2nd::new(schedules(0.1, 0.01, 0.1, 0.2), theta0.clone(), RngState::new(seed, 0)).map_err(|e| e.to_string())?;
        let out = opt.run(&mut f, &StopRule::evals(3000), 10);
        let mut a = Vec::new();
        write_trace(&mut a, &out.trace).map_err(|e| e.to_string())?;
        let mc = MonteCarloConfig { n0: 40, eta: 1.02, rho: 0.1, r: 0.01, eps: Some(1e-3), alpha: None };
        let mut g = make_benchmark::<f64>("levy", 4).map_err(|e| e.to_string())?;
        let mut batch = BatchOptimizer::new(BatchAlgorithm::Mcce, mc, theta0, RngState::new(seed, 0)).map_err(|e| e.to_string())?;
        let out = batch.run(&mut g, &StopRule::evals(3000), 1);
        let mut b = Vec::new();
        write_trace(&mut b, &out.trace).map_err(|e| e.to_string())?;
        Ok((a, b))
    };
    let first = run()?;
    let second = run()?;
    if first != second {
        return Err(format!("seed {seed}: reruns differ"));
    }
    if first.0.is_empty() || first.1.is_empty() {
        return Err("empty trace".into());
    }
    Ok(())
}

/// Counter increments equal the evaluations each step reports: one draw
/// per iteration before the first model update, two after; batch steps
/// charge exactly their batch size.
pub fn evaluation_accounting(seed: u64, steps: usize) -> Check {
    let mut f = make_benchmark::<f64>("griewank", 3).map_err(|e| e.to_string())?;
    let theta0 = GaussianParams::isotropic(vec![5.0; 3], 4.0).map_err(|e| e.to_string())?;
    let mut opt = Ce2nd::new(schedules(0.1, 0.5, 0.1, 0.2), theta0.clone(), RngState::new(seed, 0)).map_err(|e| e.to_string())?;
    let mut total = 0;
    for k in 0..steps {
        let had_prev = opt.state().theta_prev.is_some();
        let before = f.evaluations();
        let info = opt.step(&mut f).map_err(|e| e.to_string())?;
        let spent = f.evaluations() - before;
        let expected = if had_prev { 2 } else { 1 };
        if spent != info.evaluations || spent != expected {
            return Err(format!("step {k}: counter +{spent}, reported {}, expected {expected}", info.evaluations));
        }
        total += spent;
    }
    if total != f.evaluations() {
        return Err("counter drift".into());
    }
    for alg in [BatchAlgorithm::Mcce, BatchAlgorithm::Gmcce] {
        let mc = MonteCarloConfig {
            n0: 30,
            eta: 1.1,
            rho: 0.1,
            r: 0.1,
            eps: (alg == BatchAlgorithm::Mcce).then_some(1e-3),
            alpha: (alg == BatchAlgorithm::Gmcce).then_some(Schedule::Constant(0.5)),
        };
        let mut g = make_benchmark::<f64>("griewank", 3).map_err(|e| e.to_string())?;
        let mut b = BatchOptimizer::new(alg, mc, theta0.clone(), RngState::new(seed, 0)).map_err(|e| e.to_string())?;
        let mut sum = 0u64;
        for _ in 0..8 {
            let stats = b.step(&mut g).map_err(|e| e.to_string())?;
            sum += stats.batch_size as u64;
            if sum != g.evaluations() {
                return Err(format!("{}: counter {} vs batch sizes {sum}", alg.id(), g.evaluations()));
            }
        }
    }
    Ok(())
}
