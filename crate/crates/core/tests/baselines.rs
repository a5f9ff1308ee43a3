use cure::baselines::{
    acs_cure, acs_path, best_entry_init, default_lambda_grid, fit_rrr, lasso_cd, ols_svd_init, select_rank_cv,
    AcsConfig, LassoConfig,
};
use cure::data::ProblemData;
use cure::objective::{eval_objective, PenaltyParams};
use cure::simgen::{gen_dataset, SimModel, SimSpec};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn lasso_objective(x: &DMatrix<f64>, y: &DMatrix<f64>, c: &DMatrix<f64>, lambda: f64) -> f64 {
    (y - x * c).norm_squared() / (2.0 * x.nrows() as f64) + lambda * c.lp_norm(1)
}

fn desk_problem(seed: u64) -> ProblemData {
    let spec = SimSpec::new(SimModel::I, 40, 20, 30, 1).with_snr(0.5).with_seed(seed);
    let t = gen_dataset(&spec).unwrap();
    ProblemData::new(t.x, t.y).unwrap()
}

#[test]
fn lasso_beats_random_sparse_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(6, 3, &mut rng);
    let y = random(6, 2, &mut rng) * 2.0;
    let lambda = 0.3;
    let fit = lasso_cd(&x, &y, &LassoConfig::new(lambda), None).unwrap();
    assert!(fit.converged);
    let f = lasso_objective(&x, &y, &fit.coef, lambda);
    for _ in 0..10_000 {
        let c = DMatrix::from_fn(3, 2, |_, _| {
            if rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(-3.0..3.0)
            }
        });
        assert!(f <= lasso_objective(&x, &y, &c, lambda) + 1e-12);
    }
}

#[test]
fn lasso_sweeps_never_increase_the_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random(20, 8, &mut rng);
    let y = random(20, 4, &mut rng);
    let fit = lasso_cd(&x, &y, &LassoConfig::new(0.05), None).unwrap();
    for col in &fit.sweep_objectives {
        for w in col.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn acs_trace_is_monotone_and_improves_on_the_start() {
    let problem = desk_problem(2);
    let init = ols_svd_init(&problem).unwrap().unwrap();
    let grid = default_lambda_grid(&problem, 5, 0.05);
    let cfg = AcsConfig::default();
    for &lambda in &grid[1..] {
        let fit = acs_cure(&problem, lambda, cfg.mu, &init, &cfg).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        let start = eval_objective(&problem, &init, PenaltyParams::new(lambda, cfg.mu).unwrap()).unwrap();
        let end = eval_objective(&problem, &fit.factor, PenaltyParams::new(lambda, cfg.mu).unwrap()).unwrap();
        assert!(end <= start + 1e-10);
        assert!((end - fit.objective_trace.last().unwrap()).abs() < 1e-8 * end.max(1.0));
    }
}

#[test]
fn acs_output_is_a_fixed_point() {
    let problem = desk_problem(3);
    let init = ols_svd_init(&problem).unwrap().unwrap();
    let lambda = default_lambda_grid(&problem, 4, 0.05)[2];
    let cfg = AcsConfig::default().with_tol(1e-12);
    let fit = acs_cure(&problem, lambda, cfg.mu, &init, &cfg).unwrap();
    let again = acs_cure(&problem, lambda, cfg.mu, &fit.factor, &cfg).unwrap();
    let (f0, f1) = (fit.objective_trace.last().unwrap(), again.objective_trace.last().unwrap());
    assert!((f0 - f1).abs() <= 1e-8 * f0.abs().max(1.0), "{f0} vs {f1}");
}

#[test]
fn path_agrees_with_cold_starts() {
    let problem = desk_problem(4);
    let grid = default_lambda_grid(&problem, 8, 0.05);
    let cfg = AcsConfig::default().with_grid(grid);
    let path = acs_path(&problem, &cfg).unwrap();
    let starts = [ols_svd_init(&problem).unwrap().unwrap(), best_entry_init(&problem).unwrap()];
    for (lambda, factor) in &path {
        let params = PenaltyParams::new(*lambda, cfg.mu).unwrap();
        let on_path = eval_objective(&problem, factor, params).unwrap();
        let cold = starts
            .iter()
            .map(|s| {
                let f = acs_cure(&problem, *lambda, cfg.mu, s, &cfg).unwrap().factor;
                eval_objective(&problem, &f, params).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(on_path <= cold + 1e-4, "lambda {lambda}: path {on_path}, cold {cold}");
    }
}

#[test]
fn single_lambda_path_equals_acs_cure() {
    let problem = desk_problem(5);
    let lambda = default_lambda_grid(&problem, 4, 0.05)[2];
    let cfg = AcsConfig::default().with_grid(vec![lambda]);
    let path = acs_path(&problem, &cfg).unwrap();
    assert_eq!(path.len(), 1);
    let init = ols_svd_init(&problem).unwrap().unwrap();
    let fit = acs_cure(&problem, lambda, cfg.mu, &init, &cfg).unwrap();
    assert!(!fit.factor.is_zero());
    assert_eq!(path[0].1, fit.factor);
}

#[test]
fn lambda_above_the_maximum_gives_zero() {
    let problem = desk_problem(6);
    let lmax = default_lambda_grid(&problem, 1, 1.0)[0];
    let cfg = AcsConfig::default().with_grid(vec![100.0 * lmax]);
    let path = acs_path(&problem, &cfg).unwrap();
    assert!(path[0].1.is_zero());
}

#[test]
fn rrr_beats_random_rank_two_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = random(12, 4, &mut rng);
    let y = random(12, 3, &mut rng);
    let c = fit_rrr(&x, &y, 2, 0.0).unwrap();
    let best = (&y - &x * &c).norm();
    for _ in 0..10_000 {
        let b = random(4, 2, &mut rng) * random(2, 3, &mut rng) * 3.0;
        assert!(best <= (&y - &x * b).norm() + 1e-12);
    }
    let rank = c.clone().svd(false, false).singular_values.iter().filter(|s| **s > 1e-10).count();
    assert!(rank <= 2);
}

#[test]
fn full_rank_rrr_is_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let x = random(15, 4, &mut rng);
    let y = random(15, 3, &mut rng);
    let ols = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
    for r in [3, 5] {
        let c = fit_rrr(&x, &y, r, 0.0).unwrap();
        assert!((c - &ols).amax() < 1e-10);
    }
}

#[test]
fn rank_cv_recovers_noiseless_rank_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let x = random(40, 6, &mut rng);
    let c = random(6, 2, &mut rng) * random(2, 5, &mut rng);
    let y = &x * c;
    let r = select_rank_cv(&x, &y, 4, 5, 0.0, 7).unwrap();
    assert_eq!(r, 2);
    assert_eq!(select_rank_cv(&x, &y, 4, 5, 0.0, 7).unwrap(), r);
}
