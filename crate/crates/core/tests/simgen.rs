use cure::simgen::{design_covariance, gen_coefficient, gen_dataset, gen_design, realized_snr, SimModel, SimSpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn column_correlation(m: &DMatrix<f64>, a: usize, b: usize) -> f64 {
    let n = m.nrows() as f64;
    let (ca, cb) = (m.column(a), m.column(b));
    let (ma, mb) = (ca.sum() / n, cb.sum() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..m.nrows() {
        let (x, y) = (ca[i] - ma, cb[i] - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    sab / (saa * sbb).sqrt()
}

#[test]
fn model_one_coefficient_values() {
    let spec = SimSpec::new(SimModel::I, 20, 16, 25, 1);
    let f = gen_coefficient(&spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let l = &f.layers[0];
    assert_eq!(l.d, 20.0);
    assert!((l.u.norm() - 1.0).abs() < 1e-12);
    assert!((l.v.norm() - 1.0).abs() < 1e-12);
    // 10 / |u_bar|, |u_bar|^2 = 2 (100 + 64 + 25) + 10 * 9
    assert!((l.u[0] - 10.0 / 468f64.sqrt()).abs() < 1e-12);
    assert!((l.u[1] + l.u[0]).abs() < 1e-12);
}

#[test]
fn model_two_and_three_layer_values() {
    let spec = SimSpec::new(SimModel::II, 50, 30, 30, 3).with_seed(4);
    let f = gen_dataset(&spec).unwrap().factors;
    assert_eq!(f.d_values(), vec![20.0, 15.0, 10.0]);
    for (j, a) in f.layers.iter().enumerate() {
        assert!((a.u.norm() - 1.0).abs() < 1e-12 && (a.v.norm() - 1.0).abs() < 1e-12);
        for b in &f.layers[j + 1..] {
            assert!(a.v.dot(&b.v).abs() < 1e-10);
        }
    }

    let mut spec = SimSpec::new(SimModel::III, 50, 30, 30, 2).with_seed(4);
    spec.s_u = 3;
    let f = gen_dataset(&spec).unwrap().factors;
    let support = |k: usize| -> Vec<usize> { (0..30).filter(|&j| f.layers[k].u[j] != 0.0).collect() };
    assert_eq!(support(0), vec![0, 1, 2]);
    assert_eq!(support(1), vec![3, 4, 5]);
}

#[test]
fn coefficient_matrix_is_the_sum_of_layers() {
    let t = gen_dataset(&SimSpec::new(SimModel::II, 40, 20, 20, 3).with_seed(9)).unwrap();
    let mut c = DMatrix::zeros(20, 20);
    for l in &t.factors.layers {
        for j in 0..20 {
            for k in 0..20 {
                c[(j, k)] += l.d * l.u[j] * l.v[k];
            }
        }
    }
    assert!((c - &t.c_star).amax() < 1e-12);
    assert!((&t.y - (&t.x * &t.c_star + &t.e)).amax() < 1e-12);
    assert!((realized_snr(&t) - t.spec.snr).abs() < 1e-10);
}

#[test]
fn design_correlation_matches_the_construction() {
    // x ~ N(0, Gamma) conditioned on x U* ~ N(0, I): the covariance is
    // Gamma - G U S^{-1} U^T G + G U S^{-2} U^T G with S = U^T Gamma U.
    let spec = SimSpec::new(SimModel::II, 20_000, 12, 12, 2).with_seed(3);
    let u = gen_dataset(&SimSpec { n: 30, ..spec.clone() }).unwrap().factors.u_matrix();
    let x = gen_design(&u, &spec, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let g = design_covariance(12);
    let gu = &g * &u;
    let s_inv = (u.transpose() * &gu).try_inverse().unwrap();
    let cov = &g - &gu * &s_inv * gu.transpose() + &gu * &s_inv * &s_inv * gu.transpose();
    for j in 0..11 {
        let oracle = cov[(j, j + 1)] / (cov[(j, j)] * cov[(j + 1, j + 1)]).sqrt();
        let got = column_correlation(&x, j, j + 1);
        assert!((got - oracle).abs() < 0.05, "columns {j},{}: {got} vs {oracle}", j + 1);
    }
    let again = gen_design(&u, &spec, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    assert_eq!(x, again);
}

#[test]
fn independent_noise_columns_are_uncorrelated() {
    let spec = SimSpec::new(SimModel::II, 20_000, 10, 10, 2).with_rho(0.0).with_seed(6);
    let t = gen_dataset(&spec).unwrap();
    for k in 0..9 {
        assert!(column_correlation(&t.e, k, k + 1).abs() < 0.05);
    }
    let spec = spec.with_rho(0.5);
    let t = gen_dataset(&spec).unwrap();
    for k in 0..9 {
        assert!((column_correlation(&t.e, k, k + 1) - 0.5).abs() < 0.05);
    }
}

#[test]
fn large_snr_gives_negligible_noise() {
    let t = gen_dataset(&SimSpec::new(SimModel::I, 40, 40, 40, 1).with_snr(1e9).with_seed(2)).unwrap();
    assert!(t.e.norm() / (&t.x * &t.c_star).norm() <= 1e-6);
    assert_eq!(t.c_star.clone().svd(false, false).singular_values.iter().filter(|s| **s > 1e-9).count(), 1);
}
