mod common;

use common::*;
use gcp_core::mttkrp::{gradient_full, mttkrp_dense, mttkrp_sampled_all, objective_full, partial_gradient_tensor};
use gcp_core::sampling::sample_uniform;
use gcp_core::{DataTensor, GcpRng, KernelOptions, LossFunction, LossKind, SampledY, ScriptedIndices};
use rand::Rng;

#[test]
fn gradient_matches_finite_differences_on_sparse_data() {
    let mut rng = GcpRng::seed_from_u64(1);
    for kind in [LossKind::Poisson, LossKind::BernoulliOdds, LossKind::Gaussian] {
        let loss = LossFunction::new(kind);
        for _ in 0..5 {
            let shp = random_shape(&mut rng, &[5, 4, 3, 3]);
            let model = random_model(&shp, 2, 0.1, 1.0, &mut rng);
            let x = DataTensor::Sparse(random_sparse(&shp, 0.3, &mut rng, |_| 1.0));
            let exact = gradient_full(&x, &model, &loss).unwrap().to_vec();
            let fd = fd_gradient(&x, &model, &loss);
            assert!(rel_err(&exact, &fd, 1e-8) <= 1e-5, "{kind}");
        }
    }
}

#[test]
fn dense_mttkrp_matches_unfolding_in_five_modes() {
    let mut rng = GcpRng::seed_from_u64(2);
    let shp = shape(&[3, 2, 4, 2, 3]);
    let model = random_model(&shp, 3, -1.0, 1.0, &mut rng);
    let y = data_for(LossKind::Gaussian, &random_model(&shp, 2, -1.0, 1.0, &mut rng), &mut rng);
    for k in 0..5 {
        let got = mttkrp_dense(&y, &model, k).unwrap();
        let want = matmul(&unfold(&y, k), &khatri_rao_skip(&model, k));
        for (a, b) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn parallel_kernel_agrees_with_serial() {
    let mut rng = GcpRng::seed_from_u64(3);
    let shp = shape(&[20, 15, 10]);
    let model = random_model(&shp, 4, 0.0, 1.0, &mut rng);
    let mut y = SampledY::new(shp.clone());
    for _ in 0..20_000 {
        let c: Vec<usize> = shp.dims().iter().map(|&n| rng.random_range(0..n)).collect();
        y.push(&c, rng.random_range(-1.0..1.0));
    }
    let serial = mttkrp_sampled_all(&y, &model, KernelOptions::default()).unwrap().to_vec();
    for deterministic in [true, false] {
        let opts = KernelOptions {
            parallel: true,
            deterministic,
        };
        let par = mttkrp_sampled_all(&y, &model, opts).unwrap().to_vec();
        assert!(rel_err(&par, &serial, 1.0) < 1e-12);
    }
    let det = KernelOptions {
        parallel: true,
        deterministic: true,
    };
    let a = mttkrp_sampled_all(&y, &model, det).unwrap().to_vec();
    let b = mttkrp_sampled_all(&y, &model, det).unwrap().to_vec();
    assert_eq!(a, b);
}

#[test]
fn exhaustive_uniform_sample_reproduces_partial_gradient_tensor() {
    let mut rng = GcpRng::seed_from_u64(4);
    let shp = shape(&[4, 3, 3]);
    let model = random_model(&shp, 2, 0.1, 1.0, &mut rng);
    let x = DataTensor::Dense(data_for(LossKind::Gamma, &random_model(&shp, 2, 0.1, 1.0, &mut rng), &mut rng));
    let loss = LossFunction::gamma();
    let mut script = ScriptedIndices::enumerate_all(&shp);
    let ys = sample_uniform(&x, &model, &loss, 36, &mut script).unwrap();
    let y = partial_gradient_tensor(&x, &model, &loss).unwrap();
    assert_eq!(ys.to_dense().unwrap().values(), y.values());
}

#[test]
fn objective_of_exact_fit_is_zero_for_gaussian() {
    let mut rng = GcpRng::seed_from_u64(5);
    let shp = shape(&[4, 3, 2]);
    let model = random_model(&shp, 2, 0.0, 1.0, &mut rng);
    let x = DataTensor::Dense(model.full().unwrap());
    assert!(objective_full(&x, &model, &LossFunction::gaussian()).unwrap() < 1e-24);
}
