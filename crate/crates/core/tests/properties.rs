use kftune_core::filter::{ekf_forward, rts_smoother, GaussianBelief};
use kftune_core::models::{build_system, simulate_truth, SimConfig, SYSTEM_NAMES};
use kftune_core::numerics::{autocorr, spd_solve};
use kftune_core::{Mat, Vector};
use proptest::prelude::*;

fn spd(size: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-2.0f64..2.0, size * size).prop_map(move |v| {
        let b = Mat::from_vec(size, size, v);
        &b * b.transpose() + Mat::identity(size, size)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spd_solve_recovers_the_solution(a in spd(4), x in prop::collection::vec(-5.0f64..5.0, 4)) {
        let x = Mat::from_vec(4, 1, x);
        let got = spd_solve(&a, &(&a * &x)).unwrap();
        prop_assert!((got - x).abs().max() < 1e-9);
    }

    #[test]
    fn propagation_keeps_parameters(
        index in 0usize..SYSTEM_NAMES.len(),
        scale in prop::collection::vec(0.5f64..1.5, 15),
        state in prop::collection::vec(-0.1f64..0.1, 4),
        dt in 0.01f64..0.2,
    ) {
        let model = build_system(SYSTEM_NAMES[index]).unwrap();
        let theta = Vector::from_fn(model.p(), |i, _| model.theta_true[i] * scale[i]);
        let x = Vector::from_fn(model.n(), |i, _| model.x0_true[i] + state[i]);
        let xa = model.augment(&x, &theta);
        let u = Vector::from_element(model.dims().q, 0.01);
        let next = model.propagate(&xa, &u, 0.0, dt).unwrap();
        prop_assert_eq!(next.rows(model.n(), model.p()).into_owned(), theta);
        prop_assert!(model.observe(&next, &u).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn analytic_jacobians_match_differences(
        index in 0usize..3,
        x in prop::collection::vec(-3.0f64..3.0, 2),
        scale in prop::collection::vec(0.5f64..1.5, 3),
    ) {
        let model = build_system(["constant", "ramp", "smd"][index]).unwrap();
        let theta = Vector::from_fn(model.p(), |i, _| model.theta_true[i] * scale[i]);
        let xa = model.augment(&Vector::from_fn(model.n(), |i, _| x[i]), &theta);
        let none = Vector::zeros(0);
        let f = model.transition_jacobian(&xa, &none, 0.0, model.dt, 1).unwrap();
        let fd = model.fd_transition_jacobian(&xa, &none, 0.0, model.dt, 1).unwrap();
        prop_assert!((f - fd).abs().max() < 1e-4);
    }

    #[test]
    fn autocorrelation_starts_at_one(seq in prop::collection::vec(-10.0f64..10.0, 5..60)) {
        prop_assume!(seq.iter().any(|v| v.abs() > 1e-3));
        let rho = autocorr(&seq, 3).unwrap();
        prop_assert!((rho[0] - 1.0).abs() < 1e-12);
        prop_assert!(rho.iter().all(|r| r.is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn filter_and_smoother_covariances_behave(
        index in 0usize..5,
        seed in 0u64..1000,
        p0 in 1e-3f64..1.0,
    ) {
        let model = build_system(["constant", "ramp", "smd", "lon", "lat"][index]).unwrap();
        let data = simulate_truth(&model, &SimConfig::for_model(&model, seed)).unwrap();
        let na = model.n() + model.p();
        let x0 = model.augment(&model.initial_state_from(&data.measurement(1)), &model.theta_true);
        let init = GaussianBelief::new(x0, Mat::identity(na, na) * p0);
        let mut q = Mat::zeros(na, na);
        q.view_mut((0, 0), (model.n(), model.n())).copy_from(&model.q_true);
        let pass = ekf_forward(&model, &data, &init, &q, &model.r_true).unwrap();
        let sm = rts_smoother(&model, &data, &pass).unwrap();

        for k in 1..=pass.len() {
            let step = pass.step(k);
            let post = &step.posterior.cov;
            prop_assert!((post - post.transpose()).abs().max() <= 1e-10);
            prop_assert!(step.s1.clone().cholesky().is_some());
            for i in 0..na {
                prop_assert!(post[(i, i)] <= step.prior.cov[(i, i)] + 1e-9);
                prop_assert!(post[(i, i)] >= -1e-12);
                prop_assert!(sm.smoothed[k].cov[(i, i)] <= post[(i, i)] + 1e-9);
            }
            let lag = sm.lag_one_at(k);
            for i in 0..na {
                for j in 0..na {
                    let cs = (sm.smoothed[k].cov[(i, i)] * sm.smoothed[k - 1].cov[(j, j)]).max(0.0).sqrt();
                    prop_assert!(lag[(i, j)].is_finite() && lag[(i, j)].abs() <= cs + 1e-8);
                }
            }
        }
        prop_assert_eq!(&sm.smoothed[pass.len()], &pass.last().posterior);
    }
}

#[test]
fn trusting_exact_measurements_tracks_them() {
    let model = build_system("smd").unwrap();
    let data = simulate_truth(&model, &SimConfig::for_model(&model, 2)).unwrap();
    let na = model.n() + model.p();
    let init = GaussianBelief::new(
        model.augment(&model.x0_true, &model.theta_true),
        Mat::identity(na, na) * 0.1,
    );
    let mut q = Mat::zeros(na, na);
    q.view_mut((0, 0), (2, 2)).copy_from(&model.q_true);
    let pass = ekf_forward(&model, &data, &init, &q, &(Mat::identity(2, 2) * 1e-12)).unwrap();
    for k in 1..=pass.len() {
        let x = pass.posterior(k).mean.rows(0, 2).into_owned();
        assert!((x - data.measurement(k)).abs().max() < 1e-6);
    }
}
