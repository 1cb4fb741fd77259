use approx::assert_abs_diff_eq;
use kftune_core::models::{
    build_system, case1_model, simulate_truth, Case1, SimConfig, SYSTEM_NAMES,
};
use kftune_core::numerics::rk4_step;
use kftune_core::{Error, Mat, Vector};

#[test]
fn registry_dimensions() {
    let expected = [
        ("constant", (1, 1, 1)),
        ("ramp", (1, 1, 1)),
        ("smd", (2, 2, 3)),
        ("lon", (4, 5, 5)),
        ("lat", (4, 7, 15)),
        ("case1", (3, 4, 9)),
    ];
    for (name, (n, m, p)) in expected {
        let model = build_system(name).unwrap();
        assert_eq!((model.n(), model.m(), model.p()), (n, m, p), "{name}");
        assert_eq!(model.theta_true.len(), p);
        assert_eq!(model.parameter_names().len(), p);
        assert_eq!(model.x0_true.len(), n);
    }
    assert_eq!(SYSTEM_NAMES.len(), expected.len());
    assert_eq!(
        build_system("glider").unwrap_err(),
        Error::UnknownSystem("glider".into())
    );
}

#[test]
fn registry_defaults() {
    let constant = build_system("constant").unwrap();
    assert_eq!(constant.theta_true[0], 1.0);
    assert_eq!(constant.x0_true[0], 10.0);
    let smd = build_system("smd").unwrap();
    assert_eq!(smd.theta_true.as_slice(), &[4.0, 0.4, 0.6]);
    let case1 = build_system("case1").unwrap();
    assert_eq!((case1.dt, case1.samples), (0.02, 352));
}

#[test]
fn discrete_propagation() {
    let none = Vector::zeros(0);
    let constant = build_system("constant").unwrap();
    let xa = Vector::from_column_slice(&[10.0, 1.0]);
    assert_eq!(constant.propagate(&xa, &none, 0.0, 0.1).unwrap(), xa);
    assert_eq!(constant.observe(&xa, &none).as_slice(), &[10.0]);
    let f = constant
        .transition_jacobian(&xa, &none, 0.0, 0.1, 1)
        .unwrap();
    assert_eq!(f, Mat::from_row_slice(2, 2, &[1.0, 10.0, 0.0, 1.0]));

    let ramp = build_system("ramp").unwrap();
    let next = ramp
        .propagate(&Vector::from_column_slice(&[10.0, 2.0]), &none, 0.0, 0.1)
        .unwrap();
    assert_abs_diff_eq!(next[0], 10.2, epsilon = 1e-15);
    assert_eq!(next[1], 2.0);
    let f = ramp.transition_jacobian(&next, &none, 0.0, 0.1, 1).unwrap();
    assert_eq!(f, Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]));
}

#[test]
fn smd_step_matches_fine_integration() {
    let model = build_system("smd").unwrap();
    let xa = Vector::from_column_slice(&[1.0, 0.0, 4.0, 0.4, 0.6]);
    let none = Vector::zeros(0);
    let next = model.propagate(&xa, &none, 0.0, 0.1).unwrap();

    // Reference: 1000 RK4 substeps of the same equations.
    let deriv = |s: &Vector, _u: &Vector, _t: f64| {
        Vector::from_column_slice(&[s[1], -4.0 * s[0] - 0.4 * s[1] - 0.6 * s[0].powi(3)])
    };
    let mut fine = Vector::from_column_slice(&[1.0, 0.0]);
    for i in 0..1000 {
        fine = rk4_step(deriv, &fine, &none, i as f64 * 1e-4, 1e-4).unwrap();
    }
    assert_abs_diff_eq!(next[0], fine[0], epsilon = 1e-6);
    assert_abs_diff_eq!(next[1], fine[1], epsilon = 1e-6);
    assert_eq!(next.rows(2, 3).as_slice(), &[4.0, 0.4, 0.6]);
}

#[test]
fn lon_outputs_vanish_at_rest() {
    let model = build_system("lon").unwrap();
    let xa = model.augment(&Vector::zeros(4), &model.theta_true);
    assert!(model
        .observe(&xa, &Vector::zeros(1))
        .iter()
        .all(|v| *v == 0.0));
}

#[test]
fn case1_normal_acceleration() {
    let model = case1_model(Case1::default());
    let mut theta = model.theta_true.clone();
    theta[5] = 0.08;
    theta[8] = 1.0;
    let xa = model.augment(&Vector::zeros(3), &theta);
    let z = model.observe(&xa, &Vector::zeros(1));
    // q̇ = M_0 at rest, so the sensor offset term contributes too.
    let want = -(415.2 / 32.2) * 0.08 + (-0.01 / 32.2) * theta[6] + 1.0;
    assert_abs_diff_eq!(z[3], want, epsilon = 1e-12);
    assert_eq!(&z.as_slice()[..3], &[0.0, 0.0, 0.0]);
}

#[test]
fn case1_constants_override() {
    let c = Case1::default()
        .with_constants([("U0", 400.0), ("g", 9.81)])
        .unwrap();
    assert_eq!((c.u0, c.g), (400.0, 9.81));
    assert_eq!(Case1::default().with_constants([("rho", 1.2)]), Err("rho"));
}

#[test]
fn analytic_jacobians_agree_with_differences() {
    for name in SYSTEM_NAMES {
        let model = build_system(name).unwrap();
        let sim = SimConfig::for_model(&model, 5);
        let data = simulate_truth(&model, &sim).unwrap();
        let truth = data.truth.as_ref().unwrap();
        for k in [1, data.len() / 2, data.len()] {
            let x = truth.x.row(k - 1).transpose();
            let xa = model.augment(&x, &model.theta_true);
            let u = data.step_input(k);
            let f = model
                .transition_jacobian(&xa, &u, data.time(k - 1), data.dt(), k)
                .unwrap();
            let fd = model
                .fd_transition_jacobian(&xa, &u, data.time(k - 1), data.dt(), k)
                .unwrap();
            let n = model.n();
            let diff = (f.rows(0, n) - fd.rows(0, n)).abs().max();
            assert!(diff < 1e-4, "{name} F at {k}: {diff}");
            let h = model.measurement_jacobian(&xa, &data.input(k), k).unwrap();
            let hd = model
                .fd_measurement_jacobian(&xa, &data.input(k), k)
                .unwrap();
            assert!((h - hd).abs().max() < 1e-4, "{name} H at {k}");
        }
    }
}

#[test]
fn simulated_noise_levels() {
    let model = build_system("constant").unwrap();
    let data = simulate_truth(&model, &SimConfig::for_model(&model, 17)).unwrap();
    let v = &data.truth.as_ref().unwrap().v;
    let var = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
    assert!((0.03..=0.07).contains(&var), "{var}");
    assert_eq!(data.len(), 100);
    assert_abs_diff_eq!(data.dt(), 0.1, epsilon = 1e-15);
}

#[test]
fn noise_free_simulation_is_the_trajectory() {
    let model = build_system("lon").unwrap();
    let mut sim = SimConfig::for_model(&model, 1).without_process_noise();
    sim.r_true.fill(0.0);
    let data = simulate_truth(&model, &sim).unwrap();
    let clean =
        kftune_core::oracle::simulate_outputs(&model, &data, &model.x0_true, &model.theta_true)
            .unwrap();
    for (k, y) in clean.iter().enumerate() {
        assert_eq!(data.measurement(k + 1), *y);
    }
}

#[test]
fn equal_seeds_reproduce_bit_exactly() {
    let model = build_system("smd").unwrap();
    let a = simulate_truth(&model, &SimConfig::for_model(&model, 99)).unwrap();
    let b = simulate_truth(&model, &SimConfig::for_model(&model, 99)).unwrap();
    let c = simulate_truth(&model, &SimConfig::for_model(&model, 100)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.z, c.z);
}

#[test]
fn truth_ignores_seed_without_process_noise() {
    for name in ["constant", "smd", "lat"] {
        let model = build_system(name).unwrap();
        let a = simulate_truth(
            &model,
            &SimConfig::for_model(&model, 1).without_process_noise(),
        )
        .unwrap();
        let b = simulate_truth(
            &model,
            &SimConfig::for_model(&model, 2).without_process_noise(),
        )
        .unwrap();
        assert_eq!(a.truth.unwrap().x, b.truth.unwrap().x, "{name}");
    }
}

#[test]
fn rejects_bad_simulation_settings() {
    let model = build_system("constant").unwrap();
    let short = SimConfig {
        samples: 1,
        ..SimConfig::for_model(&model, 0)
    };
    assert!(matches!(
        simulate_truth(&model, &short),
        Err(Error::InvalidConfig(_))
    ));
    let wrong = SimConfig {
        r_true: Mat::identity(2, 2),
        ..SimConfig::for_model(&model, 0)
    };
    assert!(matches!(
        simulate_truth(&model, &wrong),
        Err(Error::DimensionMismatch(_))
    ));
}
