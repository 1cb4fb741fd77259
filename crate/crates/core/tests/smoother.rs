//! Filter and smoother against the batch Gaussian posterior of a scalar
//! random walk observed three times.

use approx::assert_abs_diff_eq;
use kftune_core::filter::{ekf_forward, rts_smoother, GaussianBelief};
use kftune_core::models::{Dataset, Level};
use kftune_core::{Mat, Vector};

const M0: f64 = 0.3;
const P0: f64 = 2.0;
const Q: f64 = 0.5;
const R: f64 = 0.8;
const Z: [f64; 3] = [0.5, -1.0, 2.0];

/// Posterior mean and covariance of `(x0, .., xN)` given the first `used`
/// measurements, from the joint prior in information form.
fn batch_posterior(used: usize) -> (Vector, Mat) {
    let size = Z.len() + 1;
    let prior = Mat::from_fn(size, size, |i, j| P0 + i.min(j) as f64 * Q);
    let mut info = prior.clone().try_inverse().unwrap();
    let mut rhs = &info * Vector::from_element(size, M0);
    for (k, z) in Z.iter().enumerate().take(used) {
        info[(k + 1, k + 1)] += 1.0 / R;
        rhs[k + 1] += z / R;
    }
    let cov = info.try_inverse().unwrap();
    (&cov * rhs, cov)
}

fn data() -> Dataset {
    Dataset::new(
        vec![1.0, 2.0, 3.0],
        Mat::from_column_slice(3, 1, &Z),
        Mat::zeros(3, 0),
    )
    .unwrap()
}

#[test]
fn smoothed_moments_equal_batch_posterior() {
    let model = Level::model(M0, Q, R, 3, 1.0);
    let init = GaussianBelief::new(Vector::from_element(1, M0), Mat::from_element(1, 1, P0));
    let q = Mat::from_element(1, 1, Q);
    let r = Mat::from_element(1, 1, R);
    let pass = ekf_forward(&model, &data(), &init, &q, &r).unwrap();
    let sm = rts_smoother(&model, &data(), &pass).unwrap();

    let (mean, cov) = batch_posterior(3);
    for k in 0..=3 {
        assert_abs_diff_eq!(sm.smoothed[k].mean[0], mean[k], epsilon = 1e-12);
        assert_abs_diff_eq!(sm.smoothed[k].cov[(0, 0)], cov[(k, k)], epsilon = 1e-12);
    }
    for k in 1..=3 {
        assert_abs_diff_eq!(sm.lag_one_at(k)[(0, 0)], cov[(k, k - 1)], epsilon = 1e-12);
        assert_abs_diff_eq!(
            sm.smoothed_residue[k - 1][0],
            Z[k - 1] - mean[k],
            epsilon = 1e-12
        );
    }
}

#[test]
fn filtered_moments_equal_partial_batch_posterior() {
    let model = Level::model(M0, Q, R, 3, 1.0);
    let init = GaussianBelief::new(Vector::from_element(1, M0), Mat::from_element(1, 1, P0));
    let q = Mat::from_element(1, 1, Q);
    let r = Mat::from_element(1, 1, R);
    let pass = ekf_forward(&model, &data(), &init, &q, &r).unwrap();
    for k in 1..=3 {
        let (mean, cov) = batch_posterior(k);
        assert_abs_diff_eq!(pass.posterior(k).mean[0], mean[k], epsilon = 1e-12);
        assert_abs_diff_eq!(pass.posterior(k).cov[(0, 0)], cov[(k, k)], epsilon = 1e-12);
        // The prediction of x_k uses only the first k−1 samples.
        let (prior_mean, prior_cov) = batch_posterior(k - 1);
        assert_abs_diff_eq!(pass.step(k).prior.mean[0], prior_mean[k], epsilon = 1e-12);
        assert_abs_diff_eq!(
            pass.step(k).prior.cov[(0, 0)],
            prior_cov[(k, k)],
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            pass.step(k).innovation[0],
            Z[k - 1] - prior_mean[k],
            epsilon = 1e-12
        );
    }
}
