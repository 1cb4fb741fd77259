//! Forward EKF pass, RTS smoother and lag-one smoothed covariances.

use alloc::format;
use alloc::vec::Vec;

use crate::models::{Dataset, SystemModel};
use crate::numerics::{symmetrize, symmetrized, Mat, SpdFactor, Vector};
use crate::{Error, Result};

/// Mean and covariance of the augmented state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: Mat,
}

impl GaussianBelief {
    pub fn new(mean: Vector, cov: Mat) -> Self {
        Self { mean, cov }
    }
}

/// Everything produced while processing sample `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStep {
    /// `X_{k|k−1}`, `P_{k|k−1}`.
    pub prior: GaussianBelief,
    /// `X_{k|k}`, `P_{k|k}`.
    pub posterior: GaussianBelief,
    /// Kalman gain, `(n+p) × m`.
    pub gain: Mat,
    /// `Z_k − h(X_{k|k−1})`.
    pub innovation: Vector,
    /// `Z_k − h(X_{k|k})`.
    pub filtered_residue: Vector,
    /// Innovation covariance `H P_{k|k−1} Hᵀ + R`.
    pub s1: Mat,
    /// Transition Jacobian from `k−1` to `k`, taken at `X_{k−1|k−1}`.
    pub f: Mat,
    /// Measurement Jacobian at `X_{k|k−1}`.
    pub h: Mat,
}

/// One forward pass through a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPass {
    pub init: GaussianBelief,
    pub q: Mat,
    pub r: Mat,
    /// Samples `k = 1..=N` at index `k−1`.
    pub steps: Vec<FilterStep>,
}

impl FilterPass {
    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `X_{k|k}`, with `k = 0` giving the initial belief.
    pub fn posterior(&self, k: usize) -> &GaussianBelief {
        if k == 0 {
            &self.init
        } else {
            &self.steps[k - 1].posterior
        }
    }

    pub fn step(&self, k: usize) -> &FilterStep {
        &self.steps[k - 1]
    }

    pub fn last(&self) -> &FilterStep {
        self.steps
            .last()
            .expect("filter pass has at least one step")
    }
}

/// Backward smoothing results.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherPass {
    /// `X_{k|N}`, `P_{k|N}` for `k = 0..=N`.
    pub smoothed: Vec<GaussianBelief>,
    /// Smoother gains for `k = 0..N−1`.
    pub gains: Vec<Mat>,
    /// `P_{k,k−1|N}` for `k = 1..=N` at index `k−1`.
    pub lag_one: Vec<Mat>,
    /// `Z_k − h(X_{k|N})` for `k = 1..=N` at index `k−1`.
    pub smoothed_residue: Vec<Vector>,
}

impl SmootherPass {
    pub fn lag_one_at(&self, k: usize) -> &Mat {
        &self.lag_one[k - 1]
    }
}

/// Runs the extended Kalman filter forward through `data`.
pub fn ekf_forward(
    model: &SystemModel,
    data: &Dataset,
    init: &GaussianBelief,
    q: &Mat,
    r: &Mat,
) -> Result<FilterPass> {
    let dims = model.dims();
    let (na, m) = (dims.aug(), dims.m);
    if init.mean.len() != na || init.cov.shape() != (na, na) || q.shape() != (na, na) {
        return Err(Error::DimensionMismatch(format!(
            "augmented state has {na} entries"
        )));
    }
    if r.shape() != (m, m) || data.m() != m {
        return Err(Error::DimensionMismatch(format!(
            "model has {m} measurements"
        )));
    }
    let dt = data.dt();
    let mut steps: Vec<FilterStep> = Vec::with_capacity(data.len());
    let eye = Mat::identity(na, na);
    let mut x = init.mean.clone();
    let mut p = init.cov.clone();
    for k in 1..=data.len() {
        let u_step = data.step_input(k);
        let f = model.transition_jacobian(&x, &u_step, data.time(k - 1), dt, k)?;
        let x_prior = model.propagate_at(&x, &u_step, data.time(k - 1), dt, k)?;
        let p_prior = symmetrized(&f * &p * f.transpose() + q);

        let u = data.input(k);
        let h = model.measurement_jacobian(&x_prior, &u, k)?;
        let innovation = data.measurement(k) - model.observe(&x_prior, &u);
        let ph_t = &p_prior * h.transpose();
        let s1 = symmetrized(&h * &ph_t + r);
        let s1_factor =
            SpdFactor::new(&s1).map_err(|_| Error::InnovationCovSingular { step: k })?;
        let gain = s1_factor.solve(&ph_t.transpose()).transpose();

        x = &x_prior + &gain * &innovation;
        p = (&eye - &gain * &h) * &p_prior;
        symmetrize(&mut p);
        if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k });
        }
        let filtered_residue = data.measurement(k) - model.observe(&x, &u);
        steps.push(FilterStep {
            prior: GaussianBelief::new(x_prior, p_prior),
            posterior: GaussianBelief::new(x.clone(), p.clone()),
            gain,
            innovation,
            filtered_residue,
            s1,
            f,
            h,
        });
    }
    Ok(FilterPass {
        init: init.clone(),
        q: q.clone(),
        r: r.clone(),
        steps,
    })
}

/// Rauch-Tung-Striebel smoothing of a forward pass, including the smoothed
/// initial belief and lag-one covariances.
pub fn rts_smoother(
    model: &SystemModel,
    data: &Dataset,
    pass: &FilterPass,
) -> Result<SmootherPass> {
    let n = pass.len();
    let mut smoothed = alloc::vec![pass.last().posterior.clone(); n + 1];
    let mut gains = alloc::vec![Mat::zeros(0, 0); n];
    for k in (0..n).rev() {
        let post = pass.posterior(k);
        let next = pass.step(k + 1);
        let prior_factor =
            SpdFactor::new(&next.prior.cov).map_err(|_| Error::PriorCovSingular { step: k + 1 })?;
        // G = P Fᵀ P⁻⁻¹, computed as (P⁻⁻¹ F P)ᵀ.
        let gain = prior_factor.solve(&(&next.f * &post.cov)).transpose();
        let ahead = &smoothed[k + 1];
        let mean = &post.mean + &gain * (&ahead.mean - &next.prior.mean);
        let cov =
            symmetrized(&post.cov + &gain * (&ahead.cov - &next.prior.cov) * gain.transpose());
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: k });
        }
        smoothed[k] = GaussianBelief::new(mean, cov);
        gains[k] = gain;
    }
    let smoothed_residue = (1..=n)
        .map(|k| data.measurement(k) - model.observe(&smoothed[k].mean, &data.input(k)))
        .collect();
    let lag_one = lag_one_cov(pass, &gains);
    Ok(SmootherPass {
        smoothed,
        gains,
        lag_one,
        smoothed_residue,
    })
}

/// Lag-one smoothed covariances `P_{k,k−1|N}` for `k = 1..=N` (index `k−1`),
/// built backward from `k = N`.
pub fn lag_one_cov(pass: &FilterPass, gains: &[Mat]) -> Vec<Mat> {
    let n = pass.len();
    let last = pass.last();
    let na = last.posterior.cov.nrows();
    let mut out = alloc::vec![Mat::zeros(na, na); n];
    out[n - 1] =
        (Mat::identity(na, na) - &last.gain * &last.h) * &last.f * &pass.posterior(n - 1).cov;
    for k in (1..n).rev() {
        let p_kk = &pass.posterior(k).cov;
        let f_k = &pass.step(k + 1).f;
        let g_prev_t = gains[k - 1].transpose();
        out[k - 1] = p_kk * &g_prev_t + &gains[k] * (&out[k] - f_k * p_kk) * &g_prev_t;
    }
    out
}

/// Model evaluations along the smoothed and the noise-free trajectories,
/// shared by the noise estimators and the cost functions.
///
/// The noise-free ("dynamical") trajectory starts from the smoothed initial
/// states with the final filtered parameters and is propagated without
/// noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    /// `f(X_{k−1|N})` for `k = 1..=N` at index `k−1`.
    pub f_smoothed: Vec<Vector>,
    /// Transition Jacobian at `X_{k−1|N}`, index `k−1`.
    pub f_jac_smoothed: Vec<Mat>,
    /// Noise-free trajectory `Xd_k` for `k = 0..=N`.
    pub xd: Vec<Vector>,
    /// Transition Jacobian at `Xd_{k−1}`, index `k−1`.
    pub f_jac_dyn: Vec<Mat>,
    /// Measurement Jacobian at `X_{k|N}`, index `k−1`.
    pub h_smoothed: Vec<Mat>,
    /// Measurement Jacobian at `X_{k|k}`, index `k−1`.
    pub h_filtered: Vec<Mat>,
    /// `Z_k − h(Xd_k)`, index `k−1`.
    pub dyn_residue: Vec<Vector>,
}

impl Linearization {
    pub fn new(
        model: &SystemModel,
        data: &Dataset,
        pass: &FilterPass,
        sm: &SmootherPass,
    ) -> Result<Self> {
        let n = pass.len();
        let dt = data.dt();
        let ns = model.n();
        let theta_final = pass.last().posterior.mean.rows(ns, model.p()).into_owned();
        let mut xd0 = sm.smoothed[0].mean.clone();
        xd0.rows_mut(ns, model.p()).copy_from(&theta_final);

        let mut out = Self {
            f_smoothed: Vec::with_capacity(n),
            f_jac_smoothed: Vec::with_capacity(n),
            xd: Vec::with_capacity(n + 1),
            f_jac_dyn: Vec::with_capacity(n),
            h_smoothed: Vec::with_capacity(n),
            h_filtered: Vec::with_capacity(n),
            dyn_residue: Vec::with_capacity(n),
        };
        out.xd.push(xd0);
        for k in 1..=n {
            let u_step = data.step_input(k);
            let t = data.time(k - 1);
            let prev = &sm.smoothed[k - 1].mean;
            out.f_smoothed
                .push(model.propagate_at(prev, &u_step, t, dt, k)?);
            out.f_jac_smoothed
                .push(model.transition_jacobian(prev, &u_step, t, dt, k)?);
            let xd_prev = &out.xd[k - 1];
            out.f_jac_dyn
                .push(model.transition_jacobian(xd_prev, &u_step, t, dt, k)?);
            let xd = model.propagate_at(xd_prev, &u_step, t, dt, k)?;

            let u = data.input(k);
            out.h_smoothed
                .push(model.measurement_jacobian(&sm.smoothed[k].mean, &u, k)?);
            out.h_filtered
                .push(model.measurement_jacobian(&pass.posterior(k).mean, &u, k)?);
            out.dyn_residue
                .push(data.measurement(k) - model.observe(&xd, &u));
            out.xd.push(xd);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Level;

    fn level_data(z: &[f64]) -> Dataset {
        let times = (1..=z.len()).map(|k| k as f64).collect();
        Dataset::new(
            times,
            Mat::from_column_slice(z.len(), 1, z),
            Mat::zeros(z.len(), 0),
        )
        .unwrap()
    }

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn one_step_scalar_update() {
        let model = Level::model(0.0, 0.0, 1.0, 2, 1.0);
        let data = level_data(&[2.0, 2.0]);
        let init = GaussianBelief::new(Vector::zeros(1), scalar(1.0));
        let pass = ekf_forward(&model, &data, &init, &scalar(0.0), &scalar(1.0)).unwrap();
        assert!((pass.posterior(1).mean[0] - 1.0).abs() < 1e-15);
        assert!((pass.posterior(1).cov[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smoother_base_case_is_posterior() {
        let model = Level::model(0.0, 1.0, 1.0, 3, 1.0);
        let data = level_data(&[0.5, -1.0, 2.0]);
        let init = GaussianBelief::new(Vector::zeros(1), scalar(1.0));
        let pass = ekf_forward(&model, &data, &init, &scalar(1.0), &scalar(1.0)).unwrap();
        let sm = rts_smoother(&model, &data, &pass).unwrap();
        assert_eq!(sm.smoothed[3], pass.last().posterior);
        assert_eq!(sm.smoothed.len(), 4);
        assert_eq!(sm.lag_one.len(), 3);
    }

    #[test]
    fn no_update_limit_of_lag_one() {
        let model = Level::model(0.0, 0.5, 1.0, 3, 1.0);
        let data = level_data(&[0.5, -1.0, 2.0]);
        let init = GaussianBelief::new(Vector::zeros(1), scalar(1.0));
        let pass = ekf_forward(&model, &data, &init, &scalar(0.5), &scalar(1e12)).unwrap();
        let sm = rts_smoother(&model, &data, &pass).unwrap();
        let expect = pass.posterior(2).cov[(0, 0)];
        assert!((sm.lag_one[2][(0, 0)] - expect).abs() < 1e-9);
    }
}
