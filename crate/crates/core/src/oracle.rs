//! Reference results: Gauss-Newton output-error estimation with its
//! Cramér-Rao bound (no process noise), and the posterior Cramér-Rao bound
//! recursion (with process noise).

use alloc::vec::Vec;

use crate::models::{simulate_truth, Dataset, SimConfig, SystemModel};
use crate::numerics::{fd_step, spd_inverse, symmetrized, Mat, SeededRng, SpdFactor, Vector};
use crate::{Error, Result};

/// How the output-error estimator treats the measurement noise.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseMode {
    /// Re-estimated from the residuals at every iteration.
    Estimate,
    Known(Mat),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrOptions {
    pub max_iterations: usize,
    /// Relative change of the cost that counts as converged.
    pub tolerance: f64,
    /// Step halvings tried when a full step increases the cost.
    pub max_halvings: usize,
}

impl Default for NrOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-5,
            max_halvings: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NrOutput {
    pub theta: Vector,
    /// Inverse of `Σ Sᵀ R⁻¹ S` at the final iterate.
    pub crb: Mat,
    pub r_hat: Mat,
    /// `J = Σ eᵀ R⁻¹ e` per iteration.
    pub j_history: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Noise-free outputs `h(x_k(θ))` for `k = 1..=N` starting from states `x0`.
pub fn simulate_outputs(
    model: &SystemModel,
    data: &Dataset,
    x0: &Vector,
    theta: &Vector,
) -> Result<Vec<Vector>> {
    let dt = data.dt();
    let mut xa = model.augment(x0, theta);
    let mut out = Vec::with_capacity(data.len());
    for k in 1..=data.len() {
        xa = model.propagate_at(&xa, &data.step_input(k), data.time(k - 1), dt, k)?;
        out.push(model.observe(&xa, &data.input(k)));
    }
    Ok(out)
}

fn residuals(
    model: &SystemModel,
    data: &Dataset,
    x0: &Vector,
    theta: &Vector,
) -> Result<Vec<Vector>> {
    Ok(simulate_outputs(model, data, x0, theta)?
        .into_iter()
        .enumerate()
        .map(|(i, y)| data.measurement(i + 1) - y)
        .collect())
}

/// Output sensitivities `∂h/∂θ` by forward differences, one `m × p` matrix
/// per sample.
pub fn output_sensitivities(
    model: &SystemModel,
    data: &Dataset,
    x0: &Vector,
    theta: &Vector,
) -> Result<Vec<Mat>> {
    let base = simulate_outputs(model, data, x0, theta)?;
    let (m, p) = (model.m(), theta.len());
    let mut sens = alloc::vec![Mat::zeros(m, p); data.len()];
    let mut shifted = theta.clone();
    for j in 0..p {
        let h = fd_step(theta[j]);
        shifted[j] = theta[j] + h;
        let out = simulate_outputs(model, data, x0, &shifted)?;
        shifted[j] = theta[j];
        for (k, (yj, y)) in out.iter().zip(&base).enumerate() {
            sens[k].set_column(j, &((yj - y) / h));
        }
    }
    Ok(sens)
}

fn residual_covariance(res: &[Vector]) -> Mat {
    let m = res[0].len();
    let mut acc = Mat::zeros(m, m);
    for r in res {
        acc += r * r.transpose();
    }
    symmetrized(acc / res.len() as f64)
}

fn weighted_cost(res: &[Vector], r_inv: &Mat) -> f64 {
    res.iter().map(|r| r.dot(&(r_inv * r))).sum()
}

/// `J(θ) = Σ eᵀ R⁻¹ e` with a fixed `R⁻¹`.
pub fn output_error_cost(
    model: &SystemModel,
    data: &Dataset,
    x0: &Vector,
    theta: &Vector,
    r_inv: &Mat,
) -> Result<f64> {
    Ok(weighted_cost(&residuals(model, data, x0, theta)?, r_inv))
}

/// Gradient `∂J/∂θ = −2 Σ Sᵀ R⁻¹ e` with forward-difference sensitivities.
pub fn output_error_gradient(
    model: &SystemModel,
    data: &Dataset,
    x0: &Vector,
    theta: &Vector,
    r_inv: &Mat,
) -> Result<Vector> {
    let res = residuals(model, data, x0, theta)?;
    let sens = output_sensitivities(model, data, x0, theta)?;
    let mut g = Vector::zeros(theta.len());
    for (s, e) in sens.iter().zip(&res) {
        g -= s.transpose() * (r_inv * e) * 2.0;
    }
    Ok(g)
}

fn information(sens: &[Mat], res: &[Vector], r_inv: &Mat) -> (Mat, Vector) {
    let p = sens[0].ncols();
    let mut info = Mat::zeros(p, p);
    let mut rhs = Vector::zeros(p);
    for (s, e) in sens.iter().zip(res) {
        let st_rinv = s.transpose() * r_inv;
        info += &st_rinv * s;
        rhs += st_rinv * e;
    }
    (symmetrized(info), rhs)
}

/// Gauss-Newton output-error estimation of `θ` from data without process
/// noise, propagating from the known initial states `x0`.
///
/// Each iteration solves `(Σ SᵀR⁻¹S) Δ = Σ SᵀR⁻¹e` and halves `Δ` while the
/// cost rises. In [`NoiseMode::Estimate`] the next `R` is the residual
/// covariance at the current iterate.
pub fn nr_mmle(
    model: &SystemModel,
    data: &Dataset,
    x0: &Vector,
    theta0: &Vector,
    mode: &NoiseMode,
    opts: &NrOptions,
) -> Result<NrOutput> {
    if theta0.len() != model.p() || x0.len() != model.n() {
        return Err(Error::DimensionMismatch("nr_mmle start vectors".into()));
    }
    let mut theta = theta0.clone();
    let mut res = residuals(model, data, x0, &theta)?;
    let mut r = match mode {
        NoiseMode::Known(r) => r.clone(),
        NoiseMode::Estimate => residual_covariance(&res),
    };
    let mut j_history = Vec::new();
    let mut converged = false;
    let mut iterations_used = 0;
    for it in 1..=opts.max_iterations {
        iterations_used = it;
        let zero_residual = res.iter().all(|e| e.iter().all(|v| *v == 0.0));
        if zero_residual {
            j_history.push(0.0);
            converged = true;
            break;
        }
        let r_inv = spd_inverse(&r).map_err(|_| Error::HessianSingular)?;
        let j = weighted_cost(&res, &r_inv);
        j_history.push(j);
        if let [.., prev, cur] = j_history.as_slice() {
            if (cur - prev).abs() <= opts.tolerance * cur.abs() {
                converged = true;
                break;
            }
        }
        let sens = output_sensitivities(model, data, x0, &theta)?;
        let (info, rhs) = information(&sens, &res, &r_inv);
        let delta = SpdFactor::new(&info)
            .map_err(|_| Error::HessianSingular)?
            .solve_vec(&rhs);

        let mut scale = 1.0;
        let mut trial = &theta + &delta;
        let mut trial_res = residuals(model, data, x0, &trial);
        for _ in 0..opts.max_halvings {
            match &trial_res {
                Ok(tr) if weighted_cost(tr, &r_inv) <= j => break,
                _ => {
                    scale *= 0.5;
                    trial = &theta + &delta * scale;
                    trial_res = residuals(model, data, x0, &trial);
                }
            }
        }
        let trial_res = trial_res?;
        if matches!(mode, NoiseMode::Estimate) {
            r = residual_covariance(&res);
        }
        theta = trial;
        res = trial_res;
    }

    let sens = output_sensitivities(model, data, x0, &theta)?;
    if matches!(mode, NoiseMode::Estimate) {
        r = residual_covariance(&res);
        if r.iter().all(|v| *v == 0.0) {
            // Exact fit: the bound scales with R and vanishes with it.
            let p = theta.len();
            return Ok(NrOutput {
                theta,
                crb: Mat::zeros(p, p),
                r_hat: r,
                j_history,
                iterations_used,
                converged,
            });
        }
    }
    let r_inv = spd_inverse(&r).map_err(|_| Error::HessianSingular)?;
    let (info, _) = information(&sens, &res, &r_inv);
    let crb = spd_inverse(&info).map_err(|_| Error::HessianSingular)?;
    Ok(NrOutput {
        theta,
        crb,
        r_hat: r,
        j_history,
        iterations_used,
        converged,
    })
}

/// Posterior Cramér-Rao bounds on the dynamic states.
#[derive(Debug, Clone, PartialEq)]
pub struct PcrbOutput {
    /// Bound (inverse information) for `k = 0..=N`.
    pub bounds: Vec<Mat>,
    pub ensemble: usize,
}

impl PcrbOutput {
    pub fn last(&self) -> &Mat {
        self.bounds.last().expect("bounds include the initial step")
    }
}

/// Recursive information bound on the dynamic states, with expectations
/// over an ensemble of true trajectories simulated from `cfg`.
///
/// `p0` is the initial state covariance. Member `e` uses the seed
/// `SeededRng::derived(cfg.seed, e)`. A `Q` that is not positive definite
/// gets `1e-12·I` added.
pub fn pcrb_recursion(
    model: &SystemModel,
    theta_true: &Vector,
    cfg: &SimConfig,
    p0: &Mat,
    ensemble: usize,
) -> Result<PcrbOutput> {
    let dims = model.dims();
    let n = dims.n;
    if ensemble == 0 || p0.shape() != (n, n) {
        return Err(Error::DimensionMismatch(
            "pcrb needs an ensemble and an n×n initial covariance".into(),
        ));
    }
    let q_inv = spd_inverse(&cfg.q_true)
        .or_else(|_| spd_inverse(&(&cfg.q_true + Mat::identity(n, n) * 1e-12)))
        .map_err(|_| Error::SingularIncrement { step: 0 })?;
    let r_inv = spd_inverse(&cfg.r_true).map_err(|_| Error::SingularIncrement { step: 0 })?;

    let samples = cfg.samples;
    let mut d11 = alloc::vec![Mat::zeros(n, n); samples];
    let mut f_mean = alloc::vec![Mat::zeros(n, n); samples];
    let mut h_info = alloc::vec![Mat::zeros(n, n); samples];
    let mut truth_model = model.clone();
    truth_model.theta_true = theta_true.clone();
    for e in 0..ensemble {
        let member = SimConfig {
            seed: SeededRng::derived(cfg.seed, e as u64).seed(),
            ..cfg.clone()
        };
        let data = simulate_truth(&truth_model, &member)?;
        let truth = data.truth.as_ref().expect("simulated data carry truth");
        let mut prev = truth.x0.clone();
        for k in 1..=samples {
            let xa_prev = model.augment(&prev, theta_true);
            let f = model.transition_jacobian(
                &xa_prev,
                &data.step_input(k),
                data.time(k - 1),
                data.dt(),
                k,
            )?;
            let fx = f.view((0, 0), (n, n)).into_owned();
            let xk = truth.x.row(k - 1).transpose();
            let h =
                model.measurement_jacobian(&model.augment(&xk, theta_true), &data.input(k), k)?;
            let hx = h.columns(0, n).into_owned();
            d11[k - 1] += fx.transpose() * &q_inv * &fx;
            f_mean[k - 1] += &fx;
            h_info[k - 1] += hx.transpose() * &r_inv * &hx;
            prev = xk;
        }
    }
    let scale = 1.0 / ensemble as f64;
    let p0_reg = if SpdFactor::new(p0).is_ok() {
        p0.clone()
    } else {
        p0 + Mat::identity(n, n) * 1e-12
    };
    let mut info = spd_inverse(&p0_reg).map_err(|_| Error::SingularIncrement { step: 0 })?;
    let mut bounds = Vec::with_capacity(samples + 1);
    bounds.push(spd_inverse(&info).map_err(|_| Error::SingularIncrement { step: 0 })?);
    for k in 1..=samples {
        let a11 = &d11[k - 1] * scale;
        let d12 = (&f_mean[k - 1] * scale).transpose() * &q_inv;
        let d22 = &q_inv + &h_info[k - 1] * scale;
        let inner = SpdFactor::new(&symmetrized(&info + a11))
            .map_err(|_| Error::SingularIncrement { step: k })?;
        info = symmetrized(&d22 - d12.transpose() * inner.solve(&d12));
        bounds.push(spd_inverse(&info).map_err(|_| Error::SingularIncrement { step: k })?);
    }
    Ok(PcrbOutput { bounds, ensemble })
}
