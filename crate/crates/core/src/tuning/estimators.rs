use core::ops::RangeInclusive;

use super::{P0Method, QMethod, RMethod, RunsWindow, StructureMask};
use crate::filter::{FilterPass, Linearization, SmootherPass};
use crate::numerics::{spd_inverse, symmetrized, Mat};
use crate::{Error, Result};

/// Sample numbers covered by `window` for a pass of `n` samples.
pub fn window_range(window: RunsWindow, n: usize) -> RangeInclusive<usize> {
    match window {
        RunsWindow::Full => 1..=n,
        RunsWindow::LastHalf => (n / 2 + 1)..=n,
    }
}

/// Conditional spread of the smoothed one-step transition error:
/// `P_k + F P_{k−1} Fᵀ − L Fᵀ − F Lᵀ` with `L = P_{k,k−1|N}`.
pub fn em_second_order(p_k: &Mat, p_prev: &Mat, f: &Mat, lag: &Mat) -> Mat {
    let lf_t = lag * f.transpose();
    p_k + f * p_prev * f.transpose() - &lf_t - lf_t.transpose()
}

/// Measurement noise covariance from one smoothed pass, before any masking.
pub fn estimate_r(
    method: RMethod,
    pass: &FilterPass,
    sm: &SmootherPass,
    lin: &Linearization,
    window: RunsWindow,
) -> Result<Mat> {
    let m = pass.r.nrows();
    if method == RMethod::Known {
        return Ok(pass.r.clone());
    }
    let range = window_range(window, pass.len());
    let count = range.clone().count() as f64;
    let mut acc = Mat::zeros(m, m);
    for k in range {
        let i = k - 1;
        let step = pass.step(k);
        let term = match method {
            RMethod::Em => {
                let r = &sm.smoothed_residue[i];
                let h = &lin.h_smoothed[i];
                r * r.transpose() + h * &sm.smoothed[k].cov * h.transpose()
            }
            RMethod::Ms => {
                let r = &step.filtered_residue;
                let h = &lin.h_filtered[i];
                r * r.transpose() + h * &step.posterior.cov * h.transpose()
            }
            RMethod::Mt => {
                let v = &step.innovation;
                v * v.transpose() - &step.h * &step.prior.cov * step.h.transpose()
            }
            RMethod::DynResidue => {
                let e = &lin.dyn_residue[i];
                e * e.transpose()
            }
            RMethod::Known => unreachable!(),
        };
        if term.shape() != (m, m) {
            return Err(Error::DimensionMismatch("R estimate term".into()));
        }
        acc += term;
    }
    Ok(symmetrized(acc / count))
}

/// Augmented process noise covariance from one smoothed pass, before masking.
pub fn estimate_q(
    method: QMethod,
    pass: &FilterPass,
    sm: &SmootherPass,
    lin: &Linearization,
    window: RunsWindow,
) -> Result<Mat> {
    let na = pass.q.nrows();
    let range = window_range(window, pass.len());
    let count = range.clone().count() as f64;
    let acc = match method {
        QMethod::Fixed => return Ok(pass.q.clone()),
        QMethod::Ms => {
            let m = pass.r.nrows();
            let mut cov = Mat::zeros(m, m);
            for k in range {
                let v = &pass.step(k).innovation;
                cov += v * v.transpose();
            }
            let gain = &pass.last().gain;
            gain * (cov / count) * gain.transpose()
        }
        QMethod::Em | QMethod::Dsdt | QMethod::Mt => {
            let mut acc = Mat::zeros(na, na);
            for k in range {
                let i = k - 1;
                let term = match method {
                    QMethod::Em => {
                        let w = &sm.smoothed[k].mean - &lin.f_smoothed[i];
                        let f = &lin.f_jac_smoothed[i];
                        &w * w.transpose()
                            + em_second_order(
                                &sm.smoothed[k].cov,
                                &sm.smoothed[k - 1].cov,
                                f,
                                &sm.lag_one[i],
                            )
                    }
                    QMethod::Dsdt => {
                        let fd = &lin.f_jac_dyn[i];
                        let w = &sm.smoothed[k].mean
                            - &lin.xd[k]
                            - fd * (&sm.smoothed[k - 1].mean - &lin.xd[k - 1]);
                        &w * w.transpose()
                            + em_second_order(
                                &sm.smoothed[k].cov,
                                &sm.smoothed[k - 1].cov,
                                fd,
                                &sm.lag_one[i],
                            )
                    }
                    _ => {
                        let step = pass.step(k);
                        let w = &step.posterior.mean - &step.prior.mean;
                        &w * w.transpose()
                            - (&step.f * &step.prior.cov * step.f.transpose() - &step.posterior.cov)
                    }
                };
                acc += term;
            }
            acc / count
        }
    };
    if acc.shape() != (na, na) {
        return Err(Error::DimensionMismatch("Q estimate shape".into()));
    }
    Ok(symmetrized(acc))
}

/// Initial covariance for the next pass, before masking.
pub fn estimate_p0(method: P0Method, pass: &FilterPass, sm: &SmootherPass, r: &Mat) -> Result<Mat> {
    match method {
        P0Method::ScaleUp => Ok(&pass.last().posterior.cov * pass.len() as f64),
        P0Method::Smoothed => Ok(sm.smoothed[0].cov.clone()),
        P0Method::Iim => {
            let r_inv = spd_inverse(r).map_err(|_| Error::SingularInformation)?;
            let na = pass.init.cov.nrows();
            let mut info = Mat::zeros(na, na);
            for step in &pass.steps {
                let hf = &step.h * &step.f;
                info += hf.transpose() * &r_inv * &hf;
            }
            info /= pass.len() as f64;
            spd_inverse(&symmetrized(info)).map_err(|_| Error::SingularInformation)
        }
    }
}

/// Keeps the entries selected by `mask`; `n` is the dynamic-state count.
pub fn apply_structure_mask(mtx: &Mat, mask: StructureMask, n: usize) -> Mat {
    let size = mtx.nrows();
    match mask {
        StructureMask::Full => mtx.clone(),
        StructureMask::Zero => Mat::zeros(size, size),
        StructureMask::Diag => Mat::from_diagonal(&mtx.diagonal()),
        StructureMask::ParamDiag => {
            Mat::from_fn(
                size,
                size,
                |i, j| if i == j && i >= n { mtx[(i, j)] } else { 0.0 },
            )
        }
        StructureMask::StateBlock => {
            Mat::from_fn(
                size,
                size,
                |i, j| if i == j && i < n { mtx[(i, j)] } else { 0.0 },
            )
        }
    }
}

/// Replaces negative diagonal entries by their magnitude and returns how
/// many were flipped.
pub fn clamp_negative_diagonal(mtx: &mut Mat) -> usize {
    let mut flipped = 0;
    for i in 0..mtx.nrows() {
        if mtx[(i, i)] < 0.0 {
            mtx[(i, i)] = -mtx[(i, i)];
            flipped += 1;
        }
    }
    flipped
}
