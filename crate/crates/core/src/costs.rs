//! Generalised likelihood costs `J0`–`J8` built from a smoothed pass.
//!
//! | cost | residual | weight |
//! |------|----------|--------|
//! | J1 | innovation | `H P_{k|k−1} Hᵀ + R` |
//! | J2 | filtered residue | `R − H P_{k|k} Hᵀ` |
//! | J3 | smoothed residue | `R − H P_{k|N} Hᵀ` |
//! | J4 | noise-free trajectory residue | none |
//! | J5 | J1 plus `ln det` of its weight | |
//! | J6 | smoothed transition error | `Q −` its conditional spread |
//! | J7 | same about the noise-free trajectory | |
//! | J8 | filter state correction | `P_{k|k−1} − P_{k|k}` |
//!
//! J6–J8 are evaluated on the dynamic states only; the parameter block of
//! their weights is structurally singular. Each cost is averaged over `N`.

use alloc::vec::Vec;

use crate::filter::{FilterPass, Linearization, SmootherPass};
use crate::numerics::{Mat, SpdFactor, Vector};
use crate::tuning::em_second_order;
use crate::{Error, Result};

// Weights with an eigenvalue below this fraction of their trace are
// regularized by the same amount on the diagonal.
const REGULARIZATION: f64 = 1e-12;

/// What happened to a weight matrix before it could be inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightIssue {
    /// Near-singular; a small multiple of the identity was added.
    Regularized,
    /// Not positive definite even after regularization; the signed
    /// quadratic form was used.
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightFlag {
    pub weight: &'static str,
    pub step: usize,
    pub issue: WeightIssue,
}

/// Cost values for one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    /// `J0..=J8`; `J0` is NaN unless the true initial state is known.
    pub j: [f64; 9],
    /// Mean of `ν_i² / S1_ii` per measurement channel.
    pub normalized_innovation: Vec<f64>,
    pub samples: usize,
    pub m: usize,
    pub n: usize,
    pub flags: Vec<WeightFlag>,
}

impl CostReport {
    /// Placeholder for a pass whose costs could not be formed.
    pub fn unavailable(samples: usize, m: usize, n: usize) -> Self {
        Self {
            j: [f64::NAN; 9],
            normalized_innovation: alloc::vec![f64::NAN; m],
            samples,
            m,
            n,
            flags: Vec::new(),
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.j[index]
    }

    pub fn count(&self, issue: WeightIssue) -> usize {
        self.flags.iter().filter(|f| f.issue == issue).count()
    }
}

struct Weighted {
    value: f64,
    log_det: f64,
}

fn weighted(
    w: Mat,
    e: &Vector,
    weight: &'static str,
    step: usize,
    flags: &mut Vec<WeightFlag>,
) -> Result<Weighted> {
    let mut w = crate::numerics::symmetrized(w);
    let scale = REGULARIZATION * w.trace().abs();
    if let Ok(f) = SpdFactor::new(&w) {
        // 1/tr(W⁻¹) bounds the smallest eigenvalue from below.
        let needs_eig = 1.0 / f.inverse().trace() < scale;
        if !needs_eig || crate::numerics::min_eigenvalue(&w) >= scale {
            return Ok(Weighted {
                value: f.quad_form(e),
                log_det: f.log_det(),
            });
        }
    }
    w += Mat::identity(w.nrows(), w.nrows()) * scale;
    flags.push(WeightFlag {
        weight,
        step,
        issue: WeightIssue::Regularized,
    });
    if let Ok(f) = SpdFactor::new(&w) {
        return Ok(Weighted {
            value: f.quad_form(e),
            log_det: f.log_det(),
        });
    }
    flags.push(WeightFlag {
        weight,
        step,
        issue: WeightIssue::Indefinite,
    });
    let lu = w.clone().lu();
    let sol = lu.solve(e).ok_or(Error::WeightSingular { weight, step })?;
    let det = lu.determinant();
    if !sol.iter().all(|v| v.is_finite()) || det == 0.0 {
        return Err(Error::WeightSingular { weight, step });
    }
    Ok(Weighted {
        value: e.dot(&sol),
        log_det: num_traits::Float::ln(det.abs()),
    })
}

fn state_block(m: &Mat, n: usize) -> Mat {
    m.view((0, 0), (n, n)).into_owned()
}

fn state_part(v: &Vector, n: usize) -> Vector {
    v.rows(0, n).into_owned()
}

/// All costs for one smoothed pass. `truth_init` is the true augmented
/// initial state, when known.
pub fn cost_report(
    pass: &FilterPass,
    sm: &SmootherPass,
    lin: &Linearization,
    n: usize,
    truth_init: Option<&Vector>,
) -> Result<CostReport> {
    let samples = pass.len();
    let m = pass.r.nrows();
    let r = &pass.r;
    let q = &pass.q;
    let mut flags = Vec::new();
    let mut j = [0.0; 9];
    let mut nis = alloc::vec![0.0; m];

    j[0] = match truth_init {
        Some(xt) => {
            let p0 = &pass.init.cov;
            let keep: Vec<usize> = (0..p0.nrows()).filter(|&i| p0[(i, i)] > 0.0).collect();
            if keep.is_empty() {
                0.0
            } else {
                let sub = Mat::from_fn(keep.len(), keep.len(), |a, b| p0[(keep[a], keep[b])]);
                let d = Vector::from_fn(keep.len(), |a, _| pass.init.mean[keep[a]] - xt[keep[a]]);
                0.5 * weighted(sub, &d, "P0", 0, &mut flags)?.value
            }
        }
        None => f64::NAN,
    };

    for k in 1..=samples {
        let i = k - 1;
        let step = pass.step(k);
        let nu = &step.innovation;
        let s1 = weighted(step.s1.clone(), nu, "S1", k, &mut flags)?;
        j[1] += s1.value;
        j[5] += s1.value + s1.log_det;
        for c in 0..m {
            nis[c] += nu[c] * nu[c] / step.s1[(c, c)];
        }

        let hf = &lin.h_filtered[i];
        let s2 = r - hf * &step.posterior.cov * hf.transpose();
        j[2] += weighted(s2, &step.filtered_residue, "S2", k, &mut flags)?.value;

        let hs = &lin.h_smoothed[i];
        let s3 = r - hs * &sm.smoothed[k].cov * hs.transpose();
        j[3] += weighted(s3, &sm.smoothed_residue[i], "S3", k, &mut flags)?.value;

        j[4] += lin.dyn_residue[i].norm_squared();

        let p_k = &sm.smoothed[k].cov;
        let p_prev = &sm.smoothed[k - 1].cov;
        let lag = &sm.lag_one[i];

        let f = &lin.f_jac_smoothed[i];
        let w1 = &sm.smoothed[k].mean - &lin.f_smoothed[i];
        let big_w1 = q - em_second_order(p_k, p_prev, f, lag);
        j[6] += weighted(
            state_block(&big_w1, n),
            &state_part(&w1, n),
            "W1",
            k,
            &mut flags,
        )?
        .value;

        let fd = &lin.f_jac_dyn[i];
        let w2 =
            &sm.smoothed[k].mean - &lin.xd[k] - fd * (&sm.smoothed[k - 1].mean - &lin.xd[k - 1]);
        let big_w2 = q - em_second_order(p_k, p_prev, fd, lag);
        j[7] += weighted(
            state_block(&big_w2, n),
            &state_part(&w2, n),
            "W2",
            k,
            &mut flags,
        )?
        .value;

        let w3 = &step.posterior.mean - &step.prior.mean;
        let big_w3 = &step.prior.cov - &step.posterior.cov;
        j[8] += weighted(
            state_block(&big_w3, n),
            &state_part(&w3, n),
            "W3",
            k,
            &mut flags,
        )?
        .value;
    }
    let scale = 1.0 / samples as f64;
    for v in j.iter_mut().skip(1) {
        *v *= scale;
    }
    for v in nis.iter_mut() {
        *v *= scale;
    }
    Ok(CostReport {
        j,
        normalized_innovation: nis,
        samples,
        m,
        n,
        flags,
    })
}
