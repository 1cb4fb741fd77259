use alloc::vec::Vec;

use super::{
    apply_structure_mask, clamp_negative_diagonal, estimate_p0, estimate_q, estimate_r,
    IterationRecord, P0Method, QMethod, RMethod, StructureMask, TuningConfig, TuningResult,
    Variant,
};
use crate::costs::{cost_report, CostReport};
use crate::filter::{ekf_forward, rts_smoother, GaussianBelief, Linearization};
use crate::models::{Dataset, SystemModel};
use crate::numerics::{Mat, SeededRng, Vector};
use crate::{Error, Result};

// Gemson variant: stop once J1 moves by less than this between passes.
const GEMSON_COST_TOLERANCE: f64 = 1e-6;

/// Starting parameters: the configured ones, else the truth perturbed by
/// `δ ~ U(±theta_perturb)` when the data carry a truth block, else the
/// model's starting values.
pub fn initial_theta(model: &SystemModel, data: &Dataset, cfg: &TuningConfig) -> Vector {
    if let Some(t) = &cfg.theta_init {
        return t.clone();
    }
    match &data.truth {
        Some(truth) => {
            let mut rng = SeededRng::derived(cfg.seed, 1);
            let spread = cfg.initial.theta_perturb;
            truth
                .theta
                .map(|t| t * (1.0 + rng.uniform(-spread, spread)))
        }
        None => model
            .theta_start
            .clone()
            .unwrap_or_else(|| model.theta_true.clone()),
    }
}

fn state_diag(na: usize, n: usize, value: f64) -> Mat {
    Mat::from_fn(na, na, |i, j| if i == j && i < n { value } else { 0.0 })
}

fn diverged(err: Error, iteration: usize) -> Error {
    match err {
        Error::NonFiniteState { step }
        | Error::InnovationCovSingular { step }
        | Error::PriorCovSingular { step } => Error::FilterDiverged { iteration, step },
        other => other,
    }
}

/// Iterates filter pass, smoothing and statistics updates for
/// `cfg.iterations` passes.
///
/// Each pass updates the initial covariance, `R`, `Q`, the parameters
/// (taken from the last filtered state) and, when the truth is unknown, the
/// initial states (taken from the smoothed initial state).
pub fn run_reference_recipe(
    model: &SystemModel,
    data: &Dataset,
    cfg: &TuningConfig,
) -> Result<TuningResult> {
    let dims = model.dims();
    let (n, p, m) = (dims.n, dims.p, dims.m);
    let na = dims.aug();
    cfg.validate(n, p, m)?;
    if data.m() != m {
        return Err(Error::DimensionMismatch("dataset measurement count".into()));
    }
    let gemson = cfg.variant == Variant::Gemson;
    let (p0_method, p0_mask) = if gemson {
        (P0Method::Iim, StructureMask::Full)
    } else {
        (cfg.p0_method, cfg.p0_mask)
    };

    let given_x0 = data.truth.as_ref().map(|t| t.x0.clone());
    let x0_states = given_x0
        .clone()
        .unwrap_or_else(|| model.initial_state_from(&data.measurement(1)));
    let mut x0 = model.augment(&x0_states, &initial_theta(model, data, cfg));
    let mut p0 = Mat::identity(na, na) * cfg.initial.p0_guess;
    let mut q = match cfg.q_method {
        QMethod::Fixed => state_diag(na, n, cfg.q_fixed_value),
        _ => state_diag(na, n, cfg.initial.q_guess),
    };
    let mut r = match (&cfg.r_known, cfg.r_method) {
        (Some(rk), RMethod::Known) => rk.clone(),
        _ => match (&data.truth, gemson) {
            (Some(truth), true) => &truth.r * 0.9,
            _ => Mat::identity(m, m) * cfg.initial.r_guess,
        },
    };
    let truth_init = data.truth.as_ref().map(|t| model.augment(&t.x0, &t.theta));

    let mut history: Vec<IterationRecord> = Vec::with_capacity(cfg.iterations);
    let mut last = None;
    for iteration in 1..=cfg.iterations {
        let init = GaussianBelief::new(x0.clone(), p0.clone());
        let pass = ekf_forward(model, data, &init, &q, &r).map_err(|e| diverged(e, iteration))?;
        let sm = rts_smoother(model, data, &pass).map_err(|e| diverged(e, iteration))?;
        let lin =
            Linearization::new(model, data, &pass, &sm).map_err(|e| diverged(e, iteration))?;
        let costs = cost_report(&pass, &sm, &lin, n, truth_init.as_ref())
            .unwrap_or_else(|_| CostReport::unavailable(data.len(), m, n));

        let update_r = !gemson || iteration % 2 == 1;
        let update_q = !gemson || iteration % 2 == 0;
        let mut clamp_events = 0;
        p0 = apply_structure_mask(&estimate_p0(p0_method, &pass, &sm, &r)?, p0_mask, n);
        if update_r && cfg.r_method != RMethod::Known {
            let mut est = estimate_r(cfg.r_method, &pass, &sm, &lin, cfg.runs_window)?;
            if !cfg.r_full {
                est = Mat::from_diagonal(&est.diagonal());
            }
            if cfg.r_method == RMethod::Mt {
                clamp_events += clamp_negative_diagonal(&mut est);
            }
            r = est;
        }
        if update_q && cfg.q_method != QMethod::Fixed {
            let mut est = apply_structure_mask(
                &estimate_q(cfg.q_method, &pass, &sm, &lin, cfg.runs_window)?,
                cfg.q_mask,
                n,
            );
            if cfg.q_method == QMethod::Mt {
                clamp_events += clamp_negative_diagonal(&mut est);
            }
            q = est;
        }

        let final_mean = &pass.last().posterior.mean;
        let theta = final_mean.rows(n, p).into_owned();
        history.push(IterationRecord {
            theta: theta.clone(),
            r_diag: pass.r.diagonal(),
            q_diag: pass.q.diagonal(),
            costs,
            clamp_events,
        });
        let x0_next = match &given_x0 {
            Some(x) => x.clone(),
            None => sm.smoothed[0].mean.rows(0, n).into_owned(),
        };
        x0 = model.augment(&x0_next, &theta);

        let stalled = gemson && history.len() >= 2 && {
            let a = history[history.len() - 1].costs.j[1];
            let b = history[history.len() - 2].costs.j[1];
            (a - b).abs() < GEMSON_COST_TOLERANCE
        };
        last = Some((pass, sm));
        if stalled {
            break;
        }
    }

    let (final_pass, final_smoother) = last.expect("at least one iteration");
    let post = &final_pass.last().posterior;
    Ok(TuningResult {
        theta_hat: post.mean.rows(n, p).into_owned(),
        p_theta: post.cov.view((n, n), (p, p)).into_owned(),
        q_hat: q,
        r_hat: r,
        x0_hat: final_pass.init.mean.clone(),
        p0_final: p0,
        history,
        final_pass,
        final_smoother,
    })
}
