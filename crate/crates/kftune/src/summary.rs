//! JSON documents written by the single-dataset commands.

use kftune_core::models::SystemModel;
use kftune_core::oracle::{NrOutput, PcrbOutput};
use kftune_core::tuning::TuningResult;
use kftune_core::{Mat, Vector};
use serde::Serialize;

fn vec_of(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn rows_of(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn costs_of(j: &[f64]) -> Vec<Option<f64>> {
    j.iter().map(|v| v.is_finite().then_some(*v)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PassSummary {
    pub theta: Vec<f64>,
    pub r_diag: Vec<f64>,
    pub q_diag: Vec<f64>,
    /// `J0..=J8`.
    pub costs: Vec<Option<f64>>,
    pub clamp_events: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuneSummary {
    pub system: String,
    pub parameter_names: Vec<String>,
    pub theta: Vec<f64>,
    pub p_theta: Vec<Vec<f64>>,
    pub r_hat: Vec<Vec<f64>>,
    pub q_hat: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub p0: Vec<Vec<f64>>,
    pub costs: Vec<Option<f64>>,
    pub normalized_innovation: Vec<f64>,
    pub clamp_events: usize,
    pub history: Vec<PassSummary>,
}

impl TuneSummary {
    pub fn new(model: &SystemModel, res: &TuningResult) -> Self {
        let report = res.final_costs();
        Self {
            system: model.name.clone(),
            parameter_names: model
                .parameter_names()
                .iter()
                .map(|s| s.to_string())
                .collect(),
            theta: vec_of(&res.theta_hat),
            p_theta: rows_of(&res.p_theta),
            r_hat: rows_of(&res.r_hat),
            q_hat: rows_of(&res.q_hat),
            x0: vec_of(&res.x0_hat),
            p0: rows_of(&res.p0_final),
            costs: costs_of(&report.j),
            normalized_innovation: report.normalized_innovation.clone(),
            clamp_events: res.clamp_events(),
            history: res
                .history
                .iter()
                .map(|h| PassSummary {
                    theta: vec_of(&h.theta),
                    r_diag: vec_of(&h.r_diag),
                    q_diag: vec_of(&h.q_diag),
                    costs: costs_of(&h.costs.j),
                    clamp_events: h.clamp_events,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NrSummary {
    pub system: String,
    pub theta: Vec<f64>,
    pub crb: Vec<Vec<f64>>,
    pub r_hat: Vec<Vec<f64>>,
    pub j_history: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl NrSummary {
    pub fn new(model: &SystemModel, out: &NrOutput) -> Self {
        Self {
            system: model.name.clone(),
            theta: vec_of(&out.theta),
            crb: rows_of(&out.crb),
            r_hat: rows_of(&out.r_hat),
            j_history: out.j_history.clone(),
            iterations_used: out.iterations_used,
            converged: out.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PcrbSummary {
    pub system: String,
    pub ensemble: usize,
    /// Diagonal of the bound for `k = 0..=N`.
    pub bound_diag: Vec<Vec<f64>>,
}

impl PcrbSummary {
    pub fn new(model: &SystemModel, out: &PcrbOutput) -> Self {
        Self {
            system: model.name.clone(),
            ensemble: out.ensemble,
            bound_diag: out
                .bounds
                .iter()
                .map(|b| b.diagonal().iter().copied().collect())
                .collect(),
        }
    }
}
