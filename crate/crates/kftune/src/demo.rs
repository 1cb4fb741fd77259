//! Repeated filter passes over a constant signal, with and without scaling
//! the initial covariance up by `N` between passes.

use kftune_core::filter::{ekf_forward, GaussianBelief};
use kftune_core::models::{simulate_truth, Dataset, Level, SimConfig};
use kftune_core::{Mat, Vector};
use serde::Serialize;

use crate::error::Result;
use crate::report::format_sig6;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub signal: f64,
    pub r: f64,
    pub samples: usize,
    pub passes: usize,
    pub x0_grid: Vec<f64>,
    pub p0_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            signal: 0.0,
            r: 0.25,
            samples: 100,
            passes: 10,
            x0_grid: vec![-10.0, 0.0, 10.0],
            p0_grid: (-10..=10).step_by(5).map(|e| 10f64.powi(e)).collect(),
            seed: 0,
        }
    }
}

/// One pass from one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoPass {
    pub x0_start: f64,
    pub p0_start: f64,
    pub scaled: bool,
    pub pass: usize,
    /// Final filtered estimate and variance.
    pub x_final: f64,
    pub p_final: f64,
    /// Initial variance carried into the next pass.
    pub p0_next: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoOutput {
    pub data: Dataset,
    pub passes: Vec<DemoPass>,
}

impl DemoOutput {
    pub fn sample_mean(&self) -> f64 {
        self.data.z.column(0).mean()
    }

    /// Passes for one grid point, in order.
    pub fn trajectory(&self, x0: f64, p0: f64, scaled: bool) -> Vec<&DemoPass> {
        self.passes
            .iter()
            .filter(|p| p.x0_start == x0 && p.p0_start == p0 && p.scaled == scaled)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x0_start,p0_start,scaled,pass,x_final,p_final,p0_next\n");
        for p in &self.passes {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                format_sig6(p.x0_start),
                format_sig6(p.p0_start),
                p.scaled,
                p.pass,
                format_sig6(p.x_final),
                format_sig6(p.p_final),
                format_sig6(p.p0_next)
            ));
        }
        out
    }
}

/// Each pass starts from the previous final estimate. Without scaling the
/// next initial variance is the final one; with scaling it is `N` times it.
pub fn p0_scaling_demo(cfg: &DemoConfig) -> Result<DemoOutput> {
    let model = Level::model(cfg.signal, 0.0, cfg.r, cfg.samples, 1.0);
    let data = simulate_truth(&model, &SimConfig::for_model(&model, cfg.seed))?;
    let q = Mat::zeros(1, 1);
    let r = Mat::from_element(1, 1, cfg.r);
    let mut passes = Vec::new();
    for scaled in [false, true] {
        for &x0 in &cfg.x0_grid {
            for &p0 in &cfg.p0_grid {
                let (mut x, mut p) = (x0, p0);
                for pass in 1..=cfg.passes {
                    let init =
                        GaussianBelief::new(Vector::from_element(1, x), Mat::from_element(1, 1, p));
                    let run = ekf_forward(&model, &data, &init, &q, &r)?;
                    let post = &run.last().posterior;
                    let (x_final, p_final) = (post.mean[0], post.cov[(0, 0)]);
                    let p0_next = if scaled {
                        p_final * cfg.samples as f64
                    } else {
                        p_final
                    };
                    passes.push(DemoPass {
                        x0_start: x0,
                        p0_start: p0,
                        scaled,
                        pass,
                        x_final,
                        p_final,
                        p0_next,
                    });
                    x = x_final;
                    p = p0_next;
                }
            }
        }
    }
    Ok(DemoOutput { data, passes })
}
