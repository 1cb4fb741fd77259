//! Estimators for the filter statistics and the iterative tuning recipe.

mod estimators;
mod recipe;

use alloc::vec::Vec;

use crate::costs::CostReport;
use crate::filter::{FilterPass, SmootherPass};
use crate::numerics::{Mat, Vector};
use crate::{Error, Result};

pub use estimators::{
    apply_structure_mask, clamp_negative_diagonal, em_second_order, estimate_p0, estimate_q,
    estimate_r, window_range,
};
pub use recipe::{initial_theta, run_reference_recipe};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P0Method {
    /// `N·P_{N|N}`.
    ScaleUp,
    /// Inverse of the averaged measurement information.
    Iim,
    /// Smoothed initial covariance `P_{0|N}`.
    Smoothed,
}

/// Which entries of an augmented `(n+p)²` matrix are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureMask {
    /// Diagonal of the parameter block only.
    ParamDiag,
    /// Diagonal of the dynamic-state block only.
    StateBlock,
    Diag,
    Full,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QMethod {
    /// Expectation-maximisation around the smoothed trajectory.
    Em,
    /// Smoothed states relative to the noise-free trajectory.
    Dsdt,
    /// Filtered-minus-predicted state corrections.
    Mt,
    /// Final gain applied to the innovation covariance.
    Ms,
    /// Kept at `q_fixed_value` on the state diagonal.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RMethod {
    /// Smoothed residues plus smoothed-state spread.
    Em,
    /// Filtered residues plus filtered-state spread.
    Ms,
    /// Innovations minus predicted-state spread.
    Mt,
    /// Residues of the noise-free trajectory.
    DynResidue,
    /// Kept at `r_known`.
    Known,
}

/// Samples used by the noise statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunsWindow {
    Full,
    /// Samples `N/2+1..=N`.
    LastHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Reference,
    /// IIM initial covariance, `R` started at 90% of the truth, `R` and `Q`
    /// updated on alternate passes, stop once `J1` changes by less than
    /// `1e-6`.
    Gemson,
}

/// Starting guesses for the first pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    pub p0_guess: f64,
    pub q_guess: f64,
    pub r_guess: f64,
    /// Relative half-width of the uniform parameter perturbation.
    pub theta_perturb: f64,
}

impl Default for InitialGuess {
    fn default() -> Self {
        Self {
            p0_guess: 0.1,
            q_guess: 0.1,
            r_guess: 0.5,
            theta_perturb: 0.20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningConfig {
    pub p0_method: P0Method,
    pub p0_mask: StructureMask,
    pub q_method: QMethod,
    pub q_mask: StructureMask,
    pub q_fixed_value: f64,
    pub r_method: RMethod,
    pub r_known: Option<Mat>,
    /// Keep the full estimated `R` instead of its diagonal.
    pub r_full: bool,
    pub iterations: usize,
    pub runs_window: RunsWindow,
    pub variant: Variant,
    pub initial: InitialGuess,
    /// Explicit starting parameters; otherwise see [`initial_theta`].
    pub theta_init: Option<Vector>,
    /// Seed for the starting-parameter perturbation.
    pub seed: u64,
}

impl TuningConfig {
    /// Output-error setting: `Q` pinned near zero, 20 passes.
    pub fn zero_process_noise() -> Self {
        Self {
            p0_method: P0Method::ScaleUp,
            p0_mask: StructureMask::ParamDiag,
            q_method: QMethod::Fixed,
            q_mask: StructureMask::StateBlock,
            q_fixed_value: 1e-10,
            r_method: RMethod::Em,
            r_known: None,
            r_full: false,
            iterations: 20,
            runs_window: RunsWindow::Full,
            variant: Variant::Reference,
            initial: InitialGuess::default(),
            theta_init: None,
            seed: 0,
        }
    }

    /// Process-noise setting: `Q` by expectation-maximisation, 100 passes.
    pub fn with_process_noise() -> Self {
        Self {
            q_method: QMethod::Em,
            iterations: 100,
            ..Self::zero_process_noise()
        }
    }

    pub fn validate(&self, n: usize, p: usize, m: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if matches!(self.q_mask, StructureMask::ParamDiag | StructureMask::Zero)
            && self.q_method != QMethod::Fixed
        {
            return Err(Error::InvalidConfig(
                "Q mask must keep the state block".into(),
            ));
        }
        if self.r_method == RMethod::Known {
            match &self.r_known {
                Some(r) if r.shape() == (m, m) => {}
                _ => {
                    return Err(Error::InvalidConfig(
                        "r_method known needs an m×m r_known".into(),
                    ))
                }
            }
        }
        if let Some(t) = &self.theta_init {
            if t.len() != p {
                return Err(Error::InvalidConfig(
                    "theta_init has the wrong length".into(),
                ));
            }
        }
        if n == 0 {
            return Err(Error::InvalidConfig("model has no dynamic states".into()));
        }
        Ok(())
    }
}

/// Record of one recipe pass.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// `Θ_{N|N}` of this pass.
    pub theta: Vector,
    /// Diagonal of the `R` used in this pass.
    pub r_diag: Vector,
    /// Diagonal of the `Q` used in this pass.
    pub q_diag: Vector,
    pub costs: CostReport,
    /// Negative variances flipped positive after this pass.
    pub clamp_events: usize,
}

#[derive(Debug, Clone)]
pub struct TuningResult {
    pub theta_hat: Vector,
    /// Parameter block of `P_{N|N}`.
    pub p_theta: Mat,
    pub q_hat: Mat,
    pub r_hat: Mat,
    /// Augmented initial state of the final pass.
    pub x0_hat: Vector,
    /// Initial covariance produced by the final pass.
    pub p0_final: Mat,
    pub history: Vec<IterationRecord>,
    pub final_pass: FilterPass,
    pub final_smoother: SmootherPass,
}

impl TuningResult {
    pub fn clamp_events(&self) -> usize {
        self.history.iter().map(|h| h.clamp_events).sum()
    }

    pub fn final_costs(&self) -> &CostReport {
        &self
            .history
            .last()
            .expect("recipe runs at least one pass")
            .costs
    }

    /// Largest relative change of a noise variance (diagonals of `R` and the
    /// state block of `Q`) over the last `window` passes. `None` when fewer
    /// passes ran. Zero at statistical equilibrium.
    pub fn equilibrium_drift(&self, window: usize, n: usize) -> Option<f64> {
        let last = self.history.len().checked_sub(1)?;
        let first = &self.history[last.checked_sub(window)?];
        let last = &self.history[last];
        let rel = |a: f64, b: f64| match (a - b).abs() / b.abs() {
            d if d.is_nan() => {
                if a == b {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            d => d,
        };
        let r = first
            .r_diag
            .iter()
            .zip(last.r_diag.iter())
            .map(|(a, b)| rel(*a, *b));
        let q = first
            .q_diag
            .iter()
            .zip(last.q_diag.iter())
            .take(n)
            .map(|(a, b)| rel(*a, *b));
        Some(r.chain(q).fold(0.0, f64::max))
    }
}
