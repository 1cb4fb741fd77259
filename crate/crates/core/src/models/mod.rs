//! System models, control inputs, datasets and truth simulation.
//!
//! Unknown parameters are appended to the state, `X = [x; θ]`, and treated
//! as constants: the augmented dynamics never touch the parameter block.

mod dataset;
mod input;
mod systems;

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::numerics::{rk4_step, scaled_jacobian, Mat, Vector};
use crate::{Error, Result};

pub use dataset::{simulate_truth, Dataset, SimConfig, Truth};
pub use input::{Doublet, InputSignal};
pub use systems::{
    case1_model, Case1, Constant, Lateral, Level, Longitudinal, Ramp, SpringMassDamper,
};

/// Names accepted by [`build_system`].
pub const SYSTEM_NAMES: [&str; 6] = ["constant", "ramp", "smd", "lon", "lat", "case1"];

/// Whether [`Plant::dynamics`] returns a next state or a state derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeBase {
    Discrete,
    Continuous,
}

/// Sizes of a plant: states, measurements, parameters and inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
}

impl Dims {
    /// Augmented state length `n + p`.
    pub fn aug(&self) -> usize {
        self.n + self.p
    }
}

/// Equations of a plant in terms of its own states `x`, parameters `theta`
/// and inputs `u`.
pub trait Plant: Send + Sync {
    fn dims(&self) -> Dims;

    fn time_base(&self) -> TimeBase;

    /// Next state (discrete plants, using `dt`) or `dx/dt` (continuous).
    fn dynamics(&self, x: &[f64], theta: &[f64], u: &[f64], dt: f64) -> Vector;

    fn measure(&self, x: &[f64], theta: &[f64], u: &[f64]) -> Vector;

    /// Augmented discrete transition Jacobian, `(n+p)²`.
    fn transition_jacobian(&self, _x: &[f64], _theta: &[f64], _u: &[f64], _dt: f64) -> Option<Mat> {
        None
    }

    /// Augmented measurement Jacobian, `m × (n+p)`.
    fn measurement_jacobian(&self, _x: &[f64], _theta: &[f64], _u: &[f64]) -> Option<Mat> {
        None
    }

    /// Measurement channel that reads state `state` directly, if any.
    fn direct_channel(&self, _state: usize) -> Option<usize> {
        None
    }

    /// Named constants used by the equations.
    fn constants(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }

    fn parameter_names(&self) -> Vec<&'static str>;
}

/// A plant together with its simulation defaults.
#[derive(Clone)]
pub struct SystemModel {
    pub name: String,
    pub plant: Arc<dyn Plant>,
    pub theta_true: Vector,
    /// Starting parameter values for real data, when the truth is unknown.
    pub theta_start: Option<Vector>,
    pub x0_true: Vector,
    pub input: InputSignal,
    pub dt: f64,
    pub samples: usize,
    pub q_true: Mat,
    pub r_true: Mat,
    /// RK4 substeps per sample for continuous plants.
    pub substeps: usize,
}

impl core::fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("dims", &self.dims())
            .field("theta_true", &self.theta_true.as_slice())
            .finish_non_exhaustive()
    }
}

/// Builds one of the registered systems with its default noise levels.
pub fn build_system(name: &str) -> Result<SystemModel> {
    Ok(match name {
        "constant" => systems::constant(),
        "ramp" => systems::ramp(),
        "smd" => systems::smd(),
        "lon" => systems::lon(),
        "lat" => systems::lat(),
        "case1" => case1_model(Case1::default()),
        other => return Err(Error::UnknownSystem(other.to_string())),
    })
}

impl SystemModel {
    pub fn dims(&self) -> Dims {
        self.plant.dims()
    }

    pub fn n(&self) -> usize {
        self.dims().n
    }

    pub fn m(&self) -> usize {
        self.dims().m
    }

    pub fn p(&self) -> usize {
        self.dims().p
    }

    /// `[x; θ]`.
    pub fn augment(&self, x: &Vector, theta: &Vector) -> Vector {
        let mut out = Vector::zeros(x.len() + theta.len());
        out.rows_mut(0, x.len()).copy_from(x);
        out.rows_mut(x.len(), theta.len()).copy_from(theta);
        out
    }

    /// Noise-free propagation of the augmented state over one sample.
    ///
    /// `step` is only used to label a failure.
    pub fn propagate_at(
        &self,
        xa: &Vector,
        u: &Vector,
        t: f64,
        dt: f64,
        step: usize,
    ) -> Result<Vector> {
        let Dims { n, .. } = self.dims();
        let (x, theta) = xa.as_slice().split_at(n);
        let next = match self.plant.time_base() {
            TimeBase::Discrete => self.plant.dynamics(x, theta, u.as_slice(), dt),
            TimeBase::Continuous => {
                let sub = self.substeps.max(1);
                let h = dt / sub as f64;
                let mut xs = Vector::from_column_slice(x);
                for i in 0..sub {
                    let deriv = |s: &Vector, u: &Vector, _t: f64| {
                        self.plant.dynamics(s.as_slice(), theta, u.as_slice(), h)
                    };
                    xs = rk4_step(deriv, &xs, u, t + i as f64 * h, h)
                        .map_err(|_| Error::NonFiniteState { step })?;
                }
                xs
            }
        };
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step });
        }
        let mut out = xa.clone();
        out.rows_mut(0, n).copy_from(&next);
        Ok(out)
    }

    pub fn propagate(&self, xa: &Vector, u: &Vector, t: f64, dt: f64) -> Result<Vector> {
        self.propagate_at(xa, u, t, dt, 0)
    }

    /// Noise-free measurement `h(X, u)`.
    pub fn observe(&self, xa: &Vector, u: &Vector) -> Vector {
        let (x, theta) = xa.as_slice().split_at(self.n());
        self.plant.measure(x, theta, u.as_slice())
    }

    /// Augmented transition Jacobian; analytic when the plant provides one.
    pub fn transition_jacobian(
        &self,
        xa: &Vector,
        u: &Vector,
        t: f64,
        dt: f64,
        step: usize,
    ) -> Result<Mat> {
        let Dims { n, p, .. } = self.dims();
        let (x, theta) = xa.as_slice().split_at(n);
        if let Some(f) = self.plant.transition_jacobian(x, theta, u.as_slice(), dt) {
            return Ok(f);
        }
        let mut f = self.fd_transition_jacobian(xa, u, t, dt, step)?;
        for i in n..n + p {
            for j in 0..n + p {
                f[(i, j)] = if i == j { 1.0 } else { 0.0 };
            }
        }
        Ok(f)
    }

    /// Forward-difference transition Jacobian, ignoring any analytic form.
    pub fn fd_transition_jacobian(
        &self,
        xa: &Vector,
        u: &Vector,
        t: f64,
        dt: f64,
        step: usize,
    ) -> Result<Mat> {
        let mut failed = false;
        let f = scaled_jacobian(
            |v| match self.propagate_at(v, u, t, dt, step) {
                Ok(next) => next,
                Err(_) => {
                    failed = true;
                    Vector::from_element(v.len(), f64::NAN)
                }
            },
            xa,
        );
        match f {
            Ok(f) if !failed => Ok(f),
            _ => Err(Error::NonFiniteState { step }),
        }
    }

    /// Augmented measurement Jacobian; analytic when the plant provides one.
    pub fn measurement_jacobian(&self, xa: &Vector, u: &Vector, step: usize) -> Result<Mat> {
        let (x, theta) = xa.as_slice().split_at(self.n());
        if let Some(h) = self.plant.measurement_jacobian(x, theta, u.as_slice()) {
            return Ok(h);
        }
        self.fd_measurement_jacobian(xa, u, step)
    }

    /// Forward-difference measurement Jacobian, ignoring any analytic form.
    pub fn fd_measurement_jacobian(&self, xa: &Vector, u: &Vector, step: usize) -> Result<Mat> {
        scaled_jacobian(|v| self.observe(v, u), xa).map_err(|_| Error::NonFiniteState { step })
    }

    /// `(F, H)` at one augmented state.
    pub fn system_jacobians(&self, xa: &Vector, u: &Vector, t: f64, dt: f64) -> Result<(Mat, Mat)> {
        Ok((
            self.transition_jacobian(xa, u, t, dt, 0)?,
            self.measurement_jacobian(xa, u, 0)?,
        ))
    }

    /// Initial state guess when the truth is unknown: the first measurement
    /// for directly measured states, zero otherwise.
    pub fn initial_state_from(&self, z0: &Vector) -> Vector {
        Vector::from_fn(self.n(), |i, _| {
            self.plant.direct_channel(i).map_or(0.0, |c| z0[c])
        })
    }

    pub fn parameter_names(&self) -> Vec<&'static str> {
        self.plant.parameter_names()
    }

    pub fn constants(&self) -> Vec<(&'static str, f64)> {
        self.plant.constants()
    }
}
