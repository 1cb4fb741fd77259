use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{Dims, Doublet, InputSignal, Plant, SystemModel, TimeBase};
use crate::numerics::{Mat, Vector};

fn diag(values: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_column_slice(values))
}

fn elevator_doublet() -> Doublet {
    Doublet {
        start: 0.5,
        width: 1.0,
        amplitude: 0.02,
    }
}

/// A pure state that never changes: `x_k = x_{k−1}`, measured directly.
/// Has no parameters.
#[derive(Debug, Clone, Copy, Default)]
pub struct Level;

impl Level {
    pub fn model(x0: f64, q: f64, r: f64, samples: usize, dt: f64) -> SystemModel {
        SystemModel {
            name: "level".to_string(),
            plant: Arc::new(Level),
            theta_true: Vector::zeros(0),
            theta_start: None,
            x0_true: Vector::from_element(1, x0),
            input: InputSignal::None { channels: 0 },
            dt,
            samples,
            q_true: diag(&[q]),
            r_true: diag(&[r]),
            substeps: 1,
        }
    }
}

impl Plant for Level {
    fn dims(&self) -> Dims {
        Dims {
            n: 1,
            m: 1,
            p: 0,
            q: 0,
        }
    }
    fn time_base(&self) -> TimeBase {
        TimeBase::Discrete
    }
    fn dynamics(&self, x: &[f64], _theta: &[f64], _u: &[f64], _dt: f64) -> Vector {
        Vector::from_column_slice(x)
    }
    fn measure(&self, x: &[f64], _theta: &[f64], _u: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }
    fn transition_jacobian(&self, _x: &[f64], _theta: &[f64], _u: &[f64], _dt: f64) -> Option<Mat> {
        Some(Mat::identity(1, 1))
    }
    fn measurement_jacobian(&self, _x: &[f64], _theta: &[f64], _u: &[f64]) -> Option<Mat> {
        Some(Mat::identity(1, 1))
    }
    fn direct_channel(&self, state: usize) -> Option<usize> {
        (state == 0).then_some(0)
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        Vec::new()
    }
}

/// `x_k = θ·x_{k−1}`, measured directly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Constant;

impl Plant for Constant {
    fn dims(&self) -> Dims {
        Dims {
            n: 1,
            m: 1,
            p: 1,
            q: 0,
        }
    }
    fn time_base(&self) -> TimeBase {
        TimeBase::Discrete
    }
    fn dynamics(&self, x: &[f64], theta: &[f64], _u: &[f64], _dt: f64) -> Vector {
        Vector::from_element(1, theta[0] * x[0])
    }
    fn measure(&self, x: &[f64], _theta: &[f64], _u: &[f64]) -> Vector {
        Vector::from_element(1, x[0])
    }
    fn transition_jacobian(&self, x: &[f64], theta: &[f64], _u: &[f64], _dt: f64) -> Option<Mat> {
        Some(Mat::from_row_slice(2, 2, &[theta[0], x[0], 0.0, 1.0]))
    }
    fn measurement_jacobian(&self, _x: &[f64], _theta: &[f64], _u: &[f64]) -> Option<Mat> {
        Some(Mat::from_row_slice(1, 2, &[1.0, 0.0]))
    }
    fn direct_channel(&self, state: usize) -> Option<usize> {
        (state == 0).then_some(0)
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        vec!["theta"]
    }
}

/// `x_k = x_{k−1} + θ·dt`, measured directly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ramp;

impl Plant for Ramp {
    fn dims(&self) -> Dims {
        Dims {
            n: 1,
            m: 1,
            p: 1,
            q: 0,
        }
    }
    fn time_base(&self) -> TimeBase {
        TimeBase::Discrete
    }
    fn dynamics(&self, x: &[f64], theta: &[f64], _u: &[f64], dt: f64) -> Vector {
        Vector::from_element(1, x[0] + theta[0] * dt)
    }
    fn measure(&self, x: &[f64], _theta: &[f64], _u: &[f64]) -> Vector {
        Vector::from_element(1, x[0])
    }
    fn transition_jacobian(&self, _x: &[f64], _theta: &[f64], _u: &[f64], dt: f64) -> Option<Mat> {
        Some(Mat::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]))
    }
    fn measurement_jacobian(&self, _x: &[f64], _theta: &[f64], _u: &[f64]) -> Option<Mat> {
        Some(Mat::from_row_slice(1, 2, &[1.0, 0.0]))
    }
    fn direct_channel(&self, state: usize) -> Option<usize> {
        (state == 0).then_some(0)
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        vec!["slope"]
    }
}

/// Spring-mass-damper with a cubic spring term:
/// `ẍ = −k·x − c·ẋ − k3·x³`. Displacement and velocity are measured.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpringMassDamper;

impl Plant for SpringMassDamper {
    fn dims(&self) -> Dims {
        Dims {
            n: 2,
            m: 2,
            p: 3,
            q: 0,
        }
    }
    fn time_base(&self) -> TimeBase {
        TimeBase::Continuous
    }
    fn dynamics(&self, x: &[f64], theta: &[f64], _u: &[f64], _dt: f64) -> Vector {
        let (pos, vel) = (x[0], x[1]);
        Vector::from_vec(vec![
            vel,
            -theta[0] * pos - theta[1] * vel - theta[2] * pos * pos * pos,
        ])
    }
    fn measure(&self, x: &[f64], _theta: &[f64], _u: &[f64]) -> Vector {
        Vector::from_column_slice(&x[..2])
    }
    fn measurement_jacobian(&self, _x: &[f64], _theta: &[f64], _u: &[f64]) -> Option<Mat> {
        let mut h = Mat::zeros(2, 5);
        h[(0, 0)] = 1.0;
        h[(1, 1)] = 1.0;
        Some(h)
    }
    fn direct_channel(&self, state: usize) -> Option<usize> {
        (state < 2).then_some(state)
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        vec!["k", "c", "k3"]
    }
}

/// Linear longitudinal aircraft motion: angle of attack, pitch rate, pitch
/// angle and vertical speed, driven by elevator.
#[derive(Debug, Clone, Copy)]
pub struct Longitudinal {
    pub u0: f64,
}

impl Plant for Longitudinal {
    fn dims(&self) -> Dims {
        Dims {
            n: 4,
            m: 5,
            p: 5,
            q: 1,
        }
    }
    fn time_base(&self) -> TimeBase {
        TimeBase::Continuous
    }
    fn dynamics(&self, x: &[f64], th: &[f64], u: &[f64], _dt: f64) -> Vector {
        let (alpha, q, pitch) = (x[0], x[1], x[2]);
        let de = u[0];
        let (z_a, m_a, m_q, z_de, m_de) = (th[0], th[1], th[2], th[3], th[4]);
        Vector::from_vec(vec![
            z_a * alpha + q - 0.0021 * pitch + z_de * de,
            m_a * alpha + m_q * q + m_de * de,
            q,
            15.67 * alpha - 32.16 * pitch + 8.354 * de,
        ])
    }
    fn measure(&self, x: &[f64], th: &[f64], u: &[f64]) -> Vector {
        let az = self.u0 * (th[0] * x[0] + th[3] * u[0]);
        Vector::from_vec(vec![x[0], x[1], x[2], x[3], az])
    }
    fn measurement_jacobian(&self, x: &[f64], th: &[f64], u: &[f64]) -> Option<Mat> {
        let mut h = Mat::zeros(5, 9);
        for i in 0..4 {
            h[(i, i)] = 1.0;
        }
        h[(4, 0)] = self.u0 * th[0];
        h[(4, 4)] = self.u0 * x[0];
        h[(4, 7)] = self.u0 * u[0];
        Some(h)
    }
    fn direct_channel(&self, state: usize) -> Option<usize> {
        (state < 4).then_some(state)
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![("U0", self.u0)]
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        vec!["Z_alpha", "M_alpha", "M_q", "Z_de", "M_de"]
    }
}

/// Linear lateral-directional aircraft motion: sideslip, roll rate, roll
/// angle and yaw rate, driven by aileron and rudder. Lateral acceleration,
/// roll acceleration and yaw acceleration are measured as well.
#[derive(Debug, Clone, Copy)]
pub struct Lateral {
    pub u0: f64,
}

impl Lateral {
    fn rates(x: &[f64], th: &[f64], u: &[f64]) -> [f64; 4] {
        let (beta, p, phi, r) = (x[0], x[1], x[2], x[3]);
        let (da, dr) = (u[0], u[1]);
        [
            th[0] * beta + th[1] * p + th[2] * phi - r + th[9] * da + th[10] * dr,
            th[3] * beta + th[4] * p + th[5] * r + th[11] * da + th[12] * dr,
            p,
            th[6] * beta + th[7] * p + th[8] * r + th[13] * da + th[14] * dr,
        ]
    }
}

impl Plant for Lateral {
    fn dims(&self) -> Dims {
        Dims {
            n: 4,
            m: 7,
            p: 15,
            q: 2,
        }
    }
    fn time_base(&self) -> TimeBase {
        TimeBase::Continuous
    }
    fn dynamics(&self, x: &[f64], th: &[f64], u: &[f64], _dt: f64) -> Vector {
        Vector::from_column_slice(&Self::rates(x, th, u))
    }
    fn measure(&self, x: &[f64], th: &[f64], u: &[f64]) -> Vector {
        let rates = Self::rates(x, th, u);
        let ay = self.u0 * (th[0] * x[0] + th[9] * u[0] + th[10] * u[1]);
        Vector::from_vec(vec![x[0], x[1], x[2], x[3], ay, rates[1], rates[3]])
    }
    fn direct_channel(&self, state: usize) -> Option<usize> {
        (state < 4).then_some(state)
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![("U0", self.u0)]
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        vec![
            "Y_beta", "Y_p", "Y_phi", "L_beta", "L_p", "L_r", "N_beta", "N_p", "N_r", "Y_da",
            "Y_dr", "L_da", "L_dr", "N_da", "N_dr",
        ]
    }
}

/// Short-period flight-test model with state and sensor biases:
/// angle of attack, pitch rate and pitch angle, plus normal acceleration
/// measured off the centre of gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case1 {
    pub g: f64,
    pub u0: f64,
    pub x_an: f64,
    pub z_theta: f64,
    pub c: f64,
}

impl Default for Case1 {
    fn default() -> Self {
        Self {
            g: 32.2,
            u0: 415.2,
            x_an: -0.01,
            z_theta: 0.00221,
            c: 0.9916,
        }
    }
}

impl Case1 {
    /// Overrides named constants (`g`, `U0`, `x_an`, `Z_theta`, `C`);
    /// returns the first unknown name.
    pub fn with_constants<'a, I>(mut self, values: I) -> Result<Self, &'a str>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        for (name, v) in values {
            match name {
                "g" => self.g = v,
                "U0" => self.u0 = v,
                "x_an" => self.x_an = v,
                "Z_theta" => self.z_theta = v,
                "C" => self.c = v,
                other => return Err(other),
            }
        }
        Ok(self)
    }

    fn rates(&self, x: &[f64], th: &[f64], u: &[f64]) -> [f64; 3] {
        let (alpha, q, pitch) = (x[0], x[1], x[2]);
        let de = u[0];
        [
            th[0] * alpha + q - self.z_theta * pitch + th[3] * de + th[5],
            th[1] * alpha + th[2] * q + th[4] * de + th[6],
            self.c * q + th[7],
        ]
    }
}

impl Plant for Case1 {
    fn dims(&self) -> Dims {
        Dims {
            n: 3,
            m: 4,
            p: 9,
            q: 1,
        }
    }
    fn time_base(&self) -> TimeBase {
        TimeBase::Continuous
    }
    fn dynamics(&self, x: &[f64], th: &[f64], u: &[f64], _dt: f64) -> Vector {
        Vector::from_column_slice(&self.rates(x, th, u))
    }
    fn measure(&self, x: &[f64], th: &[f64], u: &[f64]) -> Vector {
        let q_dot = self.rates(x, th, u)[1];
        let an = -(self.u0 / self.g) * (th[0] * x[0] + th[3] * u[0] + th[5])
            + (self.x_an / self.g) * q_dot
            + th[8];
        Vector::from_vec(vec![x[0], x[1], x[2], an])
    }
    fn direct_channel(&self, state: usize) -> Option<usize> {
        (state < 3).then_some(state)
    }
    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("g", self.g),
            ("U0", self.u0),
            ("x_an", self.x_an),
            ("Z_theta", self.z_theta),
            ("C", self.c),
        ]
    }
    fn parameter_names(&self) -> Vec<&'static str> {
        vec![
            "Z_alpha", "M_alpha", "M_q", "Z_de", "M_de", "Z_0", "M_0", "theta_0", "an_bias",
        ]
    }
}

fn simulated(
    name: &str,
    plant: Arc<dyn Plant>,
    theta: &[f64],
    x0: &[f64],
    input: InputSignal,
    q: &[f64],
    r: &[f64],
) -> SystemModel {
    SystemModel {
        name: name.to_string(),
        plant,
        theta_true: Vector::from_column_slice(theta),
        theta_start: None,
        x0_true: Vector::from_column_slice(x0),
        input,
        dt: 0.1,
        samples: 100,
        q_true: diag(q),
        r_true: diag(r),
        substeps: 1,
    }
}

pub(super) fn constant() -> SystemModel {
    simulated(
        "constant",
        Arc::new(Constant),
        &[1.0],
        &[10.0],
        InputSignal::None { channels: 0 },
        &[0.05],
        &[0.05],
    )
}

pub(super) fn ramp() -> SystemModel {
    simulated(
        "ramp",
        Arc::new(Ramp),
        &[2.0],
        &[10.0],
        InputSignal::None { channels: 0 },
        &[0.05],
        &[0.05],
    )
}

pub(super) fn smd() -> SystemModel {
    let mut model = simulated(
        "smd",
        Arc::new(SpringMassDamper),
        &[4.0, 0.4, 0.6],
        &[1.0, 0.0],
        InputSignal::None { channels: 0 },
        &[0.001, 0.002],
        &[0.001, 0.004],
    );
    // One RK4 step per sample is off by ~2e-6 on the cubic spring.
    model.substeps = 2;
    model
}

pub(super) fn lon() -> SystemModel {
    simulated(
        "lon",
        Arc::new(Longitudinal { u0: 100.0 }),
        &[-0.42, -3.7943, -0.3632, -0.006489, -6.2807],
        &[0.0; 4],
        InputSignal::Doublet(vec![elevator_doublet()]),
        &[0.00005, 0.0001, 0.00005, 0.5],
        &[0.0001, 0.0001, 0.0001, 1.0, 0.1],
    )
}

pub(super) fn lat() -> SystemModel {
    let aileron = elevator_doublet();
    let rudder = Doublet {
        start: aileron.start + 3.0,
        ..aileron
    };
    simulated(
        "lat",
        Arc::new(Lateral { u0: 100.0 }),
        &[
            -0.18, -0.00278, 0.14, -0.097, -5.82, 1.782, 0.0084, -0.665, -0.712, -0.00447, 0.02657,
            16.434, 0.434, -0.428, -2.824,
        ],
        &[0.0; 4],
        InputSignal::Doublet(vec![aileron, rudder]),
        &[0.000005, 0.0002, 0.00005, 0.0001],
        &[0.00001, 0.0001, 0.0001, 0.0001, 0.005, 0.004, 0.001],
    )
}

/// The short-period check case. `theta_true` holds published estimates used
/// to regenerate data; `theta_start` holds the usual starting values.
pub fn case1_model(consts: Case1) -> SystemModel {
    let mut model = simulated(
        "case1",
        Arc::new(consts),
        &[
            -0.4502, -3.192, -0.5003, -0.05197, -6.264, 0.08429, 0.09206, 0.001517, 1.012,
        ],
        &[0.0; 3],
        InputSignal::Doublet(vec![elevator_doublet()]),
        &[0.1876e-6, 0.2408e-6, 0.2293e-6],
        &[0.0025e-6, 0.0022e-6, 0.0031e-6, 328.6067e-6],
    );
    model.theta_start = Some(Vector::from_column_slice(&[
        -0.46, -3.5, -0.47, -0.05, -5.74, 0.08, 0.16, -0.001, 1.0,
    ]));
    model.dt = 0.02;
    model.samples = 352;
    model
}
