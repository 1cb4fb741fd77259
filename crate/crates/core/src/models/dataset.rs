use alloc::format;
use alloc::vec::Vec;

use super::SystemModel;
use crate::numerics::{psd_factor, Mat, SeededRng, Vector};
use crate::{Error, Result};

/// Injected sequences and settings behind a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// True states, one row per sample.
    pub x: Mat,
    /// Process noise added at each sample.
    pub w: Mat,
    /// Measurement noise added at each sample.
    pub v: Mat,
    pub theta: Vector,
    pub q: Mat,
    pub r: Mat,
    pub x0: Vector,
}

/// Measurements and inputs on a uniform time grid.
///
/// Samples are numbered `k = 1..=N`; the initial state sits one interval
/// before the first sample. Propagation into sample `k` holds the input
/// recorded at sample `k−1` (the first recorded input for `k = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub times: Vec<f64>,
    /// `N × m`.
    pub z: Mat,
    /// `N × q`.
    pub u: Mat,
    pub truth: Option<Truth>,
}

impl Dataset {
    pub fn new(times: Vec<f64>, z: Mat, u: Mat) -> Result<Self> {
        let n = times.len();
        if n < 2 {
            return Err(Error::DimensionMismatch(
                "a dataset needs at least two samples".into(),
            ));
        }
        if z.nrows() != n || u.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} times but {} measurement rows and {} input rows",
                n,
                z.nrows(),
                u.nrows()
            )));
        }
        let dt = times[1] - times[0];
        let uniform = dt > 0.0
            && times
                .windows(2)
                .all(|w| w[1] > w[0] && ((w[1] - w[0]) - dt).abs() <= 1e-9);
        if !uniform {
            return Err(Error::InvalidConfig(
                "times must be strictly increasing and uniform".into(),
            ));
        }
        if z.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "dataset contains non-finite values".into(),
            ));
        }
        Ok(Self {
            times,
            z,
            u,
            truth: None,
        })
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn m(&self) -> usize {
        self.z.ncols()
    }

    /// Time of sample `k`; `k = 0` is the initial instant.
    pub fn time(&self, k: usize) -> f64 {
        if k == 0 {
            self.times[0] - self.dt()
        } else {
            self.times[k - 1]
        }
    }

    /// Measurement at sample `k ≥ 1`.
    pub fn measurement(&self, k: usize) -> Vector {
        self.z.row(k - 1).transpose()
    }

    /// Input recorded at sample `k ≥ 1`.
    pub fn input(&self, k: usize) -> Vector {
        self.u.row(k - 1).transpose()
    }

    /// Input held while propagating from sample `k−1` into sample `k ≥ 1`.
    pub fn step_input(&self, k: usize) -> Vector {
        self.u.row(k.saturating_sub(2)).transpose()
    }

    /// Copy without the truth block, as real data would arrive.
    pub fn without_truth(&self) -> Self {
        Self {
            truth: None,
            ..self.clone()
        }
    }
}

/// Settings for [`simulate_truth`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub samples: usize,
    pub dt: f64,
    pub q_true: Mat,
    pub r_true: Mat,
    pub seed: u64,
}

impl SimConfig {
    /// The model's own sampling and noise defaults.
    pub fn for_model(model: &SystemModel, seed: u64) -> Self {
        Self {
            samples: model.samples,
            dt: model.dt,
            q_true: model.q_true.clone(),
            r_true: model.r_true.clone(),
            seed,
        }
    }

    /// Same settings with process noise switched off.
    pub fn without_process_noise(mut self) -> Self {
        self.q_true.fill(0.0);
        self
    }
}

/// Simulates a truth trajectory and its noisy measurements.
///
/// Each sample draws `n` process-noise normals and then `m` measurement-noise
/// normals from one generator seeded by `cfg.seed`.
pub fn simulate_truth(model: &SystemModel, cfg: &SimConfig) -> Result<Dataset> {
    let dims = model.dims();
    let (n, m) = (dims.n, dims.m);
    if cfg.q_true.shape() != (n, n) || cfg.r_true.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "noise covariances must be {n}×{n} and {m}×{m}"
        )));
    }
    if cfg.samples < 2 || cfg.dt.is_nan() || cfg.dt <= 0.0 {
        return Err(Error::InvalidConfig(
            "simulation needs N ≥ 2 and dt > 0".into(),
        ));
    }
    if model.input.channels() != dims.q {
        return Err(Error::DimensionMismatch(
            "input channels do not match the plant".into(),
        ));
    }
    let samples = cfg.samples;
    let times: Vec<f64> = (1..=samples).map(|k| k as f64 * cfg.dt).collect();
    model.input.validate(0.0, times[samples - 1])?;
    let mut u = Mat::zeros(samples, dims.q);
    for (i, &t) in times.iter().enumerate() {
        u.row_mut(i).copy_from(&model.input.at(t).transpose());
    }
    let mut data = Dataset::new(times, Mat::zeros(samples, m), u)?;

    let lw = psd_factor(&cfg.q_true);
    let lv = psd_factor(&cfg.r_true);
    let mut rng = SeededRng::new(cfg.seed);
    let mut xs = Mat::zeros(samples, n);
    let mut ws = Mat::zeros(samples, n);
    let mut vs = Mat::zeros(samples, m);
    let mut xa = model.augment(&model.x0_true, &model.theta_true);
    for k in 1..=samples {
        xa = model.propagate_at(&xa, &data.step_input(k), data.time(k - 1), cfg.dt, k)?;
        let w = &lw * rng.normal_vector(n);
        let v = &lv * rng.normal_vector(m);
        for i in 0..n {
            xa[i] += w[i];
        }
        let z = model.observe(&xa, &data.input(k)) + &v;
        xs.row_mut(k - 1).copy_from(&xa.rows(0, n).transpose());
        ws.row_mut(k - 1).copy_from(&w.transpose());
        vs.row_mut(k - 1).copy_from(&v.transpose());
        data.z.row_mut(k - 1).copy_from(&z.transpose());
    }
    if data.z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { step: samples });
    }
    data.truth = Some(Truth {
        x: xs,
        w: ws,
        v: vs,
        theta: model.theta_true.clone(),
        q: cfg.q_true.clone(),
        r: cfg.r_true.clone(),
        x0: model.x0_true.clone(),
    });
    Ok(data)
}
