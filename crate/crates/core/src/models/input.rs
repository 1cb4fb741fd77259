use alloc::vec::Vec;

use crate::numerics::Vector;
use crate::{Error, Result};

// Absorbs round-off in `k·dt` when comparing against switch times.
const TIME_SLACK: f64 = 1e-9;

/// A symmetric doublet on one input channel: `+amplitude` on
/// `[start, start+width)`, `−amplitude` on `[start+width, start+2·width)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Doublet {
    pub start: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Doublet {
    pub fn value(&self, t: f64) -> f64 {
        let s = t + TIME_SLACK;
        if s < self.start || s >= self.start + 2.0 * self.width {
            0.0
        } else if s < self.start + self.width {
            self.amplitude
        } else {
            -self.amplitude
        }
    }
}

/// Control input applied to a plant.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    /// No excitation on `channels` inputs.
    None { channels: usize },
    /// One doublet per channel.
    Doublet(Vec<Doublet>),
    /// Zero-order hold through `(t, u)` rows sorted by time.
    Tabulated {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl InputSignal {
    pub fn channels(&self) -> usize {
        match self {
            InputSignal::None { channels } => *channels,
            InputSignal::Doublet(d) => d.len(),
            InputSignal::Tabulated { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    pub fn at(&self, t: f64) -> Vector {
        match self {
            InputSignal::None { channels } => Vector::zeros(*channels),
            InputSignal::Doublet(d) => Vector::from_iterator(d.len(), d.iter().map(|c| c.value(t))),
            InputSignal::Tabulated { times, values } => {
                let idx = times
                    .partition_point(|&ti| ti <= t + TIME_SLACK)
                    .saturating_sub(1);
                Vector::from_column_slice(&values[idx])
            }
        }
    }

    /// Checks that amplitudes are finite and a table covers `[t_first, t_last]`.
    pub fn validate(&self, t_first: f64, t_last: f64) -> Result<()> {
        match self {
            InputSignal::None { .. } => Ok(()),
            InputSignal::Doublet(d) => {
                if d.iter()
                    .all(|c| c.amplitude.is_finite() && c.start.is_finite() && c.width > 0.0)
                {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(
                        "doublet must have finite amplitude and positive width".into(),
                    ))
                }
            }
            InputSignal::Tabulated { times, values } => {
                let q = values.first().map_or(0, Vec::len);
                let ok = !times.is_empty()
                    && times.len() == values.len()
                    && values
                        .iter()
                        .all(|r| r.len() == q && r.iter().all(|v| v.is_finite()))
                    && times.windows(2).all(|w| w[0] < w[1])
                    && times[0] <= t_first + TIME_SLACK
                    && *times.last().unwrap() >= t_last - TIME_SLACK;
                if ok {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(
                        "input table must be sorted and cover the time grid".into(),
                    ))
                }
            }
        }
    }
}
