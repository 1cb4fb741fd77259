//! TOML configuration. The `[tuning]` table uses the field names of
//! [`TuningConfig`]; enum values are written in snake case.
//!
//! ```toml
//! [tuning]
//! q_method = "dsdt"
//! iterations = 60
//! r_known = [0.05]          # diagonal
//!
//! [tuning.initial]
//! theta_perturb = 0.1
//!
//! [study]
//! system = "smd"
//! q_regime = "positive"
//! runs = 20
//! compare = ["reference", "mt"]
//!
//! [constants]
//! U0 = 415.2
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use kftune_core::tuning::{
    P0Method, QMethod, RMethod, RunsWindow, StructureMask, TuningConfig, Variant,
};
use kftune_core::{Mat, Vector};
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::study::{Method, Regime};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub tuning: TuningSection,
    pub study: StudySection,
    /// Named model constants, e.g. `U0` for the check case.
    pub constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningSection {
    pub p0_method: Option<String>,
    pub p0_mask: Option<String>,
    pub q_method: Option<String>,
    pub q_mask: Option<String>,
    pub q_fixed_value: Option<f64>,
    pub r_method: Option<String>,
    pub r_known: Option<Vec<f64>>,
    pub r_full: Option<bool>,
    pub iterations: Option<usize>,
    pub runs_window: Option<String>,
    pub variant: Option<String>,
    pub initial: InitialSection,
    pub theta_init: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub p0_guess: Option<f64>,
    pub q_guess: Option<f64>,
    pub r_guess: Option<f64>,
    pub theta_perturb: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub system: Option<String>,
    pub q_regime: Option<String>,
    pub runs: Option<usize>,
    pub seed0: Option<u64>,
    pub compare: Option<Vec<String>>,
    pub pcrb_ensemble: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn constants(&self) -> Vec<(&str, f64)> {
        self.constants
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .collect()
    }
}

impl TuningSection {
    /// Overlays the keys that are present onto `base`.
    pub fn apply(&self, mut base: TuningConfig) -> Result<TuningConfig> {
        if let Some(v) = &self.p0_method {
            base.p0_method = parse_p0_method(v)?;
        }
        if let Some(v) = &self.p0_mask {
            base.p0_mask = parse_mask(v)?;
        }
        if let Some(v) = &self.q_method {
            base.q_method = parse_q_method(v)?;
        }
        if let Some(v) = &self.q_mask {
            base.q_mask = parse_mask(v)?;
        }
        if let Some(v) = self.q_fixed_value {
            base.q_fixed_value = v;
        }
        if let Some(v) = &self.r_method {
            base.r_method = parse_r_method(v)?;
        }
        if let Some(v) = &self.r_known {
            base.r_known = Some(Mat::from_diagonal(&Vector::from_column_slice(v)));
        }
        if let Some(v) = self.r_full {
            base.r_full = v;
        }
        if let Some(v) = self.iterations {
            base.iterations = v;
        }
        if let Some(v) = &self.runs_window {
            base.runs_window = match v.as_str() {
                "full" => RunsWindow::Full,
                "last_half" => RunsWindow::LastHalf,
                other => return Err(unknown("runs_window", other)),
            };
        }
        if let Some(v) = &self.variant {
            base.variant = match v.as_str() {
                "reference" => Variant::Reference,
                "gemson" => Variant::Gemson,
                other => return Err(unknown("variant", other)),
            };
        }
        let init = &self.initial;
        base.initial.p0_guess = init.p0_guess.unwrap_or(base.initial.p0_guess);
        base.initial.q_guess = init.q_guess.unwrap_or(base.initial.q_guess);
        base.initial.r_guess = init.r_guess.unwrap_or(base.initial.r_guess);
        base.initial.theta_perturb = init.theta_perturb.unwrap_or(base.initial.theta_perturb);
        if let Some(v) = &self.theta_init {
            base.theta_init = Some(Vector::from_column_slice(v));
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        Ok(base)
    }
}

fn unknown(key: &str, value: &str) -> HarnessError {
    HarnessError::InvalidConfig(format!("unknown {key} `{value}`"))
}

pub fn parse_p0_method(s: &str) -> Result<P0Method> {
    match s {
        "scale_up" => Ok(P0Method::ScaleUp),
        "iim" => Ok(P0Method::Iim),
        "smoothed" => Ok(P0Method::Smoothed),
        other => Err(unknown("p0_method", other)),
    }
}

pub fn parse_mask(s: &str) -> Result<StructureMask> {
    match s {
        "param_diag" => Ok(StructureMask::ParamDiag),
        "state_block" => Ok(StructureMask::StateBlock),
        "diag" => Ok(StructureMask::Diag),
        "full" => Ok(StructureMask::Full),
        "zero" => Ok(StructureMask::Zero),
        other => Err(unknown("mask", other)),
    }
}

pub fn parse_q_method(s: &str) -> Result<QMethod> {
    match s {
        "em" => Ok(QMethod::Em),
        "dsdt" => Ok(QMethod::Dsdt),
        "mt" => Ok(QMethod::Mt),
        "ms" => Ok(QMethod::Ms),
        "fixed" => Ok(QMethod::Fixed),
        other => Err(unknown("q_method", other)),
    }
}

pub fn parse_r_method(s: &str) -> Result<RMethod> {
    match s {
        "em" => Ok(RMethod::Em),
        "ms" => Ok(RMethod::Ms),
        "mt" => Ok(RMethod::Mt),
        "dyn_residue" => Ok(RMethod::DynResidue),
        "known" => Ok(RMethod::Known),
        other => Err(unknown("r_method", other)),
    }
}

pub fn parse_regime(s: &str) -> Result<Regime> {
    match s {
        "zero" => Ok(Regime::Zero),
        "positive" => Ok(Regime::Positive),
        other => Err(unknown("q_regime", other)),
    }
}

pub fn parse_method(s: &str) -> Result<Method> {
    Method::ALL
        .iter()
        .copied()
        .find(|m| m.name() == s)
        .ok_or_else(|| unknown("method", s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_keeps_unset_fields() {
        let file = ConfigFile::parse(
            "[tuning]\nq_method = \"dsdt\"\niterations = 7\n[tuning.initial]\nr_guess = 2.0\n",
        )
        .unwrap();
        let cfg = file
            .tuning
            .apply(TuningConfig::with_process_noise())
            .unwrap();
        assert_eq!(cfg.q_method, QMethod::Dsdt);
        assert_eq!(cfg.iterations, 7);
        assert_eq!(cfg.initial.r_guess, 2.0);
        assert_eq!(cfg.p0_method, P0Method::ScaleUp);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        assert!(ConfigFile::parse("[tuning]\nbogus = 1\n").is_err());
        let file = ConfigFile::parse("[tuning]\nq_method = \"magic\"\n").unwrap();
        assert!(file
            .tuning
            .apply(TuningConfig::zero_process_noise())
            .is_err());
    }
}
