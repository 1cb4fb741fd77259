//! Monte-Carlo studies: repeated simulation and tuning with per-run archives.

use kftune_core::models::{
    build_system, case1_model, simulate_truth, Case1, Dataset, SimConfig, SystemModel,
};
use kftune_core::numerics::autocorr;
use kftune_core::oracle::{nr_mmle, pcrb_recursion, NoiseMode, NrOptions};
use kftune_core::tuning::{
    run_reference_recipe, P0Method, QMethod, RMethod, StructureMask, TuningConfig, Variant,
};
use kftune_core::{Mat, SeededRng, Vector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{parse_method, parse_regime, ConfigFile};
use crate::error::{HarnessError, Result};
use crate::metrics::{compute_metrics, MetricsTable};

/// Whether the simulated data carry process noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Zero,
    Positive,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Zero => "zero",
            Regime::Positive => "positive",
        }
    }

    /// Recipe defaults for this regime.
    pub fn tuning(self) -> TuningConfig {
        match self {
            Regime::Zero => TuningConfig::zero_process_noise(),
            Regime::Positive => TuningConfig::with_process_noise(),
        }
    }
}

/// Tuning variants that can be compared side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Reference,
    /// Filtered-minus-predicted statistics for `R` and, when estimated, a
    /// diagonal `Q` over the whole augmented state.
    Mt,
    /// Filtered-residue `R` and, when estimated, the diagonal of the
    /// final-gain `Q`.
    Ms,
    Gemson,
    /// Smoothed initial covariance, diagonal only.
    EmSmoothedP0,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Reference,
        Method::Mt,
        Method::Ms,
        Method::Gemson,
        Method::EmSmoothedP0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Reference => "reference",
            Method::Mt => "mt",
            Method::Ms => "ms",
            Method::Gemson => "gemson",
            Method::EmSmoothedP0 => "em_smoothed_p0",
        }
    }

    /// `base` adjusted for this variant.
    pub fn configure(self, base: &TuningConfig) -> TuningConfig {
        let mut cfg = base.clone();
        let estimate_q = base.q_method != QMethod::Fixed;
        match self {
            Method::Reference => {}
            Method::Mt => {
                cfg.r_method = RMethod::Mt;
                if estimate_q {
                    cfg.q_method = QMethod::Mt;
                    cfg.q_mask = StructureMask::Diag;
                }
            }
            Method::Ms => {
                cfg.r_method = RMethod::Ms;
                if estimate_q {
                    cfg.q_method = QMethod::Ms;
                    cfg.q_mask = StructureMask::Diag;
                }
            }
            Method::Gemson => cfg.variant = Variant::Gemson,
            Method::EmSmoothedP0 => {
                cfg.p0_method = P0Method::Smoothed;
                cfg.p0_mask = StructureMask::Diag;
            }
        }
        cfg
    }
}

/// Registry model with named constants applied. Only the check case
/// accepts constants.
pub fn build_model(system: &str, constants: &[(&str, f64)]) -> Result<SystemModel> {
    if system == "case1" {
        let consts = Case1::default()
            .with_constants(constants.iter().copied())
            .map_err(|name| {
                HarnessError::InvalidConfig(format!("unknown constant `{name}` for case1"))
            })?;
        return Ok(case1_model(consts));
    }
    if let Some((name, _)) = constants.first() {
        return Err(HarnessError::InvalidConfig(format!(
            "system `{system}` takes no constants (got `{name}`)"
        )));
    }
    Ok(build_system(system)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub system: String,
    pub regime: Regime,
    pub runs: usize,
    /// Base recipe settings; each compared method adjusts a copy.
    pub tuning: TuningConfig,
    /// Run `s` uses seed `seed0 + s`.
    pub seed0: u64,
    pub compare: Vec<Method>,
    pub constants: Vec<(String, f64)>,
    /// Trajectories averaged by the posterior bound (positive regime).
    pub pcrb_ensemble: usize,
    /// Relative half-width of the output-error starting perturbation.
    pub nr_perturb: f64,
}

impl StudyConfig {
    pub fn new(system: &str, regime: Regime) -> Self {
        Self {
            system: system.to_string(),
            regime,
            runs: 50,
            tuning: regime.tuning(),
            seed0: 0,
            compare: vec![Method::Reference],
            constants: Vec::new(),
            pcrb_ensemble: 50,
            nr_perturb: 0.05,
        }
    }

    /// Study described by a config file; `system` and `regime` override the
    /// file when given.
    pub fn from_file(
        file: &ConfigFile,
        system: Option<&str>,
        regime: Option<Regime>,
    ) -> Result<Self> {
        let s = &file.study;
        let system = system
            .map(str::to_string)
            .or_else(|| s.system.clone())
            .ok_or_else(|| HarnessError::InvalidConfig("no system given".into()))?;
        let regime = match (regime, &s.q_regime) {
            (Some(r), _) => r,
            (None, Some(name)) => parse_regime(name)?,
            (None, None) => Regime::Zero,
        };
        let mut study = Self::new(&system, regime);
        study.tuning = file.tuning.apply(regime.tuning())?;
        study.runs = s.runs.unwrap_or(study.runs);
        study.seed0 = s.seed0.unwrap_or(study.seed0);
        study.pcrb_ensemble = s.pcrb_ensemble.unwrap_or(study.pcrb_ensemble);
        if let Some(names) = &s.compare {
            study.compare = names
                .iter()
                .map(|n| parse_method(n))
                .collect::<Result<_>>()?;
        }
        study.constants = file
            .constants
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        Ok(study)
    }

    pub fn model(&self) -> Result<SystemModel> {
        let consts: Vec<(&str, f64)> = self
            .constants
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .collect();
        build_model(&self.system, &consts)
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(HarnessError::InvalidConfig(
                "runs must be at least 1".into(),
            ));
        }
        if self.compare.is_empty() {
            return Err(HarnessError::InvalidConfig("no methods to run".into()));
        }
        Ok(())
    }
}

/// Output-error reference results for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrRecord {
    pub theta: Vec<f64>,
    /// Diagonal of the bound.
    pub crb: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Everything the metrics need from one run of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub run: usize,
    pub seed: u64,
    /// Failure message when the run diverged.
    pub diverged: Option<String>,
    pub theta: Vec<f64>,
    /// Diagonal of the final parameter covariance.
    pub p_theta: Vec<f64>,
    /// Diagonal of the final state covariance.
    pub p_state: Vec<f64>,
    pub r_hat: Vec<f64>,
    /// State diagonal of the final process noise.
    pub q_hat: Vec<f64>,
    /// `J0..=J8` of the last pass; absent where undefined.
    pub costs: Vec<Option<f64>>,
    pub clamp_events: usize,
    /// Smallest per-channel fraction of smoothed-residue lags inside the
    /// white-noise band.
    pub whiteness: Option<f64>,
    pub passes: usize,
    /// Relative change of the noise variances over the last passes; see
    /// [`EQUILIBRIUM_WINDOW`].
    pub drift: Option<f64>,
    pub nr: Option<NrRecord>,
}

/// Per-run records plus the truth needed to recompute every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub system: String,
    pub regime: Regime,
    pub runs: usize,
    pub seed0: u64,
    pub methods: Vec<Method>,
    pub parameter_names: Vec<String>,
    pub theta_true: Vec<f64>,
    pub r_true: Vec<f64>,
    pub q_true: Vec<f64>,
    /// Diagonal of the posterior bound at the last sample.
    pub pcrb: Option<Vec<f64>>,
    pub records: Vec<RunRecord>,
}

impl Archive {
    pub fn n(&self) -> usize {
        self.q_true.len()
    }

    pub fn m(&self) -> usize {
        self.r_true.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archive holds only finite numbers and strings")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
    }

    /// One table per method, in study order.
    pub fn tables(&self) -> Vec<MetricsTable> {
        self.methods
            .iter()
            .map(|m| compute_metrics(self, *m))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub archive: Archive,
    pub tables: Vec<MetricsTable>,
}

impl StudyOutput {
    pub fn diverged_runs(&self) -> usize {
        self.tables.iter().map(|t| t.diverged).sum()
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

const WHITENESS_LAGS: usize = 20;

/// Passes over which a settled run may not move its noise variances by more
/// than [`EQUILIBRIUM_TOLERANCE`].
pub const EQUILIBRIUM_WINDOW: usize = 10;
pub const EQUILIBRIUM_TOLERANCE: f64 = 0.05;

/// Smallest fraction, over channels, of lags `1..=20` whose autocorrelation
/// lies within `±1.96/√N`.
pub fn whiteness_fraction(residues: &[Vector]) -> Option<f64> {
    let samples = residues.len();
    let lags = WHITENESS_LAGS.min(samples.checked_sub(1)?);
    if lags == 0 {
        return None;
    }
    let band = 1.96 / (samples as f64).sqrt();
    let m = residues[0].len();
    let mut worst: Option<f64> = None;
    for c in 0..m {
        let seq: Vec<f64> = residues.iter().map(|r| r[c]).collect();
        let rho = autocorr(&seq, lags).ok()?;
        let inside = rho[1..].iter().filter(|r| r.abs() <= band).count() as f64 / lags as f64;
        worst = Some(worst.map_or(inside, |w: f64| w.min(inside)));
    }
    worst
}

fn output_error_run(
    model: &SystemModel,
    data: &Dataset,
    seed: u64,
    perturb: f64,
) -> Option<NrRecord> {
    let truth = data.truth.as_ref()?;
    let mut rng = SeededRng::derived(seed, 2);
    let theta0 = truth
        .theta
        .map(|t| t * (1.0 + rng.uniform(-perturb, perturb)));
    let out = nr_mmle(
        model,
        data,
        &truth.x0,
        &theta0,
        &NoiseMode::Estimate,
        &NrOptions::default(),
    )
    .ok()?;
    Some(NrRecord {
        theta: out.theta.iter().copied().collect(),
        crb: out.crb.diagonal().iter().copied().collect(),
        r_hat: out.r_hat.diagonal().iter().copied().collect(),
        converged: out.converged,
        iterations: out.iterations_used,
    })
}

fn tuning_run(
    model: &SystemModel,
    data: &Dataset,
    method: Method,
    base: &TuningConfig,
    run: usize,
    seed: u64,
    nr: Option<NrRecord>,
) -> RunRecord {
    let mut cfg = method.configure(base);
    cfg.seed = seed;
    let (n, p) = (model.n(), model.p());
    let mut record = RunRecord {
        method,
        run,
        seed,
        diverged: None,
        theta: Vec::new(),
        p_theta: Vec::new(),
        p_state: Vec::new(),
        r_hat: Vec::new(),
        q_hat: Vec::new(),
        costs: Vec::new(),
        clamp_events: 0,
        whiteness: None,
        passes: 0,
        drift: None,
        nr,
    };
    let res = match run_reference_recipe(model, data, &cfg) {
        Ok(r) => r,
        Err(e) => {
            record.diverged = Some(e.to_string());
            return record;
        }
    };
    let post_cov = &res.final_pass.last().posterior.cov;
    record.theta = res.theta_hat.iter().copied().collect();
    record.p_theta = (0..p).map(|i| res.p_theta[(i, i)]).collect();
    record.p_state = (0..n).map(|i| post_cov[(i, i)]).collect();
    record.r_hat = res.r_hat.diagonal().iter().copied().collect();
    record.q_hat = (0..n).map(|i| res.q_hat[(i, i)]).collect();
    record.costs = res.final_costs().j.iter().map(|v| finite(*v)).collect();
    record.clamp_events = res.clamp_events();
    record.whiteness = whiteness_fraction(&res.final_smoother.smoothed_residue);
    record.passes = res.history.len();
    record.drift = res.equilibrium_drift(EQUILIBRIUM_WINDOW, n);
    let healthy = record
        .theta
        .iter()
        .chain(&record.p_theta)
        .chain(&record.r_hat)
        .all(|v| v.is_finite())
        && record.costs.get(1).copied().flatten().is_some();
    if !healthy {
        record.diverged = Some("non-finite estimates".into());
    }
    record
}

/// State bound at the last sample from an ensemble seeded by `seed0`.
fn state_bound(model: &SystemModel, study: &StudyConfig) -> Option<Vec<f64>> {
    let n = model.n();
    let sim = SimConfig::for_model(model, study.seed0);
    let p0 = Mat::identity(n, n) * study.tuning.initial.p0_guess;
    let out = pcrb_recursion(model, &model.theta_true, &sim, &p0, study.pcrb_ensemble).ok()?;
    Some(out.last().diagonal().iter().copied().collect())
}

/// Runs `study.runs` simulations, tunes each with every compared method and
/// aggregates the metrics.
///
/// Run `s` uses seed `seed0 + s` for both the data and the starting
/// parameters. In the zero regime every run also gets an output-error
/// reference; in the positive regime the state bound is computed once.
pub fn monte_carlo(study: &StudyConfig) -> Result<StudyOutput> {
    study.validate()?;
    let model = study.model()?;
    study.tuning.validate(model.n(), model.p(), model.m())?;
    let per_run: Vec<Result<Vec<RunRecord>>> = (0..study.runs)
        .into_par_iter()
        .map(|run| {
            let seed = study.seed0 + run as u64;
            let mut sim = SimConfig::for_model(&model, seed);
            if study.regime == Regime::Zero {
                sim = sim.without_process_noise();
            }
            let data = simulate_truth(&model, &sim)?;
            let nr = match study.regime {
                Regime::Zero => output_error_run(&model, &data, seed, study.nr_perturb),
                Regime::Positive => None,
            };
            Ok(study
                .compare
                .iter()
                .map(|m| tuning_run(&model, &data, *m, &study.tuning, run, seed, nr.clone()))
                .collect())
        })
        .collect();
    let mut records = Vec::with_capacity(study.runs * study.compare.len());
    for r in per_run {
        records.extend(r?);
    }
    records.sort_by_key(|r| (study.compare.iter().position(|m| *m == r.method), r.run));
    if records.iter().all(|r| r.diverged.is_some()) {
        return Err(HarnessError::AllRunsDiverged);
    }

    let pcrb = match study.regime {
        Regime::Positive => state_bound(&model, study),
        Regime::Zero => None,
    };
    let archive = Archive {
        system: study.system.clone(),
        regime: study.regime,
        runs: study.runs,
        seed0: study.seed0,
        methods: study.compare.clone(),
        parameter_names: model
            .parameter_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        theta_true: model.theta_true.iter().copied().collect(),
        r_true: model.r_true.diagonal().iter().copied().collect(),
        q_true: model.q_true.diagonal().iter().copied().collect(),
        pcrb,
        records,
    };
    let tables = archive.tables();
    Ok(StudyOutput { archive, tables })
}
