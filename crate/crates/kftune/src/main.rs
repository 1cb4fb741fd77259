use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use kftune::config::{parse_method, ConfigFile};
use kftune::demo::{p0_scaling_demo, DemoConfig};
use kftune::io::{ingest_csv, ingest_with_truth, truth_path, write_dataset, CsvSchema};
use kftune::report::{emit_report, Format, Report};
use kftune::study::build_model;
use kftune::summary::{NrSummary, PcrbSummary, TuneSummary};
use kftune::{monte_carlo, HarnessError, Method, Regime, StudyConfig};
use kftune_core::models::{simulate_truth, Dataset, SimConfig, SystemModel};
use kftune_core::oracle::{nr_mmle, pcrb_recursion, NoiseMode, NrOptions};
use kftune_core::tuning::{run_reference_recipe, TuningConfig};
use kftune_core::Mat;

#[derive(Parser)]
#[command(
    name = "kftune",
    version,
    about = "Tune extended Kalman filter statistics and check them against reference bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Zero,
    Positive,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Zero => Regime::Zero,
            RegimeArg::Positive => Regime::Positive,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset (and its truth sidecar) from a registry system.
    Simulate {
        #[arg(long)]
        system: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "positive")]
        regime: RegimeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the tuning recipe on one dataset.
    Tune {
        #[arg(long)]
        system: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "positive")]
        regime: RegimeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated simulation and tuning with aggregate metrics.
    Montecarlo {
        #[arg(long)]
        system: String,
        #[arg(long, value_enum, default_value = "zero")]
        regime: RegimeArg,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed0: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-run JSON archive.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Output-error reference estimate on a dataset, or the state bound.
    Oracle {
        #[arg(long)]
        system: String,
        #[arg(long, required_unless_present = "pcrb")]
        data: Option<PathBuf>,
        #[arg(long)]
        pcrb: bool,
        #[arg(long, default_value_t = 50)]
        ensemble: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tune a recorded flight-test case.
    Real {
        #[arg(long = "case")]
        case: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo comparison of tuning variants.
    Compare {
        #[arg(long, default_value = "constant")]
        system: String,
        #[arg(long, value_delimiter = ',', default_value = "reference,mt,ms,gemson")]
        methods: Vec<String>,
        #[arg(long, value_enum, default_value = "positive")]
        regime: RegimeArg,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed0: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Named demonstrations.
    Demo {
        #[arg(value_parser = ["p0scaling"])]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Success, or a run that diverged after writing what it could.
enum Outcome {
    Done,
    Diverged,
}

fn write_text(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ConfigFile> {
    Ok(match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    })
}

/// Reads a dataset, with its truth sidecar when one sits next to it.
fn load_dataset(path: &Path, model: &SystemModel) -> anyhow::Result<Dataset> {
    if truth_path(path).exists() {
        Ok(ingest_with_truth(path, model)?)
    } else {
        Ok(ingest_csv(path, &CsvSchema::for_model(model))?)
    }
}

fn tune_and_write(
    model: &SystemModel,
    data: &Dataset,
    cfg: &TuningConfig,
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    match run_reference_recipe(model, data, cfg) {
        Ok(res) => {
            write_text(
                out,
                &serde_json::to_string_pretty(&TuneSummary::new(model, &res))?,
            )?;
            Ok(Outcome::Done)
        }
        Err(e @ kftune_core::Error::FilterDiverged { .. }) => {
            let doc = serde_json::json!({ "system": model.name, "diverged": e.to_string() });
            write_text(out, &serde_json::to_string_pretty(&doc)?)?;
            eprintln!("{e}");
            Ok(Outcome::Diverged)
        }
        Err(e) => Err(e.into()),
    }
}

fn write_study(
    study: &StudyConfig,
    out: Option<&Path>,
    archive: Option<&Path>,
) -> anyhow::Result<Outcome> {
    let result = monte_carlo(study)?;
    let report = Report::from_archive(&result.archive, result.tables.clone());
    match out {
        Some(p) => emit_report(&report, p, Format::from_path(p))?,
        None => print!("{}", report.to_csv()),
    }
    if let Some(p) = archive {
        std::fs::write(p, result.archive.to_json())
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(if result.diverged_runs() > 0 {
        Outcome::Diverged
    } else {
        Outcome::Done
    })
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Simulate {
            system,
            seed,
            regime,
            out,
        } => {
            let model = build_model(&system, &[])?;
            let mut sim = SimConfig::for_model(&model, seed);
            if matches!(regime, RegimeArg::Zero) {
                sim = sim.without_process_noise();
            }
            write_dataset(&out, &simulate_truth(&model, &sim)?)?;
            Ok(Outcome::Done)
        }
        Command::Tune {
            system,
            data,
            config,
            regime,
            out,
        } => {
            let file = load_config(config.as_deref())?;
            let model = build_model(&system, &file.constants())?;
            let dataset = load_dataset(&data, &model)?;
            let cfg = file.tuning.apply(Regime::from(regime).tuning())?;
            tune_and_write(&model, &dataset, &cfg, Some(&out))
        }
        Command::Montecarlo {
            system,
            regime,
            runs,
            seed0,
            config,
            out,
            archive,
        } => {
            let file = load_config(config.as_deref())?;
            let mut study = StudyConfig::from_file(&file, Some(&system), Some(regime.into()))?;
            study.runs = runs.unwrap_or(study.runs);
            study.seed0 = seed0.unwrap_or(study.seed0);
            write_study(&study, Some(&out), archive.as_deref())
        }
        Command::Oracle {
            system,
            data,
            pcrb,
            ensemble,
            seed,
            out,
        } => {
            let model = build_model(&system, &[])?;
            if pcrb {
                let n = model.n();
                let p0 = Mat::identity(n, n) * TuningConfig::with_process_noise().initial.p0_guess;
                let sim = SimConfig::for_model(&model, seed);
                let bound = pcrb_recursion(&model, &model.theta_true, &sim, &p0, ensemble)?;
                write_text(
                    out.as_deref(),
                    &serde_json::to_string_pretty(&PcrbSummary::new(&model, &bound))?,
                )?;
                return Ok(Outcome::Done);
            }
            let Some(path) = data else {
                bail!("--data is required without --pcrb")
            };
            let dataset = load_dataset(&path, &model)?;
            let x0 = match &dataset.truth {
                Some(t) => t.x0.clone(),
                None => {
                    // No truth: start from the smoothed initial state of one pass.
                    let cfg = TuningConfig {
                        iterations: 1,
                        ..TuningConfig::zero_process_noise()
                    };
                    let res = run_reference_recipe(&model, &dataset, &cfg)?;
                    res.final_smoother.smoothed[0]
                        .mean
                        .rows(0, model.n())
                        .into_owned()
                }
            };
            let theta0 = model
                .theta_start
                .clone()
                .unwrap_or_else(|| model.theta_true.clone());
            let nr = nr_mmle(
                &model,
                &dataset,
                &x0,
                &theta0,
                &NoiseMode::Estimate,
                &NrOptions::default(),
            )?;
            write_text(
                out.as_deref(),
                &serde_json::to_string_pretty(&NrSummary::new(&model, &nr))?,
            )?;
            Ok(if nr.converged {
                Outcome::Done
            } else {
                Outcome::Diverged
            })
        }
        Command::Real {
            case,
            data,
            config,
            out,
        } => {
            let file = load_config(config.as_deref())?;
            let model = build_model(&case, &file.constants())?;
            let dataset = ingest_csv(&data, &CsvSchema::for_model(&model))?;
            let cfg = file.tuning.apply(TuningConfig::with_process_noise())?;
            tune_and_write(&model, &dataset, &cfg, out.as_deref())
        }
        Command::Compare {
            system,
            methods,
            regime,
            runs,
            seed0,
            out,
            archive,
        } => {
            let mut study = StudyConfig::new(&system, regime.into());
            study.compare = methods
                .iter()
                .map(|m| parse_method(m))
                .collect::<Result<Vec<Method>, _>>()?;
            study.runs = runs.unwrap_or(study.runs);
            study.seed0 = seed0.unwrap_or(study.seed0);
            write_study(&study, out.as_deref(), archive.as_deref())
        }
        Command::Demo { name, out } => {
            debug_assert_eq!(name, "p0scaling");
            let demo = p0_scaling_demo(&DemoConfig::default())?;
            write_text(out.as_deref(), &demo.to_csv())?;
            Ok(Outcome::Done)
        }
    }
}

/// 2 for bad input, 3 for divergence, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(h) = err.downcast_ref::<HarnessError>() {
        return match h {
            _ if h.is_divergence() => 3,
            HarnessError::IoFailure { .. } => 1,
            _ => 2,
        };
    }
    match err.downcast_ref::<kftune_core::Error>() {
        Some(kftune_core::Error::FilterDiverged { .. }) => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Diverged) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
