//! Argument parsing and subcommand dispatch.
//!
//! Exit codes: 0 success, 2 configuration rejected (including unknown
//! config keys and clap usage errors), 3 numerical invariant violated
//! during the run, 4 a `--check` reference comparison missed its
//! tolerance. Artifacts are still written on exit 4 so the miss can be
//! inspected.

use std::ffi::OsString;
use std::path::PathBuf;

use ccd_core::experiments::{
    preset_dressed_control, preset_dressed_ramsey, preset_dressed_ramsey_t2_sweep,
    preset_order_scaling, preset_persistent_rabi, preset_single_drive_rabi,
    preset_two_qubit_fidelity,
};
use ccd_core::{
    run_noise_selfcheck, run_preset, run_t2_sweep, CheckOp, CoreError, ExperimentPreset,
    FrameLabel, PresetOutcome, Variant,
};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{echo_preset, echo_sweep, ConfigError, Settings};
use crate::output::ArtifactWriter;
use crate::parallel::RayonRunner;

#[derive(Parser, Debug)]
#[command(
    name = "ccd-sim",
    version,
    about = "Monte-Carlo simulator for nested continuous driving of a spin qubit",
    after_help = "Exit codes: 0 ok, 2 config rejected, 3 invariant violated, 4 --check miss."
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,

    /// plain-text key=value experiment configuration
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// master seed override (one seed fixes every noise draw)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Monte-Carlo ensemble size override
    #[arg(long, global = true, value_name = "N")]
    pub realizations: Option<usize>,

    /// simulation horizon override, microseconds
    #[arg(long = "horizon-us", global = true, value_name = "F")]
    pub horizon_us: Option<f64>,

    /// rotating-frame override for the primary run
    #[arg(long, global = true, value_enum)]
    pub frame: Option<FrameArg>,

    /// drive-construction variant override
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantArg>,

    /// exit 4 when a reference check misses its tolerance
    #[arg(long, global = true)]
    pub check: bool,

    /// directory for CSV/JSON artifacts
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,

    /// worker threads (0 = one per core); the trajectory fold is ordered,
    /// so any thread count gives bitwise-identical results
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Subcommand, Clone, Copy, Debug)]
pub enum Cmd {
    /// single-drive Rabi decay: contrast envelope, Gaussian rate and T2
    Rabi,
    /// two-tone protected Rabi contrast at 300 us vs a bare-drive control
    PersistentRabi,
    /// dressed-qubit coherence decay, both drive constructions + baseline
    DressedRamsey,
    /// T2 versus second-drive strength, both constructions
    T2Sweep,
    /// T2 versus nesting order K = 1..4 (amplitude ladder /30)
    OrderScaling,
    /// rf rotation of the doubly-dressed qubit at the predicted half-rate
    DressedControl,
    /// entangling-gate fidelity of the coupled pair, with/without noise
    TwoQubitFidelity,
    /// Ornstein-Uhlenbeck sampler statistics battery
    NoiseSelfcheck,
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::Rabi => "rabi",
            Cmd::PersistentRabi => "persistent-rabi",
            Cmd::DressedRamsey => "dressed-ramsey",
            Cmd::T2Sweep => "t2-sweep",
            Cmd::OrderScaling => "order-scaling",
            Cmd::DressedControl => "dressed-control",
            Cmd::TwoQubitFidelity => "two-qubit-fidelity",
            Cmd::NoiseSelfcheck => "noise-selfcheck",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FrameArg {
    Lab,
    Int1,
    Int2,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum VariantArg {
    Refined,
    Simplified,
}

enum RunError {
    Config(ConfigError),
    Core(CoreError),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError::Core(e)
    }
}

/// Entry point used by `main`; returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let benign = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if benign { 0 } else { 2 };
        }
    };
    run_cli(&cli)
}

pub fn run_cli(cli: &Cli) -> i32 {
    let started = chrono::Utc::now();
    let settings = match resolve_settings(cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let runner = match RayonRunner::new(cli.threads) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot build thread pool: {e}");
            return 1;
        }
    };

    match dispatch(cli.cmd, &settings, &runner) {
        Err(RunError::Config(e)) => {
            eprintln!("configuration rejected: {e}");
            2
        }
        Err(RunError::Core(e)) if e.is_invariant_violation() => {
            eprintln!("invariant violation: {e}");
            3
        }
        Err(RunError::Core(e)) => {
            eprintln!("run rejected: {e}");
            2
        }
        Ok((outcome, resolved_config)) => {
            let writer = ArtifactWriter {
                dir: &cli.out,
                subcommand: cli.cmd.name(),
                started,
                threads: cli.threads,
                overridden_keys: settings.keys_set(),
                resolved_config,
            };
            let names = match writer.write(&outcome) {
                Ok(n) => n,
                Err(e) => {
                    eprintln!("cannot write artifacts to {}: {e}", cli.out.display());
                    return 1;
                }
            };
            report(&outcome, &names);
            if cli.check && !outcome.all_passed() {
                eprintln!("check failed: see the lines above");
                4
            } else {
                0
            }
        }
    }
}

fn resolve_settings(cli: &Cli) -> Result<Settings, ConfigError> {
    let mut s = match &cli.config {
        Some(path) => Settings::parse_file(path)?,
        None => Settings::default(),
    };
    // flags override file values
    if let Some(seed) = cli.seed {
        s.seed = Some(seed);
    }
    if let Some(n) = cli.realizations {
        s.realizations = Some(n);
    }
    if let Some(h) = cli.horizon_us {
        s.horizon_us = Some(h);
    }
    if let Some(f) = cli.frame {
        s.frame = Some(match f {
            FrameArg::Lab => FrameLabel::Lab,
            FrameArg::Int1 => FrameLabel::Int1,
            FrameArg::Int2 => FrameLabel::Int2,
        });
    }
    if let Some(v) = cli.variant {
        s.variant = Some(match v {
            VariantArg::Refined => Variant::Refined,
            VariantArg::Simplified => Variant::Simplified,
        });
    }
    Ok(s)
}

type Resolved = (PresetOutcome, Vec<(String, String)>);

fn dispatch(cmd: Cmd, settings: &Settings, runner: &RayonRunner) -> Result<Resolved, RunError> {
    let ov = settings.run_overrides();
    let single = |mut preset: ExperimentPreset| -> Result<Resolved, RunError> {
        settings.apply(&mut preset, cmd.name())?;
        let outcome = run_preset(&preset, &ov, runner)?;
        let echo = echo_preset(&preset, outcome.n_used, outcome.master_seed);
        Ok((outcome, echo))
    };
    match cmd {
        Cmd::Rabi => single(preset_single_drive_rabi()),
        Cmd::PersistentRabi => single(preset_persistent_rabi()),
        Cmd::DressedRamsey => single(preset_dressed_ramsey()),
        Cmd::OrderScaling => single(preset_order_scaling()),
        Cmd::DressedControl => single(preset_dressed_control()),
        Cmd::TwoQubitFidelity => single(preset_two_qubit_fidelity()),
        Cmd::T2Sweep => {
            let mut points = preset_dressed_ramsey_t2_sweep();
            settings.apply_sweep(&mut points)?;
            let outcome = run_t2_sweep(&points, &ov, runner)?;
            let echo = echo_sweep(&points, settings, outcome.n_used);
            Ok((outcome, echo))
        }
        Cmd::NoiseSelfcheck => {
            settings.reject_all_but_seed(cmd.name())?;
            let outcome = run_noise_selfcheck(settings.seed.unwrap_or(0));
            let echo = vec![(
                "seed".to_string(),
                format!("{}", settings.seed.unwrap_or(0)),
            )];
            Ok((outcome, echo))
        }
    }
}

fn op_str(op: CheckOp) -> &'static str {
    match op {
        CheckOp::WithinRel => "within rel",
        CheckOp::WithinAbs => "within abs",
        CheckOp::AtLeast => "at least",
        CheckOp::AtMost => "at most",
    }
}

fn report(outcome: &PresetOutcome, names: &[String]) {
    println!(
        "{}: n = {}, seed = {}",
        outcome.preset, outcome.n_used, outcome.master_seed
    );
    if let Some(f) = outcome.cross_validation_fidelity {
        println!("  frame cross-validation fidelity {f:.6}");
    }
    for (k, v) in &outcome.scalars {
        if k != "cross_validation_fidelity" {
            println!("  {k} = {v:.6}");
        }
    }
    for f in &outcome.fits {
        let ci = f
            .t2_bootstrap_ci95
            .map(|(lo, hi)| format!(" [{lo:.3}, {hi:.3}]"))
            .unwrap_or_default();
        println!(
            "  fit {}: {:?} T2 = {:.4} us{}{}",
            f.name,
            f.fit.model,
            f.fit.t2_us,
            ci,
            if f.fit.t2_is_lower_bound {
                " (lower bound)"
            } else {
                ""
            }
        );
    }
    for c in &outcome.checks {
        println!(
            "  check {}: measured {:.6} vs {:.6} ({} tol {:.4}) {}",
            c.name,
            c.measured,
            c.expected,
            op_str(c.op),
            c.tol_eff,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    println!("wrote {}", names.join(", "));
}
