use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pendulum_core::toy::Preset;
use pendulum_lab::config::ExperimentConfig;
use pendulum_lab::error::LabError;
use pendulum_lab::toy::ToyConfig;
use pendulum_lab::{compare, run, sweep, toy};

#[derive(Parser)]
#[command(
    name = "pendulum-lab",
    version,
    about = "Liquid-filled pendulum experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario (or sweep / toy) configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output_dir`, then `runs/<name>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides every seed of the initial data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Expect {
    Stable,
    Unstable,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write all artifacts.
    Simulate,
    /// Spectrum of the linearization and hypothesis verdicts.
    Spectrum {
        /// Exit with code 4 unless the verdict matches.
        #[arg(long)]
        expect: Option<Expect>,
    },
    /// Transient time and decay fits.
    Fit,
    /// Energy audits; exit code 4 when the strong energy inequality fails.
    Audit,
    /// Finite-dimensional stability laboratory.
    Toy {
        /// cubic3, spiral4, unstable3 or jordan2 (ignored with --config).
        #[arg(long, default_value = "cubic3")]
        preset: String,
    },
    /// Column-wise comparison of two run directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Restrict to these columns (comma separated).
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
    /// Run a parameter grid concurrently.
    Sweep,
}

fn need_config(cli: &Cli) -> Result<&Path, LabError> {
    cli.config
        .as_deref()
        .ok_or_else(|| LabError::Config("--config is required".into()))
}

fn scenario(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), LabError> {
    let mut cfg = ExperimentConfig::load(need_config(cli)?)?;
    if let Some(seed) = cli.seed {
        cfg.initial = cfg.initial.with_seed(seed);
        cfg.validate()?;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
    cfg.output_dir = Some(dir.clone());
    Ok((cfg, dir))
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).unwrap_or_else(|e| format!("<unserializable: {e}>"))
    );
}

fn dispatch(cli: &Cli) -> Result<(), LabError> {
    match &cli.command {
        Command::Simulate => {
            let (cfg, dir) = scenario(cli)?;
            let out = run::run(&cfg, &dir)?;
            println!(
                "{}: {} steps, artifacts in {}",
                cfg.name,
                out.trajectory.meta.steps,
                dir.display()
            );
            Ok(())
        }
        Command::Spectrum { expect } => {
            let (cfg, dir) = scenario(cli)?;
            let rep = run::run_spectrum(&cfg, &dir)?;
            println!(
                "kernel_dim {} h2_angle {:.3e} gamma_gap {:?} unstable_count {} method {:?}",
                rep.kernel_dim, rep.h2_angle, rep.gamma_gap, rep.unstable_count, rep.method
            );
            match expect {
                Some(Expect::Stable) if !(rep.verdicts.stable && rep.gamma_gap.is_some()) => {
                    Err(LabError::Verdict("spectrum is not stable".into()))
                }
                Some(Expect::Unstable) if rep.unstable_count == 0 => Err(LabError::Verdict(
                    "spectrum has no unstable eigenvalue".into(),
                )),
                _ => Ok(()),
            }
        }
        Command::Fit => {
            let (cfg, dir) = scenario(cli)?;
            let rep = run::run_fit(&cfg, &dir)?;
            print_json(&rep);
            Ok(())
        }
        Command::Audit => {
            let (cfg, dir) = scenario(cli)?;
            let rep = run::run_audit(&cfg, &dir)?;
            print_json(&rep);
            if rep.pass {
                Ok(())
            } else {
                Err(LabError::Verdict(format!(
                    "energy inequality violated by {:e} (tolerance {:e})",
                    rep.sei.worst_violation, rep.sei.tolerance
                )))
            }
        }
        Command::Toy { preset } => {
            let mut cfg = match &cli.config {
                Some(p) => ToyConfig::load(p)?,
                None => ToyConfig::for_preset(
                    Preset::from_name(preset)
                        .ok_or_else(|| LabError::Config(format!("unknown preset `{preset}`")))?,
                ),
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let dir = cli.out.clone().unwrap_or_else(|| {
                PathBuf::from("runs").join(format!("toy_{}", cfg.preset.name()))
            });
            let rep = toy::run_toy(&cfg, &dir)?;
            println!(
                "{}: classification {:?}, oracle max_rel {:.2e}, refused {:?}, pass {}",
                cfg.preset.name(),
                rep.verdict.as_ref().map(|v| v.classification),
                rep.oracle.max_rel,
                rep.refused,
                rep.pass
            );
            if rep.pass {
                Ok(())
            } else {
                Err(LabError::Verdict(format!(
                    "{} verdict failed",
                    cfg.preset.name()
                )))
            }
        }
        Command::Compare { a, b, columns, tol } => {
            let rep = compare::compare(a, b, columns.as_deref(), *tol)?;
            print_json(&rep);
            if rep.within_tol {
                Ok(())
            } else {
                Err(LabError::Verdict(format!(
                    "max relative deviation {:e} exceeds {:e}",
                    rep.max_rel, tol
                )))
            }
        }
        Command::Sweep => {
            let path = need_config(cli)?;
            let out = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("runs/sweep"));
            let rows = sweep::sweep(path, &out, cli.threads)?;
            for r in &rows {
                println!(
                    "value {:>10.4} t0 {:>8.3} inside {} sei {} exit {}",
                    r.value, r.t0, r.inside_basin, r.sei_passed, r.exit_code
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
