// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! `ionpa`: command-line driver for the analyses in `ionpa-core`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ionpa::io::{run, Analysis, RunOptions};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  other failure
  2  invalid configuration or unreadable input
  3  file system error
  4  unstable confinement or unstable mode
  5  parametric drive at or above threshold, or zero detuning
  6  equilibrium solver did not converge
  7  unsupported combination of options";

#[derive(Parser)]
#[command(name = "ionpa", version, about = "Parametric amplification of spin-motion coupling in trapped-ion crystals", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the crystal equilibrium.
    Equilibrium(Common),
    /// Compute normal modes and zero-point lengths.
    Modes(Common),
    /// Compute the parametric overlap matrices.
    Overlap(Common),
    /// Solve the squeezing transformation of the target mode.
    Squeeze(Common),
    /// Compute Ising couplings with and without the parametric drive.
    Couplings(Common),
    /// Analyse a bilayer crystal and sweep the drive phase.
    Bilayer(Common),
    /// Tabulate gain with the counter-rotating shift.
    FloquetGain(Common),
    /// Generate exact single-mode gain markers from the one-period propagator.
    FloquetReference(Common),
}

#[derive(Args)]
#[command(after_help = EXIT_CODES)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override `[solver] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `[sdf] target_mode` with a mode index.
    #[arg(long)]
    mode_index: Option<usize>,
    /// Drive phase grid `start:stop:count` in radians, endpoints included.
    #[arg(long)]
    theta_grid: Option<String>,
    /// Reference gain markers with columns g_over_2pi_Hz,tau_s,gain.
    #[arg(long)]
    reference_csv: Option<PathBuf>,
    /// Use the compensated detuning for overlays and reference markers.
    #[arg(long, value_name = "BOOL")]
    compensated: Option<bool>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (analysis, args) = match cli.command {
        Command::Equilibrium(a) => (Analysis::Equilibrium, a),
        Command::Modes(a) => (Analysis::Modes, a),
        Command::Overlap(a) => (Analysis::Overlap, a),
        Command::Squeeze(a) => (Analysis::Squeeze, a),
        Command::Couplings(a) => (Analysis::Couplings, a),
        Command::Bilayer(a) => (Analysis::Bilayer, a),
        Command::FloquetGain(a) => (Analysis::FloquetGain, a),
        Command::FloquetReference(a) => (Analysis::FloquetReference, a),
    };
    let opts = RunOptions {
        config_path: args.config,
        out_dir: args.out,
        seed: args.seed,
        mode_index: args.mode_index,
        theta_grid: args.theta_grid,
        reference_csv: args.reference_csv,
        compensated: args.compensated,
    };
    match run(analysis, &opts) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for entry in &report.manifest.outputs {
                println!("{}", opts.out_dir.join(&entry.file).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
