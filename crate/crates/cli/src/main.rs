use std::path::PathBuf;
use std::process::ExitCode;

use ale_cli::commands;
use ale_cli::error::{CliError, CliResult};
use ale_cli::render::RadiusPolicy;
use ale_core::growth::ParticleSpec;
use ale_core::Complex64;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ale", version, about = "Aggregate Loewner evolution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParticleKind {
    Slit,
    SpreadOut,
}

#[derive(Subcommand)]
enum Command {
    /// Run one cluster and write its data products.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides run.seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an ensemble with split seeds and aggregate it.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; overrides ensemble.parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Re-aggregate an ensemble (or single run) directory from its files.
    Analyze {
        /// Ensemble or run directory.
        dir: PathBuf,
    },
    /// Certify a basic particle: capacity, regularity, beta, univalence.
    VerifyParticle {
        #[arg(long = "type", value_enum)]
        kind: ParticleKind,
        #[arg(long)]
        c: f64,
        /// Real part of gamma (spread-out only).
        #[arg(long, allow_negative_numbers = true)]
        gamma: Option<f64>,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
        gamma_im: f64,
    },
    /// Redraw boundary.svg of an existing run.
    Render {
        /// Run directory.
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = RadiusPolicy::QuarterSqrt)]
        radius_policy: RadiusPolicy,
        /// Output file; defaults to DIR/boundary.svg.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate a run from its manifest and check every output digest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let cfg = commands::load_config(&config, seed)?;
            let m = commands::simulate(&cfg, &out)?;
            println!("{}: {} steps -> {}", m.run_id, m.steps_completed, out.display());
        }
        Command::Ensemble { config, seed, out, jobs } => {
            let cfg = commands::load_config(&config, seed)?;
            let m = commands::ensemble(&cfg, &out, jobs)?;
            println!("{} runs -> {}", m.runs.len(), out.display());
        }
        Command::Analyze { dir } => {
            for o in commands::analyze(&dir)? {
                println!("{} {}", o.sha256, o.name);
            }
        }
        Command::VerifyParticle { kind, c, gamma, gamma_im } => {
            let spec = match (kind, gamma) {
                (ParticleKind::Slit, _) => ParticleSpec::Slit,
                (ParticleKind::SpreadOut, Some(re)) => ParticleSpec::SpreadOut {
                    gamma: Complex64::new(re, gamma_im),
                },
                (ParticleKind::SpreadOut, None) => {
                    return Err(CliError::Validation("spread-out particles need --gamma".into()));
                }
            };
            let report = commands::verify_particle(spec, c);
            println!("{}", serde_json::to_string_pretty(&report).map_err(CliError::from)?);
            if !report.certified {
                return Err(CliError::Validation("particle not certified".into()));
            }
        }
        Command::Render { dir, radius_policy, out } => {
            let path = commands::render(&dir, radius_policy, out.as_deref())?;
            println!("{}", path.display());
        }
        Command::Replay { manifest, out } => {
            let m = commands::replay(&manifest, &out)?;
            println!("{}: {} outputs reproduced", m.run_id, m.outputs.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ale: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
