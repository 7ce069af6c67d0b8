use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seld_core::experiment::{commands, preset_names, ExperimentConfig};
use seld_core::neural::Outcome;
use seld_core::SeldError;

#[derive(Parser)]
#[command(name = "seld", version, about = "Spatial scene synthesis, SELDnet training and MUSIC baseline runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file or bundled preset name
    #[arg(long, default_value = "ansyn-mini")]
    config: String,
    /// Overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `paths.out`
    #[arg(long)]
    out: Option<String>,
    /// Overrides `jobs`
    #[arg(long)]
    jobs: Option<usize>,
    /// Extra `dotted.key=value` overrides
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize WAV recordings, annotation CSVs and a manifest
    Generate(Common),
    /// Train SELDnet with early stopping on the test split
    Train(Common),
    /// Score the best checkpoint
    Evaluate(Common),
    /// Run the MUSIC baseline with reference source counts
    Music(Common),
    /// Write plot-data CSVs from histories and reports
    Report(Common),
    /// List bundled presets
    Presets,
}

fn load(c: &Common) -> Result<ExperimentConfig, SeldError> {
    let mut ov = Vec::new();
    if let Some(s) = c.seed {
        ov.push(format!("seed={s}"));
    }
    if let Some(o) = &c.out {
        ov.push(format!("paths.out={o}"));
    }
    if let Some(j) = c.jobs {
        ov.push(format!("jobs={j}"));
    }
    ov.extend(c.overrides.iter().cloned());
    ExperimentConfig::load(&c.config, &ov)
}

fn print_report(r: &seld_core::metrics::MetricsReport) {
    print!("{}", r.to_key_value());
}

fn run(cmd: Command) -> Result<u8, SeldError> {
    match cmd {
        Command::Presets => {
            for p in preset_names() {
                println!("{p}");
            }
        }
        Command::Generate(c) => {
            let cfg = load(&c)?;
            let m = commands::generate(&cfg)?;
            println!("wrote {} recordings to {}", m.recordings.len(), cfg.data.display());
        }
        Command::Train(c) => {
            let cfg = load(&c)?;
            let s = commands::train(&cfg, &mut |line| println!("{line}"))?;
            println!("{:?} after {} epochs; best epoch {}", s.outcome, s.epochs, s.best_epoch);
            if s.outcome == Outcome::Diverged {
                eprintln!("training diverged; history kept in {}", cfg.out.display());
                return Ok(3);
            }
        }
        Command::Evaluate(c) => {
            let cfg = load(&c)?;
            print_report(&commands::evaluate(&cfg)?);
        }
        Command::Music(c) => {
            let cfg = load(&c)?;
            print_report(&commands::music(&cfg)?);
        }
        Command::Report(c) => {
            let cfg = load(&c)?;
            for p in commands::report(&cfg)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
