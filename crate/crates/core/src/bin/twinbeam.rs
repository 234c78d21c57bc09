use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use twinbeam::config::{ExperimentConfig, Format, RunMode, BUNDLED};
use twinbeam::runner::{compute, emit, readouts};
use twinbeam::Error;

#[derive(Parser)]
#[command(name = "twinbeam", version, about = "Twin-beam correlation noise simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a bundled preset.
    Run {
        /// Path to a JSON config, or a bundled preset name.
        config: String,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's `output_dir`, else `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output formats; repeat or comma-separate.
        #[arg(long, value_enum, value_delimiter = ',')]
        format: Vec<FormatArg>,
    },
    /// List bundled presets.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Analytic,
    Simulate,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for (name, _) in BUNDLED {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            mode,
            seed,
            out,
            format,
        } => match run(&config, mode, seed, out, format) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}

fn run(
    config: &str,
    mode: Option<ModeArg>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Vec<FormatArg>,
) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(m) = mode {
        cfg.mode = match m {
            ModeArg::Analytic => RunMode::Analytic,
            ModeArg::Simulate => RunMode::Simulate,
            ModeArg::Both => RunMode::Both,
        };
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if !format.is_empty() {
        let mut formats: Vec<Format> = format
            .iter()
            .map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
                FormatArg::Svg => Format::Svg,
            })
            .collect();
        formats.sort();
        formats.dedup();
        cfg.formats = formats;
    }
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let results = compute(&cfg)?;
    let manifest = emit(&results, &dir)?;
    for sim in &results.simulations {
        println!("{} (design-frequency readouts, SNL = 1):", sim.label);
        for r in readouts(&cfg, sim)? {
            let e = r.excess_noise.map(|e| format!(" E={e}")).unwrap_or_default();
            println!(
                "  {:>4} {:<14}{:<7} simulated {:.5}  formula {:.5}",
                r.label,
                r.kind.as_str(),
                e,
                r.simulated,
                r.published
            );
        }
    }
    for p in &manifest.outputs {
        println!("wrote {}", dir.join(p).display());
    }
    Ok(())
}
