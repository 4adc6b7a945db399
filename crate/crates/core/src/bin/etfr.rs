use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use etfr::pipeline::{exit_code, run_pipeline, write_synthetic, PipelineConfig};
use etfr::reproduce::{run_reproduction, Target};
use etfr::signals::{NoiseSpec, Preset};
use etfr::Result;

#[derive(Parser)]
#[command(name = "etfr", version, about = "Enhanced TFR and mode decomposition of noisy multi-mode FM signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a preset signal, its noise-free modes and true IF tracks.
    Synth {
        /// fig1a, fig1b or fig1c
        #[arg(long)]
        preset: Preset,
        /// Input SNR in dB; `inf` disables noise.
        #[arg(long, allow_negative_numbers = true)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full decomposition described by a JSON config.
    Decompose {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write analysis curves as CSV.
    Analyze {
        /// fig4, fig4b or table_window
        #[arg(long)]
        target: Target,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { preset, snr, seed, out } => {
            let (signal, truth) = write_synthetic(&out, preset, &NoiseSpec::new(snr, seed))?;
            println!("{preset}: {} samples, {} modes -> {}", signal.len(), truth.tracks.len(), out.display());
        }
        Command::Decompose { config } => {
            let cfg = PipelineConfig::from_file(&config)?;
            let report = run_pipeline(&cfg)?;
            println!("{}: {} modes, mu {:.4e}", report.input, report.mode_count, report.mu);
            for m in &report.per_mode {
                match m.output_snr_db {
                    Some(snr) => println!("  mode {}: mean IF {:.1} Hz, output SNR {snr:.2} dB", m.index, m.mean_if_hz),
                    None => println!("  mode {}: mean IF {:.1} Hz", m.index, m.mean_if_hz),
                }
            }
            if let Some(t) = &report.total {
                println!("  total: output SNR {:.2} dB (input {:.2} dB)", t.output_snr_db, t.input_snr_db);
            }
            println!("report -> {}", cfg.output_dir.join("report.json").display());
        }
        Command::Analyze { target, out } => {
            for p in run_reproduction(target, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
