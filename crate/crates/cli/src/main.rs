//! Command-line runner for the beamlink simulation chain.
//!
//! Four subcommands cover the usual workflow: `run` executes a preset and
//! prints aggregate statistics, `sweep` varies one scenario knob across a
//! list of values, `dump` captures an intermediate pipeline stage to an IQ
//! file, and `budget` prints the waypoint power table. Non-detection is
//! reported in the output, not as a process failure; a nonzero exit code
//! means the configuration itself was unusable.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use beamlink::harness::{
    self, preset, records_to_csv, run_scenario, summarize, sweep, sweep_to_csv, DumpStage,
    ScenarioPreset, SweepAxis,
};

#[derive(Parser)]
#[command(name = "beamlink", version, about = "OFDM beam-steering link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run one preset end to end and summarize the result
    Run {
        /// Scenario preset: aligned, misaligned, or steered
        #[arg(long, default_value = "aligned")]
        preset: String,

        /// Base seed; frame k derives its own bits and noise from it
        #[arg(long, default_value_t = 1)]
        seed: u64,

        /// Number of frames to run
        #[arg(long, default_value_t = harness::DEFAULT_FRAMES)]
        frames: usize,

        /// Write per-frame records as CSV to this path
        #[arg(long)]
        out: Option<PathBuf>,

        /// Apply key = value overrides from a config file
        #[arg(long)]
        config: Option<PathBuf>,
    },

    /// Sweep one scenario knob and summarize each point
    Sweep {
        /// Axis: offset_deg, noise_dbm, cfo_hz, or threshold
        #[arg(long)]
        axis: String,

        /// Comma-separated axis values, e.g. 0,10,20,30,40
        #[arg(long, allow_hyphen_values = true)]
        values: String,

        #[arg(long, default_value = "aligned")]
        preset: String,

        #[arg(long, default_value_t = 1)]
        seed: u64,

        /// Frames per sweep point
        #[arg(long, default_value_t = 20)]
        frames: usize,

        /// Write the sweep table as CSV to this path
        #[arg(long)]
        out: Option<PathBuf>,

        #[arg(long)]
        config: Option<PathBuf>,
    },

    /// Capture one pipeline stage of frame 0 to an IQ file
    Dump {
        /// Stage: baseband, shaped, quantized, channel-out, or matched-filter-out
        #[arg(long)]
        stage: String,

        #[arg(long, default_value = "aligned")]
        preset: String,

        #[arg(long, default_value_t = 1)]
        seed: u64,

        /// Output IQ file path (a .meta sidecar is written next to it)
        #[arg(long)]
        out: PathBuf,

        #[arg(long)]
        config: Option<PathBuf>,
    },

    /// Print the waypoint power table for a preset's scenario
    Budget {
        #[arg(long, default_value = "aligned")]
        preset: String,

        /// Emit CSV instead of the text table
        #[arg(long)]
        csv: bool,

        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_preset(name: &str, config: &Option<PathBuf>) -> anyhow::Result<ScenarioPreset> {
    let mut p = preset(name)?;
    if let Some(path) = config {
        harness::load_config(&mut p, path)
            .with_context(|| format!("loading {}", path.display()))?;
    }
    Ok(p)
}

fn parse_values(list: &str) -> anyhow::Result<Vec<f64>> {
    list.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .with_context(|| format!("'{v}' is not a number"))
        })
        .collect()
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Commands::Run {
            preset: name,
            seed,
            frames,
            out,
            config,
        } => {
            let p = load_preset(&name, &config)?;
            let records = run_scenario(&p, seed, frames)?;
            let summary = summarize(&records);
            print!("{}", harness::summary_text(&p, seed, &summary));
            if let Some(path) = out {
                fs::write(&path, records_to_csv(&records))
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("wrote {} records to {}", records.len(), path.display());
            }
        }
        Commands::Sweep {
            axis,
            values,
            preset: name,
            seed,
            frames,
            out,
            config,
        } => {
            let p = load_preset(&name, &config)?;
            let axis: SweepAxis = axis.parse()?;
            let values = parse_values(&values)?;
            let rows = sweep(&p, axis, &values, seed, frames)?;
            let csv = sweep_to_csv(axis, &rows);
            print!("{csv}");
            if let Some(path) = out {
                fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Commands::Dump {
            stage,
            preset: name,
            seed,
            out,
            config,
        } => {
            let p = load_preset(&name, &config)?;
            let stage: DumpStage = stage.parse()?;
            let meta = harness::dump_stage(&p, stage, seed, &out)?;
            println!(
                "wrote {} samples ({}) at {:.4} MHz to {}",
                meta.num_samples,
                meta.stage,
                meta.sample_rate_hz / 1e6,
                out.display()
            );
        }
        Commands::Budget {
            preset: name,
            csv,
            config,
        } => {
            let p = load_preset(&name, &config)?;
            let budget = harness::preset_budget(&p);
            if csv {
                print!("{}", budget.to_csv());
            } else {
                print!("{}", budget.text_table());
            }
        }
    }
    Ok(())
}
