use std::path::PathBuf;

use anyhow::Result;
use catstream_cli::commands::{
    cmd_calibrate, cmd_discretize, cmd_monitor, cmd_scores, cmd_simulate, CalibrateArgs,
    DiscretizeArgs,
};
use catstream_cli::fixture::CaseStudyFixture;
use catstream_cli::scenarios;
use catstream_core::report::ln_or_sentinel;
use catstream_core::simulate::Preset;
use catstream_core::Statistic;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "catstream",
    version,
    about = "Control charts for many categorical data streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatisticArg {
    Zhang,
    Max,
    Sum,
}

impl From<StatisticArg> for Statistic {
    fn from(s: StatisticArg) -> Self {
        match s {
            StatisticArg::Zhang => Statistic::Zhang,
            StatisticArg::Max => Statistic::Max,
            StatisticArg::Sum => Statistic::Sum,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Find the control limit that gives a target in-control ARL.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        arl0: f64,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        /// Calibration record (CSV).
        #[arg(long)]
        out: PathBuf,
        /// Also write the configuration with the limit filled in.
        #[arg(long)]
        config_out: Option<PathBuf>,
    },
    /// Estimate ARL tables for a scenario (bundled name or file).
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value = "desk")]
        preset: PresetArg,
        #[arg(long)]
        out_dir: PathBuf,
        /// Run table cells concurrently; useful for small populations.
        #[arg(long)]
        parallel_cells: bool,
    },
    /// Run the chart over an observation file.
    Monitor {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Add each stream's local score to every record.
        #[arg(long)]
        emit_local_scores: bool,
    },
    /// Turn continuous Phase-I data into two-level streams.
    Discretize {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Label of conforming rows; may start with `-` (e.g. `-1`).
        #[arg(long, allow_hyphen_values = true)]
        conforming: String,
        #[arg(long)]
        out_dir: PathBuf,
        /// Apply these thresholds instead of estimating new ones.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long, default_value_t = 4)]
        sample_size: u32,
        #[arg(long, value_enum, default_value = "zhang")]
        statistic: StatisticArg,
    },
    /// Print ordinal score vectors of a configuration.
    Scores {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the bundled scenarios.
    Scenarios,
    /// Write the synthetic case-study dataset.
    Fixture {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Calibrate {
            config,
            arl0,
            reps,
            seed,
            out,
            config_out,
        } => {
            let result = cmd_calibrate(&CalibrateArgs {
                config: &config,
                arl0,
                reps,
                seed,
                out: &out,
                config_out: config_out.as_deref(),
            })?;
            println!(
                "limit {} (ln {:.6}), in-control ARL {:.1} (se {:.1}) on a fresh seed",
                result.limit,
                ln_or_sentinel(result.limit),
                result.achieved_arl,
                result.achieved_se
            );
        }
        Command::Simulate {
            scenario,
            preset,
            out_dir,
            parallel_cells,
        } => {
            let preset = match preset {
                PresetArg::Desk => Preset::Desk,
                PresetArg::Full => Preset::Full,
            };
            let output = cmd_simulate(&scenario, preset, &out_dir, parallel_cells)?;
            print!("{}", output.table.render_text());
            for f in output.files {
                log::info!("wrote {}", f.display());
            }
        }
        Command::Monitor {
            config,
            data,
            out,
            emit_local_scores,
        } => {
            let points = cmd_monitor(&config, &data, &out, emit_local_scores)?;
            match points.iter().find(|p| p.alarm) {
                Some(p) => println!("{} samples; first alarm at sample {}", points.len(), p.k),
                None => println!("{} samples; no alarm", points.len()),
            }
        }
        Command::Discretize {
            data,
            labels,
            conforming,
            out_dir,
            thresholds,
            lambda,
            sample_size,
            statistic,
        } => {
            let summary = cmd_discretize(&DiscretizeArgs {
                data: &data,
                labels: &labels,
                conforming: &conforming,
                out_dir: &out_dir,
                thresholds: thresholds.as_deref(),
                lambda,
                sample_size,
                statistic: statistic.into(),
            })?;
            println!(
                "{} rows, {} streams kept, {} columns dropped",
                summary.rows,
                summary.kept,
                summary.dropped.len()
            );
        }
        Command::Scores { config } => print!("{}", cmd_scores(&config)?),
        Command::Scenarios => {
            for name in scenarios::names() {
                println!("{name}");
            }
        }
        Command::Fixture {
            out_dir,
            runs,
            seed,
        } => {
            let mut fixture = CaseStudyFixture::default();
            if let Some(seed) = seed {
                fixture.seed = seed;
            }
            let files = fixture.write(&out_dir, runs)?;
            println!("wrote {} files to {}", files.len(), out_dir.display());
        }
    }
    Ok(())
}
