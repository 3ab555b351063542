use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use evorobo::experiment::{heatmap, metrics_csv, patrol_percentage, write_atomic, RunDir};
use evorobo::{
    curiosity_fitness, displacement_fitness, run_episode, run_experiment, Arena, EpisodeConfig,
    ExperimentConfig, Genotype,
};

#[derive(Parser)]
#[command(name = "evorobo", version, about = "Entropy-driven evolutionary robotics in grid mazes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay one genotype and dump its trajectory.
    Episode {
        #[arg(long)]
        arena: PathBuf,
        #[arg(long)]
        genotype: PathBuf,
        #[arg(long, default_value_t = EpisodeConfig::DEFAULT_STEPS)]
        steps: usize,
        /// Trajectory CSV destination; stdout when omitted.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Write heatmaps for every selection of a run directory.
    Heatmap {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value_t = 10)]
        ell: u32,
    },
    /// Recompute metrics.csv from a run directory.
    Metrics {
        #[arg(long)]
        runs: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> evorobo::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let report = run_experiment(&cfg)?;
            for v in &report.violations {
                eprintln!("warning: {v}");
            }
            print!(
                "{}",
                metrics_csv(cfg.fitness.name(), &cfg.arena_name(), &report.metrics)
            );
            eprintln!("outputs written to {}", report.output.display());
        }
        Command::Episode {
            arena,
            genotype,
            steps,
            trajectory,
        } => {
            let arena = Arena::from_path(&arena)?;
            let text = std::fs::read_to_string(&genotype)
                .map_err(|e| evorobo::Error::Io { path: genotype.clone(), source: e })?;
            let g = Genotype::from_file_text(&text)?;
            let cfg = EpisodeConfig::for_arena(&arena).with_steps(steps);
            let result = run_episode(&arena, &g, &cfg)?;
            let csv = result.trajectory_csv();
            match trajectory {
                Some(path) => write_atomic(&path, &csv)?,
                None => print!("{csv}"),
            }
            let (curiosity, clusters) = curiosity_fitness(&result.stream, 0.2)?;
            eprintln!(
                "end=({:.3}, {:.3}) max_distance={:.3} curiosity={:.6} states={} displacement={:.6} p(2)={:.2}",
                result.end_point.x,
                result.end_point.y,
                result.max_distance_from_start,
                curiosity,
                clusters.len(),
                displacement_fitness(&result.stream),
                patrol_percentage(&result.patrol, 2),
            );
        }
        Command::Heatmap { runs, ell } => {
            let dir = RunDir::load(&runs)?;
            for &selection in &dir.meta.selections {
                let grid = dir.merged_grid(selection)?;
                let path = runs.join(format!("heatmap_{selection}_{ell}.pgm"));
                write_atomic(&path, &heatmap(&grid, ell).to_pgm())?;
                println!("{}", path.display());
            }
        }
        Command::Metrics { runs } => {
            let dir = RunDir::load(&runs)?;
            let (metrics, violations) = dir.recompute(&runs)?;
            for v in &violations {
                eprintln!("warning: {v}");
            }
            print!(
                "{}",
                metrics_csv(&dir.meta.fitness_kind, &dir.meta.arena_name, &metrics)
            );
        }
    }
    Ok(())
}
