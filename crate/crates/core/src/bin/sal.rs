use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sal_core::analysis::theory::{format_table, verify_theory};
use sal_core::analysis::{pca_project, stress_histogram, surface_grid};
use sal_core::harness::artifact::load_trajectory;
use sal_core::harness::checkpoint;
use sal_core::harness::train::task_loss_fn;
use sal_core::harness::{compare_runs, run_sweep, train_run, RunArtifact, RunConfig, RunStatus};
use sal_core::SalError;

/// Stress-aware training experiments.
#[derive(Parser)]
#[command(name = "sal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its run directory.
    Train {
        config: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Train without interventions (stress is still logged).
        #[arg(long)]
        no_sal: bool,
    },
    /// Compare a baseline run directory against a SAL run directory.
    Compare {
        baseline: PathBuf,
        sal: PathBuf,
        /// Write the per-epoch gap table here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check the noise expansion and Hutchinson estimator on fixed fixtures.
    VerifyTheory {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Loss on a random two-dimensional slice around a checkpoint.
    Surface {
        checkpoint: PathBuf,
        config: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        range: f64,
        #[arg(long, default_value_t = 21)]
        steps: usize,
        /// Seed of the slice directions; reuse it to compare runs.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a run's recorded weight trajectory onto its principal components.
    Trajectory {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 3)]
        components: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histogram of a run's stress trace.
    Histogram {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train baseline and SAL arms over consecutive seeds.
    Sweep {
        config: PathBuf,
        /// Number of consecutive seeds, starting at the configured seed.
        #[arg(long)]
        seeds: u64,
        /// Base directory for the runs (default: the configured output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Failed(String),
}

impl From<SalError> for Failure {
    fn from(e: SalError) -> Self {
        match e {
            SalError::Config(_) | SalError::Parse { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Failed(e.to_string()),
        }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn load_config(path: &Path) -> std::result::Result<RunConfig, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("config file {} not found", path.display())));
    }
    Ok(RunConfig::load(path)?)
}

fn load_run(dir: &Path) -> std::result::Result<RunArtifact, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Usage(format!("run directory {} not found", dir.display())));
    }
    Ok(RunArtifact::load(dir)?)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Failed(format!("{}: {e}", p.display()))),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            no_sal,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if no_sal {
                cfg.sal_enabled = false;
            }
            let art = train_run(&cfg)?;
            art.write(&cfg.output_dir)?;
            let s = &art.summary;
            println!(
                "{}: {} epochs, final loss {}, final accuracy {}, interventions noise {} plastic {} revert {}",
                cfg.output_dir.display(),
                s.epochs_completed,
                s.final_loss,
                s.final_accuracy,
                s.noise_events,
                s.plastic_events,
                s.revert_events
            );
            if s.status == RunStatus::Diverged {
                return Err(Failure::Failed(format!(
                    "run diverged ({})",
                    s.failure.as_deref().unwrap_or("non-finite value")
                )));
            }
            Ok(())
        }
        Command::Compare { baseline, sal, csv } => {
            let report = compare_runs(&load_run(&baseline)?, &load_run(&sal)?)?;
            print!("{}", report.summary_text());
            if let Some(p) = csv {
                emit(Some(&p), &report.to_csv())?;
            }
            Ok(())
        }
        Command::VerifyTheory { seed } => {
            let results = verify_theory(seed)?;
            print!("{}", format_table(&results));
            if results.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(Failure::Failed("theory verification failed".into()))
            }
        }
        Command::Surface {
            checkpoint: ckpt,
            config,
            range,
            steps,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let params = checkpoint::load(&ckpt)?;
            let loss = task_loss_fn(&cfg, &params)?;
            let grid = surface_grid(loss, &params.flatten(), seed, range, steps)?;
            let mut buf = Vec::new();
            grid.write_csv(&mut buf).expect("write to memory");
            emit(out.as_deref(), &String::from_utf8(buf).expect("utf8"))
        }
        Command::Trajectory {
            run_dir,
            components,
            out,
        } => {
            let path = run_dir.join("trajectory.csv");
            if !path.is_file() {
                return Err(Failure::Usage(format!(
                    "{} not found (train with record_trajectory = true)",
                    path.display()
                )));
            }
            let pca = pca_project(&load_trajectory(&path)?, components)?;
            let k = pca.components.len();
            let mut text = String::from("# epoch");
            for c in 0..k {
                text.push_str(&format!(",pc{}", c + 1));
            }
            text.push_str(&format!(
                "  (explained variance {:?}{})\n",
                pca.explained_variance_ratio,
                if pca.rank_deficient { ", rank deficient" } else { "" }
            ));
            for (i, row) in pca.projections.iter().enumerate() {
                text.push_str(&(i + 1).to_string());
                for v in row {
                    text.push_str(&format!(",{v}"));
                }
                text.push('\n');
            }
            emit(out.as_deref(), &text)
        }
        Command::Histogram { run_dir, bins, out } => {
            let art = load_run(&run_dir)?;
            let h = stress_histogram(&art.stress_trace(), art.config.sal.s_max, bins)?;
            let mut buf = Vec::new();
            h.write_csv(&mut buf).expect("write to memory");
            emit(out.as_deref(), &String::from_utf8(buf).expect("utf8"))
        }
        Command::Sweep { config, seeds, out } => {
            let cfg = load_config(&config)?;
            let base = out.unwrap_or_else(|| cfg.output_dir.clone());
            let sweep = run_sweep(&cfg, seeds, Some(&base))?;
            let report = sweep.report();
            print!("{}", report.summary_text());
            let json = serde_json::to_string_pretty(&report).map_err(SalError::from)?;
            emit(Some(&base.join("sweep.json")), &(json + "\n"))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
