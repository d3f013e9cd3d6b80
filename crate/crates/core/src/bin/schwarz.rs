use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use schwarz::harness::{run_experiment, scaling_sweep, threads_from_env, ExperimentConfig, SolverKind};

#[derive(Parser)]
#[command(name = "schwarz", version, about = "Overlapping Schwarz spectral solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        config: PathBuf,
        #[arg(long, value_enum)]
        solver: Option<SolverKind>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat one experiment over several thread counts.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        threads: Vec<usize>,
        #[arg(long, value_enum)]
        solver: Option<SolverKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, solver: Option<SolverKind>, out: Option<PathBuf>) -> schwarz::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = solver {
        cfg.solver.kind = s;
    }
    if out.is_some() {
        cfg.output.dir = out;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> schwarz::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            solver,
            threads,
            out,
        } => {
            let mut cfg = load(&config, solver, out)?;
            if let Some(t) = threads.or(threads_from_env()?) {
                cfg.solver.threads = t;
            }
            cfg.validate()?;
            let o = run_experiment(&cfg)?;
            println!("iteration,residual_norm,relative_residual,gmres_iterations");
            for r in &o.report.records {
                println!(
                    "{},{:.6e},{:.6e},{}",
                    r.iteration,
                    r.residual_norm,
                    r.relative_residual,
                    r.gmres_iterations.map_or(String::new(), |g| g.to_string())
                );
            }
            let t = o.timing();
            eprintln!(
                "{}: {:?} after {} outer / {} GMRES iterations, {:.2} s (residual {:.2} s, jacobian {:.2} s)",
                t.label,
                o.report.termination,
                t.outer_iterations,
                t.gmres_iterations,
                t.total_seconds,
                t.residual_seconds,
                t.jacobian_seconds
            );
            Ok(o.report.converged())
        }
        Command::Sweep {
            config,
            threads,
            solver,
            out,
        } => {
            let cfg = load(&config, solver, out.clone())?;
            let table = scaling_sweep(&cfg, &threads)?;
            table.write_csv(std::io::stdout())?;
            if let Some(dir) = out {
                table.write_csv(std::fs::File::create(dir.join("sweep.csv"))?)?;
            }
            Ok(table.outcomes.iter().all(|o| o.report.converged()))
        }
    }
}
