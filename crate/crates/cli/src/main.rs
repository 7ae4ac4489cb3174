mod config;
mod ini;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use morphopt::driver::{
    convergence_study, default_check_steps, gradient_check, optimize, output, random_direction, RunConfig, Session,
    StudyAxis,
};
use morphopt::Error;

#[derive(Parser, Debug)]
#[command(name = "morphopt", version, about = "Shape optimization with spline deformations and isoparametric FE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the descent loop and write history.csv, final_state.txt and VTK files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Maximum number of iterations (overrides the config).
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Taylor-remainder test of the shape derivative along a random spline direction.
    CheckGradient {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated step sizes.
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<f64>>,
    },
    /// Convergence study over mesh refinements or spline grid widths; writes rates.csv.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "mesh")]
        axis: String,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
    },
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvertedElement { .. }
            | Error::Solver { .. }
            | Error::MissingAdjoint(_)
            | Error::DimensionMismatch { .. } => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn load(path: &Path, budget: Option<usize>) -> Result<RunConfig, Failure> {
    let mut cfg = config::load(path)?;
    if let Some(b) = budget {
        cfg.max_iterations = b;
    }
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("."))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out_dir: dir, budget } => {
            let mut cfg = load(&config, budget)?;
            cfg.output_dir = Some(out_dir(dir, &cfg));
            let out = optimize(&cfg)?;
            let last = out.history.last().expect("initial record");
            println!(
                "iterations={} J={} stop={:?} output={}",
                last.iteration,
                output::format_real(last.j),
                out.stop,
                cfg.output_dir.as_ref().expect("set above").display()
            );
        }
        Command::CheckGradient { config, seed, steps } => {
            let cfg = load(&config, None)?;
            let steps = steps.unwrap_or_else(default_check_steps);
            let session = Session::new(&cfg)?;
            let dt = random_direction(&session, seed)?;
            let chk = gradient_check(&session, &dt, &steps, 1.0)?;
            for (s, r) in &chk.remainders {
                log::info!("s = {s:.1e}  remainder = {r:.6e}");
            }
            println!("{}", chk.describe());
        }
        Command::Study {
            config,
            axis,
            levels,
            out_dir: dir,
            budget,
        } => {
            let axis = StudyAxis::from_name(&axis)
                .ok_or_else(|| Failure::Config(format!("unknown study axis `{axis}` (expected mesh or grid)")))?;
            if levels < 3 {
                return Err(Failure::Config(format!("a study needs at least 3 levels, got {levels}")));
            }
            let cfg = load(&config, budget)?;
            let dir = out_dir(dir, &cfg);
            let res = convergence_study(&cfg, axis, levels)?;
            output::write_atomic(&dir.join("rates.csv"), output::rates_csv(&res.rows, res.rate).as_bytes())?;
            println!("rate={:.6} monotone={} output={}", res.rate, res.monotone, dir.join("rates.csv").display());
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("MORPHOPT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("MORPHOPT_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot configure {n} threads: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match configure_threads().and_then(|_| execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_exit_classes() {
        let num = Failure::from(Error::Solver {
            msg: "singular".into(),
            residual: 1.0,
        });
        assert!(matches!(num, Failure::Numerical(_)));
        assert!(matches!(Failure::from(Error::InvertedElement { cell: 0, det: -1.0 }), Failure::Numerical(_)));
        assert!(matches!(Failure::from(Error::InvalidInput("x".into())), Failure::Config(_)));
    }
}
