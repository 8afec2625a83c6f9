use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oscint_cli::converge::{converge, threads_from_env, write_report, Sweep};
use oscint_cli::quad_demo::{cmd_quad_demo, write_csv, Rule};
use oscint_cli::solve::cmd_solve;
use oscint_cli::{CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "oscint",
    version,
    about = "Uniformly accurate integrators for Klein-Gordon type problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration; writes trajectory.csv and summary.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output`, then `.`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep m, c, l or N and fit observed orders.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// `key=v1,v2,...` with key m, c, l or N; repeatable.
        #[arg(long)]
        sweep: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error decay of a quadrature rule as CSV on stdout.
    QuadDemo {
        #[arg(long, value_enum)]
        rule: Rule,
        #[arg(long)]
        max_n: Option<usize>,
        /// Also write the error and node tables into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(out: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    out.or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn execute(command: Command) -> oscint_cli::Result<()> {
    match command {
        Command::Solve { config, out } => {
            let config = RunConfig::load(&config)?;
            let dir = out_dir(out, &config);
            let summary = cmd_solve(&config, &dir)?;
            if let Some(w) = &summary.warning {
                eprintln!("warning: {w}");
            }
            if let Some(e) = &summary.reference_error {
                eprintln!("warning: no reference errors: {e}");
            }
            eprintln!(
                "{} steps to t = {}, wrote {}",
                summary.steps,
                summary.t_end,
                dir.display()
            );
            Ok(())
        }
        Command::Converge { config, sweep, out } => {
            let config = RunConfig::load(&config)?;
            let mut grid = Sweep::from_config(&config);
            for s in &sweep {
                grid.apply(s)?;
            }
            let report = converge(&config, &grid, threads_from_env()?)?;
            let dir = out_dir(out, &config);
            write_report(&report, &dir)?;
            for f in &report.fits {
                let slope = f.slope.map_or("-".to_string(), |s| format!("{s:.3}"));
                eprintln!(
                    "c={} l={} N={}: slope {slope} from {} points",
                    f.c, f.l, f.n, f.points
                );
            }
            for u in &report.uniformity {
                let ratio = u.ratio.map_or("-".to_string(), |r| format!("{r:.3}"));
                eprintln!("l={} N={}: constant ratio across c {ratio}", u.l, u.n);
            }
            Ok(())
        }
        Command::QuadDemo { rule, max_n, out } => {
            let demo = cmd_quad_demo(rule, max_n)?;
            write_csv(&demo.errors, std::io::stdout().lock())?;
            match out {
                Some(dir) => {
                    write_file(
                        &dir,
                        &format!("quad_{}_errors.csv", rule.name()),
                        &demo.errors,
                    )?;
                    write_file(
                        &dir,
                        &format!("quad_{}_nodes.csv", rule.name()),
                        &demo.nodes,
                    )
                }
                None => write_csv(&demo.nodes, std::io::stderr().lock()),
            }
        }
    }
}

fn write_file<T: serde::Serialize>(dir: &Path, name: &str, rows: &[T]) -> oscint_cli::Result<()> {
    let path = dir.join(name);
    let write_err = |source| CliError::Write {
        path: path.clone(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(write_err)?;
    let file = std::fs::File::create(&path).map_err(write_err)?;
    write_csv(rows, file)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
