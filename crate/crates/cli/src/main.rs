use clap::{Args, Parser, Subcommand};
use proxnewton_cli::runs::{run_soss, run_solve, run_table};
use proxnewton_cli::{suites, CliError, Method, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "proxnewton", version, about = "Proximal Newton experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solve and write its iteration history as CSV.
    Solve(Common),
    /// Accepted-iteration counts over refinement levels × α.
    Table(Common),
    /// Remainder ratios of a scalar semi-smoothness example.
    Soss(Common),
    /// Run the property suites and print one PASS/FAIL line each.
    Proptest(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.output {
            cfg.output = Some(out.clone());
        }
        if let Some(m) = &self.method {
            cfg.method = m.parse::<Method>()?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(c) => {
            let cfg = c.load()?;
            let out = run_solve(&cfg)?;
            println!("{}", out.summary);
            if !out.result.status.is_converged() {
                return Err(CliError::Solver(format!("run ended with status {}", out.result.status.as_str())));
            }
        }
        Command::Table(c) => {
            let cfg = c.load()?;
            let grid = run_table(&cfg)?;
            print!("{}", grid.render());
            for (i, l) in grid.levels.iter().enumerate() {
                for (j, a) in grid.alphas.iter().enumerate() {
                    if let proxnewton_cli::runs::Cell::Fail(why) = grid.cell(i, j) {
                        eprintln!("cell L={l} alpha={a} failed: {why}");
                    }
                }
            }
        }
        Command::Soss(c) => {
            let cfg = c.load()?;
            let text = run_soss(&cfg)?;
            if cfg.output.is_none() {
                print!("{text}");
            }
        }
        Command::Proptest(c) => {
            let cfg = c.load()?;
            let reports = suites::run_all(cfg.seed);
            for r in &reports {
                println!("{}", r.line());
            }
            let failed: Vec<_> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
            if !failed.is_empty() {
                return Err(CliError::Property(failed.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("proxnewton: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
