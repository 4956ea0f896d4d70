use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trotter_core::acceptance;
use trotter_core::experiment::{self, ExperimentConfig, CSV_HEADER};

#[derive(Parser)]
#[command(name = "trotter", version, about = "Trotter-error extrapolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed for measurement randomness (suite: overrides acceptance.json).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for node evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (CSV for `run`, JSON summary for `suite`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its error table as CSV.
    Run { config: PathBuf },
    /// Run the acceptance criteria, reading optional settings from DIR/acceptance.json.
    Suite { dir: PathBuf },
    /// Summarize a CSV written by `run`.
    Report { csv: PathBuf },
}

fn run(cli: &Cli, config_path: &Path) -> trotter_core::Result<bool> {
    let config = ExperimentConfig::from_path(config_path)?;
    let seed = cli.seed.unwrap_or(0);
    let table = experiment::with_threads(cli.threads, || experiment::run_error_vs_m_multi_t(&config, seed))??;
    for failure in &table.failures {
        eprintln!("T={} m={} failed: {}", failure.big_t, failure.m, failure.reason);
    }
    match cli.out.clone().or(config.output_path.clone()) {
        Some(path) => table.write_csv(std::fs::File::create(&path)?)?,
        None => table.write_csv(std::io::stdout().lock())?,
    }
    Ok(table.failures.is_empty())
}

fn suite(cli: &Cli, dir: &Path) -> trotter_core::Result<bool> {
    let summary = experiment::with_threads(cli.threads, || acceptance::run_acceptance_suite(Some(dir), cli.seed))??;
    for verdict in &summary.verdicts {
        println!("{}", verdict.line());
    }
    println!("{} passed, {} failed (seed {})", summary.passed, summary.failed, summary.seed);
    if let Some(path) = &cli.out {
        std::fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(summary.all_passed())
}

fn report(path: &Path) -> trotter_core::Result<bool> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(trotter_core::Error::InvalidArgument(format!("unexpected CSV header {header:?}")));
    }
    let mut best: Vec<(String, String, String, f64, f64, String)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| record[i].parse::<f64>().map_err(|e| trotter_core::Error::InvalidArgument(format!("column {}: {e}", CSV_HEADER[i])));
        let (id, t, m) = (record[0].to_string(), record[1].to_string(), record[2].to_string());
        let (ext, plain) = (parse(5)?, parse(6)?);
        match best.iter_mut().find(|b| b.0 == id && b.1 == t) {
            Some(entry) if ext < entry.3 => *entry = (id, t, m, ext, plain, record[3].to_string()),
            Some(_) => {}
            None => best.push((id, t, m, ext, plain, record[3].to_string())),
        }
    }
    println!("experiment_id,T,best_m,d_max,err_extrapolated,err_plain");
    for (id, t, m, ext, plain, d_max) in best {
        println!("{id},{t},{m},{d_max},{ext},{plain}");
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Suite { dir } => suite(&cli, dir),
        Command::Report { csv } => report(csv),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
