use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use omnimanip_harness::{analysis, catalog, config, run_scenario, RunLog, ScenarioConfig};

#[derive(Parser)]
#[command(name = "omnimanip", version, about = "Run and analyze aerial manipulation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a bundled scenario by name.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the CSV log.
        #[arg(long, env = "OMNIMANIP_OUT_DIR", default_value = ".")]
        out: PathBuf,
        /// `dotted.key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List bundled scenarios.
    List,
    /// Summarize a CSV log.
    Analyze {
        log: PathBuf,
        #[arg(long)]
        report: bool,
    },
}

fn load(scenario: &str, overrides: &[String]) -> Result<ScenarioConfig, omnimanip_harness::HarnessError> {
    let path = Path::new(scenario);
    if path.exists() {
        ScenarioConfig::from_file(config::load(path, overrides)?)
    } else {
        catalog::load(scenario, overrides)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for name in catalog::names() {
                let cfg = catalog::load(name, &[]).expect("bundled scenarios parse");
                println!("{name:<16} {}", cfg.description);
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, seed, out, mut overrides } => {
            if let Some(s) = seed {
                overrides.push(format!("seed={s}"));
            }
            let cfg = match load(&scenario, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let outcome = match run_scenario(&cfg) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = std::fs::create_dir_all(&out) {
                eprintln!("error: {}: {e}", out.display());
                return ExitCode::from(2);
            }
            let path = out.join(format!("{}-seed{}.csv", cfg.name, cfg.seed));
            if let Err(e) = outcome.log.save(&path) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            println!("wrote {} ({} rows)", path.display(), outcome.log.len());
            if let Some(e) = &outcome.error {
                println!("FAIL run aborted: {e}");
            }
            for a in &outcome.assertions {
                println!("{a}");
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::Analyze { log, report } => {
            let data = match RunLog::load(&log) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if !report {
                println!("{} rows, {} columns", data.len(), data.columns.len());
                return ExitCode::SUCCESS;
            }
            match analysis::report(&data) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
