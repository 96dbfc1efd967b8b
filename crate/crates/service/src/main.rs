use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rentdiv_core::doc::{parse_allocation, parse_economy};
use rentdiv_core::{Economy, ObjectiveKind, Rational};
use rentdiv_service::api::{equilibria, manipulate, objective_for, oracle_economy, solve_economy, verify_allocation};
use rentdiv_service::http::router;
use rentdiv_service::store::{FileStore, MemoryStore, SessionStore};
use rentdiv_service::ApiError;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "rentdiv", version, about = "Exact envy-free rent division")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    MaxminUtility,
    MaxminRent,
    MinmaxUtility,
    MinmaxRent,
}

impl From<ObjectiveArg> for ObjectiveKind {
    fn from(a: ObjectiveArg) -> Self {
        match a {
            ObjectiveArg::MaxminUtility => ObjectiveKind::MaxminUtility,
            ObjectiveArg::MaxminRent => ObjectiveKind::MaxminTransformedRent,
            ObjectiveArg::MinmaxUtility => ObjectiveKind::MinmaxUtility,
            ObjectiveArg::MinmaxRent => ObjectiveKind::MinmaxTransformedRent,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve an economy and print the certified allocation.
    Solve {
        economy: PathBuf,
        #[arg(long, value_enum, default_value = "maxmin-utility")]
        objective: ObjectiveArg,
        /// Write the iteration trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check an allocation for envy-freeness and maxmin membership. Exits 1
    /// when it is not an envy-free maxmin allocation.
    Verify { economy: PathBuf, allocation: PathBuf },
    /// Brute-force maxmin over every assignment (at most 6 agents).
    Oracle { economy: PathBuf },
    /// Search an agent's best misreport around the truth.
    Manipulate {
        economy: PathBuf,
        #[arg(long)]
        agent: String,
        #[arg(long)]
        grid_step: Rational,
        /// Largest deviation per room value; ten grid steps by default.
        #[arg(long)]
        radius: Option<Rational>,
    },
    /// Enumerate grid epsilon-equilibria of the maxmin mechanism (at most 3 agents).
    Equilibria {
        economy: PathBuf,
        #[arg(long)]
        epsilon: Rational,
        #[arg(long, default_value = "1")]
        grid_step: Rational,
        /// Largest deviation per room value; two grid steps by default.
        #[arg(long)]
        radius: Option<Rational>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Keep sessions as JSON files here instead of in memory.
        #[arg(long)]
        store_dir: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String, ApiError> {
    let text = if path == Path::new("-") { std::io::read_to_string(std::io::stdin()) } else { std::fs::read_to_string(path) };
    text.map_err(|e| ApiError::new("io", format!("{}: {e}", path.display()), serde_json::Value::Null))
}

fn load_economy(path: &Path) -> Result<Economy, ApiError> {
    Ok(parse_economy(&read(path)?)?)
}

fn print<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("responses serialize"));
}

fn run(cli: Cli) -> Result<ExitCode, ApiError> {
    match cli.command {
        Command::Solve { economy, objective, trace } => {
            let e = load_economy(&economy)?;
            let obj = objective_for(&e, objective.into(), None)?;
            let res = solve_economy(&e, &obj, trace.is_some())?;
            if let (Some(path), Some(t)) = (trace, &res.trace) {
                let json = serde_json::to_string_pretty(t).expect("traces serialize");
                std::fs::write(&path, json).map_err(|err| ApiError::new("io", format!("{}: {err}", path.display()), serde_json::Value::Null))?;
            }
            print(&rentdiv_service::api::SolveResponse { trace: None, ..res });
        }
        Command::Verify { economy, allocation } => {
            let e = load_economy(&economy)?;
            let z = parse_allocation(&read(&allocation)?, &e)?;
            let res = verify_allocation(&e, &z)?;
            print(&res);
            if !res.holds {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Oracle { economy } => print(&oracle_economy(&load_economy(&economy)?)?),
        Command::Manipulate { economy, agent, grid_step, radius } => {
            let e = load_economy(&economy)?;
            let radius = radius.unwrap_or_else(|| &grid_step * &Rational::from(10));
            print(&manipulate(&e, &agent, &grid_step, &radius)?);
        }
        Command::Equilibria { economy, epsilon, grid_step, radius } => {
            let e = load_economy(&economy)?;
            let radius = radius.unwrap_or_else(|| &grid_step * &Rational::from(2));
            print(&equilibria(&e, &epsilon, &grid_step, &radius)?);
        }
        Command::Serve { port, host, store_dir } => {
            let store: Arc<dyn SessionStore> = match store_dir {
                Some(dir) => Arc::new(FileStore::open(dir)?),
                None => Arc::new(MemoryStore::new()),
            };
            let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError::internal(e.to_string()))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("listening on {}", listener.local_addr()?);
                axum::serve(listener, router(store)).await
            })
            .map_err(|e| ApiError::internal(e.to_string()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", serde_json::to_string_pretty(&e).expect("errors serialize"));
            ExitCode::from(2)
        }
    }
}
