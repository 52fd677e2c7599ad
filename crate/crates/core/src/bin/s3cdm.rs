use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use s3cdm::harness::{render_mapping, Scenario, Topology, TopologyConfig};
use s3cdm::http::{self, Binding, HttpTopology};
use s3cdm::store::{ActionStore, AuditFilter, AuditRecord, SqliteBackend};

#[derive(Parser)]
#[command(name = "s3cdm", version, about = "Secret-sharing action authorization across routed services")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start every configured service on its own HTTP listener.
    Up {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a JSON scenario script in process and print its transcript.
    Scenario {
        script: PathBuf,
        /// Topology config; six controllers and six nodes when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print absolute times and raw references.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        json: bool,
    },
    Route {
        #[command(subcommand)]
        command: RouteCommand,
    },
    Audit {
        #[command(subcommand)]
        command: AuditCommand,
    },
}

#[derive(Subcommand)]
enum RouteCommand {
    /// Set the weight of the link between two services, or disable it.
    Set {
        a: String,
        b: String,
        #[arg(long, default_value_t = 1)]
        weight: u32,
        #[arg(long)]
        disable: bool,
        #[arg(long, default_value = "http://127.0.0.1:7400")]
        registry: String,
    },
}

#[derive(Subcommand)]
enum AuditCommand {
    /// List recovery attempts, oldest first.
    List {
        #[arg(long)]
        batch: Option<String>,
        #[arg(long)]
        reference: Option<String>,
        /// Read the SQLite store directly instead of asking the dealer.
        #[arg(long, conflicts_with = "dealer")]
        db: Option<PathBuf>,
        #[arg(long, default_value = "http://127.0.0.1:7401")]
        dealer: String,
    },
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Up { config } => {
            let config = TopologyConfig::load(&config).map_err(|e| e.to_string())?;
            let topology = HttpTopology::start(&config, Binding::Configured).map_err(|e| e.to_string())?;
            print!("{}", render_mapping(topology.mapping()));
            tracing::info!(services = topology.mapping().len(), "topology up");
            loop {
                std::thread::park();
            }
        }
        Command::Scenario { script, config, raw, json } => {
            let text = std::fs::read_to_string(&script).map_err(|e| format!("{}: {e}", script.display()))?;
            let scenario = Scenario::from_json(&text).map_err(|e| format!("{}: {e}", script.display()))?;
            let config = match config {
                Some(path) => TopologyConfig::load(&path).map_err(|e| e.to_string())?,
                None => TopologyConfig::demo(),
            };
            let mut topology = Topology::boot(config).map_err(|e| e.to_string())?;
            let transcript = scenario.run(&mut topology);
            if json {
                println!("{}", serde_json::to_string_pretty(&transcript).map_err(|e| e.to_string())?);
            } else {
                print!("{}", transcript.render(!raw));
            }
            Ok(transcript.passed())
        }
        Command::Route { command: RouteCommand::Set { a, b, weight, disable, registry } } => {
            let body = json!({"a": a, "b": b, "weight": weight, "disabled": disable});
            let reply = http::post(&registry, "/route", &body)?;
            if !reply.is_ok() {
                return Err(reply.message.unwrap_or_else(|| format!("{:?}", reply.status)));
            }
            println!("{a} <-> {b} weight {weight}{}", if disable { " (disabled)" } else { "" });
            Ok(true)
        }
        Command::Audit { command: AuditCommand::List { batch, reference, db, dealer } } => {
            let filter = AuditFilter { reference_number: reference, batch_id: batch };
            let records: Vec<AuditRecord> = match db {
                Some(path) => {
                    let backend = SqliteBackend::open(&path).map_err(|e| e.to_string())?;
                    ActionStore::new(Box::new(backend)).list_audit(&filter).map_err(|e| e.to_string())?
                }
                None => {
                    let mut query = Vec::new();
                    if let Some(r) = &filter.reference_number {
                        query.push(format!("reference={r}"));
                    }
                    if let Some(b) = &filter.batch_id {
                        query.push(format!("batch={b}"));
                    }
                    let path = if query.is_empty() { "/audit".into() } else { format!("/audit?{}", query.join("&")) };
                    let reply = http::get(&dealer, &path)?;
                    serde_json::from_value(reply.data.unwrap_or_default()).map_err(|e| e.to_string())?
                }
            };
            for r in &records {
                println!(
                    "{:>4}  {}  {}  {:<4} {}  {}  {}",
                    r.id,
                    r.created_at.format("%Y-%m-%dT%H:%M:%S%.3fZ"),
                    r.reference_number,
                    r.request,
                    r.batch_id,
                    if r.is_success { "success" } else { "failure" },
                    r.context_nodes
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn,s3cdm=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
