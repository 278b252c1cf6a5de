use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use metaportal_core::config::Config;
use metaportal_core::dsl::Statement;
use metaportal_core::engine::Engine;
use metaportal_core::log::read_log;
use metaportal_core::protocol::serve_tcp;
use metaportal_core::tower::Tower;

#[derive(Parser)]
#[command(name = "metaportal", version, about = "Metadata-driven portal engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where the state comes from: a log to replay, then model files to load.
#[derive(Args)]
struct Source {
    /// Event log to replay first.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Model files to load after the log.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    /// Highest metadata level.
    #[arg(long, default_value_t = Tower::DEFAULT_MAX_LEVEL)]
    max_level: u32,
}

impl Source {
    fn build(&self) -> Result<Engine> {
        let mut engine = match &self.log {
            Some(path) => {
                let records = read_log(path).with_context(|| format!("reading {}", path.display()))?;
                Engine::replay(&records, self.max_level)?
            }
            None => Engine::with_max_level(self.max_level),
        };
        for m in &self.models {
            engine.load_file(m)?;
        }
        Ok(engine)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load model files and report what they define.
    Load {
        #[arg(required = true)]
        models: Vec<PathBuf>,
        /// Write the resulting statement log here.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = Tower::DEFAULT_MAX_LEVEL)]
        max_level: u32,
    },
    /// Serve the line protocol over TCP.
    Serve {
        /// Listening port on 127.0.0.1 (default 7070).
        #[arg(long)]
        port: Option<u16>,
        /// Event log to replay on start and append to.
        #[arg(long)]
        log: Option<PathBuf>,
        /// `key = value` service configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model files, loaded only when the log is empty.
        #[arg(long = "model")]
        models: Vec<PathBuf>,
    },
    /// Rebuild state from a log, optionally stopping at a position.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        to: Option<u64>,
        /// Print every rendered body instead of a summary.
        #[arg(long)]
        bodies: bool,
        #[arg(long, default_value_t = Tower::DEFAULT_MAX_LEVEL)]
        max_level: u32,
    },
    /// Render a view for a user's stored profile.
    Render {
        view: String,
        #[arg(long)]
        user: String,
        #[command(flatten)]
        source: Source,
    },
    /// Print counters.
    Stats {
        #[command(flatten)]
        source: Source,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Load { models, log, max_level } => {
            let mut engine = Engine::with_max_level(max_level);
            if let Some(path) = &log {
                if path.exists() && std::fs::metadata(path)?.len() > 0 {
                    bail!("{} already exists; refusing to append a fresh load to it", path.display());
                }
                engine.attach_log(path)?;
            }
            for m in &models {
                let applied = engine.load_file(m)?;
                println!("{}: {} statements", m.display(), applied.len());
            }
            println!("{}", engine.stats());
        }
        Command::Serve { port, log, config, models } => serve(port, log, config, models)?,
        Command::Replay { log, to, bodies, max_level } => {
            let mut records = read_log(&log).with_context(|| format!("reading {}", log.display()))?;
            if let Some(k) = to {
                if k > records.len() as u64 {
                    bail!("log has only {} records", records.len());
                }
                records.truncate(k as usize);
            }
            let engine = Engine::replay(&records, max_level)?;
            println!("{}", engine.stats());
            for (key, body) in engine.snapshot_bodies() {
                if bodies {
                    println!("== {key}\n{body}");
                } else {
                    println!("{key} {} bytes", body.len());
                }
            }
        }
        Command::Render { view, user, source } => {
            let engine = source.build()?;
            print!("{}", engine.render_for_user(&view, &user)?.body);
        }
        Command::Stats { source } => println!("{}", source.build()?.stats()),
    }
    Ok(())
}

fn serve(port: Option<u16>, log: Option<PathBuf>, config: Option<PathBuf>, models: Vec<PathBuf>) -> Result<()> {
    let cfg = match &config {
        Some(p) => Config::parse(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => Config::default(),
    };
    let max_level = cfg.max_level.unwrap_or(Tower::DEFAULT_MAX_LEVEL);
    let log = log.or(cfg.log.clone());
    let mut engine = match &log {
        Some(path) => Engine::open_log(path, max_level)?,
        None => Engine::with_max_level(max_level),
    };
    if engine.position() == 0 {
        let base = config.as_deref().and_then(Path::parent).unwrap_or(Path::new(""));
        for m in cfg.models.iter().map(|m| base.join(m)).chain(models) {
            engine.load_file(&m)?;
        }
        for (repo, names) in &cfg.critical {
            engine.apply_in(repo, Statement::Critical(names.clone()))?;
        }
        for stmt in &cfg.matrix {
            engine.apply(stmt.clone())?;
        }
    }
    let port = port.or(cfg.port).unwrap_or(7070);
    let listener = TcpListener::bind(("127.0.0.1", port)).with_context(|| format!("binding port {port}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    let engine = Arc::new(Mutex::new(engine));
    serve_tcp(engine.clone(), listener)?;
    engine.lock().unwrap_or_else(|p| p.into_inner()).flush_log()?;
    Ok(())
}
