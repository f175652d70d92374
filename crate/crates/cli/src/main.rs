//! `hamlet`: run evaluation tasks, serve a live town, replay logs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hamlet_core::backend::BackendRegistry;
use hamlet_core::engine::{
    load_snapshot, read_jsonl, save_snapshot, write_jsonl, Engine, EngineSettings, Event, ScheduledCommand, SimState,
};
use hamlet_core::eval::{prepare_episode, run_task, RunOptions, TaskSpec};
use hamlet_core::world::{WorldConfig, WorldMap};
use hamlet_gateway::{run_clock, serve, Gateway, GatewayConfig};

#[derive(Debug, Parser)]
#[command(name = "hamlet", version, about = "Deterministic multi-agent town sandbox")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run every episode of a task and report the pass rate.
    Run(RunArgs),
    /// Start the websocket gateway on a live town.
    Serve(ServeArgs),
    /// Re-print a saved JSONL event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Run one headless episode for a fixed number of ticks.
    Simulate(SimulateArgs),
    /// Continue a saved snapshot.
    Resume(ResumeArgs),
}

#[derive(Debug, Args)]
struct WorldArgs {
    /// Directory holding equipment.json, economy.json and buildings.json.
    /// Defaults to the task file's directory.
    #[arg(long)]
    config_dir: Option<PathBuf>,
    /// Backend registry; defaults to <config-dir>/backends.json.
    #[arg(long)]
    backends: Option<PathBuf>,
}

impl WorldArgs {
    fn dir(&self, task: Option<&Path>) -> Result<PathBuf> {
        match (&self.config_dir, task) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(t)) => Ok(t.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)),
            (None, None) => bail!("--config-dir is required without --task"),
        }
    }

    fn config(&self, task: Option<&Path>) -> Result<WorldConfig> {
        let dir = self.dir(task)?;
        WorldConfig::load_dir(&dir).with_context(|| format!("loading world config from {}", dir.display()))
    }

    fn registry(&self, task: Option<&Path>) -> Result<Arc<BackendRegistry>> {
        let path = match &self.backends {
            Some(p) => p.clone(),
            None => self.dir(task)?.join("backends.json"),
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Arc::new(
            BackendRegistry::from_json(&text).with_context(|| format!("loading backends from {}", path.display()))?,
        ))
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    task: PathBuf,
    #[command(flatten)]
    world: WorldArgs,
    /// Backend id that replaces the subject's backend.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    seed_base: Option<u64>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Write one JSONL event log per episode here.
    #[arg(long)]
    log_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Task whose world and agents seed the town; empty world otherwise.
    #[arg(long)]
    task: Option<PathBuf>,
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, default_value_t = 16)]
    width: u32,
    #[arg(long, default_value_t = 16)]
    height: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, env = "HAMLET_TOKEN", default_value = "hamlet")]
    token: String,
    /// Ticks per second.
    #[arg(long, default_value_t = 2.0)]
    speed: f64,
    #[arg(long, default_value_t = 50.0)]
    max_speed: f64,
    #[arg(long)]
    paused: bool,
    /// Shut down after this tick.
    #[arg(long)]
    ticks: Option<u64>,
    /// On shutdown, write the accepted command schedule here.
    #[arg(long)]
    schedule_out: Option<PathBuf>,
    /// On shutdown, write the event log here.
    #[arg(long)]
    log_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    task: PathBuf,
    #[command(flatten)]
    world: WorldArgs,
    /// Defaults to the task's first seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ticks: u64,
    /// Extra (command, applies_at_tick) schedule, e.g. one recorded by `serve`.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, requires = "snapshot_out")]
    snapshot_at: Option<u64>,
    #[arg(long)]
    snapshot_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ResumeArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    backends: PathBuf,
    #[arg(long)]
    ticks: u64,
    #[arg(long)]
    log: Option<PathBuf>,
}

fn write_log(path: &Path, events: &[Event]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_jsonl(events, BufWriter::new(file))?;
    Ok(())
}

fn load_task(path: &Path) -> Result<TaskSpec> {
    TaskSpec::load(path).with_context(|| format!("loading task {}", path.display()))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let task = load_task(&args.task)?;
    let config = args.world.config(Some(&args.task))?;
    let backends = args.world.registry(Some(&args.task))?;
    let opts = RunOptions {
        subject_backend: args.backend,
        seed_base: args.seed_base,
        parallel: args.parallel,
        log_dir: args.log_dir,
        systems: None,
    };
    let report = run_task(&task, &config, backends, &opts)?;
    let text = serde_json::to_string_pretty(&report)?;
    match &args.report {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            let line = format!("{}: pass_rate {} ({}/{})", report.task_id, report.pass_rate, report.passes, report.episode_count);
            writeln!(std::io::stdout(), "{line}")?;
        }
        None => writeln!(std::io::stdout(), "{text}")?,
    }
    Ok(())
}

fn cmd_replay(log: &Path) -> Result<()> {
    let file = File::open(log).with_context(|| format!("opening {}", log.display()))?;
    let events = read_jsonl(BufReader::new(file)).map_err(|(line, e)| anyhow::anyhow!("{}:{line}: {e}", log.display()))?;
    let mut out = std::io::stdout().lock();
    for e in &events {
        writeln!(out, "{}", e.to_json())?;
    }
    log::info!("{} events, last tick {}", events.len(), events.last().map_or(0, |e| e.tick));
    Ok(())
}

fn read_schedule(path: &Path) -> Result<Vec<ScheduledCommand>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing schedule {}", path.display()))
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let task = load_task(&args.task)?;
    let config = args.world.config(Some(&args.task))?;
    let engine = Engine::new(args.world.registry(Some(&args.task))?);
    let seed = args.seed.or(task.seeds.first().copied()).unwrap_or(0);
    let (mut state, mut events) = prepare_episode(&task, &config, seed, &engine, &RunOptions::default())?;
    if let Some(path) = &args.schedule {
        for sc in read_schedule(path)? {
            engine.schedule_at(&mut state, sc.applies_at_tick, sc.command);
        }
    }
    for _ in 0..args.ticks {
        events.extend(engine.tick(&mut state));
        if args.snapshot_at == Some(state.tick) {
            let path = args.snapshot_out.as_ref().expect("clap requires it");
            std::fs::write(path, save_snapshot(&state)).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if let Some(path) = &args.log {
        write_log(path, &events)?;
    }
    println!("tick {} events {}", state.tick, events.len());
    Ok(())
}

fn cmd_resume(args: ResumeArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.snapshot).with_context(|| format!("reading {}", args.snapshot.display()))?;
    let mut state = load_snapshot(&text)?;
    let registry = WorldArgs { config_dir: None, backends: Some(args.backends) }.registry(None)?;
    let engine = Engine::new(registry);
    let events = engine.run(&mut state, args.ticks, |_, _| false);
    if let Some(path) = &args.log {
        write_log(path, &events)?;
    }
    println!("tick {} events {}", state.tick, events.len());
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let engine = Engine::new(args.world.registry(args.task.as_deref())?);
    let config = args.world.config(args.task.as_deref())?;
    let (state, setup) = match &args.task {
        Some(path) => prepare_episode(&load_task(path)?, &config, args.seed, &engine, &RunOptions::default())?,
        None => {
            if args.width == 0 || args.height == 0 {
                bail!("map dimensions must be positive");
            }
            let map = WorldMap::new(args.width, args.height);
            (SimState::new(config, map, args.seed, EngineSettings::default()), Vec::new())
        }
    };
    let gw = Gateway::new(
        engine,
        state,
        setup,
        GatewayConfig {
            token: args.token,
            max_speed: args.max_speed,
            speed: args.speed,
            start_paused: args.paused,
            ..GatewayConfig::default()
        },
    );
    let addr: SocketAddr = format!("{}:{}", args.host, args.port).parse().context("bad --host/--port")?;

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let (stop_tx, stop_rx) = tokio::sync::watch::channel(false);
        let server = tokio::spawn(serve(gw.clone(), addr, stop_rx.clone()));
        let clock = tokio::spawn(run_clock(gw.clone(), args.ticks, stop_rx));
        tokio::select! {
            _ = tokio::signal::ctrl_c() => log::info!("interrupted"),
            _ = clock => log::info!("tick limit reached"),
        }
        let _ = stop_tx.send(true);
        server.await.context("server task")?.context("server")?;
        anyhow::Ok(())
    })?;

    if let Some(path) = &args.schedule_out {
        std::fs::write(path, serde_json::to_string_pretty(&gw.schedule())?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.log_out {
        write_log(path, &gw.log())?;
    }
    println!("stopped at tick {}", gw.tick());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Serve(a) => cmd_serve(a),
        Cmd::Replay { log } => cmd_replay(&log),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Resume(a) => cmd_resume(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
