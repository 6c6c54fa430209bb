use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use limbarena_core::curriculum::CurriculumState;
use limbarena_core::levelgen::{generate, GenParams, TaskId};
use limbarena_core::service::{
    evaluate, parse_seeds, reserved_seeds, run_curriculum, run_random, serve_stream, serve_tcp, PolicyKind, RunConfig,
    Session, SEEDS_SCHEMA_VERSION,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "limbarena", version, about = "Headless arena for an articulated agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the generated arena spec for one level as JSON.
    Gen {
        #[arg(long)]
        task: TaskId,
        #[arg(long, default_value_t = 0)]
        difficulty: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the full level (task, seed, blackout) instead of only the arena.
        #[arg(long)]
        level: bool,
    },
    /// Episodes on uniformly drawn cells with a built-in policy.
    RunRandom(RunArgs),
    /// Episodes scheduled by the variance-driven curriculum.
    RunCurriculum(RunArgs),
    /// Serve the wire protocol over stdio or TCP.
    Serve {
        #[command(flatten)]
        common: Common,
        /// Serve a single session on stdin/stdout.
        #[arg(long, conflicts_with = "port")]
        stdio: bool,
        #[arg(long, env = "LIMBARENA_PORT")]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
    },
    /// Run every triple of a seeds file once and report per cell.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seeds_file: Option<PathBuf>,
        #[arg(long, env = "LIMBARENA_REPORT_OUT")]
        report_out: Option<PathBuf>,
    },
    /// Print a reserved evaluation seed set.
    Seeds {
        #[arg(long, default_value_t = 3)]
        per_cell: usize,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated task list, e.g. L0,L2Y.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<TaskId>>,
    #[arg(long)]
    difficulty_min: Option<u8>,
    #[arg(long)]
    difficulty_max: Option<u8>,
    #[arg(long)]
    maxsteps: Option<u64>,
    #[arg(long, value_parser = parse_policy)]
    policy: Option<PolicyKind>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    z_init: Option<f64>,
    #[arg(long, env = "LIMBARENA_TRACE_OUT")]
    trace_out: Option<PathBuf>,
    #[arg(long, env = "LIMBARENA_CHECKPOINT")]
    checkpoint: Option<PathBuf>,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned()))
        .map_err(|_| format!("unknown policy {s:?} (zero, random, teleport)"))
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait Classify<T> {
    fn config_err(self) -> Result<T, Failure>;
    fn runtime_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_CONFIG,
            error: e.into(),
        })
    }
    fn runtime_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: EXIT_RUNTIME,
            error: e.into(),
        })
    }
}

fn load_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(t) = &common.tasks {
        cfg.tasks = t.clone();
    }
    if let Some(d) = common.difficulty_min {
        cfg.difficulty_min = d;
    }
    if let Some(d) = common.difficulty_max {
        cfg.difficulty_max = d;
    }
    if let Some(m) = common.maxsteps {
        cfg.episode.maxsteps = m;
    }
    if let Some(p) = common.policy {
        cfg.policy = p;
    }
    Ok(cfg)
}

fn load_run_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = load_config(&args.common)?;
    if let Some(n) = args.episodes {
        cfg.episodes = n;
    }
    if let Some(s) = args.master_seed {
        cfg.master_seed = s;
    }
    if let Some(c) = args.c {
        cfg.c = c;
    }
    if let Some(z) = args.z_init {
        cfg.z_init = z;
    }
    if args.trace_out.is_some() {
        cfg.trace_out = args.trace_out.clone();
    }
    if args.checkpoint.is_some() {
        cfg.checkpoint = args.checkpoint.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn cmd_gen(task: TaskId, difficulty: u8, seed: u64, level: bool) -> Result<(), Failure> {
    let params = GenParams::new(task, difficulty, seed);
    params.validate().config_err()?;
    let lvl = generate(&params).runtime_err()?;
    let json = if level { lvl.to_json() } else { lvl.arena.to_json() };
    println!("{json}");
    Ok(())
}

fn cmd_run_random(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load_run_config(args).config_err()?;
    let mut trace = cfg.trace_out.as_deref().map(create).transpose().runtime_err()?;
    let summaries = run_random(&cfg, trace.as_mut().map(|w| w as &mut dyn Write)).runtime_err()?;
    if let Some(w) = trace.as_mut() {
        w.flush().runtime_err()?;
    }
    let mut out = std::io::stdout().lock();
    for s in &summaries {
        if let Some(e) = &s.error {
            eprintln!("episode {} ({} d{} seed {}) failed: {e}", s.episode, s.task, s.difficulty, s.seed);
        }
        serde_json::to_writer(&mut out, s).runtime_err()?;
        writeln!(out).runtime_err()?;
    }
    Ok(())
}

fn cmd_run_curriculum(args: &RunArgs) -> Result<(), Failure> {
    let cfg = load_run_config(args).config_err()?;
    let mut state = match cfg.checkpoint.as_deref().filter(|p| p.exists()) {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .config_err()?;
            CurriculumState::from_checkpoint(&text).config_err()?
        }
        None => cfg.curriculum().config_err()?,
    };
    let trace = run_curriculum(&cfg, &mut state).runtime_err()?;
    let mut out: Box<dyn Write> = match &cfg.trace_out {
        Some(p) => Box::new(create(p).runtime_err()?),
        None => Box::new(std::io::stdout().lock()),
    };
    for t in &trace {
        if let Some(e) = &t.error {
            eprintln!("episode {} ({} d{}) failed: {e}", t.episode, t.cell.task, t.cell.difficulty);
        }
        serde_json::to_writer(&mut out, t).runtime_err()?;
        writeln!(out).runtime_err()?;
    }
    out.flush().runtime_err()?;
    if let Some(p) = &cfg.checkpoint {
        std::fs::write(p, state.to_checkpoint())
            .with_context(|| format!("writing {}", p.display()))
            .runtime_err()?;
    }
    Ok(())
}

fn cmd_serve(common: &Common, stdio: bool, port: Option<u16>, host: Option<String>) -> Result<(), Failure> {
    let mut cfg = load_config(common).config_err()?;
    if port.is_some() {
        cfg.port = port;
    }
    if let Some(h) = host {
        cfg.host = h;
    }
    cfg.validate().config_err()?;
    let curriculum = Some(Arc::new(Mutex::new(cfg.curriculum().config_err()?)));
    if stdio || cfg.port.is_none() {
        let mut session = Session::new(cfg.episode.clone(), curriculum);
        let stdin = std::io::stdin().lock();
        return serve_stream(&mut session, stdin, std::io::stdout().lock()).runtime_err();
    }
    let addr = format!("{}:{}", cfg.host, cfg.port.expect("checked above"));
    let listener = std::net::TcpListener::bind(&addr)
        .with_context(|| format!("binding {addr}"))
        .runtime_err()?;
    eprintln!("listening on {}", listener.local_addr().runtime_err()?);
    serve_tcp(listener, cfg.episode.clone(), curriculum, None).runtime_err()
}

fn cmd_eval(common: &Common, seeds_file: Option<PathBuf>, report_out: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = load_config(common).config_err()?;
    if seeds_file.is_some() {
        cfg.seeds_file = seeds_file;
    }
    if report_out.is_some() {
        cfg.report_out = report_out;
    }
    cfg.validate().config_err()?;
    let path = cfg
        .seeds_file
        .clone()
        .ok_or_else(|| anyhow!("eval needs --seeds-file or seeds_file in the config"))
        .config_err()?;
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading {}", path.display()))
        .config_err()?;
    let seeds: Vec<_> = parse_seeds(&text)
        .config_err()?
        .into_iter()
        .filter(|t| cfg.tasks.contains(&t.task) && (cfg.difficulty_min..=cfg.difficulty_max).contains(&t.difficulty))
        .collect();
    let report = evaluate(&seeds, cfg.policy, &cfg.episode).runtime_err()?;
    match &cfg.report_out {
        Some(p) => std::fs::write(p, report.to_json() + "\n")
            .with_context(|| format!("writing {}", p.display()))
            .runtime_err()?,
        None => println!("{}", report.to_json()),
    }
    eprint!("{}", report.table());
    Ok(())
}

fn cmd_seeds(per_cell: usize) -> Result<(), Failure> {
    #[derive(serde::Serialize)]
    struct Doc {
        schema_version: u32,
        seeds: Vec<limbarena_core::service::SeedTriple>,
    }
    let doc = Doc {
        schema_version: SEEDS_SCHEMA_VERSION,
        seeds: reserved_seeds(per_cell),
    };
    println!("{}", serde_json::to_string_pretty(&doc).runtime_err()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen {
            task,
            difficulty,
            seed,
            level,
        } => cmd_gen(task, difficulty, seed, level),
        Command::RunRandom(args) => cmd_run_random(&args),
        Command::RunCurriculum(args) => cmd_run_curriculum(&args),
        Command::Serve {
            common,
            stdio,
            port,
            host,
        } => cmd_serve(&common, stdio, port, host),
        Command::Eval {
            common,
            seeds_file,
            report_out,
        } => cmd_eval(&common, seeds_file, report_out),
        Command::Seeds { per_cell } => cmd_seeds(per_cell),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
