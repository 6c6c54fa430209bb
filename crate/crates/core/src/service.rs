//! Wire protocol, sessions, and the batch runners behind the CLI.
//!
//! The protocol is JSON lines: one request object per line, one response
//! object per line. Every response carries `schema_version`.

use std::io::{BufRead, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agent::{ActionMode, DEFAULT_OMEGA_MAX};
use crate::curriculum::{train_loop, z_value, Cell, CurriculumError, CurriculumState, TraceEntry, DEFAULT_C, DEFAULT_Z_INIT};
use crate::env::{
    run_episode, write_trajectory, Env, EnvError, EpisodeConfig, Observation, Policy, RandomPolicy, StepResult,
    TeleportPolicy, TerminationReason, ZeroPolicy, DEFAULT_MAXSTEPS,
};
use crate::levelgen::{GenParams, TaskId, MAX_DIFFICULTY};
use crate::physics::PhysicsConfig;
use crate::rng::Rng;
use crate::sensors::{CameraConfig, RaycastConfig};

pub const WIRE_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const SEEDS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Episode settings shared by every episode of a run; the level comes from
/// the scheduler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeTemplate {
    pub maxsteps: u64,
    pub action_mode: ActionMode,
    pub omega_max: f64,
    pub raycast: Option<RaycastConfig>,
    pub camera: Option<CameraConfig>,
    pub observe_joint_velocities: bool,
    pub physics: PhysicsConfig,
}

impl Default for EpisodeTemplate {
    fn default() -> Self {
        Self {
            maxsteps: DEFAULT_MAXSTEPS,
            action_mode: ActionMode::default(),
            omega_max: DEFAULT_OMEGA_MAX,
            raycast: Some(RaycastConfig::default()),
            camera: None,
            observe_joint_velocities: false,
            physics: PhysicsConfig::default(),
        }
    }
}

impl EpisodeTemplate {
    pub fn config(&self, gen: GenParams) -> EpisodeConfig {
        EpisodeConfig {
            gen,
            maxsteps: self.maxsteps,
            action_mode: self.action_mode,
            omega_max: self.omega_max,
            raycast: self.raycast,
            camera: self.camera,
            observe_joint_velocities: self.observe_joint_velocities,
            physics: self.physics.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Zero,
    Random,
    Teleport,
}

impl PolicyKind {
    pub fn build(self, seed: u64) -> Box<dyn Policy> {
        match self {
            PolicyKind::Zero => Box::new(ZeroPolicy),
            PolicyKind::Random => Box::new(RandomPolicy::new(seed)),
            PolicyKind::Teleport => Box::new(TeleportPolicy::default()),
        }
    }
}

/// Settings for every CLI mode; unused fields are ignored by each mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tasks: Vec<TaskId>,
    pub difficulty_min: u8,
    pub difficulty_max: u8,
    pub episodes: u64,
    pub master_seed: u64,
    pub policy: PolicyKind,
    pub episode: EpisodeTemplate,
    pub c: f64,
    pub z_init: f64,
    pub seeds_file: Option<std::path::PathBuf>,
    pub trace_out: Option<std::path::PathBuf>,
    pub report_out: Option<std::path::PathBuf>,
    pub checkpoint: Option<std::path::PathBuf>,
    pub host: String,
    pub port: Option<u16>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tasks: TaskId::ALL.to_vec(),
            difficulty_min: 0,
            difficulty_max: MAX_DIFFICULTY,
            episodes: 100,
            master_seed: 0,
            policy: PolicyKind::default(),
            episode: EpisodeTemplate::default(),
            c: DEFAULT_C,
            z_init: DEFAULT_Z_INIT,
            seeds_file: None,
            trace_out: None,
            report_out: None,
            checkpoint: None,
            host: "127.0.0.1".into(),
            port: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.difficulty_min > self.difficulty_max || self.difficulty_max > MAX_DIFFICULTY {
            return Err(ServiceError::Config(format!(
                "difficulty range {}..={} must lie within 0..={MAX_DIFFICULTY}",
                self.difficulty_min, self.difficulty_max
            )));
        }
        if self.tasks.is_empty() {
            return Err(ServiceError::Config("no tasks enabled".into()));
        }
        self.episode
            .config(GenParams::new(TaskId::L0, 0, 0))
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        CurriculumState::grid(&self.tasks, self.difficulty_min, self.difficulty_max)
    }

    pub fn curriculum(&self) -> Result<CurriculumState, ServiceError> {
        Ok(CurriculumState::new(self.cells(), self.c, self.z_init, self.master_seed)?)
    }
}

// ---------------------------------------------------------------------------
// Wire messages

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Request {
    Reset {
        task: TaskId,
        difficulty: u8,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        maxsteps: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action_mode: Option<ActionMode>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_max: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        raycast: Option<RaycastConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        camera: Option<CameraConfig>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        observe_joint_velocities: Option<bool>,
    },
    Step {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<Vec<f64>>,
    },
    CurriculumNext {},
    RecordResult {
        task: TaskId,
        difficulty: u8,
        reward: f64,
    },
    Eval {
        seeds: Vec<SeedTriple>,
        #[serde(default)]
        policy: PolicyKind,
    },
    Close {},
}

pub const COMMANDS: [&str; 6] = ["reset", "step", "curriculum_next", "record_result", "eval", "close"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub schema_version: u32,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

impl Response {
    pub fn ok(payload: Value) -> Self {
        Self {
            schema_version: WIRE_SCHEMA_VERSION,
            ok: true,
            payload: Some(payload),
            error: None,
        }
    }

    pub fn err(code: &str, message: impl Into<String>) -> Self {
        Self {
            schema_version: WIRE_SCHEMA_VERSION,
            ok: false,
            payload: None,
            error: Some(WireError {
                code: code.into(),
                message: message.into(),
            }),
        }
    }

    pub fn code(&self) -> Option<&str> {
        self.error.as_ref().map(|e| e.code.as_str())
    }
}

#[derive(Serialize)]
struct ResetPayload<'a> {
    observation: &'a Observation,
    step: u64,
    task: TaskId,
    base_task: TaskId,
    difficulty: u8,
    seed: u64,
}

fn env_error_code(e: &EnvError) -> &'static str {
    match e {
        EnvError::Config(_) => "config-error",
        EnvError::Generation(_) => "generation-failed",
        EnvError::Arena(_) => "invalid-spec",
        EnvError::MalformedAction(_) => "bad-action",
        EnvError::EpisodeFinished => "episode-finished",
        EnvError::Physics(_) => "physics-error",
        EnvError::Aborted { .. } => "episode-aborted",
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("payload serializes")
}

/// One client's state: at most one live episode, plus an optional handle to
/// the shared curriculum.
pub struct Session {
    template: EpisodeTemplate,
    env: Option<Env>,
    curriculum: Option<Arc<Mutex<CurriculumState>>>,
}

impl Session {
    pub fn new(template: EpisodeTemplate, curriculum: Option<Arc<Mutex<CurriculumState>>>) -> Self {
        Self {
            template,
            env: None,
            curriculum,
        }
    }

    pub fn env(&self) -> Option<&Env> {
        self.env.as_ref()
    }

    /// Handles one request line. The flag is true when the session should end.
    pub fn handle_line(&mut self, line: &str) -> (Response, bool) {
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return (Response::err("bad-json", e.to_string()), false),
        };
        let Some(cmd) = value.get("cmd").and_then(Value::as_str).map(str::to_owned) else {
            return (Response::err("bad-request", "missing string field \"cmd\""), false);
        };
        if !COMMANDS.contains(&cmd.as_str()) {
            return (Response::err("unknown-cmd", format!("unknown cmd {cmd:?}")), false);
        }
        match serde_json::from_value::<Request>(value) {
            Ok(req) => self.handle(req),
            Err(e) => {
                // A step with a malformed action is a bad action, not a bad request.
                let code = if cmd == "step" && self.env.is_some() {
                    "bad-action"
                } else if cmd == "step" {
                    "no-episode"
                } else {
                    "bad-request"
                };
                (Response::err(code, e.to_string()), false)
            }
        }
    }

    pub fn handle(&mut self, req: Request) -> (Response, bool) {
        let resp = match req {
            Request::Reset {
                task,
                difficulty,
                seed,
                maxsteps,
                action_mode,
                omega_max,
                raycast,
                camera,
                observe_joint_velocities,
            } => {
                let mut cfg = self.template.config(GenParams::new(task, difficulty, seed));
                if let Some(m) = maxsteps {
                    cfg.maxsteps = m;
                }
                if let Some(m) = action_mode {
                    cfg.action_mode = m;
                }
                if let Some(w) = omega_max {
                    cfg.omega_max = w;
                }
                if raycast.is_some() {
                    cfg.raycast = raycast;
                }
                if camera.is_some() {
                    cfg.camera = camera;
                }
                if let Some(v) = observe_joint_velocities {
                    cfg.observe_joint_velocities = v;
                }
                match Env::reset(cfg) {
                    Ok((env, obs)) => {
                        let level = env.level();
                        let payload = to_value(&ResetPayload {
                            observation: &obs,
                            step: 0,
                            task: level.task,
                            base_task: level.base_task,
                            difficulty: level.difficulty,
                            seed: level.seed,
                        });
                        self.env = Some(env);
                        Response::ok(payload)
                    }
                    Err(e) => Response::err(env_error_code(&e), e.to_string()),
                }
            }
            Request::Step { action } => match (&mut self.env, action) {
                (None, _) => Response::err("no-episode", "step before reset"),
                (Some(_), None) => Response::err("bad-action", "missing action"),
                (Some(env), Some(a)) => match env.step_raw(&a) {
                    Ok(r) => Response::ok(to_value(&r)),
                    Err(e) => Response::err(env_error_code(&e), e.to_string()),
                },
            },
            Request::CurriculumNext {} => match &self.curriculum {
                None => Response::err("no-curriculum", "server runs without a curriculum"),
                Some(c) => {
                    let mut c = c.lock().expect("curriculum lock");
                    let cell = c.sample_next();
                    Response::ok(serde_json::json!({ "task": cell.task, "difficulty": cell.difficulty }))
                }
            },
            Request::RecordResult { task, difficulty, reward } => match &self.curriculum {
                None => Response::err("no-curriculum", "server runs without a curriculum"),
                Some(_) if !reward.is_finite() => Response::err("bad-request", "reward must be finite"),
                Some(c) => {
                    let mut c = c.lock().expect("curriculum lock");
                    let z_init = c.z_init;
                    match c.record(Cell::new(task, difficulty), reward) {
                        Ok(s) => Response::ok(serde_json::json!({
                            "task": task,
                            "difficulty": difficulty,
                            "mean": s.mean,
                            "std": s.std,
                            "count": s.count,
                            "z": z_value(s, z_init),
                        })),
                        Err(e) => Response::err("unknown-cell", e.to_string()),
                    }
                }
            },
            Request::Eval { seeds, policy } => match evaluate(&seeds, policy, &self.template) {
                Ok(report) => Response::ok(to_value(&report)),
                Err(e) => Response::err("runtime-error", e.to_string()),
            },
            Request::Close {} => return (Response::ok(serde_json::json!({})), true),
        };
        (resp, false)
    }
}

/// Serves one session over a line-oriented stream until `close` or EOF.
pub fn serve_stream<R: BufRead, W: Write>(session: &mut Session, reader: R, mut writer: W) -> std::io::Result<()> {
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (resp, close) = session.handle_line(&line);
        serde_json::to_writer(&mut writer, &resp)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        if close {
            break;
        }
    }
    Ok(())
}

/// Accepts connections, one thread each; stops after `max_connections` when given.
pub fn serve_tcp(
    listener: TcpListener,
    template: EpisodeTemplate,
    curriculum: Option<Arc<Mutex<CurriculumState>>>,
    max_connections: Option<usize>,
) -> std::io::Result<()> {
    let mut handles = Vec::new();
    for (n, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let template = template.clone();
        let curriculum = curriculum.clone();
        handles.push(std::thread::spawn(move || {
            let reader = std::io::BufReader::new(stream.try_clone()?);
            let mut session = Session::new(template, curriculum);
            serve_stream(&mut session, reader, stream)
        }));
        if max_connections.is_some_and(|m| n + 1 >= m) {
            break;
        }
    }
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Batch runs

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeedTriple {
    pub task: TaskId,
    pub difficulty: u8,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub task: TaskId,
    pub difficulty: u8,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<TerminationReason>,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Uniform draw over the enabled cells plus a fresh level seed.
pub fn random_schedule(cells: &[Cell], rng: &mut Rng) -> SeedTriple {
    let cell = cells[rng.below(cells.len() as u64) as usize];
    SeedTriple {
        task: cell.task,
        difficulty: cell.difficulty,
        seed: rng.next_u64(),
    }
}

/// Runs `config.episodes` episodes on uniformly drawn cells with a built-in
/// policy, logging trajectories to `trace` when given.
pub fn run_random(config: &RunConfig, mut trace: Option<&mut dyn Write>) -> Result<Vec<EpisodeSummary>, ServiceError> {
    config.validate()?;
    let cells = config.cells();
    let mut rng = Rng::derive(config.master_seed, "random-run");
    let mut out = Vec::with_capacity(config.episodes as usize);
    for episode in 0..config.episodes {
        let t = random_schedule(&cells, &mut rng);
        let cfg = config.episode.config(GenParams::new(t.task, t.difficulty, t.seed));
        let mut policy = config.policy.build(t.seed);
        let summary = match run_episode(&cfg, policy.as_mut()) {
            Ok(traj) => {
                if let Some(w) = trace.as_deref_mut() {
                    write_trajectory(w, &traj)?;
                }
                EpisodeSummary {
                    episode,
                    task: t.task,
                    difficulty: t.difficulty,
                    seed: t.seed,
                    total_reward: Some(traj.total_reward),
                    reason: Some(traj.reason),
                    steps: traj.steps.len(),
                    error: None,
                }
            }
            Err(e) => EpisodeSummary {
                episode,
                task: t.task,
                difficulty: t.difficulty,
                seed: t.seed,
                total_reward: None,
                reason: None,
                steps: 0,
                error: Some(e.to_string()),
            },
        };
        out.push(summary);
    }
    Ok(out)
}

/// Curriculum training with a built-in policy. Level seeds come from a stream
/// derived from the master seed.
pub fn run_curriculum(config: &RunConfig, state: &mut CurriculumState) -> Result<Vec<TraceEntry>, ServiceError> {
    config.validate()?;
    let mut seeds = Rng::derive(config.master_seed, "curriculum-seeds");
    let trace = train_loop(state, config.episodes, |cell, _| {
        let seed = seeds.next_u64();
        let cfg = config.episode.config(GenParams::new(cell.task, cell.difficulty, seed));
        let mut policy = config.policy.build(seed);
        run_episode(&cfg, policy.as_mut()).map(|t| t.total_reward)
    });
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: TaskId,
    pub difficulty: u8,
    pub episodes: u64,
    pub mean_reward: f64,
    pub success_rate: f64,
    #[serde(default)]
    pub errors: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub policy: PolicyKind,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut s = String::from("task  diff  episodes  mean_reward  success\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<5} {:>4}  {:>8}  {:>11.4}  {:>7.3}\n",
                r.task.name(),
                r.difficulty,
                r.episodes,
                r.mean_reward,
                r.success_rate
            ));
        }
        s
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SeedsFile {
    Bare(Vec<SeedTriple>),
    Versioned { schema_version: u32, seeds: Vec<SeedTriple> },
}

/// Parses a seeds file: either a bare JSON array of triples or
/// `{"schema_version": 1, "seeds": [...]}`. Blank input is an empty list.
pub fn parse_seeds(text: &str) -> Result<Vec<SeedTriple>, ServiceError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let parsed: SeedsFile =
        serde_json::from_str(text).map_err(|e| ServiceError::Config(format!("unreadable seeds file: {e}")))?;
    let seeds = match parsed {
        SeedsFile::Bare(s) => s,
        SeedsFile::Versioned { schema_version, seeds } => {
            if schema_version != SEEDS_SCHEMA_VERSION {
                return Err(ServiceError::Config(format!("unsupported seeds schema_version {schema_version}")));
            }
            seeds
        }
    };
    if let Some(t) = seeds.iter().find(|t| t.difficulty > MAX_DIFFICULTY) {
        return Err(ServiceError::Config(format!("seed triple difficulty {} out of range", t.difficulty)));
    }
    Ok(seeds)
}

/// Runs every triple once and aggregates per (task, difficulty).
pub fn evaluate(seeds: &[SeedTriple], policy: PolicyKind, template: &EpisodeTemplate) -> Result<EvalReport, ServiceError> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<(TaskId, u8), (u64, f64, u64, u64)> = BTreeMap::new();
    for t in seeds {
        let cfg = template.config(GenParams::new(t.task, t.difficulty, t.seed));
        let mut p = policy.build(t.seed);
        let entry = acc.entry((t.task, t.difficulty)).or_default();
        match run_episode(&cfg, p.as_mut()) {
            Ok(traj) => {
                entry.0 += 1;
                entry.1 += traj.total_reward;
                if matches!(
                    traj.reason,
                    TerminationReason::GreenConsumed | TerminationReason::AllSectorFoodConsumed
                ) {
                    entry.2 += 1;
                }
            }
            Err(_) => entry.3 += 1,
        }
    }
    let rows = acc
        .into_iter()
        .map(|((task, difficulty), (n, sum, wins, errors))| ReportRow {
            task,
            difficulty,
            episodes: n,
            mean_reward: if n > 0 { sum / n as f64 } else { 0.0 },
            success_rate: if n > 0 { wins as f64 / n as f64 } else { 0.0 },
            errors,
        })
        .collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        policy,
        rows,
    })
}

/// Deterministic reserved evaluation set: `per_cell` seeds for every cell.
pub fn reserved_seeds(per_cell: usize) -> Vec<SeedTriple> {
    let mut rng = Rng::derive(0, "reserved-seeds");
    let mut out = Vec::new();
    for task in TaskId::ALL {
        for difficulty in 0..=MAX_DIFFICULTY {
            for _ in 0..per_cell {
                out.push(SeedTriple {
                    task,
                    difficulty,
                    seed: rng.next_u64(),
                });
            }
        }
    }
    out
}

/// Convenience for tests and clients: a step result as it appears on the wire.
pub fn step_payload(r: &StepResult) -> Value {
    to_value(r)
}
