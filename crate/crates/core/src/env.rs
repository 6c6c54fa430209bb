//! Episode state machine: reset, step, rewards and termination.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    apply_action, joint_velocities, proprioception, ActionMode, ActionVector, AgentError, AgentSpec,
    DEFAULT_OMEGA_MAX,
};
use crate::arena::{instantiate, Arena, ArenaError, ScriptSpec};
use crate::levelgen::{generate, GenError, GenParams, Level};
use crate::physics::{step_physics, ContactTarget, PartId, PhysicsConfig, PhysicsError, Tag, Vec3};
use crate::rng::Rng;
use crate::sensors::{apply_blackout, render_camera, sense_rays, CameraConfig, Image, RayHitRecord, RaycastConfig};

pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAXSTEPS: u64 = 2000;
pub const WALL_PENALTY: f64 = -1.0;
pub const WALL_REFRACTORY_STEPS: u64 = 20;
pub const FALL_PENALTY: f64 = -1.0;

fn default_maxsteps() -> u64 {
    DEFAULT_MAXSTEPS
}

fn default_omega_max() -> f64 {
    DEFAULT_OMEGA_MAX
}

fn default_raycast() -> Option<RaycastConfig> {
    Some(RaycastConfig::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub gen: GenParams,
    #[serde(default = "default_maxsteps")]
    pub maxsteps: u64,
    #[serde(default)]
    pub action_mode: ActionMode,
    #[serde(default = "default_omega_max")]
    pub omega_max: f64,
    #[serde(default = "default_raycast")]
    pub raycast: Option<RaycastConfig>,
    #[serde(default)]
    pub camera: Option<CameraConfig>,
    #[serde(default)]
    pub observe_joint_velocities: bool,
    #[serde(default)]
    pub physics: PhysicsConfig,
}

impl EpisodeConfig {
    pub fn new(gen: GenParams) -> Self {
        Self {
            gen,
            maxsteps: DEFAULT_MAXSTEPS,
            action_mode: ActionMode::default(),
            omega_max: DEFAULT_OMEGA_MAX,
            raycast: default_raycast(),
            camera: None,
            observe_joint_velocities: false,
            physics: PhysicsConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::Config(m));
        if self.maxsteps < 1 {
            return bad("maxsteps must be at least 1".into());
        }
        if self.raycast.is_none() && self.camera.is_none() {
            return bad("at least one of raycast or camera must be enabled".into());
        }
        if !(self.omega_max.is_finite() && self.omega_max > 0.0) {
            return bad("omega_max must be positive".into());
        }
        if let Some(r) = &self.raycast {
            r.validate().map_err(|e| EnvError::Config(e.to_string()))?;
        }
        if let Some(c) = &self.camera {
            c.validate().map_err(|e| EnvError::Config(e.to_string()))?;
        }
        self.physics.validate().map_err(|e| EnvError::Config(e.to_string()))?;
        self.gen.validate().map_err(|e| EnvError::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub joints: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_velocities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<RayHitRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<Image>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    GreenConsumed,
    Fell,
    AllSectorFoodConsumed,
    Timeout,
    None,
}

/// Per-step reward components; the step reward is their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardLedger {
    pub food: f64,
    pub wall: f64,
    pub head_ground: f64,
    pub time: f64,
    pub fall: f64,
}

impl RewardLedger {
    pub fn total(&self) -> f64 {
        self.food + self.wall + self.head_ground + self.time + self.fall
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: u64,
    pub reason: TerminationReason,
    pub cumulative_reward: f64,
    pub ledger: RewardLedger,
    /// Food indices consumed this step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub consumed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error(transparent)]
    MalformedAction(#[from] AgentError),
    #[error("episode finished")]
    EpisodeFinished,
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("episode aborted by policy: {message}")]
    Aborted { message: String, partial: Box<Trajectory> },
}

/// One running episode.
#[derive(Clone, Debug)]
pub struct Env {
    config: EpisodeConfig,
    level: Level,
    arena: Arena,
    step: u64,
    done: bool,
    cumulative: f64,
    /// Step of the last wall penalty per part id.
    wall_last: Vec<Option<u64>>,
    consumed: Vec<bool>,
    reason: TerminationReason,
}

impl Env {
    /// Generates the level, builds the world and returns the first observation.
    pub fn reset(config: EpisodeConfig) -> Result<(Env, Observation), EnvError> {
        config.validate()?;
        let level = generate(&config.gen)?;
        Self::from_level(config, level)
    }

    /// Starts an episode on an already generated level.
    pub fn from_level(config: EpisodeConfig, level: Level) -> Result<(Env, Observation), EnvError> {
        config.validate()?;
        let arena = instantiate(&level.arena, &AgentSpec::default())?;
        let n_parts = arena.world.parts.len();
        let n_food = arena.food_parts.len();
        let env = Env {
            config,
            level,
            arena,
            step: 0,
            done: false,
            cumulative: 0.0,
            wall_last: vec![None; n_parts],
            consumed: vec![false; n_food],
            reason: TerminationReason::None,
        };
        let obs = env.observe();
        Ok((env, obs))
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn level(&self) -> &Level {
        &self.level
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    /// Mutable access for debugging policies (teleports and the like).
    pub fn arena_mut(&mut self) -> &mut Arena {
        &mut self.arena
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn cumulative_reward(&self) -> f64 {
        self.cumulative
    }

    pub fn reason(&self) -> TerminationReason {
        self.reason
    }

    pub fn consumed(&self) -> &[bool] {
        &self.consumed
    }

    pub fn observe(&self) -> Observation {
        let world = &self.arena.world;
        let agent = &self.arena.agent;
        let eye = agent.eye(world);
        let rays = self.config.raycast.as_ref().map(|c| sense_rays(world, agent, &eye, c));
        let camera = self.config.camera.as_ref().map(|c| {
            let mut img = render_camera(world, agent, &eye, c);
            if let Some(b) = &self.level.blackout {
                apply_blackout(&mut img, b, self.step);
            }
            img
        });
        Observation {
            joints: proprioception(world, agent),
            joint_velocities: self
                .config
                .observe_joint_velocities
                .then(|| joint_velocities(world, agent, self.config.omega_max)),
            rays,
            camera,
        }
    }

    /// Validates a raw action and steps.
    pub fn step_raw(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let action = ActionVector::new(action)?;
        self.step(&action)
    }

    pub fn step(&mut self, action: &ActionVector) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let dt = self.config.physics.dt;
        let agent = self.arena.agent.clone();
        apply_action(&mut self.arena.world, &agent, action, self.config.action_mode, self.config.omega_max);
        self.arena.tick_scripts(self.step, dt);
        step_physics(&mut self.arena.world, &self.config.physics)?;
        self.step += 1;
        self.arena.update_triggers(self.step);

        let mut ledger = RewardLedger::default();
        let mut consumed_now = Vec::new();
        let mut green_now = false;
        let mut head_ground = false;
        let mut walls_hit: Vec<PartId> = Vec::new();
        let contacts = self.arena.world.contacts().to_vec();
        for c in &contacts {
            if !agent.owns(c.a) {
                continue;
            }
            match c.b {
                ContactTarget::Terrain => {
                    if c.a == agent.head {
                        head_ground = true;
                    }
                }
                ContactTarget::Part(p) => {
                    if c.tag_b.is_food() {
                        if let Some(i) = self.arena.food_index(p) {
                            if !self.consumed[i] {
                                self.consumed[i] = true;
                                self.arena.world.parts[p].enabled = false;
                                consumed_now.push(i);
                                ledger.food += self.level.arena.foods[i].reward();
                                green_now |= c.tag_b == Tag::FoodGreen;
                            }
                        }
                    } else if c.tag_b.is_wall() && !walls_hit.contains(&p) {
                        walls_hit.push(p);
                    }
                }
            }
        }
        for p in walls_hit {
            let fresh = self.wall_last[p].is_none_or(|t| self.step - t >= WALL_REFRACTORY_STEPS);
            if fresh {
                self.wall_last[p] = Some(self.step);
                ledger.wall += WALL_PENALTY;
            }
        }
        let per_step = 0.5 / self.config.maxsteps as f64;
        if head_ground {
            ledger.head_ground = -per_step;
        }
        ledger.time = -per_step;
        let fell = self
            .arena
            .world
            .fell_events()
            .iter()
            .any(|f| f.body == agent.body);
        if fell {
            ledger.fall = FALL_PENALTY;
        }

        let reward = ledger.total();
        self.cumulative += reward;
        self.reason = if green_now && self.level.green_terminates() {
            TerminationReason::GreenConsumed
        } else if self.sector_cleared() {
            TerminationReason::AllSectorFoodConsumed
        } else if fell {
            TerminationReason::Fell
        } else if self.step >= self.config.maxsteps {
            TerminationReason::Timeout
        } else {
            TerminationReason::None
        };
        self.done = self.reason != TerminationReason::None;
        Ok(StepResult {
            observation: self.observe(),
            reward,
            done: self.done,
            info: StepInfo {
                step: self.step,
                reason: self.reason,
                cumulative_reward: self.cumulative,
                ledger,
                consumed: consumed_now,
            },
        })
    }

    fn sector_cleared(&self) -> bool {
        let Some(k) = self.arena.entered_sector() else {
            return false;
        };
        match &self.arena.spec.scripts[k] {
            ScriptSpec::CloseGateOnEntry { foods, .. } => foods.iter().all(|&i| self.consumed[i]),
            _ => false,
        }
    }

    /// Moves the agent rigidly so its head sits above `(x, z)`, keeping its
    /// height relative to the terrain.
    pub fn teleport_agent(&mut self, x: f64, z: f64) {
        let world = &mut self.arena.world;
        let body = self.arena.agent.body;
        let root = world.bodies[body].root_position;
        let dy = world.terrain.height(x, z) - world.terrain.height(root.x, root.z);
        world.teleport_body(body, Vec3::new(x, root.y + dy, z));
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct PolicyError(pub String);

/// Maps observations to actions. `intervene` runs before each `act` and may
/// manipulate the environment directly (debug policies only).
pub trait Policy {
    fn act(&mut self, observation: &Observation, step: u64) -> Result<ActionVector, PolicyError>;

    fn intervene(&mut self, _env: &mut Env) {}
}

pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn act(&mut self, _: &Observation, _: u64) -> Result<ActionVector, PolicyError> {
        Ok(ActionVector::zeros())
    }
}

/// Uniform random actions from a seeded stream.
pub struct RandomPolicy {
    rng: Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Rng::derive(seed, "policy"),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _: &Observation, _: u64) -> Result<ActionVector, PolicyError> {
        let v: Vec<f64> = (0..crate::agent::ACTION_LEN).map(|_| self.rng.uniform(-1.0, 1.0)).collect();
        ActionVector::new(&v).map_err(|e| PolicyError(e.to_string()))
    }
}

/// Debug policy that teleports the agent onto the nearest uneaten green food,
/// then stands still.
#[derive(Default)]
pub struct TeleportPolicy {
    done: bool,
}

impl Policy for TeleportPolicy {
    fn act(&mut self, _: &Observation, _: u64) -> Result<ActionVector, PolicyError> {
        Ok(ActionVector::zeros())
    }

    fn intervene(&mut self, env: &mut Env) {
        if self.done {
            return;
        }
        let arena = env.arena();
        let head = arena.world.parts[arena.agent.head].position;
        let target = arena
            .spec
            .foods
            .iter()
            .enumerate()
            .filter(|(i, f)| !env.consumed()[*i] && f.kind == crate::arena::FoodKind::Green)
            .map(|(i, _)| arena.world.parts[arena.food_parts[i]].position)
            .min_by(|a, b| (a - head).norm().total_cmp(&(b - head).norm()));
        if let Some(p) = target {
            env.teleport_agent(p.x, p.z);
        }
        self.done = true;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub config: EpisodeConfig,
    pub steps: Vec<StepResult>,
    pub total_reward: f64,
    pub reason: TerminationReason,
}

/// Runs one episode to termination.
pub fn run_episode(config: &EpisodeConfig, policy: &mut dyn Policy) -> Result<Trajectory, EnvError> {
    let (mut env, mut obs) = Env::reset(config.clone())?;
    let mut steps = Vec::new();
    while !env.is_done() {
        policy.intervene(&mut env);
        let action = match policy.act(&obs, env.step_index()) {
            Ok(a) => a,
            Err(e) => {
                let total_reward = env.cumulative_reward();
                return Err(EnvError::Aborted {
                    message: e.0,
                    partial: Box::new(Trajectory {
                        config: config.clone(),
                        steps,
                        total_reward,
                        reason: env.reason(),
                    }),
                });
            }
        };
        let r = env.step(&action)?;
        obs = r.observation.clone();
        steps.push(r);
    }
    Ok(Trajectory {
        config: config.clone(),
        total_reward: env.cumulative_reward(),
        reason: env.reason(),
        steps,
    })
}

#[derive(Serialize)]
struct TrajectoryHeader<'a> {
    schema_version: u32,
    kind: &'static str,
    config: &'a EpisodeConfig,
}

/// Writes a trajectory as JSON lines: a header with the config, then one
/// step result per line.
pub fn write_trajectory<W: std::io::Write>(mut out: W, t: &Trajectory) -> std::io::Result<()> {
    let header = TrajectoryHeader {
        schema_version: TRAJECTORY_SCHEMA_VERSION,
        kind: "header",
        config: &t.config,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for s in &t.steps {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
