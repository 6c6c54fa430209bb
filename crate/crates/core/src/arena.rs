//! Declarative arena description, its instantiation into a world, and the
//! kinematic scripts that move parts of it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{assemble_agent, heading_rotation, Agent, AgentError, AgentSpec, SpawnPose};
use crate::physics::{
    ContactTarget, Heightfield, HoleRect, Motion, PartId, Quat, RigidPart, Shape, Tag, Terrain, Vec3, World,
};

pub const ARENA_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_ARENA_SIZE: f64 = 40.0;
pub const BOUND_HEIGHT: f64 = 2.0;
pub const BOUND_THICKNESS: f64 = 1.0;
/// Largest tolerated overlap between two static blocks.
pub const STATIC_OVERLAP_TOLERANCE: f64 = 1e-3;

pub mod colors {
    pub const WALL: [f64; 3] = [0.55, 0.55, 0.58];
    pub const TRANSPARENT_WALL: [f64; 3] = [0.80, 0.90, 0.95];
    pub const BOUND: [f64; 3] = [0.30, 0.30, 0.34];
    pub const PILLAR: [f64; 3] = [0.60, 0.35, 0.60];
    pub const PLANK: [f64; 3] = [0.55, 0.40, 0.20];
    pub const GATE: [f64; 3] = [0.35, 0.45, 0.65];
    pub const GREEN_FOOD: [f64; 3] = [0.10, 0.80, 0.15];
    pub const YELLOW_FOOD: [f64; 3] = [0.95, 0.80, 0.10];
    pub const FLOOR: [f64; 3] = [0.45, 0.42, 0.38];
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArenaError {
    #[error("invalid arena spec: {0}")]
    InvalidSpec(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ArenaError> {
    Err(ArenaError::InvalidSpec(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoodKind {
    Green,
    Yellow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoodSpec {
    pub kind: FoodKind,
    /// Sphere diameter in meters.
    pub scale: f64,
    pub position: [f64; 3],
    pub color: [f64; 3],
}

impl FoodSpec {
    pub fn new(kind: FoodKind, scale: f64, x: f64, z: f64) -> Self {
        Self {
            kind,
            scale,
            position: [x, scale / 2.0, z],
            color: match kind {
                FoodKind::Green => colors::GREEN_FOOD,
                FoodKind::Yellow => colors::YELLOW_FOOD,
            },
        }
    }

    pub fn radius(&self) -> f64 {
        self.scale / 2.0
    }

    pub fn reward(&self) -> f64 {
        match self.kind {
            FoodKind::Green => self.scale,
            FoodKind::Yellow => self.scale / 2.0,
        }
    }

    pub fn tag(&self) -> Tag {
        match self.kind {
            FoodKind::Green => Tag::FoodGreen,
            FoodKind::Yellow => Tag::FoodYellow,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Wall,
    Pillar,
    Plank,
    /// Starts open (disabled) and is closed by a script.
    Gate,
}

/// A yaw-rotated box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub yaw_deg: f64,
    pub color: [f64; 3],
    pub transparent: bool,
}

impl BlockSpec {
    /// Opaque wall standing on the floor.
    pub fn wall(x: f64, z: f64, half_x: f64, half_z: f64, height: f64, yaw_deg: f64) -> Self {
        Self {
            kind: BlockKind::Wall,
            center: [x, height / 2.0, z],
            half_extents: [half_x, height / 2.0, half_z],
            yaw_deg,
            color: colors::WALL,
            transparent: false,
        }
    }

    pub fn transparent_wall(x: f64, z: f64, half_x: f64, half_z: f64, height: f64, yaw_deg: f64) -> Self {
        Self {
            color: colors::TRANSPARENT_WALL,
            transparent: true,
            ..Self::wall(x, z, half_x, half_z, height, yaw_deg)
        }
    }

    pub fn tag(&self) -> Tag {
        match self.kind {
            BlockKind::Wall | BlockKind::Gate => Tag::Wall,
            BlockKind::Pillar => Tag::Pillar,
            BlockKind::Plank => Tag::Plank,
        }
    }

    pub fn rotation(&self) -> Quat {
        heading_rotation(self.yaw_deg)
    }

    /// Footprint corners in the xz plane.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        let [hx, _, hz] = self.half_extents;
        // Local x maps to (cos, -sin), local z to (sin, cos) for a yaw about +y.
        let ax = [c * hx, -s * hx];
        let az = [s * hz, c * hz];
        let [x, _, z] = self.center;
        [
            [x + ax[0] + az[0], z + ax[1] + az[1]],
            [x + ax[0] - az[0], z + ax[1] - az[1]],
            [x - ax[0] - az[0], z - ax[1] - az[1]],
            [x - ax[0] + az[0], z - ax[1] + az[1]],
        ]
    }
}

/// Axis-aligned rectangle on the floor plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Region {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && z >= self.min[1] && z <= self.max[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Food(usize),
    Block(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptSpec {
    /// Moves the target through `waypoints` at constant speed, then stops.
    LinearMove {
        target: Target,
        waypoints: Vec<[f64; 3]>,
        speed: f64,
    },
    /// Lowers every target together by `drop` meters at `speed`.
    DescendPillar { targets: Vec<Target>, speed: f64, drop: f64 },
    /// Enables `gate` the first time the agent's head center is inside `region`.
    /// `foods` are the food items enclosed by the gated sector.
    CloseGateOnEntry { gate: usize, region: Region, foods: Vec<usize> },
    /// Straight-line motion on the floor plane, reflecting at region borders.
    BounceInRegion {
        target: Target,
        velocity: [f64; 2],
        region: Region,
    },
    /// Rotates the target about a horizontal hinge once any agent part touches it.
    TipOnPush {
        target: Target,
        pivot: [f64; 3],
        axis: [f64; 3],
        angle_deg: f64,
        rate_deg: f64,
    },
}

impl ScriptSpec {
    pub fn targets(&self) -> Vec<Target> {
        match self {
            ScriptSpec::LinearMove { target, .. }
            | ScriptSpec::BounceInRegion { target, .. }
            | ScriptSpec::TipOnPush { target, .. } => vec![*target],
            ScriptSpec::DescendPillar { targets, .. } => targets.clone(),
            ScriptSpec::CloseGateOnEntry { gate, .. } => vec![Target::Block(*gate)],
        }
    }
}

/// Declarative scene. Field order is the canonical JSON key order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArenaSpec {
    pub schema_version: u32,
    pub arena_size: f64,
    pub floor_color: [f64; 3],
    pub bound_color: [f64; 3],
    pub terrain: Option<Heightfield>,
    pub holes: Vec<HoleRect>,
    pub blocks: Vec<BlockSpec>,
    pub foods: Vec<FoodSpec>,
    pub scripts: Vec<ScriptSpec>,
    pub spawn: SpawnPose,
}

impl Default for ArenaSpec {
    fn default() -> Self {
        Self {
            schema_version: ARENA_SCHEMA_VERSION,
            arena_size: DEFAULT_ARENA_SIZE,
            floor_color: colors::FLOOR,
            bound_color: colors::BOUND,
            terrain: None,
            holes: Vec::new(),
            blocks: Vec::new(),
            foods: Vec::new(),
            scripts: Vec::new(),
            spawn: SpawnPose {
                x: 0.0,
                z: 0.0,
                heading_deg: 0.0,
            },
        }
    }
}

/// 2D oriented-rectangle overlap depth by separating axes. Positive means overlap.
fn rect_overlap(a: &[[f64; 2]; 4], b: &[[f64; 2]; 4]) -> f64 {
    let mut depth = f64::INFINITY;
    for poly in [a, b] {
        for i in 0..2 {
            let e = [poly[i + 1][0] - poly[i][0], poly[i + 1][1] - poly[i][1]];
            let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
            if len < 1e-12 {
                continue;
            }
            let n = [-e[1] / len, e[0] / len];
            let proj = |p: &[[f64; 2]; 4]| {
                p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    let d = v[0] * n[0] + v[1] * n[1];
                    (lo.min(d), hi.max(d))
                })
            };
            let (alo, ahi) = proj(a);
            let (blo, bhi) = proj(b);
            depth = depth.min(ahi.min(bhi) - alo.max(blo));
        }
    }
    depth
}

/// Penetration depth of two blocks (positive means they overlap).
pub fn block_overlap(a: &BlockSpec, b: &BlockSpec) -> f64 {
    let dy = (a.center[1] + a.half_extents[1]).min(b.center[1] + b.half_extents[1])
        - (a.center[1] - a.half_extents[1]).max(b.center[1] - b.half_extents[1]);
    rect_overlap(&a.footprint(), &b.footprint()).min(dy)
}

fn finite3(v: &[f64; 3]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl ArenaSpec {
    pub fn half_size(&self) -> f64 {
        self.arena_size / 2.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("arena spec serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ArenaError> {
        serde_json::from_str(s).map_err(|e| ArenaError::InvalidSpec(format!("malformed JSON: {e}")))
    }

    pub fn inside(&self, x: f64, z: f64, margin: f64) -> bool {
        let h = self.half_size() - margin;
        x.abs() <= h && z.abs() <= h
    }

    /// Checks every structural invariant; the message names the violated rule.
    pub fn validate(&self) -> Result<(), ArenaError> {
        if self.schema_version != ARENA_SCHEMA_VERSION {
            return invalid(format!("unsupported schema_version {}", self.schema_version));
        }
        if !(self.arena_size.is_finite() && self.arena_size > 0.0) {
            return invalid("arena_size must be positive");
        }
        if self.foods.is_empty() {
            return invalid("arena has no food");
        }
        for (i, f) in self.foods.iter().enumerate() {
            if !(f.scale.is_finite() && f.scale > 0.0) || !finite3(&f.position) {
                return invalid(format!("food {i}: scale must be positive and position finite"));
            }
            if !self.inside(f.position[0], f.position[2], f.radius() - 1e-9) {
                return invalid(format!("food {i} outside arena bounds"));
            }
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if !finite3(&b.center) || !b.half_extents.iter().all(|h| h.is_finite() && *h > 0.0) {
                return invalid(format!("block {i}: non-finite center or non-positive extents"));
            }
            if !b.footprint().iter().all(|c| self.inside(c[0], c[1], -1e-9)) {
                return invalid(format!("block {i} outside arena bounds"));
            }
        }
        for (i, h) in self.holes.iter().enumerate() {
            if !(h.min[0] < h.max[0] && h.min[1] < h.max[1]) {
                return invalid(format!("hole {i} is empty"));
            }
            if !self.inside(h.min[0], h.min[1], -1e-9) || !self.inside(h.max[0], h.max[1], -1e-9) {
                return invalid(format!("hole {i} outside arena bounds"));
            }
        }
        for i in 0..self.blocks.len() {
            // Gates start open; they are checked against nothing.
            if self.blocks[i].kind == BlockKind::Gate {
                continue;
            }
            for j in i + 1..self.blocks.len() {
                if self.blocks[j].kind == BlockKind::Gate {
                    continue;
                }
                let d = block_overlap(&self.blocks[i], &self.blocks[j]);
                if d > STATIC_OVERLAP_TOLERANCE {
                    return invalid(format!("static overlap: blocks {i} and {j} interpenetrate by {d:.4} m"));
                }
            }
        }
        if let Some(hf) = &self.terrain {
            if hf.resolution < 2 || hf.heights.len() != hf.resolution * hf.resolution {
                return invalid("heightfield size does not match resolution");
            }
            if !hf.heights.iter().all(|h| h.is_finite()) {
                return invalid("heightfield has non-finite heights");
            }
        }
        for (k, s) in self.scripts.iter().enumerate() {
            for t in s.targets() {
                let ok = match t {
                    Target::Food(i) => i < self.foods.len(),
                    Target::Block(i) => i < self.blocks.len(),
                };
                if !ok {
                    return invalid(format!("script {k} references a missing object"));
                }
            }
            match s {
                ScriptSpec::CloseGateOnEntry { gate, foods, .. } => {
                    if self.blocks[*gate].kind != BlockKind::Gate {
                        return invalid(format!("script {k}: block {gate} is not a gate"));
                    }
                    if foods.iter().any(|&f| f >= self.foods.len()) {
                        return invalid(format!("script {k} references a missing food"));
                    }
                }
                ScriptSpec::LinearMove { waypoints, speed, .. } => {
                    if waypoints.is_empty() || !(*speed > 0.0) {
                        return invalid(format!("script {k}: linear_move needs waypoints and positive speed"));
                    }
                }
                ScriptSpec::DescendPillar { speed, drop, .. } => {
                    if !(*speed > 0.0 && *drop >= 0.0) {
                        return invalid(format!("script {k}: descend_pillar needs positive speed"));
                    }
                }
                ScriptSpec::BounceInRegion { region, .. } => {
                    if !(region.min[0] < region.max[0] && region.min[1] < region.max[1]) {
                        return invalid(format!("script {k}: empty bounce region"));
                    }
                }
                ScriptSpec::TipOnPush { axis, rate_deg, .. } => {
                    if Vec3::from(*axis).norm() < 1e-9 || !(*rate_deg > 0.0) {
                        return invalid(format!("script {k}: tip_on_push needs an axis and positive rate"));
                    }
                }
            }
        }
        if !self.inside(self.spawn.x, self.spawn.z, 0.0) {
            return invalid("spawn outside arena bounds");
        }
        Ok(())
    }

    fn bound_blocks(&self) -> [BlockSpec; 4] {
        let h = self.half_size();
        let t = BOUND_THICKNESS / 2.0;
        let span = h + BOUND_THICKNESS;
        let mk = |x: f64, z: f64, hx: f64, hz: f64| BlockSpec {
            kind: BlockKind::Wall,
            center: [x, BOUND_HEIGHT / 2.0, z],
            half_extents: [hx, BOUND_HEIGHT / 2.0, hz],
            yaw_deg: 0.0,
            color: self.bound_color,
            transparent: false,
        };
        [
            mk(h + t, 0.0, t, span),
            mk(-h - t, 0.0, t, span),
            mk(0.0, h + t, h, t),
            mk(0.0, -h - t, h, t),
        ]
    }
}

/// Runtime state of one script.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScriptState {
    LinearMove { next: usize },
    DescendPillar { lowered: f64 },
    CloseGateOnEntry { closed_at: Option<u64> },
    BounceInRegion { velocity: [f64; 2] },
    TipOnPush { angle_deg: f64, started: bool, rest: (Vec3, Quat) },
}

/// An instantiated arena: the world plus handles into it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arena {
    pub spec: ArenaSpec,
    pub world: World,
    pub agent: Agent,
    pub food_parts: Vec<PartId>,
    pub block_parts: Vec<PartId>,
    pub bound_parts: Vec<PartId>,
    pub scripts: Vec<ScriptState>,
}

/// Validates `spec` and builds its world with the agent at the spawn pose.
pub fn instantiate(spec: &ArenaSpec, agent_spec: &AgentSpec) -> Result<Arena, ArenaError> {
    spec.validate()?;
    let terrain = Terrain {
        heightfield: spec.terrain.clone(),
        holes: spec.holes.clone(),
        color: spec.floor_color,
    };
    let mut world = World::new(terrain);
    let scripted: Vec<Target> = spec.scripts.iter().flat_map(|s| s.targets()).collect();

    let add_block = |world: &mut World, b: &BlockSpec, tag: Tag, motion: Motion| {
        let mut p = RigidPart::fixed(
            Shape::Box {
                half_extents: b.half_extents,
            },
            Vec3::from(b.center),
            b.rotation(),
            tag,
            b.color,
        );
        p.transparent = b.transparent;
        p.motion = motion;
        p.enabled = b.kind != BlockKind::Gate;
        world.add_part(p)
    };

    let bound_parts = spec
        .bound_blocks()
        .iter()
        .map(|b| add_block(&mut world, b, Tag::ArenaBound, Motion::Static))
        .collect();
    let block_parts = spec
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let motion = if scripted.contains(&Target::Block(i)) && b.kind != BlockKind::Gate {
                Motion::Kinematic
            } else {
                Motion::Static
            };
            add_block(&mut world, b, b.tag(), motion)
        })
        .collect();
    let food_parts = spec
        .foods
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut p = RigidPart::fixed(
                Shape::Sphere { radius: f.radius() },
                Vec3::from(f.position),
                Quat::identity(),
                f.tag(),
                f.color,
            );
            if scripted.contains(&Target::Food(i)) {
                p.motion = Motion::Kinematic;
            }
            world.add_part(p)
        })
        .collect();

    let agent = assemble_agent(&mut world, agent_spec, spec.spawn).map_err(|e| match e {
        AgentError::SpawnRejected { .. } => ArenaError::InvalidSpec(format!("spawn rejected: {e}")),
        other => ArenaError::InvalidSpec(other.to_string()),
    })?;

    let mut arena = Arena {
        spec: spec.clone(),
        world,
        agent,
        food_parts,
        block_parts,
        bound_parts,
        scripts: Vec::new(),
    };
    arena.scripts = spec
        .scripts
        .iter()
        .map(|s| match s {
            ScriptSpec::LinearMove { .. } => ScriptState::LinearMove { next: 0 },
            ScriptSpec::DescendPillar { .. } => ScriptState::DescendPillar { lowered: 0.0 },
            ScriptSpec::CloseGateOnEntry { .. } => ScriptState::CloseGateOnEntry { closed_at: None },
            ScriptSpec::BounceInRegion { velocity, .. } => ScriptState::BounceInRegion { velocity: *velocity },
            ScriptSpec::TipOnPush { target, .. } => {
                let p = &arena.world.parts[arena.part_of(*target)];
                ScriptState::TipOnPush {
                    angle_deg: 0.0,
                    started: false,
                    rest: (p.position, p.orientation),
                }
            }
        })
        .collect();
    Ok(arena)
}

impl Arena {
    pub fn part_of(&self, target: Target) -> PartId {
        match target {
            Target::Food(i) => self.food_parts[i],
            Target::Block(i) => self.block_parts[i],
        }
    }

    /// Food index of `part`, if it is a food item.
    pub fn food_index(&self, part: PartId) -> Option<usize> {
        self.food_parts.iter().position(|&p| p == part)
    }

    /// Advances every kinematic script by one step of length `dt`, and closes
    /// gates whose trigger region holds the agent's head.
    pub fn tick_scripts(&mut self, step: u64, dt: f64) {
        for k in 0..self.scripts.len() {
            let spec = self.spec.scripts[k].clone();
            let pids: Vec<PartId> = spec.targets().iter().map(|t| self.part_of(*t)).collect();
            match spec {
                ScriptSpec::LinearMove { waypoints, speed, .. } => {
                    let ScriptState::LinearMove { next } = &mut self.scripts[k] else {
                        continue;
                    };
                    let part = &mut self.world.parts[pids[0]];
                    let mut budget = speed * dt;
                    let start = part.position;
                    while budget > 0.0 && *next < waypoints.len() {
                        let goal = Vec3::from(waypoints[*next]);
                        let gap = goal - part.position;
                        let dist = gap.norm();
                        if dist <= budget {
                            part.position = goal;
                            budget -= dist;
                            *next += 1;
                        } else {
                            part.position += gap * (budget / dist);
                            budget = 0.0;
                        }
                    }
                    part.linear_velocity = (part.position - start) / dt;
                }
                ScriptSpec::DescendPillar { speed, drop, .. } => {
                    let ScriptState::DescendPillar { lowered } = &mut self.scripts[k] else {
                        continue;
                    };
                    let dy = (speed * dt).min(drop - *lowered).max(0.0);
                    *lowered += dy;
                    for &pid in &pids {
                        let part = &mut self.world.parts[pid];
                        part.position.y -= dy;
                        part.linear_velocity = Vec3::new(0.0, -dy / dt, 0.0);
                    }
                }
                ScriptSpec::CloseGateOnEntry { .. } => self.check_gate(k, step),
                ScriptSpec::BounceInRegion { region, .. } => {
                    let ScriptState::BounceInRegion { velocity } = &mut self.scripts[k] else {
                        continue;
                    };
                    let part = &mut self.world.parts[pids[0]];
                    let r = part.shape.bounding_radius();
                    let mut p = [part.position.x, part.position.z];
                    for a in 0..2 {
                        let (lo, hi) = (region.min[a] + r, region.max[a] - r);
                        p[a] += velocity[a] * dt;
                        if hi <= lo {
                            p[a] = 0.5 * (region.min[a] + region.max[a]);
                            continue;
                        }
                        // Mirror back inside; repeated for very fast movers.
                        while p[a] < lo || p[a] > hi {
                            if p[a] > hi {
                                p[a] = 2.0 * hi - p[a];
                            } else {
                                p[a] = 2.0 * lo - p[a];
                            }
                            velocity[a] = -velocity[a];
                        }
                    }
                    part.position.x = p[0];
                    part.position.z = p[1];
                    part.linear_velocity = Vec3::new(velocity[0], 0.0, velocity[1]);
                }
                ScriptSpec::TipOnPush {
                    pivot,
                    axis,
                    angle_deg,
                    rate_deg,
                    ..
                } => {
                    let pid = pids[0];
                    let touched = self
                        .world
                        .contacts()
                        .iter()
                        .any(|c| c.b == ContactTarget::Part(pid) && self.agent.owns(c.a));
                    let ScriptState::TipOnPush {
                        angle_deg: angle,
                        started,
                        rest,
                    } = &mut self.scripts[k]
                    else {
                        continue;
                    };
                    *started |= touched;
                    if !*started || *angle >= angle_deg {
                        continue;
                    }
                    *angle = (*angle + rate_deg * dt).min(angle_deg);
                    let rot = Quat::from_axis_angle(&nalgebra::Unit::new_normalize(Vec3::from(axis)), angle.to_radians());
                    let pivot = Vec3::from(pivot);
                    let part = &mut self.world.parts[pid];
                    part.position = pivot + rot * (rest.0 - pivot);
                    part.orientation = rot * rest.1;
                }
            }
        }
    }

    fn check_gate(&mut self, k: usize, step: u64) {
        let ScriptSpec::CloseGateOnEntry { gate, region, .. } = &self.spec.scripts[k] else {
            return;
        };
        let ScriptState::CloseGateOnEntry { closed_at } = &mut self.scripts[k] else {
            return;
        };
        if closed_at.is_some() {
            return;
        }
        let head = self.world.parts[self.agent.head].position;
        if region.contains(head.x, head.z) {
            *closed_at = Some(step);
            self.world.parts[self.block_parts[*gate]].enabled = true;
        }
    }

    /// Re-evaluates gate triggers; called after physics so a gate closes on
    /// the step the head enters its region.
    pub fn update_triggers(&mut self, step: u64) {
        for k in 0..self.scripts.len() {
            if matches!(self.spec.scripts[k], ScriptSpec::CloseGateOnEntry { .. }) {
                self.check_gate(k, step);
            }
        }
    }

    /// Sector entered by the agent: the first gate script that has closed.
    pub fn entered_sector(&self) -> Option<usize> {
        self.scripts
            .iter()
            .enumerate()
            .filter_map(|(k, s)| match s {
                ScriptState::CloseGateOnEntry { closed_at: Some(t) } => Some((*t, k)),
                _ => None,
            })
            .min()
            .map(|(_, k)| k)
    }
}
