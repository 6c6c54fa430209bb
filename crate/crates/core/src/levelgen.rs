//! Seeded procedural generators for the thirteen tasks.
//!
//! Every generator draws only from streams derived from the level seed
//! (`"layout"`, `"colors"`, `"scripts"`, `"wrapper"`, `"blackout"`), so the same
//! [`GenParams`] always yields a byte-identical [`Level`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentSpec, SpawnPose};
use crate::arena::{
    colors, instantiate, ArenaSpec, BlockKind, BlockSpec, FoodKind, FoodSpec, Region, ScriptSpec, Target,
};
use crate::physics::{Heightfield, HoleRect};
use crate::rng::{derive_rng, Rng};
use crate::sensors::BlackoutSchedule;

pub const MAX_DIFFICULTY: u8 = 10;
pub const MAX_RESAMPLES: usize = 100;

const WALL_HEIGHT: f64 = 2.0;
const WALL_THICKNESS: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    L0,
    L1,
    L2Y,
    L2D,
    L3,
    L4,
    L5,
    L6,
    L7,
    L8,
    L9,
    L10,
    L11,
}

impl TaskId {
    pub const ALL: [TaskId; 13] = [
        TaskId::L0,
        TaskId::L1,
        TaskId::L2Y,
        TaskId::L2D,
        TaskId::L3,
        TaskId::L4,
        TaskId::L5,
        TaskId::L6,
        TaskId::L7,
        TaskId::L8,
        TaskId::L9,
        TaskId::L10,
        TaskId::L11,
    ];

    /// Tasks a wrapper may delegate to.
    pub const BASE: [TaskId; 11] = [
        TaskId::L0,
        TaskId::L1,
        TaskId::L2Y,
        TaskId::L2D,
        TaskId::L3,
        TaskId::L4,
        TaskId::L5,
        TaskId::L8,
        TaskId::L9,
        TaskId::L10,
        TaskId::L11,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::L0 => "L0",
            TaskId::L1 => "L1",
            TaskId::L2Y => "L2Y",
            TaskId::L2D => "L2D",
            TaskId::L3 => "L3",
            TaskId::L4 => "L4",
            TaskId::L5 => "L5",
            TaskId::L6 => "L6",
            TaskId::L7 => "L7",
            TaskId::L8 => "L8",
            TaskId::L9 => "L9",
            TaskId::L10 => "L10",
            TaskId::L11 => "L11",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = GenError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .iter()
            .copied()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| GenError::UnknownTask(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenParams {
    pub task: TaskId,
    pub difficulty: u8,
    pub seed: u64,
}

impl GenParams {
    pub fn new(task: TaskId, difficulty: u8, seed: u64) -> Self {
        Self { task, difficulty, seed }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.difficulty > MAX_DIFFICULTY {
            return Err(GenError::InvalidParams(format!(
                "difficulty {} outside [0, {MAX_DIFFICULTY}]",
                self.difficulty
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("generation failed for {task} difficulty {difficulty} seed {seed} after {MAX_RESAMPLES} resamples")]
    GenerationFailed { task: TaskId, difficulty: u8, seed: u64 },
}

/// Difficulty schedules. Every field is a tunable constant; the defaults are
/// the shipped calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedules {
    pub l0_distance: (f64, f64),
    pub l0_lateral_per_d: f64,
    pub l0_scale: (f64, f64),
    pub l1_bounce_from: u8,
    pub l1_speed: (f64, f64),
    pub l2y_bonus_above: u8,
    pub l2d_descent_s: (f64, f64),
    pub l3_enclosure: (f64, f64),
    pub l4_hole: (f64, f64),
    pub l4_third_above: u8,
    pub l5_grid_base: usize,
    pub l5_cell: f64,
    pub l8_speed: (f64, f64),
    pub l10_trench: (f64, f64),
    pub l10_decoys_from: u8,
    pub l11_amplitude_per_d: f64,
    pub l11_food_distance: f64,
}

impl Default for Schedules {
    fn default() -> Self {
        Self {
            l0_distance: (3.0, 1.5),
            l0_lateral_per_d: 0.5,
            l0_scale: (1.5, -0.1),
            l1_bounce_from: 4,
            l1_speed: (0.2, 0.1),
            l2y_bonus_above: 5,
            l2d_descent_s: (10.0, 8.0),
            l3_enclosure: (2.0, 0.4),
            l4_hole: (2.0, 0.6),
            l4_third_above: 5,
            l5_grid_base: 4,
            l5_cell: 4.0,
            l8_speed: (0.5, 0.3),
            l10_trench: (1.5, 0.25),
            l10_decoys_from: 3,
            l11_amplitude_per_d: 0.05,
            l11_food_distance: 8.0,
        }
    }
}

fn lin((a, b): (f64, f64), d: u8) -> f64 {
    a + b * d as f64
}

impl Schedules {
    pub fn l1_food_count(&self, d: u8) -> usize {
        1 + (4.0 * d as f64 / 10.0).round() as usize
    }

    pub fn l4_hole_count(&self, d: u8) -> usize {
        if d > self.l4_third_above {
            3
        } else {
            2
        }
    }

    pub fn l5_grid(&self, d: u8) -> usize {
        self.l5_grid_base + (d as usize).div_ceil(3)
    }

    pub fn l9_max_count(&self, d: u8) -> i64 {
        2 + (d as i64 + 1) / 2
    }

    pub fn l11_lattice(&self, d: u8) -> f64 {
        8.0 / (1.0 + 0.3 * d as f64)
    }

    /// The headline hardness scalar of each task at difficulty `d`.
    pub fn hardness(&self, task: TaskId, d: u8) -> f64 {
        match task {
            TaskId::L0 => lin(self.l0_distance, d),
            TaskId::L1 => self.l1_food_count(d) as f64,
            TaskId::L2Y => f64::from(u8::from(d > self.l2y_bonus_above)),
            TaskId::L2D => lin(self.l2d_descent_s, d),
            TaskId::L3 => lin(self.l3_enclosure, d),
            TaskId::L4 => lin(self.l4_hole, d),
            TaskId::L5 => self.l5_grid(d) as f64,
            TaskId::L6 => d as f64,
            TaskId::L7 => {
                BlackoutSchedule::duration_for(d) as f64 / BlackoutSchedule::period_for(d) as f64
            }
            TaskId::L8 => lin(self.l8_speed, d),
            TaskId::L9 => self.l9_max_count(d) as f64,
            TaskId::L10 => lin(self.l10_trench, d),
            TaskId::L11 => self.l11_amplitude_per_d * d as f64,
        }
    }
}

/// A generated level: the arena plus wrapper directives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub task: TaskId,
    pub difficulty: u8,
    pub seed: u64,
    /// Task actually laid out when `task` is a wrapper.
    pub base_task: TaskId,
    pub arena: ArenaSpec,
    pub blackout: Option<BlackoutSchedule>,
}

impl Level {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("level serializes")
    }

    /// Whether green food ends the episode (false for the sector task).
    pub fn green_terminates(&self) -> bool {
        self.base_task != TaskId::L9
    }
}

pub fn generate(params: &GenParams) -> Result<Level, GenError> {
    generate_with(params, &Schedules::default())
}

pub fn generate_with(params: &GenParams, sched: &Schedules) -> Result<Level, GenError> {
    params.validate()?;
    let d = params.difficulty;
    let (base_task, blackout) = match params.task {
        TaskId::L6 => (*derive_rng(params.seed, "wrapper").pick(&TaskId::BASE), None),
        TaskId::L7 => {
            let base = *derive_rng(params.seed, "wrapper").pick(&TaskId::BASE);
            let mut rng = derive_rng(params.seed, "blackout");
            (base, Some(BlackoutSchedule::for_difficulty(d, &mut rng)))
        }
        t => (t, None),
    };
    let mut arena = generate_base(base_task, d, params.seed, sched).ok_or(GenError::GenerationFailed {
        task: params.task,
        difficulty: d,
        seed: params.seed,
    })?;
    if params.task == TaskId::L6 {
        recolor(&mut arena, &mut derive_rng(params.seed, "colors"));
    }
    Ok(Level {
        task: params.task,
        difficulty: d,
        seed: params.seed,
        base_task,
        arena,
        blackout,
    })
}

/// Replaces each object class's color with one of five random colors.
fn recolor(arena: &mut ArenaSpec, rng: &mut Rng) {
    let palette: Vec<[f64; 3]> = (0..5).map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()]).collect();
    // Class order is fixed so the draw sequence is too.
    let mut class_color = |_: usize| *rng.pick(&palette);
    let classes: Vec<[f64; 3]> = (0..7).map(&mut class_color).collect();
    for b in &mut arena.blocks {
        b.color = match (b.kind, b.transparent) {
            (BlockKind::Wall, false) => classes[0],
            (BlockKind::Wall, true) => classes[1],
            (BlockKind::Pillar, _) => classes[2],
            (BlockKind::Plank, _) => classes[3],
            (BlockKind::Gate, _) => classes[4],
        };
    }
    for f in &mut arena.foods {
        f.color = match f.kind {
            FoodKind::Green => classes[5],
            FoodKind::Yellow => classes[6],
        };
    }
    arena.bound_color = *rng.pick(&palette);
}

/// Runs one task generator with resampling until the spec is valid and the
/// agent can be placed.
fn generate_base(task: TaskId, d: u8, seed: u64, sched: &Schedules) -> Option<ArenaSpec> {
    let mut g = Gen {
        layout: derive_rng(seed, "layout"),
        scripts: derive_rng(seed, "scripts"),
        d,
        s: sched,
    };
    for _ in 0..MAX_RESAMPLES {
        let spec = match task {
            TaskId::L0 => g.l0(),
            TaskId::L1 => g.l1(),
            TaskId::L2Y => g.l2y(),
            TaskId::L2D => g.l2d(),
            TaskId::L3 => g.l3(),
            TaskId::L4 => g.l4(),
            TaskId::L5 => g.l5(),
            TaskId::L8 => g.l8(),
            TaskId::L9 => g.l9(),
            TaskId::L10 => g.l10(),
            TaskId::L11 => g.l11(),
            TaskId::L6 | TaskId::L7 => unreachable!("wrappers delegate to base tasks"),
        };
        if let Some(spec) = spec {
            if instantiate(&spec, &AgentSpec::default()).is_ok() {
                return Some(spec);
            }
        }
    }
    None
}

struct Gen<'a> {
    layout: Rng,
    scripts: Rng,
    d: u8,
    s: &'a Schedules,
}

fn spawn(x: f64, z: f64, heading_deg: f64) -> SpawnPose {
    SpawnPose { x, z, heading_deg }
}

fn forward(heading_deg: f64) -> [f64; 2] {
    let (s, c) = heading_deg.to_radians().sin_cos();
    [s, c]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Axis-aligned wall from `(x0, z)` to `(x1, z)`, covering the corner squares.
fn hwall(x0: f64, x1: f64, z: f64) -> BlockSpec {
    let t = WALL_THICKNESS / 2.0;
    BlockSpec::wall((x0 + x1) / 2.0, z, (x1 - x0) / 2.0 + t, t, WALL_HEIGHT, 0.0)
}

/// Axis-aligned wall from `(x, z0)` to `(x, z1)`, stopping at the corner squares.
fn vwall(x: f64, z0: f64, z1: f64) -> BlockSpec {
    let t = WALL_THICKNESS / 2.0;
    BlockSpec::wall(x, (z0 + z1) / 2.0, t, (z1 - z0) / 2.0 - t, WALL_HEIGHT, 0.0)
}

/// Rotates a point by `k` quarter turns in the heading sense.
fn rot_point(k: u32, [x, z]: [f64; 2]) -> [f64; 2] {
    match k % 4 {
        0 => [x, z],
        1 => [z, -x],
        2 => [-x, -z],
        _ => [-z, x],
    }
}

/// Rotates an axis-aligned block by `k` quarter turns, staying axis-aligned.
fn rot_block(k: u32, mut b: BlockSpec) -> BlockSpec {
    let [x, z] = rot_point(k, [b.center[0], b.center[2]]);
    b.center[0] = x;
    b.center[2] = z;
    if k % 2 == 1 {
        b.half_extents.swap(0, 2);
    }
    b
}

fn rot_region(k: u32, r: Region) -> Region {
    let a = rot_point(k, r.min);
    let b = rot_point(k, r.max);
    Region {
        min: [a[0].min(b[0]), a[1].min(b[1])],
        max: [a[0].max(b[0]), a[1].max(b[1])],
    }
}

impl Gen<'_> {
    fn df(&self) -> f64 {
        self.d as f64
    }

    fn base(&self) -> ArenaSpec {
        ArenaSpec::default()
    }

    fn l0(&mut self) -> Option<ArenaSpec> {
        let distance = lin(self.s.l0_distance, self.d);
        let lateral = self.s.l0_lateral_per_d * self.df();
        let scale = lin(self.s.l0_scale, self.d);
        let heading = self.layout.uniform(0.0, 360.0);
        let offset = if lateral > 0.0 {
            self.layout.uniform(-lateral, lateral)
        } else {
            0.0
        };
        let f = forward(heading);
        let left = [f[1], -f[0]];
        // Center the agent-food pair on the arena.
        let sx = -f[0] * distance / 2.0;
        let sz = -f[1] * distance / 2.0;
        let fx = sx + f[0] * distance + left[0] * offset;
        let fz = sz + f[1] * distance + left[1] * offset;
        Some(ArenaSpec {
            foods: vec![FoodSpec::new(FoodKind::Green, scale, fx, fz)],
            spawn: spawn(sx, sz, heading),
            ..self.base()
        })
    }

    fn l1(&mut self) -> Option<ArenaSpec> {
        let n = self.s.l1_food_count(self.d);
        let sp = [self.layout.uniform(-15.0, 15.0), self.layout.uniform(-15.0, 15.0)];
        let heading = self.layout.uniform(0.0, 360.0);
        let mut foods: Vec<FoodSpec> = Vec::new();
        for k in 0..n {
            let kind = if k == 0 || self.layout.chance(0.5) {
                FoodKind::Green
            } else {
                FoodKind::Yellow
            };
            let scale = self.layout.uniform(0.6, 1.4);
            let p = [self.layout.uniform(-17.0, 17.0), self.layout.uniform(-17.0, 17.0)];
            if dist(p, sp) < 3.0 + scale || foods.iter().any(|f| dist(p, [f.position[0], f.position[2]]) < 2.0) {
                return None;
            }
            foods.push(FoodSpec::new(kind, scale, p[0], p[1]));
        }
        let mut scripts = Vec::new();
        if self.d >= self.s.l1_bounce_from {
            let speed = lin(self.s.l1_speed, self.d);
            for i in 0..foods.len() {
                let a = self.scripts.uniform(0.0, std::f64::consts::TAU);
                scripts.push(ScriptSpec::BounceInRegion {
                    target: Target::Food(i),
                    velocity: [speed * a.sin(), speed * a.cos()],
                    region: Region {
                        min: [-19.0, -19.0],
                        max: [19.0, 19.0],
                    },
                });
            }
        }
        Some(ArenaSpec {
            foods,
            scripts,
            spawn: spawn(sp[0], sp[1], heading),
            ..self.base()
        })
    }

    /// T-shaped maze: a stem corridor leading into a cross corridor whose two
    /// ends are the arms.
    fn l2y(&mut self) -> Option<ArenaSpec> {
        let k = self.layout.below(4) as u32;
        let good_arm = if self.layout.chance(0.5) { 1.0 } else { -1.0 };
        let (w, top, bar, arm) = (2.0, 2.0, 6.0, 10.0);
        let mut blocks = vec![
            hwall(-w, w, -12.0),
            vwall(-w, -12.0, top),
            vwall(w, -12.0, top),
            hwall(-arm, -w, top),
            hwall(w, arm, top),
            hwall(-arm, arm, bar),
            vwall(-arm, top, bar),
            vwall(arm, top, bar),
        ];
        blocks = blocks.into_iter().map(|b| rot_block(k, b)).collect();
        let mid = (top + bar) / 2.0;
        let mut foods = vec![FoodSpec::new(FoodKind::Green, 1.0, good_arm * (arm - 2.0), mid)];
        if self.d > self.s.l2y_bonus_above {
            foods.push(FoodSpec::new(FoodKind::Green, 0.5, -good_arm * (arm - 2.0), mid));
        }
        for f in &mut foods {
            let [x, z] = rot_point(k, [f.position[0], f.position[2]]);
            f.position[0] = x;
            f.position[2] = z;
        }
        let [sx, sz] = rot_point(k, [0.0, -9.0]);
        Some(ArenaSpec {
            blocks,
            foods,
            spawn: spawn(sx, sz, 90.0 * k as f64),
            ..self.base()
        })
    }

    fn l2d(&mut self) -> Option<ArenaSpec> {
        let sp = [self.layout.uniform(-5.0, 5.0), self.layout.uniform(-12.0, -6.0)];
        let heading = 0.0;
        let side = if self.layout.chance(0.5) { 1.0 } else { -1.0 };
        let green = FoodSpec::new(FoodKind::Green, 0.5, sp[0] + side * 2.5, sp[1] + 2.0);
        let pillar_h = 2.0;
        let px = self.layout.uniform(-6.0, 6.0);
        let pz = sp[1] + self.layout.uniform(7.0, 12.0);
        let pillar = BlockSpec {
            kind: BlockKind::Pillar,
            color: colors::PILLAR,
            ..BlockSpec::wall(px, pz, 0.75, 0.75, pillar_h, 0.0)
        };
        let mut yellow = FoodSpec::new(FoodKind::Yellow, 2.0, px, pz);
        yellow.position[1] = pillar_h + yellow.radius();
        let time = lin(self.s.l2d_descent_s, self.d);
        Some(ArenaSpec {
            blocks: vec![pillar],
            foods: vec![green, yellow],
            scripts: vec![ScriptSpec::DescendPillar {
                targets: vec![Target::Block(0), Target::Food(1)],
                speed: pillar_h / time,
                drop: pillar_h,
            }],
            spawn: spawn(sp[0], sp[1], heading),
            ..self.base()
        })
    }

    /// Food inside a transparent U whose closed side faces the agent, plus
    /// random opaque walls.
    fn l3(&mut self) -> Option<ArenaSpec> {
        let side = lin(self.s.l3_enclosure, self.d);
        let t = 0.2;
        let sp = [self.layout.uniform(-14.0, 14.0), self.layout.uniform(-14.0, 14.0)];
        let food = [self.layout.uniform(-15.0, 15.0), self.layout.uniform(-15.0, 15.0)];
        if dist(sp, food) < 6.0 + side {
            return None;
        }
        let to_agent = [sp[0] - food[0], sp[1] - food[1]];
        let phi = to_agent[0].atan2(to_agent[1]).to_degrees();
        let u = forward(phi);
        let xdir = [u[1], -u[0]];
        let at = |a: f64, b: f64| [food[0] + xdir[0] * a + u[0] * b, food[1] + xdir[1] * a + u[1] * b];
        let c = at(0.0, side / 2.0 - t / 2.0);
        let mut blocks = vec![BlockSpec::transparent_wall(c[0], c[1], side / 2.0, t / 2.0, 1.5, phi)];
        for sgn in [-1.0, 1.0] {
            let c = at(sgn * (side / 2.0 - t / 2.0), -t / 2.0);
            blocks.push(BlockSpec::transparent_wall(c[0], c[1], t / 2.0, (side - t) / 2.0, 1.5, phi));
        }
        let heading = (food[0] - sp[0]).atan2(food[1] - sp[1]).to_degrees();
        let extra = 1 + self.d as usize / 2;
        let max_len = 2.0 + 0.3 * self.df();
        let mut tries = 0;
        while blocks.len() < 3 + extra {
            tries += 1;
            if tries > 200 {
                return None;
            }
            let len = self.layout.uniform(1.0, max_len);
            let p = [self.layout.uniform(-17.0, 17.0), self.layout.uniform(-17.0, 17.0)];
            let yaw = self.layout.uniform(0.0, 180.0);
            let wall = BlockSpec::wall(p[0], p[1], len / 2.0, 0.15, WALL_HEIGHT, yaw);
            let clear = dist(p, sp) > 3.0 + len / 2.0
                && dist(p, food) > side + 2.5 + len / 2.0
                && wall.footprint().iter().all(|q| q[0].abs() < 19.5 && q[1].abs() < 19.5)
                && blocks.iter().all(|b| crate::arena::block_overlap(b, &wall) < -2.5);
            if clear {
                blocks.push(wall);
            }
        }
        Some(ArenaSpec {
            blocks,
            foods: vec![FoodSpec::new(FoodKind::Green, 1.0, food[0], food[1])],
            spawn: spawn(sp[0], sp[1], heading),
            ..self.base()
        })
    }

    fn l4(&mut self) -> Option<ArenaSpec> {
        let side = lin(self.s.l4_hole, self.d);
        let n = self.s.l4_hole_count(self.d);
        let sp = [self.layout.uniform(-10.0, 10.0), -15.0];
        let food = [self.layout.uniform(-12.0, 12.0), 14.0];
        let mut holes: Vec<HoleRect> = Vec::new();
        let h = side / 2.0;
        // Keep a walkable gap between holes.
        let gap = 2.5;
        let mut tries = 0;
        while holes.len() < n {
            tries += 1;
            if tries > 200 {
                return None;
            }
            let c = [self.layout.uniform(-18.0 + h, 18.0 - h), self.layout.uniform(-10.0 + h, 10.0 - h)];
            let hole = HoleRect::centered(c[0], c[1], h, h);
            let apart = holes.iter().all(|o| {
                hole.min[0] > o.max[0] + gap
                    || o.min[0] > hole.max[0] + gap
                    || hole.min[1] > o.max[1] + gap
                    || o.min[1] > hole.max[1] + gap
            });
            if apart {
                holes.push(hole);
            }
        }
        Some(ArenaSpec {
            holes,
            foods: vec![FoodSpec::new(FoodKind::Green, 1.0, food[0], food[1])],
            spawn: spawn(sp[0], sp[1], 0.0),
            ..self.base()
        })
    }

    /// Recursive-division maze built from corner posts and wall segments.
    fn l5(&mut self) -> Option<ArenaSpec> {
        let n = self.s.l5_grid(self.d);
        let cell = self.s.l5_cell;
        let origin = -(n as f64) * cell / 2.0;
        // h[j][i]: wall on the line z = j between cells (i, j-1) and (i, j).
        let mut h = vec![vec![false; n]; n + 1];
        // v[j][i]: wall on the line x = i between cells (i-1, j) and (i, j).
        let mut v = vec![vec![false; n + 1]; n];
        for i in 0..n {
            h[0][i] = true;
            h[n][i] = true;
            v[i][0] = true;
            v[i][n] = true;
        }
        divide(&mut self.layout, &mut h, &mut v, 0, 0, n, n);

        let t = WALL_THICKNESS;
        let coord = |k: usize| origin + k as f64 * cell;
        let mut blocks = Vec::new();
        let mut post = vec![vec![false; n + 1]; n + 1];
        for (j, row) in h.iter().enumerate() {
            for (i, &w) in row.iter().enumerate() {
                if w {
                    post[j][i] = true;
                    post[j][i + 1] = true;
                    let x = coord(i) + cell / 2.0;
                    blocks.push(BlockSpec::wall(x, coord(j), (cell - t) / 2.0, t / 2.0, WALL_HEIGHT, 0.0));
                }
            }
        }
        for (j, row) in v.iter().enumerate() {
            for (i, &w) in row.iter().enumerate() {
                if w {
                    post[j][i] = true;
                    post[j + 1][i] = true;
                    let z = coord(j) + cell / 2.0;
                    blocks.push(BlockSpec::wall(coord(i), z, t / 2.0, (cell - t) / 2.0, WALL_HEIGHT, 0.0));
                }
            }
        }
        for (j, row) in post.iter().enumerate() {
            for (i, &p) in row.iter().enumerate() {
                if p {
                    blocks.push(BlockSpec::wall(coord(i), coord(j), t / 2.0, t / 2.0, WALL_HEIGHT, 0.0));
                }
            }
        }

        let start = (self.layout.below(n as u64) as usize, self.layout.below(n as u64) as usize);
        let depth = maze_distances(&h, &v, n, start);
        let far = *depth.iter().flatten().max().unwrap_or(&0);
        let want = far.min(2);
        let candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .filter(|&(i, j)| depth[j][i] >= want && (i, j) != start)
            .collect();
        let &(fi, fj) = self.layout.pick(&candidates);
        let center = |i: usize| origin + (i as f64 + 0.5) * cell;
        let heading = 90.0 * self.layout.below(4) as f64;
        Some(ArenaSpec {
            blocks,
            foods: vec![FoodSpec::new(FoodKind::Green, 1.0, center(fi), center(fj))],
            spawn: spawn(center(start.0), center(start.1), heading),
            ..self.base()
        })
    }

    /// Occluding wall with a barrier behind it; the food slides behind the wall
    /// into one compartment, the other holds a hole.
    fn l8(&mut self) -> Option<ArenaSpec> {
        let s = if self.layout.chance(0.5) { 1.0 } else { -1.0 };
        let speed = lin(self.s.l8_speed, self.d);
        let t = WALL_THICKNESS / 2.0;
        let blocks = vec![
            BlockSpec::wall(0.0, 0.0, 4.0, t, WALL_HEIGHT, 0.0),
            BlockSpec::wall(0.0, t + 3.0, t, 3.0, WALL_HEIGHT, 0.0),
        ];
        let start = [s * 6.0, 0.5, -1.5];
        let end = [s * 2.2, 0.5, 3.0];
        let holes = vec![HoleRect {
            min: if s > 0.0 { [-3.8, 1.0] } else { [0.8, 1.0] },
            max: if s > 0.0 { [-0.8, 5.0] } else { [3.8, 5.0] },
        }];
        let mut food = FoodSpec::new(FoodKind::Green, 1.0, start[0], start[2]);
        food.position = start;
        Some(ArenaSpec {
            blocks,
            holes,
            foods: vec![food],
            scripts: vec![ScriptSpec::LinearMove {
                target: Target::Food(0),
                waypoints: vec![[s * 6.0, 0.5, 3.0], end],
                speed,
            }],
            spawn: spawn(self.layout.uniform(-2.0, 2.0), -9.0, 0.0),
            ..self.base()
        })
    }

    /// Four gated rooms around a central spawn.
    fn l9(&mut self) -> Option<ArenaSpec> {
        let hi = self.s.l9_max_count(self.d);
        let counts: Vec<i64> = loop {
            let c: Vec<i64> = (0..4).map(|_| self.layout.range_inclusive(1, hi)).collect();
            let m = *c.iter().max().expect("four rooms");
            if c.iter().filter(|&&x| x == m).count() == 1 {
                break c;
            }
        };
        let (front, back, half, gap) = (6.0, 14.0, 4.0, 1.5);
        let mut blocks = Vec::new();
        let mut foods = Vec::new();
        let mut scripts = Vec::new();
        for (k, &count) in counts.iter().enumerate() {
            let k = k as u32;
            let room = [
                hwall(-half, half, back),
                vwall(-half, front, back),
                vwall(half, front, back),
            ];
            let t = WALL_THICKNESS / 2.0;
            // Front pieces stop short of the gate; the gate fills the opening.
            let piece = (half + t - gap) / 2.0;
            let left = BlockSpec::wall(-gap - piece, front, piece, t, WALL_HEIGHT, 0.0);
            let right = BlockSpec::wall(gap + piece, front, piece, t, WALL_HEIGHT, 0.0);
            let gate = BlockSpec {
                kind: BlockKind::Gate,
                color: colors::GATE,
                ..BlockSpec::wall(0.0, front, gap, t, WALL_HEIGHT, 0.0)
            };
            for b in room.into_iter().chain([left, right]) {
                blocks.push(rot_block(k, b));
            }
            let gate_index = blocks.len();
            blocks.push(rot_block(k, gate));
            let mut members = Vec::new();
            let mut placed: Vec<[f64; 2]> = Vec::new();
            while (placed.len() as i64) < count {
                let p = [self.layout.uniform(-3.0, 3.0), self.layout.uniform(front + 2.5, back - 1.0)];
                if placed.iter().all(|q| dist(*q, p) > 0.8) {
                    placed.push(p);
                    let [x, z] = rot_point(k, p);
                    members.push(foods.len());
                    foods.push(FoodSpec::new(FoodKind::Green, 0.5, x, z));
                }
            }
            scripts.push(ScriptSpec::CloseGateOnEntry {
                gate: gate_index,
                region: rot_region(
                    k,
                    Region {
                        min: [-half, front + 1.5],
                        max: [half, back],
                    },
                ),
                foods: members,
            });
        }
        Some(ArenaSpec {
            blocks,
            foods,
            scripts,
            spawn: spawn(0.0, 0.0, 90.0 * self.layout.below(4) as f64),
            ..self.base()
        })
    }

    /// A trench spanning the arena with a tippable plank on the near side.
    fn l10(&mut self) -> Option<ArenaSpec> {
        let w = lin(self.s.l10_trench, self.d);
        let zt = self.layout.uniform(-3.0, 1.0);
        let px = self.layout.uniform(-8.0, 8.0);
        let margin = 1.0;
        let thick = 0.3;
        let height = w + margin + 1.5;
        let base_z = zt - margin;
        let mut plank = BlockSpec::wall(px, base_z - thick / 2.0, 1.0, thick / 2.0, height, 0.0);
        plank.kind = BlockKind::Plank;
        plank.color = colors::PLANK;
        let mut blocks = vec![plank];
        if self.d >= self.s.l10_decoys_from {
            for (dx, transparent) in [(-3.5, true), (3.5, false)] {
                let mut slab = BlockSpec::wall(px + dx, base_z - thick / 2.0, 1.0, thick / 2.0, height, 0.0);
                if transparent {
                    slab = BlockSpec::transparent_wall(px + dx, base_z - thick / 2.0, 1.0, thick / 2.0, height, 0.0);
                }
                blocks.push(slab);
            }
        }
        let food = [self.layout.uniform(-10.0, 10.0), zt + w + self.layout.uniform(3.0, 6.0)];
        Some(ArenaSpec {
            holes: vec![HoleRect {
                min: [-20.0, zt],
                max: [20.0, zt + w],
            }],
            blocks,
            foods: vec![FoodSpec::new(FoodKind::Green, 1.0, food[0], food[1])],
            scripts: vec![ScriptSpec::TipOnPush {
                target: Target::Block(0),
                pivot: [px, 0.0, base_z],
                axis: [1.0, 0.0, 0.0],
                angle_deg: 90.0,
                rate_deg: 90.0,
            }],
            spawn: spawn(px + self.layout.uniform(-1.0, 1.0), zt - 6.0, 0.0),
            ..self.base()
        })
    }

    /// Value-noise terrain with a flattened spawn pad.
    fn l11(&mut self) -> Option<ArenaSpec> {
        let amp = self.s.l11_amplitude_per_d * self.df();
        let lattice = self.s.l11_lattice(self.d);
        let res = 81;
        let cell = 40.0 / (res - 1) as f64;
        let origin = [-20.0, -20.0];
        let m = (40.0 / lattice).ceil() as usize + 2;
        let knots: Vec<f64> = (0..m * m).map(|_| self.layout.uniform(-1.0, 1.0)).collect();
        let noise = |x: f64, z: f64| {
            let (gx, gz) = ((x - origin[0]) / lattice, (z - origin[1]) / lattice);
            let (i, j) = (gx.floor() as usize, gz.floor() as usize);
            let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
            let (tx, tz) = (smooth(gx - i as f64), smooth(gz - j as f64));
            let k = |a: usize, b: usize| knots[b.min(m - 1) * m + a.min(m - 1)];
            let top = k(i, j) * (1.0 - tx) + k(i + 1, j) * tx;
            let bot = k(i, j + 1) * (1.0 - tx) + k(i + 1, j + 1) * tx;
            top * (1.0 - tz) + bot * tz
        };
        let sp = [self.layout.uniform(-12.0, 12.0), self.layout.uniform(-12.0, 12.0)];
        let heading = self.layout.uniform(0.0, 360.0);
        let f = forward(heading);
        let dist_food = self.s.l11_food_distance;
        let food = [sp[0] + f[0] * dist_food, sp[1] + f[1] * dist_food];
        if food[0].abs() > 18.0 || food[1].abs() > 18.0 {
            return None;
        }
        let pad_h = amp * noise(sp[0], sp[1]);
        let mut heights = Vec::with_capacity(res * res);
        for j in 0..res {
            for i in 0..res {
                let (x, z) = (origin[0] + i as f64 * cell, origin[1] + j as f64 * cell);
                let r = dist([x, z], sp);
                // Flat pad under the agent, blending into the noise.
                let blend = ((r - 1.5) / 1.0).clamp(0.0, 1.0);
                heights.push(pad_h * (1.0 - blend) + amp * noise(x, z) * blend);
            }
        }
        let hf = Heightfield {
            resolution: res,
            cell_size: cell,
            origin,
            heights,
        };
        let mut green = FoodSpec::new(FoodKind::Green, 1.0, food[0], food[1]);
        green.position[1] = hf.height(food[0], food[1]) + green.radius();
        Some(ArenaSpec {
            terrain: Some(hf),
            foods: vec![green],
            spawn: spawn(sp[0], sp[1], heading),
            ..self.base()
        })
    }
}

/// Recursive division of the chamber `[x0, x0 + w) x [z0, z0 + d)` (in cells).
fn divide(rng: &mut Rng, h: &mut [Vec<bool>], v: &mut [Vec<bool>], x0: usize, z0: usize, w: usize, d: usize) {
    if w < 2 || d < 2 {
        return;
    }
    let horizontal = if w < d {
        true
    } else if d < w {
        false
    } else {
        rng.chance(0.5)
    };
    if horizontal {
        let line = z0 + 1 + rng.below(d as u64 - 1) as usize;
        let gap = x0 + rng.below(w as u64) as usize;
        for i in x0..x0 + w {
            h[line][i] = i != gap;
        }
        divide(rng, h, v, x0, z0, w, line - z0);
        divide(rng, h, v, x0, line, w, z0 + d - line);
    } else {
        let line = x0 + 1 + rng.below(w as u64 - 1) as usize;
        let gap = z0 + rng.below(d as u64) as usize;
        for row in v.iter_mut().skip(z0).take(d) {
            row[line] = true;
        }
        v[gap][line] = false;
        divide(rng, h, v, x0, z0, line - x0, d);
        divide(rng, h, v, line, z0, x0 + w - line, d);
    }
}

/// Breadth-first cell distances from `start`; unreachable cells get `usize::MAX`.
fn maze_distances(h: &[Vec<bool>], v: &[Vec<bool>], n: usize, start: (usize, usize)) -> Vec<Vec<usize>> {
    let mut dist = vec![vec![usize::MAX; n]; n];
    let mut queue = std::collections::VecDeque::new();
    dist[start.1][start.0] = 0;
    queue.push_back(start);
    while let Some((i, j)) = queue.pop_front() {
        let here = dist[j][i];
        let mut go = |ni: usize, nj: usize, blocked: bool| {
            if !blocked && dist[nj][ni] == usize::MAX {
                dist[nj][ni] = here + 1;
                queue.push_back((ni, nj));
            }
        };
        if i > 0 {
            go(i - 1, j, v[j][i]);
        }
        if i + 1 < n {
            go(i + 1, j, v[j][i + 1]);
        }
        if j > 0 {
            go(i, j - 1, h[j][i]);
        }
        if j + 1 < n {
            go(i, j + 1, h[j + 1][i]);
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l0_difficulty_zero_is_straight_ahead_at_three_meters() {
        for seed in 0..20 {
            let lvl = generate(&GenParams::new(TaskId::L0, 0, seed)).unwrap();
            assert_eq!(lvl.arena.foods.len(), 1);
            let f = &lvl.arena.foods[0];
            assert_eq!(f.kind, FoodKind::Green);
            let s = lvl.arena.spawn;
            let fw = forward(s.heading_deg);
            let rel = [f.position[0] - s.x, f.position[2] - s.z];
            let along = rel[0] * fw[0] + rel[1] * fw[1];
            let across = rel[0] * fw[1] - rel[1] * fw[0];
            assert!((along - 3.0).abs() < 1e-12);
            assert!(across.abs() < 1e-12);
        }
    }

    #[test]
    fn l4_hole_counts() {
        for seed in 0..30 {
            assert_eq!(generate(&GenParams::new(TaskId::L4, 5, seed)).unwrap().arena.holes.len(), 2);
            assert_eq!(generate(&GenParams::new(TaskId::L4, 6, seed)).unwrap().arena.holes.len(), 3);
        }
    }

    #[test]
    fn l1_food_count_range() {
        assert_eq!(Schedules::default().l1_food_count(0), 1);
        assert_eq!(Schedules::default().l1_food_count(10), 5);
        let lvl = generate(&GenParams::new(TaskId::L1, 10, 4)).unwrap();
        assert_eq!(lvl.arena.foods.len(), 5);
        assert_eq!(lvl.arena.scripts.len(), 5);
    }

    #[test]
    fn regeneration_is_byte_identical() {
        for task in TaskId::ALL {
            let p = GenParams::new(task, 7, 99);
            assert_eq!(generate(&p).unwrap().to_json(), generate(&p).unwrap().to_json());
        }
    }

    #[test]
    fn wrappers_delegate_to_base_tasks() {
        for seed in 0..20 {
            let six = generate(&GenParams::new(TaskId::L6, 3, seed)).unwrap();
            assert!(TaskId::BASE.contains(&six.base_task));
            let seven = generate(&GenParams::new(TaskId::L7, 3, seed)).unwrap();
            assert!(seven.blackout.is_some());
        }
    }

    #[test]
    fn maze_is_connected() {
        let mut rng = Rng::from_state(5);
        for n in 2..9 {
            let mut h = vec![vec![false; n]; n + 1];
            let mut v = vec![vec![false; n + 1]; n];
            divide(&mut rng, &mut h, &mut v, 0, 0, n, n);
            let d = maze_distances(&h, &v, n, (0, 0));
            assert!(d.iter().flatten().all(|&x| x != usize::MAX));
        }
    }

    #[test]
    fn difficulty_out_of_range() {
        assert!(generate(&GenParams::new(TaskId::L0, 11, 0)).is_err());
    }

    #[test]
    fn task_names_round_trip() {
        for t in TaskId::ALL {
            assert_eq!(t.name().parse::<TaskId>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
    }
}
