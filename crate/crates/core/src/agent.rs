//! The nine-part agent: a spherical head with four two-segment legs.
//!
//! Link and joint order: head, thighs 0-3, legs 0-3, each group by attachment
//! azimuth ascending. Azimuth is measured from forward (+z) toward the agent's
//! left (+x). At zero joint angles each thigh sticks out horizontally from the
//! head surface and each leg hangs straight down from its thigh tip, so the
//! feet carry the head clear of the ground.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::{
    core_proximity, up, Articulation, BodyId, Joint2DOF, JointTarget, Link, Motion, PartId, Pose, Quat, RigidPart,
    Shape, Tag, Vec3, World, JOINT_X_LIMIT_DEG, JOINT_Z_LIMIT_DEG,
};

pub const JOINT_COUNT: usize = 8;
pub const ACTION_LEN: usize = 2 * JOINT_COUNT;

/// Samples per capsule used when seating the agent on terrain.
const SEAT_SAMPLES: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub head_mass: f64,
    pub limb_mass: f64,
    pub head_radius: f64,
    pub thigh_length: f64,
    pub thigh_radius: f64,
    pub leg_length: f64,
    pub leg_radius: f64,
    pub attachment_azimuths_deg: [f64; 4],
    pub head_color: [f64; 3],
    pub limb_color: [f64; 3],
}

impl Default for AgentSpec {
    fn default() -> Self {
        Self {
            head_mass: 0.5,
            limb_mass: 1.0,
            head_radius: 0.4,
            thigh_length: 0.5,
            thigh_radius: 0.10,
            leg_length: 0.5,
            leg_radius: 0.08,
            attachment_azimuths_deg: [45.0, 135.0, 225.0, 315.0],
            head_color: [0.85, 0.55, 0.35],
            limb_color: [0.70, 0.45, 0.30],
        }
    }
}

impl AgentSpec {
    pub fn total_mass(&self) -> f64 {
        self.head_mass + 8.0 * self.limb_mass
    }

    /// Height of the head center above flat ground at zero joint angles.
    pub fn standing_height(&self) -> f64 {
        self.leg_length + self.leg_radius
    }

    /// Horizontal reach of a foot from the head center.
    pub fn foot_reach(&self) -> f64 {
        self.head_radius + self.thigh_length
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    #[default]
    JointRotation,
    JointVelocity,
}

pub const DEFAULT_OMEGA_MAX: f64 = 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("malformed action: expected {ACTION_LEN} finite values, got {0}")]
    MalformedAction(String),
    #[error("spawn rejected: agent part {part} overlaps static part {obstacle}")]
    SpawnRejected { part: PartId, obstacle: PartId },
}

/// Sixteen joint commands in `[-1, 1]`, ordered `(joint0.x, joint0.z, ..., joint7.z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionVector([f64; ACTION_LEN]);

impl ActionVector {
    pub fn zeros() -> Self {
        Self([0.0; ACTION_LEN])
    }

    /// Validates length and finiteness, then clamps each entry to `[-1, 1]`.
    pub fn new(values: &[f64]) -> Result<Self, AgentError> {
        if values.len() != ACTION_LEN {
            return Err(AgentError::MalformedAction(format!("{} values", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AgentError::MalformedAction("non-finite value".into()));
        }
        let mut out = [0.0; ACTION_LEN];
        for (o, v) in out.iter_mut().zip(values) {
            *o = v.clamp(-1.0, 1.0);
        }
        Ok(Self(out))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ActionVector {
    type Error = AgentError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(&v)
    }
}

impl From<ActionVector> for Vec<f64> {
    fn from(a: ActionVector) -> Self {
        a.0.to_vec()
    }
}

/// Spawn location on the floor plane; the agent is seated on the terrain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpawnPose {
    pub x: f64,
    pub z: f64,
    pub heading_deg: f64,
}

/// Handles into the world for an assembled agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub spec: AgentSpec,
    pub body: BodyId,
    pub head: PartId,
    /// Thighs 0-3 then legs 0-3.
    pub limbs: Vec<PartId>,
}

/// Eye position and horizontal viewing direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EyePose {
    pub position: Vec3,
    pub forward: Vec3,
}

impl EyePose {
    /// Unit vector to the agent's left in the horizontal plane.
    pub fn left(&self) -> Vec3 {
        up().cross(&self.forward)
    }
}

pub fn heading_rotation(heading_deg: f64) -> Quat {
    Quat::from_axis_angle(&Vec3::y_axis(), heading_deg.to_radians())
}

fn radial(azimuth_deg: f64) -> Vec3 {
    let a = azimuth_deg.to_radians();
    Vec3::new(a.sin(), 0.0, a.cos())
}

/// Rotation taking local +y onto `dir`.
fn align_y(dir: &Vec3) -> Quat {
    Quat::rotation_between(&Vec3::y(), dir).unwrap_or_else(|| {
        Quat::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI)
    })
}

fn joint_inertias(spec: &AgentSpec) -> (f64, f64) {
    let (mt, ml) = (spec.limb_mass, spec.limb_mass);
    let (lt, ll) = (spec.thigh_length, spec.leg_length);
    let leg = ml * (ll / 2.0).powi(2) + ml * ll * ll / 12.0;
    let thigh = mt * (lt / 2.0).powi(2) + mt * lt * lt / 12.0 + ml * (lt * lt + (ll / 2.0).powi(2)) + ml * ll * ll / 12.0;
    (thigh, leg)
}

/// Registers the agent in `world`, seated on the terrain at `spawn`.
pub fn assemble_agent(world: &mut World, spec: &AgentSpec, spawn: SpawnPose) -> Result<Agent, AgentError> {
    let heading = heading_rotation(spawn.heading_deg);
    let (thigh_inertia, leg_inertia) = joint_inertias(spec);

    let mut part = |shape: Shape, mass: f64, tag: Tag, color: [f64; 3]| {
        let mut p = RigidPart::fixed(shape, Vec3::zeros(), Quat::identity(), tag, color);
        p.mass = mass;
        p.motion = Motion::Dynamic;
        world.add_part(p)
    };

    let head = part(Shape::Sphere { radius: spec.head_radius }, spec.head_mass, Tag::AgentHead, spec.head_color);
    let thigh_shape = Shape::Capsule {
        half_length: spec.thigh_length / 2.0,
        radius: spec.thigh_radius,
    };
    let leg_shape = Shape::Capsule {
        half_length: spec.leg_length / 2.0,
        radius: spec.leg_radius,
    };
    let thighs: Vec<PartId> = (0..4)
        .map(|_| part(thigh_shape, spec.limb_mass, Tag::AgentLimb, spec.limb_color))
        .collect();
    let legs: Vec<PartId> = (0..4)
        .map(|_| part(leg_shape, spec.limb_mass, Tag::AgentLimb, spec.limb_color))
        .collect();

    let mut links = vec![Link {
        part: head,
        parent: None,
        joint: None,
        center_offset: Vec3::zeros(),
        part_rotation: Quat::identity(),
    }];
    let mut joints = Vec::with_capacity(JOINT_COUNT);
    let joint = |parent, child, anchor, axis_x, axis_z, inertia| Joint2DOF {
        parent,
        child,
        anchor,
        axis_x,
        axis_z,
        angle_x: 0.0,
        angle_z: 0.0,
        angular_velocity_x: 0.0,
        angular_velocity_z: 0.0,
        target: JointTarget::Rotation { x: 0.0, z: 0.0 },
        inertia,
    };

    for (k, &az) in spec.attachment_azimuths_deg.iter().enumerate() {
        let d = radial(az);
        // x swings the thigh up (+) and down; z swings it around the vertical.
        joints.push(joint(head, thighs[k], d * spec.head_radius, d.cross(&up()), up(), thigh_inertia));
        links.push(Link {
            part: thighs[k],
            parent: Some(0),
            joint: Some(k),
            center_offset: d * (spec.thigh_length / 2.0),
            part_rotation: align_y(&d),
        });
    }
    for (k, &az) in spec.attachment_azimuths_deg.iter().enumerate() {
        let d = radial(az);
        // x swings the foot outward (+) and inward; z swings it fore and aft.
        joints.push(joint(thighs[k], legs[k], d * spec.thigh_length, d.cross(&up()), d, leg_inertia));
        links.push(Link {
            part: legs[k],
            parent: Some(1 + k),
            joint: Some(4 + k),
            center_offset: -up() * (spec.leg_length / 2.0),
            part_rotation: Quat::identity(),
        });
    }

    let mut art = Articulation {
        links,
        joints,
        root_position: Vec3::new(spawn.x, 0.0, spawn.z),
        root_orientation: heading,
        root_velocity: Vec3::zeros(),
        root_angular_velocity: Vec3::zeros(),
    };
    art.root_position.y = seat_height(world, &art);
    let body = world.add_articulation(art);

    let agent = Agent {
        spec: spec.clone(),
        body,
        head,
        limbs: thighs.iter().chain(legs.iter()).copied().collect(),
    };
    if let Err(e) = check_clearance(world, &agent) {
        // Leave the world as it was.
        let first = agent.head;
        world.parts.truncate(first);
        world.bodies.truncate(body);
        return Err(e);
    }
    Ok(agent)
}

/// Root height at which the lowest part just touches the terrain.
fn seat_height(world: &World, art: &Articulation) -> f64 {
    let poses = art.part_poses(&art.local_frames());
    let mut needed = f64::NEG_INFINITY;
    for (link, pose) in art.links.iter().zip(&poses) {
        let shape = world.parts[link.part].shape;
        let samples: Vec<(Vec3, f64)> = match shape {
            Shape::Sphere { radius } => vec![(pose.position, radius)],
            Shape::Capsule { radius, .. } => {
                let (a, b) = shape.segment(pose).expect("capsule");
                (0..SEAT_SAMPLES)
                    .map(|k| (a + (b - a) * (k as f64 / (SEAT_SAMPLES - 1) as f64), radius))
                    .collect()
            }
            Shape::Box { .. } => Vec::new(),
        };
        for (c, r) in samples {
            if world.terrain.in_hole(c.x, c.z) {
                continue;
            }
            let (h, n) = world.terrain.surface(c.x, c.z);
            let rel = c.y - art.root_position.y;
            needed = needed.max(h + r / n.y - rel);
        }
    }
    if needed.is_finite() {
        needed
    } else {
        art.root_position.y
    }
}

fn check_clearance(world: &World, agent: &Agent) -> Result<(), AgentError> {
    for &pid in std::iter::once(&agent.head).chain(&agent.limbs) {
        let part = &world.parts[pid];
        let (core, radius) = part.shape.core(&part.pose());
        for other in &world.parts {
            if other.body.is_some() || !other.enabled || !other.tag.is_solid() {
                continue;
            }
            let prox = core_proximity(&core, radius, &other.shape, &other.pose());
            if prox.separation < -1e-3 {
                return Err(AgentError::SpawnRejected { part: pid, obstacle: other.id });
            }
        }
    }
    Ok(())
}

/// Sets joint targets from a normalized action.
pub fn apply_action(world: &mut World, agent: &Agent, action: &ActionVector, mode: ActionMode, omega_max: f64) {
    let joints = &mut world.bodies[agent.body].joints;
    for (k, joint) in joints.iter_mut().enumerate() {
        let (ax, az) = (action.0[2 * k], action.0[2 * k + 1]);
        joint.target = match mode {
            ActionMode::JointRotation => JointTarget::Rotation {
                x: ax * JOINT_X_LIMIT_DEG,
                z: az * JOINT_Z_LIMIT_DEG,
            },
            ActionMode::JointVelocity => JointTarget::Velocity {
                x: ax * omega_max,
                z: az * omega_max,
            },
        };
    }
}

/// Joint angles normalized to `[-1, 1]` in action order.
pub fn proprioception(world: &World, agent: &Agent) -> Vec<f64> {
    world.bodies[agent.body]
        .joints
        .iter()
        .flat_map(|j| {
            [
                (j.angle_x / JOINT_X_LIMIT_DEG).clamp(-1.0, 1.0),
                (j.angle_z / JOINT_Z_LIMIT_DEG).clamp(-1.0, 1.0),
            ]
        })
        .collect()
}

/// Joint rates normalized by `omega_max` and clamped to `[-1, 1]`.
pub fn joint_velocities(world: &World, agent: &Agent, omega_max: f64) -> Vec<f64> {
    world.bodies[agent.body]
        .joints
        .iter()
        .flat_map(|j| {
            [
                (j.angular_velocity_x / omega_max).clamp(-1.0, 1.0),
                (j.angular_velocity_z / omega_max).clamp(-1.0, 1.0),
            ]
        })
        .collect()
}

impl Agent {
    pub fn parts(&self) -> impl Iterator<Item = PartId> + '_ {
        std::iter::once(self.head).chain(self.limbs.iter().copied())
    }

    pub fn owns(&self, part: PartId) -> bool {
        part == self.head || self.limbs.contains(&part)
    }

    pub fn head_pose(&self, world: &World) -> Pose {
        world.parts[self.head].pose()
    }

    pub fn eye(&self, world: &World) -> EyePose {
        let head = &world.parts[self.head];
        let f = world.bodies[self.body].root_orientation * Vec3::z();
        let flat = Vec3::new(f.x, 0.0, f.z);
        let forward = if flat.norm() > 1e-9 {
            flat.normalize()
        } else {
            // Pointing straight up or down: fall back to the up-vector's heading.
            let u = world.bodies[self.body].root_orientation * up();
            let alt = Vec3::new(-u.x, 0.0, -u.z) * f.y.signum();
            if alt.norm() > 1e-9 {
                alt.normalize()
            } else {
                Vec3::z()
            }
        };
        EyePose {
            position: head.position + forward * self.spec.head_radius,
            forward,
        }
    }

    pub fn joints<'w>(&self, world: &'w World) -> &'w [Joint2DOF] {
        &world.bodies[self.body].joints
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{step_physics, PhysicsConfig, Terrain};

    fn spawn() -> SpawnPose {
        SpawnPose { x: 0.0, z: 0.0, heading_deg: 0.0 }
    }

    #[test]
    fn default_agent_has_nine_parts_and_8_5_kg() {
        let mut w = World::new(Terrain::default());
        let a = assemble_agent(&mut w, &AgentSpec::default(), spawn()).unwrap();
        assert_eq!(a.parts().count(), 9);
        assert_eq!(w.bodies[a.body].joints.len(), 8);
        assert!((w.total_mass(a.body) - 8.5).abs() < 1e-12);
        assert_eq!(w.parts[a.head].mass, 0.5);
        assert!(a.limbs.iter().all(|&l| w.parts[l].mass == 1.0));
    }

    #[test]
    fn seated_on_flat_ground() {
        let mut w = World::new(Terrain::default());
        let spec = AgentSpec::default();
        let a = assemble_agent(&mut w, &spec, spawn()).unwrap();
        assert!((w.parts[a.head].position.y - spec.standing_height()).abs() < 1e-12);
        for &leg in &a.limbs[4..] {
            let p = &w.parts[leg];
            let (lo, hi) = p.shape.segment(&p.pose()).unwrap();
            let foot = if lo.y < hi.y { lo } else { hi };
            assert!((foot.y - spec.leg_radius).abs() < 1e-12);
        }
    }

    #[test]
    fn spawn_inside_wall_is_rejected() {
        let mut w = World::new(Terrain::default());
        w.add_part(RigidPart::fixed(
            Shape::Box { half_extents: [1.0, 1.0, 1.0] },
            Vec3::new(0.0, 1.0, 0.0),
            Quat::identity(),
            Tag::Wall,
            [0.5; 3],
        ));
        let err = assemble_agent(&mut w, &AgentSpec::default(), spawn()).unwrap_err();
        assert!(matches!(err, AgentError::SpawnRejected { .. }));
        assert_eq!(w.parts.len(), 1);
        assert!(w.bodies.is_empty());
    }

    #[test]
    fn action_mapping() {
        let mut w = World::new(Terrain::default());
        let a = assemble_agent(&mut w, &AgentSpec::default(), spawn()).unwrap();
        apply_action(&mut w, &a, &ActionVector::zeros(), ActionMode::JointRotation, 180.0);
        assert!(a
            .joints(&w)
            .iter()
            .all(|j| j.target == JointTarget::Rotation { x: 0.0, z: 0.0 }));

        let mut v = [0.0; 16];
        v[0] = 1.0;
        apply_action(&mut w, &a, &ActionVector::new(&v).unwrap(), ActionMode::JointRotation, 180.0);
        assert_eq!(a.joints(&w)[0].target, JointTarget::Rotation { x: 90.0, z: 0.0 });

        let mut v = [0.0; 16];
        v[7] = 0.5;
        apply_action(&mut w, &a, &ActionVector::new(&v).unwrap(), ActionMode::JointVelocity, 180.0);
        assert_eq!(a.joints(&w)[3].target, JointTarget::Velocity { x: 0.0, z: 90.0 });
    }

    #[test]
    fn malformed_actions() {
        assert!(ActionVector::new(&[0.0; 15]).is_err());
        assert!(ActionVector::new(&[f64::NAN; 16]).is_err());
        let a = ActionVector::new(&[3.0; 16]).unwrap();
        assert!(a.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn proprioception_normalizes() {
        let mut w = World::new(Terrain::default());
        let a = assemble_agent(&mut w, &AgentSpec::default(), spawn()).unwrap();
        assert!(proprioception(&w, &a).iter().all(|&v| v == 0.0));
        w.bodies[a.body].joints[0].angle_x = 45.0;
        w.bodies[a.body].joints[7].angle_z = -45.0;
        let p = proprioception(&w, &a);
        assert_eq!(p[0], 0.5);
        assert_eq!(p[15], -1.0);
    }

    #[test]
    fn rotation_target_is_approached_monotonically() {
        let mut w = World::new(Terrain::default());
        let a = assemble_agent(&mut w, &AgentSpec::default(), spawn()).unwrap();
        let mut v = [0.0; 16];
        v[0] = 1.0;
        apply_action(&mut w, &a, &ActionVector::new(&v).unwrap(), ActionMode::JointRotation, 180.0);
        let cfg = PhysicsConfig::default();
        let mut last = 0.0;
        for _ in 0..300 {
            step_physics(&mut w, &cfg).unwrap();
            let angle = a.joints(&w)[0].angle_x;
            assert!(angle >= last - 1e-12, "angle went back from {last} to {angle}");
            assert!(angle <= 90.0);
            last = angle;
        }
        assert!(last > 89.0, "{last}");
    }

    #[test]
    fn standing_still_is_stable() {
        let mut w = World::new(Terrain::default());
        let a = assemble_agent(&mut w, &AgentSpec::default(), spawn()).unwrap();
        let start = w.center_of_mass(a.body).y;
        let cfg = PhysicsConfig::default();
        for _ in 0..500 {
            step_physics(&mut w, &cfg).unwrap();
        }
        let end = w.center_of_mass(a.body).y;
        assert!((end - start).abs() <= 0.1 * start, "{start} -> {end}");
        assert!(!w.contacts().iter().any(|c| c.a == a.head && c.tag_b == Tag::Floor));
    }
}
