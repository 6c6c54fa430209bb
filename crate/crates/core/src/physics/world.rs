use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::shape::{Pose, Quat, Shape, Vec3};
use super::terrain::Terrain;

pub type PartId = usize;
pub type BodyId = usize;

/// Object class of a part; drives rewards and contact semantics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    AgentHead,
    AgentLimb,
    Wall,
    FoodGreen,
    FoodYellow,
    Plank,
    Pillar,
    Floor,
    ArenaBound,
}

impl Tag {
    pub fn is_agent(self) -> bool {
        matches!(self, Tag::AgentHead | Tag::AgentLimb)
    }

    pub fn is_food(self) -> bool {
        matches!(self, Tag::FoodGreen | Tag::FoodYellow)
    }

    /// Walls in the reward sense, including the arena boundary.
    pub fn is_wall(self) -> bool {
        matches!(self, Tag::Wall | Tag::ArenaBound)
    }

    /// Food is a trigger volume: it reports contacts but never pushes back.
    pub fn is_solid(self) -> bool {
        !self.is_food()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Static,
    /// Follows a prescribed trajectory; never integrated or pushed.
    Kinematic,
    Dynamic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidPart {
    pub id: PartId,
    pub shape: Shape,
    pub mass: f64,
    pub position: Vec3,
    pub orientation: Quat,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
    pub color: [f64; 3],
    pub tag: Tag,
    pub motion: Motion,
    pub transparent: bool,
    /// Disabled parts (eaten food, open gates) take part in nothing.
    pub enabled: bool,
    pub body: Option<BodyId>,
}

impl RigidPart {
    pub fn fixed(shape: Shape, position: Vec3, orientation: Quat, tag: Tag, color: [f64; 3]) -> Self {
        Self {
            id: 0,
            shape,
            mass: 0.0,
            position,
            orientation,
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            color,
            tag,
            motion: Motion::Static,
            transparent: false,
            enabled: true,
            body: None,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.orientation)
    }
}

/// Motor command of a two-axis joint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum JointTarget {
    /// Target angles in degrees.
    Rotation { x: f64, z: f64 },
    /// Target angular velocities in degrees per second.
    Velocity { x: f64, z: f64 },
}

pub const JOINT_X_LIMIT_DEG: f64 = 90.0;
pub const JOINT_Z_LIMIT_DEG: f64 = 45.0;

/// Two-axis motorized hinge. Angles are in degrees, rates in degrees per second.
///
/// The child frame is the parent frame rotated by `Rz(angle_z) * Rx(angle_x)`
/// about `axis_z` and `axis_x` (both given in the parent link frame).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint2DOF {
    pub parent: PartId,
    pub child: PartId,
    pub anchor: Vec3,
    pub axis_x: Vec3,
    pub axis_z: Vec3,
    pub angle_x: f64,
    pub angle_z: f64,
    pub angular_velocity_x: f64,
    pub angular_velocity_z: f64,
    pub target: JointTarget,
    /// Effective moment of inertia about each axis (kg m^2).
    pub inertia: f64,
}

impl Joint2DOF {
    pub fn local_rotation(&self) -> Quat {
        let rz = Quat::from_axis_angle(&nalgebra::Unit::new_normalize(self.axis_z), self.angle_z.to_radians());
        let rx = Quat::from_axis_angle(&nalgebra::Unit::new_normalize(self.axis_x), self.angle_x.to_radians());
        rz * rx
    }
}

/// One rigid part in an articulated chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub part: PartId,
    /// Parent link index; `None` for the root.
    pub parent: Option<usize>,
    pub joint: Option<usize>,
    /// Part center relative to this link's frame origin (the joint anchor), in link frame.
    pub center_offset: Vec3,
    /// Part orientation relative to the link frame.
    pub part_rotation: Quat,
}

/// Frame of a link relative to the body root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkFrame {
    pub origin: Vec3,
    pub rotation: Quat,
}

/// A dynamic body: a tree of links whose joints are driven by their own motor
/// dynamics, while contacts and gravity act on the composite as one rigid body.
/// A free rigid part is an articulation with a single link and no joints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Articulation {
    pub links: Vec<Link>,
    pub joints: Vec<Joint2DOF>,
    pub root_position: Vec3,
    pub root_orientation: Quat,
    pub root_velocity: Vec3,
    pub root_angular_velocity: Vec3,
}

impl Articulation {
    /// Link frames relative to the root, in link order (parents precede children).
    pub fn local_frames(&self) -> Vec<LinkFrame> {
        let mut frames: Vec<LinkFrame> = Vec::with_capacity(self.links.len());
        for link in &self.links {
            let frame = match (link.parent, link.joint) {
                (Some(p), Some(j)) => {
                    let parent = frames[p];
                    let joint = &self.joints[j];
                    LinkFrame {
                        origin: parent.origin + parent.rotation * joint.anchor,
                        rotation: parent.rotation * joint.local_rotation(),
                    }
                }
                _ => LinkFrame {
                    origin: Vec3::zeros(),
                    rotation: Quat::identity(),
                },
            };
            frames.push(frame);
        }
        frames
    }

    /// World pose of each link's part for the given root-relative frames.
    pub fn part_poses(&self, frames: &[LinkFrame]) -> Vec<Pose> {
        self.links
            .iter()
            .zip(frames)
            .map(|(link, f)| {
                let rot = self.root_orientation * f.rotation;
                Pose::new(
                    self.root_position + self.root_orientation * (f.origin + f.rotation * link.center_offset),
                    rot * link.part_rotation,
                )
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsConfig {
    pub dt: f64,
    /// Magnitude of downward gravitational acceleration.
    pub gravity: f64,
    pub motor_kp: f64,
    pub motor_kd: f64,
    pub motor_kv: f64,
    pub torque_max: f64,
    pub friction: f64,
    pub restitution: f64,
    pub solver_iterations: usize,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            gravity: 9.81,
            motor_kp: 60.0,
            motor_kd: 5.0,
            motor_kv: 10.0,
            torque_max: 20.0,
            friction: 0.8,
            restitution: 0.0,
            solver_iterations: 8,
        }
    }
}

impl PhysicsConfig {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PhysicsError::InvalidConfig("dt must be positive".into()));
        }
        if !(self.torque_max > 0.0) {
            return Err(PhysicsError::InvalidConfig("torque_max must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum ContactTarget {
    Part(PartId),
    Terrain,
}

/// An overlap observed at the end of a step. `a` is always a dynamic-body
/// part; when both sides are parts, `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContactEvent {
    pub tag_a: Tag,
    pub a: PartId,
    pub tag_b: Tag,
    pub b: ContactTarget,
}

impl ContactEvent {
    pub fn involves(&self, tag: Tag) -> bool {
        self.tag_a == tag || self.tag_b == tag
    }

    /// The tag pair with the smaller tag first.
    pub fn tags(&self) -> (Tag, Tag) {
        if self.tag_a <= self.tag_b {
            (self.tag_a, self.tag_b)
        } else {
            (self.tag_b, self.tag_a)
        }
    }

    /// The side that is not `part`, if `part` is one of the two.
    pub fn other(&self, part: PartId) -> Option<(Tag, ContactTarget)> {
        if self.a == part {
            Some((self.tag_b, self.b))
        } else if self.b == ContactTarget::Part(part) {
            Some((self.tag_a, ContactTarget::Part(self.a)))
        } else {
            None
        }
    }
}

/// A dynamic part whose center dropped below the fall line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FellEvent {
    pub body: BodyId,
    pub part: PartId,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("simulation diverged: non-finite state on part {part}")]
    Diverged { part: PartId },
    #[error("invalid physics config: {0}")]
    InvalidConfig(String),
}

/// Parts with a center below this height have fallen through a hole.
pub const FALL_LINE: f64 = -1.0;

/// Pairs closer than this count as touching.
pub const CONTACT_SKIN: f64 = 0.005;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub parts: Vec<RigidPart>,
    pub bodies: Vec<Articulation>,
    pub terrain: Terrain,
    pub step_index: u64,
    pub(crate) contacts: Vec<ContactEvent>,
    pub(crate) fell: Vec<FellEvent>,
}

impl World {
    pub fn new(terrain: Terrain) -> Self {
        Self {
            parts: Vec::new(),
            bodies: Vec::new(),
            terrain,
            step_index: 0,
            contacts: Vec::new(),
            fell: Vec::new(),
        }
    }

    /// Registers a static or kinematic part and returns its id.
    pub fn add_part(&mut self, mut part: RigidPart) -> PartId {
        let id = self.parts.len();
        part.id = id;
        self.parts.push(part);
        id
    }

    /// Registers a free dynamic part as a single-link body.
    pub fn add_dynamic(&mut self, mut part: RigidPart) -> BodyId {
        assert!(part.mass > 0.0, "dynamic parts need positive mass");
        let body = self.bodies.len();
        part.motion = Motion::Dynamic;
        part.body = Some(body);
        let root_position = part.position;
        let root_orientation = part.orientation;
        let root_velocity = part.linear_velocity;
        let root_angular_velocity = part.angular_velocity;
        let id = self.add_part(part);
        self.bodies.push(Articulation {
            links: vec![Link {
                part: id,
                parent: None,
                joint: None,
                center_offset: Vec3::zeros(),
                part_rotation: Quat::identity(),
            }],
            joints: Vec::new(),
            root_position,
            root_orientation,
            root_velocity,
            root_angular_velocity,
        });
        body
    }

    /// Registers an articulated body whose links reference parts already added
    /// with [`World::add_part`]; part poses are synced from the root.
    pub fn add_articulation(&mut self, body: Articulation) -> BodyId {
        let id = self.bodies.len();
        for link in &body.links {
            let part = &mut self.parts[link.part];
            part.motion = Motion::Dynamic;
            part.body = Some(id);
        }
        self.bodies.push(body);
        self.sync_body(id);
        id
    }

    /// Copies the body's forward kinematics into its parts' poses.
    pub fn sync_body(&mut self, body: BodyId) {
        let art = &self.bodies[body];
        let poses = art.part_poses(&art.local_frames());
        for (link, pose) in art.links.iter().zip(poses) {
            let part = &mut self.parts[link.part];
            part.position = pose.position;
            part.orientation = pose.orientation;
        }
    }

    /// Contact events recorded by the last step.
    pub fn contacts(&self) -> &[ContactEvent] {
        &self.contacts
    }

    pub fn fell_events(&self) -> &[FellEvent] {
        &self.fell
    }

    pub fn total_mass(&self, body: BodyId) -> f64 {
        self.bodies[body].links.iter().map(|l| self.parts[l.part].mass).sum()
    }

    pub fn center_of_mass(&self, body: BodyId) -> Vec3 {
        let art = &self.bodies[body];
        let mut acc = Vec3::zeros();
        let mut m = 0.0;
        for link in &art.links {
            let p = &self.parts[link.part];
            acc += p.position * p.mass;
            m += p.mass;
        }
        acc / m
    }

    /// Rigidly moves a body so its root sits at `position`, zeroing velocities.
    pub fn teleport_body(&mut self, body: BodyId, position: Vec3) {
        let art = &mut self.bodies[body];
        art.root_position = position;
        art.root_velocity = Vec3::zeros();
        art.root_angular_velocity = Vec3::zeros();
        self.sync_body(body);
    }
}
