//! Minimal rigid-body kernel: primitives, terrain with holes, two-axis
//! motorized joints, projection-based contacts and ray queries.
//!
//! Conventions: y is up, agents face +z at heading 0, lengths in meters,
//! joint angles in degrees. All arithmetic is `f64` with a fixed body, link
//! and contact iteration order so identical inputs step identically.

mod ray;
mod shape;
mod step;
mod terrain;
mod world;

pub use ray::{ray_shape, ray_sphere, raycast, RayHit};
pub use shape::{closest_on_segment, core_proximity, golden_section_min, up, Core, Pose, Proximity, Quat, Shape, Vec3};
pub use step::{query_contacts, step_physics};
pub use terrain::{ray_triangle, Heightfield, HoleRect, Terrain, Triangle};
pub use world::{
    Articulation, BodyId, ContactEvent, ContactTarget, FellEvent, Joint2DOF, JointTarget, Link, LinkFrame, Motion,
    PartId, PhysicsConfig, PhysicsError, RigidPart, Tag, World, CONTACT_SKIN, FALL_LINE, JOINT_X_LIMIT_DEG,
    JOINT_Z_LIMIT_DEG,
};
