//! Ray queries against primitives, terrain and whole worlds.

use serde::{Deserialize, Serialize};

use super::shape::{Pose, Shape, Vec3};
use super::world::{ContactTarget, RigidPart, Tag, World};

/// First surface crossing at `t > 0`. Rays starting inside a solid report the
/// exit point.
pub fn ray_shape(shape: &Shape, pose: &Pose, origin: &Vec3, dir: &Vec3) -> Option<f64> {
    match *shape {
        Shape::Sphere { radius } => ray_sphere(&pose.position, radius, origin, dir),
        Shape::Capsule { half_length, radius } => {
            let o = pose.to_local(origin);
            let d = pose.orientation.inverse_transform_vector(dir);
            ray_capsule_local(half_length, radius, &o, &d)
        }
        Shape::Box { half_extents } => {
            let o = pose.to_local(origin);
            let d = pose.orientation.inverse_transform_vector(dir);
            ray_box_local(&half_extents, &o, &d)
        }
    }
}

fn first_positive(t1: f64, t2: f64) -> Option<f64> {
    if t1 > 0.0 {
        Some(t1)
    } else if t2 > 0.0 {
        Some(t2)
    } else {
        None
    }
}

pub fn ray_sphere(center: &Vec3, radius: f64, origin: &Vec3, dir: &Vec3) -> Option<f64> {
    let oc = origin - center;
    let b = dir.dot(&oc);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    first_positive(-b - s, -b + s)
}

fn ray_capsule_local(half_length: f64, radius: f64, o: &Vec3, d: &Vec3) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut keep = |t: f64| {
        if t > 0.0 && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    };
    // Cylinder side.
    let a = d.x * d.x + d.z * d.z;
    if a > 1e-300 {
        let b = o.x * d.x + o.z * d.z;
        let c = o.x * o.x + o.z * o.z - radius * radius;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            for t in [(-b - s) / a, (-b + s) / a] {
                let y = o.y + d.y * t;
                if y.abs() <= half_length {
                    keep(t);
                }
            }
        }
    }
    // End caps: only the outer hemispheres belong to the surface.
    for sign in [1.0, -1.0] {
        let center = Vec3::new(0.0, sign * half_length, 0.0);
        let oc = o - center;
        let b = d.dot(&oc);
        let c = oc.norm_squared() - radius * radius;
        let disc = b * b - c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            for t in [-b - s, -b + s] {
                let y = o.y + d.y * t;
                if sign * y >= half_length {
                    keep(t);
                }
            }
        }
    }
    best
}

fn ray_box_local(h: &[f64; 3], o: &Vec3, d: &Vec3) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for k in 0..3 {
        if d[k].abs() < 1e-300 {
            if o[k].abs() > h[k] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[k];
        let (mut t0, mut t1) = ((-h[k] - o[k]) * inv, (h[k] - o[k]) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    first_positive(t_near, t_far)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub distance: f64,
    pub color: [f64; 3],
    pub tag: Tag,
    pub target: ContactTarget,
    pub transparent: bool,
}

impl World {
    /// Nearest hit among enabled parts accepted by `filter`, and the terrain.
    pub fn raycast_filtered<F: Fn(&RigidPart) -> bool>(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        max_range: f64,
        filter: F,
    ) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        for part in &self.parts {
            if !part.enabled || !filter(part) {
                continue;
            }
            // Bounding-sphere rejection.
            let oc = part.position - origin;
            let along = oc.dot(dir);
            let r = part.shape.bounding_radius();
            if along < -r || oc.norm_squared() - along * along > r * r {
                continue;
            }
            if let Some(t) = ray_shape(&part.shape, &part.pose(), origin, dir) {
                if t <= max_range && best.map_or(true, |b| t < b.distance) {
                    best = Some(RayHit {
                        distance: t,
                        color: part.color,
                        tag: part.tag,
                        target: ContactTarget::Part(part.id),
                        transparent: part.transparent,
                    });
                }
            }
        }
        let limit = best.map_or(max_range, |b| b.distance);
        if let Some(t) = self.terrain.raycast(origin, dir, limit) {
            if best.map_or(true, |b| t < b.distance) {
                best = Some(RayHit {
                    distance: t,
                    color: self.terrain.color,
                    tag: Tag::Floor,
                    target: ContactTarget::Terrain,
                    transparent: false,
                });
            }
        }
        best
    }
}

/// Nearest intersection with every enabled part and the terrain.
pub fn raycast(world: &World, origin: &Vec3, direction: &Vec3, max_range: f64) -> Option<RayHit> {
    world.raycast_filtered(origin, direction, max_range, |_| true)
}
