//! Collision primitives and their distance queries.
//!
//! All narrow-phase work is expressed through signed distance functions: the
//! static side of a pair is queried with [`Shape::signed_distance`] and the
//! dynamic side is reduced to a "core" (point, segment or corner set) plus an
//! inflation radius. Capsule and box cores are minimized with golden-section
//! search, which is exact up to tolerance because the signed distance to a
//! convex set is convex along any line.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

pub fn up() -> Vec3 {
    Vec3::new(0.0, 1.0, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Sphere { radius: f64 },
    /// Segment along local +y of length `2 * half_length`, inflated by `radius`.
    Capsule { half_length: f64, radius: f64 },
    Box { half_extents: [f64; 3] },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Self { position, orientation }
    }

    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        self.position + self.orientation * local
    }

    pub fn to_local(&self, world: &Vec3) -> Vec3 {
        self.orientation.inverse_transform_vector(&(world - self.position))
    }
}

/// Geometric reduction of a shape used when it is the moving side of a pair.
#[derive(Clone, Debug)]
pub enum Core {
    Point(Vec3),
    Segment(Vec3, Vec3),
    Corners(Vec<Vec3>),
}

/// Closest approach between a dynamic core and a static SDF.
#[derive(Clone, Copy, Debug)]
pub struct Proximity {
    /// Surface-to-surface signed separation (negative when overlapping).
    pub separation: f64,
    /// Unit normal pointing from the static shape toward the dynamic one.
    pub normal: Vec3,
    /// Deepest point on the dynamic shape's surface.
    pub point: Vec3,
}

impl Shape {
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::Capsule { half_length, radius } => half_length + radius,
            Shape::Box { half_extents: h } => (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt(),
        }
    }

    /// Principal moments of inertia in the shape's local frame.
    pub fn inertia_diag(&self, mass: f64) -> Vec3 {
        match *self {
            Shape::Sphere { radius } => Vec3::repeat(0.4 * mass * radius * radius),
            Shape::Capsule { half_length, radius } => {
                // Solid cylinder of the full length; caps are folded into the length.
                let len = 2.0 * half_length + 2.0 * radius;
                let axial = 0.5 * mass * radius * radius;
                let transverse = mass * (3.0 * radius * radius + len * len) / 12.0;
                Vec3::new(transverse, axial, transverse)
            }
            Shape::Box { half_extents: h } => {
                let (x, y, z) = (2.0 * h[0], 2.0 * h[1], 2.0 * h[2]);
                Vec3::new(
                    mass * (y * y + z * z) / 12.0,
                    mass * (x * x + z * z) / 12.0,
                    mass * (x * x + y * y) / 12.0,
                )
            }
        }
    }

    /// World-frame inertia tensor about the shape's center.
    pub fn inertia_world(&self, mass: f64, orientation: &Quat) -> Matrix3<f64> {
        let r = orientation.to_rotation_matrix().into_inner();
        r * Matrix3::from_diagonal(&self.inertia_diag(mass)) * r.transpose()
    }

    /// Capsule segment endpoints in world coordinates.
    pub fn segment(&self, pose: &Pose) -> Option<(Vec3, Vec3)> {
        match *self {
            Shape::Capsule { half_length, .. } => {
                let axis = pose.orientation * Vec3::new(0.0, half_length, 0.0);
                Some((pose.position - axis, pose.position + axis))
            }
            _ => None,
        }
    }

    /// Signed distance from `point` to the surface and the outward unit normal.
    pub fn signed_distance(&self, pose: &Pose, point: &Vec3) -> (f64, Vec3) {
        match *self {
            Shape::Sphere { radius } => {
                let d = point - pose.position;
                let n = d.norm();
                let normal = if n > 1e-12 { d / n } else { up() };
                (n - radius, normal)
            }
            Shape::Capsule { radius, .. } => {
                let (a, b) = self.segment(pose).expect("capsule");
                let c = closest_on_segment(point, &a, &b);
                let d = point - c;
                let n = d.norm();
                let normal = if n > 1e-12 {
                    d / n
                } else {
                    pose.orientation * Vec3::new(1.0, 0.0, 0.0)
                };
                (n - radius, normal)
            }
            Shape::Box { half_extents: h } => {
                let p = pose.to_local(point);
                let h = Vec3::new(h[0], h[1], h[2]);
                let q = p.abs() - h;
                let outside = q.map(|v| v.max(0.0));
                let out_len = outside.norm();
                if out_len > 0.0 {
                    let local_n = Vec3::new(
                        outside.x.copysign(p.x),
                        outside.y.copysign(p.y),
                        outside.z.copysign(p.z),
                    ) / out_len;
                    (out_len, pose.orientation * local_n)
                } else {
                    // Inside: nearest face wins; ties resolve x, then y, then z.
                    let mut axis = 0;
                    for k in 1..3 {
                        if q[k] > q[axis] {
                            axis = k;
                        }
                    }
                    let mut local_n = Vec3::zeros();
                    local_n[axis] = if p[axis] >= 0.0 { 1.0 } else { -1.0 };
                    (q[axis], pose.orientation * local_n)
                }
            }
        }
    }

    /// Core and inflation radius for this shape at `pose`.
    pub fn core(&self, pose: &Pose) -> (Core, f64) {
        match *self {
            Shape::Sphere { radius } => (Core::Point(pose.position), radius),
            Shape::Capsule { radius, .. } => {
                let (a, b) = self.segment(pose).expect("capsule");
                (Core::Segment(a, b), radius)
            }
            Shape::Box { half_extents: h } => {
                let mut corners = Vec::with_capacity(8);
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        for sz in [-1.0, 1.0] {
                            corners.push(pose.to_world(&Vec3::new(sx * h[0], sy * h[1], sz * h[2])));
                        }
                    }
                }
                (Core::Corners(corners), 0.0)
            }
        }
    }
}

pub fn closest_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Minimizes a convex function on `[0, 1]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..72 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    // The endpoints are exact candidates and often the true minimizer.
    [0.0, mid, 1.0]
        .into_iter()
        .fold((mid, f(mid)), |best, t| {
            let v = f(t);
            if v < best.1 {
                (t, v)
            } else {
                best
            }
        })
        .0
}

/// Closest approach of a dynamic core (inflated by `radius`) to a static shape.
pub fn core_proximity(core: &Core, radius: f64, shape: &Shape, pose: &Pose) -> Proximity {
    let at = |p: &Vec3| {
        let (d, n) = shape.signed_distance(pose, p);
        Proximity {
            separation: d - radius,
            normal: n,
            point: p - n * radius,
        }
    };
    match core {
        Core::Point(p) => at(p),
        Core::Segment(a, b) => {
            let t = golden_section_min(|t| shape.signed_distance(pose, &(a + (b - a) * t)).0);
            at(&(a + (b - a) * t))
        }
        Core::Corners(ps) => ps
            .iter()
            .map(at)
            .fold(None, |best: Option<Proximity>, p| match best {
                Some(b) if b.separation <= p.separation => Some(b),
                _ => Some(p),
            })
            .expect("non-empty corner set"),
    }
}
