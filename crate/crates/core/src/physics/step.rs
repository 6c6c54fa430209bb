//! Fixed-step integration and contact resolution.
//!
//! Per body and step, in this order:
//! 1. joint motors update joint rates and angles (semi-implicit Euler, hard limits);
//! 2. gravity and root integration of the composite;
//! 3. positional projection of penetrating contacts (root translation only);
//! 4. sequential normal impulses plus Coulomb-clamped tangential impulses on
//!    the composite rigid body, using contact-point velocities that include
//!    the joint-driven motion of the touching link.
//!
//! Contacts act on the composite; they are not propagated back into joint
//! coordinates, so motors always reach their commanded trajectories. Dynamic
//! bodies respond to static/kinematic geometry and terrain only; body-body
//! overlaps are reported as events but not resolved.

use nalgebra::Matrix3;

use super::shape::{core_proximity, Core, Pose, Proximity, Quat, Vec3};
use super::world::{
    Articulation, BodyId, ContactEvent, ContactTarget, FellEvent, Joint2DOF, JointTarget, Motion,
    PartId, PhysicsConfig, PhysicsError, World, CONTACT_SKIN, FALL_LINE, JOINT_X_LIMIT_DEG,
    JOINT_Z_LIMIT_DEG,
};

/// Capsules touch the ground through this many sample spheres.
const CAPSULE_GROUND_SAMPLES: usize = 5;
const PROJECTION_PASSES: usize = 4;

struct SolverContact {
    link: usize,
    normal: Vec3,
    point: Vec3,
    depth: f64,
    other_velocity: Vec3,
}

/// Advances the world by one `config.dt`.
pub fn step_physics(world: &mut World, config: &PhysicsConfig) -> Result<(), PhysicsError> {
    world.fell.clear();
    for body in 0..world.bodies.len() {
        step_body(world, body, config)?;
    }
    world.step_index += 1;
    world.collect_contacts();
    Ok(())
}

/// Contact events recorded by the most recent step.
pub fn query_contacts(world: &World) -> Vec<ContactEvent> {
    world.contacts().to_vec()
}

fn drive_axis(angle: &mut f64, rate: &mut f64, target: f64, rotation_mode: bool, limit: f64, inertia: f64, cfg: &PhysicsConfig) {
    let theta = angle.to_radians();
    let omega = rate.to_radians();
    let torque = if rotation_mode {
        cfg.motor_kp * (target.to_radians() - theta) - cfg.motor_kd * omega
    } else {
        cfg.motor_kv * (target.to_radians() - omega)
    }
    .clamp(-cfg.torque_max, cfg.torque_max);
    let mut new_omega = omega + torque / inertia * cfg.dt;
    if !rotation_mode {
        // A velocity servo cannot overshoot its setpoint within one step.
        let goal = target.to_radians();
        if (omega - goal) * (new_omega - goal) < 0.0 {
            new_omega = goal;
        }
    }
    let new_theta = theta + new_omega * cfg.dt;
    let deg = new_theta.to_degrees();
    if deg > limit || deg < -limit {
        *angle = deg.clamp(-limit, limit);
        *rate = 0.0;
    } else {
        *angle = deg;
        *rate = new_omega.to_degrees();
    }
}

fn drive_joint(joint: &mut Joint2DOF, cfg: &PhysicsConfig) {
    let (rotation_mode, tx, tz) = match joint.target {
        JointTarget::Rotation { x, z } => (true, x, z),
        JointTarget::Velocity { x, z } => (false, x, z),
    };
    let inertia = joint.inertia;
    drive_axis(&mut joint.angle_x, &mut joint.angular_velocity_x, tx, rotation_mode, JOINT_X_LIMIT_DEG, inertia, cfg);
    drive_axis(&mut joint.angle_z, &mut joint.angular_velocity_z, tz, rotation_mode, JOINT_Z_LIMIT_DEG, inertia, cfg);
}

fn step_body(world: &mut World, body: BodyId, cfg: &PhysicsConfig) -> Result<(), PhysicsError> {
    let dt = cfg.dt;
    let mut art: Articulation = world.bodies[body].clone();
    let prev_frames = art.local_frames();

    for joint in &mut art.joints {
        drive_joint(joint, cfg);
    }

    art.root_velocity.y -= cfg.gravity * dt;
    art.root_position += art.root_velocity * dt;
    let spin = Quat::from_scaled_axis(art.root_angular_velocity * dt);
    art.root_orientation = spin * art.root_orientation;
    art.root_orientation.renormalize();

    let frames = art.local_frames();
    let mut poses = art.part_poses(&frames);

    // Gather penetrating contacts against solid static/kinematic geometry.
    let mut contacts: Vec<SolverContact> = Vec::new();
    for (li, link) in art.links.iter().enumerate() {
        let part = &world.parts[link.part];
        if !part.enabled {
            continue;
        }
        for (target, prox) in proximities(world, link.part, &poses[li], false, 0.0) {
            let other_velocity = match target {
                ContactTarget::Part(o) => world.parts[o].linear_velocity,
                ContactTarget::Terrain => Vec3::zeros(),
            };
            contacts.push(SolverContact {
                link: li,
                normal: prox.normal,
                point: prox.point,
                depth: -prox.separation,
                other_velocity,
            });
        }
    }

    if !contacts.is_empty() {
        let mut shift = Vec3::zeros();
        for _ in 0..PROJECTION_PASSES {
            for c in &contacts {
                let remaining = c.depth - c.normal.dot(&shift);
                if remaining > 0.0 {
                    shift += c.normal * remaining;
                }
            }
        }
        art.root_position += shift;
        for p in &mut poses {
            p.position += shift;
        }
        for c in &mut contacts {
            c.point += shift;
        }
        solve_velocities(world, &mut art, &poses, &prev_frames, &frames, &contacts, cfg);
    }

    // Write back poses and velocities.
    let ang = art.root_angular_velocity;
    for (li, link) in art.links.iter().enumerate() {
        let pose = poses[li];
        let joint_vel = joint_point_velocity(&art, &prev_frames, &frames, li, &pose.position, dt);
        let rel = frames[li].rotation * prev_frames[li].rotation.inverse();
        let joint_ang = art.root_orientation * (rel.scaled_axis() / dt);
        let part = &mut world.parts[link.part];
        part.position = pose.position;
        part.orientation = pose.orientation;
        part.linear_velocity = art.root_velocity + ang.cross(&(pose.position - art.root_position)) + joint_vel;
        part.angular_velocity = ang + joint_ang;
        let finite = part.position.iter().all(|v| v.is_finite())
            && part.linear_velocity.iter().all(|v| v.is_finite())
            && part.angular_velocity.iter().all(|v| v.is_finite())
            && part.orientation.coords.iter().all(|v| v.is_finite());
        if !finite {
            return Err(PhysicsError::Diverged { part: part.id });
        }
        if part.position.y < FALL_LINE && !world.fell.iter().any(|f| f.body == body) {
            world.fell.push(FellEvent { body, part: part.id });
        }
    }
    world.bodies[body] = art;
    Ok(())
}

/// Velocity of a material point of link `li` caused by joint motion alone.
fn joint_point_velocity(
    art: &Articulation,
    prev: &[super::world::LinkFrame],
    now: &[super::world::LinkFrame],
    li: usize,
    world_point: &Vec3,
    dt: f64,
) -> Vec3 {
    if art.links[li].joint.is_none() && art.links[li].parent.is_none() {
        return Vec3::zeros();
    }
    let q = art.root_orientation;
    let p_root = q.inverse_transform_vector(&(world_point - art.root_position));
    let material = now[li].rotation.inverse_transform_vector(&(p_root - now[li].origin));
    let before = prev[li].origin + prev[li].rotation * material;
    q * ((p_root - before) / dt)
}

struct MassProps {
    mass: f64,
    com: Vec3,
    inv_inertia: Matrix3<f64>,
}

fn mass_props(world: &World, art: &Articulation, poses: &[Pose]) -> MassProps {
    let mut mass = 0.0;
    let mut acc = Vec3::zeros();
    for (link, pose) in art.links.iter().zip(poses) {
        let m = world.parts[link.part].mass;
        mass += m;
        acc += pose.position * m;
    }
    let com = acc / mass;
    let mut inertia = Matrix3::zeros();
    for (link, pose) in art.links.iter().zip(poses) {
        let part = &world.parts[link.part];
        let d = pose.position - com;
        inertia += part.shape.inertia_world(part.mass, &pose.orientation)
            + (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * part.mass;
    }
    let inv_inertia = inertia.try_inverse().unwrap_or_else(Matrix3::zeros);
    MassProps { mass, com, inv_inertia }
}

fn solve_velocities(
    world: &World,
    art: &mut Articulation,
    poses: &[Pose],
    prev: &[super::world::LinkFrame],
    now: &[super::world::LinkFrame],
    contacts: &[SolverContact],
    cfg: &PhysicsConfig,
) {
    let props = mass_props(world, art, poses);
    let joint_vel: Vec<Vec3> = contacts
        .iter()
        .map(|c| joint_point_velocity(art, prev, now, c.link, &c.point, cfg.dt))
        .collect();

    let point_velocity = |art: &Articulation, i: usize| -> Vec3 {
        let c = &contacts[i];
        art.root_velocity + art.root_angular_velocity.cross(&(c.point - art.root_position)) + joint_vel[i]
            - c.other_velocity
    };
    let inv_k = |r: &Vec3, dir: &Vec3| -> f64 {
        1.0 / props.mass + dir.dot(&(props.inv_inertia * r.cross(dir)).cross(r))
    };
    let apply = |art: &mut Articulation, impulse: Vec3, point: &Vec3| {
        let r = point - props.com;
        let d_omega = props.inv_inertia * r.cross(&impulse);
        art.root_velocity += impulse / props.mass + d_omega.cross(&(art.root_position - props.com));
        art.root_angular_velocity += d_omega;
    };

    let bounce: Vec<f64> = (0..contacts.len())
        .map(|i| {
            let vn = point_velocity(art, i).dot(&contacts[i].normal);
            if vn < 0.0 {
                -cfg.restitution * vn
            } else {
                0.0
            }
        })
        .collect();
    let mut acc_n = vec![0.0; contacts.len()];
    let mut acc_t = vec![Vec3::zeros(); contacts.len()];

    for _ in 0..cfg.solver_iterations {
        for (i, c) in contacts.iter().enumerate() {
            let r = c.point - props.com;
            let vn = point_velocity(art, i).dot(&c.normal);
            let dj = (bounce[i] - vn) / inv_k(&r, &c.normal);
            let new_n = (acc_n[i] + dj).max(0.0);
            let applied = new_n - acc_n[i];
            acc_n[i] = new_n;
            if applied != 0.0 {
                apply(art, c.normal * applied, &c.point);
            }

            let v = point_velocity(art, i);
            let vt = v - c.normal * v.dot(&c.normal);
            let speed = vt.norm();
            if speed > 1e-12 {
                let t = vt / speed;
                let jt = -speed / inv_k(&r, &t);
                let mut new_t = acc_t[i] + t * jt;
                let cap = cfg.friction * acc_n[i];
                let len = new_t.norm();
                if len > cap {
                    new_t *= cap / len;
                }
                let applied_t = new_t - acc_t[i];
                acc_t[i] = new_t;
                apply(art, applied_t, &c.point);
            }
        }
    }
}

/// Proximities of part `id` at `pose` against every other relevant collider.
/// With `events` set, food is included and one entry per target is returned;
/// otherwise only solid geometry, one entry per penetrating terrain sample.
fn proximities(world: &World, id: PartId, pose: &Pose, events: bool, max_sep: f64) -> Vec<(ContactTarget, Proximity)> {
    let part = &world.parts[id];
    let (core, radius) = part.shape.core(pose);
    let bound = part.shape.bounding_radius();
    let mut out = Vec::new();

    for other in &world.parts {
        if other.id == id || !other.enabled {
            continue;
        }
        if part.body.is_some() && other.body == part.body {
            continue;
        }
        if !events {
            if !other.tag.is_solid() || other.motion == Motion::Dynamic {
                continue;
            }
        } else if other.motion == Motion::Dynamic && other.id < id {
            // Reported from the lower id's side.
            continue;
        }
        let gap = (other.position - pose.position).norm() - bound - other.shape.bounding_radius();
        if gap > max_sep {
            continue;
        }
        let prox = core_proximity(&core, radius, &other.shape, &other.pose());
        if (events && prox.separation <= max_sep) || (!events && prox.separation < max_sep) {
            out.push((ContactTarget::Part(other.id), prox));
        }
    }

    let samples: Vec<(Vec3, f64)> = match &core {
        Core::Point(p) => vec![(*p, radius)],
        Core::Segment(a, b) => (0..CAPSULE_GROUND_SAMPLES)
            .map(|k| (a + (b - a) * (k as f64 / (CAPSULE_GROUND_SAMPLES - 1) as f64), radius))
            .collect(),
        Core::Corners(ps) => ps.iter().map(|p| (*p, 0.0)).collect(),
    };
    let mut deepest: Option<Proximity> = None;
    for (center, r) in samples {
        if let Some((sep, normal)) = world.terrain.sphere_contact(&center, r) {
            let prox = Proximity {
                separation: sep,
                normal,
                point: center - normal * r,
            };
            if events {
                if sep <= max_sep && deepest.map_or(true, |d| sep < d.separation) {
                    deepest = Some(prox);
                }
            } else if sep < max_sep {
                out.push((ContactTarget::Terrain, prox));
            }
        }
    }
    if let Some(d) = deepest {
        out.push((ContactTarget::Terrain, d));
    }
    out
}

impl World {
    /// Recomputes contact events for the current state.
    pub fn collect_contacts(&mut self) {
        let mut events = Vec::new();
        for part in &self.parts {
            if part.motion != Motion::Dynamic || !part.enabled {
                continue;
            }
            for (target, _) in proximities(self, part.id, &part.pose(), true, CONTACT_SKIN) {
                let tag_b = match target {
                    ContactTarget::Part(o) => self.parts[o].tag,
                    ContactTarget::Terrain => super::world::Tag::Floor,
                };
                events.push(ContactEvent {
                    tag_a: part.tag,
                    a: part.id,
                    tag_b,
                    b: target,
                });
            }
        }
        events.sort();
        events.dedup();
        self.contacts = events;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::shape::Shape;
    use crate::physics::terrain::Terrain;
    use crate::physics::world::{RigidPart, Tag};

    fn ball(y: f64) -> RigidPart {
        let mut p = RigidPart::fixed(
            Shape::Sphere { radius: 0.5 },
            Vec3::new(0.0, y, 0.0),
            Quat::identity(),
            Tag::Pillar,
            [1.0, 1.0, 1.0],
        );
        p.mass = 1.0;
        p
    }

    #[test]
    fn sphere_rests_on_floor() {
        let mut w = World::new(Terrain::default());
        let b = w.add_dynamic(ball(0.5));
        let cfg = PhysicsConfig::default();
        for _ in 0..100 {
            step_physics(&mut w, &cfg).unwrap();
        }
        let p = w.parts[w.bodies[b].links[0].part].position;
        assert!((p - Vec3::new(0.0, 0.5, 0.0)).norm() < 1e-6, "{p:?}");
    }

    #[test]
    fn free_fall_matches_semi_implicit_closed_form() {
        let mut w = World::new(Terrain {
            holes: vec![crate::physics::terrain::HoleRect::centered(0.0, 0.0, 5.0, 5.0)],
            ..Terrain::default()
        });
        w.add_dynamic(ball(100.0));
        let cfg = PhysicsConfig::default();
        let n = 50;
        for _ in 0..n {
            step_physics(&mut w, &cfg).unwrap();
        }
        let drop = 100.0 - w.parts[0].position.y;
        let (g, dt) = (cfg.gravity, cfg.dt);
        let nf = n as f64;
        // Semi-implicit Euler: g dt^2 n (n + 1) / 2, i.e. 1/2 g t^2 plus a bias of 1/2 g dt t.
        let exact_discrete = g * dt * dt * nf * (nf + 1.0) / 2.0;
        assert!((drop - exact_discrete).abs() < 1e-9);
        let t = nf * dt;
        assert!((drop - 0.5 * g * t * t).abs() <= 0.5 * g * dt * t + 1e-9);
    }

    #[test]
    fn orientation_stays_normalized() {
        let mut w = World::new(Terrain::default());
        let mut p = ball(3.0);
        p.angular_velocity = Vec3::new(3.0, -7.0, 11.0);
        w.add_dynamic(p);
        let cfg = PhysicsConfig::default();
        for _ in 0..500 {
            step_physics(&mut w, &cfg).unwrap();
            assert!((w.parts[0].orientation.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_slides_to_rest_with_friction() {
        let mut w = World::new(Terrain::default());
        let mut p = ball(0.5);
        p.linear_velocity = Vec3::new(1.0, 0.0, 0.0);
        w.add_dynamic(p);
        let cfg = PhysicsConfig::default();
        for _ in 0..200 {
            step_physics(&mut w, &cfg).unwrap();
        }
        assert!(w.parts[0].linear_velocity.norm() < 1.0);
        assert!(w.parts[0].position.y > 0.49);
    }
}
