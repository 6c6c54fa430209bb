mod support;

use std::collections::HashSet;

use limbarena_core::agent::{assemble_agent, ActionMode, AgentSpec, SpawnPose};
use limbarena_core::arena::{instantiate, FoodKind};
use limbarena_core::env::{Env, EpisodeConfig};
use limbarena_core::levelgen::{generate, GenParams, TaskId};
use limbarena_core::physics::{query_contacts, ContactTarget, PhysicsConfig, Shape, Tag, Terrain, Vec3, World};
use limbarena_core::rng::Rng;
use proptest::prelude::*;
use support::oracles;

fn check_state(world: &World) -> Result<(), String> {
    for p in &world.parts {
        let finite = p.position.iter().chain(p.linear_velocity.iter()).chain(p.angular_velocity.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(format!("part {} non-finite", p.id));
        }
        let n = p.orientation.quaternion().norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(format!("part {} orientation norm {n}", p.id));
        }
    }
    for b in &world.bodies {
        for j in &b.joints {
            if !(j.angle_x.abs() <= 90.1 && j.angle_z.abs() <= 45.1) {
                return Err(format!("joint angles ({}, {})", j.angle_x, j.angle_z));
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn any_action_sequence_respects_limits(
        seed in any::<u64>(),
        velocity in any::<bool>(),
        actions in proptest::collection::vec(proptest::collection::vec(-1.5..1.5f64, 16), 1..120),
    ) {
        let mut cfg = EpisodeConfig::new(GenParams::new(TaskId::L4, (seed % 11) as u8, seed));
        if velocity {
            cfg.action_mode = ActionMode::JointVelocity;
        }
        let (mut env, _) = Env::reset(cfg).unwrap();
        for a in &actions {
            if env.is_done() {
                break;
            }
            env.step_raw(a).unwrap();
            prop_assert!(check_state(&env.arena().world).is_ok(), "{:?}", check_state(&env.arena().world));
        }
    }
}

#[test]
fn ten_thousand_random_steps_on_every_level_stay_finite() {
    for (k, task) in TaskId::ALL.into_iter().enumerate() {
        let mut steps = 0;
        let mut episode = 0;
        while steps < 10_000 {
            let mut cfg = EpisodeConfig::new(GenParams::new(task, 10, episode));
            cfg.maxsteps = 10_000;
            let (mut env, _) = Env::reset(cfg).unwrap();
            let mut rng = Rng::derive(k as u64, "finite-sweep");
            while !env.is_done() && steps < 10_000 {
                let a: Vec<f64> = (0..16).map(|_| rng.uniform(-1.0, 1.0)).collect();
                let r = env.step_raw(&a).unwrap();
                assert!(r.reward.is_finite());
                steps += 1;
            }
            check_state(&env.arena().world).unwrap_or_else(|e| panic!("{task}: {e}"));
            episode += 1;
        }
    }
}

#[test]
fn contact_events_are_deduplicated_per_pair() {
    let (mut env, _) = Env::reset(EpisodeConfig::new(GenParams::new(TaskId::L5, 8, 4))).unwrap();
    let mut rng = Rng::derive(4, "dedup");
    for _ in 0..400 {
        if env.is_done() {
            break;
        }
        let a: Vec<f64> = (0..16).map(|_| rng.uniform(-1.0, 1.0)).collect();
        env.step_raw(&a).unwrap();
        let events = query_contacts(&env.arena().world);
        let mut seen = HashSet::new();
        for e in &events {
            let key = (e.a, format!("{:?}", e.b));
            assert!(seen.insert(key), "duplicate contact {e:?}");
        }
    }
}

#[test]
fn leg_touching_food_gives_one_limb_food_event() {
    let level = oracles::bare_level(vec![(FoodKind::Green, 0.5, 10.0, 10.0)]);
    let mut arena = instantiate(&level.arena, &AgentSpec::default()).unwrap();
    let leg = *arena.agent.limbs.last().unwrap();
    let part = &arena.world.parts[leg];
    let Shape::Capsule { half_length, radius } = part.shape else {
        panic!("legs are capsules");
    };
    let a = part.position + part.orientation * Vec3::new(0.0, -half_length, 0.0);
    let b = part.position + part.orientation * Vec3::new(0.0, half_length, 0.0);
    let mid = (a + b) / 2.0;
    // Push the food sideways from the leg midpoint until the analytic
    // capsule-sphere gap is -1 cm.
    let axis = (b - a).normalize();
    let head = arena.world.parts[arena.agent.head].position;
    let mut out = mid - head;
    out.y = 0.0;
    let side = (out - axis * out.dot(&axis)).normalize();
    let food_r = 0.25;
    let center = mid + side * (radius + food_r - 0.01);
    let gap = oracles::point_segment_distance(&center, &a, &b) - radius - food_r;
    assert!((gap + 0.01).abs() < 1e-9, "{gap}");
    let food = arena.food_parts[0];
    arena.world.parts[food].position = center;
    let physics = PhysicsConfig::default();
    limbarena_core::physics::step_physics(&mut arena.world, &physics).unwrap();
    let hits: Vec<_> = query_contacts(&arena.world)
        .into_iter()
        .filter(|e| e.b == ContactTarget::Part(food))
        .collect();
    assert!(!hits.is_empty());
    assert!(hits.iter().all(|e| e.tag_b == Tag::FoodGreen));
    assert_eq!(hits.iter().filter(|e| e.a == leg).count(), 1);
    assert_eq!(hits.iter().find(|e| e.a == leg).unwrap().tag_a, Tag::AgentLimb);
}

#[test]
fn spawn_on_rough_terrain_rests_on_the_surface() {
    for seed in 0..20 {
        let level = generate(&GenParams::new(TaskId::L11, 10, seed)).unwrap();
        let arena = instantiate(&level.arena, &AgentSpec::default()).unwrap();
        let world = &arena.world;
        let mut lowest_gap = f64::INFINITY;
        for p in arena.agent.parts() {
            let part = &world.parts[p];
            let bottom = match part.shape {
                Shape::Sphere { radius } => part.position.y - radius,
                Shape::Capsule { half_length, radius } => {
                    let a = part.position + part.orientation * Vec3::new(0.0, -half_length, 0.0);
                    let b = part.position + part.orientation * Vec3::new(0.0, half_length, 0.0);
                    let ga = a.y - radius - world.terrain.height(a.x, a.z);
                    let gb = b.y - radius - world.terrain.height(b.x, b.z);
                    lowest_gap = lowest_gap.min(ga.min(gb));
                    continue;
                }
                Shape::Box { .. } => unreachable!(),
            };
            lowest_gap = lowest_gap.min(bottom - world.terrain.height(part.position.x, part.position.z));
        }
        assert!(lowest_gap >= -1e-3, "seed {seed}: part {lowest_gap} below terrain");
        assert!(lowest_gap <= 0.02, "seed {seed}: agent floats {lowest_gap} above terrain");
    }
}

#[test]
fn assembly_is_deterministic() {
    let build = || {
        let mut w = World::new(Terrain::default());
        let agent = assemble_agent(
            &mut w,
            &AgentSpec::default(),
            SpawnPose {
                x: 1.5,
                z: -2.0,
                heading_deg: 33.0,
            },
        )
        .unwrap();
        (serde_json::to_string(&w).unwrap(), agent.parts().collect::<Vec<_>>())
    };
    assert_eq!(build(), build());
}
