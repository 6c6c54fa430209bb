use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use limbarena_bench::{episode, gait};
use limbarena_core::levelgen::{generate, GenParams, TaskId};
use limbarena_core::physics::step_physics;
use limbarena_core::sensors::{render_camera, sense_rays, CameraConfig, RaycastConfig};

fn physics_step(c: &mut Criterion) {
    let mut env = episode(TaskId::L5, 1);
    let physics = env.config().physics.clone();
    c.bench_function("physics_step_l5", |b| {
        b.iter(|| step_physics(&mut env.arena_mut().world, &physics).unwrap())
    });
}

fn env_step(c: &mut Criterion) {
    c.bench_function("env_step_rays_l3", |b| {
        b.iter_batched_ref(
            || episode(TaskId::L3, 2),
            |env| {
                for k in 0..100 {
                    if env.is_done() {
                        break;
                    }
                    env.step_raw(&gait(k)).unwrap();
                }
            },
            BatchSize::SmallInput,
        )
    });
}

fn sensors(c: &mut Criterion) {
    let env = episode(TaskId::L9, 4);
    let arena = env.arena();
    let eye = arena.agent.eye(&arena.world);
    let rays = RaycastConfig::default();
    c.bench_function("raycast_fan", |b| b.iter(|| sense_rays(&arena.world, &arena.agent, &eye, &rays)));
    let cam = CameraConfig::default();
    c.bench_function("camera_84", |b| b.iter(|| render_camera(&arena.world, &arena.agent, &eye, &cam)));
}

fn level_generation(c: &mut Criterion) {
    let mut seed = 0;
    for task in [TaskId::L5, TaskId::L9, TaskId::L11] {
        c.bench_function(&format!("generate_{task}_d10"), |b| {
            b.iter(|| {
                seed += 1;
                generate(&GenParams::new(task, 10, seed)).unwrap()
            })
        });
    }
}

criterion_group!(benches, physics_step, env_step, sensors, level_generation);
criterion_main!(benches);
