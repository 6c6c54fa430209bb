//! Proptest strategies for wire messages, plus a malformed-line generator.

use limbarena_core::agent::ActionMode;
use limbarena_core::levelgen::TaskId;
use limbarena_core::rng::Rng;
use limbarena_core::sensors::{CameraConfig, RaycastConfig};
use limbarena_core::service::{PolicyKind, Request, Response, SeedTriple, WireError, WIRE_SCHEMA_VERSION};
use proptest::prelude::*;
use serde_json::json;

pub fn task() -> impl Strategy<Value = TaskId> {
    proptest::sample::select(TaskId::ALL.to_vec())
}

pub fn finite() -> impl Strategy<Value = f64> {
    proptest::num::f64::NORMAL | proptest::num::f64::ZERO | proptest::num::f64::SUBNORMAL
}

fn raycast() -> impl Strategy<Value = RaycastConfig> {
    (5.0..=180.0f64, 1usize..=20, 1.0..100.0f64).prop_map(|(viewing_angle, rays_per_side, max_range)| RaycastConfig {
        viewing_angle,
        rays_per_side,
        max_range,
    })
}

fn camera() -> impl Strategy<Value = CameraConfig> {
    (8usize..=512, any::<bool>(), 10.0..120.0f64).prop_map(|(resolution, grayscale, vertical_fov)| CameraConfig {
        resolution,
        grayscale,
        vertical_fov,
    })
}

fn mode() -> impl Strategy<Value = ActionMode> {
    prop_oneof![Just(ActionMode::JointRotation), Just(ActionMode::JointVelocity)]
}

fn policy() -> impl Strategy<Value = PolicyKind> {
    prop_oneof![Just(PolicyKind::Zero), Just(PolicyKind::Random), Just(PolicyKind::Teleport)]
}

pub fn request() -> impl Strategy<Value = Request> {
    let reset = (
        task(),
        0u8..=10,
        any::<u64>(),
        proptest::option::of(1u64..100_000),
        proptest::option::of(mode()),
        proptest::option::of(1.0..1000.0f64),
        proptest::option::of(raycast()),
        proptest::option::of(camera()),
        proptest::option::of(any::<bool>()),
    )
        .prop_map(
            |(task, difficulty, seed, maxsteps, action_mode, omega_max, raycast, camera, observe_joint_velocities)| {
                Request::Reset {
                    task,
                    difficulty,
                    seed,
                    maxsteps,
                    action_mode,
                    omega_max,
                    raycast,
                    camera,
                    observe_joint_velocities,
                }
            },
        );
    let step = proptest::option::of(proptest::collection::vec(finite(), 0..20)).prop_map(|action| Request::Step { action });
    let record = (task(), 0u8..=10, finite()).prop_map(|(task, difficulty, reward)| Request::RecordResult {
        task,
        difficulty,
        reward,
    });
    let triple = (task(), 0u8..=10, any::<u64>()).prop_map(|(task, difficulty, seed)| SeedTriple { task, difficulty, seed });
    let eval = (proptest::collection::vec(triple, 0..5), policy()).prop_map(|(seeds, policy)| Request::Eval { seeds, policy });
    prop_oneof![
        reset,
        step,
        record,
        eval,
        Just(Request::CurriculumNext {}),
        Just(Request::Close {}),
    ]
}

pub fn response() -> impl Strategy<Value = Response> {
    let ok = (finite(), any::<u64>(), proptest::collection::vec(finite(), 0..8), any::<bool>()).prop_map(|(r, s, xs, done)| {
        Response::ok(json!({ "reward": r, "step": s, "joints": xs, "done": done }))
    });
    let err = ("[a-z-]{1,16}", "[ -~]{0,40}").prop_map(|(code, message)| Response {
        schema_version: WIRE_SCHEMA_VERSION,
        ok: false,
        payload: None,
        error: Some(WireError { code, message }),
    });
    prop_oneof![ok, err]
}

const VALID: [&str; 3] = [
    r#"{"cmd":"reset","task":"L0","difficulty":0,"seed":1}"#,
    r#"{"cmd":"step","action":[0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]}"#,
    r#"{"cmd":"record_result","task":"L0","difficulty":0,"reward":1}"#,
];

/// One line the server must reject without touching its state.
pub fn malformed(rng: &mut Rng, fixed: &mut [String]) -> String {
    match rng.below(5) {
        0 => fixed[rng.below(fixed.len() as u64) as usize].clone(),
        1 => {
            let len = rng.below(60) as usize;
            (0..len).map(|_| (b' ' + rng.below(95) as u8) as char).collect()
        }
        2 => {
            let v = VALID[rng.below(VALID.len() as u64) as usize];
            v[..rng.below(v.len() as u64) as usize].to_string()
        }
        3 => {
            let n = rng.below(40) as usize;
            let n = if n == 16 { 17 } else { n };
            let xs: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
            serde_json::to_string(&json!({ "cmd": "step", "action": xs })).unwrap()
        }
        _ => {
            let junk = [json!(null), json!("x"), json!(-3), json!([1, 2]), json!({"a": 1})];
            let (text, fields) = if rng.chance(0.5) {
                (VALID[0], ["task", "difficulty", "seed", "cmd"])
            } else {
                (VALID[2], ["task", "difficulty", "reward", "cmd"])
            };
            let field = fields[rng.below(4) as usize];
            let mut base: serde_json::Value = serde_json::from_str(text).unwrap();
            base[field] = junk[rng.below(junk.len() as u64) as usize].clone();
            serde_json::to_string(&base).unwrap()
        }
    }
}
