//! Shared fixtures for the benchmarks.

use limbarena_core::env::{Env, EpisodeConfig};
use limbarena_core::levelgen::{GenParams, TaskId};

/// A reset episode on `task` at difficulty 3 with default sensors.
pub fn episode(task: TaskId, seed: u64) -> Env {
    let cfg = EpisodeConfig::new(GenParams::new(task, 3, seed));
    Env::reset(cfg).expect("bench level generates").0
}

/// A gait-like action pattern for step `k`.
pub fn gait(k: u64) -> Vec<f64> {
    (0..16)
        .map(|i| (0.05 * k as f64 + i as f64 * 0.7).sin() * 0.6)
        .collect()
}
