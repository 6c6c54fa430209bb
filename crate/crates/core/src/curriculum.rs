//! Variance-driven curriculum over (task, difficulty) cells.
//!
//! Each cell keeps a ring of its last [`WINDOW`] episode rewards. The priority
//! of a cell is `z = sigma / (|mu| + 1e-7)` (population statistics over the
//! ring), or `z_init` while it has fewer than two samples. Cells are drawn with
//! probability `(z_i + c) / sum_j (z_j + c)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levelgen::TaskId;
use crate::rng::Rng;

pub const WINDOW: usize = 10;
pub const Z_EPSILON: f64 = 1e-7;
pub const DEFAULT_C: f64 = 0.05;
pub const DEFAULT_Z_INIT: f64 = 1.0;
pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub task: TaskId,
    pub difficulty: u8,
}

impl Cell {
    pub fn new(task: TaskId, difficulty: u8) -> Self {
        Self { task, difficulty }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurriculumError {
    #[error("unknown cell {0:?}")]
    UnknownCell(Cell),
    #[error("invalid curriculum config: {0}")]
    InvalidConfig(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub window: VecDeque<f64>,
    pub mean: f64,
    pub std: f64,
    pub count: u64,
}

impl CellStats {
    pub fn record(&mut self, reward: f64) {
        if self.window.len() == WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(reward);
        self.count += 1;
        let n = self.window.len() as f64;
        self.mean = self.window.iter().sum::<f64>() / n;
        let var = self.window.iter().map(|r| (r - self.mean).powi(2)).sum::<f64>() / n;
        self.std = var.max(0.0).sqrt();
    }

    pub fn samples(&self) -> usize {
        self.window.len()
    }
}

pub fn z_value(stats: &CellStats, z_init: f64) -> f64 {
    if stats.samples() < 2 {
        z_init
    } else {
        stats.std / (stats.mean.abs() + Z_EPSILON)
    }
}

/// Normalized sampling weights `(z_i + c) / sum (z_j + c)`.
pub fn probabilities(z: &[f64], c: f64) -> Vec<f64> {
    let total: f64 = z.iter().map(|zi| zi + c).sum();
    z.iter().map(|zi| (zi + c) / total).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub cells: Vec<Cell>,
    pub stats: Vec<CellStats>,
    pub c: f64,
    pub z_init: f64,
    pub rng: Rng,
}

impl CurriculumState {
    pub fn new(cells: Vec<Cell>, c: f64, z_init: f64, seed: u64) -> Result<Self, CurriculumError> {
        if cells.is_empty() {
            return Err(CurriculumError::InvalidConfig("no enabled cells".into()));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(CurriculumError::InvalidConfig("c must be positive".into()));
        }
        if !(z_init.is_finite() && z_init >= 0.0) {
            return Err(CurriculumError::InvalidConfig("z_init must be non-negative".into()));
        }
        let mut cells = cells;
        cells.sort();
        cells.dedup();
        let stats = vec![CellStats::default(); cells.len()];
        Ok(Self {
            cells,
            stats,
            c,
            z_init,
            rng: Rng::derive(seed, "curriculum"),
        })
    }

    /// Every difficulty in `lo..=hi` for each task.
    pub fn grid(tasks: &[TaskId], lo: u8, hi: u8) -> Vec<Cell> {
        tasks
            .iter()
            .flat_map(|&t| (lo..=hi).map(move |d| Cell::new(t, d)))
            .collect()
    }

    fn index(&self, cell: Cell) -> Result<usize, CurriculumError> {
        self.cells.binary_search(&cell).map_err(|_| CurriculumError::UnknownCell(cell))
    }

    pub fn stats(&self, cell: Cell) -> Result<&CellStats, CurriculumError> {
        Ok(&self.stats[self.index(cell)?])
    }

    pub fn record(&mut self, cell: Cell, reward: f64) -> Result<&CellStats, CurriculumError> {
        let i = self.index(cell)?;
        self.stats[i].record(reward);
        Ok(&self.stats[i])
    }

    pub fn z_values(&self) -> Vec<f64> {
        self.stats.iter().map(|s| z_value(s, self.z_init)).collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        probabilities(&self.z_values(), self.c)
    }

    /// Draws the next cell; consumes exactly one random value.
    pub fn sample_next(&mut self) -> Cell {
        let p = self.probabilities();
        let u = self.rng.next_f64();
        let mut acc = 0.0;
        for (cell, pi) in self.cells.iter().zip(&p) {
            acc += pi;
            if u < acc {
                return *cell;
            }
        }
        // Rounding left u above the last partial sum.
        *self.cells.last().expect("at least one cell")
    }

    pub fn to_checkpoint(&self) -> String {
        #[derive(Serialize)]
        struct Checkpoint<'a> {
            schema_version: u32,
            state: &'a CurriculumState,
        }
        serde_json::to_string(&Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            state: self,
        })
        .expect("curriculum state serializes")
    }

    pub fn from_checkpoint(s: &str) -> Result<Self, CurriculumError> {
        #[derive(Deserialize)]
        struct Checkpoint {
            schema_version: u32,
            state: CurriculumState,
        }
        let cp: Checkpoint = serde_json::from_str(s).map_err(|e| CurriculumError::Checkpoint(e.to_string()))?;
        if cp.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(CurriculumError::Checkpoint(format!(
                "unsupported schema_version {}",
                cp.schema_version
            )));
        }
        Ok(cp.state)
    }
}

/// One entry of a training trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub episode: u64,
    pub cell: Cell,
    pub reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub probabilities: Vec<f64>,
}

/// Repeats sample, run, record for `budget` episodes. Runner errors are
/// recorded in the trace and the cell's statistics are left untouched.
pub fn train_loop<F, E>(state: &mut CurriculumState, budget: u64, mut runner: F) -> Vec<TraceEntry>
where
    F: FnMut(Cell, u64) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let mut trace = Vec::with_capacity(budget as usize);
    for episode in 0..budget {
        let probabilities = state.probabilities();
        let cell = state.sample_next();
        match runner(cell, episode) {
            Ok(reward) => {
                state.record(cell, reward).expect("sampled cells are enabled");
                trace.push(TraceEntry {
                    episode,
                    cell,
                    reward: Some(reward),
                    error: None,
                    probabilities,
                });
            }
            Err(e) => trace.push(TraceEntry {
                episode,
                cell,
                reward: None,
                error: Some(e.to_string()),
                probabilities,
            }),
        }
    }
    trace
}
