//! Oracle walker: a physics-free probe that searches a 0.5 m grid for a route
//! from the spawn to some food, treating walls as inflated obstacles and holes
//! as impassable (except where a tipped plank would bridge them).

use std::collections::VecDeque;

use limbarena_core::arena::{ArenaSpec, BlockKind, BlockSpec, ScriptSpec, Target};

const STEP: f64 = 0.5;
const PROBE: f64 = 0.45;

/// Distance from `(x, z)` to the footprint of a yaw-rotated box.
fn box_distance(b: &BlockSpec, x: f64, z: f64) -> f64 {
    let (s, c) = b.yaw_deg.to_radians().sin_cos();
    let (dx, dz) = (x - b.center[0], z - b.center[2]);
    // Inverse yaw: world (dx, dz) -> local (lx, lz).
    let lx = c * dx - s * dz;
    let lz = s * dx + c * dz;
    let qx = (lx.abs() - b.half_extents[0]).max(0.0);
    let qz = (lz.abs() - b.half_extents[2]).max(0.0);
    (qx * qx + qz * qz).sqrt()
}

/// Footprint rectangle (x range, z range) of a plank after tipping fully,
/// for hinges about the world x axis.
fn fallen_plank(spec: &ArenaSpec) -> Vec<([f64; 2], [f64; 2])> {
    let mut out = Vec::new();
    for s in &spec.scripts {
        if let ScriptSpec::TipOnPush { target: Target::Block(i), pivot, axis, angle_deg, .. } = s {
            let b = &spec.blocks[*i];
            let height = 2.0 * b.half_extents[1];
            let dir = if axis[0] > 0.0 { 1.0 } else { -1.0 };
            if (*angle_deg - 90.0).abs() < 1e-9 && axis[1] == 0.0 && axis[2] == 0.0 {
                let z0 = pivot[2];
                let z1 = pivot[2] + dir * height;
                out.push((
                    [b.center[0] - b.half_extents[0], b.center[0] + b.half_extents[0]],
                    [z0.min(z1), z0.max(z1)],
                ));
            }
        }
    }
    out
}

/// Where each food ends up once its script has run.
fn food_goals(spec: &ArenaSpec) -> Vec<[f64; 3]> {
    let mut goals: Vec<[f64; 3]> = spec.foods.iter().map(|f| f.position).collect();
    for s in &spec.scripts {
        match s {
            ScriptSpec::LinearMove { target: Target::Food(i), waypoints, .. } => {
                goals[*i] = *waypoints.last().expect("waypoints");
            }
            ScriptSpec::DescendPillar { targets, drop, .. } => {
                for t in targets {
                    if let Target::Food(i) = t {
                        goals[*i][1] -= drop;
                    }
                }
            }
            _ => {}
        }
    }
    goals
}

/// Whether some food is reachable from the spawn.
pub fn solvable(spec: &ArenaSpec) -> bool {
    let half = spec.arena_size / 2.0;
    let n = (2.0 * half / STEP).round() as usize + 1;
    let coord = |k: usize| -half + k as f64 * STEP;
    let bridges = fallen_plank(spec);
    let tippable: Vec<usize> = spec
        .scripts
        .iter()
        .filter_map(|s| match s {
            ScriptSpec::TipOnPush { target: Target::Block(i), .. } => Some(*i),
            _ => None,
        })
        .collect();

    let free = |x: f64, z: f64| -> bool {
        if x.abs() > half - PROBE || z.abs() > half - PROBE {
            return false;
        }
        let bridged = bridges
            .iter()
            .any(|(bx, bz)| x >= bx[0] && x <= bx[1] && z >= bz[0] && z <= bz[1]);
        let in_hole = spec.holes.iter().any(|h| {
            x > h.min[0] - 0.2 && x < h.max[0] + 0.2 && z > h.min[1] - 0.2 && z < h.max[1] + 0.2
        });
        if in_hole && !bridged {
            return false;
        }
        spec.blocks.iter().enumerate().all(|(i, b)| {
            // Gates start open; a tipped plank lies flat.
            b.kind == BlockKind::Gate || tippable.contains(&i) || box_distance(b, x, z) > PROBE
        })
    };

    let goals = food_goals(spec);
    let reached = |x: f64, z: f64| {
        goals
            .iter()
            .zip(&spec.foods)
            .any(|(g, f)| ((g[0] - x).powi(2) + (g[2] - z).powi(2)).sqrt() <= f.radius() + PROBE + STEP)
    };

    let to_cell = |v: f64| (((v + half) / STEP).round() as usize).min(n - 1);
    let start = (to_cell(spec.spawn.x), to_cell(spec.spawn.z));
    let mut seen = vec![false; n * n];
    let mut queue = VecDeque::new();
    seen[start.1 * n + start.0] = true;
    queue.push_back(start);
    while let Some((i, j)) = queue.pop_front() {
        let (x, z) = (coord(i), coord(j));
        if reached(x, z) {
            return true;
        }
        for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (ni, nj) = (i as i64 + di, j as i64 + dj);
            if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                continue;
            }
            let (ni, nj) = (ni as usize, nj as usize);
            if !seen[nj * n + ni] && free(coord(ni), coord(nj)) {
                seen[nj * n + ni] = true;
                queue.push_back((ni, nj));
            }
        }
    }
    false
}
