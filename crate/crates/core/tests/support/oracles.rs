//! Reference computations written independently of the library code.
//!
//! Ray oracles work in each primitive's local frame with textbook formulas
//! (geometric sphere test, six face planes for boxes, golden-section search
//! plus bisection on the capsule distance function, Moller-Trumbore over every
//! heightfield triangle).

use limbarena_core::arena::{ArenaSpec, FoodKind, FoodSpec};
use limbarena_core::levelgen::{Level, TaskId};
use limbarena_core::physics::{Heightfield, HoleRect, Quat, Vec3};

/// Geometric (tca/thc) ray-sphere test for an origin outside the sphere.
pub fn sphere(center: &Vec3, radius: f64, o: &Vec3, d: &Vec3) -> Option<f64> {
    let l = center - o;
    let tca = l.dot(d);
    let d2 = l.dot(&l) - tca * tca;
    if d2 > radius * radius {
        return None;
    }
    let thc = (radius * radius - d2).sqrt();
    let t0 = tca - thc;
    (t0 > 0.0).then_some(t0)
}

/// Tests the ray against each of the six face rectangles.
pub fn oriented_box(center: &Vec3, rot: &Quat, half: [f64; 3], o: &Vec3, d: &Vec3) -> Option<f64> {
    let inv = rot.inverse();
    let lo = inv * (o - center);
    let ld = inv * d;
    let mut best: Option<f64> = None;
    for axis in 0..3 {
        if ld[axis] == 0.0 {
            continue;
        }
        for sign in [-1.0, 1.0] {
            let t = (sign * half[axis] - lo[axis]) / ld[axis];
            if t <= 0.0 {
                continue;
            }
            let p = lo + ld * t;
            let inside = (0..3)
                .filter(|&k| k != axis)
                .all(|k| p[k].abs() <= half[k] + 1e-12);
            if inside && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    best
}

pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(&ab);
    let s = if len2 == 0.0 { 0.0 } else { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) };
    (p - (a + ab * s)).norm()
}

/// Capsule along local y. `None` also covers near-grazing rays whose answer
/// is numerically ambiguous; callers resample those.
pub enum CapsuleAnswer {
    Hit(f64),
    Miss,
    Grazing,
}

pub fn capsule(center: &Vec3, rot: &Quat, half_length: f64, radius: f64, o: &Vec3, d: &Vec3, range: f64) -> CapsuleAnswer {
    let a = center + rot * Vec3::new(0.0, -half_length, 0.0);
    let b = center + rot * Vec3::new(0.0, half_length, 0.0);
    let f = |t: f64| point_segment_distance(&(o + d * t), &a, &b) - radius;
    // The distance to a convex set is convex along a line.
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, range);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..300 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let tmin = 0.5 * (lo + hi);
    let fmin = f(tmin);
    if fmin.abs() < 1e-6 {
        return CapsuleAnswer::Grazing;
    }
    if fmin > 0.0 {
        return CapsuleAnswer::Miss;
    }
    let (mut lo, mut hi) = (0.0, tmin);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    CapsuleAnswer::Hit(0.5 * (lo + hi))
}

fn moller_trumbore(o: &Vec3, d: &Vec3, v0: &Vec3, v1: &Vec3, v2: &Vec3) -> Option<f64> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - v0;
    let u = s.dot(&p) * inv;
    if !(-1e-12..=1.0 + 1e-12).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < -1e-12 || u + v > 1.0 + 1e-12 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 0.0).then_some(t)
}

/// Brute force over every triangle of the grid, plus the plane y = 0 outside
/// the grid; points in holes are skipped.
pub fn ground(hf: Option<&Heightfield>, holes: &[HoleRect], o: &Vec3, d: &Vec3, range: f64) -> Option<f64> {
    let in_hole = |t: f64| {
        let p = o + d * t;
        holes
            .iter()
            .any(|h| p.x >= h.min[0] && p.x <= h.max[0] && p.z >= h.min[1] && p.z <= h.max[1])
    };
    let mut cands = Vec::new();
    let covered = |x: f64, z: f64| {
        hf.is_some_and(|h| {
            let e = (h.resolution - 1) as f64 * h.cell_size;
            x >= h.origin[0] && x <= h.origin[0] + e && z >= h.origin[1] && z <= h.origin[1] + e
        })
    };
    if d.y != 0.0 {
        let t = -o.y / d.y;
        let p = o + d * t;
        if t > 0.0 && !covered(p.x, p.z) {
            cands.push(t);
        }
    }
    if let Some(h) = hf {
        let vert = |i: usize, j: usize| {
            Vec3::new(
                h.origin[0] + i as f64 * h.cell_size,
                h.heights[j * h.resolution + i],
                h.origin[1] + j as f64 * h.cell_size,
            )
        };
        for j in 0..h.resolution - 1 {
            for i in 0..h.resolution - 1 {
                let (a, b, c, e) = (vert(i, j), vert(i + 1, j), vert(i, j + 1), vert(i + 1, j + 1));
                cands.extend(moller_trumbore(o, d, &a, &e, &b));
                cands.extend(moller_trumbore(o, d, &a, &c, &e));
            }
        }
    }
    cands
        .into_iter()
        .filter(|&t| t > 1e-12 && t <= range && !in_hole(t))
        .min_by(f64::total_cmp)
}

/// Population z-value by direct arithmetic over the last ten rewards. The
/// variance uses the pairwise form `sum_ij (x_i - x_j)^2 / (2 n^2)`.
pub fn z_direct(history: &[f64], z_init: f64) -> f64 {
    let w = &history[history.len().saturating_sub(10)..];
    if w.len() < 2 {
        return z_init;
    }
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let mut acc = 0.0;
    for a in w {
        for b in w {
            acc += (a - b) * (a - b);
        }
    }
    let sigma = (acc / (2.0 * n * n)).sqrt();
    sigma / (mean.abs() + 1e-7)
}

pub fn p_direct(z: &[f64], c: f64) -> Vec<f64> {
    let denom: f64 = z.iter().map(|v| v + c).sum();
    z.iter().map(|v| (v + c) / denom).collect()
}

/// A flat empty level with the given foods, spawn at the origin facing +z.
pub fn bare_level(foods: Vec<(FoodKind, f64, f64, f64)>) -> Level {
    let mut arena = ArenaSpec::default();
    arena.foods = foods
        .into_iter()
        .map(|(k, s, x, z)| FoodSpec::new(k, s, x, z))
        .collect();
    Level {
        task: TaskId::L0,
        difficulty: 0,
        seed: 0,
        base_task: TaskId::L0,
        arena,
        blackout: None,
    }
}
