//! Ground surface: either the flat plane `y = 0` or a triangulated
//! heightfield, with rectangular holes cut through it.

use serde::{Deserialize, Serialize};

use super::shape::{up, Vec3};

/// Axis-aligned rectangle on the floor plane (`x`, `z`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleRect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl HoleRect {
    pub fn centered(x: f64, z: f64, half_x: f64, half_z: f64) -> Self {
        Self {
            min: [x - half_x, z - half_z],
            max: [x + half_x, z + half_z],
        }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        x > self.min[0] && x < self.max[0] && z > self.min[1] && z < self.max[1]
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn depth(&self) -> f64 {
        self.max[1] - self.min[1]
    }
}

/// Square grid of vertex heights. Vertex `(i, j)` sits at
/// `(origin[0] + i * cell_size, heights[j * resolution + i], origin[1] + j * cell_size)`.
/// Each cell is split along the diagonal from `(i, j)` to `(i + 1, j + 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heightfield {
    pub resolution: usize,
    pub cell_size: f64,
    pub origin: [f64; 2],
    pub heights: Vec<f64>,
}

/// One surface triangle; [`Triangle::normal`] points upward.
#[derive(Clone, Copy, Debug)]
pub struct Triangle(pub [Vec3; 3]);

impl Triangle {
    pub fn normal(&self) -> Vec3 {
        let [a, b, c] = self.0;
        let n = (b - a).cross(&(c - a));
        n / n.norm()
    }
}

impl Heightfield {
    pub fn flat(resolution: usize, cell_size: f64, origin: [f64; 2]) -> Self {
        Self {
            resolution,
            cell_size,
            origin,
            heights: vec![0.0; resolution * resolution],
        }
    }

    pub fn cells(&self) -> usize {
        self.resolution.saturating_sub(1)
    }

    pub fn extent(&self) -> f64 {
        self.cells() as f64 * self.cell_size
    }

    pub fn height_at_vertex(&self, i: usize, j: usize) -> f64 {
        self.heights[j * self.resolution + i]
    }

    pub fn vertex(&self, i: usize, j: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + i as f64 * self.cell_size,
            self.height_at_vertex(i, j),
            self.origin[1] + j as f64 * self.cell_size,
        )
    }

    pub fn covers(&self, x: f64, z: f64) -> bool {
        let e = self.extent();
        x >= self.origin[0] && x <= self.origin[0] + e && z >= self.origin[1] && z <= self.origin[1] + e
    }

    /// The two triangles of cell `(i, j)`.
    pub fn cell_triangles(&self, i: usize, j: usize) -> [Triangle; 2] {
        let v00 = self.vertex(i, j);
        let v10 = self.vertex(i + 1, j);
        let v01 = self.vertex(i, j + 1);
        let v11 = self.vertex(i + 1, j + 1);
        [Triangle([v00, v11, v10]), Triangle([v00, v01, v11])]
    }

    fn cell_of(&self, x: f64, z: f64) -> (usize, usize, f64, f64) {
        let last = self.cells() - 1;
        let fx = (x - self.origin[0]) / self.cell_size;
        let fz = (z - self.origin[1]) / self.cell_size;
        let i = (fx.floor().max(0.0) as usize).min(last);
        let j = (fz.floor().max(0.0) as usize).min(last);
        (i, j, fx - i as f64, fz - j as f64)
    }

    /// Triangle under `(x, z)`; the point must be covered.
    pub fn triangle_at(&self, x: f64, z: f64) -> Triangle {
        let (i, j, u, v) = self.cell_of(x, z);
        let [lower, upper] = self.cell_triangles(i, j);
        if u >= v {
            lower
        } else {
            upper
        }
    }

    pub fn height(&self, x: f64, z: f64) -> f64 {
        if !self.covers(x, z) {
            return 0.0;
        }
        let tri = self.triangle_at(x, z);
        let n = tri.normal();
        let a = tri.0[0];
        a.y - (n.x * (x - a.x) + n.z * (z - a.z)) / n.y
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.heights
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| (lo.min(h), hi.max(h)))
    }
}

/// Ground plus holes. The flat variant is the plane `y = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Terrain {
    pub heightfield: Option<Heightfield>,
    pub holes: Vec<HoleRect>,
    pub color: [f64; 3],
}

impl Default for Terrain {
    fn default() -> Self {
        Self {
            heightfield: None,
            holes: Vec::new(),
            color: [0.45, 0.42, 0.38],
        }
    }
}

/// Points whose center sinks deeper than this below the surface no longer
/// touch it (they are inside a hole's pit).
const SUPPORT_DEPTH: f64 = 0.5;

impl Terrain {
    pub fn in_hole(&self, x: f64, z: f64) -> bool {
        self.holes.iter().any(|h| h.contains(x, z))
    }

    /// Surface height and unit normal at `(x, z)`, ignoring holes.
    pub fn surface(&self, x: f64, z: f64) -> (f64, Vec3) {
        match &self.heightfield {
            Some(hf) if hf.covers(x, z) => {
                let tri = hf.triangle_at(x, z);
                (hf.height(x, z), tri.normal())
            }
            _ => (0.0, up()),
        }
    }

    pub fn height(&self, x: f64, z: f64) -> f64 {
        self.surface(x, z).0
    }

    /// Contact of a sphere (center, radius) with the ground.
    /// Returns `(separation, normal)`.
    pub fn sphere_contact(&self, center: &Vec3, radius: f64) -> Option<(f64, Vec3)> {
        if self.in_hole(center.x, center.z) {
            return None;
        }
        let (h, n) = self.surface(center.x, center.z);
        // Distance to the supporting triangle's plane.
        let dist = (center.y - h) * n.y;
        if dist < -(radius + SUPPORT_DEPTH) {
            return None;
        }
        Some((dist - radius, n))
    }

    /// Nearest ground hit along a ray, skipping hits inside holes.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        let consider = |t: f64, best: &mut Option<f64>| {
            if t > 1e-12 && t <= max_range && best.map_or(true, |b| t < b) {
                let p = origin + dir * t;
                if !self.in_hole(p.x, p.z) {
                    *best = Some(t);
                }
            }
        };
        match &self.heightfield {
            None => {
                if let Some(t) = plane_hit(origin, dir) {
                    consider(t, &mut best);
                }
            }
            Some(hf) => {
                // Outside the grid the ground is the plane y = 0.
                if let Some(t) = plane_hit(origin, dir) {
                    let p = origin + dir * t;
                    if !hf.covers(p.x, p.z) {
                        consider(t, &mut best);
                    }
                }
                for t in heightfield_hits(hf, origin, dir, max_range) {
                    consider(t, &mut best);
                    if best == Some(t) {
                        break;
                    }
                }
            }
        }
        best
    }
}

fn plane_hit(origin: &Vec3, dir: &Vec3) -> Option<f64> {
    if dir.y == 0.0 {
        return None;
    }
    let t = -origin.y / dir.y;
    (t > 0.0).then_some(t)
}

/// Double-sided ray/triangle test through the triangle's plane.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &Triangle) -> Option<f64> {
    let [a, b, c] = tri.0;
    let n = (b - a).cross(&(c - a));
    let denom = n.dot(dir);
    if denom.abs() < 1e-15 * n.norm() {
        return None;
    }
    let t = n.dot(&(a - origin)) / denom;
    if t <= 0.0 {
        return None;
    }
    let p = origin + dir * t;
    // Inside test via same-sign edge functions.
    let e0 = (b - a).cross(&(p - a)).dot(&n);
    let e1 = (c - b).cross(&(p - b)).dot(&n);
    let e2 = (a - c).cross(&(p - c)).dot(&n);
    (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0).then_some(t)
}

/// Candidate hits in traversal order: cells are visited front to back with a
/// 2D DDA and each cell yields its hits sorted by distance.
fn heightfield_hits(hf: &Heightfield, origin: &Vec3, dir: &Vec3, max_range: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let cells = hf.cells();
    if cells == 0 {
        return out;
    }
    let extent = hf.extent();
    let (x0, z0) = (hf.origin[0], hf.origin[1]);
    // Clip the ray against the grid footprint.
    let mut t_enter = 0.0_f64;
    let mut t_exit = max_range;
    for (o, d, lo) in [(origin.x, dir.x, x0), (origin.z, dir.z, z0)] {
        let hi = lo + extent;
        if d.abs() < 1e-300 {
            if o < lo || o > hi {
                return out;
            }
        } else {
            let (mut ta, mut tb) = ((lo - o) / d, (hi - o) / d);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t_enter = t_enter.max(ta);
            t_exit = t_exit.min(tb);
        }
    }
    if t_enter > t_exit {
        return out;
    }

    let start = origin + dir * t_enter;
    let cs = hf.cell_size;
    let last = (cells - 1) as i64;
    let mut i = (((start.x - x0) / cs).floor() as i64).clamp(0, last);
    let mut j = (((start.z - z0) / cs).floor() as i64).clamp(0, last);
    let step_i: i64 = if dir.x > 0.0 { 1 } else { -1 };
    let step_j: i64 = if dir.z > 0.0 { 1 } else { -1 };
    let next_boundary = |idx: i64, step: i64, lo: f64| lo + (idx + i64::from(step > 0)) as f64 * cs;
    let mut t_max_x = if dir.x.abs() > 1e-300 {
        (next_boundary(i, step_i, x0) - origin.x) / dir.x
    } else {
        f64::INFINITY
    };
    let mut t_max_z = if dir.z.abs() > 1e-300 {
        (next_boundary(j, step_j, z0) - origin.z) / dir.z
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dir.x.abs() > 1e-300 { cs / dir.x.abs() } else { f64::INFINITY };
    let t_delta_z = if dir.z.abs() > 1e-300 { cs / dir.z.abs() } else { f64::INFINITY };

    let mut t_cell_start = t_enter;
    loop {
        let t_cell_end = t_max_x.min(t_max_z).min(t_exit);
        let (ci, cj) = (i as usize, j as usize);
        // Vertical extent check: skip cells the ray passes entirely above or below.
        let ya = origin.y + dir.y * t_cell_start;
        let yb = origin.y + dir.y * t_cell_end;
        let (ray_lo, ray_hi) = (ya.min(yb), ya.max(yb));
        let hs = [
            hf.height_at_vertex(ci, cj),
            hf.height_at_vertex(ci + 1, cj),
            hf.height_at_vertex(ci, cj + 1),
            hf.height_at_vertex(ci + 1, cj + 1),
        ];
        let cell_lo = hs.iter().copied().fold(f64::INFINITY, f64::min);
        let cell_hi = hs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if ray_lo <= cell_hi + 1e-9 && ray_hi >= cell_lo - 1e-9 {
            let mut hits: Vec<f64> = hf
                .cell_triangles(ci, cj)
                .iter()
                .filter_map(|tri| ray_triangle(origin, dir, tri))
                .filter(|&t| t <= max_range)
                .collect();
            hits.sort_by(|a, b| a.total_cmp(b));
            out.extend(hits);
        }
        if t_cell_end >= t_exit {
            break;
        }
        if t_max_x < t_max_z {
            i += step_i;
            t_cell_start = t_max_x;
            t_max_x += t_delta_x;
        } else {
            j += step_j;
            t_cell_start = t_max_z;
            t_max_z += t_delta_z;
        }
        if i < 0 || j < 0 || i > last || j > last {
            break;
        }
    }
    out
}
