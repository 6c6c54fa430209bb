//! Ray fan, pinhole camera and blackout masking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, EyePose};
use crate::physics::{up, RayHit, Vec3, World};
use crate::rng::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("invalid sensor config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaycastConfig {
    /// Half-span on each side of forward, in degrees.
    pub viewing_angle: f64,
    pub rays_per_side: usize,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
}

fn default_max_range() -> f64 {
    40.0
}

impl Default for RaycastConfig {
    fn default() -> Self {
        Self {
            viewing_angle: 90.0,
            rays_per_side: 5,
            max_range: default_max_range(),
        }
    }
}

impl RaycastConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(5.0..=180.0).contains(&self.viewing_angle) {
            return Err(SensorError::InvalidConfig(format!(
                "viewing_angle {} outside [5, 180]",
                self.viewing_angle
            )));
        }
        if !(1..=20).contains(&self.rays_per_side) {
            return Err(SensorError::InvalidConfig(format!(
                "rays_per_side {} outside [1, 20]",
                self.rays_per_side
            )));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return Err(SensorError::InvalidConfig("max_range must be positive".into()));
        }
        Ok(())
    }

    pub fn ray_count(&self) -> usize {
        2 * self.rays_per_side + 1
    }

    /// Ray azimuths in output order: forward, left 1..n, right 1..n.
    /// Positive azimuths turn toward the agent's left.
    pub fn azimuths_deg(&self) -> Vec<f64> {
        let n = self.rays_per_side;
        let step = self.viewing_angle / n as f64;
        let mut out = Vec::with_capacity(self.ray_count());
        out.push(0.0);
        out.extend((1..=n).map(|k| k as f64 * step));
        out.extend((1..=n).map(|k| -(k as f64) * step));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub resolution: usize,
    pub grayscale: bool,
    #[serde(default = "default_fov")]
    pub vertical_fov: f64,
}

fn default_fov() -> f64 {
    60.0
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            resolution: 84,
            grayscale: false,
            vertical_fov: default_fov(),
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(8..=512).contains(&self.resolution) {
            return Err(SensorError::InvalidConfig(format!(
                "camera resolution {} outside [8, 512]",
                self.resolution
            )));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < 180.0) {
            return Err(SensorError::InvalidConfig("vertical_fov must lie in (0, 180)".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        if self.grayscale {
            1
        } else {
            3
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayHitRecord {
    pub distances: Vec<f64>,
    /// Flattened RGB triples, one per ray.
    pub colors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image {
    #[serde(rename = "res")]
    pub resolution: usize,
    pub channels: usize,
    /// Row-major, row 0 at the top, channels interleaved.
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.resolution + col) * self.channels;
        &self.pixels[i..i + self.channels]
    }

    pub fn is_black(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0.0)
    }
}

pub const SKY_COLOR: [f64; 3] = [0.53, 0.70, 0.92];
/// Fraction of a transparent surface's own color in the blend.
pub const TRANSPARENT_OPACITY: f64 = 0.4;
const MAX_TRANSPARENT_LAYERS: usize = 4;
const CAMERA_RANGE: f64 = 1.0e3;

pub fn luminance(c: &[f64; 3]) -> f64 {
    (0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]).clamp(0.0, 1.0)
}

/// Horizontal direction at `azimuth_deg` left of the eye's forward vector.
pub fn fan_direction(eye: &EyePose, azimuth_deg: f64) -> Vec3 {
    let (s, c) = azimuth_deg.to_radians().sin_cos();
    (eye.forward * c + eye.left() * s).normalize()
}

pub fn sense_rays(world: &World, agent: &Agent, eye: &EyePose, config: &RaycastConfig) -> RayHitRecord {
    let azimuths = config.azimuths_deg();
    let mut distances = Vec::with_capacity(azimuths.len());
    let mut colors = Vec::with_capacity(3 * azimuths.len());
    for az in azimuths {
        let dir = fan_direction(eye, az);
        match cast_excluding_agent(world, agent, &eye.position, &dir, config.max_range) {
            Some(hit) => {
                distances.push((hit.distance / config.max_range).clamp(0.0, 1.0));
                colors.extend(hit.color);
            }
            None => {
                distances.push(1.0);
                colors.extend([0.0; 3]);
            }
        }
    }
    RayHitRecord { distances, colors }
}

fn cast_excluding_agent(world: &World, agent: &Agent, origin: &Vec3, dir: &Vec3, range: f64) -> Option<RayHit> {
    let body = Some(agent.body);
    world.raycast_filtered(origin, dir, range, |p| p.body != body)
}

/// Unit view ray through the center of pixel (`row`, `col`).
pub fn pixel_direction(eye: &EyePose, config: &CameraConfig, row: usize, col: usize) -> Vec3 {
    let r = config.resolution as f64;
    let half = (config.vertical_fov.to_radians() / 2.0).tan();
    let sx = (2.0 * (col as f64 + 0.5) / r - 1.0) * half;
    let sy = (1.0 - 2.0 * (row as f64 + 0.5) / r) * half;
    let right = -eye.left();
    (eye.forward + right * sx + up() * sy).normalize()
}

fn shade(world: &World, agent: &Agent, origin: Vec3, dir: &Vec3, layer: usize) -> [f64; 3] {
    let hit = cast_excluding_agent(world, agent, &origin, dir, CAMERA_RANGE);
    match hit {
        None => {
            if dir.y > 0.0 {
                SKY_COLOR
            } else {
                world.terrain.color
            }
        }
        Some(h) if h.transparent && layer < MAX_TRANSPARENT_LAYERS => {
            // Continue just past the far side of the pane.
            let behind = skip_transparent(world, agent, origin, dir, &h, layer);
            let mut out = [0.0; 3];
            for k in 0..3 {
                out[k] = TRANSPARENT_OPACITY * h.color[k] + (1.0 - TRANSPARENT_OPACITY) * behind[k];
            }
            out
        }
        Some(h) => h.color,
    }
}

fn skip_transparent(world: &World, agent: &Agent, origin: Vec3, dir: &Vec3, hit: &RayHit, layer: usize) -> [f64; 3] {
    let entry = origin + dir * (hit.distance + 1e-6);
    let crate::physics::ContactTarget::Part(pid) = hit.target else {
        return shade(world, agent, entry, dir, layer + 1);
    };
    let part = &world.parts[pid];
    // Exit point of the pane along the ray.
    let exit = crate::physics::ray_shape(&part.shape, &part.pose(), &entry, dir).unwrap_or(0.0);
    shade(world, agent, entry + dir * (exit + 1e-6), dir, layer + 1)
}

pub fn render_camera(world: &World, agent: &Agent, eye: &EyePose, config: &CameraConfig) -> Image {
    let r = config.resolution;
    let ch = config.channels();
    let mut pixels = Vec::with_capacity(r * r * ch);
    for row in 0..r {
        for col in 0..r {
            let dir = pixel_direction(eye, config, row, col);
            let c = shade(world, agent, eye.position, &dir, 0);
            if config.grayscale {
                pixels.push(luminance(&c));
            } else {
                pixels.extend(c.map(|v| v.clamp(0.0, 1.0)));
            }
        }
    }
    Image {
        resolution: r,
        channels: ch,
        pixels,
    }
}

/// Periodic camera blackout: dark while `(step + phase) mod period < duration`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlackoutSchedule {
    pub period: u64,
    pub duration: u64,
    pub phase: u64,
}

impl BlackoutSchedule {
    pub fn period_for(difficulty: u8) -> u64 {
        (200i64 - 15 * difficulty as i64).max(50) as u64
    }

    pub fn duration_for(difficulty: u8) -> u64 {
        10 + 4 * difficulty as u64
    }

    pub fn for_difficulty(difficulty: u8, rng: &mut Rng) -> Self {
        let period = Self::period_for(difficulty);
        Self {
            period,
            duration: Self::duration_for(difficulty),
            phase: rng.below(period),
        }
    }

    pub fn is_dark(&self, step: u64) -> bool {
        (step + self.phase) % self.period < self.duration
    }

    /// Fraction of the first `steps` steps that are dark.
    pub fn duty_cycle(&self, steps: u64) -> f64 {
        (0..steps).filter(|&s| self.is_dark(s)).count() as f64 / steps as f64
    }
}

pub fn apply_blackout(image: &mut Image, schedule: &BlackoutSchedule, step: u64) {
    if schedule.is_dark(step) {
        image.pixels.iter_mut().for_each(|p| *p = 0.0);
    }
}
