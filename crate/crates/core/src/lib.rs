//! Headless, deterministic arena for an eight-joint articulated agent.

pub mod agent;
pub mod arena;
pub mod curriculum;
pub mod env;
pub mod levelgen;
pub mod physics;
pub mod rng;
pub mod sensors;
pub mod service;
