#![allow(dead_code)]
pub mod oracles;
pub mod strategies;
pub mod walker;
