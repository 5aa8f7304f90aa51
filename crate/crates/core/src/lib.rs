//! Place-event episodic memory and a memory-augmented agent in a deterministic gridworld.

pub mod agent;
pub mod bench;
pub mod clustering;
pub mod embedding;
pub mod episode;
pub mod error;
pub mod exploration;
pub mod memory;
pub mod navigation;
pub mod task;
pub mod world;

pub use error::{Error, Result};
