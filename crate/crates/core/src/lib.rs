//! Deterministic three-layer social coordination simulator.
//!
//! A macro director advances world state and fires causal events, a
//! coordination hub compiles those events into tag-routed directives, and
//! NPCs accept or reject directives with a local utility calculus. No
//! generative model is called inside the tick loop; dialogue is a separate,
//! read-only channel.

pub mod cost;
pub mod director;
pub mod engine;
pub mod error;
pub mod hub;
pub mod model;
pub mod npc;
pub mod scenario;
pub mod trace;

pub use error::{CascadeError, Result};
