//! Multi-layer air traffic network delay model.
//!
//! The pipeline mines operational routes from surveillance tracks, scores
//! airspace grids into en-route congestion points, models every airport and
//! congestion point as a time-dependent M(t)/E_k/1 queue, and propagates
//! delays along aircraft itineraries over one operating day.
//!
//! ```text
//! tracks ─ ingest ─ route_mining ─ congestion ─┐
//! schedule ────────────────────────────────────┴─ network ─ simulation ─ scenario
//! ```

#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod congestion;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod network;
pub mod queue;
pub mod route_mining;
pub mod scenario;
pub mod simulation;
pub mod synth;

pub use error::{Error, Result};
