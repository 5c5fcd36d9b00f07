//! Synthetic VR maze-navigation telemetry, trajectory features, a
//! from-scratch LSTM, and behavioral privacy-risk measurement.

pub mod config;
pub mod experiment;
pub mod features;
pub mod geometry;
pub mod io;
pub mod lstm;
pub mod maze;
pub mod par;
pub mod pipeline;
pub mod privacy;
pub mod seed;
pub mod simulator;
pub mod telemetry;
