//! Simulation of epidemics and vaccination strategies on contact networks
//! observed with capped nomination surveys.

pub mod error;
pub mod experiment;
pub mod fcd;
pub mod graph;
pub mod metrics;
pub mod netgen;
pub mod regress;
pub mod rngcore;
pub mod sir;
pub mod synth;
pub mod vaccinate;

pub use error::{Error, Result};
pub use graph::Graph;
pub use rngcore::{derive_stream, Stream, StreamKey};
