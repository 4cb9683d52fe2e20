//! Benchmark dataset builders.

pub mod acs;
pub mod health;
pub mod synth;

pub use acs::{ingest_acs, AcsFilterSpec, ACS_PROXY};
pub use health::{ingest_health, HealthSpec, HEALTH_PROXY};
pub use synth::{calibrate_bias, synth_generate, SynthSpec, SynthTask};
