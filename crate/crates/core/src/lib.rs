//! Penalized multi-armed bandits: instances, reward sampling, index policies,
//! the prophet oracle, a Monte Carlo engine, rating-data ingestion and an
//! experiment harness.

pub mod distributions;
pub mod engine;
pub mod harness;
pub mod ingest;
pub mod model;
pub mod oracle;
pub mod policies;
