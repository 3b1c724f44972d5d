//! Synthetic-graph experiments: block-model generator, metrics and the
//! noisy-label evaluation loop.

pub mod experiment;
pub mod metrics;
pub mod sbm;
