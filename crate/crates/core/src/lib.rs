//! Intent-driven itinerary perturbation and modification benchmarking.
//!
//! The crate covers the whole data path: [`ingest`] turns visit logs into
//! itineraries and a [`ingest::CorpusProfile`], [`metrics`] and
//! [`disruption`] decide whether a perturbation changed an itinerary's
//! popularity, distance or diversity profile, [`oracle`] and [`pipeline`]
//! generate verified perturbations, and [`bench`] scores modification
//! attempts.

pub mod bench;
pub mod disruption;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod record;

pub use error::{Error, Result};
