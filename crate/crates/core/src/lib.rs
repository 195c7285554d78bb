//! Analysis of sidewalk data in OpenStreetMap full-history extracts.
//!
//! The crate ingests OSM history XML into a versioned element store,
//! reconstructs point-in-time snapshots, classifies ways into sidewalk
//! categories, computes coverage statistics and per-feature trustworthiness
//! scores from edit history, and serializes CSV/GeoJSON reports.

pub mod analysis;
pub mod classify;
pub mod config;
pub mod coverage;
pub mod element;
mod error;
pub mod history;
pub mod report;
pub mod snapshot;
pub mod spatial;
pub mod trust;

pub use element::{ElementId, ElementKind, FeatureHistory, TagMap, Timestamp, VersionedElement};
pub use error::{Error, Result};
pub use history::HistoryStore;
pub use snapshot::Snapshot;
