//! Synthetic search-ranking laboratory for position-biased click feedback.
//!
//! The crate generates small synthetic search worlds (clusters of documents
//! with latent relevance and a noisy observable proxy), simulates user clicks
//! under a position-based propensity model, computes per-document historical
//! click-through features (CTR, IPW-CTR, Empirical-CTR, SNIPS, COEC,
//! IPW-COEC, clipped IPW-CTR), ranks with each feature as a sole signal, and
//! measures which feature collects the most clicks on a shared test stream.
//!
//! # Layout
//!
//! - [`position`] — true propensity curves and empirical per-position click rates
//! - [`log`] — logged records, click logs, and per-document aggregation
//! - [`features`] — the click-through feature estimators
//! - [`world`] — synthetic worlds and search streams
//! - [`behavior`] — position-based click simulation over a ranked list
//! - [`harness`] — train/test experiment loop, sweeps, and replication
//! - [`oracle`] — independent Monte Carlo verification of the estimator claims
//! - [`cli`] — the `clicklab` command-line entry points
//!
//! Everything is deterministic given the configured seeds: sub-streams are
//! derived with [`seed::derive_seed`], so parallel schedules produce
//! byte-identical outputs.

pub mod behavior;
pub mod cli;
pub mod features;
pub mod harness;
pub mod log;
pub mod oracle;
pub mod position;
pub mod seed;
pub mod stats;
pub mod world;

pub use behavior::{simulate_clicks, RankedList};
pub use features::{FeatureKind, FeatureValue};
pub use harness::{run_experiment, ExperimentConfig, PerformanceReport};
pub use log::{ClickLog, DocId, DocumentStats, Record, SearchId};
pub use position::{empirical_propensities, PositionBiasCurve, PropensityVector};
pub use world::{generate_search_stream, generate_world, GenConfig, SearchRequest, World};
