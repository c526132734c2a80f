//! Core library for the routeback benchmark: generating pedestrian routes on
//! road graphs, rendering them as turn-by-turn walking instructions,
//! rebuilding geometry from instruction text, and scoring how well a
//! model-produced reversal matches the ground-truth route.
//!
//! The crate is organised as a pipeline:
//!
//! * [`geo`] — spherical geometry primitives (distances, bearings, polylines).
//! * [`graph`] — road graphs: loaders, a synthetic grid generator, nearest-node
//!   lookup, and deterministic shortest paths.
//! * [`instr`] — the navigation mini-language: turn classification, rendering
//!   routes as instructions, text normalization, and parsing text back into
//!   commands.
//! * [`pathbuilder`] — turning parsed commands into map-matched geometry by
//!   dead reckoning plus graph snapping.
//! * [`metrics`] — geometric route-similarity metrics and the 0–100 composite
//!   similarity score.
//! * [`dataset`] — seeded route-dataset generation with difficulty tiers.
//! * [`eval`] — prompt construction, response collection, per-trial scoring,
//!   behavioral detectors, and report aggregation.
//! * [`config`] — the TOML run configuration shared by the CLI stages.
//! * [`selftest`] — self-contained oracle suites runnable at runtime.

pub mod config;
pub mod dataset;
pub mod eval;
pub mod geo;
pub mod graph;
pub mod instr;
pub mod metrics;
pub mod pathbuilder;
pub mod selftest;
