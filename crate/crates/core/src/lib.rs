//! Offline real-time bidding experimentation toolkit.
//!
//! The pipeline runs left to right through the modules: [`logdata`] parses
//! and joins logs, [`stats`] summarises campaigns, [`features`] and
//! [`models`] estimate click-through rates, [`bidding`] turns predictions
//! into bids, and [`replay`] evaluates bidding strategies against logged
//! market prices under a budget. [`synthgen`] produces synthetic logs with a
//! known click model for end-to-end checks.

pub mod bidding;
pub mod exec;
pub mod features;
pub mod logdata;
pub mod models;
pub mod replay;
pub mod stats;
pub mod synthgen;

pub use exec::Exec;
