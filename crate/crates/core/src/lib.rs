//! Nonlinear complexity and cross-lead features for multi-lead ECG records.
//!
//! The pipeline reads PTB-XL style datasets ([`ingest`]), removes baseline
//! drift and standardizes each lead ([`preprocess`]), computes single-lead
//! complexity ([`complexity`], [`recurrence`]) and cross-lead dependence
//! ([`crosschannel`]) measures, assembles them with baseline features into a
//! [`features::FeatureTable`], compares diagnostic classes with rank tests
//! ([`stats`]), and measures how much each feature group helps a logistic
//! regression classifier ([`model`]).

pub mod ingest;
pub mod preprocess;
pub mod complexity;
pub mod config;
pub mod crosschannel;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod ranks;
pub mod stats;
pub mod synth;
pub mod recurrence;
