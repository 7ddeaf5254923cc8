//! Speech-based detection of the ten MADRS depressive symptoms plus overall severity
//! regression from frozen speech embeddings or conventional features.
//!
//! The pipeline: recordings and ratings come from a manifest ([`dataset`]), feature
//! streams are loaded or extracted and cut into 10-second segments ([`features`]),
//! segment-level models are trained with a small backprop/Adam engine ([`nn`],
//! [`models`]), and evaluation aggregates segment outputs per recording, scores
//! absent/present/macro F and severity RMSE across speaker-independent folds, and
//! compares systems with a paired bootstrap ([`eval`]). [`synth`] generates datasets
//! with planted symptom signal for testing without clinical data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod nn;
pub mod seed;
pub mod synth;

pub use dataset::{BinaryLabels, FoldPlan, Recording, SplitView, Symptom, NUM_SYMPTOMS};
pub use error::{Error, Result};
pub use features::FeatureSequence;
