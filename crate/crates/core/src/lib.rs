//! Multi-label classification where labels, and labels synthesized from
//! random threshold units, act as hidden nodes of a supervised network.
//!
//! The crate provides:
//!
//! * a deterministic logistic-regression base learner ([`base_learner`]),
//! * problem transformations: binary relevance, greedy classifier chains and
//!   a stacked meta-BR layer ([`transforms`]),
//! * synthetic label generators: cascaded threshold linear units, label-space
//!   indicator meta-labels and a flat random projection ([`synth_nodes`]),
//! * the composite methods CCASL, CCASL+BR, CCASL+AML and ELM+BR ([`methods`]),
//! * datasets, CSV I/O, standardization and synthetic generators ([`data`]),
//! * metrics and the repeated train/test benchmark protocol ([`eval`]),
//! * the `mlchain` command-line front end ([`cli`]).

pub mod base_learner;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod methods;
pub mod seed;
pub mod synth_nodes;
pub mod transforms;

pub use error::{Error, Result};
