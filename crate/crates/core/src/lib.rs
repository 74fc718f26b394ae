//! Session-based next-item recommendation from micro-behaviors.
//!
//! A session is a sequence of (item, operation) events. Consecutive events on
//! the same item are merged into macro items ([`data`]); the macro sequence
//! becomes a directed multigraph with ordered parallel edges plus a star node
//! ([`graph`]); a gated GNN whose edge messages carry GRU encodings of each
//! item's operation sequence refines the item states; an operation-aware
//! self-attention over all micro-behaviors, with learned embeddings for every
//! ordered operation pair, produces a global preference that is fused with
//! the most recent micro-behavior into the session representation
//! ([`model`]). Items are scored by scaled cosine similarity.
//!
//! [`train`] fits the model with Adam, [`metrics`] computes H@K and M@K, and
//! [`baselines`] provides S-POP and SKNN reference scorers.

pub mod autodiff;
pub mod baselines;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod synthetic;
pub mod train;
