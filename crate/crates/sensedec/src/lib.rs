//! Desk-scale simulator of a learned multi-view transmission link feeding an
//! exemplar-based decision model.
//!
//! The pipeline: labelled observations are split into per-agent views, sent
//! through trained encoders over an additive-white-Gaussian-noise channel,
//! and decoded into a class posterior. Either that posterior or a slice of
//! the decoder's penultimate features is then presented to an attention-
//! weighted exemplar model whose sampled decisions emulate probability-
//! matching behaviour. A harness sweeps channel quality, knowledge-base
//! size, attention capacity, and alternating training schedules, and writes
//! the resulting accuracy curves as CSV.

pub mod channel;
pub mod error;
pub mod gcm;
pub mod harness;
pub mod infotheory;
pub mod nn;
pub mod persist;
pub mod presentation;
pub mod sinfony;
pub mod source;
pub mod stream;

pub use error::{Error, Result};
