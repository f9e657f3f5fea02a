//! Extremity Game simulator.
//!
//! Agents play a referential game in which every object is the smallest or
//! largest along some gradable dimension. A neural sender emits a two-part
//! message (a dimension signal and a polarity signal); a neural receiver,
//! optionally restricted by hard attention to a single dimension, picks the
//! target. Both are trained with REINFORCE, and the learned protocols are
//! analysed for a content-word / function-word split.

pub mod env;
pub mod kernel;
pub mod agents;
pub mod trainer;
pub mod analysis;
pub mod cli;
