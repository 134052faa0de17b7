//! Bidirectional causal effects between two binary outcomes.
//!
//! Two latent indices `X°` and `Y°` affect each other through `β_xy` and
//! `β_yx`; each has its own instrument (`Z` for `X°`, `W` for `Y°`) and the
//! pair shares unmeasured normal confounders. Observed outcomes are the signs
//! of the indices. Fitting a probit to each outcome on both instruments
//! recovers the effects through closed-form maps of the probit slopes.

pub mod error;
pub mod identification;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod probit;
pub mod sensitivity;

pub use error::{Error, Result};
