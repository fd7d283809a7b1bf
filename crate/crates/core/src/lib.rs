//! Simulation and estimation of maxima of moving maxima (M4 / CM3)
//! processes.
//!
//! The estimation pipeline runs
//! [`decluster::estimate_k`] → [`blocks::extract_blocks`] →
//! [`cluster::estimate_l`] → [`fit::shapes_and_frequencies`] →
//! [`fit::frequency_match`] → [`fit::renormalize`], composed by
//! [`fit::fit_pipeline`].

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocks;
pub mod cli;
pub mod cluster;
pub mod decluster;
pub mod error;
pub mod evaluate;
pub mod fit;
pub mod io;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod theory;

pub use error::{Error, Result, Stage};
pub use model::ParameterSet;
pub use simulate::SeriesSample;
