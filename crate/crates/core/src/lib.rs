//! Bottom-up discovery of subsets of mutually similar, correctly classified
//! instances in KNN space, with per-subset decision trees and an evaluation
//! harness that compares the local trees against a single whole-dataset tree.
//!
//! The pipeline is:
//!
//! 1. [`dataset`] loads and encodes tabular data (or generates a synthetic
//!    planted-structure set).
//! 2. [`subsetting::run`] repeatedly fits a KNN model on the active pool,
//!    grows candidate subsets from positive-hit seeds, scores them with a
//!    size penalty and removes the winner from the pool.
//! 3. [`eval`] trains [`cart`] trees per subset and on the whole dataset,
//!    cross-validates them and assembles the report tables.

pub mod cart;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod knn;
pub mod seed;
pub mod subsetting;

pub use error::{Error, Result};
