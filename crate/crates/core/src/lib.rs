//! Kernel-based marginal and conditional independence tests for relational
//! (neighborhood-aggregated) and propositional variables on graphs.
//!
//! A test takes a [`Graph`], an [`AttributeTable`] and a [`TestSpec`] such
//! as `rel(X) _||_ Y | Z`, and returns a [`TestResult`] with a permutation
//! p-value. Both exact kernel matrices and random Fourier features are
//! supported.

pub mod attrgen;
pub mod attributes;
pub mod conditional;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod marginal;
pub mod nullperm;
pub mod rff;
pub mod rng;
pub mod testspec;

pub use attrgen::{DiffusionConfig, GenConfig, Hypothesis};
pub use attributes::AttributeTable;
pub use error::{NirdError, Result};
pub use graph::{Graph, GraphGenConfig, GraphModel, PathPredicate};
pub use nullperm::{run_test, TestOptions, TestResult};
pub use testspec::{Method, TestSpec, VariableRef};

/// The matrix library used in the public API.
pub use nalgebra;
