//! Ego-graph information maximization (EGI) for transferable graph neural
//! networks, and the ego-graph Laplacian gap that predicts how well an
//! encoder trained on one graph transfers to another.

pub mod checks;
pub mod ego;
pub mod eval;
pub mod experiments;
pub mod error;
pub mod features;
pub mod generators;
pub mod graph;
pub mod io;
pub mod model;
pub mod spectral;
pub mod tensor;
pub mod wl;

pub use error::{Error, Result};
pub use graph::{FeatureMatrix, Graph};
