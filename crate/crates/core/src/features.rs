//! Node feature builders.
//!
//! Degree one-hot encodings are a function of local structure and so carry
//! over between graphs; constant and random vectors do not.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};

/// Row `v` is the one-hot vector at `min(degree(v), dim - 1)`.
pub fn degree_onehot(g: &Graph, dim: usize) -> Result<FeatureMatrix> {
    check_dim(dim)?;
    let mut values = Array2::zeros((g.node_count(), dim));
    for (v, d) in g.degrees().into_iter().enumerate() {
        values[[v, d.min(dim - 1)]] = 1.0;
    }
    FeatureMatrix::new(values)
}

/// Every row is `(1/dim, ..., 1/dim)`.
pub fn constant_features(g: &Graph, dim: usize) -> Result<FeatureMatrix> {
    check_dim(dim)?;
    FeatureMatrix::new(Array2::from_elem((g.node_count(), dim), 1.0 / dim as f64))
}

/// I.i.d. uniform `[0, 1)` entries.
pub fn random_features(g: &Graph, dim: usize, seed: u64) -> Result<FeatureMatrix> {
    check_dim(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMatrix::new(Array2::from_shape_simple_fn((g.node_count(), dim), || {
        rng.gen::<f64>()
    }))
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidParameter("feature dimension must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dim", rename_all = "snake_case")]
pub enum FeatureKind {
    Degree(usize),
    Constant(usize),
    Random(usize),
}

impl FeatureKind {
    pub fn dim(self) -> usize {
        match self {
            FeatureKind::Degree(d) | FeatureKind::Constant(d) | FeatureKind::Random(d) => d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Degree(_) => "degree",
            FeatureKind::Constant(_) => "constant",
            FeatureKind::Random(_) => "random",
        }
    }

    /// Builds features for `g`; `seed` only matters for random features.
    pub fn build(self, g: &Graph, seed: u64) -> Result<FeatureMatrix> {
        match self {
            FeatureKind::Degree(d) => degree_onehot(g, d),
            FeatureKind::Constant(d) => constant_features(g, d),
            FeatureKind::Random(d) => random_features(g, d, seed),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name(), self.dim())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    /// Parses `degree:3`, `constant:4`, `random:8`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, dim) = s.split_once(':').ok_or_else(|| {
            Error::InvalidParameter(format!("feature spec {s:?} should look like degree:3"))
        })?;
        let dim: usize = dim
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad feature dimension in {s:?}")))?;
        check_dim(dim)?;
        match kind {
            "degree" => Ok(FeatureKind::Degree(dim)),
            "constant" => Ok(FeatureKind::Constant(dim)),
            "random" => Ok(FeatureKind::Random(dim)),
            other => Err(Error::InvalidParameter(format!(
                "unknown feature kind {other:?} (degree, constant, random)"
            ))),
        }
    }
}
