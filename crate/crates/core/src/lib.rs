//! Two-phase spectral clustering for mixtures of product-Bernoulli
//! distributions and the bipartite stochastic block model.
//!
//! The pipeline estimates centers from a rank-`k` SVD followed by k-means,
//! labels rows by their nearest estimated center, and runs both phases on
//! the two halves of a random split so that centers and assigned rows are
//! independent. Around it sit samplers for the data models, the quantities
//! that govern exact recovery, and a seeded Monte-Carlo sweep harness.
//!
//! ```
//! use specluster::models::{self, BsbmParams};
//! use specluster::{analysis, pipeline, Labeling};
//!
//! let params = BsbmParams::balanced(200, 200, 2, 0.45, 0.05).unwrap();
//! let data = models::sample_bsbm(&params, 7).unwrap();
//! let labels = pipeline::cluster(data.matrix(), 2, 7).unwrap();
//! let truth = Labeling::new(data.truth().unwrap().to_vec());
//! assert!(analysis::score(&labels, &truth, 2).unwrap().exact);
//! ```

pub mod analysis;
pub mod error;
pub mod harness;
pub mod io;
pub mod kmeans;
pub mod linalg;
pub mod models;
pub mod pipeline;
pub mod rng;

pub use analysis::{ConditionReport, RecoveryScore};
pub use error::{Error, Result};
pub use kmeans::KMeansResult;
pub use linalg::{DenseMatrix, RankKApprox};
pub use models::{BinaryDataset, BsbmParams, MixtureModel};
pub use pipeline::{CenterSet, Labeling};
