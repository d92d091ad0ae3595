//! Iterative manifold embedding of descriptor vectors, distilled into a
//! single linear layer for constant-cost query embedding.
//!
//! The offline stage builds a k-NN graph (optionally second-order), computes
//! geodesic distances, corrects them with the Euclidean similarity and embeds
//! the result spectrally, feeding each iteration's output into the next. A
//! ridge regression then fits one linear map from descriptors to the final
//! embedding.
//!
//! ```
//! use ime_core::{apply_layer, fit_layer, generate_swiss_roll, ime_fit, ImeConfig};
//!
//! let roll = generate_swiss_roll(200, 0.0, 7).unwrap();
//! let embedding = ime_fit(&roll.set, &ImeConfig::default()).unwrap();
//! let layer = fit_layer(&roll.set, &embedding, 1.0).unwrap();
//! let coords = apply_layer(&layer, &roll.set).unwrap();
//! assert_eq!(coords.cols(), 2);
//! ```

pub mod baselines;
pub mod config;
pub mod dataset;
pub mod embedding;
mod error;
pub mod eval;
pub mod graph;
pub mod layer;
mod matrix;

pub use baselines::{pca_apply, pca_fit, PcaModel};
pub use config::PipelineConfig;
pub use dataset::{
    generate_holed_manifold, generate_swiss_roll, l2_normalize, load_descriptors, load_ground_truth, save_descriptors,
    DescriptorSet, GroundTruth, SyntheticManifold,
};
pub use embedding::{ime_fit, ime_fit_traced, spectral_embed, ConversionKind, Embedding, ImeConfig};
pub use error::{ImeError, Location, Result};
pub use eval::{average_precision, evaluate_retrieval, mean_average_precision, rank_by_distance, RankedList};
pub use graph::{geodesic_distances, geodesic_distances_sparse, DistanceMatrix, WeightedGraph};
pub use layer::{apply_layer, embed_query_via_graph, fit_layer, load_layer, save_layer, GraphQueryContext, ImeLayer};
pub use matrix::Matrix;
