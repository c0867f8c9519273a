//! Multiscale analysis of electoral polarization.
//!
//! * [`geo_hierarchy`]: units and nested region trees (k-d and random builders).
//! * [`scale_variance`]: additive decomposition of opinion variance across scales.
//! * [`election`]: mean, median and utility-argmax elections, representation and
//!   instability detection.
//! * [`social_ties`]: effective opinions under social ties.
//! * [`axes`]: election axes in a multidimensional opinion space.
//! * [`rep_tensor`]: multidimensional representation tensors.
//! * [`ingest`]: returns files, unit tables and synthetic geographies.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, with `…32` variants for `f32`.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axes;
pub mod election;
pub mod error;
pub mod geo_hierarchy;
pub mod ingest;
pub mod linalg;
pub mod rep_tensor;
pub mod scalar;
pub mod scale_variance;
pub mod social_ties;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GeoUnit = geo_hierarchy::GeoUnit<f64>;
pub type Opinion = geo_hierarchy::Opinion<f64>;
pub type ScaleDecomposition = scale_variance::ScaleDecomposition<f64>;
pub type CovDecomposition = scale_variance::CovDecomposition<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type WeightedOpinions = election::WeightedOpinions<f64>;
pub type Mixture2 = election::Mixture2<f64>;
pub type ElectionModel = election::ElectionModel<f64>;
pub type TieMatrix = social_ties::TieMatrix<f64>;
pub type ScaleWeights = social_ties::ScaleWeights<f64>;
pub type OpinionCloud = axes::OpinionCloud<f64>;
pub type ElectionAxis = axes::ElectionAxis<f64>;
pub type CandidatePair = axes::CandidatePair<f64>;
pub type InteractionSystem = axes::InteractionSystem<f64>;
pub type RepTensor = rep_tensor::RepTensor<f64>;

pub type GeoUnit32 = geo_hierarchy::GeoUnit<f32>;
pub type ScaleDecomposition32 = scale_variance::ScaleDecomposition<f32>;
pub type WeightedOpinions32 = election::WeightedOpinions<f32>;
pub type Mixture2_32 = election::Mixture2<f32>;
pub type OpinionCloud32 = axes::OpinionCloud<f32>;
