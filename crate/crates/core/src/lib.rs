//! Dissenting models for binary classifiers.
//!
//! Given a training corpus and a fixed reference classifier, this crate
//! trains alternative models that disagree with the reference (globally via
//! a regularised or reweighted objective, or on one chosen instance),
//! explains both sides with a local linear surrogate, and measures how far
//! predictions and explanations diverge.
//!
//! Numerical code is generic over [`Scalar`] (`f32`/`f64`); counting metrics
//! and the 0-1 objectives are generic over [`Field`] so they can also run on
//! exact [`Rational`]s. The aliases below fix the common `f64` instantiation.

pub mod data;
pub mod error;
pub mod explain;
mod linalg;
pub mod local;
pub mod metrics;
pub mod models;
pub mod objectives;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Field, Rational, Scalar};

pub type Dataset = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type SparseVec = data::SparseVec<f64>;
pub type LinearModel = models::LinearModel<f64>;
pub type LinearModel32 = models::LinearModel<f32>;
pub type MlpModel = models::MlpModel<f64>;
pub type MlpModel32 = models::MlpModel<f32>;
pub type Model = models::Model<f64>;
pub type Model32 = models::Model<f32>;
pub type Prediction = models::Prediction<f64>;
pub type DissentLoss = objectives::DissentLoss<f64>;
pub type Explanation = explain::Explanation<f64>;
pub type AgreementScores = metrics::AgreementScores<f64>;
