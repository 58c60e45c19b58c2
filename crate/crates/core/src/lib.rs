//! Hybrid-system simulation and synergistic hybrid feedback.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what the harness uses.

// `!(x > 0)` is how NaN gets rejected alongside nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backstepping;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod navigation;
pub mod scalar;
pub mod smoothing;
pub mod synergy;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type HybridSystemSpecF64 = engine::HybridSystemSpec<f64>;
pub type SimConfigF64 = engine::SimConfig<f64>;
pub type HybridArcF64 = engine::HybridArc<f64>;
pub type AffinePlantF64 = synergy::AffinePlant<f64>;
pub type QuadrupleF64 = synergy::SynergisticQuadruple<f64>;
pub type DecomposedFeedbackF64 = smoothing::DecomposedFeedback<f64>;
pub type SmoothedParamsF64 = smoothing::SmoothedParams<f64>;
pub type SmoothedDesignF64 = smoothing::SmoothedDesign<f64>;
pub type BacksteppingParamsF64 = backstepping::BacksteppingParams<f64>;
pub type BacksteppedDesignF64 = backstepping::BacksteppedDesign<f64>;
pub type NavigationWorldF64 = navigation::NavigationWorld<f64>;
pub type NavGainsF64 = navigation::NavGains<f64>;
