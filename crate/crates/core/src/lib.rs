//! Finite cyclic models of Gabor-type approximate Schauder frames.
//!
//! A pair of Gabor families, one synthesizing with `E_{mb} T_{na} g` and one
//! analyzing through the bilinear pairing `[x, ω] = ∫ x ω`, defines the series
//! operator `S x = Σ [x, ω_k] τ_k`. The pair is an approximate Schauder frame
//! when `S` is bounded and invertible; on a finite model this is decided by
//! estimating `‖S‖_{p→p}` and `‖S^{-1}‖_{p→p}`.

pub mod error;
pub mod frameop;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod pnorms;
pub mod sweep;
pub mod verdict;

pub use error::{LabError, Result};
pub use frameop::{
    analysis_apply, assemble_frame_matrix, frame_operator_apply, pairing, synthesis_apply, CoefficientSeq, FramePair,
};
pub use linalg::Matrix;
pub use model::{
    build_cyclic_model, conjugate_exponent, sample_indicator_window, CyclicModel, FrameBounds, GaborTriple, GridVector,
    LebesgueExponent,
};
pub use operators::{gabor_family, modulate, translate, GaborFamily, Orientation};
pub use pnorms::{
    dual_vector, exact_p2_extremes, inverse_opnorm_estimate, opnorm_estimate, vector_pnorm, EstimatorOptions,
    NormEstimate,
};
pub use verdict::{
    asf_verdict, painless_oracle, scale_study, Classification, ScaleParams, ScaleStudy, Tolerances, Trend,
    TrendThresholds, Verdict,
};
