//! Rename tool-schema components to the names a language model produces
//! most consistently from their descriptions, and translate tool calls
//! between the aligned and original namespaces.
//!
//! The scoring core in [`peakedness`] is generic over the scalar used for
//! `α` and `τ`; the aliases below fix it for the common cases.

pub mod alignment;
pub mod cli;
mod digest;
pub mod evalkit;
pub mod oracle;
pub mod peakedness;
pub mod sampling;
pub mod scalar;
pub mod schema;
pub mod translation;

pub use alignment::{align_schema, AlignmentMapping, AlignmentRecord, MappingIndex};
pub use peakedness::{analyze, edit_distance, PeakednessReport, Threshold};
pub use sampling::{FixtureSampler, Sampler, SamplerConfig};
pub use scalar::{Rational, Scalar};
pub use schema::{ParamDef, ToolDef, ToolSchema};
pub use translation::{detect_misalignment, translate_call, ToolCall};

pub type Report32 = PeakednessReport<f32>;
pub type Report64 = PeakednessReport<f64>;
/// Exact report; `τ` comparisons involve no rounding.
pub type ReportExact = PeakednessReport<Rational>;
pub type Threshold64 = Threshold<f64>;
pub type ThresholdExact = Threshold<Rational>;
