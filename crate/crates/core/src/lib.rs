//! Case-based screening for childhood developmental delay.
//!
//! - [`scale`]: the 0–6 year screening instrument and its judgment rules.
//! - [`similarity`]: weighted case similarity and exact top-k retrieval.
//! - [`casebase`]: the persistent store of verified cases.
//! - [`engine`]: the retrieve / reuse / revise / retain cycle and the
//!   per-rank verification report.
//! - [`synth`]: seeded synthetic cases and queries.

pub mod casebase;
pub mod engine;
pub mod scale;
pub mod similarity;
pub mod synth;

pub use casebase::{CaseBase, CaseBaseError, CaseRecord, CaseStatus, RetainOutcome};
pub use engine::{EngineError, Revision, Screener, ScreeningSession, SessionState};
pub use scale::{default_scale, DelayStatus, Judgment, Response, ResponseSheet, ScaleDefinition};
pub use similarity::{FeatureVector, RankedMatch, SimilarityScore, WeightProfile};

/// Default scale document as shipped.
pub const DEFAULT_SCALE_JSON: &str = include_str!("../data/default_scale.json");
/// Default weight profile as shipped.
pub const DEFAULT_WEIGHTS_JSON: &str = include_str!("../data/default_weights.json");
