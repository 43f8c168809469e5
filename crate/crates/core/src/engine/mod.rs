//! The screening cycle: score a new sheet, retrieve precedents, propose the
//! best precedent's solution, let a professional revise it, then retain the
//! verified case.

mod bone_age;
mod evaluation;

pub use bone_age::{BoneAge, BoneAgeProvider, BoneAgeTable, ProviderUnreadable};
pub use evaluation::{evaluate, EvalQuery, EvaluationError, EvaluationReport, RankRow};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::casebase::{sheet_digest, CaseBase, CaseBaseError, CaseRecord, CaseStatus, RetainOutcome};
use crate::scale::{self, CategoryLevels, DelayStatus, Judgment, Reliability, ResponseSheet, ScaleDefinition, ScaleError};
use crate::similarity::{self, FeatureVector, RankedMatch, SimilarityError, WeightProfile};

/// Interactive retrieval depth.
pub const DEFAULT_K: usize = 10;
/// Retrieval depth used by the verification protocol.
pub const DEFAULT_EVAL_K: usize = 5;

pub const DIAGNOSTIC_ASSESSMENT_NOTE: &str = "diagnostic assessment required";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    CaseBase(#[from] CaseBaseError),
    #[error("session `{0}` is closed")]
    SessionClosed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Open,
    AwaitingRevision,
    Closed,
}

/// A retrieved precedent together with what the reviewer needs to judge it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Precedent {
    #[serde(flatten)]
    pub matched: RankedMatch,
    pub solution: String,
    pub status: DelayStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningSession {
    pub session_id: String,
    pub sheet: ResponseSheet,
    pub levels: Vec<CategoryLevels>,
    pub judgment: Judgment,
    pub features: FeatureVector,
    pub matches: Vec<Precedent>,
    pub proposed_solution: String,
    pub state: SessionState,
    pub revised_by: Option<String>,
    pub notes: Vec<String>,
}

impl ScreeningSession {
    pub fn needs_diagnostic_assessment(&self) -> bool {
        self.judgment.reliability == Reliability::Unreliable
    }

    pub fn match_ids(&self) -> Vec<String> {
        self.matches.iter().map(|m| m.matched.case_id.clone()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Revision {
    #[serde(default)]
    pub solution: Option<String>,
    #[serde(default)]
    pub status_override: Option<DelayStatus>,
}

/// Scale, weights and retrieval depth for one deployment.
#[derive(Debug, Clone)]
pub struct Screener {
    pub scale: ScaleDefinition,
    pub weights: WeightProfile,
    pub k: usize,
}

impl Screener {
    pub fn new(scale: ScaleDefinition, weights: WeightProfile, k: usize) -> Self {
        Screener { scale, weights, k }
    }

    /// Levels, judgment and feature vector for a sheet.
    pub fn assess(
        &self,
        sheet: &ResponseSheet,
    ) -> Result<(Vec<CategoryLevels>, Judgment, FeatureVector), EngineError> {
        let (levels, judgment) = scale::assess(sheet, &self.scale)?;
        let features = FeatureVector::from_levels(sheet.physical_age_months, &levels)?;
        Ok((levels, judgment, features))
    }

    pub fn process_new_case(
        &self,
        session_id: impl Into<String>,
        sheet: ResponseSheet,
        base: &CaseBase,
    ) -> Result<ScreeningSession, EngineError> {
        self.process_with_k(session_id, sheet, base, self.k)
    }

    pub fn process_with_k(
        &self,
        session_id: impl Into<String>,
        sheet: ResponseSheet,
        base: &CaseBase,
        k: usize,
    ) -> Result<ScreeningSession, EngineError> {
        let (levels, judgment, features) = self.assess(&sheet)?;
        let ranked = similarity::retrieve(&features, base.candidates(), &self.weights, k)?;
        let matches: Vec<Precedent> = ranked
            .into_iter()
            .map(|m| {
                let record = base.get(&m.case_id).expect("candidate came from base");
                Precedent {
                    solution: record.solution.clone(),
                    status: record.judgment.status,
                    matched: m,
                }
            })
            .collect();
        let proposed_solution = matches.first().map(|m| m.solution.clone()).unwrap_or_default();
        let mut notes = Vec::new();
        if judgment.reliability == Reliability::Unreliable {
            notes.push(DIAGNOSTIC_ASSESSMENT_NOTE.to_string());
        }
        Ok(ScreeningSession {
            session_id: session_id.into(),
            sheet,
            levels,
            judgment,
            features,
            matches,
            proposed_solution,
            state: SessionState::AwaitingRevision,
            revised_by: None,
            notes,
        })
    }
}

pub fn revise(
    session: &mut ScreeningSession,
    edits: Revision,
    reviser: &str,
) -> Result<(), EngineError> {
    if session.state == SessionState::Closed {
        return Err(EngineError::SessionClosed(session.session_id.clone()));
    }
    if let Some(solution) = edits.solution {
        session.proposed_solution = solution;
    }
    if let Some(status) = edits.status_override {
        session.judgment.status = status;
    }
    session.revised_by = Some(reviser.to_string());
    Ok(())
}

/// Case id assigned to a newly retained session.
pub fn case_id_for(sheet: &ResponseSheet) -> String {
    format!("C-{}", &sheet_digest(sheet)[..16])
}

/// Stores the session as a verified case and closes it.
pub fn retain_session(
    session: &mut ScreeningSession,
    base: &mut CaseBase,
    created_at: DateTime<Utc>,
    source_tag: &str,
) -> Result<(RetainOutcome, CaseRecord), EngineError> {
    if session.state == SessionState::Closed {
        return Err(EngineError::SessionClosed(session.session_id.clone()));
    }
    let record = CaseRecord {
        id: case_id_for(&session.sheet),
        created_at,
        features: session.features,
        sheet_digest: sheet_digest(&session.sheet),
        bone_age_months: session.sheet.bone_age_months,
        judgment: session.judgment,
        solution: session.proposed_solution.clone(),
        status: CaseStatus::Verified,
        revised_by: session.revised_by.clone(),
        usage_count: 0,
        source_tag: source_tag.to_string(),
    };
    let outcome = base.retain(record.clone())?;
    session.state = SessionState::Closed;
    let stored = match &outcome {
        RetainOutcome::Added => record,
        RetainOutcome::Merged(id) => base.get(id).expect("merged into existing").clone(),
    };
    Ok((outcome, stored))
}
