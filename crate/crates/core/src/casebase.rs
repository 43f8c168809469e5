//! Persistent case base with retention rules.
//!
//! File layout is line-delimited JSON: a header object carrying the schema
//! version, then one [`CaseRecord`] per line in insertion order.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scale::{Judgment, ResponseSheet};
use crate::similarity::FeatureVector;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum CaseBaseError {
    #[error("case `{0}` is not verified and cannot be retained")]
    NotVerified(String),
    #[error("case id `{0}` already exists")]
    DuplicateId(String),
    #[error("schema version mismatch: file has `{found}`, expected `{expected}`")]
    SchemaVersionMismatch { found: String, expected: String },
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Proposed,
    Revised,
    Verified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub features: FeatureVector,
    pub sheet_digest: String,
    pub bone_age_months: Option<f64>,
    pub judgment: Judgment,
    pub solution: String,
    pub status: CaseStatus,
    pub revised_by: Option<String>,
    pub usage_count: u64,
    pub source_tag: String,
}

/// Hex SHA-256 of the sheet's canonical JSON form.
pub fn sheet_digest(sheet: &ResponseSheet) -> String {
    // BTreeMap keys make the serialization canonical
    let bytes = serde_json::to_vec(sheet).expect("sheet serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "existing_id", rename_all = "snake_case")]
pub enum RetainOutcome {
    Added,
    Merged(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PurgeSummary {
    pub removed: Vec<String>,
    pub unknown: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    schema_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseBase {
    schema_version: String,
    records: IndexMap<String, CaseRecord>,
}

impl Default for CaseBase {
    fn default() -> Self {
        CaseBase {
            schema_version: SCHEMA_VERSION.to_string(),
            records: IndexMap::new(),
        }
    }
}

impl CaseBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a base from records in order. Ids must be unique; duplicate
    /// feature vectors are accepted as-is (see [`CaseBase::duplicate_groups`]).
    pub fn from_records(
        records: impl IntoIterator<Item = CaseRecord>,
    ) -> Result<Self, CaseBaseError> {
        let mut base = CaseBase::new();
        for r in records {
            base.insert_raw(r)?;
        }
        Ok(base)
    }

    fn insert_raw(&mut self, record: CaseRecord) -> Result<(), CaseBaseError> {
        if self.records.contains_key(&record.id) {
            return Err(CaseBaseError::DuplicateId(record.id));
        }
        self.records.insert(record.id.clone(), record);
        Ok(())
    }

    pub fn schema_version(&self) -> &str {
        &self.schema_version
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CaseRecord> {
        self.records.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &CaseRecord> {
        self.records.values()
    }

    /// Adds a verified record, or folds it into an existing verified record
    /// with an identical feature vector.
    pub fn retain(&mut self, record: CaseRecord) -> Result<RetainOutcome, CaseBaseError> {
        if record.status != CaseStatus::Verified {
            return Err(CaseBaseError::NotVerified(record.id));
        }
        let existing = self
            .records
            .values_mut()
            .find(|r| r.status == CaseStatus::Verified && r.features == record.features);
        if let Some(existing) = existing {
            existing.usage_count += record.usage_count;
            existing.solution = record.solution;
            if record.revised_by.is_some() {
                existing.revised_by = record.revised_by;
            }
            return Ok(RetainOutcome::Merged(existing.id.clone()));
        }
        self.insert_raw(record)?;
        Ok(RetainOutcome::Added)
    }

    /// Removes the listed records; ids not present are reported, not fatal.
    pub fn purge<S: AsRef<str>>(&mut self, ids: &[S]) -> PurgeSummary {
        let mut summary = PurgeSummary::default();
        for id in ids {
            let id = id.as_ref();
            match self.records.shift_remove(id) {
                Some(_) => summary.removed.push(id.to_string()),
                None => summary.unknown.push(id.to_string()),
            }
        }
        summary
    }

    /// Verified records in insertion order, as retrieval candidates.
    pub fn candidates(&self) -> impl Iterator<Item = (&str, &FeatureVector)> {
        self.records
            .values()
            .filter(|r| r.status == CaseStatus::Verified)
            .map(|r| (r.id.as_str(), &r.features))
    }

    /// Bumps `usage_count` of each listed case that exists.
    pub fn record_hits<S: AsRef<str>>(&mut self, ids: &[S]) {
        for id in ids {
            if let Some(r) = self.records.get_mut(id.as_ref()) {
                r.usage_count += 1;
            }
        }
    }

    /// Groups of verified record ids sharing an identical feature vector,
    /// in order of first appearance. Groups of one are omitted.
    pub fn duplicate_groups(&self) -> Vec<Vec<String>> {
        let mut groups: Vec<(FeatureVector, Vec<String>)> = Vec::new();
        let mut by_key: HashMap<[u64; 11], Vec<usize>> = HashMap::new();
        for r in self.records.values().filter(|r| r.status == CaseStatus::Verified) {
            let key = r.features.values().map(f64::to_bits);
            let slots = by_key.entry(key).or_default();
            match slots.iter().find(|&&i| groups[i].0 == r.features) {
                Some(&i) => groups[i].1.push(r.id.clone()),
                None => {
                    slots.push(groups.len());
                    groups.push((r.features, vec![r.id.clone()]));
                }
            }
        }
        groups
            .into_iter()
            .filter(|(_, ids)| ids.len() > 1)
            .map(|(_, ids)| ids)
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut sink: W) -> Result<(), CaseBaseError> {
        let header = Header {
            schema_version: self.schema_version.clone(),
        };
        serde_json::to_writer(&mut sink, &header).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
        for r in self.records.values() {
            serde_json::to_writer(&mut sink, r).map_err(std::io::Error::from)?;
            sink.write_all(b"\n")?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(source: R) -> Result<Self, CaseBaseError> {
        let mut lines = BufReader::new(source).lines();
        let header_line = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(CaseBaseError::MalformedRecord {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        };
        let header: Header =
            serde_json::from_str(&header_line).map_err(|e| CaseBaseError::MalformedRecord {
                line: 1,
                message: format!("bad header: {e}"),
            })?;
        if header.schema_version != SCHEMA_VERSION {
            return Err(CaseBaseError::SchemaVersionMismatch {
                found: header.schema_version,
                expected: SCHEMA_VERSION.to_string(),
            });
        }

        let mut base = CaseBase::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CaseRecord =
                serde_json::from_str(&line).map_err(|e| CaseBaseError::MalformedRecord {
                    line: line_no,
                    message: e.to_string(),
                })?;
            base.insert_raw(record)
                .map_err(|e| CaseBaseError::MalformedRecord {
                    line: line_no,
                    message: e.to_string(),
                })?;
        }
        Ok(base)
    }

    /// Writes to a sibling temp file and renames it over `path`.
    pub fn save(&self, path: &Path) -> Result<(), CaseBaseError> {
        let tmp = path.with_extension("jsonl.tmp");
        {
            let file = File::create(&tmp)?;
            let mut w = BufWriter::new(file);
            self.write_to(&mut w)?;
            w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CaseBaseError> {
        Self::read_from(File::open(path)?)
    }
}
