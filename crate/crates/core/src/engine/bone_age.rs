use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("bone-age table unreadable: {0}")]
pub struct ProviderUnreadable(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoneAge {
    Months(f64),
    NotAvailable,
}

impl BoneAge {
    pub fn months(self) -> Option<f64> {
        match self {
            BoneAge::Months(m) => Some(m),
            BoneAge::NotAvailable => None,
        }
    }
}

/// Source of bone-age estimates keyed by a case reference. An image model
/// can sit behind this trait; lookups never fail, they report
/// [`BoneAge::NotAvailable`].
pub trait BoneAgeProvider: Send + Sync {
    fn lookup(&self, case_ref: &str) -> BoneAge;
}

/// Two-column table (`case_ref,bone_age_months`, header row required).
#[derive(Debug, Clone, Default)]
pub struct BoneAgeTable {
    entries: HashMap<String, f64>,
}

impl BoneAgeTable {
    pub fn from_reader<R: std::io::Read>(source: R) -> Result<Self, ProviderUnreadable> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let headers = reader
            .headers()
            .map_err(|e| ProviderUnreadable(e.to_string()))?;
        if headers.len() != 2 {
            return Err(ProviderUnreadable(format!(
                "expected a two-column header, found {} column(s)",
                headers.len()
            )));
        }
        let mut entries = HashMap::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| ProviderUnreadable(format!("line {line}: {e}")))?;
            let months: f64 = row[1]
                .parse()
                .map_err(|_| ProviderUnreadable(format!("line {line}: `{}` is not a number", &row[1])))?;
            if !months.is_finite() || months < 0.0 {
                return Err(ProviderUnreadable(format!("line {line}: negative bone age")));
            }
            if entries.insert(row[0].to_string(), months).is_some() {
                return Err(ProviderUnreadable(format!("line {line}: duplicate reference `{}`", &row[0])));
            }
        }
        Ok(BoneAgeTable { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ProviderUnreadable> {
        let file = std::fs::File::open(path)
            .map_err(|e| ProviderUnreadable(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl BoneAgeProvider for BoneAgeTable {
    fn lookup(&self, case_ref: &str) -> BoneAge {
        self.entries
            .get(case_ref)
            .map_or(BoneAge::NotAvailable, |m| BoneAge::Months(*m))
    }
}
