//! Per-rank verification report: for every query, retrieve the top-k
//! precedents and tabulate mean/SD of similarity and of status agreement at
//! each rank.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EngineError, Screener};
use crate::casebase::CaseBase;
use crate::scale::{DelayStatus, ResponseSheet};
use crate::similarity;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("case base has no verified cases")]
    EmptyBase,
    #[error("no queries supplied")]
    NoQueries,
    #[error("query `{0}` has no verified status")]
    MissingGroundTruth(String),
    #[error("query `{query_id}`: {source}")]
    Query {
        query_id: String,
        #[source]
        source: EngineError,
    },
    #[error("queries line {line}: {message}")]
    MalformedQuery { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A held-out sheet with the clinician's verified status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalQuery {
    pub query_id: String,
    pub sheet: ResponseSheet,
    #[serde(default)]
    pub verified_status: Option<DelayStatus>,
}

impl EvalQuery {
    pub fn read_jsonl<R: Read>(source: R) -> Result<Vec<EvalQuery>, EvaluationError> {
        let mut out = Vec::new();
        for (i, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let q = serde_json::from_str(&line).map_err(|e| EvaluationError::MalformedQuery {
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(q);
        }
        Ok(out)
    }

    pub fn write_jsonl<W: Write>(queries: &[EvalQuery], mut sink: W) -> std::io::Result<()> {
        for q in queries {
            serde_json::to_writer(&mut sink, q)?;
            sink.write_all(b"\n")?;
        }
        sink.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub avg_similarity: f64,
    pub sd_similarity: f64,
    pub avg_accuracy: f64,
    pub sd_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    /// Queries that produced a match at this rank.
    pub samples: usize,
    #[serde(flatten)]
    pub metrics: MetricRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub k: usize,
    pub query_count: usize,
    pub per_rank: Vec<RankRow>,
    pub mean_row: MetricRow,
}

fn mean_and_population_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn evaluate(
    base: &CaseBase,
    queries: &[EvalQuery],
    screener: &Screener,
    k: usize,
) -> Result<EvaluationReport, EvaluationError> {
    if base.candidates().next().is_none() {
        return Err(EvaluationError::EmptyBase);
    }
    if queries.is_empty() {
        return Err(EvaluationError::NoQueries);
    }
    if let Some(q) = queries.iter().find(|q| q.verified_status.is_none()) {
        return Err(EvaluationError::MissingGroundTruth(q.query_id.clone()));
    }

    let mut similarity_at: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut accuracy_at: Vec<Vec<f64>> = vec![Vec::new(); k];
    for q in queries {
        let wrap = |source: EngineError| EvaluationError::Query {
            query_id: q.query_id.clone(),
            source,
        };
        let (_, _, features) = screener.assess(&q.sheet).map_err(wrap)?;
        let top = similarity::retrieve(&features, base.candidates(), &screener.weights, k)
            .map_err(|e| wrap(e.into()))?;
        let truth = q.verified_status.expect("checked above");
        for m in top {
            let status = base.get(&m.case_id).expect("candidate from base").judgment.status;
            similarity_at[m.rank - 1].push(m.score.value);
            accuracy_at[m.rank - 1].push(if status == truth { 1.0 } else { 0.0 });
        }
    }

    let per_rank: Vec<RankRow> = similarity_at
        .iter()
        .zip(&accuracy_at)
        .enumerate()
        .filter(|(_, (s, _))| !s.is_empty())
        .map(|(i, (s, a))| {
            let (avg_similarity, sd_similarity) = mean_and_population_sd(s);
            let (avg_accuracy, sd_accuracy) = mean_and_population_sd(a);
            RankRow {
                rank: i + 1,
                samples: s.len(),
                metrics: MetricRow {
                    avg_similarity,
                    sd_similarity,
                    avg_accuracy,
                    sd_accuracy,
                },
            }
        })
        .collect();

    let n = per_rank.len() as f64;
    let column = |f: fn(&MetricRow) -> f64| per_rank.iter().map(|r| f(&r.metrics)).sum::<f64>() / n;
    let mean_row = MetricRow {
        avg_similarity: column(|m| m.avg_similarity),
        sd_similarity: column(|m| m.sd_similarity),
        avg_accuracy: column(|m| m.avg_accuracy),
        sd_accuracy: column(|m| m.sd_accuracy),
    };

    Ok(EvaluationReport {
        k,
        query_count: queries.len(),
        per_rank,
        mean_row,
    })
}

const COLUMNS: &str = "rank,avg_similarity,sd_similarity,avg_accuracy,sd_accuracy";

impl EvaluationReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Comma-separated, full precision, closing `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{COLUMNS}\n");
        let mut row = |label: &str, m: &MetricRow| {
            let _ = writeln!(
                out,
                "{label},{},{},{},{}",
                m.avg_similarity, m.sd_similarity, m.avg_accuracy, m.sd_accuracy
            );
        };
        for r in &self.per_rank {
            row(&r.rank.to_string(), &r.metrics);
        }
        row("mean", &self.mean_row);
        out
    }

    /// Fixed-width table with four decimals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<8}{:>16}{:>16}{:>16}{:>16}\n",
            "Ranking", "Avg Similarity", "SD Similarity", "Avg Accuracy", "SD Accuracy"
        );
        let mut row = |label: &str, m: &MetricRow| {
            let _ = writeln!(
                out,
                "{label:<8}{:>16.4}{:>16.4}{:>16.4}{:>16.4}",
                m.avg_similarity, m.sd_similarity, m.avg_accuracy, m.sd_accuracy
            );
        };
        for r in &self.per_rank {
            row(&r.rank.to_string(), &r.metrics);
        }
        row("Mean", &self.mean_row);
        out
    }
}
