//! Seeded synthetic screening data.
//!
//! Cases are drawn around a handful of cluster centres, each centre being a
//! (physical age, developmental rate) pair. A child's answer to a question
//! is Yes with a probability that falls off logistically as the question's
//! age-group midpoint passes the child's developmental age in that category.
//! Query sheets are copies of base-case sheets with answers flipped at a
//! fixed probability and the physical age jittered, and their ground-truth
//! status is the judgment of the perturbed sheet.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::casebase::{sheet_digest, CaseBase, CaseRecord, CaseStatus};
use crate::engine::{EngineError, EvalQuery, Screener};
use crate::scale::{CategoryId, DelayStatus, Judgment, Response, ResponseSheet, WidthStatus, MAX_AGE_MONTHS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub cases: usize,
    pub queries: usize,
    pub clusters: usize,
    /// Chance that a query answer differs from its source case.
    pub flip_probability: f64,
    /// SD of physical-age jitter applied to queries, in months.
    pub age_jitter_months: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            cases: 100,
            queries: 50,
            clusters: 8,
            flip_probability: 0.05,
            age_jitter_months: 1.0,
        }
    }
}

pub struct SynthDataset {
    pub base: CaseBase,
    pub queries: Vec<EvalQuery>,
}

struct Centre {
    age: f64,
    rate: f64,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn gaussian(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("positive sd")
}

fn draw_sheet(rng: &mut ChaCha8Rng, screener: &Screener, centre: &Centre) -> ResponseSheet {
    let age = round1((centre.age + gaussian(3.0).sample(rng)).clamp(1.0, MAX_AGE_MONTHS as f64));
    let rate = (centre.rate + gaussian(0.05).sample(rng)).clamp(0.3, 1.3);
    let scale = &screener.scale;

    let mut answers = std::collections::BTreeMap::new();
    for category in CategoryId::DEVELOPMENTAL {
        let dev = (age * rate + gaussian(2.0).sample(rng)).clamp(0.0, MAX_AGE_MONTHS as f64);
        for q in scale.questions_in(category) {
            let mid = scale.age_group(q.age_group.expect("developmental")).expect("valid").midpoint();
            let p_yes = 1.0 / (1.0 + ((mid - dev) / 2.0).exp());
            let u: f64 = rng.random();
            let answer = if u < 0.02 {
                Response::DontKnow
            } else if rng.random::<f64>() < p_yes {
                Response::Yes
            } else {
                Response::No
            };
            answers.insert(q.id.clone(), answer);
        }
    }
    let physiological_values = scale
        .questions_in(CategoryId::Physiological)
        .map(|q| (q.id.clone(), round1(50.0 + gaussian(10.0).sample(rng))))
        .collect();
    let bone_age = round1((age + gaussian(3.0).sample(rng)).max(0.0));
    ResponseSheet {
        answers,
        physiological_values,
        physical_age_months: age,
        bone_age_months: Some(bone_age),
    }
}

fn perturb(rng: &mut ChaCha8Rng, sheet: &ResponseSheet, config: &SynthConfig) -> ResponseSheet {
    let mut out = sheet.clone();
    for answer in out.answers.values_mut() {
        if rng.random::<f64>() < config.flip_probability {
            let others: Vec<Response> = [Response::Yes, Response::No, Response::DontKnow]
                .into_iter()
                .filter(|r| r != answer)
                .collect();
            *answer = *others.choose(rng).expect("two alternatives");
        }
    }
    let jitter = gaussian(config.age_jitter_months).sample(rng);
    out.physical_age_months = round1((sheet.physical_age_months + jitter).clamp(0.5, MAX_AGE_MONTHS as f64));
    out
}

/// Recommendation text attached to a synthetic case.
pub fn template_solution(judgment: &Judgment) -> String {
    let mut text = match judgment.status {
        DelayStatus::Delay => "Refer for comprehensive developmental evaluation; start early-intervention planning.",
        DelayStatus::Edge => "Re-screen in 3 months; caregiver guidance on age-appropriate play.",
        DelayStatus::Normal => "Routine follow-up at the next scheduled well-child visit.",
    }
    .to_string();
    if judgment.width_status == WidthStatus::TooWide {
        text.push_str(" Developmental range too wide; confirm with a structured assessment.");
    }
    text
}

pub fn generate(config: &SynthConfig, screener: &Screener) -> Result<SynthDataset, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let centres: Vec<Centre> = (0..config.clusters.max(1))
        .map(|_| Centre {
            age: rng.random_range(6.0..70.0),
            rate: rng.random_range(0.55..1.1),
        })
        .collect();

    let epoch: DateTime<Utc> = Utc.with_ymd_and_hms(2023, 1, 1, 9, 0, 0).unwrap();
    let mut base = CaseBase::new();
    let mut sheets = Vec::with_capacity(config.cases);
    while sheets.len() < config.cases {
        let centre = centres.choose(&mut rng).expect("at least one centre");
        let sheet = draw_sheet(&mut rng, screener, centre);
        let (_, judgment, features) = screener.assess(&sheet)?;
        if base.candidates().any(|(_, f)| *f == features) {
            continue;
        }
        let i = sheets.len();
        let record = CaseRecord {
            id: format!("case-{:04}", i + 1),
            created_at: epoch + Duration::hours(i as i64 * 61),
            features,
            sheet_digest: sheet_digest(&sheet),
            bone_age_months: sheet.bone_age_months,
            judgment,
            solution: template_solution(&judgment),
            status: CaseStatus::Verified,
            revised_by: Some("synthetic".to_string()),
            usage_count: 0,
            source_tag: "synthetic-2023".to_string(),
        };
        base.retain(record)?;
        sheets.push(sheet);
    }

    let mut queries = Vec::with_capacity(config.queries);
    for i in 0..config.queries {
        let source = sheets.choose(&mut rng).expect("at least one case");
        let sheet = perturb(&mut rng, source, config);
        let (_, judgment, _) = screener.assess(&sheet)?;
        queries.push(EvalQuery {
            query_id: format!("query-{:03}", i + 1),
            sheet,
            verified_status: Some(judgment.status),
        });
    }
    Ok(SynthDataset { base, queries })
}
