//! The 0–6 year screening scale: instrument definition, basal/peak scoring,
//! developmental age, answer reliability and the threshold judgment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of age groups on the scale.
pub const AGE_GROUP_COUNT: u8 = 19;
/// Upper bound of the scale in months.
pub const MAX_AGE_MONTHS: u32 = 72;
/// More than this many "don't know" answers makes a sheet unreliable.
pub const DONT_KNOW_LIMIT: usize = 16;
/// Ratio strictly above this is judged a delay.
pub const DELAY_RATIO: f64 = 0.75;
/// Ratio strictly below this is judged normal.
pub const NORMAL_RATIO: f64 = 0.70;
/// Peak minus basal at or above this is too wide.
pub const WIDTH_LIMIT: f64 = 6.00;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScaleError {
    #[error("sheet is incomplete: {} unanswered question(s), first {}", .missing.len(), .missing.first().map(String::as_str).unwrap_or("?"))]
    IncompleteSheet { missing: Vec<String> },
    #[error("unknown question id `{0}`")]
    UnknownQuestion(String),
    #[error("physical age must be positive, got {0}")]
    NonPositiveAge(f64),
    #[error("age {0} months is outside the scale range (0, 72]")]
    AgeOutOfRange(f64),
    #[error("bone age must be a non-negative number, got {0}")]
    InvalidBoneAge(f64),
    #[error("levels are missing category {0}")]
    MissingCategory(CategoryId),
    #[error("invalid scale definition: {0}")]
    InvalidScale(String),
    #[error("cannot read scale file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryId {
    Physiological,
    Language,
    Social,
    GrossMotor,
    FineMotor,
    SensoryCognitive,
}

impl CategoryId {
    pub const ALL: [CategoryId; 6] = [
        CategoryId::Physiological,
        CategoryId::Language,
        CategoryId::Social,
        CategoryId::GrossMotor,
        CategoryId::FineMotor,
        CategoryId::SensoryCognitive,
    ];

    /// The five scored categories, in weight-table order.
    pub const DEVELOPMENTAL: [CategoryId; 5] = [
        CategoryId::Language,
        CategoryId::Social,
        CategoryId::GrossMotor,
        CategoryId::FineMotor,
        CategoryId::SensoryCognitive,
    ];

    pub fn is_developmental(self) -> bool {
        self != CategoryId::Physiological
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CategoryId::Physiological => "physiological",
            CategoryId::Language => "language",
            CategoryId::Social => "social",
            CategoryId::GrossMotor => "gross_motor",
            CategoryId::FineMotor => "fine_motor",
            CategoryId::SensoryCognitive => "sensory_cognitive",
        }
    }

    /// Position within [`CategoryId::DEVELOPMENTAL`].
    pub fn developmental_position(self) -> Option<usize> {
        CategoryId::DEVELOPMENTAL.iter().position(|c| *c == self)
    }

    fn default_question_count(self) -> usize {
        match self {
            CategoryId::Physiological => 12,
            CategoryId::Language => 31,
            CategoryId::Social => 34,
            CategoryId::GrossMotor => 36,
            CategoryId::FineMotor => 31,
            CategoryId::SensoryCognitive => 35,
        }
    }

    fn id_prefix(self) -> &'static str {
        match self {
            CategoryId::Physiological => "phy",
            CategoryId::Language => "lan",
            CategoryId::Social => "soc",
            CategoryId::GrossMotor => "gmo",
            CategoryId::FineMotor => "fmo",
            CategoryId::SensoryCognitive => "sco",
        }
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeGroup {
    pub index: u8,
    pub start_month: u32,
    pub end_month: u32,
}

impl AgeGroup {
    pub fn midpoint(&self) -> f64 {
        (self.start_month as f64 + self.end_month as f64) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Category {
    pub id: CategoryId,
    pub question_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question {
    pub id: String,
    pub category: CategoryId,
    /// `None` only for physiological indicators, which are not age-graded.
    pub age_group: Option<u8>,
    pub order: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleDefinition {
    pub version: String,
    pub age_groups: Vec<AgeGroup>,
    pub categories: Vec<Category>,
    pub questions: Vec<Question>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    Yes,
    No,
    DontKnow,
}

/// One child's completed screening form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSheet {
    pub answers: BTreeMap<String, Response>,
    #[serde(default)]
    pub physiological_values: BTreeMap<String, f64>,
    pub physical_age_months: f64,
    #[serde(default)]
    pub bone_age_months: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryLevels {
    pub category: CategoryId,
    pub basal: u8,
    pub peak: u8,
}

impl CategoryLevels {
    pub fn width(&self) -> u8 {
        self.peak - self.basal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayStatus {
    Delay,
    Normal,
    Edge,
}

impl DelayStatus {
    pub fn from_ratio(ratio: f64) -> Self {
        if ratio > DELAY_RATIO {
            DelayStatus::Delay
        } else if ratio < NORMAL_RATIO {
            DelayStatus::Normal
        } else {
            DelayStatus::Edge
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DelayStatus::Delay => "delay",
            DelayStatus::Normal => "normal",
            DelayStatus::Edge => "edge",
        }
    }
}

impl fmt::Display for DelayStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthStatus {
    TooWide,
    NormalWidth,
}

impl WidthStatus {
    pub fn from_width(width: f64) -> Self {
        if width >= WIDTH_LIMIT {
            WidthStatus::TooWide
        } else {
            WidthStatus::NormalWidth
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reliability {
    Reliable,
    Unreliable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReliabilityCheck {
    pub reliability: Reliability,
    pub dont_know_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Judgment {
    pub developmental_age_months: f64,
    pub ratio: f64,
    pub status: DelayStatus,
    pub width: f64,
    pub width_status: WidthStatus,
    pub reliability: Reliability,
    pub dont_know_count: usize,
}

impl ScaleDefinition {
    pub fn from_json(text: &str) -> Result<Self, ScaleError> {
        let scale: ScaleDefinition =
            serde_json::from_str(text).map_err(|e| ScaleError::InvalidScale(e.to_string()))?;
        scale.validate()?;
        Ok(scale)
    }

    pub fn load(path: &Path) -> Result<Self, ScaleError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ScaleError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scale serializes")
    }

    /// Checks every structural invariant of the instrument.
    pub fn validate(&self) -> Result<(), ScaleError> {
        let bad = |msg: String| Err(ScaleError::InvalidScale(msg));

        if self.age_groups.len() != AGE_GROUP_COUNT as usize {
            return bad(format!(
                "expected {AGE_GROUP_COUNT} age groups, found {}",
                self.age_groups.len()
            ));
        }
        let mut expected_start = 0;
        for (i, g) in self.age_groups.iter().enumerate() {
            if g.index as usize != i + 1 {
                return bad(format!("age group at position {} has index {}", i + 1, g.index));
            }
            if g.start_month != expected_start {
                return bad(format!(
                    "age group {} starts at {} but previous group ends at {expected_start}",
                    g.index, g.start_month
                ));
            }
            if g.start_month >= g.end_month {
                return bad(format!("age group {} is empty", g.index));
            }
            expected_start = g.end_month;
        }
        if expected_start != MAX_AGE_MONTHS {
            return bad(format!("age groups end at {expected_start}, expected {MAX_AGE_MONTHS}"));
        }

        let mut seen_categories = BTreeSet::new();
        for c in &self.categories {
            if !seen_categories.insert(c.id) {
                return bad(format!("category {} listed twice", c.id));
            }
        }
        for id in CategoryId::ALL {
            if !seen_categories.contains(&id) {
                return bad(format!("category {id} missing"));
            }
        }

        let mut ids = BTreeSet::new();
        let mut per_category: BTreeMap<CategoryId, Vec<&Question>> = BTreeMap::new();
        for q in &self.questions {
            if !ids.insert(q.id.as_str()) {
                return bad(format!("question id `{}` repeated", q.id));
            }
            match q.age_group {
                Some(g) if g == 0 || g > AGE_GROUP_COUNT => {
                    return bad(format!("question `{}` references age group {g}", q.id));
                }
                None if q.category.is_developmental() => {
                    return bad(format!("developmental question `{}` has no age group", q.id));
                }
                _ => {}
            }
            per_category.entry(q.category).or_default().push(q);
        }

        for c in &self.categories {
            let qs = per_category.get(&c.id).map(Vec::as_slice).unwrap_or(&[]);
            if qs.len() != c.question_count {
                return bad(format!(
                    "category {} declares {} questions but has {}",
                    c.id,
                    c.question_count,
                    qs.len()
                ));
            }
            let mut orders = BTreeSet::new();
            for q in qs {
                if !orders.insert(q.order) {
                    return bad(format!("category {} repeats order {}", c.id, q.order));
                }
            }
            let sorted = qs
                .windows(2)
                .all(|w| (w[0].age_group, w[0].order) < (w[1].age_group, w[1].order));
            if !sorted {
                return bad(format!(
                    "questions in category {} are not sorted by age group then order",
                    c.id
                ));
            }
        }
        Ok(())
    }

    pub fn age_group(&self, index: u8) -> Option<&AgeGroup> {
        index
            .checked_sub(1)
            .and_then(|i| self.age_groups.get(i as usize))
    }

    pub fn category(&self, id: CategoryId) -> Option<&Category> {
        self.categories.iter().find(|c| c.id == id)
    }

    pub fn questions_in(&self, category: CategoryId) -> impl Iterator<Item = &Question> {
        self.questions.iter().filter(move |q| q.category == category)
    }

    pub fn developmental_questions(&self) -> impl Iterator<Item = &Question> {
        self.questions.iter().filter(|q| q.category.is_developmental())
    }

    pub fn developmental_question_count(&self) -> usize {
        self.developmental_questions().count()
    }

    /// Validates a sheet against this scale.
    pub fn validate_sheet(&self, sheet: &ResponseSheet) -> Result<(), ScaleError> {
        let age = sheet.physical_age_months;
        if age.is_nan() || age <= 0.0 {
            return Err(ScaleError::NonPositiveAge(age));
        }
        if age > MAX_AGE_MONTHS as f64 {
            return Err(ScaleError::AgeOutOfRange(age));
        }
        if let Some(bone) = sheet.bone_age_months {
            if !bone.is_finite() || bone < 0.0 {
                return Err(ScaleError::InvalidBoneAge(bone));
            }
        }

        let developmental: BTreeSet<&str> =
            self.developmental_questions().map(|q| q.id.as_str()).collect();
        if let Some(unknown) = sheet
            .answers
            .keys()
            .find(|id| !developmental.contains(id.as_str()))
        {
            return Err(ScaleError::UnknownQuestion(unknown.clone()));
        }
        if let Some(unknown) = sheet.physiological_values.keys().find(|id| {
            !self
                .questions_in(CategoryId::Physiological)
                .any(|q| &q.id == *id)
        }) {
            return Err(ScaleError::UnknownQuestion(unknown.clone()));
        }

        let missing: Vec<String> = self
            .developmental_questions()
            .filter(|q| !sheet.answers.contains_key(&q.id))
            .map(|q| q.id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(ScaleError::IncompleteSheet { missing });
        }
        Ok(())
    }
}

/// Basal and peak level per developmental category.
///
/// Basal is the longest run of age groups from group 1 in which every
/// question is answered Yes. Peak is the first group above basal whose
/// questions are all answered No, or 19 when there is none. A "don't know"
/// answer is neither Yes nor No. Groups without questions in a category do
/// not break the basal run and never qualify as peak.
pub fn compute_levels(
    sheet: &ResponseSheet,
    scale: &ScaleDefinition,
) -> Result<Vec<CategoryLevels>, ScaleError> {
    scale.validate_sheet(sheet)?;

    let levels = CategoryId::DEVELOPMENTAL
        .iter()
        .map(|&category| {
            // per group: (all yes, all no, non-empty)
            let mut groups = [(true, true, false); AGE_GROUP_COUNT as usize];
            for q in scale.questions_in(category) {
                let slot = &mut groups[q.age_group.expect("validated") as usize - 1];
                let answer = sheet.answers[&q.id];
                slot.0 &= answer == Response::Yes;
                slot.1 &= answer == Response::No;
                slot.2 = true;
            }

            let basal = groups.iter().take_while(|(all_yes, _, _)| *all_yes).count() as u8;
            let peak = groups
                .iter()
                .enumerate()
                .skip(basal as usize)
                .find(|(_, (_, all_no, non_empty))| *all_no && *non_empty)
                .map(|(i, _)| i as u8 + 1)
                .unwrap_or(AGE_GROUP_COUNT);
            CategoryLevels {
                category,
                basal,
                peak,
            }
        })
        .collect();
    Ok(levels)
}

fn level_months(scale: &ScaleDefinition, level: u8) -> f64 {
    if level == 0 {
        0.0
    } else {
        scale
            .age_group(level)
            .map(AgeGroup::midpoint)
            .unwrap_or(MAX_AGE_MONTHS as f64)
    }
}

/// Developmental age in months: the mean over the five developmental
/// categories of the midpoint between the basal-group and peak-group
/// midpoints. Basal level 0 counts as 0 months.
pub fn developmental_age(
    levels: &[CategoryLevels],
    scale: &ScaleDefinition,
) -> Result<f64, ScaleError> {
    let mut total = 0.0;
    for category in CategoryId::DEVELOPMENTAL {
        let l = levels
            .iter()
            .find(|l| l.category == category)
            .ok_or(ScaleError::MissingCategory(category))?;
        total += (level_months(scale, l.basal) + level_months(scale, l.peak)) / 2.0;
    }
    Ok(total / CategoryId::DEVELOPMENTAL.len() as f64)
}

pub fn reliability(sheet: &ResponseSheet) -> ReliabilityCheck {
    let dont_know_count = sheet
        .answers
        .values()
        .filter(|a| **a == Response::DontKnow)
        .count();
    ReliabilityCheck {
        reliability: reliability_for_count(dont_know_count),
        dont_know_count,
    }
}

pub fn reliability_for_count(dont_know_count: usize) -> Reliability {
    if dont_know_count > DONT_KNOW_LIMIT {
        Reliability::Unreliable
    } else {
        Reliability::Reliable
    }
}

pub fn judge(
    dev_age: f64,
    physical_age: f64,
    levels: &[CategoryLevels],
    reliability: ReliabilityCheck,
) -> Result<Judgment, ScaleError> {
    if physical_age.is_nan() || physical_age <= 0.0 {
        return Err(ScaleError::NonPositiveAge(physical_age));
    }
    let ratio = dev_age / physical_age;
    let width = levels.iter().map(CategoryLevels::width).max().unwrap_or(0) as f64;
    Ok(Judgment {
        developmental_age_months: dev_age,
        ratio,
        status: DelayStatus::from_ratio(ratio),
        width,
        width_status: WidthStatus::from_width(width),
        reliability: reliability.reliability,
        dont_know_count: reliability.dont_know_count,
    })
}

/// Levels plus judgment for one sheet.
pub fn assess(
    sheet: &ResponseSheet,
    scale: &ScaleDefinition,
) -> Result<(Vec<CategoryLevels>, Judgment), ScaleError> {
    let levels = compute_levels(sheet, scale)?;
    let dev_age = developmental_age(&levels, scale)?;
    let judgment = judge(dev_age, sheet.physical_age_months, &levels, reliability(sheet))?;
    Ok((levels, judgment))
}

/// Splits `total` items over `buckets` as evenly as possible, earlier
/// buckets taking the remainder.
fn even_split(total: usize, buckets: usize) -> impl Iterator<Item = usize> {
    let base = total / buckets;
    let extra = total % buckets;
    (0..buckets).map(move |i| base + usize::from(i < extra))
}

/// The bundled synthetic instrument: 19 near-equal age groups over 0–72
/// months and the published per-category question counts.
pub fn default_scale() -> ScaleDefinition {
    let mut age_groups = Vec::with_capacity(AGE_GROUP_COUNT as usize);
    let mut start = 0;
    for (i, width) in even_split(MAX_AGE_MONTHS as usize, AGE_GROUP_COUNT as usize).enumerate() {
        let end = start + width as u32;
        age_groups.push(AgeGroup {
            index: i as u8 + 1,
            start_month: start,
            end_month: end,
        });
        start = end;
    }

    let categories: Vec<Category> = CategoryId::ALL
        .iter()
        .map(|&id| Category {
            id,
            question_count: id.default_question_count(),
        })
        .collect();

    let mut questions = Vec::new();
    for c in &categories {
        let prefix = c.id.id_prefix();
        if !c.id.is_developmental() {
            questions.extend((1..=c.question_count as u32).map(|order| Question {
                id: format!("{prefix}-{order:03}"),
                category: c.id,
                age_group: None,
                order,
            }));
            continue;
        }
        let mut order = 0;
        for (g, n) in even_split(c.question_count, AGE_GROUP_COUNT as usize).enumerate() {
            for _ in 0..n {
                order += 1;
                questions.push(Question {
                    id: format!("{prefix}-{order:03}"),
                    category: c.id,
                    age_group: Some(g as u8 + 1),
                    order,
                });
            }
        }
    }

    ScaleDefinition {
        version: "synthetic-1.0".to_string(),
        age_groups,
        categories,
        questions,
    }
}
