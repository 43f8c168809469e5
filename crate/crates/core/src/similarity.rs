//! Weighted case similarity over the 11 case indices and exact top-k
//! retrieval.
//!
//! The score of a historical case against an input case is
//!
//! ```text
//! Σ_j W_j · sim_j(input_j, history_j) / Σ_j W_j
//! ```
//!
//! where `sim_j` is a range-normalized absolute difference: `1 − |a − b| / R_j`
//! with `R_j = 72` months for the age index and `R_j = 19` for level indices.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scale::{CategoryId, CategoryLevels, AGE_GROUP_COUNT, MAX_AGE_MONTHS};

/// Number of similarity indices.
pub const INDEX_COUNT: usize = 11;

/// Aggregate scores are rounded to this many parts per unit. Candidates that
/// tie in exact arithmetic can differ in the last bit once summed in floating
/// point; rounding makes them compare equal so the id rule decides.
pub const SCORE_RESOLUTION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("unknown similarity index `{0}`")]
    UnknownIndex(String),
    #[error("value {value} is outside the admissible range of index {index}")]
    OutOfRange { index: FeatureIndex, value: f64 },
    #[error("weight profile is missing index {0}")]
    WeightMismatch(FeatureIndex),
    #[error("weight for {index} must be a positive finite number, got {weight}")]
    NonPositiveWeight { index: FeatureIndex, weight: f64 },
    #[error("invalid feature vector: {0}")]
    InvalidFeatures(String),
    #[error("candidate id `{0}` appears more than once")]
    DuplicateCaseId(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("cannot read weight profile: {0}")]
    Io(String),
}

/// Basal and peak level of one developmental category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelPair {
    pub basal: u8,
    pub peak: u8,
}

/// One of the 11 similarity indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureIndex {
    ActualAge,
    Basal(CategoryId),
    Peak(CategoryId),
}

impl FeatureIndex {
    /// All indices in canonical order: age, then basal/peak per category.
    pub fn all() -> [FeatureIndex; INDEX_COUNT] {
        let mut out = [FeatureIndex::ActualAge; INDEX_COUNT];
        for (i, c) in CategoryId::DEVELOPMENTAL.iter().enumerate() {
            out[1 + 2 * i] = FeatureIndex::Basal(*c);
            out[2 + 2 * i] = FeatureIndex::Peak(*c);
        }
        out
    }

    /// Zero-based position in [`FeatureIndex::all`].
    pub fn position(self) -> usize {
        match self {
            FeatureIndex::ActualAge => 0,
            FeatureIndex::Basal(c) => 1 + 2 * c.developmental_position().expect("developmental"),
            FeatureIndex::Peak(c) => 2 + 2 * c.developmental_position().expect("developmental"),
        }
    }

    /// Index by one-based position `j = 1..=11`.
    pub fn from_position(j: usize) -> Result<Self, SimilarityError> {
        j.checked_sub(1)
            .and_then(|i| Self::all().get(i).copied())
            .ok_or_else(|| SimilarityError::UnknownIndex(j.to_string()))
    }

    pub fn name(self) -> String {
        match self {
            FeatureIndex::ActualAge => "actual_age".to_string(),
            FeatureIndex::Basal(c) => format!("{c}_basal"),
            FeatureIndex::Peak(c) => format!("{c}_peak"),
        }
    }

    pub fn from_name(name: &str) -> Result<Self, SimilarityError> {
        Self::all()
            .into_iter()
            .find(|i| i.name() == name)
            .ok_or_else(|| SimilarityError::UnknownIndex(name.to_string()))
    }

    /// Width of the admissible value range.
    pub fn range(self) -> f64 {
        match self {
            FeatureIndex::ActualAge => MAX_AGE_MONTHS as f64,
            _ => AGE_GROUP_COUNT as f64,
        }
    }
}

impl fmt::Display for FeatureIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Serialize for FeatureIndex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for FeatureIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        FeatureIndex::from_name(&name).map_err(serde::de::Error::custom)
    }
}

/// Case indices used for similarity: physical age plus basal/peak for each
/// developmental category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureVectorRepr", into = "FeatureVectorRepr")]
pub struct FeatureVector {
    physical_age_months: f64,
    levels: [LevelPair; 5],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureVectorRepr {
    physical_age_months: f64,
    levels: BTreeMap<CategoryId, LevelPair>,
}

impl TryFrom<FeatureVectorRepr> for FeatureVector {
    type Error = SimilarityError;

    fn try_from(repr: FeatureVectorRepr) -> Result<Self, Self::Error> {
        if repr.levels.len() != CategoryId::DEVELOPMENTAL.len() {
            return Err(SimilarityError::InvalidFeatures(format!(
                "expected levels for 5 developmental categories, got {}",
                repr.levels.len()
            )));
        }
        let mut levels = [LevelPair { basal: 0, peak: 0 }; 5];
        for (slot, c) in levels.iter_mut().zip(CategoryId::DEVELOPMENTAL) {
            *slot = *repr.levels.get(&c).ok_or_else(|| {
                SimilarityError::InvalidFeatures(format!("missing levels for {c}"))
            })?;
        }
        FeatureVector::new(repr.physical_age_months, levels)
    }
}

impl From<FeatureVector> for FeatureVectorRepr {
    fn from(v: FeatureVector) -> Self {
        FeatureVectorRepr {
            physical_age_months: v.physical_age_months,
            levels: CategoryId::DEVELOPMENTAL.into_iter().zip(v.levels).collect(),
        }
    }
}

impl FeatureVector {
    /// `levels` follow [`CategoryId::DEVELOPMENTAL`] order.
    pub fn new(physical_age_months: f64, levels: [LevelPair; 5]) -> Result<Self, SimilarityError> {
        if !(physical_age_months > 0.0 && physical_age_months <= MAX_AGE_MONTHS as f64) {
            return Err(SimilarityError::OutOfRange {
                index: FeatureIndex::ActualAge,
                value: physical_age_months,
            });
        }
        for (c, l) in CategoryId::DEVELOPMENTAL.iter().zip(&levels) {
            if l.peak > AGE_GROUP_COUNT || l.basal > l.peak {
                return Err(SimilarityError::InvalidFeatures(format!(
                    "{c}: need 0 <= basal <= peak <= 19, got basal {} peak {}",
                    l.basal, l.peak
                )));
            }
        }
        Ok(FeatureVector {
            physical_age_months,
            levels,
        })
    }

    pub fn from_levels(
        physical_age_months: f64,
        levels: &[CategoryLevels],
    ) -> Result<Self, SimilarityError> {
        let mut pairs = [LevelPair { basal: 0, peak: 0 }; 5];
        for (slot, c) in pairs.iter_mut().zip(CategoryId::DEVELOPMENTAL) {
            let l = levels.iter().find(|l| l.category == c).ok_or_else(|| {
                SimilarityError::InvalidFeatures(format!("missing levels for {c}"))
            })?;
            *slot = LevelPair {
                basal: l.basal,
                peak: l.peak,
            };
        }
        Self::new(physical_age_months, pairs)
    }

    pub fn physical_age_months(&self) -> f64 {
        self.physical_age_months
    }

    pub fn levels(&self, category: CategoryId) -> Option<LevelPair> {
        category.developmental_position().map(|i| self.levels[i])
    }

    pub fn value(&self, index: FeatureIndex) -> f64 {
        match index {
            FeatureIndex::ActualAge => self.physical_age_months,
            FeatureIndex::Basal(c) => self.levels(c).expect("developmental").basal as f64,
            FeatureIndex::Peak(c) => self.levels(c).expect("developmental").peak as f64,
        }
    }

    pub fn values(&self) -> [f64; INDEX_COUNT] {
        FeatureIndex::all().map(|i| self.value(i))
    }
}

/// Per-index weights, all strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    weights: [f64; INDEX_COUNT],
}

impl Default for WeightProfile {
    /// Age 20, each category level 8; sums to 100.
    fn default() -> Self {
        let mut weights = [8.0; INDEX_COUNT];
        weights[FeatureIndex::ActualAge.position()] = 20.0;
        WeightProfile { weights }
    }
}

impl WeightProfile {
    pub fn new(weights: [f64; INDEX_COUNT]) -> Result<Self, SimilarityError> {
        for (index, &weight) in FeatureIndex::all().iter().zip(&weights) {
            if !(weight.is_finite() && weight > 0.0) {
                return Err(SimilarityError::NonPositiveWeight {
                    index: *index,
                    weight,
                });
            }
        }
        Ok(WeightProfile { weights })
    }

    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self, SimilarityError> {
        for name in map.keys() {
            FeatureIndex::from_name(name)?;
        }
        let mut weights = [0.0; INDEX_COUNT];
        for index in FeatureIndex::all() {
            weights[index.position()] = *map
                .get(&index.name())
                .ok_or(SimilarityError::WeightMismatch(index))?;
        }
        Self::new(weights)
    }

    pub fn from_json(text: &str) -> Result<Self, SimilarityError> {
        let map: BTreeMap<String, f64> = serde_json::from_str(text)
            .map_err(|e| SimilarityError::InvalidFeatures(format!("weight profile: {e}")))?;
        Self::from_map(&map)
    }

    pub fn load(path: &Path) -> Result<Self, SimilarityError> {
        let text = fs::read_to_string(path)
            .map_err(|e| SimilarityError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        FeatureIndex::all()
            .into_iter()
            .map(|i| (i.name(), self.weight(i)))
            .collect()
    }

    pub fn weight(&self, index: FeatureIndex) -> f64 {
        self.weights[index.position()]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, SimilarityError> {
        Self::new(self.weights.map(|w| w * factor))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexContribution {
    pub index: FeatureIndex,
    pub similarity: f64,
    pub weight: f64,
    /// `weight * similarity / total weight`; contributions sum to the score.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    pub per_index: Vec<IndexContribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub case_id: String,
    pub rank: usize,
    pub score: SimilarityScore,
}

/// Similarity of two values on a single index.
pub fn index_similarity(index: FeatureIndex, a: f64, b: f64) -> Result<f64, SimilarityError> {
    let range = index.range();
    for value in [a, b] {
        if !(0.0..=range).contains(&value) {
            return Err(SimilarityError::OutOfRange { index, value });
        }
    }
    Ok(linear_kernel(a, b, range))
}

fn linear_kernel(a: f64, b: f64, range: f64) -> f64 {
    (1.0 - (a - b).abs() / range).clamp(0.0, 1.0)
}

/// Weighted similarity of a historical case to the input case.
pub fn aggregate(
    input: &FeatureVector,
    historical: &FeatureVector,
    weights: &WeightProfile,
) -> SimilarityScore {
    let total = weights.total();
    let mut numerator = 0.0;
    let mut per_index = Vec::with_capacity(INDEX_COUNT);
    for index in FeatureIndex::all() {
        // FeatureVector construction already bounds every value
        let similarity = linear_kernel(input.value(index), historical.value(index), index.range());
        let weight = weights.weight(index);
        numerator += weight * similarity;
        per_index.push(IndexContribution {
            index,
            similarity,
            weight,
            contribution: weight * similarity / total,
        });
    }
    SimilarityScore {
        value: (numerator / total * SCORE_RESOLUTION).round() / SCORE_RESOLUTION,
        per_index,
    }
}

/// Score descending, then case id ascending.
pub fn rank_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

struct HeapEntry<'a> {
    value: f64,
    case_id: &'a str,
    score: SimilarityScore,
}

impl PartialEq for HeapEntry<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry<'_> {}
impl PartialOrd for HeapEntry<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry<'_> {
    // the heap's max element is the worst-ranked kept candidate
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order((self.value, self.case_id), (other.value, other.case_id))
    }
}

/// Top-k most similar candidates.
///
/// Returns `min(k, candidates)` matches ordered by score descending with
/// ties broken by ascending case id. An empty candidate set yields an empty
/// list.
pub fn retrieve<'a, I>(
    input: &FeatureVector,
    candidates: I,
    weights: &WeightProfile,
    k: usize,
) -> Result<Vec<RankedMatch>, SimilarityError>
where
    I: IntoIterator<Item = (&'a str, &'a FeatureVector)>,
{
    if k == 0 {
        return Err(SimilarityError::InvalidK);
    }
    let mut seen = HashSet::new();
    let mut heap: BinaryHeap<HeapEntry<'a>> = BinaryHeap::with_capacity(k + 1);
    for (case_id, features) in candidates {
        if !seen.insert(case_id) {
            return Err(SimilarityError::DuplicateCaseId(case_id.to_string()));
        }
        let score = aggregate(input, features, weights);
        let entry = HeapEntry {
            value: score.value,
            case_id,
            score,
        };
        if heap.len() < k {
            heap.push(entry);
        } else if let Some(mut worst) = heap.peek_mut() {
            if entry < *worst {
                *worst = entry;
            }
        }
    }
    Ok(heap
        .into_sorted_vec()
        .into_iter()
        .enumerate()
        .map(|(i, e)| RankedMatch {
            case_id: e.case_id.to_string(),
            rank: i + 1,
            score: e.score,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(age: f64, pairs: [(u8, u8); 5]) -> FeatureVector {
        FeatureVector::new(age, pairs.map(|(basal, peak)| LevelPair { basal, peak })).unwrap()
    }

    #[test]
    fn default_weights_follow_table() {
        let w = WeightProfile::default();
        assert_eq!(w.weight(FeatureIndex::ActualAge), 20.0);
        assert_eq!(w.weight(FeatureIndex::Peak(CategoryId::FineMotor)), 8.0);
        assert_eq!(w.total(), 100.0);
        let bundled = include_str!("../data/default_weights.json");
        assert_eq!(WeightProfile::from_json(bundled).unwrap(), w);
    }

    #[test]
    fn index_names_round_trip() {
        let names: Vec<String> = FeatureIndex::all().iter().map(|i| i.name()).collect();
        assert_eq!(names[0], "actual_age");
        assert_eq!(names[1], "language_basal");
        assert_eq!(names[10], "sensory_cognitive_peak");
        for (pos, i) in FeatureIndex::all().into_iter().enumerate() {
            assert_eq!(i.position(), pos);
            assert_eq!(FeatureIndex::from_name(&i.name()).unwrap(), i);
            assert_eq!(FeatureIndex::from_position(pos + 1).unwrap(), i);
        }
        assert!(matches!(FeatureIndex::from_position(0), Err(SimilarityError::UnknownIndex(_))));
        assert!(matches!(FeatureIndex::from_position(12), Err(SimilarityError::UnknownIndex(_))));
        assert!(FeatureIndex::from_name("physiological_basal").is_err());
    }

    #[test]
    fn index_similarity_examples() {
        let age = FeatureIndex::ActualAge;
        let lvl = FeatureIndex::Basal(CategoryId::Social);
        assert_eq!(index_similarity(age, 30.0, 30.0).unwrap(), 1.0);
        assert_eq!(index_similarity(age, 24.0, 48.0).unwrap(), 1.0 - 24.0 / 72.0);
        assert_eq!(index_similarity(lvl, 0.0, 19.0).unwrap(), 0.0);
        assert!(matches!(
            index_similarity(lvl, 0.0, 20.0),
            Err(SimilarityError::OutOfRange { .. })
        ));
        assert!(index_similarity(age, -1.0, 2.0).is_err());
    }

    #[test]
    fn exact_ties_score_identically() {
        let q = fv(30.0, [(5, 8), (5, 8), (5, 8), (5, 8), (5, 8)]);
        // one level off, in a different slot each time
        let variants = [
            fv(30.0, [(4, 8), (5, 8), (5, 8), (5, 8), (5, 8)]),
            fv(30.0, [(5, 8), (5, 9), (5, 8), (5, 8), (5, 8)]),
            fv(30.0, [(5, 8), (5, 8), (5, 8), (5, 8), (5, 7)]),
        ];
        let w = WeightProfile::default();
        let values: Vec<f64> = variants.iter().map(|v| aggregate(&q, v, &w).value).collect();
        assert!(values.iter().all(|v| *v == values[0]), "{values:?}");
        let ids = ["c", "a", "b"];
        let got = retrieve(&q, ids.iter().copied().zip(variants.iter()), &w, 3).unwrap();
        let order: Vec<&str> = got.iter().map(|m| m.case_id.as_str()).collect();
        assert_eq!(order, ["a", "b", "c"]);
    }

    #[test]
    fn aggregate_examples() {
        let a = fv(24.0, [(3, 5), (4, 6), (2, 4), (5, 5), (1, 9)]);
        let b = fv(48.0, [(3, 5), (4, 6), (2, 4), (5, 5), (1, 9)]);
        assert_eq!(aggregate(&a, &a, &WeightProfile::default()).value, 1.0);
        let s = aggregate(&a, &b, &WeightProfile::default());
        assert_eq!(s.value, 0.933_333_333_333);
        let sum: f64 = s.per_index.iter().map(|c| c.contribution).sum();
        assert!((sum - s.value).abs() < 1e-12);

        // maximal distance: age 72 months apart is impossible since age > 0,
        // so use the full level range with ages at 0+ and 72
        let lo = fv(f64::MIN_POSITIVE, [(0, 0); 5]);
        let hi = fv(72.0, [(19, 19); 5]);
        let s = aggregate(&lo, &hi, &WeightProfile::default());
        assert!(s.value < 1e-12);
        assert!(s.value >= 0.0);
    }

    #[test]
    fn feature_vector_validation_and_serde() {
        assert!(FeatureVector::new(0.0, [LevelPair { basal: 0, peak: 1 }; 5]).is_err());
        assert!(FeatureVector::new(73.0, [LevelPair { basal: 0, peak: 1 }; 5]).is_err());
        assert!(FeatureVector::new(10.0, [LevelPair { basal: 3, peak: 2 }; 5]).is_err());
        assert!(FeatureVector::new(10.0, [LevelPair { basal: 3, peak: 20 }; 5]).is_err());

        let v = fv(36.5, [(3, 5), (4, 6), (2, 4), (5, 5), (1, 9)]);
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.contains("\"gross_motor\":{\"basal\":2,\"peak\":4}"));
        assert_eq!(serde_json::from_str::<FeatureVector>(&json).unwrap(), v);

        let bad = json.replace("\"basal\":2", "\"basal\":7");
        assert!(serde_json::from_str::<FeatureVector>(&bad).is_err());
        let missing = r#"{"physical_age_months":3.0,"levels":{"language":{"basal":0,"peak":1}}}"#;
        assert!(serde_json::from_str::<FeatureVector>(missing).is_err());
    }

    #[test]
    fn weight_profile_loader() {
        let mut map = WeightProfile::default().to_map();
        assert_eq!(WeightProfile::from_map(&map).unwrap(), WeightProfile::default());
        map.insert("social_peak".into(), 0.0);
        assert!(matches!(
            WeightProfile::from_map(&map),
            Err(SimilarityError::NonPositiveWeight { .. })
        ));
        map.remove("social_peak");
        assert_eq!(
            WeightProfile::from_map(&map),
            Err(SimilarityError::WeightMismatch(FeatureIndex::Peak(CategoryId::Social)))
        );
        map.insert("social_peak".into(), 3.0);
        map.insert("bone_age".into(), 3.0);
        assert!(matches!(WeightProfile::from_map(&map), Err(SimilarityError::UnknownIndex(_))));
    }

    #[test]
    fn retrieve_edges() {
        let w = WeightProfile::default();
        let q = fv(30.0, [(5, 7); 5]);
        let other = fv(40.0, [(6, 8); 5]);
        let cands = [("b".to_string(), other), ("a".to_string(), q), ("c".to_string(), other)];
        let iter = || cands.iter().map(|(id, f)| (id.as_str(), f));

        let top = retrieve(&q, iter(), &w, 10).unwrap();
        assert_eq!(top.len(), 3);
        assert_eq!(top[0].case_id, "a");
        assert_eq!(top[0].score.value, 1.0);
        // equal scores fall back to ascending id
        assert_eq!(top[1].case_id, "b");
        assert_eq!(top[2].case_id, "c");
        assert_eq!(top.iter().map(|m| m.rank).collect::<Vec<_>>(), vec![1, 2, 3]);

        assert_eq!(retrieve(&q, iter(), &w, 1).unwrap().len(), 1);
        assert_eq!(retrieve(&q, iter(), &w, 0), Err(SimilarityError::InvalidK));
        assert!(retrieve(&q, std::iter::empty(), &w, 5).unwrap().is_empty());

        let dup = [("x", &q), ("x", &other)];
        assert_eq!(
            retrieve(&q, dup, &w, 5),
            Err(SimilarityError::DuplicateCaseId("x".into()))
        );
    }

    fn arb_features() -> impl Strategy<Value = FeatureVector> {
        let pair = (0u8..=19, 0u8..=19).prop_map(|(a, b)| LevelPair {
            basal: a.min(b),
            peak: a.max(b),
        });
        (0.01f64..=72.0, [pair.clone(), pair.clone(), pair.clone(), pair.clone(), pair])
            .prop_map(|(age, levels)| FeatureVector::new(age, levels).unwrap())
    }

    fn arb_weights() -> impl Strategy<Value = WeightProfile> {
        proptest::array::uniform11(0.01f64..50.0).prop_map(|w| WeightProfile::new(w).unwrap())
    }

    proptest! {
        #[test]
        fn aggregate_bounded_symmetric_identity(a in arb_features(), b in arb_features(), w in arb_weights()) {
            let ab = aggregate(&a, &b, &w).value;
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, aggregate(&b, &a, &w).value);
            prop_assert_eq!(aggregate(&a, &a, &w).value, 1.0);
        }

        #[test]
        fn weight_scale_invariance(
            q in arb_features(),
            pool in proptest::collection::vec(arb_features(), 1..30),
            w in arb_weights(),
            factor in 0.001f64..1000.0,
        ) {
            let scaled = w.scaled(factor).unwrap();
            for b in &pool {
                let d = aggregate(&q, b, &w).value - aggregate(&q, b, &scaled).value;
                prop_assert!(d.abs() <= 1e-12);
            }
            let ids: Vec<String> = (0..pool.len()).map(|i| format!("c{i:03}")).collect();
            let cands = || ids.iter().map(String::as_str).zip(pool.iter());
            let r1: Vec<String> = retrieve(&q, cands(), &w, pool.len()).unwrap().into_iter().map(|m| m.case_id).collect();
            let r2: Vec<String> = retrieve(&q, cands(), &scaled, pool.len()).unwrap().into_iter().map(|m| m.case_id).collect();
            // ranking is unchanged except where rounding separates exact ties
            let s1: Vec<f64> = r1.iter().map(|id| aggregate(&q, &pool[id[1..].parse::<usize>().unwrap()], &w).value).collect();
            for (i, (x, y)) in r1.iter().zip(&r2).enumerate() {
                if x != y {
                    let tied = s1.iter().filter(|s| (**s - s1[i]).abs() <= 1e-12).count() > 1;
                    prop_assert!(tied, "rank {} differs without a near-tie", i + 1);
                }
            }
        }

        #[test]
        fn retrieve_scores_non_increasing(
            q in arb_features(),
            pool in proptest::collection::vec(arb_features(), 0..40),
            k in 1usize..15,
        ) {
            let ids: Vec<String> = (0..pool.len()).map(|i| format!("c{i:03}")).collect();
            let top = retrieve(&q, ids.iter().map(String::as_str).zip(pool.iter()), &WeightProfile::default(), k).unwrap();
            prop_assert_eq!(top.len(), k.min(pool.len()));
            for pair in top.windows(2) {
                prop_assert!(pair[0].score.value >= pair[1].score.value);
                prop_assert_eq!(pair[0].rank + 1, pair[1].rank);
            }
        }
    }
}
