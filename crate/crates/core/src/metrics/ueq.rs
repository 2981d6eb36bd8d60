//! User Experience Questionnaire scoring.
//!
//! Responses hold one value in `-3..=3` per item. An [`ItemMap`] assigns each
//! item to one of the six scales and says whether its polarity is reversed.
//! Inconsistent responses (large within-scale spread on several scales) are
//! discarded before scale statistics are computed.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UeqError {
    #[error("respondent {respondent}, item {item}: value {value} outside -3..=3")]
    OutOfRange { respondent: usize, item: usize, value: f64 },
    #[error("respondent {respondent} has {got} items, expected {expected}")]
    WrongLength { respondent: usize, got: usize, expected: usize },
    #[error("item map error: {0}")]
    ItemMap(String),
    #[error("no consistent responses left")]
    NoConsistentResponses,
    #[error("benchmark thresholds must be strictly increasing")]
    UnorderedThresholds,
    #[error("csv error: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UeqScale {
    Attractiveness,
    Perspicuity,
    Efficiency,
    Dependability,
    Stimulation,
    Novelty,
}

impl UeqScale {
    pub const ALL: [UeqScale; 6] = [
        UeqScale::Attractiveness,
        UeqScale::Perspicuity,
        UeqScale::Efficiency,
        UeqScale::Dependability,
        UeqScale::Stimulation,
        UeqScale::Novelty,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    /// 1-based item number (column position in a response).
    pub item: usize,
    pub scale: UeqScale,
    /// The positive pole is on the left, so the raw value is negated.
    #[serde(default)]
    pub reversed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyRule {
    /// A scale is suspicious when max - min of its items exceeds this.
    pub spread_threshold: f64,
    /// A response is discarded when at least this many scales are suspicious.
    pub min_scales: usize,
}

impl Default for InconsistencyRule {
    fn default() -> Self {
        InconsistencyRule { spread_threshold: 3.0, min_scales: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMap {
    pub items: Vec<ItemSpec>,
    #[serde(default)]
    pub inconsistency: InconsistencyRule,
}

impl ItemMap {
    /// The published 26-item layout.
    pub fn standard() -> Self {
        use UeqScale::*;
        const LAYOUT: [(UeqScale, bool); 26] = [
            (Attractiveness, false), // annoying / enjoyable
            (Perspicuity, false),    // not understandable / understandable
            (Novelty, true),         // creative / dull
            (Perspicuity, true),     // easy to learn / difficult to learn
            (Stimulation, true),     // valuable / inferior
            (Stimulation, false),    // boring / exciting
            (Stimulation, false),    // not interesting / interesting
            (Dependability, false),  // unpredictable / predictable
            (Efficiency, true),      // fast / slow
            (Novelty, true),         // inventive / conventional
            (Dependability, false),  // obstructive / supportive
            (Attractiveness, true),  // good / bad
            (Perspicuity, false),    // complicated / easy
            (Attractiveness, false), // unlikable / pleasing
            (Novelty, false),        // usual / leading edge
            (Attractiveness, false), // unpleasant / pleasant
            (Dependability, true),   // secure / not secure
            (Stimulation, true),     // motivating / demotivating
            (Dependability, true),   // meets expectations / does not
            (Efficiency, false),     // inefficient / efficient
            (Perspicuity, true),     // clear / confusing
            (Efficiency, false),     // impractical / practical
            (Efficiency, true),      // organized / cluttered
            (Attractiveness, true),  // attractive / unattractive
            (Attractiveness, true),  // friendly / unfriendly
            (Novelty, false),        // conservative / innovative
        ];
        ItemMap {
            items: LAYOUT
                .iter()
                .enumerate()
                .map(|(i, (scale, reversed))| ItemSpec { item: i + 1, scale: *scale, reversed: *reversed })
                .collect(),
            inconsistency: InconsistencyRule::default(),
        }
    }

    pub fn validate(&self) -> Result<(), UeqError> {
        let n = self.items.len();
        let numbers: BTreeSet<usize> = self.items.iter().map(|s| s.item).collect();
        if numbers.len() != n || !numbers.iter().copied().eq(1..=n) {
            return Err(UeqError::ItemMap(format!("items must be numbered 1..={n} without gaps")));
        }
        for scale in UeqScale::ALL {
            if !self.items.iter().any(|s| s.scale == scale) {
                return Err(UeqError::ItemMap(format!("scale {scale:?} has no items")));
            }
        }
        if self.inconsistency.min_scales == 0 {
            return Err(UeqError::ItemMap("inconsistency.min_scales must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleStat {
    pub mean: f64,
    /// Sample standard deviation over kept responses (0 with one response).
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeqResult {
    pub scales: BTreeMap<UeqScale, ScaleStat>,
    pub pragmatic_quality: f64,
    pub hedonic_quality: f64,
    pub n_kept: usize,
    pub n_discarded: usize,
}

impl UeqResult {
    pub fn mean(&self, scale: UeqScale) -> f64 {
        self.scales[&scale].mean
    }
}

/// Per-scale means of one response after polarity correction, plus the
/// number of scales whose item spread exceeds the threshold.
fn score_response(values: &[f64], map: &ItemMap) -> (BTreeMap<UeqScale, f64>, usize) {
    let mut by_scale: BTreeMap<UeqScale, Vec<f64>> = BTreeMap::new();
    for spec in &map.items {
        let raw = values[spec.item - 1];
        let v = if spec.reversed { -raw } else { raw };
        by_scale.entry(spec.scale).or_default().push(v);
    }
    let mut suspicious = 0;
    let means = by_scale
        .into_iter()
        .map(|(scale, vs)| {
            let max = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
            if max - min > map.inconsistency.spread_threshold {
                suspicious += 1;
            }
            (scale, vs.iter().sum::<f64>() / vs.len() as f64)
        })
        .collect();
    (means, suspicious)
}

pub fn ueq_score(responses: &[Vec<f64>], map: &ItemMap) -> Result<UeqResult, UeqError> {
    map.validate()?;
    let expected = map.items.len();
    for (r, values) in responses.iter().enumerate() {
        if values.len() != expected {
            return Err(UeqError::WrongLength { respondent: r + 1, got: values.len(), expected });
        }
        for (i, v) in values.iter().enumerate() {
            if !(-3.0..=3.0).contains(v) {
                return Err(UeqError::OutOfRange { respondent: r + 1, item: i + 1, value: *v });
            }
        }
    }

    let mut kept: Vec<BTreeMap<UeqScale, f64>> = Vec::new();
    let mut n_discarded = 0;
    for values in responses {
        let (means, suspicious) = score_response(values, map);
        if suspicious >= map.inconsistency.min_scales {
            n_discarded += 1;
        } else {
            kept.push(means);
        }
    }
    if kept.is_empty() {
        return Err(UeqError::NoConsistentResponses);
    }

    let n = kept.len() as f64;
    let scales: BTreeMap<UeqScale, ScaleStat> = UeqScale::ALL
        .iter()
        .map(|scale| {
            let xs: Vec<f64> = kept.iter().map(|m| m[scale]).collect();
            let mean = xs.iter().sum::<f64>() / n;
            let sd = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (*scale, ScaleStat { mean, sd })
        })
        .collect();
    let m = |s: UeqScale| scales[&s].mean;
    Ok(UeqResult {
        pragmatic_quality: (m(UeqScale::Perspicuity) + m(UeqScale::Efficiency) + m(UeqScale::Dependability)) / 3.0,
        hedonic_quality: (m(UeqScale::Stimulation) + m(UeqScale::Novelty)) / 2.0,
        scales,
        n_kept: kept.len(),
        n_discarded,
    })
}

/// Reads responses from CSV: a header row, then one row per respondent.
/// The last `item_count` columns are taken as item values, so a leading
/// respondent-id column is allowed.
pub fn read_responses_csv(reader: impl Read, item_count: usize) -> Result<Vec<Vec<f64>>, UeqError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| UeqError::Csv(e.to_string()))?;
        if rec.len() < item_count {
            return Err(UeqError::WrongLength { respondent: row + 1, got: rec.len(), expected: item_count });
        }
        let values = rec
            .iter()
            .skip(rec.len() - item_count)
            .map(|f| f.parse::<f64>().map_err(|e| UeqError::Csv(format!("row {}: '{f}': {e}", row + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(values);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkCategory {
    Excellent,
    Good,
    AboveAverage,
    BelowAverage,
    Bad,
}

/// Lower bounds of each category above "bad" for one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkThresholds {
    pub below_average: f64,
    pub above_average: f64,
    pub good: f64,
    pub excellent: f64,
}

pub type BenchmarkConfig = BTreeMap<UeqScale, BenchmarkThresholds>;

/// Places a scale mean in its benchmark category. A mean equal to a cut
/// point belongs to the higher category.
pub fn ueq_benchmark(scale_mean: f64, t: &BenchmarkThresholds) -> Result<BenchmarkCategory, UeqError> {
    if !(t.below_average < t.above_average && t.above_average < t.good && t.good < t.excellent) {
        return Err(UeqError::UnorderedThresholds);
    }
    Ok(if scale_mean >= t.excellent {
        BenchmarkCategory::Excellent
    } else if scale_mean >= t.good {
        BenchmarkCategory::Good
    } else if scale_mean >= t.above_average {
        BenchmarkCategory::AboveAverage
    } else if scale_mean >= t.below_average {
        BenchmarkCategory::BelowAverage
    } else {
        BenchmarkCategory::Bad
    })
}

/// Categorizes every scale of a result that has thresholds configured.
pub fn benchmark_all(
    result: &UeqResult,
    config: &BenchmarkConfig,
) -> Result<BTreeMap<UeqScale, BenchmarkCategory>, UeqError> {
    config
        .iter()
        .filter_map(|(scale, t)| result.scales.get(scale).map(|s| (scale, s, t)))
        .map(|(scale, s, t)| ueq_benchmark(s.mean, t).map(|c| (*scale, c)))
        .collect()
}
