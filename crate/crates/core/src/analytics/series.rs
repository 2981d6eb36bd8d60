use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{normalize_term, DateRange, TimeSeries, TweetRecord};

use super::AnalyticsError;

/// Daily counts for a term plus whether the term occurs anywhere in the
/// store. An all-zero series with `term_seen == false` means the term is
/// unknown, not merely quiet in the range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyCounts {
    pub series: TimeSeries,
    pub term_seen: bool,
}

fn bucket<'a>(
    term: &str,
    range: DateRange,
    records: impl Iterator<Item = &'a TweetRecord>,
) -> TimeSeries {
    let mut counts: BTreeMap<NaiveDate, u64> = range.days().map(|d| (d, 0)).collect();
    for r in records {
        if let Some(c) = counts.get_mut(&r.date()) {
            *c += 1;
        }
    }
    TimeSeries { term: term.to_string(), buckets: counts.into_iter().collect() }
}

pub fn daily_counts(records: &[TweetRecord], term: &str, range: DateRange) -> DailyCounts {
    let norm = normalize_term(term);
    let matching: Vec<&TweetRecord> = records.iter().filter(|r| r.contains_term(&norm)).collect();
    DailyCounts {
        term_seen: !matching.is_empty(),
        series: bucket(&norm, range, matching.into_iter()),
    }
}

/// Daily counts of records authored by `user`.
pub fn user_activity_series(records: &[TweetRecord], user: &str, range: DateRange) -> TimeSeries {
    bucket(user, range, records.iter().filter(|r| r.author == user))
}

/// Mean, population SD and the dates whose count is strictly above
/// mean + SD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub series: TimeSeries,
    pub mean: f64,
    pub sd: f64,
    pub threshold: f64,
    pub peak_dates: Vec<NaiveDate>,
}

impl PeakReport {
    pub fn is_peak(&self, date: NaiveDate) -> bool {
        self.peak_dates.binary_search(&date).is_ok()
    }

    /// `date,count,is_peak` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,count,is_peak\n");
        for (d, c) in &self.series.buckets {
            let _ = writeln!(out, "{d},{c},{}", self.is_peak(*d));
        }
        out
    }
}

pub fn detect_peaks(series: &TimeSeries) -> Result<PeakReport, AnalyticsError> {
    let n = series.buckets.len();
    if n < 2 {
        return Err(AnalyticsError::InsufficientData { needed: 2, got: n });
    }
    // Exact integer moments: S = sum, Q = sum of squares. Peak membership
    // `c > S/n + sqrt(nQ - S^2)/n` is decided as `(nc - S)^2 > nQ - S^2`
    // with `nc - S > 0`, so boundary days are never misclassified by rounding.
    let n_i = n as i128;
    let (sum, sum_sq) = series.buckets.iter().fold((0i128, 0i128), |(s, q), (_, c)| {
        let c = *c as i128;
        (s + c, q + c * c)
    });
    let spread = n_i * sum_sq - sum * sum;
    let mean = sum as f64 / n as f64;
    let sd = (spread as f64).sqrt() / n as f64;
    let threshold = mean + sd;
    let peak_dates = series
        .buckets
        .iter()
        .filter(|(_, c)| {
            let excess = n_i * (*c as i128) - sum;
            excess > 0 && excess * excess > spread
        })
        .map(|(d, _)| *d)
        .collect();
    Ok(PeakReport { series: series.clone(), mean, sd, threshold, peak_dates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MessageKind;
    use chrono::{TimeZone, Utc};

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2018, 10, day).unwrap()
    }

    fn rec(id: &str, day: u32, author: &str, tags: &[&str]) -> TweetRecord {
        TweetRecord {
            id: id.into(),
            created_at: Utc.with_ymd_and_hms(2018, 10, day, 10, 0, 0).unwrap(),
            text: "msg".into(),
            lang: "en".into(),
            author: author.into(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            kind: MessageKind::Original,
            referenced_id: None,
            retweet_count: 0,
        }
    }

    #[test]
    fn counts_per_day() {
        let records = vec![rec("1", 1, "a", &["x"]), rec("2", 1, "a", &["x"]), rec("3", 1, "b", &["x"])];
        let out = daily_counts(&records, "#X", DateRange::new(d(1), d(2)).unwrap());
        assert_eq!(out.series.buckets, vec![(d(1), 3), (d(2), 0)]);
        assert!(out.term_seen);
    }

    #[test]
    fn unknown_term_flagged() {
        let out = daily_counts(&[], "x", DateRange::new(d(1), d(3)).unwrap());
        assert_eq!(out.series.counts(), [0, 0, 0]);
        assert!(!out.term_seen);
    }

    #[test]
    fn hand_built_fixture_round_trips() {
        let per_day = [2u64, 2, 2, 2, 12, 2, 2, 2, 2, 2];
        let mut records = Vec::new();
        for (i, n) in per_day.iter().enumerate() {
            for j in 0..*n {
                records.push(rec(&format!("{i}-{j}"), i as u32 + 1, "a", &["x"]));
            }
        }
        let out = daily_counts(&records, "x", DateRange::new(d(1), d(10)).unwrap());
        assert_eq!(out.series.counts(), per_day);
        assert!(out.series.is_contiguous());
    }

    #[test]
    fn user_series() {
        let records = vec![rec("1", 1, "a", &[]), rec("2", 1, "a", &[]), rec("3", 2, "b", &[]), rec("4", 3, "a", &[])];
        let range = DateRange::new(d(1), d(3)).unwrap();
        assert_eq!(user_activity_series(&records, "a", range).counts(), [2, 0, 1]);
        assert_eq!(user_activity_series(&records, "zz", range).counts(), [0, 0, 0]);
    }

    #[test]
    fn peaks_on_spike() {
        let s = TimeSeries::from_counts("x", d(1), &[2, 2, 2, 2, 12, 2, 2, 2, 2, 2]);
        let p = detect_peaks(&s).unwrap();
        assert!((p.mean - 3.0).abs() < 1e-9);
        assert!((p.sd - 3.0).abs() < 1e-9);
        assert!((p.threshold - 6.0).abs() < 1e-9);
        assert_eq!(p.peak_dates, vec![d(5)]);
        assert!(p.to_csv().contains("2018-10-05,12,true\n"));
    }

    #[test]
    fn constant_series_has_no_peaks() {
        let p = detect_peaks(&TimeSeries::from_counts("x", d(1), &[5, 5, 5])).unwrap();
        assert_eq!(p.sd, 0.0);
        assert!(p.peak_dates.is_empty());
    }

    #[test]
    fn single_bucket_is_insufficient() {
        let err = detect_peaks(&TimeSeries::from_counts("x", d(1), &[5])).unwrap_err();
        assert!(matches!(err, AnalyticsError::InsufficientData { .. }));
    }
}
