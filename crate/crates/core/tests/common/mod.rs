#![allow(dead_code)]

use std::path::PathBuf;

use chrono::{DateTime, TimeZone, Utc};
use hatewatch::store::{open_store, OpenMode, StoreHandle};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn temp_store() -> (tempfile::TempDir, StoreHandle) {
    let dir = tempfile::tempdir().unwrap();
    let store = open_store(dir.path().join("store"), OpenMode::ReadWrite).unwrap();
    (dir, store)
}

pub fn ts(y: i32, m: u32, d: u32, h: u32, min: u32, s: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, h, min, s).unwrap()
}

/// Brute-force Levenshtein distance over tokens, by memoized recursion.
pub fn oracle_distance(a: &[String], b: &[String]) -> usize {
    fn go(a: &[String], b: &[String], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == a.len() {
            b.len() - j
        } else if j == b.len() {
            a.len() - i
        } else {
            let sub = go(a, b, i + 1, j + 1, memo) + usize::from(a[i] != b[j]);
            let del = go(a, b, i + 1, j, memo) + 1;
            let ins = go(a, b, i, j + 1, memo) + 1;
            sub.min(del).min(ins)
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, 0, 0, &mut memo)
}

/// Exhaustive tf-idf cosine ranking computed from scratch: raw counts,
/// idf = ln(N/df), zero scores dropped, ties by id.
pub fn oracle_ranking(docs: &[(String, Vec<String>)], query: &[String]) -> Vec<(String, f64)> {
    use std::collections::{BTreeMap, BTreeSet};
    let n = docs.len() as f64;
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for (_, toks) in docs {
        for t in toks.iter().collect::<BTreeSet<_>>() {
            *df.entry(t.as_str()).or_default() += 1.0;
        }
    }
    let weigh = |toks: &[String]| -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in toks {
            *tf.entry(t.clone()).or_default() += 1.0;
        }
        tf.into_iter()
            .filter_map(|(t, c)| {
                let idf = (n / df.get(t.as_str())?).ln();
                (idf > 0.0).then_some((t, c * idf))
            })
            .collect()
    };
    let q = weigh(query);
    let qn: f64 = q.values().map(|w| w * w).sum::<f64>().sqrt();
    let mut out: Vec<(String, f64)> = docs
        .iter()
        .filter_map(|(id, toks)| {
            let d = weigh(toks);
            let dn: f64 = d.values().map(|w| w * w).sum::<f64>().sqrt();
            if qn == 0.0 || dn == 0.0 {
                return None;
            }
            let dot: f64 = q.iter().map(|(t, w)| w * d.get(t).copied().unwrap_or(0.0)).sum();
            let s = dot / (qn * dn);
            (s > 0.0).then(|| (id.clone(), s))
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}
