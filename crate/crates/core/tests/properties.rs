mod common;

use std::collections::BTreeSet;
use std::io::Write;

use chrono::{Duration, NaiveDate};
use hatewatch::analytics::{
    cooccurrence_graph, daily_counts, detect_peaks, louvain, modularity, TrendWindow,
};
use hatewatch::ingest::{ingest, IngestOptions, SourceDescriptor};
use hatewatch::metrics::{edit_distance, hter, ueq_score, ItemMap};
use hatewatch::model::{
    ActivityEvent, CnPair, DateRange, EventType, MessageKind, PairOrigin, Partition, TimeSeries, TweetRecord,
    Watchlist, WeightedGraph,
};
use hatewatch::retrieval::{build_index, score_all, suggest, tokenize, vectorize_query};
use proptest::prelude::*;

use common::{oracle_distance, oracle_ranking, temp_store, ts};

fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 3, 1).unwrap()
}

const TAGS: [&str; 5] = ["banislam", "stopislam", "europe", "news", "iftar"];

fn record_strategy() -> impl Strategy<Value = TweetRecord> {
    (
        0u32..1000,
        0i64..6,
        0u32..86_400,
        proptest::sample::subsequence(TAGS.to_vec(), 0..=3),
        prop::bool::ANY,
        0usize..4,
        0u64..50,
    )
        .prop_map(|(id, day, secs, tags, keyword, author, rts)| TweetRecord {
            id: format!("t{id}"),
            created_at: ts(2019, 3, 1, 0, 0, 0) + Duration::days(day) + Duration::seconds(i64::from(secs)),
            text: if keyword { "ban islam banislam now".into() } else { "hello world".into() },
            lang: "en".into(),
            author: format!("u{author}"),
            hashtags: tags.into_iter().map(String::from).collect(),
            kind: MessageKind::Original,
            referenced_id: None,
            retweet_count: rts,
        })
}

fn graph_strategy(max_nodes: usize) -> impl Strategy<Value = WeightedGraph> {
    (2..=max_nodes).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n, 1u32..4), 1..(n * 3)).prop_map(move |edges| {
            let mut g = WeightedGraph::new();
            for i in 0..n {
                g.add_node(format!("n{i}"));
            }
            for (a, b, w) in edges {
                g.add_weight(&format!("n{a}"), &format!("n{b}"), f64::from(w));
            }
            g
        })
    })
}

fn singletons(g: &WeightedGraph) -> Partition {
    Partition {
        assignment: g.nodes().enumerate().map(|(i, n)| (n.to_string(), i)).collect(),
        modularity: 0.0,
    }
}

/// All set partitions of `n` items as restricted growth strings.
fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..=max + 1 {
            cur[i] = c;
            grow(i + 1, max.max(c), cur, out);
        }
    }
    let mut out = Vec::new();
    grow(1, 0, &mut vec![0; n], &mut out);
    out
}

fn words(max: usize) -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec((0usize..40).prop_map(|i| format!("w{i}")), 1..max)
}

fn corpus_strategy() -> impl Strategy<Value = Vec<CnPair>> {
    proptest::collection::vec((words(8), words(8)), 2..30).prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, (h, c))| CnPair {
                id: format!("p{i:03}"),
                language: "en".into(),
                hate_text: h.join(" "),
                counter_text: c.join(" "),
                origin: PairOrigin::Seed,
                created_at: ts(2020, 1, 1, 0, 0, 0),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_survive_json(r in record_strategy(), referenced in proptest::option::of("[0-9]{1,6}")) {
        let r = TweetRecord {
            kind: if referenced.is_some() { MessageKind::Retweet } else { MessageKind::Original },
            referenced_id: referenced,
            ..r
        };
        let back: TweetRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn events_survive_json(ms in 0i64..10_000_000, text in "[a-z ]{0,20}", with_final in prop::bool::ANY) {
        let e = ActivityEvent {
            session_id: "s".into(),
            operator_id: "op".into(),
            event_type: EventType::NewCNSaved,
            hate_text: text.clone(),
            suggestion_id: None,
            shown_text: None,
            final_text: with_final.then_some(text),
            timestamp: ts(2019, 5, 1, 0, 0, 0) + Duration::milliseconds(ms),
        };
        let json = serde_json::to_string(&e).unwrap();
        let back: ActivityEvent = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn ingest_conserves_lines_and_is_idempotent(
        kinds in proptest::collection::vec(0u8..4, 0..40)
    ) {
        let (dir, store) = temp_store();
        let path = dir.path().join("in.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        let mut non_blank = 0u64;
        let mut matching = 0u64;
        for (i, k) in kinds.iter().enumerate() {
            let line = match k {
                0 => { matching += 1; format!(r##"{{"id":"{i}","created_at":"2019-03-01T00:00:00Z","text":"#banislam","lang":"en"}}"##) }
                1 => format!(r#"{{"id":"{i}","created_at":"2019-03-01T00:00:00Z","text":"nothing here","lang":"en"}}"#),
                2 => "{not json".to_string(),
                _ => String::new(),
            };
            if !line.is_empty() {
                non_blank += 1;
            }
            writeln!(f, "{line}").unwrap();
        }
        drop(f);
        let lists = Watchlist::example_hashtags();
        let src = SourceDescriptor::file(&path);
        let first = ingest(&src, &lists, &store, &IngestOptions::default()).unwrap();
        prop_assert_eq!(first.lines_seen(), non_blank);
        prop_assert_eq!(first.stored, matching);
        prop_assert_eq!(first.totals().total, matching);
        let v = store.version();
        let second = ingest(&src, &lists, &store, &IngestOptions::default()).unwrap();
        prop_assert_eq!(second.stored, 0);
        prop_assert_eq!(second.duplicates, matching);
        prop_assert_eq!(store.version(), v);
        prop_assert_eq!(store.snapshot().tweets().unwrap().len() as u64, matching);
    }

    #[test]
    fn daily_counts_conserve_records(records in proptest::collection::vec(record_strategy(), 0..40), from in 0i64..4, len in 1i64..4) {
        let range = DateRange::new(day0() + Duration::days(from), day0() + Duration::days(from + len - 1)).unwrap();
        let counts = daily_counts(&records, "#banislam", range);
        let expected = records.iter().filter(|r| range.contains(r.date()) && r.contains_term("banislam")).count() as u64;
        prop_assert_eq!(counts.series.total(), expected);
        prop_assert!(counts.series.is_contiguous());
        prop_assert_eq!(counts.series.buckets.len() as i64, len);
    }

    #[test]
    fn cooccurrence_matches_brute_force(records in proptest::collection::vec(record_strategy(), 0..40), len in 1i64..6) {
        let window = TrendWindow::new("banislam", day0(), day0() + Duration::days(len - 1)).unwrap();
        let g = cooccurrence_graph(&records, &window, 1);
        let in_window: Vec<&TweetRecord> = records.iter().filter(|r| window.range().contains(r.date())).collect();
        let has = |r: &TweetRecord, x: &str| if x == "banislam" { r.contains_term(x) } else { r.hashtags.iter().any(|h| h == x) };
        let nodes: Vec<&str> = g.nodes().collect();
        for a in &nodes {
            for b in &nodes {
                if a >= b { continue; }
                let count = in_window.iter().filter(|r| has(r, a) && has(r, b)).count();
                let w = g.weight(a, b);
                prop_assert_eq!(w, g.weight(b, a));
                prop_assert_eq!(w.unwrap_or(0.0), count as f64, "{} {}", a, b);
            }
        }
    }

    #[test]
    fn louvain_is_deterministic_and_never_worse_than_singletons(g in graph_strategy(12), seed in 0u64..1000) {
        prop_assume!(g.edge_count() > 0);
        let p = louvain(&g, seed);
        prop_assert_eq!(&p, &louvain(&g, seed));
        prop_assert_eq!(p.assignment.len(), g.node_count());
        prop_assert!(p.ids_contiguous());
        let q0 = modularity(&g, &singletons(&g)).unwrap();
        prop_assert!(p.modularity >= q0 - 1e-12);
        prop_assert!((modularity(&g, &p).unwrap() - p.modularity).abs() < 1e-12);
        prop_assert!((-0.5..=1.0).contains(&p.modularity));
    }

    #[test]
    fn louvain_is_near_optimal_on_small_graphs(g in graph_strategy(8), seed in 0u64..1000) {
        prop_assume!(g.total_weight() > 0.0);
        let nodes: Vec<String> = g.nodes().map(str::to_string).collect();
        let best = set_partitions(nodes.len())
            .into_iter()
            .map(|labels| {
                let p = Partition { assignment: nodes.iter().cloned().zip(labels).collect(), modularity: 0.0 };
                modularity(&g, &p).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let got = louvain(&g, seed).modularity;
        prop_assert!(got >= 0.95 * best - 1e-12, "Q {} vs optimum {}", got, best);
    }

    #[test]
    fn suggestions_match_exhaustive_scoring(pairs in corpus_strategy(), query in words(10), k in 1usize..=10) {
        let index = build_index(&pairs, "en").unwrap();
        let docs: Vec<(String, Vec<String>)> = pairs
            .iter()
            .map(|p| (p.id.clone(), tokenize(&format!("{} {}", p.hate_text, p.counter_text))))
            .collect();
        let oracle = oracle_ranking(&docs, &query);
        match suggest(&query.join(" "), &index, k) {
            Ok(got) => {
                prop_assert_eq!(got.len(), oracle.len().min(k));
                for (s, (id, score)) in got.iter().zip(&oracle) {
                    prop_assert!((s.score - score).abs() < 1e-9);
                    if &s.pair_id != id {
                        let theirs = oracle.iter().find(|(i, _)| *i == s.pair_id).unwrap().1;
                        prop_assert!((theirs - score).abs() < 1e-12, "order differs beyond a tie");
                    }
                }
                prop_assert!(got.windows(2).all(|w| w[0].score >= w[1].score));
                prop_assert!(got.iter().all(|s| (0.0..=1.0).contains(&s.score)));
            }
            Err(_) => prop_assert!(oracle.is_empty()),
        }
    }

    #[test]
    fn ranking_is_scale_invariant(pairs in corpus_strategy(), query in words(6), factor in 2usize..5) {
        let index = build_index(&pairs, "en").unwrap();
        let scaled: Vec<String> = query.iter().flat_map(|w| std::iter::repeat_n(w.clone(), factor)).collect();
        if let (Ok(a), Ok(b)) = (vectorize_query(&query.join(" "), &index), vectorize_query(&scaled.join(" "), &index)) {
            let ra: Vec<String> = score_all(&a, &index).into_iter().map(|(id, _)| id).collect();
            let rb: Vec<String> = score_all(&b, &index).into_iter().map(|(id, _)| id).collect();
            prop_assert_eq!(ra, rb);
        }
    }

    #[test]
    fn rebuild_is_deterministic(pairs in corpus_strategy()) {
        let mut shuffled = pairs.clone();
        shuffled.reverse();
        let a = build_index(&pairs, "en").unwrap();
        let b = build_index(&shuffled, "en").unwrap();
        prop_assert_eq!(&a.vocabulary, &b.vocabulary);
        for (id, v) in &a.doc_vectors {
            for (t, w) in v.iter() {
                prop_assert!((w - b.doc_vectors[id].get(t)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn hter_matches_dp_oracle(a in proptest::collection::vec("[a-d]", 0..12), b in proptest::collection::vec("[a-d]", 0..12)) {
        let d = oracle_distance(&a, &b);
        prop_assert_eq!(edit_distance(&a, &b), d);
        match hter(&a, &b) {
            Ok(r) => {
                prop_assert_eq!(r.edits, d);
                prop_assert!((r.hter - d as f64 / b.len() as f64).abs() < 1e-15);
            }
            Err(_) => prop_assert!(b.is_empty()),
        }
    }

    #[test]
    fn peaks_agree_with_float_scan(counts in proptest::collection::vec(0u64..500, 2..60)) {
        let report = detect_peaks(&TimeSeries::from_counts("t", day0(), &counts)).unwrap();
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<u64>() as f64 / n;
        let sd = (counts.iter().map(|c| (*c as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!((report.mean - mean).abs() < 1e-9);
        prop_assert!((report.sd - sd).abs() < 1e-9);
        for (i, c) in counts.iter().enumerate() {
            let margin = *c as f64 - (mean + sd);
            if margin.abs() > 1e-9 {
                prop_assert_eq!(report.is_peak(day0() + Duration::days(i as i64)), margin > 0.0);
            }
        }
    }

    #[test]
    fn ueq_means_stay_inside_the_response_band(
        rows in proptest::collection::vec(proptest::collection::vec(-8i32..=8, 26), 1..12),
    ) {
        // values in -0.8..=0.8 after polarity correction; spread never exceeds 3
        let map = ItemMap::standard();
        let responses: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| map.items.iter().zip(r).map(|(spec, v)| {
                let v = f64::from(*v) / 10.0;
                if spec.reversed { -v } else { v }
            }).collect())
            .collect();
        let result = ueq_score(&responses, &map).unwrap();
        prop_assert_eq!(result.n_discarded, 0);
        for stat in result.scales.values() {
            prop_assert!(stat.mean.abs() <= 0.8 + 1e-12);
        }
        let mut reversed = responses.clone();
        reversed.reverse();
        let again = ueq_score(&reversed, &map).unwrap();
        for (s, stat) in &result.scales {
            prop_assert!((stat.mean - again.scales[s].mean).abs() < 1e-12);
            prop_assert!((stat.sd - again.scales[s].sd).abs() < 1e-12);
        }
    }
}

#[test]
fn cooccurrence_min_weight_prunes_edges_only() {
    let records: Vec<TweetRecord> = (0..3)
        .map(|i| TweetRecord {
            id: format!("r{i}"),
            created_at: ts(2019, 3, 1, 12, 0, 0),
            text: String::new(),
            lang: "en".into(),
            author: "a".into(),
            hashtags: if i == 0 { vec!["banislam".into(), "news".into()] } else { vec!["banislam".into(), "europe".into()] },
            kind: MessageKind::Original,
            referenced_id: None,
            retweet_count: 0,
        })
        .collect();
    let window = TrendWindow::new("banislam", day0(), day0()).unwrap();
    let g = cooccurrence_graph(&records, &window, 2);
    let nodes: BTreeSet<&str> = g.nodes().collect();
    assert_eq!(nodes, BTreeSet::from(["banislam", "europe", "news"]));
    assert_eq!(g.weight("banislam", "europe"), Some(2.0));
    assert_eq!(g.weight("banislam", "news"), None);
}
