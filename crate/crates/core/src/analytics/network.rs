use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{DateRange, MessageKind, TweetRecord, WeightedGraph};

use super::trends::TrendWindow;

/// Hashtag co-occurrence network around `window.term`.
///
/// Nodes are the focus term plus every hashtag sharing a record with it in
/// the window. An edge weight counts the records in the window carrying both
/// endpoints; edges lighter than `min_weight` are dropped.
pub fn cooccurrence_graph(records: &[TweetRecord], window: &TrendWindow, min_weight: u32) -> WeightedGraph {
    let focus = window.term.clone();
    let range = window.range();
    let in_window: Vec<&TweetRecord> = records.iter().filter(|r| range.contains(r.date())).collect();

    let mut nodes: BTreeSet<String> = BTreeSet::new();
    nodes.insert(focus.clone());
    for r in in_window.iter().filter(|r| r.contains_term(&focus)) {
        nodes.extend(r.hashtags.iter().cloned());
    }

    let mut weights: HashMap<(String, String), u32> = HashMap::new();
    for r in &in_window {
        let mut present: BTreeSet<&str> = r.hashtags.iter().map(String::as_str).filter(|h| nodes.contains(*h)).collect();
        if r.contains_term(&focus) {
            present.insert(&focus);
        }
        let present: Vec<&str> = present.into_iter().collect();
        for (i, a) in present.iter().enumerate() {
            for b in &present[i + 1..] {
                *weights.entry((a.to_string(), b.to_string())).or_insert(0) += 1;
            }
        }
    }

    let mut g = WeightedGraph::new();
    for n in nodes {
        g.add_node(n);
    }
    for ((a, b), w) in weights {
        if w >= min_weight.max(1) {
            g.add_weight(&a, &b, f64::from(w));
        }
    }
    g
}

/// Author interaction network: an edge counts retweets and replies between
/// two authors, in either direction. Referenced records are looked up across
/// the whole store; only the interacting record must fall in the window.
pub fn user_graph(records: &[TweetRecord], window: DateRange) -> WeightedGraph {
    let by_id: HashMap<&str, &TweetRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut g = WeightedGraph::new();
    for r in records.iter().filter(|r| window.contains(r.date())) {
        g.add_node(r.author.clone());
        if !matches!(r.kind, MessageKind::Retweet | MessageKind::Reply) {
            continue;
        }
        let target = r.referenced_id.as_deref().and_then(|id| by_id.get(id));
        if let Some(t) = target {
            g.add_weight(&r.author, &t.author, 1.0);
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedUser {
    pub user: String,
    pub degree: usize,
    pub weighted_degree: f64,
}

/// Users by degree, then weighted degree, then name; truncated to `k`.
pub type UserRanking = Vec<RankedUser>;

pub fn most_connected_users(graph: &WeightedGraph, k: usize) -> UserRanking {
    let mut out: Vec<RankedUser> = graph
        .degrees()
        .into_iter()
        .map(|(user, (degree, weighted_degree))| RankedUser { user: user.to_string(), degree, weighted_degree })
        .collect();
    out.sort_by(|a, b| {
        b.degree
            .cmp(&a.degree)
            .then_with(|| b.weighted_degree.total_cmp(&a.weighted_degree))
            .then_with(|| a.user.cmp(&b.user))
    });
    out.truncate(k);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{NaiveDate, TimeZone, Utc};

    fn rec(id: &str, author: &str, tags: &[&str]) -> TweetRecord {
        TweetRecord {
            id: id.into(),
            created_at: Utc.with_ymd_and_hms(2018, 10, 5, 9, 0, 0).unwrap(),
            text: "msg".into(),
            lang: "en".into(),
            author: author.into(),
            hashtags: tags.iter().map(|s| s.to_string()).collect(),
            kind: MessageKind::Original,
            referenced_id: None,
            retweet_count: 0,
        }
    }

    fn rt(id: &str, author: &str, target: &str) -> TweetRecord {
        let mut r = rec(id, author, &[]);
        r.kind = MessageKind::Retweet;
        r.referenced_id = Some(target.into());
        r
    }

    fn window(term: &str) -> TrendWindow {
        TrendWindow::ten_days(term, NaiveDate::from_ymd_opt(2018, 10, 10).unwrap())
    }

    #[test]
    fn pair_counted_per_record() {
        let records = vec![rec("1", "u", &["a", "b"]), rec("2", "u", &["a", "b"])];
        let g = cooccurrence_graph(&records, &window("a"), 1);
        assert_eq!(g.weight("a", "b"), Some(2.0));
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn lone_tag_is_single_node() {
        let g = cooccurrence_graph(&[rec("1", "u", &["a"])], &window("a"), 1);
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn min_weight_drops_light_edges() {
        let records = vec![rec("1", "u", &["a", "b", "c"]), rec("2", "u", &["a", "b"])];
        let g = cooccurrence_graph(&records, &window("a"), 2);
        assert_eq!(g.weight("a", "b"), Some(2.0));
        assert_eq!(g.weight("a", "c"), None);
        assert!(g.contains_node("c"));
    }

    #[test]
    fn out_of_window_ignored() {
        let mut old = rec("1", "u", &["a", "b"]);
        old.created_at = Utc.with_ymd_and_hms(2018, 9, 1, 0, 0, 0).unwrap();
        let g = cooccurrence_graph(&[old], &window("a"), 1);
        assert_eq!(g.node_count(), 1);
    }

    #[test]
    fn retweets_make_edges() {
        let records = vec![rec("1", "v", &[]), rt("2", "u", "1"), rt("3", "u", "1")];
        let range = window("x").range();
        let g = user_graph(&records, range);
        assert_eq!(g.weight("u", "v"), Some(2.0));
    }

    #[test]
    fn no_interactions_edgeless() {
        let records = vec![rec("1", "v", &[]), rec("2", "u", &[])];
        let g = user_graph(&records, window("x").range());
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn star_ranking() {
        let mut g = WeightedGraph::new();
        for leaf in ["l1", "l2", "l3", "l4", "l5"] {
            g.add_weight("c", leaf, 1.0);
        }
        let r = most_connected_users(&g, 3);
        assert_eq!(r[0].user, "c");
        assert_eq!(r[0].degree, 5);
        assert_eq!(r.len(), 3);
        assert!(most_connected_users(&WeightedGraph::new(), 3).is_empty());
    }

    #[test]
    fn ties_broken_by_weighted_degree() {
        let mut g = WeightedGraph::new();
        g.add_weight("a", "x", 1.0);
        g.add_weight("b", "y", 3.0);
        let r = most_connected_users(&g, 4);
        assert_eq!(r[0].user, "b");
        assert_eq!(r[1].user, "y");
        assert_eq!(r[2].user, "a");
        assert_eq!(r[3].user, "x");
    }
}
