//! Hashtag co-occurrence graph around a term, clustered with Louvain and
//! exported as JSON and GraphML.

use chrono::{TimeZone, Utc};
use hatewatch::analytics::{cooccurrence_graph, louvain, to_export, to_graphml, TrendWindow};
use hatewatch::{MessageKind, TweetRecord};

fn tweet(id: u32, day: u32, tags: &[&str]) -> TweetRecord {
    TweetRecord {
        id: id.to_string(),
        created_at: Utc.with_ymd_and_hms(2019, 3, day, 12, 0, 0).unwrap(),
        text: tags.iter().map(|t| format!("#{t}")).collect::<Vec<_>>().join(" "),
        lang: "en".into(),
        author: format!("user{}", id % 5),
        hashtags: tags.iter().map(|t| t.to_string()).collect(),
        kind: MessageKind::Original,
        referenced_id: None,
        retweet_count: 0,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records = vec![
        tweet(1, 1, &["banislam", "stopislam", "islamistheproblem"]),
        tweet(2, 2, &["banislam", "stopislam"]),
        tweet(3, 2, &["banislam", "islamistheproblem"]),
        tweet(4, 3, &["banislam", "refugeesnotwelcome", "closetheborders"]),
        tweet(5, 4, &["banislam", "refugeesnotwelcome", "closetheborders"]),
        tweet(6, 5, &["refugeesnotwelcome", "closetheborders"]),
    ];
    let window = TrendWindow::ten_days("banislam", Utc.with_ymd_and_hms(2019, 3, 5, 0, 0, 0).unwrap().date_naive());
    let graph = cooccurrence_graph(&records, &window, 1);
    let partition = louvain(&graph, 0);
    println!("{} tags, {} edges, Q = {:.4}", graph.node_count(), graph.edge_count(), partition.modularity);
    for (id, members) in partition.communities().iter().enumerate() {
        println!("community {id}: {}", members.join(", "));
    }
    println!("{}", serde_json::to_string_pretty(&to_export(&graph, Some(&partition)))?);
    println!("{}", to_graphml(&graph, Some(&partition)));
    Ok(())
}
