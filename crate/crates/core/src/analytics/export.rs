//! Graph export for the operator UI: a JSON node/edge list and GraphML.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Partition, WeightedGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub community: Option<usize>,
    pub degree: usize,
    pub weighted_degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub modularity: Option<f64>,
    pub communities: usize,
}

pub fn to_export(graph: &WeightedGraph, partition: Option<&Partition>) -> GraphExport {
    let nodes = graph
        .degrees()
        .into_iter()
        .map(|(id, (degree, weighted_degree))| GraphNode {
            id: id.to_string(),
            community: partition.and_then(|p| p.assignment.get(id).copied()),
            degree,
            weighted_degree,
        })
        .collect();
    let edges = graph
        .edges()
        .map(|(a, b, w)| GraphEdge { source: a.to_string(), target: b.to_string(), weight: w })
        .collect();
    GraphExport {
        nodes,
        edges,
        modularity: partition.map(|p| p.modularity),
        communities: partition.map_or(0, Partition::community_count),
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn to_graphml(graph: &WeightedGraph, partition: Option<&Partition>) -> String {
    let export = to_export(graph, partition);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n");
    out.push_str("  <key id=\"degree\" for=\"node\" attr.name=\"degree\" attr.type=\"int\"/>\n");
    out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    out.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    for n in &export.nodes {
        let _ = writeln!(out, "    <node id=\"{}\">", escape(&n.id));
        if let Some(c) = n.community {
            let _ = writeln!(out, "      <data key=\"community\">{c}</data>");
        }
        let _ = writeln!(out, "      <data key=\"degree\">{}</data>", n.degree);
        out.push_str("    </node>\n");
    }
    for (i, e) in export.edges.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <edge id=\"e{i}\" source=\"{}\" target=\"{}\">\n      <data key=\"weight\">{}</data>\n    </edge>",
            escape(&e.source),
            escape(&e.target),
            e.weight
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_carries_counts_and_communities() {
        let mut g = WeightedGraph::new();
        g.add_weight("a", "b", 2.0);
        g.add_node("c&d");
        let p = crate::analytics::louvain(&g, 0);
        let e = to_export(&g, Some(&p));
        assert_eq!(e.nodes.len(), 3);
        assert_eq!(e.edges.len(), 1);
        assert_eq!(e.communities, 2);
        let xml = to_graphml(&g, Some(&p));
        assert_eq!(xml.matches("<node ").count(), 3);
        assert_eq!(xml.matches("<edge ").count(), 1);
        assert!(xml.contains("c&amp;d"));
    }
}
