//! JSON graph format: `{"edges": [...], "nodes": [...]}` with sorted object keys.

use serde::{Deserialize, Serialize};

use crate::graph::{GraphEdge, GraphNode, PropertyGraph};

#[derive(Debug, thiserror::Error)]
pub enum JsonGraphError {
    #[error("invalid graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid graph: {0}")]
    Graph(#[from] crate::graph::GraphError),
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
}

pub fn to_json_value(graph: &PropertyGraph) -> serde_json::Value {
    let doc = GraphDoc {
        nodes: graph.nodes.values().cloned().collect(),
        edges: graph.sorted_edges().into_iter().cloned().collect(),
    };
    // serde_json's default map is ordered, which sorts every object's keys.
    serde_json::to_value(doc).expect("graph values are always serializable")
}

pub fn export_json(graph: &PropertyGraph) -> String {
    let mut text = serde_json::to_string_pretty(&to_json_value(graph)).expect("value serializes");
    text.push('\n');
    text
}

pub fn import_json(text: &str) -> Result<PropertyGraph, JsonGraphError> {
    let doc: GraphDoc = serde_json::from_str(text)?;
    let mut graph = PropertyGraph::new();
    for n in doc.nodes {
        graph.add_node(n)?;
    }
    for e in doc.edges {
        graph.add_edge(e)?;
    }
    Ok(graph)
}
