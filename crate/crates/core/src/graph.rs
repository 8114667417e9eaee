//! Labeled property graph.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub mod edge_type {
    pub const SEND_TO: &str = "send_to";
    pub const IS_LOCATED_IN: &str = "is_located_in";
    pub const CONTROL: &str = "control";
    pub const SEND_SIGNAL_TO: &str = "send_signal_to";
    pub const IS_LOGICAL_END_OF: &str = "is_logical_end_of";
    pub const MEASURED_BY: &str = "measured_by";
    pub const HAS_PREFIX: &str = "has_";

    /// Edge types that make up an instrumentation loop.
    pub const CONTROL_LOOP: [&str; 4] = [MEASURED_BY, SEND_SIGNAL_TO, CONTROL, IS_LOGICAL_END_OF];

    pub fn has(class_name: &str) -> String {
        let clean: String = class_name.chars().filter(|c| c.is_alphanumeric()).collect();
        format!("{HAS_PREFIX}{clean}")
    }

    pub fn is_domain(t: &str) -> bool {
        t.strip_prefix(HAS_PREFIX)
            .is_some_and(|rest| !rest.is_empty() && rest.chars().all(char::is_alphanumeric))
    }

    /// True if `t` belongs to the closed relationship vocabulary.
    pub fn is_known(t: &str) -> bool {
        matches!(
            t,
            SEND_TO | IS_LOCATED_IN | CONTROL | SEND_SIGNAL_TO | IS_LOGICAL_END_OF | MEASURED_BY
        ) || is_domain(t)
    }
}

pub const PACKAGE_LABELS: [&str; 3] = ["equipment", "piping", "instrumentation"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropertyValue {
    Bool(bool),
    Num(f64),
    Str(String),
}

impl PropertyValue {
    /// Number if the text is a finite decimal that prints back identically,
    /// otherwise the text itself.
    pub fn from_text(text: &str) -> Self {
        match text.parse::<f64>() {
            Ok(n) if n.is_finite() && n.to_string() == text => PropertyValue::Num(n),
            _ => PropertyValue::Str(text.to_string()),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropertyValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            PropertyValue::Bool(_) => "boolean",
            PropertyValue::Num(_) => "double",
            PropertyValue::Str(_) => "string",
        }
    }
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Bool(b) => write!(f, "{b}"),
            PropertyValue::Num(n) => write!(f, "{n}"),
            PropertyValue::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for PropertyValue {
    fn from(s: &str) -> Self {
        PropertyValue::Str(s.to_string())
    }
}

impl From<String> for PropertyValue {
    fn from(s: String) -> Self {
        PropertyValue::Str(s)
    }
}

impl From<f64> for PropertyValue {
    fn from(n: f64) -> Self {
        PropertyValue::Num(n)
    }
}

impl From<bool> for PropertyValue {
    fn from(b: bool) -> Self {
        PropertyValue::Bool(b)
    }
}

pub type Properties = BTreeMap<String, PropertyValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub labels: Vec<String>,
    #[serde(default)]
    pub properties: Properties,
}

impl GraphNode {
    pub fn new<S: Into<String>>(id: impl Into<String>, labels: impl IntoIterator<Item = S>) -> Self {
        GraphNode {
            id: id.into(),
            labels: labels.into_iter().map(Into::into).collect(),
            properties: Properties::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<PropertyValue>) -> Self {
        self.properties.insert(key.to_string(), value.into());
        self
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn tag(&self) -> Option<&str> {
        self.properties.get("tagName").and_then(PropertyValue::as_str)
    }

    /// Tag if present, else the node id.
    pub fn display_tag(&self) -> &str {
        self.tag().unwrap_or(&self.id)
    }

    pub fn class_name(&self) -> Option<&str> {
        self.properties.get("className").and_then(PropertyValue::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    #[serde(rename = "type")]
    pub edge_type: String,
    #[serde(default)]
    pub properties: Properties,
}

impl GraphEdge {
    pub fn new(source: impl Into<String>, target: impl Into<String>, edge_type: impl Into<String>) -> Self {
        GraphEdge {
            source: source.into(),
            target: target.into(),
            edge_type: edge_type.into(),
            properties: Properties::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<PropertyValue>) -> Self {
        self.properties.insert(key.to_string(), value.into());
        self
    }

    fn sort_key(&self) -> (&str, &str, &str, String) {
        let props = self
            .properties
            .iter()
            .map(|(k, v)| format!("{k}={v}:{}", v.type_name()))
            .collect::<Vec<_>>()
            .join("\u{1f}");
        (&self.source, &self.target, &self.edge_type, props)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("edge {source_id} -[{edge_type}]-> {target} references missing node {missing}")]
    MissingEndpoint {
        source_id: String,
        target: String,
        edge_type: String,
        missing: String,
    },
    #[error("node {0} has no labels")]
    NoLabels(String),
    #[error("node {id} has first label {label}, expected a package label")]
    BadPackageLabel { id: String, label: String },
    #[error("edge type {0} is outside the relationship vocabulary")]
    UnknownEdgeType(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyGraph {
    pub nodes: BTreeMap<String, GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.get(id)
    }

    pub fn add_node(&mut self, node: GraphNode) -> Result<(), GraphError> {
        if self.nodes.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: GraphEdge) -> Result<(), GraphError> {
        for end in [&edge.source, &edge.target] {
            if !self.nodes.contains_key(end) {
                return Err(GraphError::MissingEndpoint {
                    missing: end.clone(),
                    source_id: edge.source.clone(),
                    target: edge.target.clone(),
                    edge_type: edge.edge_type.clone(),
                });
            }
        }
        self.edges.push(edge);
        Ok(())
    }

    /// Checks endpoint existence, label shape and edge vocabulary.
    pub fn validate(&self) -> Result<(), GraphError> {
        for (id, node) in &self.nodes {
            if id != &node.id {
                return Err(GraphError::DuplicateNode(id.clone()));
            }
            let first = node.labels.first().ok_or_else(|| GraphError::NoLabels(id.clone()))?;
            if !PACKAGE_LABELS.contains(&first.as_str()) {
                return Err(GraphError::BadPackageLabel {
                    id: id.clone(),
                    label: first.clone(),
                });
            }
        }
        for e in &self.edges {
            for end in [&e.source, &e.target] {
                if !self.nodes.contains_key(end) {
                    return Err(GraphError::MissingEndpoint {
                        missing: end.clone(),
                        source_id: e.source.clone(),
                        target: e.target.clone(),
                        edge_type: e.edge_type.clone(),
                    });
                }
            }
            if !edge_type::is_known(&e.edge_type) {
                return Err(GraphError::UnknownEdgeType(e.edge_type.clone()));
            }
        }
        Ok(())
    }

    /// Sorts edges into the canonical order used for export and comparison.
    pub fn sort_edges(&mut self) {
        self.edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    }

    pub fn sorted_edges(&self) -> Vec<&GraphEdge> {
        let mut edges: Vec<&GraphEdge> = self.edges.iter().collect();
        edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        edges
    }

    /// Equality up to edge order.
    pub fn same_as(&self, other: &PropertyGraph) -> bool {
        self.nodes == other.nodes && self.sorted_edges() == other.sorted_edges()
    }

    pub fn edges_of_type<'a>(&'a self, edge_type: &'a str) -> impl Iterator<Item = &'a GraphEdge> + 'a {
        self.edges.iter().filter(move |e| e.edge_type == edge_type)
    }

    /// Sorted, de-duplicated successor lists over one edge type.
    pub fn successors<'a>(&'a self, edge_type: &str) -> HashMap<&'a str, Vec<&'a str>> {
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in self.edges.iter().filter(|e| e.edge_type == edge_type) {
            adj.entry(e.source.as_str()).or_default().push(e.target.as_str());
        }
        for list in adj.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    pub fn predecessors<'a>(&'a self, edge_type: &str) -> HashMap<&'a str, Vec<&'a str>> {
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in self.edges.iter().filter(|e| e.edge_type == edge_type) {
            adj.entry(e.target.as_str()).or_default().push(e.source.as_str());
        }
        for list in adj.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Nodes reachable from `start` over `edge_type` edges, excluding `start`
    /// unless it lies on a cycle.
    pub fn reachable(&self, start: &str, edge_type: &str) -> HashSet<String> {
        let adj = self.successors(edge_type);
        let mut seen = HashSet::new();
        let mut stack: Vec<&str> = adj.get(start).cloned().unwrap_or_default();
        while let Some(n) = stack.pop() {
            if seen.insert(n.to_string()) {
                if let Some(next) = adj.get(n) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        seen
    }

    pub fn with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a GraphNode> + 'a {
        self.nodes.values().filter(move |n| n.has_label(label))
    }
}
