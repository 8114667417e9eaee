//! Deterministic GraphML writer and reader.
//!
//! Node labels are stored under the reserved key `labels` joined by `;`, the
//! edge type under the reserved key `type`. Every other property gets one
//! `<key>` per (name, value type) pair so numbers and booleans survive a round
//! trip with their type.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::graph::{GraphEdge, GraphNode, PropertyGraph, PropertyValue};

pub const LABEL_SEPARATOR: char = ';';
const LABELS_KEY: &str = "labels";
const TYPE_KEY: &str = "type";

#[derive(Debug, thiserror::Error)]
pub enum GraphmlError {
    #[error("cannot serialize {owner} property {key}: {reason}")]
    Unrepresentable {
        owner: String,
        key: String,
        reason: String,
    },
    #[error("malformed GraphML at line {line}, column {column}: {message}")]
    Xml {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("GraphML has no <graph> element")]
    NoGraph,
    #[error("data element references unknown key {0}")]
    UnknownKey(String),
    #[error("{element} is missing attribute {attribute}")]
    MissingAttribute {
        element: &'static str,
        attribute: &'static str,
    },
    #[error("value {value:?} for key {key} is not a valid {kind}")]
    BadValue {
        key: String,
        kind: String,
        value: String,
    },
    #[error("edge {0} has no type")]
    MissingEdgeType(String),
    #[error("invalid graph: {0}")]
    Graph(#[from] crate::graph::GraphError),
}

fn xml_safe(s: &str) -> Result<(), String> {
    match s
        .chars()
        .find(|&c| matches!(c, '\u{0}'..='\u{8}' | '\u{b}' | '\u{c}' | '\u{e}'..='\u{1f}' | '\u{fffe}' | '\u{ffff}'))
    {
        Some(c) => Err(format!("character U+{:04X} is not allowed in XML", c as u32)),
        None => Ok(()),
    }
}

fn escape_into(out: &mut String, s: &str, attribute: bool) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            '\r' => out.push_str("&#13;"),
            '\n' if attribute => out.push_str("&#10;"),
            '\t' if attribute => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
}

fn value_text(owner: &str, key: &str, v: &PropertyValue) -> Result<String, GraphmlError> {
    let bad = |reason: String| GraphmlError::Unrepresentable {
        owner: owner.to_string(),
        key: key.to_string(),
        reason,
    };
    match v {
        PropertyValue::Num(n) if !n.is_finite() => Err(bad(format!("non-finite number {n}"))),
        PropertyValue::Str(s) => {
            xml_safe(s).map_err(bad)?;
            Ok(s.clone())
        }
        other => Ok(other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct KeyDef {
    name: String,
    kind: &'static str,
}

fn key_table<'a>(props: impl Iterator<Item = (&'a String, &'a PropertyValue)>, prefix: &str) -> BTreeMap<KeyDef, String> {
    let defs: BTreeSet<KeyDef> = props
        .map(|(k, v)| KeyDef {
            name: k.clone(),
            kind: v.type_name(),
        })
        .collect();
    defs.into_iter()
        .enumerate()
        .map(|(i, d)| (d, format!("{prefix}{i}")))
        .collect()
}

/// Serializes the graph. Equal graphs give identical bytes regardless of edge order.
pub fn export_graphml(graph: &PropertyGraph) -> Result<String, GraphmlError> {
    graph.validate()?;
    let node_keys = key_table(graph.nodes.values().flat_map(|n| n.properties.iter()), "nk");
    let edge_keys = key_table(graph.edges.iter().flat_map(|e| e.properties.iter()), "ek");

    let mut out = String::with_capacity(256 + graph.node_count() * 256);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    let _ = writeln!(
        out,
        "  <key id=\"{LABELS_KEY}\" for=\"node\" attr.name=\"labels\" attr.type=\"string\"/>"
    );
    write_keys(&mut out, &node_keys, "node")?;
    let _ = writeln!(
        out,
        "  <key id=\"{TYPE_KEY}\" for=\"edge\" attr.name=\"type\" attr.type=\"string\"/>"
    );
    write_keys(&mut out, &edge_keys, "edge")?;
    out.push_str("  <graph id=\"G\" edgedefault=\"directed\">\n");

    for node in graph.nodes.values() {
        write_node(&mut out, node, &node_keys)?;
    }
    for (i, edge) in graph.sorted_edges().into_iter().enumerate() {
        write_edge(&mut out, i, edge, &edge_keys)?;
    }
    out.push_str("  </graph>\n</graphml>\n");
    Ok(out)
}

fn write_keys(out: &mut String, keys: &BTreeMap<KeyDef, String>, domain: &str) -> Result<(), GraphmlError> {
    for (def, id) in keys {
        xml_safe(&def.name).map_err(|reason| GraphmlError::Unrepresentable {
            owner: format!("{domain} key"),
            key: def.name.clone(),
            reason,
        })?;
        let _ = write!(out, "  <key id=\"{id}\" for=\"{domain}\" attr.name=\"");
        escape_into(out, &def.name, true);
        let _ = writeln!(out, "\" attr.type=\"{}\"/>", def.kind);
    }
    Ok(())
}

fn write_data(out: &mut String, key_id: &str, text: &str) {
    let _ = write!(out, "      <data key=\"{key_id}\">");
    escape_into(out, text, false);
    out.push_str("</data>\n");
}

fn write_node(out: &mut String, node: &GraphNode, keys: &BTreeMap<KeyDef, String>) -> Result<(), GraphmlError> {
    xml_safe(&node.id).map_err(|reason| GraphmlError::Unrepresentable {
        owner: format!("node {}", node.id),
        key: "id".into(),
        reason,
    })?;
    for label in &node.labels {
        if label.is_empty() || label.contains(LABEL_SEPARATOR) {
            return Err(GraphmlError::Unrepresentable {
                owner: format!("node {}", node.id),
                key: LABELS_KEY.into(),
                reason: format!("label {label:?} is empty or contains '{LABEL_SEPARATOR}'"),
            });
        }
        xml_safe(label).map_err(|reason| GraphmlError::Unrepresentable {
            owner: format!("node {}", node.id),
            key: LABELS_KEY.into(),
            reason,
        })?;
    }
    out.push_str("    <node id=\"");
    escape_into(out, &node.id, true);
    out.push_str("\">\n");
    write_data(out, LABELS_KEY, &node.labels.join(&LABEL_SEPARATOR.to_string()));
    for (k, v) in &node.properties {
        let text = value_text(&format!("node {}", node.id), k, v)?;
        let def = KeyDef {
            name: k.clone(),
            kind: v.type_name(),
        };
        write_data(out, &keys[&def], &text);
    }
    out.push_str("    </node>\n");
    Ok(())
}

fn write_edge(out: &mut String, i: usize, edge: &GraphEdge, keys: &BTreeMap<KeyDef, String>) -> Result<(), GraphmlError> {
    let owner = format!("edge {} -> {}", edge.source, edge.target);
    for (what, s) in [("source", &edge.source), ("target", &edge.target), (TYPE_KEY, &edge.edge_type)] {
        xml_safe(s).map_err(|reason| GraphmlError::Unrepresentable {
            owner: owner.clone(),
            key: what.into(),
            reason,
        })?;
    }
    let _ = write!(out, "    <edge id=\"e{i}\" source=\"");
    escape_into(out, &edge.source, true);
    out.push_str("\" target=\"");
    escape_into(out, &edge.target, true);
    out.push_str("\">\n");
    write_data(out, TYPE_KEY, &edge.edge_type);
    for (k, v) in &edge.properties {
        let text = value_text(&owner, k, v)?;
        let def = KeyDef {
            name: k.clone(),
            kind: v.type_name(),
        };
        write_data(out, &keys[&def], &text);
    }
    out.push_str("    </edge>\n");
    Ok(())
}

struct KeyInfo {
    name: String,
    kind: String,
}

/// Reads GraphML written by [`export_graphml`] or any file following the same key conventions.
pub fn import_graphml(text: &str) -> Result<PropertyGraph, GraphmlError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        GraphmlError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let is = |n: &roxmltree::Node, name: &str| n.is_element() && n.tag_name().name() == name;

    let mut keys: HashMap<String, KeyInfo> = HashMap::new();
    for k in doc.descendants().filter(|n| is(n, "key")) {
        let id = k.attribute("id").ok_or(GraphmlError::MissingAttribute {
            element: "key",
            attribute: "id",
        })?;
        keys.insert(
            id.to_string(),
            KeyInfo {
                name: k.attribute("attr.name").unwrap_or(id).to_string(),
                kind: k.attribute("attr.type").unwrap_or("string").to_string(),
            },
        );
    }
    let graph_el = doc.descendants().find(|n| is(n, "graph")).ok_or(GraphmlError::NoGraph)?;

    let mut graph = PropertyGraph::new();
    for n in graph_el.children().filter(|n| is(n, "node")) {
        let id = n.attribute("id").ok_or(GraphmlError::MissingAttribute {
            element: "node",
            attribute: "id",
        })?;
        let mut node = GraphNode::new(id, Vec::<String>::new());
        for d in n.children().filter(|c| is(c, "data")) {
            let (key, text) = data_parts(d)?;
            if key == LABELS_KEY {
                node.labels = text
                    .split(LABEL_SEPARATOR)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect();
                continue;
            }
            let info = keys.get(key).ok_or_else(|| GraphmlError::UnknownKey(key.to_string()))?;
            node.properties.insert(info.name.clone(), typed(info, text)?);
        }
        graph.add_node(node)?;
    }
    for e in graph_el.children().filter(|n| is(n, "edge")) {
        let attr = |a: &'static str| {
            e.attribute(a).ok_or(GraphmlError::MissingAttribute {
                element: "edge",
                attribute: a,
            })
        };
        let (source, target) = (attr("source")?, attr("target")?);
        let mut edge_type = None;
        let mut edge = GraphEdge::new(source, target, "");
        for d in e.children().filter(|c| is(c, "data")) {
            let (key, text) = data_parts(d)?;
            if key == TYPE_KEY {
                edge_type = Some(text.to_string());
                continue;
            }
            let info = keys.get(key).ok_or_else(|| GraphmlError::UnknownKey(key.to_string()))?;
            edge.properties.insert(info.name.clone(), typed(info, text)?);
        }
        edge.edge_type = edge_type.ok_or_else(|| GraphmlError::MissingEdgeType(format!("{source} -> {target}")))?;
        graph.add_edge(edge)?;
    }
    Ok(graph)
}

fn data_parts<'a>(d: roxmltree::Node<'a, '_>) -> Result<(&'a str, &'a str), GraphmlError> {
    let key = d.attribute("key").ok_or(GraphmlError::MissingAttribute {
        element: "data",
        attribute: "key",
    })?;
    Ok((key, d.text().unwrap_or("")))
}

fn typed(info: &KeyInfo, text: &str) -> Result<PropertyValue, GraphmlError> {
    let bad = || GraphmlError::BadValue {
        key: info.name.clone(),
        kind: info.kind.clone(),
        value: text.to_string(),
    };
    Ok(match info.kind.as_str() {
        "double" | "float" | "int" | "long" => PropertyValue::Num(text.trim().parse().map_err(|_| bad())?),
        "boolean" => match text.trim() {
            "true" => PropertyValue::Bool(true),
            "false" => PropertyValue::Bool(false),
            _ => return Err(bad()),
        },
        _ => PropertyValue::Str(text.to_string()),
    })
}
