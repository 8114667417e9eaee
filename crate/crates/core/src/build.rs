//! PidModel -> PropertyGraph.

use std::collections::HashSet;

use crate::graph::{edge_type, GraphEdge, GraphNode, PropertyGraph, PropertyValue};
use crate::model::{Diagnostic, DiagnosticCode, PidModel, PlantItem, SignalKind};
use crate::taxonomy::{lower_camel, Taxonomy};

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("duplicate item id {0}; validate the model first")]
    DuplicateId(String),
    #[error("unresolved reference to {id} ({context})")]
    Unresolved { id: String, context: String },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Fail on unresolved references instead of skipping the edge.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub graph: PropertyGraph,
    pub diagnostics: Vec<Diagnostic>,
}

/// Labels for an item: package, intermediate taxonomy tiers, lowerCamel class.
pub fn derive_labels(item: &PlantItem, taxonomy: &Taxonomy) -> Vec<String> {
    taxonomy.labels(&item.class_name, item.package)
}

/// Lenient build with the bundled taxonomy.
pub fn build_graph(model: &PidModel) -> Result<PropertyGraph, BuildError> {
    build_graph_with(model, Taxonomy::dexpi(), BuildOptions::default()).map(|o| o.graph)
}

pub fn build_graph_with(
    model: &PidModel,
    taxonomy: &Taxonomy,
    options: BuildOptions,
) -> Result<BuildOutput, BuildError> {
    let mut graph = PropertyGraph::new();
    for item in &model.items {
        let node = item_node(item, taxonomy);
        graph
            .add_node(node)
            .map_err(|_| BuildError::DuplicateId(item.id.clone()))?;
    }

    let mut diagnostics = Vec::new();
    let mut edges = EdgeSet::default();

    let index = model.index();
    for item in &model.items {
        for child in &item.children {
            match index.get(child.as_str()).map(|&i| &model.items[i]) {
                Some(c) => edges.push(GraphEdge::new(&item.id, child, edge_type::has(&c.class_name))),
                None => {
                    miss(options, &mut diagnostics, child, &format!("child of {}", item.id))?;
                }
            }
        }
    }
    for loc in &model.locations {
        if !graph.nodes.contains_key(&loc.item) || !graph.nodes.contains_key(&loc.location) {
            let missing = if graph.nodes.contains_key(&loc.item) { &loc.location } else { &loc.item };
            miss(options, &mut diagnostics, missing, "location")?;
            continue;
        }
        edges.push(GraphEdge::new(&loc.item, &loc.location, edge_type::IS_LOCATED_IN));
    }

    let lexical = lexical_edges(model);
    diagnostics.extend(lexical.diagnostics);
    for e in lexical.edges {
        let missing = [&e.source, &e.target]
            .into_iter()
            .find(|id| !graph.nodes.contains_key(id.as_str()))
            .cloned();
        if let Some(id) = missing {
            let context = format!("{} edge {} -> {}", e.edge_type, e.source, e.target);
            miss(options, &mut diagnostics, &id, &context)?;
            continue;
        }
        edges.push(e);
    }

    graph.edges = edges.edges;
    Ok(BuildOutput { graph, diagnostics })
}

fn miss(options: BuildOptions, diags: &mut Vec<Diagnostic>, id: &str, context: &str) -> Result<(), BuildError> {
    if options.strict {
        return Err(BuildError::Unresolved {
            id: id.to_string(),
            context: context.to_string(),
        });
    }
    diags.push(Diagnostic::error(
        DiagnosticCode::UnresolvedReference,
        Some(id),
        format!("unresolved reference in {context}; edge skipped"),
    ));
    Ok(())
}

fn item_node(item: &PlantItem, taxonomy: &Taxonomy) -> GraphNode {
    let mut node = GraphNode::new(&item.id, derive_labels(item, taxonomy))
        .with("className", item.class_name.as_str());
    if let Some(tag) = &item.tag {
        node = node.with("tagName", tag.as_str());
    }
    for attr in &item.attributes {
        let key = lower_camel(&attr.name);
        if key.is_empty() || node.properties.contains_key(&key) {
            continue;
        }
        if let Some(units) = &attr.units {
            node.properties
                .entry(format!("{key}Units"))
                .or_insert_with(|| PropertyValue::from(units.as_str()));
        }
        if let Some(uri) = &attr.value_uri {
            node.properties
                .entry(format!("{key}Uri"))
                .or_insert_with(|| PropertyValue::from(uri.as_str()));
        }
        node.properties.insert(key, PropertyValue::from_text(&attr.value));
    }
    for (key, value) in &item.geometry {
        node.properties
            .entry(key.clone())
            .or_insert_with(|| PropertyValue::from(value.as_str()));
    }
    node
}

#[derive(Debug, Clone, Default)]
pub struct LexicalEdges {
    pub edges: Vec<GraphEdge>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Flow, measurement, signal and control edges.
///
/// Each piping connection becomes a `send_to` chain through its ports:
/// `from -> from_port -> to_port -> to`.
pub fn lexical_edges(model: &PidModel) -> LexicalEdges {
    let mut edges = EdgeSet::default();
    let mut diagnostics = Vec::new();
    for c in &model.piping_connections {
        for pair in c.flow_path().windows(2) {
            edges.push(GraphEdge::new(pair[0], pair[1], edge_type::SEND_TO));
        }
    }
    for s in &model.signal_connections {
        let t = match s.kind {
            Some(SignalKind::Measurement) => edge_type::MEASURED_BY,
            Some(SignalKind::Signal) => edge_type::SEND_SIGNAL_TO,
            Some(SignalKind::Actuation) => edge_type::CONTROL,
            Some(SignalKind::LogicalEnd) => edge_type::IS_LOGICAL_END_OF,
            None => {
                diagnostics.push(Diagnostic::error(
                    DiagnosticCode::MissingSignalKind,
                    Some(&s.source),
                    format!("signal connection {} -> {} has no kind; edge skipped", s.source, s.target),
                ));
                continue;
            }
        };
        edges.push(GraphEdge::new(&s.source, &s.target, t));
    }
    LexicalEdges {
        edges: edges.edges,
        diagnostics,
    }
}

/// Insertion-ordered edge list without duplicate (source, target, type).
#[derive(Default)]
struct EdgeSet {
    seen: HashSet<(String, String, String)>,
    edges: Vec<GraphEdge>,
}

impl EdgeSet {
    fn push(&mut self, e: GraphEdge) {
        if e.source == e.target && e.edge_type == edge_type::SEND_TO {
            return;
        }
        let key = (e.source.clone(), e.target.clone(), e.edge_type.clone());
        if self.seen.insert(key) {
            self.edges.push(e);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Package, PipingConnection, SignalConnection};

    #[test]
    fn empty_model_empty_graph() {
        let g = build_graph(&PidModel::new()).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (0, 0));
    }

    #[test]
    fn attributes_become_properties() {
        let mut m = PidModel::new();
        m.push(
            PlantItem::new("C", "Chamber", Package::Equipment)
                .with_attribute("UpperLimitDesignPressure", "60", Some("Bar"))
                .with_attribute("SubTagNameAssignmentClass", "Chamber 1", None),
        );
        let g = build_graph(&m).unwrap();
        let p = &g.nodes["C"].properties;
        assert_eq!(p["upperLimitDesignPressure"], PropertyValue::Num(60.0));
        assert_eq!(p["upperLimitDesignPressureUnits"], PropertyValue::from("Bar"));
        assert_eq!(p["subTagNameAssignmentClass"], PropertyValue::from("Chamber 1"));
        assert_eq!(p["className"], PropertyValue::from("Chamber"));
    }

    #[test]
    fn straight_line_through_pipe() {
        let mut m = PidModel::new();
        m.push(PlantItem::new("T", "Tank", Package::Equipment));
        m.push(PlantItem::new("L", "Pipe", Package::Piping));
        m.push(PlantItem::new("P", "CentrifugalPump", Package::Equipment));
        m.piping_connections.push(PipingConnection::new("T", "L"));
        m.piping_connections.push(PipingConnection::new("L", "P"));
        let g = build_graph(&m).unwrap();
        let flows: Vec<(&str, &str)> = g
            .edges_of_type("send_to")
            .map(|e| (e.source.as_str(), e.target.as_str()))
            .collect();
        assert_eq!(flows, [("T", "L"), ("L", "P")]);
    }

    #[test]
    fn missing_signal_kind_is_skipped() {
        let mut m = PidModel::new();
        m.push(PlantItem::new("A", "ProcessInstrumentationFunction", Package::Instrumentation));
        m.push(PlantItem::new("B", "ActuatingFunction", Package::Instrumentation));
        m.signal_connections.push(SignalConnection {
            source: "A".into(),
            target: "B".into(),
            kind: None,
        });
        let lex = lexical_edges(&m);
        assert!(lex.edges.is_empty());
        assert_eq!(lex.diagnostics.len(), 1);
    }

    #[test]
    fn strict_build_names_missing_id() {
        let mut m = PidModel::new();
        m.push(PlantItem::new("T", "Tank", Package::Equipment));
        m.piping_connections.push(PipingConnection::new("T", "ghost"));
        let err = build_graph_with(&m, Taxonomy::dexpi(), BuildOptions { strict: true }).unwrap_err();
        assert!(err.to_string().contains("ghost"));
        let lenient = build_graph_with(&m, Taxonomy::dexpi(), BuildOptions::default()).unwrap();
        assert_eq!(lenient.graph.edge_count(), 0);
        assert_eq!(lenient.diagnostics.len(), 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut m = PidModel::new();
        m.push(PlantItem::new("X", "Tank", Package::Equipment));
        m.push(PlantItem::new("X", "Tank", Package::Equipment));
        assert!(matches!(build_graph(&m), Err(BuildError::DuplicateId(id)) if id == "X"));
    }
}
