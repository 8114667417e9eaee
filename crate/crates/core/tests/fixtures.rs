//! Behaviour on the small hand-written documents.

use pidrag::condense::CondensationPolicy;
use pidrag::graph::edge_type;
use pidrag::model::Severity;
use pidrag::{build_graph, condense, parse_dexpi, parse_dexpi_with, ParseOptions, PropertyGraph, PropertyValue};

fn doc(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../fixtures/dexpi/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn graphs(name: &str) -> (PropertyGraph, PropertyGraph) {
    let out = parse_dexpi(&doc(name)).unwrap();
    assert!(out.diagnostics.iter().all(|d| d.severity != Severity::Error), "{name}");
    let g = build_graph(&out.model).unwrap();
    let (h, _) = condense(&g, &CondensationPolicy::default()).unwrap();
    (g, h)
}

fn edge(g: &PropertyGraph, s: &str, t: &str, kind: &str) -> bool {
    g.edges.iter().any(|e| e.source == s && e.target == t && e.edge_type == kind)
}

#[test]
fn single_tank() {
    let (g, h) = graphs("minimal_tank.xml");
    assert_eq!(g.node_count(), 1);
    assert_eq!(g.edge_count(), 0);
    let tank = h.node("Tank-1").unwrap();
    assert_eq!(tank.tag(), Some("T1"));
    assert_eq!(tank.labels, ["equipment", "vessel", "tank"]);
}

#[test]
fn pump_owns_its_parts_and_keeps_chamber_ratings() {
    let (g, h) = graphs("pump_fragment.xml");
    let pump = "ReciprocatingPump-1";
    for (child, kind) in [
        ("Nozzle-1", "has_Nozzle"),
        ("Nozzle-2", "has_Nozzle"),
        ("Chamber-1", "has_Chamber"),
        ("Displacer-1", "has_Displacer"),
    ] {
        assert!(edge(&g, pump, child, kind), "{kind}");
    }
    assert!(edge(&g, "Nozzle-1", pump, edge_type::SEND_TO));
    assert!(edge(&g, pump, "Nozzle-2", edge_type::SEND_TO));

    let ids: Vec<&str> = h.nodes.keys().map(String::as_str).collect();
    assert_eq!(ids, ["In-1", "Out-1", pump]);
    assert!(edge(&h, "In-1", pump, edge_type::SEND_TO));
    assert!(edge(&h, pump, "Out-1", edge_type::SEND_TO));
    let p = &h.node(pump).unwrap().properties;
    assert_eq!(p["tagName"], PropertyValue::from_text("P4712"));
    assert_eq!(p["chamber.upperLimitDesignPressure"], PropertyValue::from_text("60"));
    assert_eq!(p["chamber.upperLimitDesignPressureUnits"], PropertyValue::from_text("Bar"));
}

#[test]
fn control_loop_edges() {
    let (g, h) = graphs("control_loop.xml");
    let loop_edges = [
        ("Tank-1", "ProcessSignalGeneratingFunction-1", edge_type::MEASURED_BY),
        ("ProcessSignalGeneratingFunction-1", "ProcessInstrumentationFunction-1", edge_type::SEND_SIGNAL_TO),
        ("ProcessInstrumentationFunction-1", "ActuatingFunction-1", edge_type::SEND_SIGNAL_TO),
        ("ActuatingFunction-1", "GlobeValve-1", edge_type::CONTROL),
    ];
    for graph in [&g, &h] {
        for (s, t, k) in loop_edges {
            assert!(edge(graph, s, t, k), "{s} -{k}-> {t}");
        }
    }
    let af = h.node("ActuatingFunction-1").unwrap();
    assert_eq!(af.tag(), Some("TV4750.03"));
    assert_eq!(
        af.properties["controlledActuator.failActionSpecialization"],
        PropertyValue::from_text("FailOpen")
    );
    assert_eq!(h.node("ProcessInstrumentationFunction-1").unwrap().tag(), Some("TICSA4750.03"));
    assert_eq!(h.node("GlobeValve-1").unwrap().tag(), Some("47141-C1"));
    assert!(edge(&h, "In-1", "GlobeValve-1", edge_type::SEND_TO));
    assert!(edge(&h, "GlobeValve-1", "Tank-1", edge_type::SEND_TO));
}

#[test]
fn duplicate_ids_are_reported_and_rejected_when_strict() {
    let text = doc("duplicate_ids.xml");
    let out = parse_dexpi(&text).unwrap();
    assert!(out.diagnostics.iter().any(|d| d.severity == Severity::Error && d.message.contains("Tank-1")));
    assert!(build_graph(&out.model).is_err());
    assert!(parse_dexpi_with(&text, ParseOptions { strict: true }).is_err());
}

#[test]
fn dangling_connection_is_a_diagnostic() {
    let text = doc("unresolved_connection.xml");
    let out = parse_dexpi(&text).unwrap();
    assert!(out.diagnostics.iter().any(|d| d.message.contains("Ghost-9")));
    let g = build_graph(&out.model).unwrap();
    assert!(g.node("Ghost-9").is_none());
    assert!(parse_dexpi_with(&text, ParseOptions { strict: true }).is_err());
}

#[test]
fn not_xml_is_an_error() {
    assert!(parse_dexpi("this is not xml").is_err());
    assert!(parse_dexpi("<NotAPlant/>").is_err());
}

#[test]
fn signal_flow_without_kind_is_skipped_with_one_diagnostic() {
    use pidrag::build::{build_graph_with, BuildOptions};
    use pidrag::model::DiagnosticCode;
    use pidrag::taxonomy::Taxonomy;

    let out = parse_dexpi(&doc("missing_signal_kind.xml")).unwrap();
    assert_eq!(out.model.signal_connections.len(), 1);
    assert_eq!(out.model.signal_connections[0].kind, None);
    let built = build_graph_with(&out.model, Taxonomy::dexpi(), BuildOptions::default()).unwrap();
    assert_eq!(built.graph.edges.len(), 0);
    assert_eq!(built.diagnostics.len(), 1);
    assert_eq!(built.diagnostics[0].code, DiagnosticCode::MissingSignalKind);
}
