//! Facts about the bundled reference P&ID, checked against oracles that read
//! the XML text directly.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::Instant;

use pidrag::condense::CondensationPolicy;
use pidrag::eval::{find_inlets, tags_with_label, trace_flow, TraceStep};
use pidrag::graph::edge_type;
use pidrag::{build_graph, condense, export_graphml, parse_dexpi, PropertyGraph};
use regex::Regex;
use serde_json::Value;

const SAMPLE: &str = include_str!("../../../fixtures/reference/C01V04-VER.EX01.xml");

fn golden(name: &str) -> Value {
    let path = format!("{}/../../fixtures/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn graphs() -> (PropertyGraph, PropertyGraph) {
    let out = parse_dexpi(SAMPLE).unwrap();
    let g = build_graph(&out.model).unwrap();
    let (h, _) = condense(&g, &CondensationPolicy::default()).unwrap();
    (g, h)
}

fn attr<'a>(re: &Regex, tag: &'a str) -> Option<&'a str> {
    re.captures(tag).map(|c| c.get(1).unwrap().as_str())
}

/// ComponentClass -> number of start tags carrying both an ID and that class.
fn class_counts_from_text(text: &str) -> BTreeMap<String, usize> {
    let tag = Regex::new(r"<[A-Za-z]+\b[^>]*>").unwrap();
    let id = Regex::new(r#"\sID="([^"]*)""#).unwrap();
    let class = Regex::new(r#"\sComponentClass="([^"]*)""#).unwrap();
    let mut counts = BTreeMap::new();
    for m in tag.find_iter(text) {
        let t = m.as_str();
        if let (Some(_), Some(c)) = (attr(&id, t), attr(&class, t)) {
            *counts.entry(c.to_string()).or_insert(0) += 1;
        }
    }
    counts
}

#[test]
fn parse_and_build_within_time_and_size_window() {
    let start = Instant::now();
    let out = parse_dexpi(SAMPLE).unwrap();
    let g = build_graph(&out.model).unwrap();
    assert!(start.elapsed().as_secs_f64() < 5.0);
    let (n, e) = (g.node_count() as f64, g.edge_count() as f64);
    assert!((n - 212.0).abs() <= 0.2 * 212.0, "nodes {n}");
    assert!((e - 405.0).abs() <= 0.2 * 405.0, "edges {e}");
    assert_eq!(g.node_count(), out.model.items.len());
}

#[test]
fn item_counts_match_text_oracle() {
    let out = parse_dexpi(SAMPLE).unwrap();
    let text_counts = class_counts_from_text(SAMPLE);
    let mut model_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for item in &out.model.items {
        *model_counts.entry(item.class_name.as_str()).or_default() += 1;
    }
    for (class, n) in &model_counts {
        match text_counts.get(*class) {
            Some(t) => assert_eq!(n, t, "{class}"),
            None => assert!(
                ["PipingNode", "Pipe", "DirectPipingConnection"].contains(class),
                "{class} is neither in the document nor synthesized"
            ),
        }
    }
    // Every classed element except presentation and metadata becomes an item.
    for (class, t) in &text_counts {
        if class.ends_with("Label") || class == "MetaData" {
            continue;
        }
        assert_eq!(model_counts.get(class.as_str()), Some(t), "{class}");
    }
    // Process-type nodes become PipingNode items one for one.
    let process_nodes = Regex::new(r#"<Node\b[^>]*Type="process""#).unwrap().find_iter(SAMPLE).count();
    assert_eq!(out.model.count_class("PipingNode"), process_nodes);
}

#[test]
fn equipment_inventory_and_schema() {
    let out = parse_dexpi(SAMPLE).unwrap();
    assert_eq!(out.model.metadata["schemaVersion"], "4.1.1");
    let m = &out.model;
    assert_eq!(m.count_class("Tank"), 1);
    assert_eq!(m.count_class("CentrifugalPump") + m.count_class("ReciprocatingPump"), 2);
    assert_eq!(m.count_class("PlateHeatExchanger") + m.count_class("TubularHeatExchanger"), 2);
    let pump = m.items.iter().find(|i| i.tag.as_deref() == Some("P4712")).unwrap();
    assert_eq!(pump.class_name, "ReciprocatingPump");
    let kinds: BTreeSet<&str> = pump
        .children
        .iter()
        .map(|c| m.item(c).unwrap().class_name.as_str())
        .collect();
    assert_eq!(pump.children.len(), 4);
    assert_eq!(kinds, BTreeSet::from(["Chamber", "Displacer", "Nozzle"]));
}

#[test]
fn every_piping_connection_flows_from_source_to_target() {
    let (g, _) = graphs();
    // Connections inside information flows are drawing links, not material flow.
    let segment = Regex::new(r"(?s)<PipingNetworkSegment\b.*?</PipingNetworkSegment>").unwrap();
    let conn = Regex::new(r"<Connection\b[^>]*>").unwrap();
    let from = Regex::new(r#"\sFromID="([^"]*)""#).unwrap();
    let to = Regex::new(r#"\sToID="([^"]*)""#).unwrap();
    let mut checked = 0;
    for m in segment.find_iter(SAMPLE).flat_map(|s| conn.find_iter(s.as_str())) {
        let (Some(f), Some(t)) = (attr(&from, m.as_str()), attr(&to, m.as_str())) else {
            continue;
        };
        let reach = g.reachable(f, edge_type::SEND_TO);
        assert!(reach.contains(t), "{f} does not reach {t}");
        checked += 1;
    }
    assert!(checked >= 15, "{checked}");
}

fn bfs_order(g: &PropertyGraph, start: &str) -> Vec<String> {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in g.edges.iter().filter(|e| e.edge_type == edge_type::SEND_TO) {
        adj.entry(e.source.as_str()).or_default().push(e.target.as_str());
    }
    let mut dist: HashMap<&str, usize> = HashMap::from([(start, 0)]);
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        for &m in adj.get(n).into_iter().flatten() {
            if !dist.contains_key(m) {
                dist.insert(m, dist[n] + 1);
                queue.push_back(m);
            }
        }
    }
    let mut eq: Vec<(usize, &str)> = g
        .with_label("equipment")
        .filter_map(|n| Some((*dist.get(n.id.as_str())?, n.tag()?)))
        .collect();
    eq.sort();
    eq.into_iter().map(|(_, t)| t.to_string()).collect()
}

#[test]
fn equipment_sequence_matches_golden_and_distance_oracle() {
    let (g, h) = graphs();
    let gold = golden("trace_reference.json");
    let expected: Vec<String> = serde_json::from_value(gold["equipment_sequence"].clone()).unwrap();
    let inlet = gold["inlet"].as_str().unwrap();
    assert_eq!(bfs_order(&g, inlet), expected);
    for graph in [&g, &h] {
        let trace = trace_flow(graph, inlet).unwrap();
        assert_eq!(trace.tags_with_label(graph, "equipment"), expected);
        assert!(trace.visits().contains(&gold["outlet"].as_str().unwrap()));
    }
    assert_eq!(find_inlets(&h), [inlet]);
    let steps: Vec<TraceStep> = serde_json::from_value(gold["trace"].clone()).unwrap();
    assert_eq!(trace_flow(&h, inlet).unwrap().steps, steps);
}

#[test]
fn valve_sets_agree_across_levels() {
    let (g, h) = graphs();
    let gold = golden("valves_reference.json");
    let expected: BTreeSet<String> = serde_json::from_value(gold["tags"].clone()).unwrap();
    assert_eq!(expected.len(), 11);
    assert_eq!(tags_with_label(&g, "valve"), expected);
    assert_eq!(tags_with_label(&h, "valve"), expected);
}

#[test]
fn condensation_hits_reduction_and_token_windows() {
    let (g, _) = graphs();
    let (_, r) = condense(&g, &CondensationPolicy::default()).unwrap();
    assert!(r.node_reduction() >= 0.70, "{}", r.node_reduction());
    assert!(r.edge_reduction() >= 0.80, "{}", r.edge_reduction());
    assert!(r.token_reduction() >= 0.80, "{}", r.token_reduction());
    let within = |v: usize, target: f64| (v as f64 - target).abs() <= 0.3 * target;
    assert!(within(r.tokens_before, 67_000.0), "{}", r.tokens_before);
    assert!(within(r.tokens_after, 9_000.0), "{}", r.tokens_after);
    // Reported tokens are those of the exported GraphML.
    assert_eq!(r.tokens_before, export_graphml(&g).unwrap().chars().count().div_ceil(4));
}

#[test]
fn control_loops_survive_condensation() {
    let (g, h) = graphs();
    for t in edge_type::CONTROL_LOOP {
        let before = g.edges_of_type(t).count();
        assert!(before > 0, "{t}");
        assert_eq!(h.edges_of_type(t).count(), before, "{t}");
    }
    let fail_actions = h
        .nodes
        .values()
        .flat_map(|n| n.properties.keys())
        .filter(|k| k.ends_with("failActionSpecialization"))
        .count();
    assert_eq!(fail_actions, 3);
}
