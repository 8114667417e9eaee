//! Invariants of condensation, serialization and prompt assembly over
//! synthetic models and every bundled fixture.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::path::PathBuf;

use pidrag::chat::{build_prompt, new_session, prompt_tokens, ChatMessage, ChatSession, DEFAULT_SYSTEM_TEMPLATE};
use pidrag::condense::CondensationPolicy;
use pidrag::graph::edge_type;
use pidrag::io::{export_json, import_json};
use pidrag::synth::{synth_dexpi, SynthParams};
use pidrag::{build_graph, condense, export_graphml, import_graphml, parse_dexpi, PropertyGraph};
use proptest::prelude::*;

fn complete_and_high(doc: &str) -> (PropertyGraph, PropertyGraph) {
    let out = parse_dexpi(doc).unwrap();
    let g = build_graph(&out.model).unwrap();
    let (h, _) = condense(&g, &CondensationPolicy::default()).unwrap();
    (g, h)
}

fn bfs(g: &PropertyGraph, start: &str) -> HashSet<String> {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in &g.edges {
        if e.edge_type == edge_type::SEND_TO {
            adj.entry(&e.source).or_default().push(&e.target);
        }
    }
    let mut seen = HashSet::new();
    let mut queue: VecDeque<&str> = adj.get(start).cloned().unwrap_or_default().into();
    while let Some(n) = queue.pop_front() {
        if seen.insert(n.to_string()) {
            queue.extend(adj.get(n).into_iter().flatten());
        }
    }
    seen
}

fn fixture_docs() -> Vec<(PathBuf, String)> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let mut docs = Vec::new();
    for dir in ["dexpi", "reference"] {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(root.join(dir))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "xml"))
            .collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p).unwrap();
            docs.push((p, text));
        }
    }
    docs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn condensation_preserves_reachability(seed in any::<u64>(), scale in 1usize..3) {
        let (g, h) = complete_and_high(&synth_dexpi(&SynthParams::scaled(seed, scale)));
        for u in h.nodes.keys() {
            let full: BTreeSet<String> = bfs(&g, u).into_iter().filter(|v| h.nodes.contains_key(v)).collect();
            let kept: BTreeSet<String> = bfs(&h, u).into_iter().collect();
            prop_assert_eq!(full, kept, "from {}", u);
        }
    }

    #[test]
    fn condensation_is_idempotent(seed in any::<u64>()) {
        let (_, h) = complete_and_high(&synth_dexpi(&SynthParams::new(seed)));
        let (again, report) = condense(&h, &CondensationPolicy::default()).unwrap();
        prop_assert_eq!(export_graphml(&again).unwrap(), export_graphml(&h).unwrap());
        prop_assert_eq!(report.removed_count(), 0);
    }

    #[test]
    fn export_is_deterministic(seed in any::<u64>()) {
        let doc = synth_dexpi(&SynthParams::new(seed));
        let (g1, h1) = complete_and_high(&doc);
        let (g2, h2) = complete_and_high(&doc);
        prop_assert_eq!(export_graphml(&g1).unwrap(), export_graphml(&g2).unwrap());
        prop_assert_eq!(export_graphml(&h1).unwrap(), export_graphml(&h2).unwrap());
        prop_assert_eq!(export_json(&h1), export_json(&h2));
    }

    #[test]
    fn synthetic_graphs_round_trip(seed in any::<u64>()) {
        let (g, h) = complete_and_high(&synth_dexpi(&SynthParams::new(seed)));
        for graph in [&g, &h] {
            let xml = export_graphml(graph).unwrap();
            let back = import_graphml(&xml).unwrap();
            prop_assert!(back.same_as(graph));
            prop_assert_eq!(export_graphml(&back).unwrap(), xml);
            prop_assert!(import_json(&export_json(graph)).unwrap().same_as(graph));
        }
    }

    #[test]
    fn edge_types_stay_in_vocabulary(seed in any::<u64>()) {
        let (g, h) = complete_and_high(&synth_dexpi(&SynthParams::new(seed)));
        for e in g.edges.iter().chain(&h.edges) {
            prop_assert!(edge_type::is_known(&e.edge_type), "{}", e.edge_type);
        }
    }

    #[test]
    fn prompt_never_exceeds_budget(
        pairs in prop::collection::vec(("[a-z ]{1,400}", "[a-z ]{1,400}"), 0..12),
        question in "[a-z?]{1,200}",
        slack in 0usize..600,
    ) {
        let mut g = PropertyGraph::new();
        g.add_node(pidrag::GraphNode::new("T1", ["equipment", "tank"]).with("tagName", "T1")).unwrap();
        let base = new_session(&g, DEFAULT_SYSTEM_TEMPLATE, usize::MAX).unwrap();
        // Independent count: four characters per token, rounded up.
        let oracle = |s: &str| s.chars().count().div_ceil(4);
        let budget = oracle(&base.system_prompt) + oracle(&question) + slack;
        let mut history = Vec::new();
        for (q, a) in &pairs {
            history.push(ChatMessage::user(q.as_str()));
            history.push(ChatMessage::assistant(a.as_str()));
        }
        let session = ChatSession { history: history.clone(), token_budget: budget, ..base };
        let prompt = build_prompt(&session, &question).unwrap();
        let used: usize = prompt.iter().map(|m| oracle(&m.content)).sum();
        prop_assert_eq!(used, prompt_tokens(&prompt));
        prop_assert!(used <= budget);
        // Kept history is a suffix of whole pairs, and no further pair would fit.
        let kept = prompt.len() - 2;
        prop_assert_eq!(kept % 2, 0);
        prop_assert_eq!(&prompt[1..=kept], &history[history.len() - kept..]);
        if kept < history.len() {
            let next: usize = history[history.len() - kept - 2..history.len() - kept].iter().map(|m| oracle(&m.content)).sum();
            prop_assert!(used + next > budget);
        }
    }
}

#[test]
fn fixtures_round_trip_through_graphml() {
    let mut checked = 0;
    for (path, doc) in fixture_docs() {
        let Ok(out) = parse_dexpi(&doc) else { continue };
        let Ok(g) = build_graph(&out.model) else { continue };
        let (h, _) = condense(&g, &CondensationPolicy::default()).unwrap();
        for graph in [&g, &h] {
            let xml = export_graphml(graph).unwrap();
            let back = import_graphml(&xml).unwrap();
            assert!(back.same_as(graph), "{}", path.display());
            assert_eq!(export_graphml(&back).unwrap(), xml, "{}", path.display());
        }
        checked += 1;
    }
    assert!(checked >= 5);
}

#[test]
fn reference_condensation_preserves_reachability() {
    let (_, doc) = fixture_docs().pop().unwrap();
    let (g, h) = complete_and_high(&doc);
    for u in h.nodes.keys() {
        let full: BTreeSet<String> = bfs(&g, u).into_iter().filter(|v| h.nodes.contains_key(v)).collect();
        let kept: BTreeSet<String> = bfs(&h, u).into_iter().collect();
        assert_eq!(full, kept, "from {u}");
    }
}
