//! Reduction of the complete graph to a compact high-level graph.
//!
//! 1. [`prune_structural`] drops connection nodes, folds non-tagged domain
//!    children into the retained node that owns them and re-stitches material
//!    flow across everything removed.
//! 2. [`collapse_chains`] replaces runs of property-less pass-through nodes by
//!    a single flow edge.
//! 3. [`strip_properties`] keeps only allowlisted properties.
//!
//! Every edge that bridges removed nodes carries a `via` property listing the
//! removed class names in flow order, separated by `;`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::graph::{edge_type, GraphEdge, PropertyGraph, PropertyValue};
use crate::io::graphml::{export_graphml, GraphmlError};
use crate::taxonomy::{lower_camel, Taxonomy};
use crate::tokens::estimate_tokens;

pub const VIA: &str = "via";
pub const VIA_SEPARATOR: &str = ";";

pub const RULE_PRUNED: &str = "prune_structural.pruned";
pub const RULE_FOLDED: &str = "prune_structural.folded";
pub const RULE_COLLAPSED: &str = "collapse_chains.collapsed";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondensationPolicy {
    pub retained_labels: BTreeSet<String>,
    pub prunable_labels: BTreeSet<String>,
    /// Case-insensitive glob patterns (`*` wildcard) over property keys.
    /// Folded keys (`chamber1.upperLimitDesignPressure`) match on the part
    /// after the last dot; `<key>Units` follows `<key>`.
    pub property_allowlist: Vec<String>,
}

impl Default for CondensationPolicy {
    fn default() -> Self {
        let taxonomy = Taxonomy::dexpi();
        let mut retained: BTreeSet<String> = ["valve", "instrumentationFunction", "pipeOffPageConnector"]
            .into_iter()
            .map(String::from)
            .collect();
        retained.extend(equipment_labels(taxonomy));
        let prunable = [
            "nozzle",
            "pipe",
            "flange",
            "reducer",
            "propertyBreak",
            "pipingNode",
            "pipingConnection",
            "pipingNetworkSegment",
            "pipingNetworkSystem",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        let allowlist = [
            "tagName",
            "className",
            "nominalDiameter*",
            "*designPressure*",
            "*designTemperature*",
            "*power*",
            "setPressure*",
            "failAction*",
            "description",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        CondensationPolicy {
            retained_labels: retained,
            prunable_labels: prunable,
            property_allowlist: allowlist,
        }
    }
}

/// Labels of main equipment classes: every equipment-package class that is
/// not a nozzle or an internal component, plus its intermediate tiers.
fn equipment_labels(taxonomy: &Taxonomy) -> BTreeSet<String> {
    const PARTS: [&str; 2] = ["nozzle", "equipmentComponent"];
    let mut out = BTreeSet::new();
    for class in taxonomy.classes() {
        let labels = taxonomy.labels(class, crate::model::Package::Equipment);
        if labels[0] != "equipment" || labels.iter().any(|l| PARTS.contains(&l.as_str())) {
            continue;
        }
        out.extend(labels.into_iter().skip(1));
    }
    out
}

impl CondensationPolicy {
    pub fn from_json(text: &str) -> Result<Self, CondenseError> {
        let policy: CondensationPolicy =
            serde_json::from_str(text).map_err(|e| CondenseError::PolicyFormat(e.to_string()))?;
        policy.check()?;
        Ok(policy)
    }

    pub fn check(&self) -> Result<(), CondenseError> {
        let overlap: Vec<String> = self
            .retained_labels
            .intersection(&self.prunable_labels)
            .cloned()
            .collect();
        if overlap.is_empty() {
            Ok(())
        } else {
            Err(CondenseError::PolicyOverlap(overlap))
        }
    }

    pub fn is_retained(&self, labels: &[String]) -> bool {
        labels.iter().any(|l| self.retained_labels.contains(l))
    }

    pub fn is_prunable(&self, labels: &[String]) -> bool {
        labels.iter().any(|l| self.prunable_labels.contains(l))
    }

    pub fn allows(&self, key: &str) -> bool {
        let base = key.rsplit('.').next().unwrap_or(key);
        let matches = |k: &str| self.property_allowlist.iter().any(|p| glob_match(p, k));
        matches(base) || base.strip_suffix("Units").is_some_and(|b| !b.is_empty() && matches(b))
    }
}

/// Case-insensitive match with `*` as the only wildcard.
fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.to_lowercase().chars().collect();
    let t: Vec<char> = text.to_lowercase().chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if pi < p.len() && p[pi] == t[ti] {
            pi += 1;
            ti += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

#[derive(Debug, thiserror::Error)]
pub enum CondenseError {
    #[error("policy lists labels as both retained and prunable: {}", .0.join(", "))]
    PolicyOverlap(Vec<String>),
    #[error("node {node} carries retained label {retained} and prunable label {prunable}")]
    Conflict {
        node: String,
        retained: String,
        prunable: String,
    },
    #[error("invalid policy file: {0}")]
    PolicyFormat(String),
    #[error("graph is not valid: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("cannot measure graph: {0}")]
    Export(#[from] GraphmlError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub step: String,
    pub nodes: usize,
    pub edges: usize,
    pub tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensationReport {
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub edges_before: usize,
    pub edges_after: usize,
    pub tokens_before: usize,
    pub tokens_after: usize,
    /// Counts after the input and after each step.
    pub steps: Vec<StepCounts>,
    pub removals: BTreeMap<String, Vec<String>>,
}

impl CondensationReport {
    pub fn node_reduction(&self) -> f64 {
        reduction(self.nodes_before, self.nodes_after)
    }

    pub fn edge_reduction(&self) -> f64 {
        reduction(self.edges_before, self.edges_after)
    }

    pub fn token_reduction(&self) -> f64 {
        reduction(self.tokens_before, self.tokens_after)
    }

    pub fn removed_count(&self) -> usize {
        self.removals.values().map(Vec::len).sum()
    }
}

fn reduction(before: usize, after: usize) -> f64 {
    if before == 0 {
        0.0
    } else {
        1.0 - after as f64 / before as f64
    }
}

/// Result of one step: the new graph and the node ids removed per rule.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub graph: PropertyGraph,
    pub removals: BTreeMap<String, Vec<String>>,
}

fn check_conflicts(graph: &PropertyGraph, policy: &CondensationPolicy) -> Result<(), CondenseError> {
    policy.check()?;
    for node in graph.nodes.values() {
        let retained = node.labels.iter().find(|l| policy.retained_labels.contains(*l));
        let prunable = node.labels.iter().find(|l| policy.prunable_labels.contains(*l));
        if let (Some(r), Some(p)) = (retained, prunable) {
            return Err(CondenseError::Conflict {
                node: node.id.clone(),
                retained: r.clone(),
                prunable: p.clone(),
            });
        }
    }
    Ok(())
}

/// Nodes that no step may remove.
fn protected(graph: &PropertyGraph, policy: &CondensationPolicy) -> HashSet<String> {
    let mut out: HashSet<String> = graph
        .nodes
        .values()
        .filter(|n| policy.is_retained(&n.labels) || n.tag().is_some())
        .map(|n| n.id.clone())
        .collect();
    for e in &graph.edges {
        if edge_type::CONTROL_LOOP.contains(&e.edge_type.as_str()) {
            out.insert(e.source.clone());
            out.insert(e.target.clone());
        }
    }
    out
}

fn class_of(graph: &PropertyGraph, id: &str) -> String {
    graph
        .node(id)
        .and_then(|n| n.class_name().map(str::to_string))
        .unwrap_or_else(|| id.to_string())
}

fn via_parts(e: &GraphEdge) -> Vec<String> {
    match e.properties.get(VIA).and_then(PropertyValue::as_str) {
        Some(v) if !v.is_empty() => v.split(VIA_SEPARATOR).map(str::to_string).collect(),
        _ => Vec::new(),
    }
}

/// Step 1.
pub fn prune_structural(graph: &PropertyGraph, policy: &CondensationPolicy) -> Result<StepOutput, CondenseError> {
    graph.validate()?;
    check_conflicts(graph, policy)?;
    let protected = protected(graph, policy);

    let pruned: BTreeSet<String> = graph
        .nodes
        .values()
        .filter(|n| policy.is_prunable(&n.labels) && !protected.contains(&n.id))
        .map(|n| n.id.clone())
        .collect();

    // Domain children that are neither protected nor connection nodes fold
    // into their nearest retained ancestor.
    let mut domain: HashMap<&str, Vec<&str>> = HashMap::new();
    for e in graph.edges.iter().filter(|e| edge_type::is_domain(&e.edge_type)) {
        domain.entry(e.source.as_str()).or_default().push(e.target.as_str());
    }
    for list in domain.values_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let mut folded: BTreeMap<String, String> = BTreeMap::new();
    for root in graph.nodes.values().filter(|n| policy.is_retained(&n.labels)) {
        let mut stack: Vec<&str> = domain.get(root.id.as_str()).cloned().unwrap_or_default();
        stack.reverse();
        while let Some(c) = stack.pop() {
            let node = &graph.nodes[c];
            if protected.contains(c) || policy.is_prunable(&node.labels) || folded.contains_key(c) {
                continue;
            }
            folded.insert(c.to_string(), root.id.clone());
            if let Some(next) = domain.get(c) {
                stack.extend(next.iter().rev());
            }
        }
    }

    let removed: HashSet<&str> = pruned
        .iter()
        .map(String::as_str)
        .chain(folded.keys().map(String::as_str))
        .collect();

    let mut out = PropertyGraph::new();
    for node in graph.nodes.values().filter(|n| !removed.contains(n.id.as_str())) {
        out.nodes.insert(node.id.clone(), node.clone());
    }
    merge_folded(graph, policy, &folded, &mut out);

    let mut edges = restitch(graph, &removed);
    let mut seen: HashSet<(String, String, String)> = edges
        .iter()
        .map(|e| (e.source.clone(), e.target.clone(), e.edge_type.clone()))
        .collect();
    for e in &graph.edges {
        if e.edge_type == edge_type::SEND_TO
            || removed.contains(e.source.as_str())
            || removed.contains(e.target.as_str())
        {
            continue;
        }
        if seen.insert((e.source.clone(), e.target.clone(), e.edge_type.clone())) {
            edges.push(e.clone());
        }
    }
    out.edges = edges;
    out.sort_edges();

    let mut removals = BTreeMap::new();
    removals.insert(RULE_PRUNED.to_string(), pruned.into_iter().collect());
    removals.insert(RULE_FOLDED.to_string(), folded.into_keys().collect());
    Ok(StepOutput { graph: out, removals })
}

fn merge_folded(
    graph: &PropertyGraph,
    policy: &CondensationPolicy,
    folded: &BTreeMap<String, String>,
    out: &mut PropertyGraph,
) {
    let mut per_root: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (child, root) in folded {
        per_root.entry(root.as_str()).or_default().push(child.as_str());
    }
    for (root, children) in per_root {
        let mut class_totals: HashMap<String, usize> = HashMap::new();
        for c in &children {
            *class_totals.entry(lower_camel(&class_of(graph, c))).or_default() += 1;
        }
        let mut class_seen: HashMap<String, usize> = HashMap::new();
        let Some(target) = out.nodes.get_mut(root) else { continue };
        for c in children {
            let class = lower_camel(&class_of(graph, c));
            let n = class_seen.entry(class.clone()).or_default();
            *n += 1;
            let prefix = if class_totals[&class] > 1 {
                format!("{class}{n}")
            } else {
                class
            };
            for (k, v) in &graph.nodes[c].properties {
                if k == "className" || k == "tagName" || !policy.allows(k) {
                    continue;
                }
                target
                    .properties
                    .entry(format!("{prefix}.{k}"))
                    .or_insert_with(|| v.clone());
            }
        }
    }
}

/// Flow edges between kept nodes, bridging over removed ones.
fn restitch(graph: &PropertyGraph, removed: &HashSet<&str>) -> Vec<GraphEdge> {
    let mut adj: HashMap<&str, Vec<&GraphEdge>> = HashMap::new();
    for e in graph.edges_of_type(edge_type::SEND_TO) {
        adj.entry(e.source.as_str()).or_default().push(e);
    }
    for list in adj.values_mut() {
        list.sort_by(|a, b| a.target.cmp(&b.target));
    }
    let kept: Vec<&str> = graph
        .nodes
        .keys()
        .map(String::as_str)
        .filter(|id| !removed.contains(id) && adj.contains_key(id))
        .collect();

    let from_one = |u: &str| -> Vec<GraphEdge> {
        let mut found: Vec<GraphEdge> = Vec::new();
        let mut reached: HashSet<&str> = HashSet::new();
        let mut visited: HashSet<&str> = HashSet::from([u]);
        let mut queue: VecDeque<(&str, Vec<String>)> = VecDeque::from([(u, Vec::new())]);
        while let Some((x, path)) = queue.pop_front() {
            for e in adj.get(x).map(Vec::as_slice).unwrap_or_default() {
                let w = e.target.as_str();
                let mut via = path.clone();
                via.extend(via_parts(e));
                if !removed.contains(w) {
                    if w == u || !reached.insert(w) {
                        continue;
                    }
                    let mut edge = if x == u { (*e).clone() } else { GraphEdge::new(u, w, edge_type::SEND_TO) };
                    if via.is_empty() {
                        edge.properties.remove(VIA);
                    } else {
                        edge.properties.insert(VIA.into(), PropertyValue::Str(via.join(VIA_SEPARATOR)));
                    }
                    found.push(edge);
                } else if visited.insert(w) {
                    via.push(class_of(graph, w));
                    queue.push_back((w, via));
                }
            }
        }
        found
    };

    #[cfg(feature = "parallel")]
    let per_node: Vec<Vec<GraphEdge>> = {
        use rayon::prelude::*;
        kept.par_iter().map(|u| from_one(u)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_node: Vec<Vec<GraphEdge>> = kept.iter().map(|u| from_one(u)).collect();

    per_node.into_iter().flatten().collect()
}

/// Step 2.
pub fn collapse_chains(graph: &PropertyGraph, policy: &CondensationPolicy) -> StepOutput {
    let mut g = graph.clone();
    let mut collapsed = Vec::new();
    let protected = protected(graph, policy);

    let eligible = |g: &PropertyGraph, id: &str| -> Option<(usize, usize)> {
        let node = g.node(id)?;
        if protected.contains(id)
            || policy.is_retained(&node.labels)
            || node.properties.keys().any(|k| k != "className" && policy.allows(k))
        {
            return None;
        }
        let mut incoming = None;
        let mut outgoing = None;
        for (i, e) in g.edges.iter().enumerate() {
            if e.source != id && e.target != id {
                continue;
            }
            if e.edge_type != edge_type::SEND_TO || e.source == e.target {
                return None;
            }
            let slot = if e.target == id { &mut incoming } else { &mut outgoing };
            if slot.replace(i).is_some() {
                return None;
            }
        }
        let (i, o) = (incoming?, outgoing?);
        (g.edges[i].source != g.edges[o].target).then_some((i, o))
    };

    let mut queue: BTreeSet<String> = g.nodes.keys().cloned().collect();
    while let Some(id) = queue.pop_first() {
        let Some((i, o)) = eligible(&g, &id) else { continue };
        let (inc, out) = (g.edges[i].clone(), g.edges[o].clone());
        let mut via = via_parts(&inc);
        via.push(class_of(&g, &id));
        via.extend(via_parts(&out));
        g.edges.retain(|e| e.source != id && e.target != id);
        g.nodes.remove(&id);
        let exists = g
            .edges
            .iter()
            .any(|e| e.source == inc.source && e.target == out.target && e.edge_type == edge_type::SEND_TO);
        if !exists {
            g.edges.push(
                GraphEdge::new(&inc.source, &out.target, edge_type::SEND_TO)
                    .with(VIA, via.join(VIA_SEPARATOR)),
            );
        }
        queue.insert(inc.source.clone());
        queue.insert(out.target.clone());
        collapsed.push(id);
    }
    g.sort_edges();
    collapsed.sort();
    StepOutput {
        graph: g,
        removals: BTreeMap::from([(RULE_COLLAPSED.to_string(), collapsed)]),
    }
}

/// Step 3.
pub fn strip_properties(graph: &PropertyGraph, policy: &CondensationPolicy) -> PropertyGraph {
    let mut g = graph.clone();
    for node in g.nodes.values_mut() {
        node.properties.retain(|k, _| policy.allows(k));
    }
    for edge in &mut g.edges {
        edge.properties.retain(|k, _| k == VIA);
    }
    g
}

fn counts(step: &str, graph: &PropertyGraph) -> Result<StepCounts, CondenseError> {
    Ok(StepCounts {
        step: step.to_string(),
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        tokens: estimate_tokens(&export_graphml(graph)?).token_count,
    })
}

/// Runs the three steps in order and measures each on its GraphML text.
pub fn condense(
    graph: &PropertyGraph,
    policy: &CondensationPolicy,
) -> Result<(PropertyGraph, CondensationReport), CondenseError> {
    let mut steps = vec![counts("input", graph)?];
    let s1 = prune_structural(graph, policy)?;
    steps.push(counts("prune_structural", &s1.graph)?);
    let s2 = collapse_chains(&s1.graph, policy);
    steps.push(counts("collapse_chains", &s2.graph)?);
    let high = strip_properties(&s2.graph, policy);
    steps.push(counts("strip_properties", &high)?);

    let mut removals = s1.removals;
    removals.extend(s2.removals);
    let (first, last) = (&steps[0], &steps[steps.len() - 1]);
    let report = CondensationReport {
        nodes_before: first.nodes,
        nodes_after: last.nodes,
        edges_before: first.edges,
        edges_after: last.edges,
        tokens_before: first.tokens,
        tokens_after: last.tokens,
        steps,
        removals,
    };
    Ok((high, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphNode;

    #[test]
    fn glob() {
        assert!(glob_match("*designPressure*", "upperLimitDesignPressure"));
        assert!(glob_match("setPressure*", "setPressureHigh"));
        assert!(glob_match("tagName", "TAGNAME"));
        assert!(!glob_match("tagName", "tagNames"));
        assert!(glob_match("*", ""));
        assert!(!glob_match("a*b", "ac"));
        assert!(glob_match("a*b*c", "axxbyyc"));
    }

    #[test]
    fn allowlist_handles_units_and_prefixes() {
        let p = CondensationPolicy::default();
        assert!(p.allows("upperLimitDesignPressureUnits"));
        assert!(p.allows("chamber1.upperLimitDesignPressure"));
        assert!(p.allows("controlledActuator.failActionSpecialization"));
        assert!(!p.allows("locationX"));
        assert!(!p.allows("Units"));
    }

    #[test]
    fn default_policy_is_consistent() {
        let p = CondensationPolicy::default();
        p.check().unwrap();
        for l in ["pump", "reciprocatingPump", "vessel", "tank", "heatExchanger", "valve"] {
            assert!(p.retained_labels.contains(l), "{l}");
        }
        assert!(!p.retained_labels.contains("nozzle"));
        assert!(!p.retained_labels.contains("equipment"));
        let back = CondensationPolicy::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn overlap_is_a_configuration_error() {
        let mut p = CondensationPolicy::default();
        p.prunable_labels.insert("valve".into());
        assert!(matches!(p.check(), Err(CondenseError::PolicyOverlap(_))));
    }

    #[test]
    fn conflicting_node_is_rejected() {
        let mut p = CondensationPolicy::default();
        p.retained_labels.insert("special".into());
        let mut g = PropertyGraph::new();
        g.add_node(GraphNode::new("x", ["piping", "special", "pipe"])).unwrap();
        assert!(matches!(prune_structural(&g, &p), Err(CondenseError::Conflict { .. })));
    }

    fn chain(middle: &[(&str, &[&str])]) -> PropertyGraph {
        let mut g = PropertyGraph::new();
        g.add_node(GraphNode::new("a", ["equipment", "vessel", "tank"]).with("className", "Tank")).unwrap();
        g.add_node(GraphNode::new("b", ["equipment", "pump", "centrifugalPump"]).with("className", "CentrifugalPump"))
            .unwrap();
        let mut prev = "a".to_string();
        for (id, labels) in middle {
            let class = labels.last().unwrap();
            g.add_node(GraphNode::new(*id, labels.iter().copied()).with("className", *class)).unwrap();
            g.add_edge(GraphEdge::new(&prev, *id, "send_to")).unwrap();
            prev = id.to_string();
        }
        g.add_edge(GraphEdge::new(&prev, "b", "send_to")).unwrap();
        g
    }

    #[test]
    fn connection_nodes_are_bridged() {
        let g = chain(&[
            ("n1", &["equipment", "nozzle"]),
            ("p", &["piping", "pipe"]),
            ("n2", &["equipment", "nozzle"]),
        ]);
        let out = prune_structural(&g, &CondensationPolicy::default()).unwrap().graph;
        assert_eq!(out.node_count(), 2);
        assert_eq!(out.edges.len(), 1);
        let e = &out.edges[0];
        assert_eq!((e.source.as_str(), e.target.as_str()), ("a", "b"));
        assert_eq!(e.properties[VIA], PropertyValue::from("nozzle;pipe;nozzle"));
    }

    #[test]
    fn chains_collapse_with_ordered_via() {
        let g = chain(&[("x", &["piping", "coupling"]), ("y", &["piping", "strainer"])]);
        let out = collapse_chains(&g, &CondensationPolicy::default());
        assert_eq!(out.graph.edges.len(), 1);
        assert_eq!(out.graph.edges[0].properties[VIA], PropertyValue::from("coupling;strainer"));
        assert_eq!(out.removals[RULE_COLLAPSED], ["x", "y"]);
    }

    #[test]
    fn informative_nodes_block_collapse() {
        let mut g = chain(&[("x", &["piping", "coupling"])]);
        g.nodes.get_mut("x").unwrap().properties.insert("designPressure".into(), 6.0.into());
        let out = collapse_chains(&g, &CondensationPolicy::default());
        assert_eq!(out.graph.node_count(), 3);
    }

    #[test]
    fn strip_keeps_allowlist() {
        let mut g = PropertyGraph::new();
        g.add_node(
            GraphNode::new("t", ["equipment", "tank"])
                .with("tagName", "T1")
                .with("xCoordinate", 1.0)
                .with("styleRef", "s"),
        )
        .unwrap();
        let out = strip_properties(&g, &CondensationPolicy::default());
        assert_eq!(out.nodes["t"].properties.keys().collect::<Vec<_>>(), ["tagName"]);
    }
}
