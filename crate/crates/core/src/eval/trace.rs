//! Depth-first process trace over material-flow edges.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{edge_type, PropertyGraph};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceStep {
    Visit {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
    /// Flow splits; each path is traced in successor-id order.
    Branch { paths: Vec<Vec<TraceStep>> },
    /// Flow returns to a node on the current path (recycle).
    Loop {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
    /// Flow merges into a node already traced on another branch.
    Join {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tag: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub inlet: String,
    pub steps: Vec<TraceStep>,
}

impl FlowTrace {
    /// Visited node ids in depth-first order.
    pub fn visits(&self) -> Vec<&str> {
        let mut out = Vec::new();
        walk(&self.steps, &mut |s| {
            if let TraceStep::Visit { id, .. } = s {
                out.push(id.as_str());
            }
        });
        out
    }

    /// Tags of visited nodes in depth-first order; untagged nodes are skipped.
    pub fn tags(&self) -> Vec<&str> {
        let mut out = Vec::new();
        walk(&self.steps, &mut |s| {
            if let TraceStep::Visit { tag: Some(t), .. } = s {
                out.push(t.as_str());
            }
        });
        out
    }

    /// Tags of visited nodes carrying `label`, in trace order.
    pub fn tags_with_label(&self, graph: &PropertyGraph, label: &str) -> Vec<String> {
        let mut out = Vec::new();
        walk(&self.steps, &mut |s| {
            if let TraceStep::Visit { id, tag: Some(t) } = s {
                if graph.node(id).is_some_and(|n| n.has_label(label)) {
                    out.push(t.clone());
                }
            }
        });
        out
    }

    pub fn loops(&self) -> Vec<&str> {
        let mut out = Vec::new();
        walk(&self.steps, &mut |s| {
            if let TraceStep::Loop { id, .. } = s {
                out.push(id.as_str());
            }
        });
        out
    }
}

fn walk<'a>(steps: &'a [TraceStep], f: &mut impl FnMut(&'a TraceStep)) {
    for s in steps {
        f(s);
        if let TraceStep::Branch { paths } = s {
            for p in paths {
                walk(p, f);
            }
        }
    }
}

impl fmt::Display for FlowTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn name<'a>(id: &'a str, tag: &'a Option<String>) -> &'a str {
            tag.as_deref().unwrap_or(id)
        }
        fn line(steps: &[TraceStep], f: &mut fmt::Formatter<'_>) -> fmt::Result {
            for (i, s) in steps.iter().enumerate() {
                if i > 0 {
                    f.write_str(" -> ")?;
                }
                match s {
                    TraceStep::Visit { id, tag } => f.write_str(name(id, tag))?,
                    TraceStep::Loop { id, tag } => write!(f, "(loop to {})", name(id, tag))?,
                    TraceStep::Join { id, tag } => write!(f, "(joins {})", name(id, tag))?,
                    TraceStep::Branch { paths } => {
                        f.write_str("[")?;
                        for (j, p) in paths.iter().enumerate() {
                            if j > 0 {
                                f.write_str(" | ")?;
                            }
                            line(p, f)?;
                        }
                        f.write_str("]")?;
                    }
                }
            }
            Ok(())
        }
        line(&self.steps, f)
    }
}

/// Nodes with outgoing but no incoming flow, off-page inlets first.
pub fn find_inlets(graph: &PropertyGraph) -> Vec<&str> {
    let succ = graph.successors(edge_type::SEND_TO);
    let pred = graph.predecessors(edge_type::SEND_TO);
    let mut inlets: Vec<&str> = graph
        .nodes
        .keys()
        .map(String::as_str)
        .filter(|id| succ.contains_key(id) && !pred.contains_key(id))
        .collect();
    inlets.sort_by_key(|id| {
        let off_page = graph.node(id).is_some_and(|n| n.has_label("flowInPipeOffPageConnector"));
        (!off_page, *id)
    });
    inlets
}

/// Depth-first trace from `inlet` over `send_to` edges. Each node is visited
/// once; edges back onto the current path become loop markers and edges into
/// already traced nodes become join markers, so traversal always terminates.
pub fn trace_flow(graph: &PropertyGraph, inlet: &str) -> Result<FlowTrace, EvalError> {
    if graph.node(inlet).is_none() {
        return Err(EvalError::UnknownNode(inlet.to_string()));
    }
    let pred = graph.predecessors(edge_type::SEND_TO);
    if let Some(from) = pred.get(inlet).and_then(|p| p.first()) {
        return Err(EvalError::InletHasInflow {
            inlet: inlet.to_string(),
            from: from.to_string(),
        });
    }
    let mut tracer = Tracer {
        graph,
        succ: graph.successors(edge_type::SEND_TO),
        visited: HashSet::new(),
        on_path: HashSet::new(),
    };
    let steps = tracer.path_from(inlet);
    Ok(FlowTrace {
        inlet: inlet.to_string(),
        steps,
    })
}

struct Tracer<'a> {
    graph: &'a PropertyGraph,
    succ: HashMap<&'a str, Vec<&'a str>>,
    visited: HashSet<&'a str>,
    on_path: HashSet<&'a str>,
}

impl<'a> Tracer<'a> {
    fn tag(&self, id: &str) -> Option<String> {
        self.graph.node(id).and_then(|n| n.tag()).map(str::to_string)
    }

    /// Follows single-successor runs iteratively and recurses only at splits.
    fn path_from(&mut self, start: &'a str) -> Vec<TraceStep> {
        let mut steps = Vec::new();
        let mut entered = Vec::new();
        let mut current = start;
        loop {
            self.visited.insert(current);
            self.on_path.insert(current);
            entered.push(current);
            steps.push(TraceStep::Visit {
                id: current.to_string(),
                tag: self.tag(current),
            });
            let next = self.succ.get(current).cloned().unwrap_or_default();
            let mut paths: Vec<Vec<TraceStep>> = Vec::new();
            let mut single = None;
            for (i, n) in next.iter().copied().enumerate() {
                if self.on_path.contains(n) {
                    paths.push(vec![TraceStep::Loop {
                        id: n.to_string(),
                        tag: self.tag(n),
                    }]);
                } else if self.visited.contains(n) {
                    paths.push(vec![TraceStep::Join {
                        id: n.to_string(),
                        tag: self.tag(n),
                    }]);
                } else if next.len() == 1 && i == 0 {
                    single = Some(n);
                } else {
                    paths.push(self.path_from(n));
                }
            }
            if let Some(n) = single {
                current = n;
                continue;
            }
            match paths.len() {
                0 => {}
                1 => steps.extend(paths.pop().unwrap_or_default()),
                _ => steps.push(TraceStep::Branch { paths }),
            }
            break;
        }
        for id in entered {
            self.on_path.remove(id);
        }
        steps
    }
}
