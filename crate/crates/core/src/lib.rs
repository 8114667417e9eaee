//! DEXPI P&ID parsing, labeled property graphs, condensation and graph-RAG chat.

pub mod build;
pub mod chat;
pub mod condense;
pub mod dexpi;
pub mod eval;
pub mod graph;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod taxonomy;
pub mod tokens;
pub mod validate;

pub use build::{build_graph, derive_labels, lexical_edges};
pub use condense::{condense, CondensationPolicy, CondensationReport};
pub use dexpi::{parse_dexpi, parse_dexpi_with, ParseError, ParseOptions};
pub use graph::{GraphEdge, GraphNode, PropertyGraph, PropertyValue};
pub use io::{export_graphml, export_json, import_graphml, import_json};
pub use model::{PidModel, PlantItem};
pub use tokens::estimate_tokens;
