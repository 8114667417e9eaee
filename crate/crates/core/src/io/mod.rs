//! Graph serialization.

pub mod graphml;
pub mod json;

use std::path::Path;

pub use graphml::{export_graphml, import_graphml, GraphmlError};
pub use json::{export_json, import_json, JsonGraphError};

use crate::graph::PropertyGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Json,
    Graphml,
}

impl GraphFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Some(GraphFormat::Json),
            "graphml" | "xml" => Some(GraphFormat::Graphml),
            _ => None,
        }
    }

    /// Guesses from a file extension, then from the first non-blank byte.
    pub fn detect(path: &Path, text: &str) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("json") => GraphFormat::Json,
            Some("graphml") | Some("xml") => GraphFormat::Graphml,
            _ if text.trim_start().starts_with('{') => GraphFormat::Json,
            _ => GraphFormat::Graphml,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Json => "json",
            GraphFormat::Graphml => "graphml",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphIoError {
    #[error(transparent)]
    Graphml(#[from] GraphmlError),
    #[error(transparent)]
    Json(#[from] JsonGraphError),
}

pub fn export(graph: &PropertyGraph, format: GraphFormat) -> Result<String, GraphIoError> {
    Ok(match format {
        GraphFormat::Json => export_json(graph),
        GraphFormat::Graphml => export_graphml(graph)?,
    })
}

pub fn import(text: &str, format: GraphFormat) -> Result<PropertyGraph, GraphIoError> {
    Ok(match format {
        GraphFormat::Json => import_json(text)?,
        GraphFormat::Graphml => import_graphml(text)?,
    })
}
