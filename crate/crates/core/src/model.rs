//! In-memory plant model produced by the DEXPI parser.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Top-level DEXPI package a component class belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Package {
    Equipment,
    Piping,
    Instrumentation,
}

impl Package {
    pub fn as_str(self) -> &'static str {
        match self {
            Package::Equipment => "equipment",
            Package::Piping => "piping",
            Package::Instrumentation => "instrumentation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "equipment" => Some(Package::Equipment),
            "piping" => Some(Package::Piping),
            "instrumentation" => Some(Package::Instrumentation),
            _ => None,
        }
    }
}

impl fmt::Display for Package {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One generic attribute, kept verbatim (no unit conversion).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    /// Reference-data URI of an enumerated value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_uri: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantItem {
    pub id: String,
    pub class_name: String,
    pub package: Package,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    /// Generic attributes in document order. Names may repeat (e.g. per language).
    #[serde(default)]
    pub attributes: Vec<Attribute>,
    /// Subcomponent ids (nozzles, chambers, segment items, piping nodes, ...).
    #[serde(default)]
    pub children: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Local name of the XML element the item came from.
    #[serde(default)]
    pub element: String,
    /// Presentation and position data (shape name, layer, coordinates).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub geometry: BTreeMap<String, String>,
}

impl PlantItem {
    pub fn new(id: impl Into<String>, class_name: impl Into<String>, package: Package) -> Self {
        PlantItem {
            id: id.into(),
            class_name: class_name.into(),
            package,
            tag: None,
            attributes: Vec::new(),
            children: Vec::new(),
            parent: None,
            element: String::new(),
            geometry: BTreeMap::new(),
        }
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn with_attribute(mut self, name: &str, value: &str, units: Option<&str>) -> Self {
        self.attributes.push(Attribute {
            name: name.to_string(),
            value: value.to_string(),
            units: units.map(str::to_string),
            value_uri: None,
        });
        self
    }

    /// First attribute value with the given name.
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.value.as_str())
    }
}

/// A directed material-flow connection between two items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipingConnection {
    pub from: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_port: Option<String>,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_port: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<String>,
    /// Flow through an equipment body between one of its nozzles and itself.
    #[serde(default)]
    pub internal: bool,
}

impl PipingConnection {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        PipingConnection {
            from: from.into(),
            from_port: None,
            to: to.into(),
            to_port: None,
            segment: None,
            internal: false,
        }
    }

    pub fn ports(mut self, from_port: Option<&str>, to_port: Option<&str>) -> Self {
        self.from_port = from_port.map(str::to_string);
        self.to_port = to_port.map(str::to_string);
        self
    }

    /// Ordered item ids the flow passes: source, ports, target.
    pub fn flow_path(&self) -> Vec<&str> {
        let mut path = vec![self.from.as_str()];
        if let Some(p) = &self.from_port {
            path.push(p);
        }
        if let Some(p) = &self.to_port {
            path.push(p);
        }
        path.push(self.to.as_str());
        path.dedup();
        path
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// measured item -> measuring function
    Measurement,
    /// function -> function along an information flow
    Signal,
    /// actuating function -> actuated valve
    Actuation,
    /// logical end item -> information flow it terminates
    LogicalEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalConnection {
    pub source: String,
    pub target: String,
    pub kind: Option<SignalKind>,
}

impl SignalConnection {
    pub fn new(source: impl Into<String>, target: impl Into<String>, kind: SignalKind) -> Self {
        SignalConnection {
            source: source.into(),
            target: target.into(),
            kind: Some(kind),
        }
    }
}

/// Explicit "is located in" association between two items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationLink {
    pub item: String,
    pub location: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PidModel {
    /// Items in document order.
    pub items: Vec<PlantItem>,
    #[serde(default)]
    pub piping_connections: Vec<PipingConnection>,
    #[serde(default)]
    pub signal_connections: Vec<SignalConnection>,
    #[serde(default)]
    pub locations: Vec<LocationLink>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl PidModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id -> position lookup. The first occurrence wins for duplicated ids.
    pub fn index(&self) -> HashMap<&str, usize> {
        let mut index = HashMap::with_capacity(self.items.len());
        for (i, item) in self.items.iter().enumerate() {
            index.entry(item.id.as_str()).or_insert(i);
        }
        index
    }

    pub fn item(&self, id: &str) -> Option<&PlantItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn push(&mut self, item: PlantItem) -> &mut Self {
        self.items.push(item);
        self
    }

    /// Appends `child` to `parent`'s children and records the back-link.
    pub fn attach(&mut self, parent: &str, child: &str) {
        if let Some(p) = self.items.iter_mut().find(|i| i.id == parent) {
            if !p.children.iter().any(|c| c == child) {
                p.children.push(child.to_string());
            }
        }
        if let Some(c) = self.items.iter_mut().find(|i| i.id == child) {
            c.parent.get_or_insert_with(|| parent.to_string());
        }
    }

    pub fn count_class(&self, class_name: &str) -> usize {
        self.items.iter().filter(|i| i.class_name == class_name).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticCode {
    DuplicateId,
    UnresolvedReference,
    UnresolvedPort,
    SelfLoop,
    MissingSignalKind,
    AmbiguousFlow,
    UnknownPackage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: DiagnosticCode, item_id: Option<&str>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            item_id: item_id.map(str::to_string),
            message: message.into(),
        }
    }

    pub fn warning(code: DiagnosticCode, item_id: Option<&str>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(code, item_id, message)
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match &self.item_id {
            Some(id) => write!(f, "{sev} [{id}]: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}
