//! DEXPI / Proteus XML reader.
//!
//! Elements are matched on local names so documents with or without a
//! default namespace both load. Besides one item per component-class element,
//! the reader synthesizes items for the parts of the piping network that
//! Proteus encodes structurally rather than as classed elements:
//!
//! * every process-type `Node` inside `ConnectionPoints` becomes a `PipingNode`
//!   child of its owner;
//! * every run of consecutive `CenterLine`s inside a segment becomes a `Pipe`;
//! * two flow items that touch without a centre line are joined by a
//!   `DirectPipingConnection`.

use std::collections::{BTreeMap, HashMap, HashSet};

use roxmltree::{Document, Node, NodeId};

use crate::model::{
    Attribute, Diagnostic, DiagnosticCode, LocationLink, Package, PidModel, PipingConnection,
    PlantItem, SignalConnection, SignalKind,
};
use crate::taxonomy::{lower_camel, Taxonomy};
use crate::validate::validate;

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("root element is <{0}>, expected <PlantModel>")]
    NotPlantModel(String),
    #[error("strict parse rejected the document: {}", summarize(.0))]
    Strict(Vec<Diagnostic>),
}

fn summarize(diags: &[Diagnostic]) -> String {
    match diags {
        [] => "no diagnostics".into(),
        [one] => one.to_string(),
        [first, rest @ ..] => format!("{first} (and {} more)", rest.len()),
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Fail instead of collecting diagnostics.
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub model: PidModel,
    pub diagnostics: Vec<Diagnostic>,
}

/// Lenient parse: diagnostics are collected, never fatal.
pub fn parse_dexpi(text: &str) -> Result<ParseOutcome, ParseError> {
    parse_dexpi_with(text, ParseOptions::default())
}

pub fn parse_dexpi_with(text: &str, options: ParseOptions) -> Result<ParseOutcome, ParseError> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let doc = Document::parse_with_options(text, opts).map_err(|e| {
        let pos = e.pos();
        ParseError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let root = doc.root_element().tag_name().name();
    if root != "PlantModel" {
        return Err(ParseError::NotPlantModel(root.to_string()));
    }

    let mut reader = Reader::new(Taxonomy::dexpi());
    reader.read(&doc);
    let Reader {
        model, mut diags, ..
    } = reader;
    diags.extend(validate(&model));

    if options.strict && !diags.is_empty() {
        return Err(ParseError::Strict(diags));
    }
    Ok(ParseOutcome {
        model,
        diagnostics: diags,
    })
}

// Elements that carry a ComponentClass but are drawing annotations.
const ANNOTATION_ELEMENTS: &[&str] = &["Label", "MetaData"];
const SIGNAL_FLOW_CLASSES: &[&str] = &["MeasuringLineFunction", "SignalConveyingFunction", "SignalLineFunction"];

// Subtrees that hold symbol definitions rather than plant content.
const SKIPPED_SUBTREES: &[&str] = &["ShapeCatalogue", "Drawing"];

fn element_package(element: &str) -> Option<Package> {
    Some(match element {
        "Equipment" | "Nozzle" => Package::Equipment,
        "PipingNetworkSystem" | "PipingNetworkSegment" | "PipingComponent"
        | "PipeOffPageConnector" | "PropertyBreak" | "PipeConnectorSymbol" => Package::Piping,
        "ProcessInstrumentationFunction"
        | "ProcessSignalGeneratingFunction"
        | "ProcessSignalGeneratingSystem"
        | "ActuatingFunction"
        | "ActuatingSystem"
        | "ActuatingSystemComponent"
        | "InformationFlow"
        | "InstrumentationLoopFunction"
        | "InstrumentComponent"
        | "SignalOffPageConnector"
        | "SignalConnectorSymbol" => Package::Instrumentation,
        _ => return None,
    })
}

fn children_named<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children()
        .filter(move |c| c.is_element() && c.tag_name().name() == name)
}

fn child_named<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> Option<Node<'a, 'i>> {
    children_named(node, name).next()
}

/// Connection points of one item: slot `k` (1-based) holds the piping node
/// created for the k-th non-default `Node`, if it was a process node.
#[derive(Debug, Default, Clone)]
struct Ports {
    nodes: Vec<Option<String>>,
    flow_in: Option<usize>,
    flow_out: Option<usize>,
}

impl Ports {
    fn get(&self, k: usize) -> Option<&str> {
        k.checked_sub(1)
            .and_then(|i| self.nodes.get(i))
            .and_then(|n| n.as_deref())
    }

    fn inlet(&self) -> Option<usize> {
        self.flow_in
            .or_else(|| (1..=self.nodes.len()).find(|&k| Some(k) != self.flow_out))
    }

    fn outlet(&self) -> Option<usize> {
        let inlet = self.inlet();
        self.flow_out.or_else(|| {
            (2..=self.nodes.len())
                .chain(1..2.min(self.nodes.len() + 1))
                .find(|&k| Some(k) != inlet)
        })
    }
}

/// A point the flow passes through while walking a segment.
#[derive(Debug, Clone)]
struct FlowPoint {
    item: String,
    port: Option<String>,
    is_run: bool,
}

struct Reader<'t> {
    taxonomy: &'t Taxonomy,
    model: PidModel,
    diags: Vec<Diagnostic>,
    /// XML element -> item id
    element_items: HashMap<NodeId, String>,
    ids: HashSet<String>,
    ports: HashMap<String, Ports>,
    pipe_count: usize,
    direct_count: usize,
}

impl<'t> Reader<'t> {
    fn new(taxonomy: &'t Taxonomy) -> Self {
        Reader {
            taxonomy,
            model: PidModel::new(),
            diags: Vec::new(),
            element_items: HashMap::new(),
            ids: HashSet::new(),
            ports: HashMap::new(),
            pipe_count: 0,
            direct_count: 0,
        }
    }

    fn read(&mut self, doc: &Document) {
        self.read_metadata(doc);
        let order: HashMap<NodeId, usize> = doc
            .descendants()
            .filter(Node::is_element)
            .enumerate()
            .map(|(i, n)| (n.id(), i))
            .collect();

        let root = doc.root_element();
        self.collect_items(root, &order);
        let segments: Vec<Node> = doc
            .descendants()
            .filter(|n| n.is_element() && n.tag_name().name() == "PipingNetworkSegment")
            .filter(|n| self.element_items.contains_key(&n.id()))
            .collect();
        for seg in segments {
            self.read_segment(seg);
        }
        self.add_nozzle_flows();
        self.read_associations(doc);
    }

    fn read_metadata(&mut self, doc: &Document) {
        let meta = &mut self.model.metadata;
        for n in doc.descendants().filter(Node::is_element) {
            match n.tag_name().name() {
                "PlantInformation" => {
                    for (attr, key) in [
                        ("SchemaVersion", "schemaVersion"),
                        ("Application", "application"),
                        ("ApplicationVersion", "applicationVersion"),
                        ("OriginatingSystem", "originatingSystem"),
                        ("Date", "date"),
                    ] {
                        if let Some(v) = n.attribute(attr) {
                            meta.insert(key.into(), v.into());
                        }
                    }
                }
                "Drawing" => {
                    if let Some(v) = n.attribute("Name") {
                        meta.entry("drawingName".into()).or_insert_with(|| v.into());
                    }
                }
                "MetaData" => {
                    for attr in generic_attributes(n) {
                        let key = match attr.name.as_str() {
                            "DrawingNameAssignmentClass" => "drawingName",
                            "DrawingNumberAssignmentClass" => "drawingNumber",
                            "TitleAssignmentClass" => "title",
                            _ => continue,
                        };
                        if !attr.value.is_empty() {
                            meta.insert(key.into(), attr.value);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn collect_items(&mut self, node: Node, order: &HashMap<NodeId, usize>) {
        let name = node.tag_name().name();
        if SKIPPED_SUBTREES.contains(&name) {
            return;
        }
        if node.attribute("ComponentClass").is_some() && !ANNOTATION_ELEMENTS.contains(&name) {
            self.add_element_item(node, order);
        }
        for child in node.children().filter(Node::is_element) {
            self.collect_items(child, order);
        }
    }

    fn fresh_id(&mut self, base: &str, counter: usize) -> String {
        let mut n = counter;
        loop {
            let id = format!("{base}-{n}");
            if !self.ids.contains(&id) {
                return id;
            }
            n += 1;
        }
    }

    fn parent_item(&self, node: Node) -> Option<String> {
        node.ancestors()
            .skip(1)
            .find_map(|a| self.element_items.get(&a.id()).cloned())
    }

    fn add_element_item(&mut self, node: Node, order: &HashMap<NodeId, usize>) {
        let class_name = node.attribute("ComponentClass").unwrap_or_default().to_string();
        let element = node.tag_name().name();
        let id = match node.attribute("ID") {
            Some(id) if !id.is_empty() => id.to_string(),
            _ => format!("gen-{}", order[&node.id()]),
        };
        let parent = self.parent_item(node);
        let package = self
            .taxonomy
            .package_of(&class_name)
            .or_else(|| element_package(element))
            .or_else(|| {
                parent
                    .as_deref()
                    .and_then(|p| self.model.item(p))
                    .map(|p| p.package)
            });
        let package = package.unwrap_or_else(|| {
            self.diags.push(Diagnostic::warning(
                DiagnosticCode::UnknownPackage,
                Some(&id),
                format!("no package known for class {class_name} in <{element}>; assuming equipment"),
            ));
            Package::Equipment
        });

        let mut item = PlantItem::new(id.clone(), class_name, package);
        item.element = element.to_string();
        item.attributes = generic_attributes(node);
        item.geometry = geometry(node);
        let line_number = self.line_number(node);
        item.tag = derive_tag(&item, self.taxonomy, line_number.as_deref());
        self.push_item(item, parent.as_deref());
        self.element_items.insert(node.id(), id.clone());

        if let Some(cp) = child_named(node, "ConnectionPoints") {
            self.read_connection_points(&id, cp, order);
        }
    }

    fn push_item(&mut self, mut item: PlantItem, parent: Option<&str>) {
        item.parent = parent.map(str::to_string);
        let id = item.id.clone();
        self.ids.insert(id.clone());
        self.model.items.push(item);
        if let Some(p) = parent {
            if let Some(pi) = self.model.items.iter_mut().rev().find(|i| i.id == p) {
                pi.children.push(id);
            }
        }
    }

    /// Line number of the enclosing piping network system, used in valve tags.
    fn line_number(&self, node: Node) -> Option<String> {
        let system = node
            .ancestors()
            .find(|a| a.is_element() && a.tag_name().name() == "PipingNetworkSystem")?;
        generic_attributes(system)
            .into_iter()
            .find(|a| a.name == "LineNumberAssignmentClass" && !a.value.is_empty())
            .map(|a| a.value)
    }

    fn read_connection_points(&mut self, owner: &str, cp: Node, order: &HashMap<NodeId, usize>) {
        let parse_k = |attr: &str| cp.attribute(attr).and_then(|v| v.trim().parse::<usize>().ok());
        let mut ports = Ports {
            flow_in: parse_k("FlowIn"),
            flow_out: parse_k("FlowOut"),
            ..Ports::default()
        };
        for node in children_named(cp, "Node").skip(1) {
            if node.attribute("Type") != Some("process") {
                ports.nodes.push(None);
                continue;
            }
            let id = match node.attribute("ID") {
                Some(id) if !id.is_empty() => id.to_string(),
                _ => format!("gen-{}", order[&node.id()]),
            };
            let mut item = PlantItem::new(id.clone(), "PipingNode", Package::Piping);
            item.element = "Node".into();
            item.geometry = geometry(node);
            self.push_item(item, Some(owner));
            ports.nodes.push(Some(id));
        }
        self.ports.insert(owner.to_string(), ports);
    }

    fn port_item(&mut self, item: &str, k: Option<usize>, context: &str) -> Option<String> {
        let k = k?;
        match self.ports.get(item).and_then(|p| p.get(k)) {
            Some(port) => Some(port.to_string()),
            None => {
                self.diags.push(Diagnostic::warning(
                    DiagnosticCode::UnresolvedPort,
                    Some(context),
                    format!("{item} has no process connection point {k}"),
                ));
                None
            }
        }
    }

    fn read_segment(&mut self, seg: Node) {
        let seg_id = self.element_items[&seg.id()].clone();

        // Flow elements in document order: item ids or centre-line runs.
        enum Elem<'a, 'i> {
            Item(String),
            Line(Node<'a, 'i>),
        }
        let mut elems = Vec::new();
        for c in seg.children().filter(Node::is_element) {
            if c.tag_name().name() == "CenterLine" {
                elems.push(Elem::Line(c));
            } else if let Some(id) = self.element_items.get(&c.id()) {
                elems.push(Elem::Item(id.clone()));
            }
        }
        let seg_items: Vec<String> = elems
            .iter()
            .filter_map(|e| match e {
                Elem::Item(id) => Some(id.clone()),
                Elem::Line(_) => None,
            })
            .collect();

        let connection = child_named(seg, "Connection");
        let attr = |name: &str| connection.and_then(|c| c.attribute(name)).filter(|v| !v.is_empty());
        let node_k = |name: &str| attr(name).and_then(|v| v.trim().parse::<usize>().ok());
        let (from_id, to_id) = (attr("FromID").map(str::to_string), attr("ToID").map(str::to_string));
        let (from_k, to_k) = (node_k("FromNode"), node_k("ToNode"));

        // Items listed against the connection direction are walked backwards.
        if seg_items.len() >= 2
            && (from_id.as_deref() == seg_items.last().map(String::as_str)
                || to_id.as_deref() == seg_items.first().map(String::as_str))
        {
            elems.reverse();
        }

        let mut start = None;
        if let Some(from) = from_id.as_deref().filter(|f| !seg_items.iter().any(|i| i == f)) {
            if self.ids.contains(from) {
                if from_k.is_some() && self.ports.get(from).and_then(|p| p.flow_in) == from_k {
                    self.diags.push(Diagnostic::warning(
                        DiagnosticCode::AmbiguousFlow,
                        Some(&seg_id),
                        format!("segment starts at the declared inlet of {from}; keeping document order"),
                    ));
                }
                let port = self.port_item(from, from_k, &seg_id);
                start = Some(FlowPoint {
                    item: from.to_string(),
                    port,
                    is_run: false,
                });
            } else {
                self.unresolved(&seg_id, from);
            }
        }

        let mut cursor = start;
        let mut prev_line = false;
        for e in elems {
            match e {
                Elem::Line(line) => {
                    if prev_line {
                        // Consecutive centre lines belong to one pipe.
                        let pipe = cursor.as_ref().map(|c| c.item.clone()).unwrap_or_default();
                        self.extend_pipe(&pipe, line);
                        continue;
                    }
                    let pipe = self.new_pipe(&seg_id, line);
                    let point = FlowPoint {
                        item: pipe,
                        port: None,
                        is_run: true,
                    };
                    if let Some(prev) = &cursor {
                        self.connect(prev, &point, &seg_id);
                    }
                    cursor = Some(point);
                    prev_line = true;
                }
                Elem::Item(id) => {
                    let ports = self.ports.get(&id).cloned().unwrap_or_default();
                    let inlet = ports.inlet().and_then(|k| ports.get(k)).map(str::to_string);
                    let outlet = ports.outlet().and_then(|k| ports.get(k)).map(str::to_string);
                    let here = FlowPoint {
                        item: id.clone(),
                        port: inlet,
                        is_run: false,
                    };
                    if let Some(prev) = cursor.take() {
                        self.link(&prev, &here, &seg_id);
                    }
                    cursor = Some(FlowPoint {
                        item: id,
                        port: outlet,
                        is_run: false,
                    });
                    prev_line = false;
                }
            }
        }

        if let Some(to) = to_id.as_deref().filter(|t| !seg_items.iter().any(|i| i == t)) {
            if self.ids.contains(to) {
                if to_k.is_some() && self.ports.get(to).and_then(|p| p.flow_out) == to_k {
                    self.diags.push(Diagnostic::warning(
                        DiagnosticCode::AmbiguousFlow,
                        Some(&seg_id),
                        format!("segment ends at the declared outlet of {to}; keeping document order"),
                    ));
                }
                let port = self.port_item(to, to_k, &seg_id);
                let end = FlowPoint {
                    item: to.to_string(),
                    port,
                    is_run: false,
                };
                if let Some(prev) = &cursor {
                    self.link(prev, &end, &seg_id);
                }
            } else {
                self.unresolved(&seg_id, to);
            }
        }
    }

    /// Joins two flow points, inserting a direct connection when neither is a pipe.
    fn link(&mut self, a: &FlowPoint, b: &FlowPoint, seg_id: &str) {
        if a.is_run || b.is_run {
            self.connect(a, b, seg_id);
            return;
        }
        self.direct_count += 1;
        let id = self.fresh_id("DirectPipingConnection", self.direct_count);
        let mut item = PlantItem::new(id.clone(), "DirectPipingConnection", Package::Piping);
        item.element = "Connection".into();
        self.push_item(item, Some(seg_id));
        let mid = FlowPoint {
            item: id,
            port: None,
            is_run: true,
        };
        self.connect(a, &mid, seg_id);
        self.connect(&mid, b, seg_id);
    }

    fn connect(&mut self, a: &FlowPoint, b: &FlowPoint, seg_id: &str) {
        let mut c = PipingConnection::new(a.item.clone(), b.item.clone())
            .ports(a.port.as_deref(), b.port.as_deref());
        c.segment = Some(seg_id.to_string());
        self.model.piping_connections.push(c);
    }

    fn new_pipe(&mut self, seg_id: &str, line: Node) -> String {
        self.pipe_count += 1;
        let id = self.fresh_id("Pipe", self.pipe_count);
        let mut item = PlantItem::new(id.clone(), "Pipe", Package::Piping);
        item.element = "CenterLine".into();
        item.geometry = geometry(line);
        item.geometry
            .insert("centerLine".into(), polyline(line));
        self.push_item(item, Some(seg_id));
        id
    }

    fn extend_pipe(&mut self, pipe: &str, line: Node) {
        if let Some(item) = self.model.items.iter_mut().rev().find(|i| i.id == pipe) {
            let more = polyline(line);
            let path = item.geometry.entry("centerLine".into()).or_default();
            if !path.is_empty() && !more.is_empty() {
                path.push(';');
            }
            path.push_str(&more);
        }
    }

    fn unresolved(&mut self, context: &str, target: &str) {
        self.diags.push(Diagnostic::error(
            DiagnosticCode::UnresolvedReference,
            Some(context),
            format!("reference to unknown item {target}"),
        ));
    }

    /// Flow through equipment bodies: inlet nozzle -> owner -> outlet nozzle.
    fn add_nozzle_flows(&mut self) {
        let mut extra = Vec::new();
        for item in &self.model.items {
            if item.class_name != "Nozzle" {
                continue;
            }
            let Some(owner) = item.parent.as_deref() else {
                continue;
            };
            let conns = &self.model.piping_connections;
            if conns.iter().any(|c| c.to == item.id) {
                extra.push((item.id.clone(), owner.to_string()));
            }
            if conns.iter().any(|c| c.from == item.id) {
                extra.push((owner.to_string(), item.id.clone()));
            }
        }
        for (from, to) in extra {
            let mut c = PipingConnection::new(from, to);
            c.internal = true;
            self.model.piping_connections.push(c);
        }
    }

    fn read_associations(&mut self, doc: &Document) {
        let mut starts: BTreeMap<String, String> = BTreeMap::new();
        let mut ends: BTreeMap<String, String> = BTreeMap::new();
        let mut fulfils: Vec<(String, String)> = Vec::new();
        let mut refers: HashMap<String, String> = HashMap::new();
        let mut flows: Vec<(String, bool)> = Vec::new();

        for node in doc.descendants().filter(Node::is_element) {
            let Some(item_id) = self.element_items.get(&node.id()).cloned() else {
                continue;
            };
            if node.tag_name().name() == "InformationFlow" {
                let signal = node.attribute("ComponentClass").is_some_and(|c| SIGNAL_FLOW_CLASSES.contains(&c));
                flows.push((item_id.clone(), signal));
            }
            for assoc in children_named(node, "Association") {
                let (Some(kind), Some(target)) = (assoc.attribute("Type"), assoc.attribute("ItemID")) else {
                    continue;
                };
                let known = matches!(
                    kind,
                    "is located in"
                        | "has logical start"
                        | "has logical end"
                        | "is fulfilled by"
                        | "refers to"
                        | "is a collection including"
                        | "is a part of"
                );
                if !known {
                    continue;
                }
                if !self.ids.contains(target) {
                    self.unresolved(&item_id, target);
                    continue;
                }
                let target = target.to_string();
                match kind {
                    "is located in" => self.locate(&item_id, &target),
                    "has logical start" => {
                        starts.insert(item_id.clone(), target);
                    }
                    "has logical end" => {
                        ends.insert(item_id.clone(), target);
                    }
                    "is fulfilled by" => {
                        self.model.attach(&item_id, &target);
                        fulfils.push((item_id.clone(), target));
                    }
                    "refers to" => {
                        refers.insert(item_id.clone(), target);
                    }
                    "is a collection including" => self.model.attach(&item_id, &target),
                    "is a part of" => self.model.attach(&target, &item_id),
                    _ => unreachable!(),
                }
            }
        }

        for (flow, signal) in flows {
            match (starts.get(&flow), ends.get(&flow)) {
                (Some(s), Some(e)) if !signal => {
                    self.push_signal(SignalConnection {
                        source: s.clone(),
                        target: e.clone(),
                        kind: None,
                    });
                }
                (Some(s), Some(e)) => {
                    self.push_signal(SignalConnection::new(s.clone(), e.clone(), SignalKind::Signal));
                    self.push_signal(SignalConnection::new(e.clone(), flow.clone(), SignalKind::LogicalEnd));
                }
                _ => self.diags.push(Diagnostic::warning(
                    DiagnosticCode::UnresolvedReference,
                    Some(&flow),
                    "information flow lacks a logical start or end",
                )),
            }
        }

        for (function, system) in fulfils {
            let components = self
                .model
                .item(&system)
                .map(|s| s.children.clone())
                .unwrap_or_default();
            for c in components {
                if let Some(valve) = refers.get(&c) {
                    self.push_signal(SignalConnection::new(function.clone(), valve.clone(), SignalKind::Actuation));
                }
            }
        }
    }

    fn push_signal(&mut self, s: SignalConnection) {
        if !self.model.signal_connections.contains(&s) {
            self.model.signal_connections.push(s);
        }
    }

    fn locate(&mut self, item_id: &str, location: &str) {
        let is_sensor = self
            .model
            .item(item_id)
            .is_some_and(|i| i.package == Package::Instrumentation);
        if is_sensor {
            let measured = self.measured_item(location);
            self.push_signal(SignalConnection::new(measured, item_id, SignalKind::Measurement));
            return;
        }
        let link = LocationLink {
            item: item_id.to_string(),
            location: location.to_string(),
        };
        if !self.model.locations.contains(&link) {
            self.model.locations.push(link);
        }
    }

    /// A sensor sitting on a nozzle or internal part measures the equipment that owns it.
    fn measured_item(&self, location: &str) -> String {
        let mut current = location.to_string();
        while let Some(item) = self.model.item(&current) {
            match item.parent.as_deref().and_then(|p| self.model.item(p)) {
                Some(parent)
                    if item.package == Package::Equipment && parent.package == Package::Equipment =>
                {
                    current = parent.id.clone();
                }
                _ => break,
            }
        }
        current
    }
}

fn generic_attributes(node: Node) -> Vec<Attribute> {
    children_named(node, "GenericAttributes")
        .flat_map(|set| children_named(set, "GenericAttribute"))
        .filter_map(|ga| {
            Some(Attribute {
                name: ga.attribute("Name")?.to_string(),
                value: ga.attribute("Value").unwrap_or_default().to_string(),
                units: ga.attribute("Units").filter(|u| !u.is_empty()).map(str::to_string),
                value_uri: ga.attribute("ValueURI").map(str::to_string),
            })
        })
        .collect()
}

fn fmt_xyz(prefix: &str, node: Option<Node>, out: &mut BTreeMap<String, String>) {
    let Some(node) = node else { return };
    for axis in ["X", "Y", "Z"] {
        if let Some(v) = node.attribute(axis) {
            out.insert(format!("{prefix}{axis}"), v.to_string());
        }
    }
}

fn geometry(node: Node) -> BTreeMap<String, String> {
    let mut g = BTreeMap::new();
    if let Some(v) = node.attribute("ID") {
        g.insert("dexpiId".into(), v.into());
    }
    if let Some(v) = node.attribute("ComponentName") {
        g.insert("componentName".into(), v.into());
    }
    if let Some(v) = node.attribute("ComponentClassURI") {
        g.insert("componentClassUri".into(), v.into());
    }
    if let Some(p) = child_named(node, "Presentation") {
        for a in p.attributes() {
            g.insert(format!("presentation{}", a.name()), a.value().into());
        }
    }
    if let Some(pos) = child_named(node, "Position") {
        fmt_xyz("location", child_named(pos, "Location"), &mut g);
        fmt_xyz("axis", child_named(pos, "Axis"), &mut g);
        fmt_xyz("reference", child_named(pos, "Reference"), &mut g);
    }
    if let Some(scale) = child_named(node, "Scale") {
        fmt_xyz("scale", Some(scale), &mut g);
    }
    let labels: Vec<Node> = children_named(node, "Label").collect();
    for (i, label) in labels.iter().enumerate() {
        let prefix = if labels.len() == 1 { "label".to_string() } else { format!("label{}", i + 1) };
        label_text(&prefix, *label, &mut g);
    }
    g
}

/// Annotation text attached to an item: label class, displayed strings and
/// the placement of the first text run.
fn label_text(prefix: &str, label: Node, out: &mut BTreeMap<String, String>) {
    if let Some(v) = label.attribute("ComponentClass") {
        out.insert(format!("{prefix}Class"), v.into());
    }
    let texts: Vec<Node> = label
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "Text")
        .collect();
    let strings: Vec<&str> = texts.iter().filter_map(|t| t.attribute("String")).collect();
    if !strings.is_empty() {
        out.insert(format!("{prefix}Text"), strings.join(" | "));
    }
    let Some(first) = texts.first() else { return };
    for (attr, key) in [("Font", "Font"), ("Height", "Height"), ("Justification", "Justification")] {
        if let Some(v) = first.attribute(attr) {
            out.insert(format!("{prefix}{key}"), v.into());
        }
    }
    if let Some(pos) = child_named(*first, "Position") {
        fmt_xyz(&format!("{prefix}Location"), child_named(pos, "Location"), out);
    }
}

fn polyline(line: Node) -> String {
    children_named(line, "Coordinate")
        .map(|c| {
            format!(
                "{},{}",
                c.attribute("X").unwrap_or("0"),
                c.attribute("Y").unwrap_or("0")
            )
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Engineering tag shown on the drawing, if the class carries one.
fn derive_tag(item: &PlantItem, taxonomy: &Taxonomy, line_number: Option<&str>) -> Option<String> {
    let attr = |name: &str| item.attribute(name).filter(|v| !v.trim().is_empty());
    if let Some(tag) = attr("TagNameAssignmentClass") {
        return Some(tag.to_string());
    }
    let tag = match item.class_name.as_str() {
        "ProcessSignalGeneratingFunction" => attr("ProcessSignalGeneratingFunctionNumberAssignmentClass")?.to_string(),
        "ActuatingFunction" => attr("ActuatingFunctionNumberAssignmentClass")?.to_string(),
        "InstrumentationLoopFunction" => attr("InstrumentationLoopFunctionNumberAssignmentClass")?.to_string(),
        "ProcessInstrumentationFunction" => {
            let number = attr("ProcessInstrumentationFunctionNumberAssignmentClass")?;
            let category = attr("ProcessInstrumentationFunctionCategoryAssignmentClass").unwrap_or("");
            let functions = attr("ProcessInstrumentationFunctionsAssignmentClass").unwrap_or("");
            format!("{category}{functions}{number}")
        }
        class if is_valve(class, taxonomy) => {
            if let Some(position) = attr("PositionNumberAssignmentClass") {
                position.to_string()
            } else {
                let number = attr("PipingComponentNumberAssignmentClass")?;
                match line_number {
                    Some(line) => format!("{line}-{number}"),
                    None => number.to_string(),
                }
            }
        }
        _ => return None,
    };
    Some(tag)
}

fn is_valve(class_name: &str, taxonomy: &Taxonomy) -> bool {
    taxonomy
        .ancestors(class_name)
        .is_some_and(|chain| chain.iter().any(|t| t == "valve"))
        || lower_camel(class_name) == "valve"
}

#[cfg(test)]
mod tests {
    use super::*;

    const PUMP: &str = r#"<?xml version="1.0"?>
<PlantModel>
  <PlantInformation SchemaVersion="4.1.1"/>
  <Equipment ID="ReciprocatingPump-1" ComponentClass="ReciprocatingPump">
    <GenericAttributes Set="DexpiAttributes">
      <GenericAttribute Name="TagNameAssignmentClass" Value="P4712"/>
    </GenericAttributes>
    <Nozzle ID="N1" ComponentClass="Nozzle"/>
    <Nozzle ID="N2" ComponentClass="Nozzle"/>
    <Equipment ID="D1" ComponentClass="Displacer"/>
    <Equipment ID="C1" ComponentClass="PumpChamber"/>
  </Equipment>
</PlantModel>"#;

    #[test]
    fn pump_has_four_children() {
        let out = parse_dexpi(PUMP).unwrap();
        let pump = out.model.item("ReciprocatingPump-1").unwrap();
        assert_eq!(pump.tag.as_deref(), Some("P4712"));
        assert_eq!(pump.children, ["N1", "N2", "D1", "C1"]);
        assert_eq!(out.model.metadata["schemaVersion"], "4.1.1");
        assert_eq!(out.model.item("C1").unwrap().package, Package::Equipment);
    }

    #[test]
    fn malformed_xml_reports_position() {
        let err = parse_dexpi("<PlantModel>\n  <Equipment>\n</PlantModel>").unwrap_err();
        match err {
            ParseError::Xml { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_id_is_synthesized_from_document_order() {
        let xml = r#"<PlantModel><Equipment ComponentClass="Tank"/></PlantModel>"#;
        let out = parse_dexpi(xml).unwrap();
        assert_eq!(out.model.items[0].id, "gen-1");
    }

    #[test]
    fn namespaced_documents_load() {
        let xml = r#"<p:PlantModel xmlns:p="urn:x"><p:Equipment ID="T" ComponentClass="Tank"/></p:PlantModel>"#;
        assert_eq!(parse_dexpi(xml).unwrap().model.items.len(), 1);
    }

    #[test]
    fn port_defaults() {
        let p = Ports {
            nodes: vec![Some("a".into()), Some("b".into())],
            ..Ports::default()
        };
        assert_eq!((p.inlet(), p.outlet()), (Some(1), Some(2)));
        let p = Ports {
            nodes: vec![Some("a".into())],
            flow_out: Some(1),
            ..Ports::default()
        };
        assert_eq!((p.inlet(), p.outlet()), (None, Some(1)));
        let p = Ports {
            nodes: vec![Some("a".into())],
            ..Ports::default()
        };
        assert_eq!((p.inlet(), p.outlet()), (Some(1), None));
        let p = Ports {
            nodes: vec![Some("a".into()), Some("b".into())],
            flow_in: Some(2),
            flow_out: Some(1),
        };
        assert_eq!((p.inlet(), p.outlet()), (Some(2), Some(1)));
    }
}
