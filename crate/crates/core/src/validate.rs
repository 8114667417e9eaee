use std::collections::HashSet;

use crate::model::{Diagnostic, DiagnosticCode, PidModel};

/// Structural checks on a model. Never mutates it.
pub fn validate(model: &PidModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    for item in &model.items {
        if !seen.insert(item.id.as_str()) && reported.insert(item.id.as_str()) {
            out.push(Diagnostic::error(
                DiagnosticCode::DuplicateId,
                Some(&item.id),
                format!("duplicate id {}", item.id),
            ));
        }
    }

    let unresolved = |out: &mut Vec<Diagnostic>, owner: &str, target: &str, what: &str| {
        out.push(Diagnostic::error(
            DiagnosticCode::UnresolvedReference,
            Some(owner),
            format!("unresolved reference: {what} {target} does not exist"),
        ));
    };

    for item in &model.items {
        for child in &item.children {
            if !seen.contains(child.as_str()) {
                unresolved(&mut out, &item.id, child, "child");
            }
        }
    }

    for c in &model.piping_connections {
        let label = format!("{} -> {}", c.from, c.to);
        for (id, what) in [
            (Some(&c.from), "source"),
            (c.from_port.as_ref(), "source port"),
            (Some(&c.to), "target"),
            (c.to_port.as_ref(), "target port"),
        ] {
            if let Some(id) = id {
                if !seen.contains(id.as_str()) {
                    unresolved(&mut out, &label, id, what);
                }
            }
        }
        if c.from == c.to && c.from_port == c.to_port {
            out.push(Diagnostic::error(
                DiagnosticCode::SelfLoop,
                Some(&c.from),
                "piping connection loops back to the same port",
            ));
        }
    }

    for s in &model.signal_connections {
        let label = format!("{} -> {}", s.source, s.target);
        for (id, what) in [(&s.source, "signal source"), (&s.target, "signal target")] {
            if !seen.contains(id.as_str()) {
                unresolved(&mut out, &label, id, what);
            }
        }
        if s.kind.is_none() {
            out.push(Diagnostic::error(
                DiagnosticCode::MissingSignalKind,
                Some(&s.source),
                format!("signal connection {label} has no kind"),
            ));
        }
    }

    for l in &model.locations {
        for id in [&l.item, &l.location] {
            if !seen.contains(id.as_str()) {
                unresolved(&mut out, &l.item, id, "location");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Package, PipingConnection, PlantItem};

    #[test]
    fn empty_model_is_clean() {
        assert!(validate(&PidModel::new()).is_empty());
    }

    #[test]
    fn dangling_connection() {
        let mut m = PidModel::new();
        m.push(PlantItem::new("T1", "Tank", Package::Equipment));
        m.piping_connections.push(PipingConnection::new("T1", "ghost"));
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagnosticCode::UnresolvedReference);
        assert!(d[0].message.contains("unresolved reference"));
    }

    #[test]
    fn duplicate_ids() {
        let mut m = PidModel::new();
        m.push(PlantItem::new("X", "Tank", Package::Equipment));
        m.push(PlantItem::new("X", "Tank", Package::Equipment));
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagnosticCode::DuplicateId);
    }

    #[test]
    fn self_loop_on_port() {
        let mut m = PidModel::new();
        m.push(PlantItem::new("V", "GlobeValve", Package::Piping));
        m.piping_connections.push(PipingConnection::new("V", "V"));
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, DiagnosticCode::SelfLoop);
    }
}
