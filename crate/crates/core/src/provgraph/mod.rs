//! Typed provenance graphs for synthesis records.
//!
//! A record is a heterogeneous directed graph over material entities, tool
//! entities and activities. Usage edges run entity → activity, generation
//! edges run activity → entity. Material roles and activity order are derived
//! purely from that topology.

mod parse;
mod synth;
mod topo;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use parse::{parse_documents, parse_record, to_prov_jsonld, FieldMap};
pub use synth::{generate_synthetic_corpus, SynthParams};
pub use topo::{assign_roles, infer_precedence, order_activities, Precedence};

use crate::{Error, Result};

pub const GRAPH_STORE_FORMAT: &str = "matproc-graphs";
pub const WARNING_LOG_FORMAT: &str = "matproc-parse-warnings";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialClass {
    Battery,
    Thermoelectric,
    Magnetic,
    Other,
}

impl MaterialClass {
    pub const ALL: [MaterialClass; 4] = [
        MaterialClass::Battery,
        MaterialClass::Thermoelectric,
        MaterialClass::Magnetic,
        MaterialClass::Other,
    ];

    /// Maps free-text class metadata onto the four classes.
    pub fn from_metadata(raw: &str) -> Self {
        let lower = raw.to_lowercase();
        if lower.contains("battery") || lower.contains("electrode") || lower.contains("cathode") {
            MaterialClass::Battery
        } else if lower.contains("thermoelectric") {
            MaterialClass::Thermoelectric
        } else if lower.contains("magnet") {
            MaterialClass::Magnetic
        } else {
            MaterialClass::Other
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MaterialClass::Battery => "battery",
            MaterialClass::Thermoelectric => "thermoelectric",
            MaterialClass::Magnetic => "magnetic",
            MaterialClass::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Material,
    Tool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Precursor,
    Intermediate,
    Product,
    Tool,
    Unconnected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityNode {
    pub id: String,
    pub label: String,
    pub kind: EntityKind,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default)]
    pub role: Option<Role>,
}

impl EntityNode {
    pub fn material(id: &str, label: &str) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            kind: EntityKind::Material,
            attributes: BTreeMap::new(),
            role: None,
        }
    }

    pub fn tool(id: &str, label: &str) -> Self {
        Self {
            kind: EntityKind::Tool,
            ..Self::material(id, label)
        }
    }

    pub fn with_attr(mut self, key: &str, value: &str) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    /// Physical form descriptor, if the record reports one.
    pub fn form(&self) -> Option<&str> {
        self.attributes.get("form").map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityNode {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub conditions: BTreeMap<String, String>,
    pub source_position: usize,
}

impl ActivityNode {
    pub fn new(id: &str, label: &str, source_position: usize) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            conditions: BTreeMap::new(),
            source_position,
        }
    }

    pub fn with_condition(mut self, key: &str, value: &str) -> Self {
        self.conditions
            .insert(canonical_condition_key(key), canonical_value(value));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessGraph {
    pub record_id: String,
    pub doi: String,
    pub year: Option<i32>,
    pub material_class: MaterialClass,
    pub material_entities: Vec<EntityNode>,
    pub tool_entities: Vec<EntityNode>,
    pub activities: Vec<ActivityNode>,
    pub usage_edges: Vec<(String, String)>,
    pub generation_edges: Vec<(String, String)>,
    #[serde(default)]
    pub ordered_activity_ids: Vec<String>,
}

impl ProcessGraph {
    pub fn new(record_id: &str, doi: &str, year: Option<i32>, class: MaterialClass) -> Self {
        Self {
            record_id: record_id.into(),
            doi: doi.into(),
            year,
            material_class: class,
            material_entities: Vec::new(),
            tool_entities: Vec::new(),
            activities: Vec::new(),
            usage_edges: Vec::new(),
            generation_edges: Vec::new(),
            ordered_activity_ids: Vec::new(),
        }
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityNode> {
        self.material_entities.iter().chain(self.tool_entities.iter())
    }

    pub fn entity(&self, id: &str) -> Option<&EntityNode> {
        self.entities().find(|e| e.id == id)
    }

    pub fn activity(&self, id: &str) -> Option<&ActivityNode> {
        self.activities.iter().find(|a| a.id == id)
    }

    /// Activities in topological order. Falls back to source order when the
    /// graph has not been ordered yet.
    pub fn ordered_activities(&self) -> Vec<&ActivityNode> {
        if self.ordered_activity_ids.len() == self.activities.len() {
            self.ordered_activity_ids
                .iter()
                .filter_map(|id| self.activity(id))
                .collect()
        } else {
            let mut acts: Vec<_> = self.activities.iter().collect();
            acts.sort_by_key(|a| a.source_position);
            acts
        }
    }

    /// Canonical activity labels in route order.
    pub fn route_labels(&self) -> Vec<String> {
        self.ordered_activities()
            .iter()
            .map(|a| canonical_label(&a.label))
            .collect()
    }

    pub fn inputs_of(&self, activity_id: &str) -> Vec<&EntityNode> {
        self.usage_edges
            .iter()
            .filter(|(_, a)| a == activity_id)
            .filter_map(|(e, _)| self.entity(e))
            .collect()
    }

    pub fn outputs_of(&self, activity_id: &str) -> Vec<&EntityNode> {
        self.generation_edges
            .iter()
            .filter(|(a, _)| a == activity_id)
            .filter_map(|(_, e)| self.entity(e))
            .collect()
    }

    pub fn material_labels_with_role(&self, role: Role) -> Vec<String> {
        let set: BTreeSet<String> = self
            .material_entities
            .iter()
            .filter(|e| e.role == Some(role))
            .map(|e| canonical_label(&e.label))
            .collect();
        set.into_iter().collect()
    }

    pub fn tool_labels(&self) -> Vec<String> {
        let set: BTreeSet<String> = self
            .tool_entities
            .iter()
            .map(|e| canonical_label(&e.label))
            .collect();
        set.into_iter().collect()
    }

    /// Checks the structural invariants: unique ids, existing endpoints and
    /// edge typing (usage: entity → activity, generation: activity → entity).
    pub fn validate_edges(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for id in self
            .entities()
            .map(|e| &e.id)
            .chain(self.activities.iter().map(|a| &a.id))
        {
            if !ids.insert(id.as_str()) {
                return Err(Error::MalformedDocument(format!(
                    "{}: duplicate node id {id}",
                    self.record_id
                )));
            }
        }
        let is_entity = |id: &str| self.entity(id).is_some();
        let is_activity = |id: &str| self.activity(id).is_some();
        for (src, dst) in &self.usage_edges {
            if !is_entity(src) || !is_activity(dst) {
                return Err(Error::MalformedDocument(format!(
                    "{}: usage edge {src} -> {dst} is not entity -> activity",
                    self.record_id
                )));
            }
        }
        for (src, dst) in &self.generation_edges {
            if !is_activity(src) || !is_entity(dst) {
                return Err(Error::MalformedDocument(format!(
                    "{}: generation edge {src} -> {dst} is not activity -> entity",
                    self.record_id
                )));
            }
        }
        Ok(())
    }
}

/// A non-fatal oddity noticed while compiling a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub record_id: String,
    pub message: String,
}

/// Outcome of compiling one document.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub graph: Option<ProcessGraph>,
    pub warnings: Vec<ParseWarning>,
}

/// parse → roles → precedence → order for one document. Cyclic and empty
/// records are returned without a graph and with a warning explaining why.
pub fn compile_document(raw: &[u8], field_map: &FieldMap, fallback_id: &str) -> Compiled {
    let mut warnings = Vec::new();
    let graph = match parse_record(raw, field_map) {
        Ok((graph, mut parse_warnings)) => {
            warnings.append(&mut parse_warnings);
            graph
        }
        Err(err) => {
            warnings.push(ParseWarning {
                record_id: fallback_id.to_string(),
                message: format!("excluded: {err}"),
            });
            return Compiled { graph: None, warnings };
        }
    };
    match finish_graph(graph) {
        Ok(g) => Compiled {
            graph: Some(g),
            warnings,
        },
        Err((id, err)) => {
            warnings.push(ParseWarning {
                record_id: id,
                message: format!("excluded: {err}"),
            });
            Compiled { graph: None, warnings }
        }
    }
}

/// Assigns roles and fills `ordered_activity_ids`.
pub fn finish_graph(graph: ProcessGraph) -> std::result::Result<ProcessGraph, (String, Error)> {
    let id = graph.record_id.clone();
    let mut graph = assign_roles(graph);
    let prec = infer_precedence(&graph).map_err(|e| (id.clone(), e))?;
    graph.ordered_activity_ids = order_activities(&graph, &prec).map_err(|e| (id, e))?;
    Ok(graph)
}

/// Compiles documents in parallel; output order follows input order.
pub fn compile_all(docs: &[(String, Vec<u8>)], field_map: &FieldMap) -> (Vec<ProcessGraph>, Vec<ParseWarning>) {
    let compiled: Vec<Compiled> = docs
        .par_iter()
        .map(|(name, raw)| compile_document(raw, field_map, name))
        .collect();
    let mut graphs = Vec::new();
    let mut warnings = Vec::new();
    for c in compiled {
        warnings.extend(c.warnings);
        graphs.extend(c.graph);
    }
    (graphs, warnings)
}

/// Lowercased, trimmed, whitespace-collapsed label.
pub fn canonical_label(label: &str) -> String {
    label
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Condition values are kept as strings: trimmed, internal whitespace
/// collapsed, unit tokens lowercased. No unit conversion.
pub fn canonical_value(value: &str) -> String {
    canonical_label(value)
}

/// Condition keys: local name after any namespace prefix, snake_case.
pub fn canonical_condition_key(key: &str) -> String {
    let local = key.rsplit(':').next().unwrap_or(key);
    let mut out = String::new();
    for (i, ch) in local.trim().chars().enumerate() {
        if ch.is_uppercase() {
            if i > 0 && !out.ends_with('_') {
                out.push('_');
            }
            out.extend(ch.to_lowercase());
        } else if ch == ' ' || ch == '-' {
            if !out.ends_with('_') {
                out.push('_');
            }
        } else {
            out.push(ch);
        }
    }
    out
}

/// Condition keys the tooling knows about; others are preserved verbatim.
pub const CONDITION_VOCAB: &[&str] = &[
    "temperature",
    "duration",
    "atmosphere",
    "pressure",
    "heating_rate",
    "cooling_rate",
    "rotation",
    "rotation_speed",
];

/// Keys making up the complete condition tuple.
pub const TUPLE_KEYS: [&str; 3] = ["temperature", "duration", "atmosphere"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalization() {
        assert_eq!(canonical_value("  800   °C "), "800 °c");
        assert_eq!(canonical_label("Ball  Milling"), "ball milling");
        assert_eq!(canonical_condition_key("matprov:heatingRate"), "heating_rate");
        assert_eq!(canonical_condition_key("Heating Rate"), "heating_rate");
        assert_eq!(canonical_condition_key("temperature"), "temperature");
    }

    #[test]
    fn class_metadata() {
        assert_eq!(MaterialClass::from_metadata("Battery"), MaterialClass::Battery);
        assert_eq!(MaterialClass::from_metadata("thermoelectric materials"), MaterialClass::Thermoelectric);
        assert_eq!(MaterialClass::from_metadata("Magnetic"), MaterialClass::Magnetic);
        assert_eq!(MaterialClass::from_metadata("catalyst"), MaterialClass::Other);
    }

    #[test]
    fn edge_typing_is_checked() {
        let mut g = ProcessGraph::new("r", "d", Some(2020), MaterialClass::Other);
        g.material_entities.push(EntityNode::material("e1", "x"));
        g.activities.push(ActivityNode::new("a1", "mill", 0));
        g.usage_edges.push(("a1".into(), "e1".into()));
        assert!(g.validate_edges().is_err());
        g.usage_edges = vec![("e1".into(), "a1".into())];
        assert!(g.validate_edges().is_ok());
        g.activities.push(ActivityNode::new("e1", "dup", 1));
        assert!(g.validate_edges().is_err());
    }
}
