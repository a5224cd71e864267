//! PROV-JSONLD (and plain PROV-JSON) reader driven by a declarative key map.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{
    canonical_condition_key, canonical_value, ActivityNode, EntityKind, EntityNode, MaterialClass,
    ParseWarning, ProcessGraph,
};
use crate::{seed, Error, Result};

/// Which document keys carry which pieces of a record.
///
/// Every list is tried in order; the first key present wins. Defaults follow
/// the MatPROV dump layout (`@graph` of typed nodes plus qualified
/// `prov:Usage` / `prov:Generation` relations) and also accept inline
/// `prov:used` / `prov:wasGeneratedBy` references and plain PROV-JSON bundles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub graph_key: String,
    pub id_key: String,
    pub type_key: String,
    pub label_keys: Vec<String>,
    pub entity_types: Vec<String>,
    pub activity_types: Vec<String>,
    pub usage_types: Vec<String>,
    pub generation_types: Vec<String>,
    pub relation_activity_keys: Vec<String>,
    pub relation_entity_keys: Vec<String>,
    pub inline_used_keys: Vec<String>,
    pub inline_generated_by_keys: Vec<String>,
    pub tool_types: Vec<String>,
    pub tool_flag_keys: Vec<String>,
    pub tool_flag_values: Vec<String>,
    pub condition_keys: Vec<String>,
    pub metadata_keys: Vec<String>,
    pub record_id_keys: Vec<String>,
    pub doi_keys: Vec<String>,
    pub year_keys: Vec<String>,
    pub class_keys: Vec<String>,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            graph_key: "@graph".into(),
            id_key: "@id".into(),
            type_key: "@type".into(),
            label_keys: strings(&["rdfs:label", "prov:label", "label", "name"]),
            entity_types: strings(&["prov:Entity", "Entity", "matprov:Material", "matprov:Tool"]),
            activity_types: strings(&["prov:Activity", "Activity", "matprov:Operation"]),
            usage_types: strings(&["prov:Usage", "Usage"]),
            generation_types: strings(&["prov:Generation", "Generation"]),
            relation_activity_keys: strings(&["prov:activity", "activity"]),
            relation_entity_keys: strings(&["prov:entity", "entity"]),
            inline_used_keys: strings(&["prov:used", "used"]),
            inline_generated_by_keys: strings(&["prov:wasGeneratedBy", "wasGeneratedBy"]),
            tool_types: strings(&["matprov:Tool", "Tool", "matprov:Equipment"]),
            tool_flag_keys: strings(&["matprov:category", "category", "matprov:entityType", "entity_type"]),
            tool_flag_values: strings(&["tool", "equipment", "instrument", "apparatus"]),
            condition_keys: strings(&["matprov:conditions", "conditions", "matprov:condition"]),
            metadata_keys: strings(&["metadata", "matprov:metadata"]),
            record_id_keys: strings(&["record_id", "matprov:recordId", "@id", "id"]),
            doi_keys: strings(&["doi", "dc:identifier", "matprov:doi", "dcterms:identifier"]),
            year_keys: strings(&["year", "matprov:year", "dcterms:issued", "dc:date", "publication_year"]),
            class_keys: strings(&["material_class", "matprov:materialClass", "material_type", "category"]),
        }
    }
}

/// Splits a byte stream into documents: a JSON array of documents, a single
/// document, or newline-delimited documents.
pub fn parse_documents(raw: &[u8]) -> Result<Vec<Vec<u8>>> {
    let text = std::str::from_utf8(raw).map_err(|e| Error::MalformedDocument(e.to_string()))?;
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if let Ok(value) = serde_json::from_str::<Value>(trimmed) {
        return Ok(match value {
            Value::Array(docs) => docs.iter().map(|d| d.to_string().into_bytes()).collect(),
            other => vec![other.to_string().into_bytes()],
        });
    }
    Ok(trimmed
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.as_bytes().to_vec())
        .collect())
}

fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Array(items) => items.iter().find_map(scalar_string),
        Value::Object(obj) => {
            if let Some(v) = obj.get("@value") {
                return scalar_string(v);
            }
            let value = obj.get("value").and_then(scalar_string)?;
            match obj.get("unit").and_then(scalar_string) {
                Some(unit) if !unit.is_empty() => Some(format!("{value} {unit}")),
                _ => Some(value),
            }
        }
        Value::Null => None,
    }
}

fn first_key<'a>(obj: &'a Map<String, Value>, keys: &[String]) -> Option<&'a Value> {
    keys.iter().find_map(|k| obj.get(k))
}

/// Node references: `"id"`, `{"@id": "id"}` or arrays of either.
fn refs(v: &Value, id_key: &str) -> Vec<String> {
    match v {
        Value::String(s) => vec![s.clone()],
        Value::Object(obj) => obj
            .get(id_key)
            .or_else(|| obj.get("@id"))
            .and_then(Value::as_str)
            .map(|s| vec![s.to_string()])
            .unwrap_or_default(),
        Value::Array(items) => items.iter().flat_map(|i| refs(i, id_key)).collect(),
        _ => Vec::new(),
    }
}

fn types(obj: &Map<String, Value>, key: &str) -> Vec<String> {
    match obj.get(key) {
        Some(Value::String(s)) => vec![s.clone()],
        Some(Value::Array(items)) => items.iter().filter_map(|v| v.as_str().map(String::from)).collect(),
        _ => Vec::new(),
    }
}

fn parse_year(v: &Value) -> Option<i32> {
    match v {
        Value::Number(n) => n.as_i64().map(|y| y as i32),
        other => {
            let s = scalar_string(other)?;
            let digits: String = s.trim().chars().take(4).collect();
            if digits.len() == 4 && digits.chars().all(|c| c.is_ascii_digit()) {
                digits.parse().ok()
            } else {
                None
            }
        }
    }
}

fn local_name(key: &str) -> &str {
    key.rsplit(':').next().unwrap_or(key)
}

#[derive(Default)]
struct NodeBuilder {
    entities: Vec<(EntityNode, bool)>,
    activities: Vec<ActivityNode>,
    usage: Vec<(String, String)>,
    generation: Vec<(String, String)>,
}

struct Parser<'a> {
    fm: &'a FieldMap,
    reserved: BTreeSet<&'a str>,
}

impl<'a> Parser<'a> {
    fn new(fm: &'a FieldMap) -> Self {
        let mut reserved: BTreeSet<&str> = BTreeSet::new();
        reserved.insert(&fm.id_key);
        reserved.insert(&fm.type_key);
        for list in [
            &fm.label_keys,
            &fm.inline_used_keys,
            &fm.inline_generated_by_keys,
            &fm.condition_keys,
            &fm.tool_flag_keys,
        ] {
            reserved.extend(list.iter().map(String::as_str));
        }
        Self { fm, reserved }
    }

    fn label(&self, obj: &Map<String, Value>, fallback: &str) -> String {
        first_key(obj, &self.fm.label_keys)
            .and_then(scalar_string)
            .unwrap_or_else(|| fallback.to_string())
    }

    fn is_tool(&self, obj: &Map<String, Value>, node_types: &[String]) -> bool {
        if node_types.iter().any(|t| self.fm.tool_types.contains(t)) {
            return true;
        }
        self.fm.tool_flag_keys.iter().any(|k| {
            obj.get(k)
                .and_then(scalar_string)
                .map(|v| self.fm.tool_flag_values.iter().any(|f| f.eq_ignore_ascii_case(v.trim())))
                .unwrap_or(false)
        })
    }

    fn conditions(&self, obj: &Map<String, Value>) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        if let Some(block) = first_key(obj, &self.fm.condition_keys) {
            match block {
                Value::Object(map) => {
                    for (k, v) in map {
                        if let Some(s) = scalar_string(v) {
                            out.insert(canonical_condition_key(k), canonical_value(&s));
                        }
                    }
                }
                Value::Array(items) => {
                    for item in items {
                        let Some(entry) = item.as_object() else { continue };
                        let key = ["key", "name", "type", "parameter"]
                            .iter()
                            .find_map(|k| entry.get(*k).and_then(scalar_string));
                        if let (Some(key), Some(value)) = (key, scalar_string(item)) {
                            out.insert(canonical_condition_key(&key), canonical_value(&value));
                        }
                    }
                }
                _ => {}
            }
        }
        // Known condition keys may also sit directly on the activity node.
        for (k, v) in obj {
            let key = canonical_condition_key(k);
            if super::CONDITION_VOCAB.contains(&key.as_str()) && !out.contains_key(&key) {
                if let Some(s) = scalar_string(v) {
                    out.insert(key, canonical_value(&s));
                }
            }
        }
        out
    }

    fn attributes(&self, obj: &Map<String, Value>) -> BTreeMap<String, String> {
        obj.iter()
            .filter(|(k, _)| !self.reserved.contains(k.as_str()) && !k.starts_with('@'))
            .filter_map(|(k, v)| match v {
                Value::Array(_) | Value::Object(_) if scalar_string(v).is_none() => None,
                _ => scalar_string(v).map(|s| (local_name(k).to_string(), s.trim().to_string())),
            })
            .collect()
    }

    fn node(&self, obj: &Map<String, Value>, id: String, node_types: &[String], b: &mut NodeBuilder) {
        let fm = self.fm;
        let is_activity = node_types.iter().any(|t| fm.activity_types.contains(t));
        let is_entity = node_types.iter().any(|t| fm.entity_types.contains(t) || fm.tool_types.contains(t));
        if is_activity {
            let mut act = ActivityNode::new(&id, &self.label(obj, &id), b.activities.len());
            act.conditions = self.conditions(obj);
            for key in &fm.inline_used_keys {
                for e in obj.get(key).map(|v| refs(v, &fm.id_key)).unwrap_or_default() {
                    b.usage.push((e, id.clone()));
                }
            }
            b.activities.push(act);
        } else if is_entity {
            let tool = self.is_tool(obj, node_types);
            let mut node = if tool {
                EntityNode::tool(&id, &self.label(obj, &id))
            } else {
                EntityNode::material(&id, &self.label(obj, &id))
            };
            node.attributes = self.attributes(obj);
            for key in &fm.inline_generated_by_keys {
                for a in obj.get(key).map(|v| refs(v, &fm.id_key)).unwrap_or_default() {
                    b.generation.push((a, id.clone()));
                }
            }
            b.entities.push((node, tool));
        }
    }

    fn relation(&self, obj: &Map<String, Value>, node_types: &[String], b: &mut NodeBuilder) {
        let fm = self.fm;
        let activity = first_key(obj, &fm.relation_activity_keys).map(|v| refs(v, &fm.id_key));
        let entity = first_key(obj, &fm.relation_entity_keys).map(|v| refs(v, &fm.id_key));
        let (Some(acts), Some(ents)) = (activity, entity) else { return };
        let is_usage = node_types.iter().any(|t| fm.usage_types.contains(t));
        for a in &acts {
            for e in &ents {
                if is_usage {
                    b.usage.push((e.clone(), a.clone()));
                } else {
                    b.generation.push((a.clone(), e.clone()));
                }
            }
        }
    }

    fn graph_items(&self, doc: &Map<String, Value>, b: &mut NodeBuilder) -> Result<()> {
        let fm = self.fm;
        if let Some(items) = doc.get(&fm.graph_key) {
            let items = items
                .as_array()
                .ok_or_else(|| Error::MalformedDocument(format!("{} is not an array", fm.graph_key)))?;
            for item in items {
                let Some(obj) = item.as_object() else { continue };
                let node_types = types(obj, &fm.type_key);
                if node_types
                    .iter()
                    .any(|t| fm.usage_types.contains(t) || fm.generation_types.contains(t))
                {
                    self.relation(obj, &node_types, b);
                } else if let Some(id) = obj.get(&fm.id_key).and_then(Value::as_str) {
                    self.node(obj, id.to_string(), &node_types, b);
                }
            }
            return Ok(());
        }
        // Plain PROV-JSON bundle: {"entity": {id: {...}}, "activity": {...}, "used": {...}, ...}
        let bundle_entity = doc.get("entity").and_then(Value::as_object);
        let bundle_activity = doc.get("activity").and_then(Value::as_object);
        if bundle_entity.is_none() && bundle_activity.is_none() {
            return Err(Error::MalformedDocument(format!(
                "document has neither {} nor PROV-JSON entity/activity maps",
                fm.graph_key
            )));
        }
        for (id, body) in bundle_activity.into_iter().flatten() {
            let obj = body.as_object().cloned().unwrap_or_default();
            let ty = vec![fm.activity_types.first().cloned().unwrap_or_default()];
            self.node(&obj, id.clone(), &ty, b);
        }
        for (id, body) in bundle_entity.into_iter().flatten() {
            let obj = body.as_object().cloned().unwrap_or_default();
            let mut ty = types(&obj, &fm.type_key);
            ty.extend(types(&obj, "prov:type"));
            ty.push(fm.entity_types.first().cloned().unwrap_or_default());
            self.node(&obj, id.clone(), &ty, b);
        }
        for (key, usage) in [("used", true), ("wasGeneratedBy", false)] {
            for body in doc.get(key).and_then(Value::as_object).into_iter().flatten().map(|(_, v)| v) {
                let Some(obj) = body.as_object() else { continue };
                let ty = if usage { &fm.usage_types } else { &fm.generation_types };
                self.relation(obj, &ty[..1.min(ty.len())], b);
            }
        }
        Ok(())
    }

    fn metadata(&self, doc: &Map<String, Value>, keys: &[String]) -> Option<Value> {
        if let Some(v) = first_key(doc, keys) {
            return Some(v.clone());
        }
        self.fm
            .metadata_keys
            .iter()
            .filter_map(|m| doc.get(m).and_then(Value::as_object))
            .find_map(|meta| first_key(meta, keys).cloned())
    }
}

/// Parses one PROV-JSONLD document into an unordered [`ProcessGraph`].
///
/// Relations that reference missing nodes or violate edge typing are dropped
/// and reported as warnings; nothing is invented.
pub fn parse_record(raw: &[u8], field_map: &FieldMap) -> Result<(ProcessGraph, Vec<ParseWarning>)> {
    let value: Value = serde_json::from_slice(raw).map_err(|e| Error::MalformedDocument(e.to_string()))?;
    let doc = value
        .as_object()
        .ok_or_else(|| Error::MalformedDocument("top level is not an object".into()))?;
    let parser = Parser::new(field_map);
    let mut b = NodeBuilder::default();
    parser.graph_items(doc, &mut b)?;

    let record_id = parser
        .metadata(doc, &field_map.record_id_keys)
        .and_then(|v| scalar_string(&v))
        .unwrap_or_else(|| format!("rec-{}", &seed::sha256_hex(raw)[..12]));
    let doi = parser
        .metadata(doc, &field_map.doi_keys)
        .and_then(|v| scalar_string(&v))
        .map(|d| d.trim().to_lowercase())
        .unwrap_or_default();
    let year = parser.metadata(doc, &field_map.year_keys).and_then(|v| parse_year(&v));
    let class = parser
        .metadata(doc, &field_map.class_keys)
        .and_then(|v| scalar_string(&v))
        .map(|c| MaterialClass::from_metadata(&c))
        .unwrap_or(MaterialClass::Other);

    let mut warnings = Vec::new();
    let mut warn = |message: String| {
        warnings.push(ParseWarning {
            record_id: record_id.clone(),
            message,
        })
    };

    let mut graph = ProcessGraph::new(&record_id, &doi, year, class);
    let mut seen_ids = BTreeSet::new();
    for (node, tool) in b.entities {
        if !seen_ids.insert(node.id.clone()) {
            warn(format!("duplicate node id {} dropped", node.id));
            continue;
        }
        debug_assert_eq!(tool, node.kind == EntityKind::Tool);
        if tool {
            graph.tool_entities.push(node);
        } else {
            graph.material_entities.push(node);
        }
    }
    for act in b.activities {
        if !seen_ids.insert(act.id.clone()) {
            warn(format!("duplicate node id {} dropped", act.id));
            continue;
        }
        graph.activities.push(act);
    }
    if year.is_none() {
        warn("missing publication year".into());
    }
    if doi.is_empty() {
        warn("missing doi".into());
    }

    let entity_ids: BTreeSet<String> = graph.entities().map(|e| e.id.clone()).collect();
    let tool_ids: BTreeSet<String> = graph.tool_entities.iter().map(|e| e.id.clone()).collect();
    let activity_ids: BTreeSet<String> = graph.activities.iter().map(|a| a.id.clone()).collect();
    let mut seen_edges = BTreeSet::new();
    for (e, a) in b.usage {
        if !entity_ids.contains(&e) || !activity_ids.contains(&a) {
            warn(format!("usage {e} -> {a} dropped: endpoint missing or mistyped"));
        } else if seen_edges.insert(("u", e.clone(), a.clone())) {
            graph.usage_edges.push((e, a));
        }
    }
    for (a, e) in b.generation {
        if !entity_ids.contains(&e) || !activity_ids.contains(&a) {
            warn(format!("generation {a} -> {e} dropped: endpoint missing or mistyped"));
        } else if seen_edges.insert(("g", a.clone(), e.clone())) {
            if tool_ids.contains(&e) {
                warn(format!("tool {e} is generated by {a}; edge kept, role stays tool"));
            }
            graph.generation_edges.push((a, e));
        }
    }

    if graph.activities.is_empty() {
        return Err(Error::EmptyRecord(record_id));
    }
    Ok((graph, warnings))
}

/// Renders a graph back into the default PROV-JSONLD layout.
pub fn to_prov_jsonld(g: &ProcessGraph) -> Value {
    let mut items = Vec::new();
    for e in &g.material_entities {
        let mut obj = Map::new();
        obj.insert("@id".into(), json!(e.id));
        obj.insert("@type".into(), json!("prov:Entity"));
        obj.insert("rdfs:label".into(), json!(e.label));
        for (k, v) in &e.attributes {
            obj.insert(format!("matprov:{k}"), json!(v));
        }
        items.push(Value::Object(obj));
    }
    for t in &g.tool_entities {
        let mut obj = Map::new();
        obj.insert("@id".into(), json!(t.id));
        obj.insert("@type".into(), json!(["prov:Entity", "matprov:Tool"]));
        obj.insert("rdfs:label".into(), json!(t.label));
        for (k, v) in &t.attributes {
            obj.insert(format!("matprov:{k}"), json!(v));
        }
        items.push(Value::Object(obj));
    }
    let mut acts: Vec<_> = g.activities.iter().collect();
    acts.sort_by_key(|a| a.source_position);
    for a in acts {
        items.push(json!({
            "@id": a.id,
            "@type": "prov:Activity",
            "rdfs:label": a.label,
            "matprov:conditions": a.conditions,
        }));
    }
    for (e, a) in &g.usage_edges {
        items.push(json!({"@type": "prov:Usage", "prov:activity": a, "prov:entity": e}));
    }
    for (a, e) in &g.generation_edges {
        items.push(json!({"@type": "prov:Generation", "prov:activity": a, "prov:entity": e}));
    }
    let mut meta = Map::new();
    meta.insert("record_id".into(), json!(g.record_id));
    meta.insert("doi".into(), json!(g.doi));
    if let Some(y) = g.year {
        meta.insert("year".into(), json!(y));
    }
    meta.insert("material_class".into(), json!(g.material_class.as_str()));
    json!({
        "@context": {
            "prov": "http://www.w3.org/ns/prov#",
            "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
            "matprov": "https://w3id.org/matprov#"
        },
        "metadata": meta,
        "@graph": items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provgraph::{assign_roles, Role};

    fn parse(doc: Value) -> Result<(ProcessGraph, Vec<ParseWarning>)> {
        parse_record(doc.to_string().as_bytes(), &FieldMap::default())
    }

    fn minimal() -> Value {
        json!({
            "metadata": {"doi": "10.1/X", "year": 2018, "material_class": "Battery"},
            "@graph": [
                {"@id": "e1", "@type": "prov:Entity", "rdfs:label": "Li2CO3", "matprov:form": "powder"},
                {"@id": "a1", "@type": "prov:Activity", "rdfs:label": "Calcine",
                 "matprov:conditions": {"temperature": "800  °C", "heatingRate": {"value": 5, "unit": "K/min"}}},
                {"@id": "e2", "@type": "prov:Entity", "rdfs:label": "LiCoO2"},
                {"@type": "prov:Usage", "prov:activity": "a1", "prov:entity": "e1"},
                {"@type": "prov:Generation", "prov:activity": "a1", "prov:entity": {"@id": "e2"}}
            ]
        })
    }

    #[test]
    fn minimal_chain() {
        let (g, warnings) = parse(minimal()).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(g.material_entities.len(), 2);
        assert_eq!(g.activities.len(), 1);
        assert_eq!(g.usage_edges.len(), 1);
        assert_eq!(g.generation_edges.len(), 1);
        assert_eq!(g.doi, "10.1/x");
        assert_eq!(g.year, Some(2018));
        assert_eq!(g.material_class, MaterialClass::Battery);
        let act = &g.activities[0];
        assert_eq!(act.conditions["temperature"], "800 °c");
        assert_eq!(act.conditions["heating_rate"], "5 k/min");
        assert_eq!(g.material_entities[0].form(), Some("powder"));
    }

    #[test]
    fn tool_typing() {
        let mut doc = minimal();
        let graph = doc["@graph"].as_array_mut().unwrap();
        graph.push(json!({"@id": "t1", "@type": ["prov:Entity", "matprov:Tool"], "rdfs:label": "ball mill"}));
        graph.push(json!({"@type": "prov:Usage", "prov:activity": "a1", "prov:entity": "t1"}));
        let (g, _) = parse(doc).unwrap();
        assert_eq!(g.tool_entities.len(), 1);
        assert_eq!(g.tool_entities[0].kind, EntityKind::Tool);
        assert_eq!(g.usage_edges.len(), 2);
        assert_eq!(g.material_entities.len(), 2);
    }

    #[test]
    fn generated_tool_is_flagged() {
        let mut doc = minimal();
        let graph = doc["@graph"].as_array_mut().unwrap();
        graph.push(json!({"@id": "t1", "@type": "prov:Entity", "category": "equipment", "rdfs:label": "crucible"}));
        graph.push(json!({"@type": "prov:Generation", "prov:activity": "a1", "prov:entity": "t1"}));
        let (g, warnings) = parse(doc).unwrap();
        assert_eq!(g.generation_edges.len(), 2);
        assert!(warnings.iter().any(|w| w.message.contains("tool t1")));
        let g = assign_roles(g);
        assert_eq!(g.entity("t1").unwrap().role, Some(Role::Tool));
    }

    #[test]
    fn inline_relations_and_dedup() {
        let doc = json!({
            "doi": "10.2/y", "year": "2021-03-01",
            "@graph": [
                {"@id": "m", "@type": "prov:Entity", "rdfs:label": "a"},
                {"@id": "x", "@type": "prov:Activity", "rdfs:label": "mix", "prov:used": [{"@id": "m"}], "temperature": "25 C"},
                {"@id": "o", "@type": "prov:Entity", "rdfs:label": "b", "prov:wasGeneratedBy": "x"},
                {"@type": "prov:Usage", "prov:activity": "x", "prov:entity": "m"},
                {"@type": "prov:Usage", "prov:activity": "x", "prov:entity": "ghost"}
            ]
        });
        let (g, warnings) = parse(doc).unwrap();
        assert_eq!(g.usage_edges, vec![("m".to_string(), "x".to_string())]);
        assert_eq!(g.generation_edges.len(), 1);
        assert_eq!(g.year, Some(2021));
        assert_eq!(g.material_class, MaterialClass::Other);
        assert_eq!(g.activities[0].conditions["temperature"], "25 c");
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn prov_json_bundle() {
        let doc = json!({
            "doi": "10.3/z", "year": 2010, "material_class": "magnetic",
            "entity": {"e1": {"prov:label": "Fe"}, "e2": {"prov:label": "Fe3O4"}, "t": {"prov:label": "furnace", "prov:type": "matprov:Tool"}},
            "activity": {"a": {"prov:label": "oxidize"}},
            "used": {"_:u1": {"prov:activity": "a", "prov:entity": "e1"}, "_:u2": {"prov:activity": "a", "prov:entity": "t"}},
            "wasGeneratedBy": {"_:g1": {"prov:activity": "a", "prov:entity": "e2"}}
        });
        let (g, _) = parse(doc).unwrap();
        assert_eq!(g.material_entities.len(), 2);
        assert_eq!(g.tool_entities.len(), 1);
        assert_eq!(g.usage_edges.len(), 2);
        assert_eq!(g.generation_edges.len(), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_record(b"{not json", &FieldMap::default()),
            Err(Error::MalformedDocument(_))
        ));
        assert!(matches!(parse(json!([1, 2])), Err(Error::MalformedDocument(_))));
        assert!(matches!(parse(json!({"x": 1})), Err(Error::MalformedDocument(_))));
        let no_acts = json!({"@graph": [{"@id": "e", "@type": "prov:Entity"}]});
        assert!(matches!(parse(no_acts), Err(Error::EmptyRecord(_))));
    }

    #[test]
    fn custom_field_map() {
        let fm = FieldMap {
            graph_key: "nodes".into(),
            type_key: "kind".into(),
            id_key: "key".into(),
            ..FieldMap::default()
        };
        let doc = json!({"nodes": [
            {"key": "a", "kind": "Activity", "label": "press"},
            {"key": "e", "kind": "Entity", "label": "pellet", "prov:wasGeneratedBy": {"key": "a"}}
        ]});
        let (g, _) = parse_record(doc.to_string().as_bytes(), &fm).unwrap();
        assert_eq!(g.generation_edges, vec![("a".to_string(), "e".to_string())]);
    }

    #[test]
    fn document_streams() {
        let two = b"{\"a\":1}\n\n{\"b\":2}\n";
        assert_eq!(parse_documents(two).unwrap().len(), 2);
        assert_eq!(parse_documents(b"[{\"a\":1},{\"b\":2},{}]").unwrap().len(), 3);
        assert_eq!(parse_documents(b"{\"a\":\n1}").unwrap().len(), 1);
        assert!(parse_documents(b"  ").unwrap().is_empty());
    }

    #[test]
    fn jsonld_round_trip() {
        let (g, _) = parse(minimal()).unwrap();
        let rendered = to_prov_jsonld(&g);
        let (back, _) = parse(rendered).unwrap();
        assert_eq!(back.activities, g.activities);
        assert_eq!(back.usage_edges, g.usage_edges);
        assert_eq!(back.generation_edges, g.generation_edges);
        assert_eq!(back.material_entities, g.material_entities);
        assert_eq!((back.doi, back.year, back.material_class), (g.doi, g.year, g.material_class));
    }
}
