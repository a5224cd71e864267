// Two PROV-JSONLD records compiled into process graphs: one clean solid-state
// route, one with a cycle that is rejected with a warning.

use matproc::provgraph::{compile_all, to_prov_jsonld, FieldMap, Role};
use serde_json::json;

pub fn run() -> matproc::Result<()> {
    let route = json!({
        "metadata": {"doi": "10.1000/LCO.2019", "year": 2019, "material_class": "Li-ion cathode"},
        "@graph": [
            {"@id": "li", "@type": "prov:Entity", "rdfs:label": "Li2CO3", "matprov:form": "powder"},
            {"@id": "co", "@type": "prov:Entity", "rdfs:label": "Co3O4", "matprov:form": "powder"},
            {"@id": "mill", "@type": ["prov:Entity", "matprov:Tool"], "rdfs:label": "planetary ball mill"},
            {"@id": "a1", "@type": "prov:Activity", "rdfs:label": "Ball milling",
             "matprov:conditions": {"duration": "4 h", "speed": "300 rpm"}},
            {"@id": "mix", "@type": "prov:Entity", "rdfs:label": "precursor mixture"},
            {"@id": "a2", "@type": "prov:Activity", "rdfs:label": "Calcination",
             "matprov:conditions": {"temperature": "900 °C", "duration": "12 h", "atmosphere": "air"}},
            {"@id": "lco", "@type": "prov:Entity", "rdfs:label": "LiCoO2"},
            {"@type": "prov:Usage", "prov:activity": "a1", "prov:entity": "li"},
            {"@type": "prov:Usage", "prov:activity": "a1", "prov:entity": "co"},
            {"@type": "prov:Usage", "prov:activity": "a1", "prov:entity": "mill"},
            {"@type": "prov:Generation", "prov:activity": "a1", "prov:entity": "mix"},
            {"@type": "prov:Usage", "prov:activity": "a2", "prov:entity": "mix"},
            {"@type": "prov:Generation", "prov:activity": "a2", "prov:entity": "lco"}
        ]
    });
    let cyclic = json!({
        "metadata": {"doi": "10.1000/loop", "year": 2022, "material_class": "thermoelectric"},
        "@graph": [
            {"@id": "x", "@type": "prov:Entity", "rdfs:label": "x"},
            {"@id": "y", "@type": "prov:Entity", "rdfs:label": "y"},
            {"@id": "p", "@type": "prov:Activity", "rdfs:label": "anneal"},
            {"@id": "q", "@type": "prov:Activity", "rdfs:label": "quench"},
            {"@type": "prov:Usage", "prov:activity": "p", "prov:entity": "x"},
            {"@type": "prov:Generation", "prov:activity": "p", "prov:entity": "y"},
            {"@type": "prov:Usage", "prov:activity": "q", "prov:entity": "y"},
            {"@type": "prov:Generation", "prov:activity": "q", "prov:entity": "x"}
        ]
    });
    let docs = vec![
        ("lco".to_string(), route.to_string().into_bytes()),
        ("loop".to_string(), cyclic.to_string().into_bytes()),
    ];
    let (graphs, warnings) = compile_all(&docs, &FieldMap::default());

    let g = &graphs[0];
    println!("{} ({}, {:?}, {})", g.record_id, g.doi, g.year, g.material_class.as_str());
    println!("route: {}", g.route_labels().join(" -> "));
    for a in g.ordered_activities() {
        println!("  {} {:?}", a.label, a.conditions);
    }
    for role in [Role::Precursor, Role::Intermediate, Role::Product] {
        println!("{role:?}: {:?}", g.material_labels_with_role(role));
    }
    println!("tools: {:?}", g.tool_labels());
    for w in &warnings {
        println!("warning [{}]: {}", w.record_id, w.message);
    }

    // Exported documents compile back to the same graph.
    let again = to_prov_jsonld(g).to_string().into_bytes();
    let (back, _) = compile_all(&[("again".into(), again)], &FieldMap::default());
    assert_eq!(back[0].route_labels(), g.route_labels());
    Ok(())
}

#[allow(dead_code)]
fn main() -> matproc::Result<()> {
    run()
}
