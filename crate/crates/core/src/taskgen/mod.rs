//! Seven-task multiple-choice benchmark generation.

mod instantiate;
mod pools;
mod render;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use instantiate::{generate_benchmark, instantiate_tasks, Instantiated, SkipRecord};
pub use pools::{build_candidate_pools, DistractorPools};
pub use render::{option_letter, render_options, render_question, TEMPLATE_VERSION};
pub use validate::{validate_all, validate_item, ValidityReport};

use crate::provgraph::MaterialClass;
use crate::Error;

pub const BENCHMARK_FORMAT: &str = "matproc-benchmark";

/// Separator between activity labels in a rendered route.
pub const ROUTE_SEP: &str = " -> ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "A1_route_retrieval")]
    A1RouteRetrieval,
    #[serde(rename = "A2_missing_step")]
    A2MissingStep,
    #[serde(rename = "A3_next_activity")]
    A3NextActivity,
    #[serde(rename = "B1_condition_prediction")]
    B1ConditionPrediction,
    #[serde(rename = "B2_full_condition_set")]
    B2FullConditionSet,
    #[serde(rename = "C1_tool_selection")]
    C1ToolSelection,
    #[serde(rename = "D_process_ordering")]
    DProcessOrdering,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::A1RouteRetrieval,
        TaskKind::A2MissingStep,
        TaskKind::A3NextActivity,
        TaskKind::B1ConditionPrediction,
        TaskKind::B2FullConditionSet,
        TaskKind::C1ToolSelection,
        TaskKind::DProcessOrdering,
    ];

    pub fn code(self) -> &'static str {
        match self {
            TaskKind::A1RouteRetrieval => "A1",
            TaskKind::A2MissingStep => "A2",
            TaskKind::A3NextActivity => "A3",
            TaskKind::B1ConditionPrediction => "B1",
            TaskKind::B2FullConditionSet => "B2",
            TaskKind::C1ToolSelection => "C1",
            TaskKind::DProcessOrdering => "D",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::A1RouteRetrieval => "A1_route_retrieval",
            TaskKind::A2MissingStep => "A2_missing_step",
            TaskKind::A3NextActivity => "A3_next_activity",
            TaskKind::B1ConditionPrediction => "B1_condition_prediction",
            TaskKind::B2FullConditionSet => "B2_full_condition_set",
            TaskKind::C1ToolSelection => "C1_tool_selection",
            TaskKind::DProcessOrdering => "D_process_ordering",
        }
    }

    /// Share of each task in the published benchmark (percent of 34,975 items).
    pub fn reference_share(self) -> f64 {
        match self {
            TaskKind::A1RouteRetrieval => 5.54,
            TaskKind::A2MissingStep => 17.82,
            TaskKind::A3NextActivity => 20.87,
            TaskKind::B1ConditionPrediction => 35.28,
            TaskKind::B2FullConditionSet => 3.11,
            TaskKind::C1ToolSelection => 12.55,
            TaskKind::DProcessOrdering => 4.83,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s) || t.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

/// A material mentioned in a process-ordering question, under a
/// question-local alias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialRef {
    pub alias: String,
    pub label: String,
}

/// One shuffled step of a process-ordering question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepView {
    pub label: String,
    pub inputs: Vec<MaterialRef>,
    pub outputs: Vec<MaterialRef>,
}

/// Structured question payload. Which fields are populated depends on the task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Question {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub products: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub precursors: Vec<String>,
    /// Visible route: full route (B/C), prefix (A3) or route with a masked slot (A2).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub route: Vec<String>,
    /// Masked position (A2) or target step position (B1/B2/C1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_index: Option<usize>,
    /// Number of activities in the full route, when the route is partially hidden.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_key: Option<String>,
    /// Labels of the materials consumed by the target step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub step_inputs: Vec<String>,
    /// Forms of the materials consumed by the target step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub step_input_forms: Vec<String>,
    /// Shuffled steps for process ordering.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<StepView>,
}

pub const MASK: &str = "[MASK]";

/// Pointers back into the source graph. Never shown to answer policies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Target activity (A2/A3/B/C), all ordered activities (A1) or the
    /// activity behind each shuffled step (D).
    pub activity_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchItem {
    pub item_id: String,
    pub task: TaskKind,
    pub question: Question,
    pub options: Vec<String>,
    pub gold_index: usize,
    pub graph_id: String,
    pub doi: String,
    pub year: Option<i32>,
    pub material_class: MaterialClass,
    #[serde(default)]
    pub provenance: Provenance,
}

impl BenchItem {
    pub fn gold(&self) -> &str {
        &self.options[self.gold_index]
    }
}

/// Per-graph emission caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskCaps {
    pub a1: usize,
    pub a2: usize,
    pub a3: usize,
    pub b1: usize,
    pub b2: usize,
    pub c1: usize,
    pub d: usize,
}

impl Default for TaskCaps {
    fn default() -> Self {
        Self {
            a1: 1,
            a2: 4,
            a3: 5,
            b1: 8,
            b2: 1,
            c1: 3,
            d: 1,
        }
    }
}

impl TaskCaps {
    pub fn get(&self, task: TaskKind) -> usize {
        match task {
            TaskKind::A1RouteRetrieval => self.a1,
            TaskKind::A2MissingStep => self.a2,
            TaskKind::A3NextActivity => self.a3,
            TaskKind::B1ConditionPrediction => self.b1,
            TaskKind::B2FullConditionSet => self.b2,
            TaskKind::C1ToolSelection => self.c1,
            TaskKind::DProcessOrdering => self.d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskGenConfig {
    pub k_options: usize,
    pub seed: u64,
    pub caps: TaskCaps,
}

impl Default for TaskGenConfig {
    fn default() -> Self {
        Self {
            k_options: 4,
            seed: 0,
            caps: TaskCaps::default(),
        }
    }
}

/// Renders a route as one option string.
pub fn route_string(labels: &[String]) -> String {
    labels.join(ROUTE_SEP)
}

/// Renders a complete (temperature, duration, atmosphere) tuple.
pub fn tuple_string(conditions: &BTreeMap<String, String>) -> Option<String> {
    let parts: Option<Vec<String>> = crate::provgraph::TUPLE_KEYS
        .iter()
        .map(|k| conditions.get(*k).map(|v| format!("{k}={v}")))
        .collect();
    parts.map(|p| p.join("; "))
}

/// Renders a process-ordering option from 0-based step indices.
pub fn order_string(order: &[usize], steps: &[StepView]) -> String {
    order
        .iter()
        .map(|&i| format!("{}:{}", i + 1, steps[i].label))
        .collect::<Vec<_>>()
        .join(ROUTE_SEP)
}

/// Parses a process-ordering option back into 0-based step indices.
pub fn parse_order(option: &str) -> Option<Vec<usize>> {
    option
        .split(ROUTE_SEP)
        .map(|tok| {
            let (num, _) = tok.split_once(':')?;
            num.trim().parse::<usize>().ok()?.checked_sub(1)
        })
        .collect()
}

/// Step-level constraints visible in a process-ordering question: step `i`
/// precedes step `j` when an output of `i` is an input of `j`.
pub fn visible_constraints(steps: &[StepView]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in steps.iter().enumerate() {
        for (j, b) in steps.iter().enumerate() {
            if i != j && a.outputs.iter().any(|o| b.inputs.iter().any(|x| x.alias == o.alias)) {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn satisfies(order: &[usize], constraints: &[(usize, usize)]) -> bool {
    let mut pos = vec![usize::MAX; order.len()];
    for (p, &s) in order.iter().enumerate() {
        if s < pos.len() {
            pos[s] = p;
        }
    }
    constraints
        .iter()
        .all(|&(a, b)| a < pos.len() && b < pos.len() && pos[a] < pos[b])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for t in TaskKind::ALL {
            assert_eq!(t.name().parse::<TaskKind>().unwrap(), t);
            assert_eq!(t.code().parse::<TaskKind>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
        assert!("E9".parse::<TaskKind>().is_err());
        let total: f64 = TaskKind::ALL.iter().map(|t| t.reference_share()).sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn order_strings() {
        let steps: Vec<StepView> = ["mill", "press", "sinter"]
            .iter()
            .map(|l| StepView {
                label: l.to_string(),
                inputs: vec![],
                outputs: vec![],
            })
            .collect();
        let s = order_string(&[2, 0, 1], &steps);
        assert_eq!(s, "3:sinter -> 1:mill -> 2:press");
        assert_eq!(parse_order(&s).unwrap(), vec![2, 0, 1]);
        assert!(parse_order("mill -> press").is_none());
        assert!(satisfies(&[0, 1, 2], &[(0, 1), (1, 2)]));
        assert!(!satisfies(&[1, 0, 2], &[(0, 1)]));
    }
}
