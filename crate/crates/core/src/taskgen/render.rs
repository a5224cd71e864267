//! Deterministic text templates for questions.

use super::{BenchItem, TaskKind, MASK};

/// Bumped whenever any template below changes wording.
pub const TEMPLATE_VERSION: &str = "q-v1";

pub fn option_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

pub fn render_options(item: &BenchItem) -> String {
    item.options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {o}", option_letter(i)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn list(v: &[String]) -> String {
    if v.is_empty() {
        "(none reported)".to_string()
    } else {
        v.join(", ")
    }
}

fn target_step(item: &BenchItem) -> String {
    let q = &item.question;
    let pos = q.step_index.unwrap_or(0);
    let label = q.route.get(pos).cloned().unwrap_or_default();
    let mut s = format!(
        "Synthesis route: {}\nTarget step: step {} ({label})",
        q.route.join(" -> "),
        pos + 1
    );
    if !q.step_inputs.is_empty() {
        s.push_str(&format!("\nInputs to the target step: {}", list(&q.step_inputs)));
    }
    if !q.step_input_forms.is_empty() {
        s.push_str(&format!(" [forms: {}]", list(&q.step_input_forms)));
    }
    s
}

/// Question stem without options.
pub fn render_question(item: &BenchItem) -> String {
    let q = &item.question;
    match item.task {
        TaskKind::A1RouteRetrieval => format!(
            "Which synthesis route produces {} from the precursors {}?",
            list(&q.products),
            list(&q.precursors)
        ),
        TaskKind::A2MissingStep => format!(
            "One step of this synthesis route is hidden as {MASK}: {}\nWhich operation fills the hidden step?",
            q.route.join(" -> ")
        ),
        TaskKind::A3NextActivity => format!(
            "A synthesis route begins: {}\nWhich operation comes next?",
            q.route.join(" -> ")
        ),
        TaskKind::B1ConditionPrediction => format!(
            "{}\nWhat {} was used for the target step?",
            target_step(item),
            q.condition_key.as_deref().unwrap_or("condition").replace('_', " ")
        ),
        TaskKind::B2FullConditionSet => format!(
            "{}\nWhich temperature, duration and atmosphere combination was used for the target step?",
            target_step(item)
        ),
        TaskKind::C1ToolSelection => format!(
            "{}\nWhich tool was used in the target step?",
            target_step(item)
        ),
        TaskKind::DProcessOrdering => {
            let mut s = String::from("These synthesis steps are listed out of order:\n");
            for (i, step) in q.steps.iter().enumerate() {
                let fmt_refs = |refs: &[super::MaterialRef]| {
                    if refs.is_empty() {
                        "nothing".to_string()
                    } else {
                        refs.iter()
                            .map(|r| format!("{} ({})", r.label, r.alias))
                            .collect::<Vec<_>>()
                            .join(", ")
                    }
                };
                s.push_str(&format!(
                    "{}: {} uses {} and yields {}\n",
                    i + 1,
                    step.label,
                    fmt_refs(&step.inputs),
                    fmt_refs(&step.outputs)
                ));
            }
            s.push_str("Which ordering of the steps is causally valid?");
            s
        }
    }
}
