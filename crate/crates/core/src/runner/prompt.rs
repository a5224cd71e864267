//! Versioned prompt templates and answer parsing.

use serde::{Deserialize, Serialize};

use super::client::Message;
use crate::scoring::OptionScores;
use crate::taskgen::{option_letter, render_options, render_question, BenchItem};
use crate::{Error, Result};

pub const PROMPT_VERSION: &str = "p-v1";
pub const PLAN_MARKER: &str = "Write a short plan";
pub const EVIDENCE_PREFIX: &str = "- option ";

const SYSTEM: &str = "You are an expert in materials synthesis. You answer multiple-choice questions about synthesis processes.";
const ANSWER_INSTRUCTION: &str = "Reply with the letter of the single best option.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Plan,
    Answer,
    ZeroShot,
    FewShot,
    Rag,
    Graphrag,
}

/// Everything a template may draw on. Unused fields are ignored.
#[derive(Debug, Clone, Default)]
pub struct PromptContext<'a> {
    /// (graph id, linearized process) of retrieved precedents.
    pub precedents: Vec<(&'a str, &'a str)>,
    pub scores: Option<&'a OptionScores>,
    pub plan: Option<&'a str>,
    pub exemplars: Vec<&'a BenchItem>,
    /// (graph id, one-hop edge lines) of structure-retrieved graphs.
    pub neighbourhoods: Vec<(&'a str, &'a [String])>,
}

/// How much context each mode insists on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Required {
    pub exemplars: usize,
    pub rag: usize,
    pub graph: usize,
}

impl Default for Required {
    fn default() -> Self {
        Self {
            exemplars: 3,
            rag: 3,
            graph: 3,
        }
    }
}

fn question_block(item: &BenchItem) -> String {
    format!("Question:\n{}\nOptions:\n{}", render_question(item), render_options(item))
}

fn precedent_block(precedents: &[(&str, &str)]) -> String {
    let mut s = String::from("Retrieved training processes:");
    for (i, (id, text)) in precedents.iter().enumerate() {
        s.push_str(&format!("\n[{}] {id}: {text}", i + 1));
    }
    s
}

fn evidence_block(scores: &OptionScores) -> String {
    let mut s = String::from("Compatibility evidence (higher is more compatible):");
    for (i, v) in scores.fused.iter().enumerate() {
        s.push_str(&format!("\n{EVIDENCE_PREFIX}{}: {v:.3}", option_letter(i)));
    }
    s
}

fn missing(mode: PromptMode, what: &str) -> Error {
    Error::MissingContext(format!("{mode:?} prompt needs {what}"))
}

pub fn build_prompt(item: &BenchItem, ctx: &PromptContext, mode: PromptMode, req: Required) -> Result<Vec<Message>> {
    let q = question_block(item);
    let user = match mode {
        PromptMode::ZeroShot => format!("{q}\n\n{ANSWER_INSTRUCTION}"),
        PromptMode::FewShot => {
            if ctx.exemplars.len() != req.exemplars {
                return Err(missing(mode, &format!("{} exemplars, got {}", req.exemplars, ctx.exemplars.len())));
            }
            let mut s = String::new();
            for ex in &ctx.exemplars {
                s.push_str(&format!("{}\nAnswer: {}\n\n", question_block(ex), option_letter(ex.gold_index)));
            }
            format!("{s}{q}\n\n{ANSWER_INSTRUCTION}")
        }
        PromptMode::Rag => {
            if ctx.precedents.len() < req.rag {
                return Err(missing(mode, &format!("{} retrieved records", req.rag)));
            }
            format!("{}\n\n{q}\n\n{ANSWER_INSTRUCTION}", precedent_block(&ctx.precedents[..req.rag]))
        }
        PromptMode::Graphrag => {
            if ctx.neighbourhoods.len() < req.graph {
                return Err(missing(mode, &format!("{} graph neighbourhoods", req.graph)));
            }
            let mut s = String::from("Related provenance graphs (one-hop neighbourhoods):");
            for (id, lines) in &ctx.neighbourhoods[..req.graph] {
                s.push_str(&format!("\nGraph {id}:"));
                for l in lines.iter() {
                    s.push_str(&format!("\n  {l}"));
                }
            }
            format!("{s}\n\n{q}\n\n{ANSWER_INSTRUCTION}")
        }
        PromptMode::Plan => {
            if ctx.precedents.is_empty() {
                return Err(missing(mode, "retrieved precedents"));
            }
            let mut s = format!("{}\n\n{q}", precedent_block(&ctx.precedents));
            if let Some(scores) = ctx.scores {
                s.push_str(&format!("\n\n{}", evidence_block(scores)));
            }
            format!("{s}\n\n{PLAN_MARKER} (two or three sentences) for deciding between the options. Do not answer yet.")
        }
        PromptMode::Answer => {
            let scores = ctx.scores.ok_or_else(|| missing(mode, "compatibility scores"))?;
            if ctx.precedents.is_empty() {
                return Err(missing(mode, "retrieved precedents"));
            }
            let mut s = format!("{}\n\n{q}\n\n{}", precedent_block(&ctx.precedents), evidence_block(scores));
            if let Some(plan) = ctx.plan {
                s.push_str(&format!("\n\nPlan:\n{plan}"));
            }
            format!("{s}\n\n{ANSWER_INSTRUCTION}")
        }
    };
    Ok(vec![Message::system(SYSTEM), Message::user(user)])
}

/// First standalone option letter in `text` among the first `k` letters.
pub fn parse_answer(text: &str, k: usize) -> Option<usize> {
    let chars: Vec<char> = text.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        if !c.is_ascii_uppercase() {
            continue;
        }
        let idx = (*c as u8 - b'A') as usize;
        if idx >= k {
            continue;
        }
        let before = i.checked_sub(1).map(|j| chars[j]);
        let after = chars.get(i + 1).copied();
        let boundary = |ch: Option<char>| ch.map_or(true, |ch| !ch.is_alphanumeric());
        if boundary(before) && boundary(after) {
            return Some(idx);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_parsing() {
        assert_eq!(parse_answer("Answer: B", 4), Some(1));
        assert_eq!(parse_answer("(C) because", 4), Some(2));
        assert_eq!(parse_answer("All options look fine", 4), None);
        assert_eq!(parse_answer("E", 4), None);
        assert_eq!(parse_answer("D.", 4), Some(3));
        assert_eq!(parse_answer("", 4), None);
    }
}
