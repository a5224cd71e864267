//! Ablation lattice mirroring the reference tables: reference systems,
//! module removals, scoring variants, retrieval views, fusion presets and
//! top-k sensitivity.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{evaluate, EvalContext, EvalReport, Policy, PolicyConfig};
use crate::retrieval::RetrievalWeights;
use crate::taskgen::BenchItem;
use crate::{Error, Result};

pub const ABLATION_FORMAT: &str = "matproc-ablation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Reference,
    Modules,
    Scoring,
    Retrieval,
    Fusion,
    TopK,
}

impl Block {
    pub const ALL: [Block; 6] = [Block::Reference, Block::Modules, Block::Scoring, Block::Retrieval, Block::Fusion, Block::TopK];

    pub fn as_str(self) -> &'static str {
        match self {
            Block::Reference => "reference",
            Block::Modules => "modules",
            Block::Scoring => "scoring",
            Block::Retrieval => "retrieval",
            Block::Fusion => "fusion",
            Block::TopK => "top_k",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Block::Reference => "Reference systems",
            Block::Modules => "Module ablations",
            Block::Scoring => "Scoring variants",
            Block::Retrieval => "Retrieval decomposition",
            Block::Fusion => "Fusion weights",
            Block::TopK => "Top-k sensitivity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub block: Block,
    pub label: String,
    pub config: PolicyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub block: Block,
    pub label: String,
    pub report: EvalReport,
}

fn point(block: Block, label: &str, config: PolicyConfig) -> GridPoint {
    GridPoint {
        block,
        label: label.to_string(),
        config,
    }
}

fn block_points(block: Block, base: &PolicyConfig) -> Vec<GridPoint> {
    let llm = PolicyConfig {
        policy: Policy::ProvmindLlm,
        ..base.clone()
    };
    let argmax = PolicyConfig {
        policy: Policy::ArgmaxHybrid,
        ..base.clone()
    };
    match block {
        Block::Reference => vec![
            point(block, "LLM-only", PolicyConfig { policy: Policy::ZeroShot, ..base.clone() }),
            point(block, "ProvMind-Symbolic", PolicyConfig { lambda: 1.0, ..llm.clone() }),
            point(block, "ProvMind-Hybrid", llm.clone()),
        ],
        Block::Modules => vec![
            point(block, "w/o planning", PolicyConfig { planning: false, ..llm.clone() }),
            point(block, "w/o symbolic fallback", PolicyConfig { fallback: false, ..llm.clone() }),
            point(block, "w/o symbolic scoring", PolicyConfig { symbolic_scoring: false, ..llm.clone() }),
            point(block, "w/o planning and fallback", PolicyConfig { planning: false, fallback: false, ..llm }),
        ],
        Block::Scoring => [
            ("Neural scoring", 0.0),
            ("Symbolic scoring", 1.0),
            ("Hybrid (0.5 sym / 0.5 neu)", 0.5),
            ("Hybrid (0.7 sym / 0.3 neu)", 0.7),
            ("Hybrid (0.3 sym / 0.7 neu)", 0.3),
        ]
        .into_iter()
        .map(|(l, lambda)| point(block, l, PolicyConfig { lambda, ..argmax.clone() }))
        .collect(),
        Block::Retrieval => [
            ("Text only", (true, false, false)),
            ("Structure only", (false, true, false)),
            ("Heuristic only", (false, false, true)),
            ("Text + structure", (true, true, false)),
            ("Text + heuristic", (true, false, true)),
            ("Structure + heuristic", (false, true, true)),
            ("Full default retrieval", (true, true, true)),
        ]
        .into_iter()
        .map(|(l, (t, s, h))| {
            let weights = RetrievalWeights::views(t, s, h).expect("at least one view");
            point(block, l, PolicyConfig { weights, ..argmax.clone() })
        })
        .collect(),
        Block::Fusion => [
            ("Equal weights", (1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0)),
            ("Text-heavy", (0.6, 0.2, 0.2)),
            ("Structure-heavy", (0.2, 0.6, 0.2)),
            ("Heuristic-heavy", (0.2, 0.2, 0.6)),
        ]
        .into_iter()
        .map(|(l, (a, b, g))| {
            let weights = RetrievalWeights { alpha: a, beta: b, gamma: g };
            point(block, l, PolicyConfig { weights, ..argmax.clone() })
        })
        .collect(),
        Block::TopK => [1, 2, 4, 8, 16]
            .into_iter()
            .map(|k| point(block, &format!("k = {k}"), PolicyConfig { k, ..argmax.clone() }))
            .collect(),
    }
}

fn parse_list<T: std::str::FromStr>(axis: &str, values: &str) -> Result<Vec<T>> {
    values
        .split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| Error::InvalidGridAxis(format!("{axis}: bad value {v}"))))
        .collect()
}

/// Expands axis specs into grid points. An axis is a block name
/// (`reference`, `modules`, `scoring`, `retrieval`, `fusion`, `top_k`) or a
/// custom sweep `k:1,2,4` / `lambda:1,0.5,0`. An empty list means all blocks.
pub fn grid(axes: &[String], base: &PolicyConfig) -> Result<Vec<GridPoint>> {
    if axes.is_empty() {
        return Ok(Block::ALL.iter().flat_map(|b| block_points(*b, base)).collect());
    }
    let argmax = PolicyConfig {
        policy: Policy::ArgmaxHybrid,
        ..base.clone()
    };
    let mut out = Vec::new();
    for axis in axes {
        let axis = axis.trim();
        if let Some(b) = Block::ALL.iter().find(|b| b.as_str() == axis || (axis == "topk" && **b == Block::TopK)) {
            out.extend(block_points(*b, base));
            continue;
        }
        match axis.split_once(':') {
            Some(("k", vals)) => {
                for k in parse_list::<usize>("k", vals)? {
                    if k == 0 {
                        return Err(Error::InvalidGridAxis("k must be positive".into()));
                    }
                    out.push(point(Block::TopK, &format!("k = {k}"), PolicyConfig { k, ..argmax.clone() }));
                }
            }
            Some(("lambda", vals)) => {
                for lambda in parse_list::<f64>("lambda", vals)? {
                    if !(0.0..=1.0).contains(&lambda) {
                        return Err(Error::InvalidGridAxis(format!("lambda {lambda} outside [0, 1]")));
                    }
                    out.push(point(Block::Scoring, &format!("lambda = {lambda}"), PolicyConfig { lambda, ..argmax.clone() }));
                }
            }
            _ => return Err(Error::InvalidGridAxis(axis.to_string())),
        }
    }
    Ok(out)
}

pub fn run_ablation(points: &[GridPoint], items: &[BenchItem], ctx: &EvalContext) -> Result<Vec<AblationRow>> {
    points
        .iter()
        .map(|p| {
            let outcome = evaluate(items, ctx, &p.config)?;
            Ok(AblationRow {
                block: p.block,
                label: p.label.clone(),
                report: outcome.report,
            })
        })
        .collect()
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<30} {:>12} {:>16}", "Configuration", "Accuracy (%)", "Correct / Total");
    let mut current = None;
    for r in rows {
        if current != Some(r.block) {
            let _ = writeln!(s, "-- {} --", r.block.title());
            current = Some(r.block);
        }
        let o = r.report.overall;
        let _ = writeln!(s, "{:<30} {:>12.2} {:>16}", r.label, 100.0 * o.accuracy, format!("{} / {}", o.correct, o.total));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_shapes() {
        let base = PolicyConfig::default();
        let all = grid(&[], &base).unwrap();
        let count = |b: Block| all.iter().filter(|p| p.block == b).count();
        assert_eq!(count(Block::Reference), 3);
        assert_eq!(count(Block::Modules), 4);
        assert_eq!(count(Block::Scoring), 5);
        assert_eq!(count(Block::Retrieval), 7);
        assert_eq!(count(Block::Fusion), 4);
        assert_eq!(count(Block::TopK), 5);
        for p in &all {
            p.config.check().unwrap();
        }
        assert_eq!(grid(&["k:1,2,4,8,16".into()], &base).unwrap().len(), 5);
        assert!(matches!(grid(&["depth".into()], &base), Err(Error::InvalidGridAxis(_))));
        assert!(matches!(grid(&["k:0".into()], &base), Err(Error::InvalidGridAxis(_))));
    }
}
