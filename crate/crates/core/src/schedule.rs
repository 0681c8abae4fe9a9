//! Point-to-point communication schedules.
//!
//! Two processors exchange vector chunks for every row block their sets
//! share. Demands are grouped into layers by the number of shared blocks;
//! each layer is a directed sender → receiver graph whose bipartite double
//! cover is split into perfect matchings, one matching per step. In a step
//! every processor sends at most one message and receives at most one.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{greedy_decompose, regular_decompose, BipartiteGraph, Matching};
use crate::partition::TetraPartition;
use crate::report::{all_passed, CheckResult};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransferDemand {
    pub src: usize,
    pub dst: usize,
    /// Shared row blocks, ascending.
    pub blocks: Vec<u32>,
}

/// One demand for every ordered pair of processors whose row-block sets meet.
pub fn build_demands(part: &TetraPartition) -> Vec<TransferDemand> {
    let procs = part.processors();
    let mut out = Vec::new();
    for src in 0..procs {
        for dst in 0..procs {
            if src == dst {
                continue;
            }
            let blocks: Vec<u32> = part.sets[src]
                .iter()
                .copied()
                .filter(|i| part.sets[dst].contains(i))
                .collect();
            if !blocks.is_empty() {
                out.push(TransferDemand { src, dst, blocks });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerInfo {
    pub blocks_per_message: usize,
    pub steps: usize,
    /// False when the layer was not regular and fell back to repeated
    /// maximum matchings.
    pub regular: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommSchedule {
    pub processors: usize,
    pub steps: Vec<Vec<TransferDemand>>,
    pub layers: Vec<LayerInfo>,
}

impl CommSchedule {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// True when every layer decomposed into exactly its degree in steps.
    pub fn exact(&self) -> bool {
        self.layers.iter().all(|l| l.regular)
    }

    pub fn to_document(&self, design: impl Into<String>, chunk: usize) -> ScheduleDocument {
        let steps: Vec<Vec<TransferEntry>> = self
            .steps
            .iter()
            .map(|s| {
                s.iter()
                    .map(|t| TransferEntry { src: t.src + 1, dst: t.dst + 1, blocks: t.blocks.clone() })
                    .collect()
            })
            .collect();
        let words_per_step = self
            .steps
            .iter()
            .map(|s| s.iter().map(|t| t.blocks.len() * chunk).max().unwrap_or(0))
            .collect();
        ScheduleDocument {
            meta: ScheduleMeta {
                design: design.into(),
                processors: self.processors,
                steps: self.step_count(),
                exact: self.exact(),
                layers: self.layers.clone(),
                words_per_step,
            },
            steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleDocument {
    pub meta: ScheduleMeta,
    pub steps: Vec<Vec<TransferEntry>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleMeta {
    pub design: String,
    pub processors: usize,
    pub steps: usize,
    pub exact: bool,
    pub layers: Vec<LayerInfo>,
    pub words_per_step: Vec<usize>,
}

/// A transfer with 1-based processor ids, as written to JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransferEntry {
    pub src: usize,
    pub dst: usize,
    pub blocks: Vec<u32>,
}

/// Orders demands into steps, larger messages first.
pub fn build_schedule(demands: &[TransferDemand], processors: usize) -> Result<CommSchedule> {
    let mut by_size: HashMap<usize, Vec<&TransferDemand>> = HashMap::new();
    for d in demands {
        if d.src >= processors || d.dst >= processors || d.src == d.dst {
            return Err(Error::InvalidArgument(format!("bad demand {} -> {}", d.src, d.dst)));
        }
        by_size.entry(d.blocks.len()).or_default().push(d);
    }
    let mut sizes: Vec<usize> = by_size.keys().copied().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));

    let mut steps = Vec::new();
    let mut layers = Vec::new();
    for size in sizes {
        let layer = &by_size[&size];
        let lookup: HashMap<(usize, usize), &TransferDemand> =
            layer.iter().map(|d| ((d.src, d.dst), *d)).collect();
        let g = BipartiteGraph::from_edges(processors, processors, layer.iter().map(|d| (d.src, d.dst)))?;
        let (matchings, regular): (Vec<Matching>, bool) = match g.regular_degree() {
            Some(deg) => (regular_decompose(&g, deg)?, true),
            None => (greedy_decompose(&g), false),
        };
        layers.push(LayerInfo { blocks_per_message: size, steps: matchings.len(), regular });
        for m in matchings {
            steps.push(m.pairs.iter().map(|&(s, d)| lookup[&(s, d)].clone()).collect());
        }
    }
    Ok(CommSchedule { processors, steps, layers })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleReport {
    pub steps: usize,
    pub checks: Vec<CheckResult>,
    /// Words each processor sends per vector.
    pub send_volume: Vec<u64>,
    pub recv_volume: Vec<u64>,
}

impl ScheduleReport {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
        if failed.is_empty() {
            format!("{} steps, all checks pass", self.steps)
        } else {
            failed.join("; ")
        }
    }
}

/// Checks the one-send/one-receive rule, exact demand coverage and the
/// per-processor volume for chunks of `chunk` words.
pub fn validate(sched: &CommSchedule, demands: &[TransferDemand], chunk: usize) -> ScheduleReport {
    let procs = sched.processors;
    let mut checks = Vec::new();

    let mut send_clash = None;
    let mut recv_clash = None;
    for (s, step) in sched.steps.iter().enumerate() {
        let mut sending = vec![false; procs];
        let mut receiving = vec![false; procs];
        for t in step {
            if t.src >= procs || t.dst >= procs {
                continue;
            }
            if std::mem::replace(&mut sending[t.src], true) && send_clash.is_none() {
                send_clash = Some(vec![s as u32 + 1, t.src as u32 + 1]);
            }
            if std::mem::replace(&mut receiving[t.dst], true) && recv_clash.is_none() {
                recv_clash = Some(vec![s as u32 + 1, t.dst as u32 + 1]);
            }
        }
    }
    checks.push(match send_clash {
        None => CheckResult::pass("one send per step", "no processor sends twice in a step"),
        Some(w) => CheckResult::fail("one send per step", "processor sends twice in one step [step, proc]", Some(w)),
    });
    checks.push(match recv_clash {
        None => CheckResult::pass("one receive per step", "no processor receives twice in a step"),
        Some(w) => CheckResult::fail("one receive per step", "processor receives twice in one step [step, proc]", Some(w)),
    });

    let mut wanted: HashMap<&TransferDemand, i64> = HashMap::new();
    for d in demands {
        *wanted.entry(d).or_default() += 1;
    }
    for t in sched.steps.iter().flatten() {
        *wanted.entry(t).or_default() -= 1;
    }
    let mut off: Vec<(&TransferDemand, i64)> = wanted.into_iter().filter(|&(_, c)| c != 0).collect();
    off.sort();
    checks.push(match off.first() {
        None => CheckResult::pass("demand coverage", format!("all {} demands scheduled exactly once", demands.len())),
        Some((d, c)) => CheckResult::fail(
            "demand coverage",
            if *c > 0 { "demand never scheduled [src, dst]" } else { "transfer scheduled without matching demand [src, dst]" },
            Some(vec![d.src as u32 + 1, d.dst as u32 + 1]),
        ),
    });

    let mut send_volume = vec![0u64; procs];
    let mut recv_volume = vec![0u64; procs];
    for t in sched.steps.iter().flatten() {
        if t.src < procs && t.dst < procs {
            send_volume[t.src] += (t.blocks.len() * chunk) as u64;
            recv_volume[t.dst] += (t.blocks.len() * chunk) as u64;
        }
    }
    let mut expected = vec![0u64; procs];
    for d in demands {
        if d.src < procs {
            expected[d.src] += (d.blocks.len() * chunk) as u64;
        }
    }
    let bad = (0..procs).find(|&p| send_volume[p] != expected[p]);
    checks.push(match bad {
        None => CheckResult::pass("send volume", "every processor sends exactly its demanded words"),
        Some(p) => CheckResult::fail(
            "send volume",
            format!("processor {} sends {} words, demanded {}", p + 1, send_volume[p], expected[p]),
            Some(vec![p as u32 + 1]),
        ),
    });

    ScheduleReport { steps: sched.step_count(), checks, send_volume, recv_volume }
}

/// Bandwidth of the modeled All-to-All exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AllToAllCost {
    /// Words in each of the `steps` fixed-size messages.
    pub words_per_step: u64,
    pub steps: u64,
    pub per_vector: u64,
    pub both_vectors: u64,
}

/// Bandwidth-optimal All-to-All: P − 1 steps, each carrying one slot of
/// (max shared row blocks) · chunk words.
pub fn alltoall_cost(part: &TetraPartition, chunk: usize) -> AllToAllCost {
    let max_shared = build_demands(part).iter().map(|d| d.blocks.len()).max().unwrap_or(0);
    let words_per_step = (max_shared * chunk) as u64;
    let steps = part.processors().saturating_sub(1) as u64;
    AllToAllCost {
        words_per_step,
        steps,
        per_vector: words_per_step * steps,
        both_vectors: 2 * words_per_step * steps,
    }
}
