//! Parallel STTSV on virtual processors with exact word accounting.
//!
//! A run has three phases. Processors first gather the full row blocks of x
//! they need, then apply the symmetric kernel to their own tensor blocks,
//! then send partial y chunks back to the chunk owners, who sum them. Only
//! vector data ever travels; tensor entries stay with their owner.

use serde::Serialize;

use crate::bounds::lower_bound;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::partition::{storage_count, tb3, BlockIndex, TetraPartition, VectorLayout};
use crate::report::{all_passed, CheckResult};
use crate::schedule::{alltoall_cost, build_demands, build_schedule, validate, CommSchedule};
use crate::tensor::{packed_len, sttsv_symmetric, symmetric_update, ternary_count, DenseVector, PackedSymTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    P2p,
    AllToAll,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p2p" => Ok(Mode::P2p),
            "alltoall" => Ok(Mode::AllToAll),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ProcessorCounters {
    /// 1-based processor id.
    pub id: usize,
    pub words_sent: u64,
    pub words_received: u64,
    /// Words sent while gathering x.
    pub sent_x: u64,
    /// Words sent while reducing y.
    pub sent_y: u64,
    pub ternary_mults: u64,
    pub tensor_elems: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub mode: Mode,
    pub n: usize,
    pub processors: Vec<ProcessorCounters>,
    /// Largest `words_sent` over processors.
    pub max_volume: u64,
    pub total_sent: u64,
    pub total_received: u64,
    pub steps_per_vector: usize,
    /// Steps over both the gather and the reduce phase.
    pub steps: usize,
    /// Every step moved as many words out as in.
    pub conserved: bool,
    #[serde(skip)]
    pub y: DenseVector,
}

struct VirtualProcessor {
    rows: Vec<u32>,
    /// Position of row block `i` in `rows`, at `i - 1`.
    slot: Vec<Option<usize>>,
    blocks: Vec<BlockIndex>,
    x: Vec<Vec<f64>>,
    filled: Vec<usize>,
    y: Vec<Vec<f64>>,
    /// Partial y chunks received for rows this processor owns a chunk of:
    /// (row, sender, values).
    incoming: Vec<(u32, usize, Vec<f64>)>,
    counters: ProcessorCounters,
}

impl VirtualProcessor {
    fn row(&self, i: u32) -> usize {
        self.slot[i as usize - 1].expect("row held by processor")
    }
}

struct Message {
    src: usize,
    dst: usize,
    words: u64,
    /// (row block, offset inside the row, values).
    payload: Vec<(u32, usize, Vec<f64>)>,
}

/// Runs with the default execution policy and, in p2p mode, the schedule
/// built from the partition.
pub fn simulate(
    a: &PackedSymTensor,
    x: &[f64],
    part: &TetraPartition,
    layout: &VectorLayout,
    mode: Mode,
) -> Result<SimReport> {
    simulate_with(a, x, part, layout, mode, Exec::default(), None)
}

pub fn simulate_with(
    a: &PackedSymTensor,
    x: &[f64],
    part: &TetraPartition,
    layout: &VectorLayout,
    mode: Mode,
    exec: Exec,
    schedule: Option<&CommSchedule>,
) -> Result<SimReport> {
    let n = layout.n;
    if a.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.n() });
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    if layout.m != part.m as usize || layout.owners != part.sharers {
        return Err(Error::InvalidArgument("vector layout does not match the partition".into()));
    }
    let procs_n = part.processors();
    let b = layout.b;
    let chunk = layout.chunk;

    let mut procs: Vec<VirtualProcessor> = (0..procs_n)
        .map(|p| {
            let rows = part.sets[p].clone();
            let mut slot = vec![None; layout.m];
            for (pos, &i) in rows.iter().enumerate() {
                slot[i as usize - 1] = Some(pos);
            }
            VirtualProcessor {
                x: vec![vec![0.0; b]; rows.len()],
                filled: vec![0; rows.len()],
                y: vec![vec![0.0; b]; rows.len()],
                slot,
                rows,
                blocks: part.owned_blocks(p),
                incoming: Vec::new(),
                counters: ProcessorCounters { id: p + 1, ..Default::default() },
            }
        })
        .collect();

    for (p, proc_) in procs.iter().enumerate() {
        for blk in &proc_.blocks {
            if let Some(&i) = blk.coords().iter().find(|&&i| proc_.slot[i as usize - 1].is_none()) {
                return Err(Error::Locality { processor: p + 1, row_block: i });
            }
        }
    }

    // Each processor starts with its own chunks of x.
    for (p, proc_) in procs.iter_mut().enumerate() {
        for pos in 0..proc_.rows.len() {
            let i = proc_.rows[pos];
            let r = layout.chunk_range(i, p).expect("owner of its own row");
            let g = layout.row_start(i);
            proc_.x[pos][r.clone()].copy_from_slice(&x[g + r.start..g + r.end]);
            proc_.filled[pos] += chunk;
        }
    }

    let owned_schedule;
    let step_plan: Vec<Vec<(usize, usize, Vec<u32>)>> = match mode {
        Mode::P2p => {
            let demands = build_demands(part);
            let sched = match schedule {
                Some(s) => s,
                None => {
                    owned_schedule = build_schedule(&demands, procs_n)?;
                    &owned_schedule
                }
            };
            let report = validate(sched, &demands, chunk);
            if !report.passed() {
                return Err(Error::InvalidSchedule(Box::new(report)));
            }
            sched
                .steps
                .iter()
                .map(|s| s.iter().map(|t| (t.src, t.dst, t.blocks.clone())).collect())
                .collect()
        }
        Mode::AllToAll => (1..procs_n)
            .map(|shift| {
                (0..procs_n)
                    .map(|src| {
                        let dst = (src + shift) % procs_n;
                        let shared = part.sets[src].iter().copied().filter(|i| part.sets[dst].contains(i)).collect();
                        (src, dst, shared)
                    })
                    .collect()
            })
            .collect(),
    };
    let slot_words = match mode {
        Mode::P2p => None,
        Mode::AllToAll => Some(alltoall_cost(part, chunk).words_per_step),
    };

    let mut conserved = true;

    // Gather x.
    for step in &step_plan {
        let messages: Vec<Message> = step
            .iter()
            .map(|(src, dst, rows)| {
                let from = &procs[*src];
                let payload: Vec<(u32, usize, Vec<f64>)> = rows
                    .iter()
                    .map(|&i| {
                        let r = layout.chunk_range(i, *src).expect("sender owns a chunk");
                        (i, r.start, from.x[from.row(i)][r].to_vec())
                    })
                    .collect();
                let data: u64 = payload.iter().map(|(_, _, v)| v.len() as u64).sum();
                Message { src: *src, dst: *dst, words: slot_words.unwrap_or(data), payload }
            })
            .collect();
        conserved &= deliver(&mut procs, messages, |proc_, i, off, vals, _| {
            let pos = proc_.row(i);
            proc_.x[pos][off..off + vals.len()].copy_from_slice(&vals);
            proc_.filled[pos] += vals.len();
        }, |c, w| c.sent_x += w);
    }
    for (p, proc_) in procs.iter().enumerate() {
        if let Some(pos) = proc_.filled.iter().position(|&f| f != b) {
            return Err(Error::Internal(format!(
                "processor {} holds {} of {b} entries of row block {} after the gather",
                p + 1,
                proc_.filled[pos],
                proc_.rows[pos]
            )));
        }
    }

    // Local compute.
    exec.for_each_mut(&mut procs, |proc_| local_compute(proc_, a, b));

    // Reduce y.
    for step in &step_plan {
        let messages: Vec<Message> = step
            .iter()
            .map(|(src, dst, rows)| {
                let from = &procs[*src];
                let payload: Vec<(u32, usize, Vec<f64>)> = rows
                    .iter()
                    .map(|&i| {
                        let r = layout.chunk_range(i, *dst).expect("receiver owns a chunk");
                        (i, r.start, from.y[from.row(i)][r].to_vec())
                    })
                    .collect();
                let data: u64 = payload.iter().map(|(_, _, v)| v.len() as u64).sum();
                Message { src: *src, dst: *dst, words: slot_words.unwrap_or(data), payload }
            })
            .collect();
        conserved &= deliver(&mut procs, messages, |proc_, i, _, vals, src| {
            proc_.incoming.push((i, src, vals));
        }, |c, w| c.sent_y += w);
    }

    // Sum partials at the owners in ascending contributor order.
    let mut y = vec![0.0; n];
    for (p, proc_) in procs.iter().enumerate() {
        for (pos, &i) in proc_.rows.iter().enumerate() {
            let r = layout.chunk_range(i, p).expect("owner of its own row");
            let mut parts: Vec<(usize, &[f64])> = proc_
                .incoming
                .iter()
                .filter(|(row, _, _)| *row == i)
                .map(|(_, src, v)| (*src, v.as_slice()))
                .collect();
            parts.push((p, &proc_.y[pos][r.clone()]));
            parts.sort_by_key(|&(src, _)| src);
            let g = layout.row_start(i) + r.start;
            for (_, vals) in parts {
                for (t, v) in vals.iter().enumerate() {
                    y[g + t] += v;
                }
            }
        }
    }

    let processors: Vec<ProcessorCounters> = procs.into_iter().map(|p| p.counters).collect();
    let total_sent = processors.iter().map(|c| c.words_sent).sum();
    let total_received = processors.iter().map(|c| c.words_received).sum();
    Ok(SimReport {
        mode,
        n,
        max_volume: processors.iter().map(|c| c.words_sent).max().unwrap_or(0),
        processors,
        total_sent,
        total_received,
        steps_per_vector: step_plan.len(),
        steps: 2 * step_plan.len(),
        conserved: conserved && total_sent == total_received,
        y,
    })
}

/// Delivers one step's messages; returns whether words out equal words in.
fn deliver(
    procs: &mut [VirtualProcessor],
    messages: Vec<Message>,
    mut store: impl FnMut(&mut VirtualProcessor, u32, usize, Vec<f64>, usize),
    mut phase: impl FnMut(&mut ProcessorCounters, u64),
) -> bool {
    let mut out = 0;
    let mut inn = 0;
    for msg in messages {
        let sender = &mut procs[msg.src].counters;
        sender.words_sent += msg.words;
        phase(sender, msg.words);
        out += msg.words;
        let receiver = &mut procs[msg.dst];
        receiver.counters.words_received += msg.words;
        inn += msg.words;
        for (i, off, vals) in msg.payload {
            store(receiver, i, off, vals, msg.src);
        }
    }
    out == inn
}

fn local_compute(proc_: &mut VirtualProcessor, a: &PackedSymTensor, b: usize) {
    let VirtualProcessor { slot, blocks, x, y, counters, .. } = proc_;
    let locate = |g: usize| (slot[g / b].expect("local row"), g % b);
    for blk in blocks.iter() {
        let [bi, bj, bk] = blk.coords().map(|c| (c as usize - 1) * b);
        for gi in bi..bi + b {
            let (pi, oi) = locate(gi);
            for gj in bj..(bj + b).min(gi + 1) {
                let (pj, oj) = locate(gj);
                for gk in bk..(bk + b).min(gj + 1) {
                    let (pk, ok) = locate(gk);
                    let v = a.get(gi, gj, gk);
                    counters.tensor_elems += 1;
                    counters.ternary_mults += symmetric_update(
                        (gi, gj, gk),
                        v,
                        (x[pi][oi], x[pj][oj], x[pk][ok]),
                        |g, d| {
                            let (p, o) = locate(g);
                            y[p][o] += d;
                        },
                    );
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProcessorPrediction {
    pub id: usize,
    pub ternary_mults: u64,
    pub tensor_elems: u64,
    /// Words sent per vector with the point-to-point schedule.
    pub p2p_per_vector: u64,
    pub alltoall_per_vector: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostPrediction {
    pub n: usize,
    pub b: usize,
    pub processors: Vec<ProcessorPrediction>,
    pub total_ternary: u64,
    /// Bandwidth lower bound over both vectors.
    pub lower_bound: f64,
    /// Largest two-vector p2p volume divided by the lower bound.
    pub p2p_ratio: f64,
}

/// Closed-form per-block costs for every processor.
pub fn compute_report(part: &TetraPartition, layout: &VectorLayout) -> CostPrediction {
    let n = layout.n;
    let b = layout.b as u64;
    let chunk = layout.chunk as u64;
    let off_block = 3 * b * b * b;
    let noncentral_block = 3 * b * b * (b - 1) / 2 + 2 * b * b;
    let central_block = b * (b - 1) * (b - 2) / 2 + 2 * b * (b - 1) + b;
    let a2a = alltoall_cost(part, layout.chunk).per_vector;

    let processors: Vec<ProcessorPrediction> = (0..part.processors())
        .map(|p| {
            let p2p = part.sets[p].iter().map(|&i| (part.sharers_of(i).len() as u64 - 1) * chunk).sum();
            ProcessorPrediction {
                id: p + 1,
                ternary_mults: tb3(&part.sets[p]).len() as u64 * off_block
                    + part.noncentral[p].len() as u64 * noncentral_block
                    + part.central[p].len() as u64 * central_block,
                tensor_elems: storage_count(part, n, p),
                p2p_per_vector: p2p,
                alltoall_per_vector: a2a,
            }
        })
        .collect();
    let lb = lower_bound(n as u64, part.processors() as u64);
    let max_p2p = processors.iter().map(|p| p.p2p_per_vector).max().unwrap_or(0);
    CostPrediction {
        n,
        b: layout.b,
        total_ternary: processors.iter().map(|p| p.ternary_mults).sum(),
        processors,
        lower_bound: lb,
        p2p_ratio: 2.0 * max_p2p as f64 / lb,
    }
}

/// Measured against predicted value for one processor, when they differ.
type Compare<'a> = dyn Fn(&ProcessorCounters, &ProcessorPrediction) -> Option<(u64, u64)> + 'a;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunVerdict {
    pub report: Option<SimReport>,
    pub checks: Vec<CheckResult>,
}

impl RunVerdict {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }
}

/// Simulates and compares the result and every counter with the sequential
/// kernel and the closed-form predictions.
pub fn verify_run(
    a: &PackedSymTensor,
    x: &[f64],
    part: &TetraPartition,
    layout: &VectorLayout,
    mode: Mode,
    exec: Exec,
) -> RunVerdict {
    let mut checks = part.check();
    let report = match simulate_with(a, x, part, layout, mode, exec, None) {
        Ok(r) => r,
        Err(e) => {
            let witness = match &e {
                Error::Locality { processor, row_block } => Some(vec![*processor as u32, *row_block]),
                _ => None,
            };
            checks.push(CheckResult::fail("simulation", e.to_string(), witness));
            return RunVerdict { report: None, checks };
        }
    };
    let pred = compute_report(part, layout);

    match sttsv_symmetric(a, x) {
        Ok(reference) => {
            let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let err = reference.iter().zip(&report.y).fold(0.0f64, |m, (r, y)| m.max((r - y).abs())) / scale;
            checks.push(CheckResult::from_bool(
                "output",
                err <= 1e-12,
                format!("relative max error {err:.3e} against the sequential kernel"),
            ));
        }
        Err(e) => checks.push(CheckResult::fail("output", e.to_string(), None)),
    }

    let mismatch = |f: &Compare<'_>| {
        report.processors.iter().zip(&pred.processors).find_map(|(c, p)| f(c, p).map(|v| (c.id, v)))
    };

    let push_per_proc = |checks: &mut Vec<CheckResult>, name: &str, found: Option<(usize, (u64, u64))>, ok: String| {
        checks.push(match found {
            None => CheckResult::pass(name, ok),
            Some((id, (got, want))) => {
                CheckResult::fail(name, format!("processor {id} measured {got}, expected {want}"), Some(vec![id as u32]))
            }
        });
    };

    let bad = mismatch(&|c, p| (c.ternary_mults != p.ternary_mults).then_some((c.ternary_mults, p.ternary_mults)));
    push_per_proc(&mut checks, "ternary counts", bad, "every processor matches the per-block formula".into());

    let total: u64 = report.processors.iter().map(|c| c.ternary_mults).sum();
    let want = ternary_count(report.n as u64);
    checks.push(CheckResult::from_bool("ternary total", total == want, format!("{total} measured, n²(n+1)/2 = {want}")));

    let bad = mismatch(&|c, p| (c.tensor_elems != p.tensor_elems).then_some((c.tensor_elems, p.tensor_elems)));
    push_per_proc(&mut checks, "tensor storage", bad, "every processor touches exactly its stored elements".into());

    let elems: u64 = report.processors.iter().map(|c| c.tensor_elems).sum();
    let stored = packed_len(report.n) as u64;
    checks.push(CheckResult::from_bool(
        "owner compute",
        elems == stored,
        format!("{elems} elements computed in place, {stored} stored"),
    ));

    let expected_volume = |p: &ProcessorPrediction| match mode {
        Mode::P2p => p.p2p_per_vector,
        Mode::AllToAll => p.alltoall_per_vector,
    };
    let bad = mismatch(&|c, p| {
        let want = expected_volume(p);
        (c.sent_x != want || c.sent_y != want).then_some((c.sent_x.max(c.sent_y), want))
    });
    push_per_proc(&mut checks, "send volume", bad, "x and y volumes match the prediction".into());

    if let (Mode::P2p, Some(q)) = (mode, part.q) {
        // n(q+1)/(q²+1) − n/P, compared as P·volume = n(q+1)q − n.
        let procs = part.processors() as u64;
        let n = report.n as u64;
        let target = n * (q + 1) * q - n;
        let bad = report.processors.iter().find(|c| c.sent_x * procs != target || c.sent_y * procs != target);
        checks.push(match bad {
            None => CheckResult::pass("closed form volume", format!("every processor sends {} words per vector", target / procs)),
            Some(c) => CheckResult::fail(
                "closed form volume",
                format!("processor {} sends {} words, formula gives {}/{procs}", c.id, c.sent_x, target),
                Some(vec![c.id as u32]),
            ),
        });
    }

    checks.push(CheckResult::from_bool(
        "conservation",
        report.conserved && report.total_sent == report.total_received,
        format!("{} words sent, {} received", report.total_sent, report.total_received),
    ));

    RunVerdict { report: Some(report), checks }
}
