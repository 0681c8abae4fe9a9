//! Tetrahedral block partitions of the lower tetrahedron.
//!
//! Row blocks are labelled `1..=m` like the design points they come from.
//! Processors are 0-based indices into the design's canonical block order;
//! serialized documents print them 1-based.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{d_disjoint_matchings, max_matching, BipartiteGraph};
use crate::report::CheckResult;
use crate::steiner::{binomial, SteinerSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[u32; 3]", try_from = "[u32; 3]")]
pub struct BlockIndex {
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    OffDiagonal,
    NonCentral,
    Central,
}

impl BlockIndex {
    pub fn new(i: u32, j: u32, k: u32) -> Result<Self> {
        if i >= j && j >= k && k >= 1 {
            Ok(BlockIndex { i, j, k })
        } else {
            Err(Error::InvalidArgument(format!("block ({i},{j},{k}) is not in the lower tetrahedron")))
        }
    }

    pub fn kind(&self) -> BlockKind {
        match (self.i == self.j, self.j == self.k) {
            (false, false) => BlockKind::OffDiagonal,
            (true, true) => BlockKind::Central,
            _ => BlockKind::NonCentral,
        }
    }

    pub fn coords(&self) -> [u32; 3] {
        [self.i, self.j, self.k]
    }
}

impl From<BlockIndex> for [u32; 3] {
    fn from(b: BlockIndex) -> Self {
        b.coords()
    }
}

impl TryFrom<[u32; 3]> for BlockIndex {
    type Error = Error;

    fn try_from(c: [u32; 3]) -> Result<Self> {
        BlockIndex::new(c[0], c[1], c[2])
    }
}

/// All strictly ordered triples drawn from `set`.
pub fn tb3(set: &[u32]) -> Vec<BlockIndex> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    let mut out = Vec::with_capacity(binomial(s.len() as u64, 3) as usize);
    for (a, &k) in s.iter().enumerate() {
        for (b, &j) in s.iter().enumerate().skip(a + 1) {
            for &i in &s[b + 1..] {
                out.push(BlockIndex { i, j, k });
            }
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TetraPartition {
    /// Number of row blocks.
    pub m: u32,
    /// Row blocks per processor.
    pub r: u32,
    /// Set when the design has spherical parameters (q² + 1, q + 1, 3).
    pub q: Option<u64>,
    /// `R_p`: row blocks of each processor, ascending.
    pub sets: Vec<Vec<u32>>,
    /// `N_p`: non-central diagonal blocks of each processor.
    pub noncentral: Vec<Vec<BlockIndex>>,
    /// `D_p`: at most one central diagonal block per processor.
    pub central: Vec<Vec<BlockIndex>>,
    /// `Q_i` for row block `i`, stored at `i - 1`: processors whose set holds `i`.
    pub sharers: Vec<Vec<usize>>,
}

impl TetraPartition {
    /// Assigns every lower-tetrahedral block of an `m`-block tensor to the
    /// processors defined by the design's blocks.
    pub fn build(sys: &SteinerSystem) -> Result<Self> {
        let report = sys.verify();
        if !report.passed() {
            return Err(Error::InvalidDesign(Box::new(report)));
        }
        let m = sys.n();
        let sets: Vec<Vec<u32>> = sys.blocks().to_vec();
        let procs = sets.len();

        // Non-central blocks: d disjoint processor-covering matchings.
        let mut ys: Vec<BlockIndex> = Vec::with_capacity((m * (m - 1)) as usize);
        for a in 2..=m {
            for b in 1..a {
                ys.push(BlockIndex { i: a, j: a, k: b });
                ys.push(BlockIndex { i: a, j: b, k: b });
            }
        }
        ys.sort_unstable();
        if !ys.len().is_multiple_of(procs) {
            return Err(Error::DesignUnsuitable {
                stage: "non-central diagonal",
                detail: format!("{} blocks do not split evenly over {procs} processors", ys.len()),
            });
        }
        let d = ys.len() / procs;
        let y_index: HashMap<BlockIndex, usize> = ys.iter().enumerate().map(|(i, b)| (*b, i)).collect();
        let mut edges = Vec::new();
        for (p, set) in sets.iter().enumerate() {
            for (x, &b) in set.iter().enumerate() {
                for &a in &set[x + 1..] {
                    edges.push((p, y_index[&BlockIndex { i: a, j: a, k: b }]));
                    edges.push((p, y_index[&BlockIndex { i: a, j: b, k: b }]));
                }
            }
        }
        let g = BipartiteGraph::from_edges(procs, ys.len(), edges)?;
        let matchings = d_disjoint_matchings(&g, d).map_err(|e| Error::DesignUnsuitable {
            stage: "non-central diagonal",
            detail: e.to_string(),
        })?;
        let mut noncentral = vec![Vec::with_capacity(d); procs];
        for m in &matchings {
            for &(p, y) in &m.pairs {
                noncentral[p].push(ys[y]);
            }
        }
        for list in &mut noncentral {
            list.sort_unstable();
        }

        // Central blocks: row block i goes to one processor holding i.
        let g = BipartiteGraph::from_edges(
            m as usize,
            procs,
            sets.iter()
                .enumerate()
                .flat_map(|(p, set)| set.iter().map(move |&i| (i as usize - 1, p))),
        )?;
        let cm = max_matching(&g);
        if cm.len() != m as usize {
            return Err(Error::DesignUnsuitable {
                stage: "central diagonal",
                detail: format!("only {} of {m} central blocks could be placed", cm.len()),
            });
        }
        let mut central = vec![Vec::new(); procs];
        for &(i, p) in &cm.pairs {
            let i = i as u32 + 1;
            central[p].push(BlockIndex { i, j: i, k: i });
        }

        let sharers = sharers_of(m, &sets);
        let r = sys.r();
        let q = (r - 1) as u64;
        let spherical = m as u64 == q * q + 1 && procs as u64 == q * (q * q + 1);
        Ok(TetraPartition {
            m,
            r,
            q: spherical.then_some(q),
            sets,
            noncentral,
            central,
            sharers,
        })
    }

    pub fn processors(&self) -> usize {
        self.sets.len()
    }

    /// `Q_i` for 1-based row block `i`.
    pub fn sharers_of(&self, i: u32) -> &[usize] {
        &self.sharers[i as usize - 1]
    }

    /// Every block processor `p` owns: TB₃(R_p) ∪ N_p ∪ D_p, sorted.
    pub fn owned_blocks(&self, p: usize) -> Vec<BlockIndex> {
        let mut out = tb3(&self.sets[p]);
        out.extend_from_slice(&self.noncentral[p]);
        out.extend_from_slice(&self.central[p]);
        out.sort_unstable();
        out
    }

    /// Checks the partition and locality invariants.
    pub fn check(&self) -> Vec<CheckResult> {
        let m = self.m;
        let mut counts: HashMap<BlockIndex, u32> = HashMap::new();
        let mut locality = None;
        for p in 0..self.processors() {
            for b in self.owned_blocks(p) {
                *counts.entry(b).or_default() += 1;
                if locality.is_none() && !b.coords().iter().all(|c| self.sets[p].contains(c)) {
                    locality = Some((p, b));
                }
            }
        }

        let mut checks = Vec::new();
        for (name, kind) in [
            ("off-diagonal partition", BlockKind::OffDiagonal),
            ("non-central partition", BlockKind::NonCentral),
            ("central partition", BlockKind::Central),
        ] {
            let mut bad = None;
            let mut total = 0usize;
            for i in 1..=m {
                for j in 1..=i {
                    for k in 1..=j {
                        let b = BlockIndex { i, j, k };
                        if b.kind() != kind {
                            continue;
                        }
                        total += 1;
                        let c = counts.remove(&b).unwrap_or(0);
                        if c != 1 && bad.is_none() {
                            bad = Some((b, c));
                        }
                    }
                }
            }
            checks.push(match bad {
                None => CheckResult::pass(name, format!("{total} blocks, each owned once")),
                Some((b, c)) => CheckResult::fail(name, format!("block owned {c} times"), Some(b.coords().to_vec())),
            });
        }
        checks.push(match counts.keys().min() {
            None => CheckResult::pass("block range", "no blocks outside the tetrahedron"),
            Some(b) => CheckResult::fail("block range", "block outside the tetrahedron", Some(b.coords().to_vec())),
        });
        checks.push(match locality {
            None => CheckResult::pass("locality", "every owned block uses only the owner's row blocks"),
            Some((p, b)) => CheckResult::fail(
                "locality",
                format!("processor {} owns a block outside its row blocks", p + 1),
                Some(b.coords().to_vec()),
            ),
        });
        let central_ok = self.central.iter().all(|d| d.len() <= 1);
        checks.push(CheckResult::from_bool(
            "central per processor",
            central_ok,
            "each processor holds at most one central block",
        ));
        checks.push(CheckResult::from_bool(
            "sharer sets",
            self.sharers == sharers_of(m, &self.sets),
            "Q_i = { p : i in R_p }",
        ));
        checks
    }

    pub fn to_document(&self) -> PartitionDocument {
        PartitionDocument {
            m: self.m,
            r: self.r,
            q: self.q,
            processor_count: self.processors(),
            processors: (0..self.processors())
                .map(|p| ProcessorEntry {
                    p: p + 1,
                    r: self.sets[p].clone(),
                    n: self.noncentral[p].clone(),
                    d: self.central[p].clone(),
                })
                .collect(),
            rows: self
                .sharers
                .iter()
                .enumerate()
                .map(|(i, q)| RowEntry { i: i as u32 + 1, q: q.iter().map(|p| p + 1).collect() })
                .collect(),
        }
    }
}

fn sharers_of(m: u32, sets: &[Vec<u32>]) -> Vec<Vec<usize>> {
    let mut sharers = vec![Vec::new(); m as usize];
    for (p, set) in sets.iter().enumerate() {
        for &i in set {
            sharers[i as usize - 1].push(p);
        }
    }
    sharers
}

/// JSON form of a partition, laid out like the processor and row tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub m: u32,
    pub r: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    pub processor_count: usize,
    pub processors: Vec<ProcessorEntry>,
    pub rows: Vec<RowEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessorEntry {
    pub p: usize,
    #[serde(rename = "R")]
    pub r: Vec<u32>,
    #[serde(rename = "N")]
    pub n: Vec<BlockIndex>,
    #[serde(rename = "D")]
    pub d: Vec<BlockIndex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowEntry {
    pub i: u32,
    #[serde(rename = "Q")]
    pub q: Vec<usize>,
}

/// Ownership of vector entries: row block `i` is cut into `|Q_i|` equal
/// chunks handed to the processors of `Q_i` in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VectorLayout {
    pub n: usize,
    pub m: usize,
    /// Row-block length `n / m`.
    pub b: usize,
    /// Chunk length `b / |Q_i|`.
    pub chunk: usize,
    /// Processors of each row block in chunk order (index `i - 1`).
    pub owners: Vec<Vec<usize>>,
}

impl VectorLayout {
    pub fn new(n: usize, part: &TetraPartition) -> Result<Self> {
        let m = part.m as usize;
        let share = uniform_share(part)?;
        if n == 0 || !n.is_multiple_of(m) || !(n / m).is_multiple_of(share) {
            return Err(Error::InvalidArgument(format!(
                "n = {n} needs m = {m} | n and {share} | n/m; pad to {}",
                pad_dimension(n, part)?
            )));
        }
        let b = n / m;
        Ok(VectorLayout { n, m, b, chunk: b / share, owners: part.sharers.clone() })
    }

    /// Global offset of 1-based row block `i`.
    pub fn row_start(&self, i: u32) -> usize {
        (i as usize - 1) * self.b
    }

    /// Offsets inside row block `i` owned by processor `p`.
    pub fn chunk_range(&self, i: u32, p: usize) -> Option<Range<usize>> {
        let pos = self.owners[i as usize - 1].iter().position(|&o| o == p)?;
        Some(pos * self.chunk..(pos + 1) * self.chunk)
    }

    /// Global index range of `p`'s chunk of row block `i`.
    pub fn global_range(&self, i: u32, p: usize) -> Option<Range<usize>> {
        let r = self.chunk_range(i, p)?;
        let s = self.row_start(i);
        Some(s + r.start..s + r.end)
    }

    /// Entries of one vector held by `p`.
    pub fn owned_len(&self, p: usize) -> usize {
        self.owners.iter().filter(|o| o.contains(&p)).count() * self.chunk
    }
}

fn uniform_share(part: &TetraPartition) -> Result<usize> {
    let share = part.sharers.first().map_or(0, Vec::len);
    if share == 0 || part.sharers.iter().any(|q| q.len() != share) {
        return Err(Error::InvalidArgument("row blocks are not shared by equally many processors".into()));
    }
    Ok(share)
}

/// Smallest `n' >= n` with `m | n'` and `|Q_i| | n'/m`.
pub fn pad_dimension(n: usize, part: &TetraPartition) -> Result<usize> {
    let unit = part.m as usize * uniform_share(part)?;
    Ok(n.div_ceil(unit).max(1) * unit)
}

/// Lower-tetrahedral tensor elements stored by processor `p` at dimension `n`.
pub fn storage_count(part: &TetraPartition, n: usize, p: usize) -> u64 {
    let b = (n / part.m as usize) as u64;
    let off = binomial(part.sets[p].len() as u64, 3);
    off * b * b * b
        + part.noncentral[p].len() as u64 * b * b * (b + 1) / 2
        + part.central[p].len() as u64 * b * (b + 1) * (b + 2) / 6
}
