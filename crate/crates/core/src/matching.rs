//! Bipartite matching primitives.
//!
//! Vertices are 0-based on both sides. Adjacency lists are kept sorted, and
//! both the BFS layering and the augmenting DFS visit vertices in ascending
//! order, so every routine here is deterministic.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    nx: usize,
    ny: usize,
    adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Builds a graph from an edge list; duplicate edges are merged.
    pub fn from_edges(nx: usize, ny: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); nx];
        for (x, y) in edges {
            if x >= nx || y >= ny {
                return Err(Error::InvalidArgument(format!(
                    "edge ({x}, {y}) outside {nx} x {ny} graph"
                )));
            }
            adj[x].push(y);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(BipartiteGraph { nx, ny, adj })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adj[x]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.adj[x].binary_search(&y).is_ok()
    }

    pub fn y_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.ny];
        for list in &self.adj {
            for &y in list {
                deg[y] += 1;
            }
        }
        deg
    }

    /// `Some(d)` if every vertex on both sides has degree `d`.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.adj.first().map_or(0, Vec::len);
        let x_ok = self.adj.iter().all(|l| l.len() == d);
        let y_ok = self.y_degrees().iter().all(|&e| e == d);
        (x_ok && y_ok).then_some(d)
    }

    fn without(&self, m: &Matching) -> Self {
        let mut g = self.clone();
        for &(x, y) in &m.pairs {
            g.adj[x].retain(|&v| v != y);
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    /// Matched edges, sorted by `x`.
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// True when no vertex repeats and every pair is an edge of `g`.
    pub fn is_valid_in(&self, g: &BipartiteGraph) -> bool {
        let mut xs = vec![false; g.nx];
        let mut ys = vec![false; g.ny];
        self.pairs.iter().all(|&(x, y)| {
            let fresh = x < g.nx && y < g.ny && !xs[x] && !ys[y] && g.has_edge(x, y);
            if fresh {
                xs[x] = true;
                ys[y] = true;
            }
            fresh
        })
    }
}

const FREE: usize = usize::MAX;

/// Maximum-cardinality matching by Hopcroft–Karp.
pub fn max_matching(g: &BipartiteGraph) -> Matching {
    let mut mate_x = vec![FREE; g.nx];
    let mut mate_y = vec![FREE; g.ny];
    let mut dist = vec![0usize; g.nx];

    while bfs_layers(g, &mate_x, &mate_y, &mut dist) {
        let mut next = vec![0usize; g.nx];
        for x in 0..g.nx {
            if mate_x[x] == FREE {
                augment(g, x, &mut mate_x, &mut mate_y, &mut dist, &mut next);
            }
        }
    }

    let pairs = mate_x
        .iter()
        .enumerate()
        .filter(|&(_, &y)| y != FREE)
        .map(|(x, &y)| (x, y))
        .collect();
    Matching { pairs }
}

/// Layers free X vertices at distance 0; returns whether some free Y vertex
/// is reachable by an alternating path.
fn bfs_layers(g: &BipartiteGraph, mate_x: &[usize], mate_y: &[usize], dist: &mut [usize]) -> bool {
    let mut queue = VecDeque::new();
    for x in 0..g.nx {
        if mate_x[x] == FREE {
            dist[x] = 0;
            queue.push_back(x);
        } else {
            dist[x] = usize::MAX;
        }
    }
    let mut found = false;
    while let Some(x) = queue.pop_front() {
        for &y in &g.adj[x] {
            match mate_y[y] {
                FREE => found = true,
                x2 if dist[x2] == usize::MAX => {
                    dist[x2] = dist[x] + 1;
                    queue.push_back(x2);
                }
                _ => {}
            }
        }
    }
    found
}

fn augment(
    g: &BipartiteGraph,
    x: usize,
    mate_x: &mut [usize],
    mate_y: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    while next[x] < g.adj[x].len() {
        let y = g.adj[x][next[x]];
        next[x] += 1;
        let follow = match mate_y[y] {
            FREE => true,
            x2 => dist[x2] == dist[x] + 1 && augment(g, x2, mate_x, mate_y, dist, next),
        };
        if follow {
            mate_x[x] = y;
            mate_y[y] = x;
            return true;
        }
    }
    dist[x] = usize::MAX;
    false
}

/// `d` matchings, each covering all of X, that share no Y vertex.
///
/// Every X vertex is replicated `d` times; an X-perfect matching of the
/// replicated graph is split by copy index.
pub fn d_disjoint_matchings(g: &BipartiteGraph, d: usize) -> Result<Vec<Matching>> {
    let edges = (0..g.nx).flat_map(|x| {
        (0..d).flat_map(move |c| g.adj[x].iter().map(move |&y| (x * d + c, y)))
    });
    let replicated = BipartiteGraph::from_edges(g.nx * d, g.ny, edges)?;
    let m = max_matching(&replicated);
    let needed = g.nx * d;
    if m.len() != needed {
        return Err(Error::Infeasible { needed, found: m.len() });
    }
    let mut out = vec![Matching::default(); d];
    for (xc, y) in m.pairs {
        out[xc % d].pairs.push((xc / d, y));
    }
    Ok(out)
}

/// Splits a `d`-regular bipartite graph with `nx == ny` into `d` perfect
/// matchings that partition its edges.
pub fn regular_decompose(g: &BipartiteGraph, d: usize) -> Result<Vec<Matching>> {
    if g.nx != g.ny {
        return Err(Error::InvalidArgument(format!(
            "sides differ in size ({} vs {})",
            g.nx, g.ny
        )));
    }
    if g.nx > 0 && g.regular_degree() != Some(d) {
        return Err(Error::InvalidArgument(format!("graph is not {d}-regular")));
    }
    let mut rest = g.clone();
    let mut out = Vec::with_capacity(d);
    for round in 0..d {
        let m = max_matching(&rest);
        if m.len() != g.nx {
            return Err(Error::Internal(format!(
                "round {round}: regular bipartite graph has no perfect matching ({} of {})",
                m.len(),
                g.nx
            )));
        }
        rest = rest.without(&m);
        out.push(m);
    }
    Ok(out)
}

/// Covers every edge with matchings by repeatedly removing a maximum
/// matching. Works on any bipartite graph; uses at least max-degree rounds.
pub fn greedy_decompose(g: &BipartiteGraph) -> Vec<Matching> {
    let mut rest = g.clone();
    let mut out = Vec::new();
    while rest.edge_count() > 0 {
        let m = max_matching(&rest);
        rest = rest.without(&m);
        out.push(m);
    }
    out
}
