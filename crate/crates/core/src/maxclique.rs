//! Exact maximum clique search.
//!
//! The search runs in two phases. The first finds the clique number: every
//! vertex, taken in degeneracy order, seeds a subproblem over its later
//! neighbors, pruned by core numbers and by a greedy-coloring bound against a
//! shared incumbent. Subproblems run on the rayon pool. The second phase picks
//! the lexicographically smallest clique of that size (by node index), which
//! makes the answer independent of the worker count and of scheduling.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use crate::graph::{BitSet, Graph};

#[derive(Debug, Clone, PartialEq)]
pub struct CliqueResult {
    /// Sorted node indices.
    pub members: Vec<usize>,
    pub size: usize,
    pub nodes_explored: u64,
    pub wall_time: f64,
    /// False when the node budget ran out before optimality was proven.
    pub optimal: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CliqueOptions {
    /// Maximum number of search nodes before returning the incumbent.
    pub node_limit: Option<u64>,
}

/// A maximal clique grown by repeatedly adding the highest-degree vertex that
/// is adjacent to everything chosen so far (ties go to the lower index).
pub fn greedy_clique(graph: &Graph) -> CliqueResult {
    let start = Instant::now();
    let n = graph.node_count();
    let mut members = Vec::new();
    let mut candidates: Vec<usize> = (0..n).collect();
    let mut explored = 0;
    while let Some(&v) = candidates
        .iter()
        .max_by(|&&a, &&b| graph.degree(a).cmp(&graph.degree(b)).then(b.cmp(&a)))
    {
        explored += 1;
        members.push(v);
        candidates.retain(|&u| u != v && graph.has_edge(u, v));
    }
    members.sort_unstable();
    CliqueResult {
        size: members.len(),
        members,
        nodes_explored: explored,
        wall_time: start.elapsed().as_secs_f64(),
        optimal: false,
    }
}

pub fn max_clique(graph: &Graph, min_size: usize) -> Option<CliqueResult> {
    max_clique_with(graph, min_size, &CliqueOptions::default())
}

/// Returns a maximum clique if it has at least `min_size` members.
pub fn max_clique_with(
    graph: &Graph,
    min_size: usize,
    options: &CliqueOptions,
) -> Option<CliqueResult> {
    search(graph, min_size, options, None)
}

/// Like [`max_clique_with`], given a proper coloring known in advance
/// (adjacent nodes never share a color). The number of distinct colors among
/// a candidate set then bounds its clique size without touching any edges,
/// which prunes most subproblems cheaply when the clique number is close to
/// the number of colors. The result is the same as without the coloring.
pub fn max_clique_colored(
    graph: &Graph,
    min_size: usize,
    options: &CliqueOptions,
    coloring: &[u32],
) -> Option<CliqueResult> {
    assert_eq!(coloring.len(), graph.node_count(), "one color per node");
    debug_assert!(graph.edges().all(|(u, v)| coloring[u] != coloring[v]));
    search(graph, min_size, options, Some(coloring))
}

/// Per-worker buffers: a global-to-local index map (sparse graphs only) and
/// a generation-stamped set over colors.
struct Scratch {
    index: Vec<u32>,
    stamp: Vec<u32>,
    generation: u32,
}

impl Scratch {
    fn new(graph: &Graph, coloring: Option<&[u32]>) -> Self {
        let colors = coloring.map_or(0, |c| c.iter().max().map_or(0, |&m| m as usize + 1));
        Self {
            index: vec![u32::MAX; if graph.is_dense() { 0 } else { graph.node_count() }],
            stamp: vec![0; colors],
            generation: 0,
        }
    }

    fn distinct(&mut self, colors: impl Iterator<Item = u32>) -> usize {
        if self.generation == u32::MAX {
            self.stamp.fill(0);
            self.generation = 0;
        }
        self.generation += 1;
        let mut count = 0;
        for c in colors {
            let slot = &mut self.stamp[c as usize];
            if *slot != self.generation {
                *slot = self.generation;
                count += 1;
            }
        }
        count
    }
}

fn search(
    graph: &Graph,
    min_size: usize,
    options: &CliqueOptions,
    coloring: Option<&[u32]>,
) -> Option<CliqueResult> {
    assert!(min_size >= 1, "min_size must be at least 1");
    let start = Instant::now();
    let n = graph.node_count();
    if n == 0 {
        return None;
    }

    let greedy = greedy_clique(graph);
    let (core, order) = graph.core_decomposition();
    let mut position = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }

    let shared = Shared {
        best: AtomicUsize::new(greedy.size.max(min_size - 1)),
        incumbent: Mutex::new((greedy.size >= min_size).then(|| greedy.members.clone())),
        explored: AtomicU64::new(greedy.nodes_explored),
        node_limit: options.node_limit.unwrap_or(u64::MAX),
        exhausted: AtomicBool::new(false),
    };

    // Phase 1: clique number. Later vertices have small candidate sets and
    // raise the bound cheaply, so they go first.
    let scratch = || Scratch::new(graph, coloring);
    order.par_iter().rev().for_each_init(scratch, |scratch, &v| {
        if shared.exhausted.load(Ordering::Relaxed) {
            return;
        }
        let best = shared.best.load(Ordering::Relaxed);
        if core[v] < best {
            return;
        }
        let candidates: Vec<usize> = graph
            .neighbors(v)
            .iter()
            .map(|&u| u as usize)
            .filter(|&u| position[u] > position[v] && core[u] >= best)
            .collect();
        if candidates.len() < best {
            return;
        }
        if let Some(colors) = coloring {
            if scratch.distinct(candidates.iter().map(|&u| colors[u])) < best {
                return;
            }
        }
        let local = LocalGraph::induced(graph, &candidates, coloring, &mut scratch.index);
        let mut search = Phase1 {
            local: &local,
            shared: &shared,
            seed: v,
            clique: Vec::with_capacity(best + 1),
            explored: 0,
            scratch,
        };
        search.expand(BitSet::full(candidates.len()));
        search.flush();
    });

    let exhausted = shared.exhausted.load(Ordering::Relaxed);
    let incumbent = shared.incumbent.into_inner().unwrap();
    let mut explored = shared.explored.load(Ordering::Relaxed);
    let mut members = incumbent?;
    let omega = members.len();

    if !exhausted {
        // Phase 2: the lexicographically smallest clique of size omega. Its
        // first member cannot exceed the first member of the witness.
        members.sort_unstable();
        let limit = members[0];
        let counter = AtomicU64::new(0);
        let smallest = (0..=limit)
            .into_par_iter()
            .map_init(scratch, |scratch, m| {
                lexicographic_from(graph, &core, coloring, m, omega, scratch, &counter)
            })
            .find_map_first(|found| found);
        explored += counter.load(Ordering::Relaxed);
        members = smallest.expect("witness clique exists");
    }
    members.sort_unstable();
    debug_assert!(graph.is_clique(&members));

    Some(CliqueResult {
        size: members.len(),
        members,
        nodes_explored: explored,
        wall_time: start.elapsed().as_secs_f64(),
        optimal: !exhausted,
    })
}

struct Shared {
    best: AtomicUsize,
    incumbent: Mutex<Option<Vec<usize>>>,
    explored: AtomicU64,
    node_limit: u64,
    exhausted: AtomicBool,
}

/// Subgraph induced on a candidate list, as dense bit rows over local indices.
struct LocalGraph {
    vertices: Vec<usize>,
    rows: Vec<BitSet>,
    /// Colors of the local vertices when a proper coloring is known.
    colors: Option<Vec<u32>>,
}

impl LocalGraph {
    /// `scratch` maps global to local indices; it must hold `u32::MAX` for
    /// every vertex on entry and is restored before returning.
    fn induced(graph: &Graph, vertices: &[usize], coloring: Option<&[u32]>, scratch: &mut [u32]) -> Self {
        let m = vertices.len();
        let mut rows = vec![BitSet::new(m); m];
        if graph.is_dense() {
            for i in 0..m {
                for j in i + 1..m {
                    if graph.has_edge(vertices[i], vertices[j]) {
                        rows[i].insert(j);
                        rows[j].insert(i);
                    }
                }
            }
        } else {
            for (i, &u) in vertices.iter().enumerate() {
                scratch[u] = i as u32;
            }
            for (i, &u) in vertices.iter().enumerate() {
                for &w in graph.neighbors(u) {
                    let j = scratch[w as usize];
                    if j != u32::MAX {
                        rows[i].insert(j as usize);
                    }
                }
            }
            for &u in vertices {
                scratch[u] = u32::MAX;
            }
        }
        Self {
            vertices: vertices.to_vec(),
            rows,
            colors: coloring.map(|c| vertices.iter().map(|&v| c[v]).collect()),
        }
    }

    /// Distinct known colors in `p`, or `usize::MAX` without a coloring.
    fn label_bound(&self, p: &BitSet, scratch: &mut Scratch) -> usize {
        match &self.colors {
            Some(colors) => scratch.distinct(p.iter().map(|i| colors[i])),
            None => usize::MAX,
        }
    }

    /// Greedy sequential coloring of `p`. Returns vertices grouped by color
    /// with the running color count, so `colors[i]` bounds the clique size
    /// within `order[..=i]`.
    fn color_sort(&self, p: &BitSet) -> (Vec<usize>, Vec<usize>) {
        let mut order = Vec::with_capacity(p.count());
        let mut colors = Vec::with_capacity(order.capacity());
        let mut uncolored = p.clone();
        let mut color = 0;
        while !uncolored.is_empty() {
            color += 1;
            let mut available = uncolored.clone();
            while let Some(v) = available.first() {
                available.remove(v);
                available.difference_with(&self.rows[v]);
                uncolored.remove(v);
                order.push(v);
                colors.push(color);
            }
        }
        (order, colors)
    }

    fn color_bound(&self, p: &BitSet) -> usize {
        let mut uncolored = p.clone();
        let mut color = 0;
        while !uncolored.is_empty() {
            color += 1;
            let mut available = uncolored.clone();
            while let Some(v) = available.first() {
                available.remove(v);
                available.difference_with(&self.rows[v]);
                uncolored.remove(v);
            }
        }
        color
    }
}

const FLUSH_EVERY: u64 = 1024;

struct Phase1<'a> {
    local: &'a LocalGraph,
    shared: &'a Shared,
    scratch: &'a mut Scratch,
    seed: usize,
    /// Current clique in local indices, excluding the seed vertex.
    clique: Vec<usize>,
    explored: u64,
}

impl Phase1<'_> {
    fn flush(&mut self) {
        let total = self.shared.explored.fetch_add(self.explored, Ordering::Relaxed) + self.explored;
        self.explored = 0;
        if total >= self.shared.node_limit {
            self.shared.exhausted.store(true, Ordering::Relaxed);
        }
    }

    fn expand(&mut self, mut p: BitSet) {
        self.explored += 1;
        if self.explored >= FLUSH_EVERY {
            self.flush();
        }
        if self.shared.exhausted.load(Ordering::Relaxed) {
            return;
        }
        // +1 for the seed vertex.
        let best = self.shared.best.load(Ordering::Relaxed);
        if (self.clique.len() + 1).saturating_add(self.local.label_bound(&p, self.scratch)) <= best {
            return;
        }
        let (order, colors) = self.local.color_sort(&p);
        for i in (0..order.len()).rev() {
            // +1 for the seed vertex.
            if self.clique.len() + 1 + colors[i] <= self.shared.best.load(Ordering::Relaxed) {
                return;
            }
            let v = order[i];
            self.clique.push(v);
            let next = p.intersection(&self.local.rows[v]);
            if next.is_empty() {
                self.record();
            } else {
                self.expand(next);
            }
            self.clique.pop();
            p.remove(v);
        }
    }

    fn record(&mut self) {
        let size = self.clique.len() + 1;
        if size <= self.shared.best.load(Ordering::Relaxed) {
            return;
        }
        let mut incumbent = self.shared.incumbent.lock().unwrap();
        if size > self.shared.best.load(Ordering::Relaxed) {
            self.shared.best.store(size, Ordering::Relaxed);
            let mut members: Vec<usize> =
                self.clique.iter().map(|&i| self.local.vertices[i]).collect();
            members.push(self.seed);
            *incumbent = Some(members);
        }
    }
}

/// Searches for a clique of size `omega` whose smallest member is `first`,
/// scanning candidates in increasing index order so the first hit is the
/// lexicographically smallest such clique.
fn lexicographic_from(
    graph: &Graph,
    core: &[usize],
    coloring: Option<&[u32]>,
    first: usize,
    omega: usize,
    scratch: &mut Scratch,
    counter: &AtomicU64,
) -> Option<Vec<usize>> {
    if core[first] + 1 < omega {
        return None;
    }
    if omega == 1 {
        return Some(vec![first]);
    }
    let candidates: Vec<usize> = graph
        .neighbors(first)
        .iter()
        .map(|&u| u as usize)
        .filter(|&u| u > first && core[u] + 1 >= omega)
        .collect();
    if candidates.len() + 1 < omega {
        return None;
    }
    if let Some(colors) = coloring {
        if scratch.distinct(candidates.iter().map(|&u| colors[u])) + 1 < omega {
            return None;
        }
    }
    let local = LocalGraph::induced(graph, &candidates, coloring, &mut scratch.index);
    let mut clique = Vec::with_capacity(omega);
    let mut explored = 0;
    let found = lexicographic_search(
        &local,
        BitSet::full(candidates.len()),
        omega - 1,
        &mut clique,
        &mut explored,
        scratch,
    );
    counter.fetch_add(explored, Ordering::Relaxed);
    found.then(|| {
        let mut members = vec![first];
        members.extend(clique.iter().map(|&i| local.vertices[i]));
        members
    })
}

fn lexicographic_search(
    local: &LocalGraph,
    p: BitSet,
    need: usize,
    clique: &mut Vec<usize>,
    explored: &mut u64,
    scratch: &mut Scratch,
) -> bool {
    *explored += 1;
    if need == 0 {
        return true;
    }
    if p.count() < need || local.label_bound(&p, scratch) < need || local.color_bound(&p) < need {
        return false;
    }
    let mut remaining = p.count();
    for v in p.iter() {
        if remaining < need {
            break;
        }
        remaining -= 1;
        let mut next = p.intersection(&local.rows[v]);
        next.retain_above(v);
        if next.count() + 1 >= need {
            clique.push(v);
            if lexicographic_search(local, next, need - 1, clique, explored, scratch) {
                return true;
            }
            clique.pop();
        }
    }
    false
}
