//! Undirected simple graphs with sorted adjacency lists, plus a fixed-size
//! bitset used by the clique search.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Graphs up to this many nodes also keep a dense adjacency bit matrix.
pub const DENSE_NODE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::new(len);
        for i in 0..len {
            s.insert(i);
        }
        s
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersection(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    pub fn intersect_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn difference_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    /// Drops every element `<= i`.
    pub fn retain_above(&mut self, i: usize) {
        let w = i / 64;
        for word in &mut self.words[..w] {
            *word = 0;
        }
        if let Some(word) = self.words.get_mut(w) {
            let bit = i % 64;
            *word &= if bit == 63 { 0 } else { !0u64 << (bit + 1) };
        }
    }

    pub fn first(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(i * 64 + b)
                }
            })
        })
    }
}

/// An undirected graph without self loops or parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<u32>>,
    matrix: Option<Vec<BitSet>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicates collapse and self loops
    /// are dropped.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); node_count];
        for (u, v) in edges {
            assert!(u < node_count && v < node_count, "edge ({u}, {v}) out of range");
            if u != v {
                adjacency[u].push(v as u32);
                adjacency[v].push(u as u32);
            }
        }
        Self::from_adjacency(adjacency)
    }

    pub(crate) fn from_adjacency(mut adjacency: Vec<Vec<u32>>) -> Self {
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        let n = adjacency.len();
        let matrix = (n <= DENSE_NODE_LIMIT).then(|| {
            adjacency
                .iter()
                .map(|list| {
                    let mut row = BitSet::new(n);
                    for &v in list {
                        row.insert(v as usize);
                    }
                    row
                })
                .collect()
        });
        Self {
            adjacency,
            matrix,
            edge_count,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn is_dense(&self) -> bool {
        self.matrix.is_some()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        match &self.matrix {
            Some(rows) => rows[u].contains(v),
            None => self.adjacency[u].binary_search(&(v as u32)).is_ok(),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .map(move |&v| (u, v as usize))
                .filter(|&(u, v)| u < v)
        })
    }

    /// Whether every pair in `members` is adjacent.
    pub fn is_clique(&self, members: &[usize]) -> bool {
        members.iter().enumerate().all(|(i, &u)| {
            members[i + 1..].iter().all(|&v| u != v && self.has_edge(u, v))
        })
    }

    /// Core number of every vertex and a degeneracy (smallest-last) order.
    pub fn core_decomposition(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.node_count();
        let mut degree: Vec<usize> = (0..n).map(|v| self.degree(v)).collect();
        let max_degree = degree.iter().copied().max().unwrap_or(0);

        // Bucket sort by degree (Batagelj & Zaversnik).
        let mut bin = vec![0usize; max_degree + 1];
        for &d in &degree {
            bin[d] += 1;
        }
        let mut start = 0;
        for b in bin.iter_mut() {
            let count = *b;
            *b = start;
            start += count;
        }
        let mut pos = vec![0usize; n];
        let mut order = vec![0usize; n];
        for v in 0..n {
            pos[v] = bin[degree[v]];
            order[pos[v]] = v;
            bin[degree[v]] += 1;
        }
        for d in (1..=max_degree).rev() {
            bin[d] = bin[d - 1];
        }
        bin[0] = 0;

        for i in 0..n {
            let v = order[i];
            for &u in &self.adjacency[v] {
                let u = u as usize;
                if degree[u] > degree[v] {
                    let du = degree[u];
                    let pu = pos[u];
                    let pw = bin[du];
                    let w = order[pw];
                    if u != w {
                        pos[u] = pw;
                        order[pu] = w;
                        pos[w] = pu;
                        order[pw] = u;
                    }
                    bin[du] += 1;
                    degree[u] -= 1;
                }
            }
        }
        (degree, order)
    }

    /// Parses a DIMACS `p edge n m` / `e u v` graph (1-indexed vertices).
    pub fn from_dimacs(text: &str) -> Result<Self> {
        let mut node_count: Option<usize> = None;
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.first() {
                None | Some(&"c") => {}
                Some(&"p") => {
                    if fields.len() != 4 || (fields[1] != "edge" && fields[1] != "col") {
                        return Err(Error::parse(line_no, "expected `p edge <n> <m>`"));
                    }
                    let n = fields[2]
                        .parse()
                        .map_err(|_| Error::parse(line_no, "invalid node count"))?;
                    node_count = Some(n);
                }
                Some(&"e") => {
                    let n = node_count
                        .ok_or_else(|| Error::parse(line_no, "edge before problem line"))?;
                    if fields.len() != 3 {
                        return Err(Error::parse(line_no, "expected `e <u> <v>`"));
                    }
                    let parse = |s: &str| -> Result<usize> {
                        let v: usize = s
                            .parse()
                            .map_err(|_| Error::parse(line_no, format!("invalid vertex `{s}`")))?;
                        if v == 0 || v > n {
                            return Err(Error::parse(line_no, format!("vertex {v} out of range")));
                        }
                        Ok(v - 1)
                    };
                    edges.push((parse(fields[1])?, parse(fields[2])?));
                }
                Some(other) => {
                    return Err(Error::parse(line_no, format!("unknown line type `{other}`")));
                }
            }
        }
        let n = node_count.ok_or_else(|| Error::parse(0, "missing problem line"))?;
        Ok(Self::from_edges(n, edges))
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p edge {} {}\n", self.node_count(), self.edge_count());
        for (u, v) in self.edges() {
            writeln!(out, "e {} {}", u + 1, v + 1).unwrap();
        }
        out
    }
}
