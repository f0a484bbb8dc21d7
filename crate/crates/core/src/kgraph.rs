//! k-uniform hypergraphs on the vertex set `[n]` (1-based).

use std::borrow::Borrow;
use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, for_each_combination};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub type Vertex = u32;

/// A hyperedge: strictly increasing vertex ids.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "Vec<Vertex>", try_from = "Vec<Vertex>")]
pub struct Edge(Vec<Vertex>);

impl From<Edge> for Vec<Vertex> {
    fn from(e: Edge) -> Self {
        e.0
    }
}

impl TryFrom<Vec<Vertex>> for Edge {
    type Error = Error;
    fn try_from(v: Vec<Vertex>) -> Result<Self> {
        Edge::new(v)
    }
}

impl Edge {
    /// Build from vertices in any order; rejects repeats.
    pub fn new(mut vertices: Vec<Vertex>) -> Result<Self> {
        vertices.sort_unstable();
        if let Some(w) = vertices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::RepeatedVertex {
                vertex: w[0],
                context: "edge",
            });
        }
        Ok(Edge(vertices))
    }

    pub(crate) fn from_sorted(vertices: Vec<Vertex>) -> Self {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        Edge(vertices)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// Colex rank among all k-subsets of the positive integers. Independent of
    /// the host graph, so it names the edge stably across deletions.
    pub fn colex_rank(&self) -> u128 {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &v)| binomial(v as u64 - 1, i as u64 + 1))
            .fold(0u128, |a, b| a.saturating_add(b))
    }

    pub(crate) fn mask(&self) -> u64 {
        mask_of(&self.0)
    }
}

impl Borrow<[Vertex]> for Edge {
    fn borrow(&self) -> &[Vertex] {
        &self.0
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

fn mask_of(vs: &[Vertex]) -> u64 {
    vs.iter().fold(0u64, |m, &v| m | (1u64 << (v - 1)))
}

/// Largest `n` for which edges are additionally indexed by bitmask.
pub const MASK_LIMIT: usize = 64;

/// An immutable k-uniform hypergraph with O(1) expected edge membership.
///
/// Edges are kept sorted; an edge's position in [`KGraph::edges`] is its
/// id within this graph.
#[derive(Clone, Serialize, Deserialize)]
#[serde(into = "KGraphRepr", try_from = "KGraphRepr")]
pub struct KGraph {
    n: usize,
    k: usize,
    edges: Vec<Edge>,
    index: FxHashMap<Edge, u32>,
    masks: Option<FxHashMap<u64, u32>>,
}

#[derive(Serialize, Deserialize)]
struct KGraphRepr {
    n: usize,
    k: usize,
    edges: Vec<Edge>,
}

impl From<KGraph> for KGraphRepr {
    fn from(g: KGraph) -> Self {
        KGraphRepr {
            n: g.n,
            k: g.k,
            edges: g.edges,
        }
    }
}

impl TryFrom<KGraphRepr> for KGraph {
    type Error = Error;
    fn try_from(r: KGraphRepr) -> Result<Self> {
        KGraph::new(r.n, r.k, r.edges)
    }
}

impl fmt::Debug for KGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KGraph")
            .field("n", &self.n)
            .field("k", &self.k)
            .field("m", &self.edges.len())
            .finish()
    }
}

impl PartialEq for KGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.k == other.k && self.edges == other.edges
    }
}

impl Eq for KGraph {}

impl KGraph {
    pub fn new(n: usize, k: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        for e in &edges {
            if e.len() != k {
                return Err(Error::WrongSetSize {
                    expected: k,
                    got: e.len(),
                });
            }
            for &v in e.vertices() {
                if v == 0 || v as usize > n {
                    return Err(Error::VertexOutOfRange { vertex: v, n });
                }
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEdge(w[0].clone()));
        }
        Ok(Self::from_canonical(n, k, edges))
    }

    fn from_canonical(n: usize, k: usize, edges: Vec<Edge>) -> Self {
        let index = edges
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i as u32))
            .collect();
        let masks = (n <= MASK_LIMIT).then(|| {
            edges
                .iter()
                .enumerate()
                .map(|(i, e)| (e.mask(), i as u32))
                .collect()
        });
        KGraph {
            n,
            k,
            edges,
            index,
            masks,
        }
    }

    pub fn empty(n: usize, k: usize) -> Self {
        Self::from_canonical(n, k, Vec::new())
    }

    pub fn complete(n: usize, k: usize) -> Self {
        let verts: Vec<Vertex> = (1..=n as Vertex).collect();
        let mut edges = Vec::with_capacity(binomial(n as u64, k as u64).min(1 << 24) as usize);
        for_each_combination(&verts, k, |c| {
            edges.push(Edge::from_sorted(c.to_vec()));
            true
        });
        Self::from_canonical(n, k, edges)
    }

    /// `H_{n,p;k}`: each k-subset of `[n]` independently with probability `p`.
    pub fn random(n: usize, k: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::InvalidProbability { value: p });
        }
        let mut rng = stream_rng(seed, Stream::Graph, &[n as u64, k as u64]);
        let verts: Vec<Vertex> = (1..=n as Vertex).collect();
        let mut edges = Vec::new();
        for_each_combination(&verts, k, |c| {
            if rng.gen_bool(p) {
                edges.push(Edge::from_sorted(c.to_vec()));
            }
            true
        });
        Ok(Self::from_canonical(n, k, edges))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Id of the edge with these (sorted) vertices.
    pub fn edge_id(&self, sorted: &[Vertex]) -> Option<usize> {
        if sorted.len() != self.k {
            return None;
        }
        match &self.masks {
            Some(m) => {
                if sorted.iter().any(|&v| v == 0 || v as usize > self.n) {
                    return None;
                }
                m.get(&mask_of(sorted)).map(|&i| i as usize)
            }
            None => self.index.get(sorted).map(|&i| i as usize),
        }
    }

    /// Membership test for a sorted vertex list.
    pub fn contains(&self, sorted: &[Vertex]) -> bool {
        self.edge_id(sorted).is_some()
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.contains(e.vertices())
    }

    /// Membership for vertices in any order.
    pub fn contains_set(&self, vertices: &[Vertex]) -> bool {
        let mut v = vertices.to_vec();
        v.sort_unstable();
        v.windows(2).all(|w| w[0] != w[1]) && self.contains(&v)
    }

    /// Number of d-sets `D`, disjoint from every `A_i`, with `A_i ∪ D` an edge
    /// for all `i`. Every `A_i` must have `k - d` distinct vertices.
    pub fn count_extensions<S: AsRef<[Vertex]>>(&self, sets: &[S], d: usize) -> Result<u64> {
        if d == 0 || d >= self.k {
            return Err(Error::ExtensionSize { d, max: self.k - 1 });
        }
        let sorted = self.canonical_sets(sets, self.k - d)?;
        Ok(self.count_extensions_sorted(&sorted, d))
    }

    pub(crate) fn canonical_sets<S: AsRef<[Vertex]>>(
        &self,
        sets: &[S],
        size: usize,
    ) -> Result<Vec<Vec<Vertex>>> {
        let mut out: Vec<Vec<Vertex>> = Vec::with_capacity(sets.len());
        for s in sets {
            let s = s.as_ref();
            if s.len() != size {
                return Err(Error::WrongSetSize {
                    expected: size,
                    got: s.len(),
                });
            }
            let mut v = s.to_vec();
            v.sort_unstable();
            if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::RepeatedVertex {
                    vertex: w[0],
                    context: "extension set",
                });
            }
            if let Some(&bad) = v.iter().find(|&&x| x == 0 || x as usize > self.n) {
                return Err(Error::VertexOutOfRange {
                    vertex: bad,
                    n: self.n,
                });
            }
            if out.contains(&v) {
                return Err(Error::DuplicateSet { set: v });
            }
            out.push(v);
        }
        Ok(out)
    }

    /// `count_extensions` on already validated, sorted sets.
    pub(crate) fn count_extensions_sorted(&self, sets: &[Vec<Vertex>], d: usize) -> u64 {
        let mut in_union = vec![false; self.n + 1];
        for s in sets {
            for &v in s {
                in_union[v as usize] = true;
            }
        }
        let pool: Vec<Vertex> = (1..=self.n as Vertex)
            .filter(|&v| !in_union[v as usize])
            .collect();
        let mut count = 0u64;
        match &self.masks {
            Some(masks) => {
                let set_masks: Vec<u64> = sets.iter().map(|s| mask_of(s)).collect();
                for_each_combination(&pool, d, |dset| {
                    let dm = mask_of(dset);
                    if set_masks.iter().all(|&a| masks.contains_key(&(a | dm))) {
                        count += 1;
                    }
                    true
                });
            }
            None => {
                let mut buf = Vec::with_capacity(self.k);
                for_each_combination(&pool, d, |dset| {
                    let ok = sets.iter().all(|a| {
                        merge_sorted(a, dset, &mut buf);
                        self.index.contains_key(buf.as_slice())
                    });
                    if ok {
                        count += 1;
                    }
                    true
                });
            }
        }
        count
    }

    /// `count_extensions` without the bitmask index; kept for cross-checking
    /// the fast path.
    #[doc(hidden)]
    pub fn count_extensions_unindexed<S: AsRef<[Vertex]>>(
        &self,
        sets: &[S],
        d: usize,
    ) -> Result<u64> {
        let sorted = self.canonical_sets(sets, self.k - d)?;
        let mut in_union = vec![false; self.n + 1];
        for s in &sorted {
            for &v in s {
                in_union[v as usize] = true;
            }
        }
        let pool: Vec<Vertex> = (1..=self.n as Vertex)
            .filter(|&v| !in_union[v as usize])
            .collect();
        let mut count = 0u64;
        let mut buf = Vec::new();
        for_each_combination(&pool, d, |dset| {
            if sorted.iter().all(|a| {
                merge_sorted(a, dset, &mut buf);
                self.index.contains_key(buf.as_slice())
            }) {
                count += 1;
            }
            true
        });
        Ok(count)
    }

    /// `H` with the edges of `removed` deleted. Every removed edge must be
    /// present.
    pub fn remove_edges<'a>(&self, removed: impl IntoIterator<Item = &'a Edge>) -> Result<KGraph> {
        let mut drop = vec![false; self.edges.len()];
        let mut dropped = 0usize;
        for e in removed {
            let id = self
                .edge_id(e.vertices())
                .ok_or_else(|| Error::MissingEdge(e.clone()))?;
            if !drop[id] {
                drop[id] = true;
                dropped += 1;
            }
        }
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .zip(&drop)
            .filter(|(_, &d)| !d)
            .map(|(e, _)| e.clone())
            .collect();
        debug_assert_eq!(edges.len(), self.edges.len() - dropped);
        Ok(Self::from_canonical(self.n, self.k, edges))
    }

    /// Keep only edges selected by `keep(id)`.
    pub(crate) fn filter_by_id(&self, keep: impl Fn(usize) -> bool) -> KGraph {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, e)| e.clone())
            .collect();
        Self::from_canonical(self.n, self.k, edges)
    }

    /// `H` plus the given edges (which must be new k-sets on `[n]`).
    pub fn add_edges(&self, added: impl IntoIterator<Item = Edge>) -> Result<KGraph> {
        KGraph::new(self.n, self.k, self.edges.iter().cloned().chain(added))
    }

    /// Image of `H` under the vertex map `v -> perm[v - 1]`.
    pub fn relabel(&self, perm: &[Vertex]) -> Result<KGraph> {
        if perm.len() != self.n {
            return Err(Error::InvalidPermutation {
                n: self.n,
                reason: format!("length {}", perm.len()),
            });
        }
        KGraph::new(
            self.n,
            self.k,
            self.edges
                .iter()
                .map(|e| Edge::new(e.vertices().iter().map(|&v| perm[v as usize - 1]).collect()))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// Read the `n k m` text format.
    pub fn read_text(reader: impl BufRead) -> Result<KGraph> {
        let mut header: Option<(usize, usize, usize)> = None;
        let mut edges = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let nums = parse_numbers(t, lineno + 1)?;
            match header {
                None => {
                    if nums.len() != 3 {
                        return Err(Error::Parse {
                            line: lineno + 1,
                            message: "header must be `n k m`".into(),
                        });
                    }
                    header = Some((nums[0], nums[1], nums[2]));
                }
                Some((n, k, m)) => {
                    if nums.len() != k {
                        return Err(Error::Parse {
                            line: lineno + 1,
                            message: format!("expected {k} vertex ids, found {}", nums.len()),
                        });
                    }
                    if edges.len() == m {
                        return Err(Error::Parse {
                            line: lineno + 1,
                            message: format!("more than {m} edges"),
                        });
                    }
                    let vs: Vec<Vertex> = nums.iter().map(|&x| x as Vertex).collect();
                    if let Some(&bad) = vs.iter().find(|&&v| v == 0 || v as usize > n) {
                        return Err(Error::Parse {
                            line: lineno + 1,
                            message: format!("vertex {bad} outside [1, {n}]"),
                        });
                    }
                    edges.push(Edge::new(vs).map_err(|e| Error::Parse {
                        line: lineno + 1,
                        message: e.to_string(),
                    })?);
                }
            }
        }
        let (n, k, m) = header.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing header".into(),
        })?;
        if edges.len() != m {
            return Err(Error::Parse {
                line: 0,
                message: format!("header promised {m} edges, found {}", edges.len()),
            });
        }
        KGraph::new(n, k, edges)
    }

    pub fn write_text(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{} {} {}", self.n, self.k, self.edges.len())?;
        for e in &self.edges {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("ascii")
    }
}

pub(crate) fn parse_numbers(t: &str, line: usize) -> Result<Vec<usize>> {
    t.split_whitespace()
        .map(|tok| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line,
                message: format!("not a non-negative integer: {tok:?}"),
            })
        })
        .collect()
}

/// Merge two disjoint sorted lists into `out`.
pub(crate) fn merge_sorted(a: &[Vertex], b: &[Vertex], out: &mut Vec<Vertex>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[u32]) -> Edge {
        Edge::new(v.to_vec()).unwrap()
    }

    #[test]
    fn complete_and_empty() {
        let h = KGraph::complete(6, 3);
        assert_eq!(h.edge_count(), 20);
        assert!(h.contains(&[1, 2, 3]));
        assert!(!h.contains(&[1, 2]));
        assert_eq!(KGraph::empty(6, 3).edge_count(), 0);
    }

    #[test]
    fn random_extremes() {
        assert_eq!(KGraph::random(6, 3, 1.0, 99).unwrap().edge_count(), 20);
        assert_eq!(KGraph::random(6, 3, 0.0, 99).unwrap().edge_count(), 0);
        assert!(KGraph::random(6, 3, 1.5, 99).is_err());
    }

    #[test]
    fn random_edge_count_within_three_sigma() {
        // Bin(120, 0.5): mean 60, sigma sqrt(30)
        let h = KGraph::random(10, 3, 0.5, 7).unwrap();
        let sigma = (120.0f64 * 0.25).sqrt();
        assert!(
            (h.edge_count() as f64 - 60.0).abs() <= 3.0 * sigma,
            "{}",
            h.edge_count()
        );
        assert_eq!(h, KGraph::random(10, 3, 0.5, 7).unwrap());
    }

    #[test]
    fn extensions_on_complete_graph() {
        let h = KGraph::complete(8, 3);
        assert_eq!(h.count_extensions(&[vec![1, 2]], 1).unwrap(), 6);
        assert_eq!(h.count_extensions(&[vec![1, 2], vec![2, 5]], 1).unwrap(), 5);
        assert_eq!(
            KGraph::empty(8, 3)
                .count_extensions(&[vec![1, 2]], 1)
                .unwrap(),
            0
        );
    }

    #[test]
    fn extensions_reject_bad_sizes() {
        let h = KGraph::complete(8, 3);
        assert!(matches!(
            h.count_extensions(&[vec![1, 2, 3]], 1),
            Err(Error::WrongSetSize {
                expected: 2,
                got: 3
            })
        ));
        assert!(matches!(
            h.count_extensions(&[vec![1, 2], vec![2, 1]], 1),
            Err(Error::DuplicateSet { .. })
        ));
        assert!(h.count_extensions(&[vec![1, 2]], 0).is_err());
    }

    #[test]
    fn extensions_match_brute_force_on_random_graph() {
        let h = KGraph::random(10, 3, 0.5, 3).unwrap();
        let sets = [vec![1u32, 2], vec![3, 4]];
        let mut brute = 0;
        for v in 5..=10u32 {
            if h.contains_set(&[1, 2, v]) && h.contains_set(&[3, 4, v]) {
                brute += 1;
            }
        }
        assert_eq!(h.count_extensions(&sets, 1).unwrap(), brute);
    }

    #[test]
    fn remove_edges_counts() {
        let h = KGraph::complete(6, 3);
        assert_eq!(h.remove_edges(&[]).unwrap(), h);
        assert_eq!(h.remove_edges(h.edges()).unwrap().edge_count(), 0);
        let one = h.remove_edges(&[e(&[1, 2, 3])]).unwrap();
        assert_eq!(one.edge_count(), 19);
        assert!(!one.contains(&[1, 2, 3]));
        assert!(matches!(
            one.remove_edges(&[e(&[1, 2, 3])]),
            Err(Error::MissingEdge(_))
        ));
        assert_eq!(one.add_edges([e(&[1, 2, 3])]).unwrap(), h);
    }

    #[test]
    fn text_round_trip_with_comments() {
        let src = "# a triangle-ish 3-graph\n5 3 2\n1 2 3\n# mid comment\n2 4 5\n";
        let h = KGraph::read_text(src.as_bytes()).unwrap();
        assert_eq!(h.edge_count(), 2);
        assert_eq!(h.to_text(), "5 3 2\n1 2 3\n2 4 5\n");
        assert_eq!(KGraph::read_text(h.to_text().as_bytes()).unwrap(), h);
    }

    #[test]
    fn text_errors() {
        assert!(KGraph::read_text("5 3 2\n1 2 3\n".as_bytes()).is_err());
        assert!(KGraph::read_text("5 3 1\n1 2 9\n".as_bytes()).is_err());
        assert!(KGraph::read_text("5 3 1\n1 2\n".as_bytes()).is_err());
        assert!(KGraph::read_text("5 3 1\n1 1 2\n".as_bytes()).is_err());
        assert!(KGraph::read_text("5 3 2\n1 2 3\n3 2 1\n".as_bytes()).is_err());
    }

    #[test]
    fn colex_rank_is_a_bijection_on_small_sets() {
        let h = KGraph::complete(9, 3);
        let mut ranks: Vec<u128> = h.edges().iter().map(Edge::colex_rank).collect();
        ranks.sort();
        assert_eq!(ranks, (0..84).collect::<Vec<_>>());
    }

    #[test]
    fn large_n_uses_hash_index() {
        let h = KGraph::random(70, 3, 0.01, 1).unwrap();
        assert!(h.masks.is_none());
        for e in h.edges() {
            assert!(h.contains_edge(e));
        }
    }
}
