//! From a permutation of the vertices to the shift digraph `D_sigma`, and from
//! Hamilton cycles of `D_sigma` back to type-`ell` Hamilton cycles of `H`.
//!
//! The permutation is cut into `nu_q = n/q` consecutive q-tuples. For two
//! tuples `v1`, `v2` the concatenation `v1 v2` has `z` windows of length `k`
//! starting at positions `0, ell, ..., (z-1) ell`; `v1` precedes `v2` when all
//! of them are edges, and the arc `(v1, v2)` then owns those `z` edges.

use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::kgraph::{parse_numbers, Edge, KGraph, Vertex};
use crate::params::{Params, Shape};

/// A permutation of `[n]`, stored as the sequence `sigma(1), ..., sigma(n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation(Vec<Vertex>);

impl Permutation {
    pub fn new(seq: Vec<Vertex>) -> Result<Self> {
        let n = seq.len();
        let mut seen = vec![false; n + 1];
        for &v in &seq {
            if v == 0 || v as usize > n {
                return Err(Error::InvalidPermutation {
                    n,
                    reason: format!("value {v} out of range"),
                });
            }
            if std::mem::replace(&mut seen[v as usize], true) {
                return Err(Error::InvalidPermutation {
                    n,
                    reason: format!("value {v} repeated"),
                });
            }
        }
        Ok(Permutation(seq))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((1..=n as Vertex).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut v: Vec<Vertex> = (1..=n as Vertex).collect();
        v.shuffle(rng);
        Permutation(v)
    }

    pub fn as_slice(&self) -> &[Vertex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// An ordered tuple of distinct vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QTuple(Vec<Vertex>);

impl QTuple {
    pub fn new(vertices: Vec<Vertex>) -> Result<Self> {
        let mut s = vertices.clone();
        s.sort_unstable();
        if let Some(w) = s.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::RepeatedVertex {
                vertex: w[0],
                context: "q-tuple",
            });
        }
        Ok(QTuple(vertices))
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
}

fn windows_unchecked(v1: &[Vertex], v2: &[Vertex], shape: &Shape) -> Vec<Edge> {
    let cat: Vec<Vertex> = v1.iter().chain(v2).copied().collect();
    (0..shape.z)
        .map(|i| {
            Edge::from_sorted({
                let mut w = cat[i * shape.ell..i * shape.ell + shape.k].to_vec();
                w.sort_unstable();
                w
            })
        })
        .collect()
}

/// The `z` windows `{v_(i ell + 1), ..., v_(i ell + k)}` of `v1 v2`.
pub fn window_edges(v1: &[Vertex], v2: &[Vertex], params: &Params) -> Result<Vec<Edge>> {
    for (v, name) in [(v1, "first"), (v2, "second")] {
        if v.len() != params.q {
            return Err(Error::WrongSetSize {
                expected: params.q,
                got: v.len(),
            });
        }
        QTuple::new(v.to_vec()).map_err(|_| Error::RepeatedVertex {
            vertex: first_repeat(v).unwrap_or(0),
            context: if name == "first" {
                "first q-tuple"
            } else {
                "second q-tuple"
            },
        })?;
    }
    if let Some(&v) = v1.iter().find(|v| v2.contains(v)) {
        return Err(Error::OverlappingTuples { vertex: v });
    }
    let shape = Shape::new(params.k, params.ell)?;
    Ok(windows_unchecked(v1, v2, &shape))
}

fn first_repeat(v: &[Vertex]) -> Option<Vertex> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.windows(2).find(|w| w[0] == w[1]).map(|w| w[0])
}

/// True iff every window edge of `v1 v2` is an edge of `h`.
pub fn precedes(h: &KGraph, v1: &[Vertex], v2: &[Vertex], params: &Params) -> Result<bool> {
    Ok(window_edges(v1, v2, params)?
        .iter()
        .all(|e| h.contains_edge(e)))
}

/// `D_sigma` together with the edges owned by each arc.
///
/// Blocks are numbered from 0 in sigma order. Arcs are kept sorted and
/// `owned[a]` lists the `z` edges of arc `arcs[a]` in window order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftDigraph {
    params: Params,
    sigma: Permutation,
    blocks: Vec<QTuple>,
    arcs: Vec<(usize, usize)>,
    owned: Vec<Vec<Edge>>,
}

impl ShiftDigraph {
    /// Assemble from parts, checking structure (blocks partition `[n]`, arcs
    /// in range, loop-free, `z` owned `k`-sets per arc) but not ownership
    /// disjointness, which [`check_ownership_partition`] reports.
    pub fn from_parts(
        params: Params,
        blocks: Vec<QTuple>,
        arcs: Vec<(usize, usize)>,
        owned: Vec<Vec<Edge>>,
    ) -> Result<Self> {
        if blocks.len() != params.nu_q {
            return Err(Error::WrongSetSize {
                expected: params.nu_q,
                got: blocks.len(),
            });
        }
        if let Some(b) = blocks.iter().find(|b| b.len() != params.q) {
            return Err(Error::WrongSetSize {
                expected: params.q,
                got: b.len(),
            });
        }
        let seq: Vec<Vertex> = blocks
            .iter()
            .flat_map(|b| b.vertices().iter().copied())
            .collect();
        let sigma = Permutation::new(seq)?;
        if arcs.len() != owned.len() {
            return Err(Error::Invariant(format!(
                "{} arcs but {} owned lists",
                arcs.len(),
                owned.len()
            )));
        }
        let mut seen = FxHashSet::default();
        for &(a, b) in &arcs {
            if a == b || a >= params.nu_q || b >= params.nu_q || !seen.insert((a, b)) {
                return Err(Error::InvalidArc {
                    from: a + 1,
                    to: b + 1,
                    nu: params.nu_q,
                });
            }
        }
        for list in &owned {
            if list.len() != params.z {
                return Err(Error::WrongSetSize {
                    expected: params.z,
                    got: list.len(),
                });
            }
            if let Some(e) = list.iter().find(|e| e.len() != params.k) {
                return Err(Error::WrongSetSize {
                    expected: params.k,
                    got: e.len(),
                });
            }
        }
        let mut pairs: Vec<((usize, usize), Vec<Edge>)> = arcs.into_iter().zip(owned).collect();
        pairs.sort_by_key(|p| p.0);
        let (arcs, owned) = pairs.into_iter().unzip();
        Ok(ShiftDigraph {
            params,
            sigma,
            blocks,
            arcs,
            owned,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn sigma(&self) -> &Permutation {
        &self.sigma
    }

    pub fn blocks(&self) -> &[QTuple] {
        &self.blocks
    }

    pub fn nu(&self) -> usize {
        self.blocks.len()
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arc_index(&self, from: usize, to: usize) -> Option<usize> {
        self.arcs.binary_search(&(from, to)).ok()
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.arc_index(from, to).is_some()
    }

    /// Owned edges of arc number `a` (index into [`Self::arcs`]).
    pub fn owned(&self, a: usize) -> &[Edge] {
        &self.owned[a]
    }

    pub fn owned_lists(&self) -> &[Vec<Edge>] {
        &self.owned
    }

    /// All owned edges, i.e. the edge set of `H_i`.
    pub fn owned_edges(&self) -> impl Iterator<Item = &Edge> {
        self.owned.iter().flatten()
    }

    /// Inverse ownership: edge to arc number.
    pub fn owner_map(&self) -> FxHashMap<&Edge, usize> {
        let mut m = FxHashMap::default();
        for (a, list) in self.owned.iter().enumerate() {
            for e in list {
                m.insert(e, a);
            }
        }
        m
    }

    /// Keep only the arcs for which `keep(arc number)` holds.
    pub fn filter_arcs(&self, keep: impl Fn(usize) -> bool) -> ShiftDigraph {
        let (arcs, owned) = self
            .arcs
            .iter()
            .zip(&self.owned)
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, (a, o))| (*a, o.clone()))
            .unzip();
        ShiftDigraph {
            params: self.params,
            sigma: self.sigma.clone(),
            blocks: self.blocks.clone(),
            arcs,
            owned,
        }
    }

    pub fn to_digraph(&self) -> Digraph {
        Digraph::from_arcs(self.nu(), self.arcs.iter().copied())
            .expect("shift digraph arcs are valid")
    }

    pub fn write_dump(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{} {}", self.nu(), self.params.q)?;
        writeln!(w, "# k {} ell {}", self.params.k, self.params.ell)?;
        for b in &self.blocks {
            writeln!(w, "{}", join(b.vertices()))?;
        }
        for (&(a, b), list) in self.arcs.iter().zip(&self.owned) {
            writeln!(w, "{} {}", a + 1, b + 1)?;
            for e in list {
                writeln!(w, "{}", join(e.vertices()))?;
            }
        }
        Ok(())
    }

    pub fn to_dump(&self) -> String {
        let mut buf = Vec::new();
        self.write_dump(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dump is ASCII")
    }

    /// Parse the dump format: header `nu_q q`, an optional `# k K ell L`
    /// line, `nu_q` tuple lines, then arc lines `i j` (1-based) each
    /// followed by its owned edges.
    pub fn read_dump(reader: impl BufRead) -> Result<ShiftDigraph> {
        let mut header: Option<(usize, usize)> = None;
        let mut kl: Option<(usize, usize)> = None;
        let mut blocks = Vec::new();
        let mut arcs: Vec<(usize, usize)> = Vec::new();
        let mut owned: Vec<Vec<Edge>> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let t = line.trim();
            if let Some(c) = t.strip_prefix('#') {
                let words: Vec<&str> = c.split_whitespace().collect();
                if let ["k", k, "ell", l] = words.as_slice() {
                    let parse = |s: &str| {
                        s.parse::<usize>().map_err(|e| Error::Parse {
                            line: lineno,
                            message: e.to_string(),
                        })
                    };
                    kl = Some((parse(k)?, parse(l)?));
                }
                continue;
            }
            if t.is_empty() {
                continue;
            }
            let nums = parse_numbers(t, lineno)?;
            let Some((nu, q)) = header else {
                if nums.len() != 2 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "header must be `nu_q q`".into(),
                    });
                }
                header = Some((nums[0], nums[1]));
                continue;
            };
            let as_vertices =
                |nums: &[usize]| nums.iter().map(|&x| x as Vertex).collect::<Vec<_>>();
            if blocks.len() < nu {
                if nums.len() != q {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("tuple line needs {q} vertices"),
                    });
                }
                blocks.push(QTuple::new(as_vertices(&nums))?);
            } else if nums.len() == 2 {
                if nums[0] == 0 || nums[1] == 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "arc ids are 1-based".into(),
                    });
                }
                arcs.push((nums[0] - 1, nums[1] - 1));
                owned.push(Vec::new());
            } else {
                let Some(list) = owned.last_mut() else {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "edge line before any arc".into(),
                    });
                };
                list.push(Edge::new(as_vertices(&nums))?);
            }
        }
        let Some((nu, q)) = header else {
            return Err(Error::Parse {
                line: 0,
                message: "missing header".into(),
            });
        };
        if blocks.len() != nu {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected {nu} tuple lines, found {}", blocks.len()),
            });
        }
        let (k, ell) = match kl {
            Some(x) => x,
            None => infer_k_ell(q, &owned)?,
        };
        let params = Params::derive(k, ell, nu * q)?;
        if params.q != q {
            return Err(Error::Parse {
                line: 0,
                message: format!(
                    "k = {k}, ell = {ell} give q = {}, header says {q}",
                    params.q
                ),
            });
        }
        ShiftDigraph::from_parts(params, blocks, arcs, owned)
    }
}

fn infer_k_ell(q: usize, owned: &[Vec<Edge>]) -> Result<(usize, usize)> {
    let missing = || Error::Parse {
        line: 0,
        message: "cannot infer k and ell; add a `# k K ell L` line".into(),
    };
    let first = owned.first().ok_or_else(missing)?;
    let k = first.first().ok_or_else(missing)?.len();
    let z = first.len();
    if z == 0 || q % z != 0 {
        return Err(missing());
    }
    Ok((k, q / z))
}

fn join(vs: &[Vertex]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Build `D_sigma`: blocks are the consecutive q-blocks of `sigma`, and
/// `(i, j)` is an arc iff block `i` precedes block `j` in `h`.
pub fn build_digraph(h: &KGraph, sigma: &Permutation, params: &Params) -> Result<ShiftDigraph> {
    if h.k() != params.k {
        return Err(Error::UniformityMismatch {
            graph: h.k(),
            params: params.k,
        });
    }
    if h.n() != params.n || sigma.len() != params.n {
        return Err(Error::VertexCountMismatch {
            graph: sigma.len().max(h.n()),
            params: params.n,
        });
    }
    let shape = Shape::new(params.k, params.ell)?;
    let blocks: Vec<QTuple> = sigma
        .as_slice()
        .chunks(params.q)
        .map(|c| QTuple(c.to_vec()))
        .collect();
    let nu = blocks.len();
    let rows: Vec<Vec<((usize, usize), Vec<Edge>)>> = (0..nu)
        .into_par_iter()
        .map(|i| {
            (0..nu)
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let w = windows_unchecked(blocks[i].vertices(), blocks[j].vertices(), &shape);
                    w.iter().all(|e| h.contains_edge(e)).then_some(((i, j), w))
                })
                .collect()
        })
        .collect();
    let (arcs, owned) = rows.into_iter().flatten().unzip();
    Ok(ShiftDigraph {
        params: *params,
        sigma: sigma.clone(),
        blocks,
        arcs,
        owned,
    })
}

/// True iff no edge is owned by two arcs (or twice by one arc).
pub fn check_ownership_partition(d: &ShiftDigraph) -> bool {
    let mut seen = FxHashSet::default();
    d.owned_edges().all(|e| seen.insert(e))
}

/// A type-`ell` Hamilton cycle: a cyclic vertex order and its `n / ell`
/// window edges `f_i = {w_(i ell + 1), ..., w_(i ell + k)}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeLCycle {
    pub vertex_order: Vec<Vertex>,
    pub edge_sequence: Vec<Edge>,
}

impl TypeLCycle {
    /// The cycle whose edges are the cyclic windows of `order`.
    pub fn from_vertex_order(order: Vec<Vertex>, k: usize, ell: usize) -> Self {
        let n = order.len();
        let edge_sequence = (0..n / ell)
            .map(|i| {
                let mut w: Vec<Vertex> = (0..k).map(|j| order[(i * ell + j) % n]).collect();
                w.sort_unstable();
                Edge::from_sorted(w)
            })
            .collect();
        TypeLCycle {
            vertex_order: order,
            edge_sequence,
        }
    }

    pub fn len(&self) -> usize {
        self.edge_sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_sequence.is_empty()
    }
}

/// Lift a Hamilton cycle of `d` (block ids, 0-based) to `H`.
pub fn lift_cycle(d: &ShiftDigraph, dicycle: &[usize]) -> Result<TypeLCycle> {
    let nu = d.nu();
    if dicycle.len() != nu {
        return Err(Error::NotHamiltonian {
            reason: format!("{} vertices listed, digraph has {nu}", dicycle.len()),
        });
    }
    let mut seen = vec![false; nu];
    for &b in dicycle {
        if b >= nu || std::mem::replace(&mut seen[b], true) {
            return Err(Error::NotHamiltonian {
                reason: format!("block {} repeated or out of range", b + 1),
            });
        }
    }
    let mut arc_ids = Vec::with_capacity(nu);
    for t in 0..nu {
        let (a, b) = (dicycle[t], dicycle[(t + 1) % nu]);
        match d.arc_index(a, b) {
            Some(i) => arc_ids.push(i),
            None => {
                return Err(Error::NotHamiltonian {
                    reason: format!("({}, {}) is not an arc", a + 1, b + 1),
                })
            }
        }
    }
    let p = d.params();
    let order: Vec<Vertex> = dicycle
        .iter()
        .flat_map(|&b| d.blocks[b].vertices().iter().copied())
        .collect();
    let cycle = TypeLCycle::from_vertex_order(order, p.k, p.ell);
    // edge a*z + b is window b of arc a
    for (idx, e) in cycle.edge_sequence.iter().enumerate() {
        let owned = &d.owned(arc_ids[idx / p.z])[idx % p.z];
        if owned != e {
            return Err(Error::Invariant(format!(
                "lifted edge {idx} is {e:?}, arc owns {owned:?}"
            )));
        }
    }
    Ok(cycle)
}

/// First reason a candidate type-`ell` cycle fails validation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleViolation {
    /// (a) wrong number of edges.
    EdgeCount { expected: usize, got: usize },
    /// (a) edge of the wrong size.
    EdgeSize { index: usize, size: usize },
    /// (a) edge not in `H`.
    NotAnEdge { index: usize, edge: Edge },
    /// (a) edge listed twice.
    RepeatedEdge { index: usize, first: usize },
    /// (b) `|f_(i+1) \ f_i| != ell`.
    Step { index: usize, new_vertices: usize },
    /// (c) the sets `g_i` miss a vertex.
    Uncovered { vertex: Vertex },
    /// The edges are not the windows of `vertex_order`.
    OrderMismatch { index: usize },
    /// `vertex_order` is not a permutation of `[n]`.
    BadOrder { reason: String },
}

impl CycleViolation {
    pub fn clause(&self) -> char {
        match self {
            CycleViolation::EdgeCount { .. }
            | CycleViolation::EdgeSize { .. }
            | CycleViolation::NotAnEdge { .. }
            | CycleViolation::RepeatedEdge { .. } => 'a',
            CycleViolation::Step { .. } => 'b',
            CycleViolation::Uncovered { .. } => 'c',
            CycleViolation::OrderMismatch { .. } | CycleViolation::BadOrder { .. } => 'd',
        }
    }
}

impl fmt::Display for CycleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycleViolation::EdgeCount { expected, got } => {
                write!(f, "(a) {got} edges, expected {expected}")
            }
            CycleViolation::EdgeSize { index, size } => {
                write!(f, "(a) edge {index} has {size} vertices")
            }
            CycleViolation::NotAnEdge { index, edge } => {
                write!(f, "(a) edge {index} {{{edge}}} is not in H")
            }
            CycleViolation::RepeatedEdge { index, first } => {
                write!(f, "(a) edge {index} repeats edge {first}")
            }
            CycleViolation::Step {
                index,
                new_vertices,
            } => {
                write!(
                    f,
                    "(b) edge {} adds {new_vertices} new vertices to edge {index}",
                    index + 1
                )
            }
            CycleViolation::Uncovered { vertex } => {
                write!(f, "(c) vertex {vertex} never enters the cycle")
            }
            CycleViolation::OrderMismatch { index } => {
                write!(f, "edge {index} is not a window of the vertex order")
            }
            CycleViolation::BadOrder { reason } => write!(f, "vertex order: {reason}"),
        }
    }
}

/// Check (a) `n/ell` distinct edges of `H`, (b) consecutive edges differ in
/// exactly `ell` vertices cyclically, (c) the differences cover `[n]`, and
/// finally that the edges are the windows of `vertex_order`.
pub fn validate_type_l_cycle(
    h: &KGraph,
    c: &TypeLCycle,
    params: &Params,
) -> std::result::Result<(), CycleViolation> {
    let (n, k, ell) = (params.n, params.k, params.ell);
    let m = c.edge_sequence.len();
    if m != params.nu_ell {
        return Err(CycleViolation::EdgeCount {
            expected: params.nu_ell,
            got: m,
        });
    }
    let mut first_seen: FxHashMap<&Edge, usize> = FxHashMap::default();
    for (i, e) in c.edge_sequence.iter().enumerate() {
        if e.len() != k {
            return Err(CycleViolation::EdgeSize {
                index: i,
                size: e.len(),
            });
        }
        if !h.contains_edge(e) {
            return Err(CycleViolation::NotAnEdge {
                index: i,
                edge: e.clone(),
            });
        }
        if let Some(&j) = first_seen.get(e) {
            return Err(CycleViolation::RepeatedEdge { index: i, first: j });
        }
        first_seen.insert(e, i);
    }
    let mut covered = vec![false; n + 1];
    for i in 0..m {
        let (f, g) = (&c.edge_sequence[i], &c.edge_sequence[(i + 1) % m]);
        let fresh: Vec<Vertex> = g
            .vertices()
            .iter()
            .copied()
            .filter(|&v| !f.contains(v))
            .collect();
        if fresh.len() != ell {
            return Err(CycleViolation::Step {
                index: i,
                new_vertices: fresh.len(),
            });
        }
        for v in fresh {
            if (v as usize) <= n {
                covered[v as usize] = true;
            }
        }
    }
    if let Some(v) = (1..=n).find(|&v| !covered[v]) {
        return Err(CycleViolation::Uncovered {
            vertex: v as Vertex,
        });
    }
    if let Err(Error::InvalidPermutation { reason, .. }) = Permutation::new(c.vertex_order.clone())
    {
        return Err(CycleViolation::BadOrder { reason });
    }
    if c.vertex_order.len() != n {
        return Err(CycleViolation::BadOrder {
            reason: format!("{} vertices, expected {n}", c.vertex_order.len()),
        });
    }
    let windows = TypeLCycle::from_vertex_order(c.vertex_order.clone(), k, ell);
    if let Some(i) = (0..m).find(|&i| windows.edge_sequence[i] != c.edge_sequence[i]) {
        return Err(CycleViolation::OrderMismatch { index: i });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn e(v: &[u32]) -> Edge {
        Edge::new(v.to_vec()).unwrap()
    }

    #[test]
    fn windows_k3() {
        let p = Params::derive(3, 1, 8).unwrap();
        assert_eq!(
            window_edges(&[1, 2], &[3, 4], &p).unwrap(),
            vec![e(&[1, 2, 3]), e(&[2, 3, 4])]
        );
        assert!(matches!(
            window_edges(&[1, 2], &[2, 4], &p),
            Err(Error::OverlappingTuples { vertex: 2 })
        ));
    }

    #[test]
    fn windows_k5() {
        let p = Params::derive(5, 2, 16).unwrap();
        let w = window_edges(&[1, 2, 3, 4], &[5, 6, 7, 8], &p).unwrap();
        assert_eq!(w, vec![e(&[1, 2, 3, 4, 5]), e(&[3, 4, 5, 6, 7])]);
    }

    #[test]
    fn precedes_is_a_conjunction() {
        let p = Params::derive(3, 1, 8).unwrap();
        let full = KGraph::complete(8, 3);
        assert!(precedes(&full, &[1, 2], &[3, 4], &p).unwrap());
        assert!(!precedes(&KGraph::empty(8, 3), &[1, 2], &[3, 4], &p).unwrap());
        let missing = full.remove_edges([&e(&[2, 3, 4])]).unwrap();
        assert!(!precedes(&missing, &[1, 2], &[3, 4], &p).unwrap());
    }

    #[test]
    fn complete_graph_gives_complete_digraph() {
        let p = Params::derive(3, 1, 8).unwrap();
        let mut rng = stream_rng(5, Stream::Permutation, &[0]);
        let sigma = Permutation::random(8, &mut rng);
        let d = build_digraph(&KGraph::complete(8, 3), &sigma, &p).unwrap();
        assert_eq!(d.nu(), 4);
        assert_eq!(d.arc_count(), 12);
        assert!(d.owned_lists().iter().all(|o| o.len() == 2));
        assert!(check_ownership_partition(&d));
        let empty = build_digraph(&KGraph::empty(8, 3), &sigma, &p).unwrap();
        assert_eq!(empty.arc_count(), 0);
    }

    #[test]
    fn corrupted_ownership_detected() {
        let p = Params::derive(3, 1, 8).unwrap();
        let d = build_digraph(&KGraph::complete(8, 3), &Permutation::identity(8), &p).unwrap();
        let mut owned = d.owned_lists().to_vec();
        owned[1][0] = owned[0][0].clone();
        let bad =
            ShiftDigraph::from_parts(p, d.blocks().to_vec(), d.arcs().to_vec(), owned).unwrap();
        assert!(!check_ownership_partition(&bad));
    }

    #[test]
    fn lift_and_validate_k3() {
        let p = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        let d = build_digraph(&h, &Permutation::identity(8), &p).unwrap();
        let c = lift_cycle(&d, &[0, 1, 2, 3]).unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(c.vertex_order, (1..=8).collect::<Vec<_>>());
        assert_eq!(validate_type_l_cycle(&h, &c, &p), Ok(()));
        for w in c.edge_sequence.windows(2) {
            assert_eq!(
                w[1].vertices()
                    .iter()
                    .filter(|v| !w[0].contains(**v))
                    .count(),
                1
            );
        }
    }

    #[test]
    fn lift_rejects_missing_arc() {
        let p = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3)
            .remove_edges([&e(&[4, 5, 6])])
            .unwrap();
        let d = build_digraph(&h, &Permutation::identity(8), &p).unwrap();
        let err = lift_cycle(&d, &[0, 1, 2, 3]).unwrap_err();
        assert!(err.to_string().contains("(2, 3)"), "{err}");
        assert!(lift_cycle(&d, &[0, 1, 2]).is_err());
    }

    #[test]
    fn replaced_edge_fails_clause_b() {
        let p = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        let d = build_digraph(&h, &Permutation::identity(8), &p).unwrap();
        let mut c = lift_cycle(&d, &[0, 1, 2, 3]).unwrap();
        c.edge_sequence[3] = e(&[1, 5, 8]);
        assert_eq!(validate_type_l_cycle(&h, &c, &p).unwrap_err().clause(), 'b');
    }

    #[test]
    fn dump_round_trip() {
        let p = Params::derive(5, 2, 16).unwrap();
        let h = KGraph::random(16, 5, 0.9, 3).unwrap();
        let mut rng = stream_rng(1, Stream::Permutation, &[0]);
        let d = build_digraph(&h, &Permutation::random(16, &mut rng), &p).unwrap();
        let text = d.to_dump();
        assert_eq!(ShiftDigraph::read_dump(text.as_bytes()).unwrap(), d);
        let stripped: String = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect();
        if d.arc_count() > 0 {
            assert_eq!(ShiftDigraph::read_dump(stripped.as_bytes()).unwrap(), d);
        }
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![2, 1, 3]).is_ok());
        assert!(Permutation::new(vec![2, 2, 3]).is_err());
        assert!(Permutation::new(vec![0, 1]).is_err());
    }
}
