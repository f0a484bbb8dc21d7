//! One round of random shift digraphs, labels and filtering.
//!
//! 1. Draw `r` independent uniform permutations and build `D_1, ..., D_r`;
//!    `H_i` is the set of edges owned by arcs of `D_i`.
//! 2. For each edge `e`, `I_e` is the set of `i` with `e` in `H_i`.
//! 3. Each edge with nonempty `I_e` gets a uniform label from `I_e`.
//! 4. `D'_i` keeps the arcs whose `z` owned edges all carry label `i`.
//! 5. `H'_i` is the edge set owned by `D'_i`; the residual is `H` minus all
//!    `H'_i`.
//!
//! Digraph indices are 0-based throughout.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, factorial, falling_factorial};
use crate::error::{Error, Result};
use crate::kgraph::{Edge, KGraph, Vertex};
use crate::params::Params;
use crate::reduction::{build_digraph, Permutation, ShiftDigraph};
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueMode {
    Formula,
    Override,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub kappa: Option<f64>,
    pub r: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcedureParams {
    /// `kappa` after rounding to the nearest integer (at least 1), or the
    /// override verbatim.
    pub kappa: f64,
    pub kappa_raw: f64,
    pub kappa_mode: ValueMode,
    pub r: usize,
    /// `ell q n^(k-2) kappa_raw / (k! p^(z-1))` before rounding up.
    pub r_raw: f64,
    pub r_mode: ValueMode,
    pub rounding: String,
}

pub const DEFAULT_R_BUDGET: f64 = 1e6;

/// `kappa = 6(k+1) ln n / eps^2` and `r = ell q n^(k-2) kappa / (k! p^(z-1))`,
/// unless overridden.
pub fn compute_procedure_params(
    params: &Params,
    p: f64,
    eps: f64,
    ov: Overrides,
    r_budget: f64,
) -> Result<ProcedureParams> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidEpsilon { value: eps });
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProbability { value: p });
    }
    let Params {
        k, ell, q, z, n, ..
    } = *params;
    let (kappa_raw, kappa, kappa_mode) = match ov.kappa {
        Some(v) if !(v > 0.0) || !v.is_finite() => return Err(Error::InvalidKappa { value: v }),
        Some(v) => (v, v, ValueMode::Override),
        None => {
            let raw = 6.0 * (k as f64 + 1.0) * (n as f64).ln() / (eps * eps);
            (raw, raw.round().max(1.0), ValueMode::Formula)
        }
    };
    let r_raw = (ell * q) as f64 * (n as f64).powi(k as i32 - 2) * kappa_raw
        / (factorial(k) * p.powi(z as i32 - 1));
    let (r, r_mode) = match ov.r {
        Some(r) => (r, ValueMode::Override),
        None => {
            if !(r_raw <= r_budget) {
                return Err(Error::RBudgetExceeded {
                    r_raw,
                    budget: r_budget,
                });
            }
            (r_raw.ceil().max(1.0) as usize, ValueMode::Formula)
        }
    };
    Ok(ProcedureParams {
        kappa,
        kappa_raw,
        kappa_mode,
        r,
        r_raw,
        r_mode,
        rounding: "kappa to nearest (min 1), r up (min 1); r_raw uses kappa_raw".into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMode {
    /// Low-memory when `r * nu_q^2` exceeds the budget.
    Auto,
    Full,
    Low,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcedureConfig {
    pub memory: MemoryMode,
    /// Budget for `r * nu_q^2` before low-memory mode kicks in.
    pub memory_budget: f64,
}

impl Default for ProcedureConfig {
    fn default() -> Self {
        ProcedureConfig {
            memory: MemoryMode::Auto,
            memory_budget: 5e7,
        }
    }
}

/// Coverage sets and labels, indexed by edge id of `H`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelState {
    pub coverage: Vec<Vec<u32>>,
    pub labels: Vec<Option<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcedureOutput {
    pub procedure: ProcedureParams,
    pub seed: u64,
    pub low_memory: bool,
    /// `D_1, ..., D_r`; empty in low-memory mode.
    pub digraphs: Vec<ShiftDigraph>,
    /// `|E(H_i)|` for every `i`.
    pub h_sizes: Vec<usize>,
    pub filtered: Vec<ShiftDigraph>,
    pub packed_graphs: Vec<Vec<Edge>>,
    pub residual: KGraph,
    pub labels: LabelState,
}

impl ProcedureOutput {
    /// Edges with `I_e` empty.
    pub fn uncovered(&self) -> usize {
        self.labels.coverage.iter().filter(|c| c.is_empty()).count()
    }

    pub fn packed_total(&self) -> usize {
        self.packed_graphs.iter().map(|g| g.len()).sum()
    }
}

pub fn run_procedure1(
    h: &KGraph,
    params: &Params,
    pp: &ProcedureParams,
    seed: u64,
) -> Result<ProcedureOutput> {
    run_procedure1_with(h, params, pp, seed, &ProcedureConfig::default())
}

fn digraph_for(h: &KGraph, params: &Params, seed: u64, i: usize) -> Result<ShiftDigraph> {
    let mut rng = stream_rng(seed, Stream::Permutation, &[i as u64]);
    build_digraph(h, &Permutation::random(params.n, &mut rng), params)
}

fn owned_ids(h: &KGraph, d: &ShiftDigraph) -> Result<Vec<Vec<usize>>> {
    d.owned_lists()
        .iter()
        .map(|list| {
            list.iter()
                .map(|e| {
                    h.edge_id(e.vertices())
                        .ok_or_else(|| Error::MissingEdge(e.clone()))
                })
                .collect()
        })
        .collect()
}

pub fn run_procedure1_with(
    h: &KGraph,
    params: &Params,
    pp: &ProcedureParams,
    seed: u64,
    cfg: &ProcedureConfig,
) -> Result<ProcedureOutput> {
    if h.k() != params.k {
        return Err(Error::UniformityMismatch {
            graph: h.k(),
            params: params.k,
        });
    }
    if h.n() != params.n {
        return Err(Error::VertexCountMismatch {
            graph: h.n(),
            params: params.n,
        });
    }
    let r = pp.r;
    let low = match cfg.memory {
        MemoryMode::Full => false,
        MemoryMode::Low => true,
        MemoryMode::Auto => r as f64 * (params.nu_q as f64).powi(2) > cfg.memory_budget,
    };

    // steps 1-2
    let mut coverage: Vec<Vec<u32>> = vec![Vec::new(); h.edge_count()];
    let mut h_sizes = Vec::with_capacity(r);
    let mut digraphs = Vec::new();
    let chunk = if low {
        rayon::current_num_threads().max(1) * 4
    } else {
        r.max(1)
    };
    for start in (0..r).step_by(chunk) {
        let end = (start + chunk).min(r);
        let built: Vec<(ShiftDigraph, Vec<Vec<usize>>)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let d = digraph_for(h, params, seed, i)?;
                let ids = owned_ids(h, &d)?;
                Ok((d, ids))
            })
            .collect::<Result<_>>()?;
        for (off, (d, ids)) in built.into_iter().enumerate() {
            let i = (start + off) as u32;
            h_sizes.push(ids.iter().map(|l| l.len()).sum());
            for id in ids.into_iter().flatten() {
                coverage[id].push(i);
            }
            if !low {
                digraphs.push(d);
            }
        }
    }

    // step 3
    let labels: Vec<Option<u32>> = coverage
        .par_iter()
        .enumerate()
        .map(|(id, cov)| {
            if cov.is_empty() {
                return None;
            }
            let rank = h.edges()[id].colex_rank();
            let mut rng = stream_rng(seed, Stream::Label, &[(rank >> 64) as u64, rank as u64]);
            Some(cov[rng.gen_range(0..cov.len())])
        })
        .collect();

    // steps 4-5
    let filter = |i: usize, d: &ShiftDigraph| -> Result<ShiftDigraph> {
        let ids = owned_ids(h, d)?;
        Ok(d.filter_arcs(|a| ids[a].iter().all(|&id| labels[id] == Some(i as u32))))
    };
    let filtered: Vec<ShiftDigraph> = if low {
        (0..r)
            .into_par_iter()
            .map(|i| filter(i, &digraph_for(h, params, seed, i)?))
            .collect::<Result<_>>()?
    } else {
        digraphs
            .par_iter()
            .enumerate()
            .map(|(i, d)| filter(i, d))
            .collect::<Result<_>>()?
    };
    let packed_graphs: Vec<Vec<Edge>> = filtered
        .iter()
        .map(|d| d.owned_edges().cloned().collect())
        .collect();

    let mut in_packed = vec![false; h.edge_count()];
    for (i, g) in packed_graphs.iter().enumerate() {
        for e in g {
            let id = h
                .edge_id(e.vertices())
                .ok_or_else(|| Error::MissingEdge(e.clone()))?;
            if labels[id] != Some(i as u32) {
                return Err(Error::Invariant(format!(
                    "edge {e:?} in H'_{i} carries label {:?}",
                    labels[id]
                )));
            }
            if std::mem::replace(&mut in_packed[id], true) {
                return Err(Error::Invariant(format!("edge {e:?} lies in two H'_i")));
            }
        }
    }
    let residual = h.filter_by_id(|id| !in_packed[id]);
    let packed: usize = packed_graphs.iter().map(|g| g.len()).sum();
    if residual.edge_count() + packed != h.edge_count() {
        return Err(Error::Invariant(format!(
            "|E(H)| = {} but residual {} + packed {packed}",
            h.edge_count(),
            residual.edge_count()
        )));
    }

    Ok(ProcedureOutput {
        procedure: pp.clone(),
        seed,
        low_memory: low,
        digraphs,
        h_sizes,
        filtered,
        packed_graphs,
        residual,
        labels: LabelState { coverage, labels },
    })
}

/// Independent check of the output: `H'_i` pairwise disjoint, each `H'_i`
/// exactly the owned edges of arcs whose owned edges all carry label `i`,
/// and `|E(H)| = |E(residual)| + sum |E(H'_i)|`.
pub fn check_procedure_output(
    h: &KGraph,
    out: &ProcedureOutput,
) -> std::result::Result<(), String> {
    let mut owner: BTreeMap<&[Vertex], usize> = BTreeMap::new();
    for (i, g) in out.packed_graphs.iter().enumerate() {
        for e in g {
            if let Some(j) = owner.insert(e.vertices(), i) {
                return Err(format!("edge {e:?} in H'_{j} and H'_{i}"));
            }
            if !h.contains_edge(e) {
                return Err(format!("edge {e:?} of H'_{i} not in H"));
            }
        }
    }
    let label_of = |e: &Edge| h.edge_id(e.vertices()).and_then(|id| out.labels.labels[id]);
    if !out.digraphs.is_empty() {
        for (i, (d, f)) in out.digraphs.iter().zip(&out.filtered).enumerate() {
            for (a, &arc) in d.arcs().iter().enumerate() {
                let keep = d.owned(a).iter().all(|e| label_of(e) == Some(i as u32));
                if keep != f.has_arc(arc.0, arc.1) {
                    return Err(format!(
                        "digraph {i}: arc {arc:?} kept = {}, labels say {keep}",
                        !keep
                    ));
                }
            }
        }
    }
    for e in out.residual.edges() {
        if owner.contains_key(e.vertices()) {
            return Err(format!("edge {e:?} both packed and residual"));
        }
    }
    if out.residual.edge_count() + owner.len() != h.edge_count() {
        return Err(format!(
            "accounting: {} != {} + {}",
            h.edge_count(),
            out.residual.edge_count(),
            owner.len()
        ));
    }
    Ok(())
}

/// Probability that an edge of `H` is owned in one `D_i`, in three forms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageProbabilities {
    /// `k! p^(z-1) / (ell q n^(k-2))`, the leading-order value.
    pub leading: f64,
    /// `z k! n^(2q-k) p_2 p^(z-1)` with `p_2 = ((1/q) prod_(i<q) 1/(n-i))^2`,
    /// the count behind the leading-order value.
    pub window_count: f64,
    /// `z nu_q (nu_q - 1) p^(z-1) / C(n, k)`: exact for the complete graph,
    /// and for `H(n, p)` conditional on the edge being present.
    pub exact: f64,
}

pub fn coverage_probabilities(params: &Params, p: f64) -> CoverageProbabilities {
    let Params {
        k,
        ell,
        q,
        z,
        n,
        nu_q,
        ..
    } = *params;
    let nf = n as f64;
    let pz = p.powi(z as i32 - 1);
    let p2 = (1.0 / (q as f64 * falling_factorial(nf - 1.0, q - 1))).powi(2);
    CoverageProbabilities {
        leading: factorial(k) * pz / ((ell * q) as f64 * nf.powi(k as i32 - 2)),
        window_count: z as f64 * factorial(k) * nf.powi((2 * q - k) as i32) * p2 * pz,
        exact: z as f64 * (nu_q * (nu_q - 1)) as f64 * pz / binomial(n as u64, k as u64) as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageHistogram {
    /// `|I_e|` to number of edges.
    pub histogram: BTreeMap<usize, usize>,
    pub edges: usize,
    pub mean: f64,
    pub r: usize,
    pub probabilities: CoverageProbabilities,
    /// `r k! p^(z-1) / (ell q n^(k-2))` and its `(1 +- z eps)` band.
    pub target: f64,
    pub target_band: (f64, f64),
}

pub fn coverage_histogram(
    out: &ProcedureOutput,
    params: &Params,
    p: f64,
    eps: f64,
) -> CoverageHistogram {
    let mut histogram = BTreeMap::new();
    for c in &out.labels.coverage {
        *histogram.entry(c.len()).or_insert(0) += 1;
    }
    let edges = out.labels.coverage.len();
    let total: usize = out.labels.coverage.iter().map(|c| c.len()).sum();
    let probs = coverage_probabilities(params, p);
    let r = out.procedure.r;
    let target = r as f64 * probs.leading;
    let z = params.z as f64;
    CoverageHistogram {
        histogram,
        edges,
        mean: if edges == 0 {
            0.0
        } else {
            total as f64 / edges as f64
        },
        r,
        probabilities: probs,
        target,
        target_band: (target * (1.0 - z * eps), target * (1.0 + z * eps)),
    }
}

/// The `z - 1` other edges owned by the arc owning `e` in `d`, if any.
pub fn partner_edges(e: &Edge, d: &ShiftDigraph) -> Option<Vec<Edge>> {
    d.owned_lists()
        .iter()
        .find(|list| list.contains(e))
        .map(|list| list.iter().filter(|f| *f != e).cloned().collect())
}

/// Number of the given digraphs in which `s` is condensed: `s = e1 ∪ e2` for
/// distinct edges of `h` owned by one arc.
pub fn condensed_count(
    h: &KGraph,
    params: &Params,
    s: &[Vertex],
    digraphs: &[ShiftDigraph],
) -> Result<usize> {
    let (k, q) = (params.k, params.q);
    if s.len() < k + 1 || s.len() > 2 * q {
        return Err(Error::WrongSetSize {
            expected: k + 1,
            got: s.len(),
        });
    }
    let mut set = s.to_vec();
    set.sort_unstable();
    if let Some(w) = set.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::RepeatedVertex {
            vertex: w[0],
            context: "condensed set",
        });
    }
    let mut buf = Vec::with_capacity(2 * k);
    let condensed_in = |d: &ShiftDigraph, buf: &mut Vec<Vertex>| {
        d.owned_lists().iter().any(|list| {
            (0..list.len()).any(|a| {
                (a + 1..list.len()).any(|b| {
                    let (e1, e2) = (&list[a], &list[b]);
                    if !h.contains_edge(e1) || !h.contains_edge(e2) {
                        return false;
                    }
                    crate::kgraph::merge_sorted(e1.vertices(), e2.vertices(), buf);
                    buf.dedup();
                    *buf == set
                })
            })
        })
    };
    Ok(digraphs
        .iter()
        .filter(|d| condensed_in(d, &mut buf))
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(kappa: f64, r: usize) -> Overrides {
        Overrides {
            kappa: Some(kappa),
            r: Some(r),
        }
    }

    #[test]
    fn formula_kappa() {
        let params = Params::derive(3, 1, 12).unwrap();
        let pp = compute_procedure_params(&params, 0.9, 0.5, Overrides::default(), 1e12).unwrap();
        let expect = 6.0 * 4.0 * 12f64.ln() / 0.25;
        assert!((pp.kappa_raw - expect).abs() < 1e-9);
        assert!((pp.kappa_raw - 238.55).abs() < 0.01);
        assert_eq!(pp.kappa, 239.0);
        let r_raw = 2.0 * 12.0 * expect / (6.0 * 0.9);
        assert!((pp.r_raw - r_raw).abs() < 1e-9);
        assert_eq!(pp.r, r_raw.ceil() as usize);
        assert!(matches!(
            compute_procedure_params(&params, 0.9, 0.5, Overrides::default(), 100.0),
            Err(Error::RBudgetExceeded { .. })
        ));
    }

    #[test]
    fn overrides_and_guards() {
        let params = Params::derive(3, 1, 12).unwrap();
        let pp =
            compute_procedure_params(&params, 0.9, 0.5, ov(5.0, 40), DEFAULT_R_BUDGET).unwrap();
        assert_eq!(
            (pp.kappa, pp.r, pp.kappa_mode, pp.r_mode),
            (5.0, 40, ValueMode::Override, ValueMode::Override)
        );
        assert!(
            compute_procedure_params(&params, 0.9, 0.0, ov(5.0, 40), DEFAULT_R_BUDGET).is_err()
        );
        assert!(
            compute_procedure_params(&params, 0.0, 0.5, ov(5.0, 40), DEFAULT_R_BUDGET).is_err()
        );
    }

    #[test]
    fn single_digraph_keeps_everything() {
        let params = Params::derive(3, 1, 12).unwrap();
        let h = KGraph::random(12, 3, 0.9, 1).unwrap();
        let pp = compute_procedure_params(&params, 0.9, 0.5, ov(5.0, 1), DEFAULT_R_BUDGET).unwrap();
        let out = run_procedure1(&h, &params, &pp, 4).unwrap();
        assert_eq!(out.filtered[0], out.digraphs[0]);
        assert_eq!(out.packed_graphs[0].len(), out.h_sizes[0]);
        assert_eq!(check_procedure_output(&h, &out), Ok(()));
    }

    #[test]
    fn empty_graph() {
        let params = Params::derive(3, 1, 12).unwrap();
        let h = KGraph::empty(12, 3);
        let pp = compute_procedure_params(&params, 0.9, 0.5, ov(5.0, 5), DEFAULT_R_BUDGET).unwrap();
        let out = run_procedure1(&h, &params, &pp, 4).unwrap();
        assert!(out.h_sizes.iter().all(|&s| s == 0));
        assert!(out.residual.is_empty());
    }

    #[test]
    fn low_memory_matches_full() {
        let params = Params::derive(3, 1, 12).unwrap();
        let h = KGraph::random(12, 3, 0.9, 2).unwrap();
        let pp =
            compute_procedure_params(&params, 0.9, 0.5, ov(5.0, 30), DEFAULT_R_BUDGET).unwrap();
        let full = run_procedure1_with(
            &h,
            &params,
            &pp,
            11,
            &ProcedureConfig {
                memory: MemoryMode::Full,
                ..Default::default()
            },
        )
        .unwrap();
        let low = run_procedure1_with(
            &h,
            &params,
            &pp,
            11,
            &ProcedureConfig {
                memory: MemoryMode::Low,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(low.low_memory && low.digraphs.is_empty());
        assert_eq!(full.filtered, low.filtered);
        assert_eq!(full.labels, low.labels);
        assert_eq!(full.residual, low.residual);
        assert_eq!(full.h_sizes, low.h_sizes);
    }

    #[test]
    fn zero_rounds_cover_nothing() {
        let params = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        let pp = compute_procedure_params(&params, 1.0, 0.5, ov(3.0, 0), DEFAULT_R_BUDGET).unwrap();
        let out = run_procedure1(&h, &params, &pp, 0).unwrap();
        let hist = coverage_histogram(&out, &params, 1.0, 0.5);
        assert_eq!(hist.histogram, BTreeMap::from([(0, 56)]));
        assert_eq!(out.residual, h);
    }

    #[test]
    fn coverage_probability_forms() {
        let params = Params::derive(3, 1, 12).unwrap();
        let c = coverage_probabilities(&params, 1.0);
        assert!((c.exact - 3.0 / 11.0).abs() < 1e-12);
        assert!((c.leading - 0.25).abs() < 1e-12);
        assert!((c.window_count - 144.0 / 484.0).abs() < 1e-12);
    }

    #[test]
    fn partners_and_condensed() {
        let params = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        let d = build_digraph(&h, &Permutation::identity(8), &params).unwrap();
        let e = Edge::new(vec![1, 2, 3]).unwrap();
        let partners = partner_edges(&e, &d).unwrap();
        assert_eq!(partners, vec![Edge::new(vec![2, 3, 4]).unwrap()]);
        assert_eq!(partner_edges(&partners[0], &d).unwrap(), vec![e]);
        // {1,2,3} and {2,3,4} share the arc (block 1, block 2)
        assert_eq!(
            condensed_count(&h, &params, &[1, 2, 3, 4], std::slice::from_ref(&d)).unwrap(),
            1
        );
        assert_eq!(
            condensed_count(&h, &params, &[1, 2, 5, 7], std::slice::from_ref(&d)).unwrap(),
            0
        );
        assert!(condensed_count(&h, &params, &[1, 2, 3], std::slice::from_ref(&d)).is_err());
    }
}
