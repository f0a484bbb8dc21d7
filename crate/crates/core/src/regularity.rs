//! Empirical audits of k-graph regularity.
//!
//! [`audit_definition1`] measures, for every `d <= ell` and family size
//! `s <= 2z + 2`, how far the number of common d-set extensions of `s`
//! distinct `(k-d)`-sets strays from `n^d p^s / d!`. [`audit_l_property`]
//! does the same for the ordered-sequence counts L1 to L8 derived from it.
//!
//! Both run either exhaustively (every configuration, refused above a cap) or
//! on seeded samples. Cells whose target is below one are reported but kept
//! out of the worst ratio.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    binomial, bounded_union_families, combinations, factorial, falling_factorial,
};
use crate::error::{Error, Result};
use crate::kgraph::{KGraph, Vertex};
use crate::params::Params;
use crate::rng::{stream_rng, Stream, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditMode {
    Exhaustive,
    Sampled,
}

impl FromStr for AuditMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exhaustive" => Ok(AuditMode::Exhaustive),
            "sampled" => Ok(AuditMode::Sampled),
            other => Err(format!("unknown mode {other:?} (exhaustive|sampled)")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditConfig {
    pub mode: AuditMode,
    /// Families (or sequences) per cell in sampled mode.
    pub samples: usize,
    pub seed: u64,
    /// Exhaustive mode refuses any cell with more configurations than this.
    pub exhaustive_cap: u128,
    /// Violations stored verbatim; the total is always counted.
    pub max_violations_kept: usize,
    /// Rejection attempts per sampled family before giving up.
    pub retry_cap: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            mode: AuditMode::Sampled,
            samples: 1000,
            seed: 0,
            exhaustive_cap: 10_000_000,
            max_violations_kept: 1000,
            retry_cap: 100,
        }
    }
}

impl AuditConfig {
    pub fn exhaustive() -> Self {
        AuditConfig {
            mode: AuditMode::Exhaustive,
            ..Default::default()
        }
    }

    pub fn sampled(samples: usize, seed: u64) -> Self {
        AuditConfig {
            mode: AuditMode::Sampled,
            samples,
            seed,
            ..Default::default()
        }
    }
}

/// One tested family and its count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyEval {
    pub d: usize,
    pub s: usize,
    pub sets: Vec<Vec<Vertex>>,
    pub union_size: usize,
    pub count: u64,
    pub target: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellReport {
    pub d: usize,
    pub s: usize,
    pub target: f64,
    pub families: u64,
    pub worst_ratio: f64,
    pub min_count: Option<u64>,
    pub max_count: Option<u64>,
    /// `n^d p^s / d! < 1`; excluded from the overall worst ratio.
    pub sub_unit_target: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub d: usize,
    pub s: usize,
    pub sets: Vec<Vec<Vertex>>,
    pub count: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularityReport {
    pub mode: AuditMode,
    pub p: f64,
    pub requested_eps: f64,
    /// Max over tested families of `|count / (n^d p^s / d!) - 1|`.
    pub worst_ratio: f64,
    /// Smallest epsilon passing every tested family; equals `worst_ratio`.
    pub epsilon_hat: f64,
    pub violations: Vec<Violation>,
    pub violation_count: u64,
    pub samples_tested: u64,
    pub cells: Vec<CellReport>,
}

/// Visitor invoked on every tested family.
pub type FamilyVisitor<'a> = &'a (dyn Fn(&FamilyEval) + Sync);

pub fn audit_definition1(
    h: &KGraph,
    params: &Params,
    p: f64,
    eps: f64,
    cfg: &AuditConfig,
) -> Result<RegularityReport> {
    audit_definition1_with(h, params, p, eps, cfg, None)
}

pub fn audit_definition1_with(
    h: &KGraph,
    params: &Params,
    p: f64,
    eps: f64,
    cfg: &AuditConfig,
    visitor: Option<FamilyVisitor<'_>>,
) -> Result<RegularityReport> {
    check_graph(h, params)?;
    check_density(h, p)?;
    let n = params.n;
    let cells: Vec<(usize, usize)> = (1..=params.ell)
        .flat_map(|d| (1..=params.max_family()).map(move |s| (d, s)))
        .collect();

    let results: Vec<CellAccumulator> = match cfg.mode {
        AuditMode::Exhaustive => {
            for &(d, s) in &cells {
                let count = bounded_union_families(n, params.k - d, s, params.max_union());
                if count > cfg.exhaustive_cap {
                    return Err(Error::ExhaustiveCap {
                        cell: format!("(d={d}, s={s})"),
                        count,
                        cap: cfg.exhaustive_cap,
                    });
                }
            }
            (1..=params.ell)
                .into_par_iter()
                .map(|d| exhaustive_cells(h, params, p, eps, d, cfg, visitor))
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        }
        AuditMode::Sampled => cells
            .par_iter()
            .map(|&(d, s)| sampled_cell(h, params, p, eps, d, s, cfg, visitor))
            .collect::<Result<Vec<_>>>()?,
    };

    Ok(assemble(results, cfg, p, eps))
}

fn check_graph(h: &KGraph, params: &Params) -> Result<()> {
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
    Ok(())
}

fn check_density(h: &KGraph, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidProbability { value: p });
    }
    if p == 0.0 && !h.is_empty() {
        return Err(Error::ZeroDensity);
    }
    Ok(())
}

fn deviation(count: u64, target: f64) -> f64 {
    if target == 0.0 {
        // only reachable for p = 0 on an empty graph
        if count == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (count as f64 / target - 1.0).abs()
    }
}

pub(crate) fn definition1_target(n: usize, d: usize, s: usize, p: f64) -> f64 {
    (n as f64).powi(d as i32) * p.powi(s as i32) / factorial(d)
}

struct CellAccumulator {
    d: usize,
    s: usize,
    target: f64,
    families: u64,
    worst: f64,
    min_count: Option<u64>,
    max_count: Option<u64>,
    violations: Vec<Violation>,
    violation_count: u64,
}

impl CellAccumulator {
    fn new(d: usize, s: usize, target: f64) -> Self {
        CellAccumulator {
            d,
            s,
            target,
            families: 0,
            worst: 0.0,
            min_count: None,
            max_count: None,
            violations: Vec::new(),
            violation_count: 0,
        }
    }

    fn record(
        &mut self,
        count: u64,
        sets: impl FnOnce() -> Vec<Vec<Vertex>>,
        eps: f64,
        keep: usize,
    ) {
        self.families += 1;
        let dev = deviation(count, self.target);
        self.worst = self.worst.max(dev);
        self.min_count = Some(self.min_count.map_or(count, |m| m.min(count)));
        self.max_count = Some(self.max_count.map_or(count, |m| m.max(count)));
        if dev > eps && self.target >= 1.0 {
            self.violation_count += 1;
            if self.violations.len() < keep {
                self.violations.push(Violation {
                    d: self.d,
                    s: self.s,
                    sets: sets(),
                    count,
                });
            }
        }
    }

    fn merge(&mut self, other: CellAccumulator, keep: usize) {
        self.families += other.families;
        self.worst = self.worst.max(other.worst);
        self.min_count = match (self.min_count, other.min_count) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.max_count = match (self.max_count, other.max_count) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.violation_count += other.violation_count;
        for v in other.violations {
            if self.violations.len() < keep {
                self.violations.push(v);
            }
        }
    }
}

fn assemble(
    mut results: Vec<CellAccumulator>,
    cfg: &AuditConfig,
    p: f64,
    eps: f64,
) -> RegularityReport {
    results.sort_by_key(|c| (c.d, c.s));
    let mut worst = 0.0f64;
    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut samples = 0;
    let mut cells = Vec::new();
    for c in results {
        let sub_unit = c.target < 1.0;
        if !sub_unit {
            worst = worst.max(c.worst);
        }
        samples += c.families;
        violation_count += c.violation_count;
        for v in c.violations {
            if violations.len() < cfg.max_violations_kept {
                violations.push(v);
            }
        }
        cells.push(CellReport {
            d: c.d,
            s: c.s,
            target: c.target,
            families: c.families,
            worst_ratio: c.worst,
            min_count: c.min_count,
            max_count: c.max_count,
            sub_unit_target: sub_unit,
        });
    }
    RegularityReport {
        mode: cfg.mode,
        p,
        requested_eps: eps,
        worst_ratio: worst,
        epsilon_hat: worst,
        violations,
        violation_count,
        samples_tested: samples,
        cells,
    }
}

/// Bitset over the d-subsets of `[n]`.
#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> u64 {
        self.0.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// All cells `(d, 1..=2z+2)` for one `d`, sharing a single enumeration: a
/// family of size `j` is a node at depth `j` of the search over increasing
/// set indices.
fn exhaustive_cells(
    h: &KGraph,
    params: &Params,
    p: f64,
    eps: f64,
    d: usize,
    cfg: &AuditConfig,
    visitor: Option<FamilyVisitor<'_>>,
) -> Vec<CellAccumulator> {
    let n = params.n;
    let verts: Vec<Vertex> = (1..=n as Vertex).collect();
    let asets = combinations(&verts, params.k - d);
    let dsets = combinations(&verts, d);
    // extension bitsets: ext[a] has bit j iff asets[a] ∪ dsets[j] ∈ E(H)
    let ext: Vec<Bits> = asets
        .par_iter()
        .map(|a| {
            let mut b = Bits(vec![0; dsets.len().div_ceil(64)]);
            let mut buf = Vec::with_capacity(params.k);
            for (j, ds) in dsets.iter().enumerate() {
                if ds.iter().any(|v| a.binary_search(v).is_ok()) {
                    continue;
                }
                crate::kgraph::merge_sorted(a, ds, &mut buf);
                if h.contains(&buf) {
                    b.0[j / 64] |= 1 << (j % 64);
                }
            }
            b
        })
        .collect();
    let smax = params.max_family();
    let bound = params.max_union();

    let partials: Vec<Vec<CellAccumulator>> = (0..asets.len())
        .into_par_iter()
        .map(|first| {
            let mut acc: Vec<CellAccumulator> = (1..=smax)
                .map(|s| CellAccumulator::new(d, s, definition1_target(n, d, s, p)))
                .collect();
            let mut mult = vec![0u8; n + 1];
            let mut chosen = vec![first];
            let mut union = 0usize;
            for &v in &asets[first] {
                mult[v as usize] += 1;
                union += 1;
            }
            let start = ext[first].clone();
            let mut search = Search {
                asets: &asets,
                ext: &ext,
                smax,
                bound,
                eps,
                cfg,
                visitor,
                d,
                n,
            };
            search.visit(&mut chosen, &mut mult, union, &start, &mut acc);
            acc
        })
        .collect();

    let mut merged: Vec<CellAccumulator> = (1..=smax)
        .map(|s| CellAccumulator::new(d, s, definition1_target(n, d, s, p)))
        .collect();
    for part in partials {
        for (m, c) in merged.iter_mut().zip(part) {
            m.merge(c, cfg.max_violations_kept);
        }
    }
    merged
}

struct Search<'a> {
    asets: &'a [Vec<Vertex>],
    ext: &'a [Bits],
    smax: usize,
    bound: usize,
    eps: f64,
    cfg: &'a AuditConfig,
    visitor: Option<FamilyVisitor<'a>>,
    d: usize,
    n: usize,
}

impl Search<'_> {
    fn visit(
        &mut self,
        chosen: &mut Vec<usize>,
        mult: &mut [u8],
        union: usize,
        survivors: &Bits,
        acc: &mut [CellAccumulator],
    ) {
        let s = chosen.len();
        let count = survivors.count();
        let cell = &mut acc[s - 1];
        let asets = self.asets;
        cell.record(
            count,
            || chosen.iter().map(|&i| asets[i].clone()).collect(),
            self.eps,
            self.cfg.max_violations_kept,
        );
        if let Some(v) = self.visitor {
            v(&FamilyEval {
                d: self.d,
                s,
                sets: chosen.iter().map(|&i| asets[i].clone()).collect(),
                union_size: union,
                count,
                target: cell.target,
                deviation: deviation(count, cell.target),
            });
        }
        if s == self.smax {
            return;
        }
        let last = *chosen.last().unwrap();
        for next in last + 1..asets.len() {
            let added = asets[next]
                .iter()
                .filter(|&&v| mult[v as usize] == 0)
                .count();
            if union + added > self.bound {
                continue;
            }
            for &v in &asets[next] {
                mult[v as usize] += 1;
            }
            chosen.push(next);
            let surv = survivors.and(&self.ext[next]);
            self.visit(chosen, mult, union + added, &surv, acc);
            chosen.pop();
            for &v in &asets[next] {
                mult[v as usize] -= 1;
            }
        }
        debug_assert!(self.n + 1 == mult.len());
    }
}

/// Draw one valid family of `s` distinct `(k-d)`-sets with union at most
/// `k + 2q`: pick a pool size among the feasible ones, a random pool of that
/// size, then `s` distinct sets inside the pool (rejecting repeats).
pub(crate) fn sample_family(
    rng: &mut StreamRng,
    params: &Params,
    d: usize,
    s: usize,
    retry_cap: usize,
) -> Result<Vec<Vec<Vertex>>> {
    let m = params.k - d;
    let top = params.max_union().min(params.n);
    let feasible: Vec<usize> = (m..=top)
        .filter(|&u| binomial(u as u64, m as u64) >= s as u128)
        .collect();
    if feasible.is_empty() {
        return Err(Error::SamplingFailed { d, s, attempts: 0 });
    }
    let mut verts: Vec<Vertex> = (1..=params.n as Vertex).collect();
    for _ in 0..retry_cap {
        let u = feasible[rng.gen_range(0..feasible.len())];
        let (pool, _) = verts.partial_shuffle(rng, u);
        let pool = pool.to_vec();
        let mut family: Vec<Vec<Vertex>> = Vec::with_capacity(s);
        let mut local = pool.clone();
        let mut attempts = 0;
        while family.len() < s && attempts < retry_cap {
            attempts += 1;
            let (pick, _) = local.partial_shuffle(rng, m);
            let mut set = pick.to_vec();
            set.sort_unstable();
            if !family.contains(&set) {
                family.push(set);
            }
        }
        if family.len() == s {
            let mut union: Vec<Vertex> = family.iter().flatten().copied().collect();
            union.sort_unstable();
            union.dedup();
            if union.len() <= params.max_union() {
                return Ok(family);
            }
        }
    }
    Err(Error::SamplingFailed {
        d,
        s,
        attempts: retry_cap,
    })
}

#[allow(clippy::too_many_arguments)]
fn sampled_cell(
    h: &KGraph,
    params: &Params,
    p: f64,
    eps: f64,
    d: usize,
    s: usize,
    cfg: &AuditConfig,
    visitor: Option<FamilyVisitor<'_>>,
) -> Result<CellAccumulator> {
    let target = definition1_target(params.n, d, s, p);
    let mut acc = CellAccumulator::new(d, s, target);
    let m = params.k - d;
    let top = params.max_union().min(params.n);
    if (m..=top).all(|u| binomial(u as u64, m as u64) < s as u128) {
        // no valid family exists in this cell
        return Ok(acc);
    }
    let mut rng = stream_rng(cfg.seed, Stream::Family, &[d as u64, s as u64]);
    for _ in 0..cfg.samples {
        let family = sample_family(&mut rng, params, d, s, cfg.retry_cap)?;
        let count = h.count_extensions_sorted(&family, d);
        if let Some(v) = visitor {
            let mut u: Vec<Vertex> = family.iter().flatten().copied().collect();
            u.sort_unstable();
            u.dedup();
            v(&FamilyEval {
                d,
                s,
                sets: family.clone(),
                union_size: u.len(),
                count,
                target,
                deviation: deviation(count, target),
            });
        }
        acc.record(count, || family.clone(), eps, cfg.max_violations_kept);
    }
    Ok(acc)
}

/// Count and deviation for one explicit family.
pub fn evaluate_family(h: &KGraph, d: usize, sets: &[Vec<Vertex>], p: f64) -> Result<FamilyEval> {
    let sorted = h.canonical_sets(sets, h.k() - d)?;
    let count = h.count_extensions(&sorted, d)?;
    let target = definition1_target(h.n(), d, sets.len(), p);
    let mut u: Vec<Vertex> = sorted.iter().flatten().copied().collect();
    u.sort_unstable();
    u.dedup();
    Ok(FamilyEval {
        d,
        s: sets.len(),
        sets: sorted,
        union_size: u.len(),
        count,
        target,
        deviation: deviation(count, target),
    })
}

/// Draw `count` families for cell `(d, s)` with the sampler used by the
/// sampled audit.
pub fn sample_families(
    params: &Params,
    d: usize,
    s: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<Vertex>>>> {
    let mut rng = stream_rng(seed, Stream::Family, &[d as u64, s as u64]);
    (0..count)
        .map(|_| sample_family(&mut rng, params, d, s, 100))
        .collect()
}

// ---------------------------------------------------------------------------
// L-properties
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LProperty {
    L1,
    L2,
    L3,
    L4,
    L5,
    L6,
    L7,
    L8,
}

impl LProperty {
    pub const ALL: [LProperty; 8] = [
        LProperty::L1,
        LProperty::L2,
        LProperty::L3,
        LProperty::L4,
        LProperty::L5,
        LProperty::L6,
        LProperty::L7,
        LProperty::L8,
    ];

    fn name(self) -> &'static str {
        match self {
            LProperty::L1 => "L1",
            LProperty::L2 => "L2",
            LProperty::L3 => "L3",
            LProperty::L4 => "L4",
            LProperty::L5 => "L5",
            LProperty::L6 => "L6",
            LProperty::L7 => "L7",
            LProperty::L8 => "L8",
        }
    }
}

impl fmt::Display for LProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LProperty {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        LProperty::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown property {s:?} (L1..L8)"))
    }
}

/// Shape of one L-property: length of the fixed sequence, number of free
/// vertices, number of edge constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LShape {
    pub fixed: usize,
    pub free: usize,
    pub sets: usize,
}

pub fn l_shape(params: &Params, prop: LProperty) -> Result<LShape> {
    let Params { k, ell, q, z, .. } = *params;
    match prop {
        LProperty::L5 | LProperty::L7 if !params.ell_divides_k() => {
            return Err(Error::RequiresDivisible {
                property: prop.name(),
            })
        }
        LProperty::L6 | LProperty::L8 if params.ell_divides_k() => {
            return Err(Error::RequiresNonDivisible {
                property: prop.name(),
            })
        }
        _ => {}
    }
    Ok(match prop {
        LProperty::L1 => LShape {
            fixed: q,
            free: k - q,
            sets: 1,
        },
        LProperty::L2 => LShape {
            fixed: k - ell,
            free: ell,
            sets: 1,
        },
        LProperty::L3 => LShape {
            fixed: 2 * q,
            free: k - q,
            sets: 2,
        },
        LProperty::L4 => LShape {
            fixed: 2 * (k - ell),
            free: ell,
            sets: 2,
        },
        LProperty::L5 => LShape {
            fixed: ell + (k - 2 * ell) + q,
            free: ell,
            sets: z + 1,
        },
        LProperty::L6 => LShape {
            fixed: k - ell + q,
            free: q + ell - k,
            sets: z,
        },
        LProperty::L7 => LShape {
            fixed: 2 * ell + (k - 2 * ell) + 2 * q,
            free: ell,
            sets: 2 * z + 2,
        },
        LProperty::L8 => LShape {
            fixed: k - ell + 2 * q,
            free: q + ell - k,
            sets: 2 * z,
        },
    })
}

/// Target `n^free p^sets` for ordered sequences.
pub fn l_target(params: &Params, prop: LProperty, p: f64) -> Result<f64> {
    let sh = l_shape(params, prop)?;
    Ok((params.n as f64).powi(sh.free as i32) * p.powi(sh.sets as i32))
}

fn union_of(parts: &[&[Vertex]]) -> Vec<Vertex> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// The edges (minus the free block) that a fixed sequence must extend to.
pub fn l_sets(params: &Params, prop: LProperty, seq: &[Vertex]) -> Result<Vec<Vec<Vertex>>> {
    let sh = l_shape(params, prop)?;
    if seq.len() != sh.fixed {
        return Err(Error::WrongSetSize {
            expected: sh.fixed,
            got: seq.len(),
        });
    }
    let Params { k, ell, q, z, .. } = *params;
    let sets: Vec<Vec<Vertex>> = match prop {
        LProperty::L1 | LProperty::L2 => vec![seq.to_vec()],
        LProperty::L3 => vec![seq[..q].to_vec(), seq[q..].to_vec()],
        LProperty::L4 => vec![seq[..k - ell].to_vec(), seq[k - ell..].to_vec()],
        LProperty::L5 => {
            let (x, rest) = seq.split_at(ell);
            let (a, zz) = rest.split_at(k - 2 * ell);
            let mut out = vec![union_of(&[x, a])];
            for i in 0..z {
                out.push(union_of(&[&a[i * ell..], &zz[..(i + 1) * ell]]));
            }
            out
        }
        LProperty::L6 => {
            let (a, zz) = seq.split_at(k - ell);
            (0..z)
                .map(|i| union_of(&[&a[i * ell..], &zz[..k - q + i * ell]]))
                .collect()
        }
        LProperty::L7 => {
            let (x, rest) = seq.split_at(ell);
            let (y, rest) = rest.split_at(ell);
            let (a, rest) = rest.split_at(k - 2 * ell);
            let (zz, w) = rest.split_at(q);
            let mut out = vec![union_of(&[x, a]), union_of(&[y, a])];
            for i in 0..z {
                out.push(union_of(&[&a[i * ell..], &zz[..(i + 1) * ell]]));
                out.push(union_of(&[&a[i * ell..], &w[..(i + 1) * ell]]));
            }
            out
        }
        LProperty::L8 => {
            let (a, rest) = seq.split_at(k - ell);
            let (zz, w) = rest.split_at(q);
            let mut out = Vec::with_capacity(2 * z);
            for i in 0..z {
                out.push(union_of(&[&a[i * ell..], &zz[..k - q + i * ell]]));
                out.push(union_of(&[&a[i * ell..], &w[..k - q + i * ell]]));
            }
            out
        }
    };
    debug_assert_eq!(sets.len(), sh.sets);
    debug_assert!(sets.iter().all(|s| s.len() == k - sh.free));
    Ok(sets)
}

fn check_l_sequence(params: &Params, prop: LProperty, seq: &[Vertex]) -> Result<()> {
    let check_distinct = |part: &[Vertex]| -> Result<()> {
        let mut v = part.to_vec();
        v.sort_unstable();
        match v.windows(2).find(|w| w[0] == w[1]) {
            Some(w) => Err(Error::RepeatedVertex {
                vertex: w[0],
                context: "property sequence",
            }),
            None => Ok(()),
        }
    };
    if let Some(&bad) = seq.iter().find(|&&v| v == 0 || v as usize > params.n) {
        return Err(Error::VertexOutOfRange {
            vertex: bad,
            n: params.n,
        });
    }
    if prop == LProperty::L4 {
        let (x, y) = seq.split_at(params.k - params.ell);
        check_distinct(x)?;
        check_distinct(y)?;
        if x[0] == y[0] {
            return Err(Error::RepeatedVertex {
                vertex: x[0],
                context: "L4 leading vertices",
            });
        }
        Ok(())
    } else {
        check_distinct(seq)
    }
}

/// Number of ordered free sequences completing `seq` for property `prop`.
/// Equals `free! ·` the set count from [`KGraph::count_extensions`].
pub fn l_property_count(
    h: &KGraph,
    params: &Params,
    prop: LProperty,
    seq: &[Vertex],
) -> Result<u64> {
    let sh = l_shape(params, prop)?;
    check_l_sequence(params, prop, seq)?;
    let sets = l_sets(params, prop, seq)?;
    let sets = h.canonical_sets(&sets, params.k - sh.free)?;
    Ok(h.count_extensions_sorted(&sets, sh.free) * factorial(sh.free) as u64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LPropertyReport {
    pub property: LProperty,
    pub mode: AuditMode,
    pub p: f64,
    pub target: f64,
    pub tested_configs: u64,
    /// Max of `|count / target - 1|` over tested sequences.
    pub worst_ratio: f64,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub sub_unit_target: bool,
}

pub fn audit_l_property(
    h: &KGraph,
    params: &Params,
    p: f64,
    prop: LProperty,
    cfg: &AuditConfig,
) -> Result<LPropertyReport> {
    check_graph(h, params)?;
    check_density(h, p)?;
    let sh = l_shape(params, prop)?;
    let target = l_target(params, prop, p)?;
    let n = params.n;

    let counts: Vec<u64> = match cfg.mode {
        AuditMode::Exhaustive => {
            let configs = if prop == LProperty::L4 {
                let half = falling_factorial(n as f64, params.k - params.ell);
                half * half
            } else {
                falling_factorial(n as f64, sh.fixed)
            };
            if configs > cfg.exhaustive_cap as f64 {
                return Err(Error::ExhaustiveCap {
                    cell: prop.to_string(),
                    count: configs as u128,
                    cap: cfg.exhaustive_cap,
                });
            }
            let verts: Vec<Vertex> = (1..=n as Vertex).collect();
            verts
                .par_iter()
                .map(|&first| {
                    let mut out = Vec::new();
                    let mut seq = vec![first];
                    enumerate_sequences(params, prop, sh.fixed, &mut seq, &mut |s| {
                        if let Ok(c) = l_property_count(h, params, prop, s) {
                            out.push(c);
                        }
                    });
                    out
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect()
        }
        AuditMode::Sampled => {
            let mut rng = stream_rng(cfg.seed, Stream::Sample, &[prop as u64]);
            let mut out = Vec::with_capacity(cfg.samples);
            for _ in 0..cfg.samples {
                let seq = sample_l_sequence(&mut rng, params, prop, cfg.retry_cap)?;
                out.push(l_property_count(h, params, prop, &seq)?);
            }
            out
        }
    };

    let ratios: Vec<f64> = counts
        .iter()
        .map(|&c| if target > 0.0 { c as f64 / target } else { 1.0 })
        .collect();
    Ok(LPropertyReport {
        property: prop,
        mode: cfg.mode,
        p,
        target,
        tested_configs: counts.len() as u64,
        worst_ratio: counts
            .iter()
            .map(|&c| deviation(c, target))
            .fold(0.0, f64::max),
        min_ratio: ratios.iter().copied().reduce(f64::min),
        max_ratio: ratios.iter().copied().reduce(f64::max),
        sub_unit_target: target < 1.0,
    })
}

fn enumerate_sequences(
    params: &Params,
    prop: LProperty,
    len: usize,
    seq: &mut Vec<Vertex>,
    emit: &mut dyn FnMut(&[Vertex]),
) {
    if seq.len() == len {
        if check_l_sequence(params, prop, seq).is_ok() {
            emit(seq);
        }
        return;
    }
    let block = params.k - params.ell;
    for v in 1..=params.n as Vertex {
        // L4 allows the two halves to overlap; everything else is all-distinct
        let clash = if prop == LProperty::L4 {
            let start = if seq.len() >= block { block } else { 0 };
            seq[start..].contains(&v)
        } else {
            seq.contains(&v)
        };
        if clash {
            continue;
        }
        seq.push(v);
        enumerate_sequences(params, prop, len, seq, emit);
        seq.pop();
    }
}

fn sample_l_sequence(
    rng: &mut StreamRng,
    params: &Params,
    prop: LProperty,
    retry_cap: usize,
) -> Result<Vec<Vertex>> {
    let sh = l_shape(params, prop)?;
    let mut verts: Vec<Vertex> = (1..=params.n as Vertex).collect();
    if prop != LProperty::L4 {
        if sh.fixed > params.n {
            return Err(Error::SamplingFailed {
                d: sh.free,
                s: sh.sets,
                attempts: 0,
            });
        }
        let (pick, _) = verts.partial_shuffle(rng, sh.fixed);
        return Ok(pick.to_vec());
    }
    let half = params.k - params.ell;
    for _ in 0..retry_cap {
        let x = verts.partial_shuffle(rng, half).0.to_vec();
        let y = verts.partial_shuffle(rng, half).0.to_vec();
        let (mut sx, mut sy) = (x.clone(), y.clone());
        sx.sort_unstable();
        sy.sort_unstable();
        if x[0] != y[0] && sx != sy {
            return Ok([x, y].concat());
        }
    }
    Err(Error::SamplingFailed {
        d: sh.free,
        s: sh.sets,
        attempts: retry_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph_has_unit_deviation() {
        let params = Params::derive(3, 1, 12).unwrap();
        let h = KGraph::empty(12, 3);
        let r = audit_definition1(&h, &params, 0.5, 0.1, &AuditConfig::sampled(50, 1)).unwrap();
        assert_eq!(r.epsilon_hat, 1.0);
        assert!(r.cells.iter().all(|c| c.max_count == Some(0)));
        assert!(!r.violations.is_empty());
    }

    #[test]
    fn zero_density_rejected_on_nonempty_graph() {
        let params = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        assert!(matches!(
            audit_definition1(&h, &params, 0.0, 0.1, &AuditConfig::sampled(5, 1)),
            Err(Error::ZeroDensity)
        ));
        let e = KGraph::empty(8, 3);
        let r = audit_definition1(&e, &params, 0.0, 0.1, &AuditConfig::sampled(5, 1)).unwrap();
        assert_eq!(r.worst_ratio, 0.0);
    }

    #[test]
    fn exhaustive_cap_refuses() {
        let params = Params::derive(3, 1, 12).unwrap();
        let h = KGraph::complete(12, 3);
        let err = audit_definition1(&h, &params, 1.0, 0.1, &AuditConfig::exhaustive()).unwrap_err();
        assert!(matches!(err, Error::ExhaustiveCap { .. }), "{err}");
    }

    #[test]
    fn exhaustive_complete_n8() {
        // largest union is 7, leaving one extension vertex: |1/8 - 1| = 7/8
        let params = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        let r = audit_definition1(&h, &params, 1.0, 0.5, &AuditConfig::exhaustive()).unwrap();
        assert!((r.epsilon_hat - 7.0 / 8.0).abs() < 1e-12);
        let total: u64 = r.cells.iter().map(|c| c.families).sum();
        let expected: u128 = (1..=6).map(|s| bounded_union_families(8, 2, s, 7)).sum();
        assert_eq!(total as u128, expected);
        assert_eq!(r.violations.is_empty(), r.worst_ratio <= 0.5);
    }

    #[test]
    fn sampled_families_are_valid() {
        let params = Params::derive(5, 2, 16).unwrap();
        for d in 1..=2 {
            for s in 1..=6 {
                for fam in sample_families(&params, d, s, 40, 9).unwrap() {
                    assert_eq!(fam.len(), s);
                    let mut u: Vec<u32> = fam.iter().flatten().copied().collect();
                    u.sort();
                    u.dedup();
                    assert!(u.len() <= params.max_union());
                    let mut f = fam.clone();
                    f.sort();
                    f.dedup();
                    assert_eq!(f.len(), s);
                    assert!(fam.iter().all(|a| a.len() == 5 - d));
                }
            }
        }
    }

    #[test]
    fn l1_on_complete_graph() {
        let params = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        assert_eq!(
            l_property_count(&h, &params, LProperty::L1, &[1, 2]).unwrap(),
            6
        );
        let r =
            audit_l_property(&h, &params, 1.0, LProperty::L1, &AuditConfig::exhaustive()).unwrap();
        assert_eq!(r.target, 8.0);
        assert!((r.worst_ratio - 0.25).abs() < 1e-12);
        assert_eq!(r.min_ratio, Some(0.75));
        assert_eq!(r.tested_configs, 56);
    }

    #[test]
    fn l2_on_empty_graph() {
        let params = Params::derive(3, 1, 8).unwrap();
        let r = audit_l_property(
            &KGraph::empty(8, 3),
            &params,
            0.5,
            LProperty::L2,
            &AuditConfig::sampled(20, 3),
        )
        .unwrap();
        assert_eq!(r.max_ratio, Some(0.0));
        assert_eq!(r.worst_ratio, 1.0);
    }

    #[test]
    fn l6_l8_need_nondivisible() {
        let params = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        for prop in [LProperty::L6, LProperty::L8] {
            let err =
                audit_l_property(&h, &params, 1.0, prop, &AuditConfig::sampled(5, 0)).unwrap_err();
            assert!(matches!(err, Error::RequiresNonDivisible { .. }));
            assert!(err.to_string().contains("q - k + ell = 0"));
        }
        let p52 = Params::derive(5, 2, 16).unwrap();
        assert!(matches!(
            l_shape(&p52, LProperty::L5),
            Err(Error::RequiresDivisible { .. })
        ));
        assert!(l_shape(&p52, LProperty::L6).is_ok());
    }

    #[test]
    fn l_sets_have_edge_minus_free_size() {
        for (k, ell, n) in [(3, 1, 16), (5, 2, 16), (7, 3, 24), (4, 1, 18), (7, 2, 24)] {
            let params = Params::derive(k, ell, n).unwrap();
            for prop in LProperty::ALL {
                let Ok(sh) = l_shape(&params, prop) else {
                    continue;
                };
                let seq: Vec<u32> = (1..=sh.fixed as u32).collect();
                let sets = l_sets(&params, prop, &seq).unwrap();
                assert_eq!(sets.len(), sh.sets, "{prop} k={k} ell={ell}");
                for s in &sets {
                    assert_eq!(s.len() + sh.free, k, "{prop} k={k} ell={ell}");
                }
            }
        }
    }

    #[test]
    fn l_counts_on_complete_graph_are_falling_factorials() {
        let params = Params::derive(5, 2, 16).unwrap();
        let h = KGraph::complete(16, 5);
        for prop in [
            LProperty::L1,
            LProperty::L2,
            LProperty::L3,
            LProperty::L6,
            LProperty::L8,
        ] {
            let sh = l_shape(&params, prop).unwrap();
            let seq: Vec<u32> = (1..=sh.fixed as u32).collect();
            // a fixed vertex outside every listed set may still be chosen
            let sets = l_sets(&params, prop, &seq).unwrap();
            let union: std::collections::BTreeSet<u32> = sets.iter().flatten().copied().collect();
            let expected = falling_factorial((16 - union.len()) as f64, sh.free) as u64;
            assert_eq!(
                l_property_count(&h, &params, prop, &seq).unwrap(),
                expected,
                "{prop}"
            );
        }
    }
}
