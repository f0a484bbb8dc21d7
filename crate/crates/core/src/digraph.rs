//! Loop-free digraphs on `0..nu` and their `(eps, p)`-regularity audit.
//!
//! Regularity here means (i) in- and out-degrees near `nu p`, (ii) common
//! out-, common in- and out-in neighbourhoods of distinct pairs near
//! `nu p^2`, (iii) for `a, b, c, d` distinct except possibly `b = c`, about
//! `nu p^4` vertices `x` with `a->x`, `x->b`, `c->x`, `x->d`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regularity::AuditMode;
use crate::rng::{stream_rng, Stream};

/// Adjacency stored as one bitset row per vertex, both directions.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "DigraphRepr", try_from = "DigraphRepr")]
pub struct Digraph {
    nu: usize,
    words: usize,
    out: Vec<u64>,
    inn: Vec<u64>,
    arc_count: usize,
}

#[derive(Serialize, Deserialize)]
struct DigraphRepr {
    nu: usize,
    arcs: Vec<(usize, usize)>,
}

impl From<Digraph> for DigraphRepr {
    fn from(d: Digraph) -> Self {
        DigraphRepr {
            nu: d.nu,
            arcs: d.arcs().collect(),
        }
    }
}

impl TryFrom<DigraphRepr> for Digraph {
    type Error = Error;
    fn try_from(r: DigraphRepr) -> Result<Self> {
        Digraph::from_arcs(r.nu, r.arcs)
    }
}

impl std::fmt::Debug for Digraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Digraph")
            .field("nu", &self.nu)
            .field("arcs", &self.arcs().collect::<Vec<_>>())
            .finish()
    }
}

impl Digraph {
    pub fn empty(nu: usize) -> Self {
        let words = nu.div_ceil(64).max(1);
        Digraph {
            nu,
            words,
            out: vec![0; nu * words],
            inn: vec![0; nu * words],
            arc_count: 0,
        }
    }

    /// Rejects loops, duplicate arcs and endpoints outside `0..nu`.
    pub fn from_arcs(nu: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut d = Digraph::empty(nu);
        for (a, b) in arcs {
            if a == b || a >= nu || b >= nu || d.has_arc(a, b) {
                return Err(Error::InvalidArc { from: a, to: b, nu });
            }
            d.set(a, b, true);
        }
        Ok(d)
    }

    pub fn complete(nu: usize) -> Self {
        Digraph::from_arcs(
            nu,
            (0..nu).flat_map(|a| (0..nu).filter(move |&b| b != a).map(move |b| (a, b))),
        )
        .expect("complete digraph is loop-free")
    }

    /// The directed cycle `0 -> 1 -> ... -> nu-1 -> 0`.
    pub fn cycle(nu: usize) -> Self {
        Digraph::from_arcs(nu, (0..nu).map(|a| (a, (a + 1) % nu))).expect("nu >= 2")
    }

    /// Each ordered pair independently with probability `p`.
    pub fn random(nu: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability { value: p });
        }
        let mut rng = stream_rng(seed, Stream::Graph, &[nu as u64, 2]);
        let mut d = Digraph::empty(nu);
        for a in 0..nu {
            for b in 0..nu {
                if a != b && rng.gen_bool(p) {
                    d.set(a, b, true);
                }
            }
        }
        Ok(d)
    }

    fn set(&mut self, a: usize, b: usize, on: bool) {
        let (wa, ba) = (a * self.words + b / 64, 1u64 << (b % 64));
        let (wb, bb) = (b * self.words + a / 64, 1u64 << (a % 64));
        let was = self.out[wa] & ba != 0;
        if on && !was {
            self.arc_count += 1;
        } else if !on && was {
            self.arc_count -= 1;
        }
        if on {
            self.out[wa] |= ba;
            self.inn[wb] |= bb;
        } else {
            self.out[wa] &= !ba;
            self.inn[wb] &= !bb;
        }
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn arc_count(&self) -> usize {
        self.arc_count
    }

    pub fn has_arc(&self, a: usize, b: usize) -> bool {
        a < self.nu && b < self.nu && self.out[a * self.words + b / 64] & (1 << (b % 64)) != 0
    }

    pub fn remove_arc(&mut self, a: usize, b: usize) -> bool {
        let had = self.has_arc(a, b);
        if had {
            self.set(a, b, false);
        }
        had
    }

    pub fn add_arc(&mut self, a: usize, b: usize) -> Result<()> {
        if a == b || a >= self.nu || b >= self.nu || self.has_arc(a, b) {
            return Err(Error::InvalidArc {
                from: a,
                to: b,
                nu: self.nu,
            });
        }
        self.set(a, b, true);
        Ok(())
    }

    pub(crate) fn out_row(&self, a: usize) -> &[u64] {
        &self.out[a * self.words..(a + 1) * self.words]
    }

    pub(crate) fn in_row(&self, a: usize) -> &[u64] {
        &self.inn[a * self.words..(a + 1) * self.words]
    }

    pub fn out_degree(&self, a: usize) -> usize {
        popcount(self.out_row(a))
    }

    pub fn in_degree(&self, a: usize) -> usize {
        popcount(self.in_row(a))
    }

    pub fn out_neighbors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        bits(self.out_row(a))
    }

    pub fn in_neighbors(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        bits(self.in_row(a))
    }

    /// Arcs in lexicographic order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nu).flat_map(move |a| self.out_neighbors(a).map(move |b| (a, b)))
    }

    /// Relabel vertex `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Digraph> {
        let mut seen = vec![false; self.nu];
        if perm.len() != self.nu
            || perm
                .iter()
                .any(|&v| v >= self.nu || std::mem::replace(&mut seen[v], true))
        {
            return Err(Error::InvalidPermutation {
                n: self.nu,
                reason: "relabelling must be a bijection".into(),
            });
        }
        Digraph::from_arcs(self.nu, self.arcs().map(|(a, b)| (perm[a], perm[b])))
    }

    /// True iff `cycle` lists every vertex once and consecutive pairs
    /// (cyclically) are arcs.
    pub fn is_hamilton_cycle(&self, cycle: &[usize]) -> bool {
        if cycle.len() != self.nu || self.nu < 2 {
            return false;
        }
        let mut seen = vec![false; self.nu];
        if cycle
            .iter()
            .any(|&v| v >= self.nu || std::mem::replace(&mut seen[v], true))
        {
            return false;
        }
        (0..self.nu).all(|i| self.has_arc(cycle[i], cycle[(i + 1) % self.nu]))
    }
}

fn popcount(row: &[u64]) -> usize {
    row.iter().map(|w| w.count_ones() as usize).sum()
}

fn bits(row: &[u64]) -> impl Iterator<Item = usize> + '_ {
    row.iter().enumerate().flat_map(|(i, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            if w == 0 {
                return None;
            }
            let t = w.trailing_zeros() as usize;
            w &= w - 1;
            Some(i * 64 + t)
        })
    })
}

fn and_count(rows: &[&[u64]]) -> usize {
    (0..rows[0].len())
        .map(|w| rows.iter().fold(u64::MAX, |acc, r| acc & r[w]).count_ones() as usize)
        .sum()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DigraphAuditConfig {
    pub mode: AuditMode,
    pub samples: usize,
    pub seed: u64,
    /// Exhaustive (ii) needs `nu^2` and (iii) `nu^4` below this.
    pub exhaustive_cap: u128,
}

impl Default for DigraphAuditConfig {
    fn default() -> Self {
        DigraphAuditConfig {
            mode: AuditMode::Exhaustive,
            samples: 10_000,
            seed: 0,
            exhaustive_cap: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PropertyStats {
    pub target: f64,
    pub tested: u64,
    pub exhaustive: bool,
    pub min_count: Option<usize>,
    pub max_count: Option<usize>,
    pub eps_hat: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DigraphRegularityReport {
    pub nu: usize,
    pub p: f64,
    pub eps_hat_degree: f64,
    pub eps_hat_codegree: f64,
    /// `None` when `nu < 5`, where the pattern of (iii) is not fully defined.
    pub eps_hat_quad: Option<f64>,
    pub eps_hat: f64,
    pub degree: PropertyStats,
    pub codegree: PropertyStats,
    pub quad: Option<PropertyStats>,
    /// Properties whose target `nu p^e` is below one.
    pub degenerate_targets: Vec<String>,
}

struct Acc {
    target: f64,
    tested: u64,
    min: Option<usize>,
    max: Option<usize>,
    worst: f64,
}

impl Acc {
    fn new(target: f64) -> Self {
        Acc {
            target,
            tested: 0,
            min: None,
            max: None,
            worst: 0.0,
        }
    }

    fn push(&mut self, c: usize) {
        self.tested += 1;
        self.min = Some(self.min.map_or(c, |m| m.min(c)));
        self.max = Some(self.max.map_or(c, |m| m.max(c)));
        let dev = if self.target == 0.0 {
            if c == 0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (c as f64 / self.target - 1.0).abs()
        };
        self.worst = self.worst.max(dev);
    }

    fn merge(mut self, o: Acc) -> Acc {
        self.tested += o.tested;
        self.min = match (self.min, o.min) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.max = match (self.max, o.max) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self.worst = self.worst.max(o.worst);
        self
    }

    fn stats(self, exhaustive: bool) -> PropertyStats {
        PropertyStats {
            target: self.target,
            tested: self.tested,
            exhaustive,
            min_count: self.min,
            max_count: self.max,
            eps_hat: self.worst,
        }
    }
}

/// Number of `x` with `a->x, x->b, c->x, x->d`.
pub fn quad_count(d: &Digraph, a: usize, b: usize, c: usize, dd: usize) -> usize {
    and_count(&[d.out_row(a), d.in_row(b), d.out_row(c), d.in_row(dd)])
}

/// `(d+(a,b), d-(a,b), d+-(a,b))`.
pub fn codegrees(d: &Digraph, a: usize, b: usize) -> (usize, usize, usize) {
    (
        and_count(&[d.out_row(a), d.out_row(b)]),
        and_count(&[d.in_row(a), d.in_row(b)]),
        and_count(&[d.out_row(a), d.in_row(b)]),
    )
}

fn quad_valid(a: usize, b: usize, c: usize, d: usize) -> bool {
    a != b && a != c && a != d && b != d && c != d
}

pub fn audit_digraph_regularity(
    d: &Digraph,
    p: f64,
    cfg: &DigraphAuditConfig,
) -> Result<DigraphRegularityReport> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidProbability { value: p });
    }
    let nu = d.nu();
    let nuf = nu as f64;

    let mut deg = Acc::new(nuf * p);
    for a in 0..nu {
        deg.push(d.out_degree(a));
        deg.push(d.in_degree(a));
    }

    let pair_exhaustive =
        cfg.mode == AuditMode::Exhaustive && (nu as u128).pow(2) <= cfg.exhaustive_cap;
    let target2 = nuf * p * p;
    let co = if pair_exhaustive {
        (0..nu)
            .into_par_iter()
            .map(|a| {
                let mut acc = Acc::new(target2);
                for b in (0..nu).filter(|&b| b != a) {
                    let (o, i, oi) = codegrees(d, a, b);
                    // d+ and d- are symmetric; count each unordered pair once
                    if a < b {
                        acc.push(o);
                        acc.push(i);
                    }
                    acc.push(oi);
                }
                acc
            })
            .reduce(|| Acc::new(target2), Acc::merge)
    } else {
        let mut acc = Acc::new(target2);
        if nu >= 2 {
            let mut rng = stream_rng(cfg.seed, Stream::Sample, &[2]);
            for _ in 0..cfg.samples {
                let a = rng.gen_range(0..nu);
                let b = (a + rng.gen_range(1..nu)) % nu;
                let (o, i, oi) = codegrees(d, a, b);
                acc.push(o);
                acc.push(i);
                acc.push(oi);
            }
        }
        acc
    };

    let target4 = nuf * p.powi(4);
    let quad = if nu < 5 {
        None
    } else if cfg.mode == AuditMode::Exhaustive && (nu as u128).pow(4) <= cfg.exhaustive_cap {
        let acc = (0..nu)
            .into_par_iter()
            .map(|a| {
                let mut acc = Acc::new(target4);
                for b in 0..nu {
                    for c in 0..nu {
                        for dd in 0..nu {
                            if quad_valid(a, b, c, dd) {
                                acc.push(quad_count(d, a, b, c, dd));
                            }
                        }
                    }
                }
                acc
            })
            .reduce(|| Acc::new(target4), Acc::merge);
        Some(acc.stats(true))
    } else {
        let mut acc = Acc::new(target4);
        let mut rng = stream_rng(cfg.seed, Stream::Sample, &[3]);
        let mut drawn = 0;
        while drawn < cfg.samples {
            let (a, b, c, dd) = (
                rng.gen_range(0..nu),
                rng.gen_range(0..nu),
                rng.gen_range(0..nu),
                rng.gen_range(0..nu),
            );
            if quad_valid(a, b, c, dd) {
                acc.push(quad_count(d, a, b, c, dd));
                drawn += 1;
            }
        }
        Some(acc.stats(false))
    };

    let degree = deg.stats(true);
    let codegree = co.stats(pair_exhaustive);
    let mut degenerate = Vec::new();
    for (name, t) in [("degree", degree.target), ("codegree", codegree.target)] {
        if t < 1.0 {
            degenerate.push(name.to_string());
        }
    }
    if let Some(q) = &quad {
        if q.target < 1.0 {
            degenerate.push("quad".to_string());
        }
    }
    let eps_hat_quad = quad.as_ref().map(|q| q.eps_hat);
    Ok(DigraphRegularityReport {
        nu,
        p,
        eps_hat_degree: degree.eps_hat,
        eps_hat_codegree: codegree.eps_hat,
        eps_hat_quad,
        eps_hat: degree
            .eps_hat
            .max(codegree.eps_hat)
            .max(eps_hat_quad.unwrap_or(0.0)),
        degree,
        codegree,
        quad,
        degenerate_targets: degenerate,
    })
}
