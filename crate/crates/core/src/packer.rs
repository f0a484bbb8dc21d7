//! Packing arc-disjoint Hamilton cycles in a digraph.
//!
//! [`pack_hamilton_cycles`] is a randomized rotation-extension heuristic: grow
//! a path at both ends, rotate the head when stuck, close when the path spans
//! all vertices, remove the cycle and repeat on the residual digraph.
//! [`exact_max_packing`] finds an optimal packing by exhaustive search for
//! small digraphs.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::digraph::Digraph;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream, StreamRng};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackerConfig {
    /// Path restarts per extraction are capped at `restart_factor * nu`.
    pub restart_factor: usize,
    /// Rotations per restart are capped at `rotation_factor * nu`.
    pub rotation_factor: usize,
    /// Consecutive failed extractions before a packing stops.
    pub fail_budget: usize,
    /// Independent whole packings; the one with most cycles is returned.
    pub trials: usize,
}

impl Default for PackerConfig {
    fn default() -> Self {
        PackerConfig {
            restart_factor: 200,
            rotation_factor: 2,
            fail_budget: 20,
            trials: 32,
        }
    }
}

/// Arc-disjoint Hamilton cycles (as vertex sequences) plus the arcs they
/// leave unused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiPacking {
    pub cycles: Vec<Vec<usize>>,
    pub leftover_arcs: Vec<(usize, usize)>,
    pub leftover_fraction: f64,
    /// Path restarts spent across all trials.
    pub attempts: u64,
    pub trials_run: usize,
}

impl DiPacking {
    fn assemble(d: &Digraph, cycles: Vec<Vec<usize>>, attempts: u64, trials_run: usize) -> Self {
        let mut residual = d.clone();
        for c in &cycles {
            for (a, b) in cycle_arcs(c) {
                residual.remove_arc(a, b);
            }
        }
        let leftover_arcs: Vec<_> = residual.arcs().collect();
        let leftover_fraction = if d.arc_count() == 0 {
            0.0
        } else {
            leftover_arcs.len() as f64 / d.arc_count() as f64
        };
        DiPacking {
            cycles,
            leftover_arcs,
            leftover_fraction,
            attempts,
            trials_run,
        }
    }
}

pub fn cycle_arcs(c: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..c.len()).map(move |i| (c[i], c[(i + 1) % c.len()]))
}

/// Independent check: every cycle is Hamiltonian in `d`, no arc is used
/// twice, and cycles plus leftover are exactly the arcs of `d`.
pub fn validate_packing(d: &Digraph, packing: &DiPacking) -> std::result::Result<(), String> {
    let mut used = Digraph::empty(d.nu());
    for (i, c) in packing.cycles.iter().enumerate() {
        if !d.is_hamilton_cycle(c) {
            return Err(format!("cycle {i} is not a Hamilton cycle"));
        }
        for (a, b) in cycle_arcs(c) {
            used.add_arc(a, b)
                .map_err(|_| format!("arc ({a}, {b}) used twice"))?;
        }
    }
    for &(a, b) in &packing.leftover_arcs {
        used.add_arc(a, b)
            .map_err(|_| format!("leftover arc ({a}, {b}) invalid or also in a cycle"))?;
    }
    if used != *d {
        return Err("cycles and leftover do not partition the arcs".into());
    }
    Ok(())
}

/// No more Hamilton cycles can be packed than the smallest in- or out-degree.
pub fn degree_bound(d: &Digraph) -> usize {
    if d.nu() < 2 {
        return 0;
    }
    (0..d.nu())
        .map(|v| d.out_degree(v).min(d.in_degree(v)))
        .min()
        .unwrap_or(0)
}

pub fn pack_hamilton_cycles(d: &Digraph, cfg: &PackerConfig, seed: u64) -> DiPacking {
    let bound = degree_bound(d);
    let mut best: Option<Vec<Vec<usize>>> = None;
    let mut attempts = 0u64;
    let mut trials_run = 0;
    for trial in 0..cfg.trials.max(1) {
        let mut rng = stream_rng(seed, Stream::Pack, &[trial as u64]);
        let (cycles, spent) = pack_once(d, cfg, &mut rng);
        attempts += spent;
        trials_run += 1;
        if best.as_ref().map_or(true, |b| cycles.len() > b.len()) {
            best = Some(cycles);
        }
        if best.as_ref().is_some_and(|b| b.len() >= bound) {
            break;
        }
    }
    let packing = DiPacking::assemble(d, best.unwrap_or_default(), attempts, trials_run);
    debug_assert_eq!(validate_packing(d, &packing), Ok(()));
    packing
}

fn pack_once(d: &Digraph, cfg: &PackerConfig, rng: &mut StreamRng) -> (Vec<Vec<usize>>, u64) {
    let mut residual = d.clone();
    let mut cycles = Vec::new();
    let mut attempts = 0;
    let mut fails = 0;
    while fails < cfg.fail_budget && degree_bound(&residual) > 0 {
        let (found, spent) = extract_cycle(&residual, cfg, rng);
        attempts += spent;
        match found {
            Some(c) => {
                for (a, b) in cycle_arcs(&c) {
                    residual.remove_arc(a, b);
                }
                cycles.push(c);
                fails = 0;
            }
            None => fails += 1,
        }
    }
    (cycles, attempts)
}

/// Among `cands`, one with least residual out-degree, ties broken at random.
fn pick_min_degree(d: &Digraph, cands: &[usize], rng: &mut StreamRng, out: bool) -> usize {
    let deg = |v: usize| if out { d.out_degree(v) } else { d.in_degree(v) };
    let min = cands
        .iter()
        .map(|&v| deg(v))
        .min()
        .expect("nonempty candidates");
    let ties: Vec<usize> = cands.iter().copied().filter(|&v| deg(v) == min).collect();
    *ties.choose(rng).expect("nonempty ties")
}

/// One Hamilton cycle of `d` by rotation-extension, or `None` once the
/// restart cap is spent. Returns the number of restarts used.
pub fn extract_cycle(
    d: &Digraph,
    cfg: &PackerConfig,
    rng: &mut StreamRng,
) -> (Option<Vec<usize>>, u64) {
    let nu = d.nu();
    if degree_bound(d) == 0 {
        return (None, 0);
    }
    let restarts = (cfg.restart_factor * nu).max(1);
    let rotation_cap = cfg.rotation_factor * nu;
    for attempt in 0..restarts {
        if let Some(c) = grow(d, rng, rotation_cap) {
            debug_assert!(d.is_hamilton_cycle(&c));
            return (Some(c), attempt as u64 + 1);
        }
    }
    (None, restarts as u64)
}

fn grow(d: &Digraph, rng: &mut StreamRng, rotation_cap: usize) -> Option<Vec<usize>> {
    let nu = d.nu();
    let mut path: VecDeque<usize> = VecDeque::with_capacity(nu);
    let mut on_path = vec![false; nu];
    let start = rng.gen_range(0..nu);
    path.push_back(start);
    on_path[start] = true;
    let mut rotations = 0;
    loop {
        let head = *path.back().unwrap();
        if path.len() == nu {
            if d.has_arc(head, path[0]) {
                return Some(path.into_iter().collect());
            }
        } else {
            let fwd: Vec<usize> = d.out_neighbors(head).filter(|&v| !on_path[v]).collect();
            if !fwd.is_empty() {
                let v = pick_min_degree(d, &fwd, rng, true);
                path.push_back(v);
                on_path[v] = true;
                continue;
            }
            let tail = path[0];
            let back: Vec<usize> = d.in_neighbors(tail).filter(|&v| !on_path[v]).collect();
            if !back.is_empty() {
                let v = pick_min_degree(d, &back, rng, false);
                path.push_front(v);
                on_path[v] = true;
                continue;
            }
        }
        if rotations >= rotation_cap {
            return None;
        }
        rotations += 1;
        rotate(d, &mut path, rng)?;
    }
}

/// With head `p_t`, arcs `p_t -> p_(i+1)` and `p_i -> p_j` for
/// `i + 1 < j <= t` give the path `p_0..p_i, p_j..p_t, p_(i+1)..p_(j-1)`,
/// whose head is `p_(j-1)`.
fn rotate(d: &Digraph, path: &mut VecDeque<usize>, rng: &mut StreamRng) -> Option<()> {
    let t = path.len() - 1;
    let mut pos = vec![usize::MAX; d.nu()];
    for (i, &v) in path.iter().enumerate() {
        pos[v] = i;
    }
    let head = path[t];
    let mut pairs = Vec::new();
    for w in d.out_neighbors(head) {
        let i1 = pos[w];
        if i1 == usize::MAX || i1 == 0 {
            continue;
        }
        let i = i1 - 1;
        for x in d.out_neighbors(path[i]) {
            let j = pos[x];
            if j != usize::MAX && j > i1 && j <= t {
                pairs.push((i, j));
            }
        }
    }
    let &(i, j) = pairs.choose(rng)?;
    let v: Vec<usize> = path.iter().copied().collect();
    let mut next = Vec::with_capacity(v.len());
    next.extend_from_slice(&v[..=i]);
    next.extend_from_slice(&v[j..=t]);
    next.extend_from_slice(&v[i + 1..j]);
    *path = next.into();
    Some(())
}

/// Every Hamilton cycle of `d`, each listed once starting at vertex 0.
/// Exponential in general; intended for small digraphs.
pub fn hamilton_cycles(d: &Digraph) -> Vec<Vec<usize>> {
    let nu = d.nu();
    let mut out = Vec::new();
    if nu < 2 {
        return out;
    }
    let mut path = vec![0];
    let mut on = vec![false; nu];
    on[0] = true;
    fn dfs(d: &Digraph, path: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let head = *path.last().unwrap();
        if path.len() == d.nu() {
            if d.has_arc(head, 0) {
                out.push(path.clone());
            }
            return;
        }
        for v in d.out_neighbors(head) {
            if !on[v] {
                on[v] = true;
                path.push(v);
                dfs(d, path, on, out);
                path.pop();
                on[v] = false;
            }
        }
    }
    dfs(d, &mut path, &mut on, &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCaps {
    pub max_nu: usize,
    pub max_arcs: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps {
            max_nu: 8,
            max_arcs: 40,
        }
    }
}

pub fn exact_max_packing(d: &Digraph) -> Result<DiPacking> {
    exact_max_packing_with(d, OracleCaps::default())
}

/// Optimal packing by branch and bound. Every Hamilton cycle uses exactly one
/// out-arc of vertex 0, so cycles are grouped by that arc and the search
/// picks at most one cycle per group.
pub fn exact_max_packing_with(d: &Digraph, caps: OracleCaps) -> Result<DiPacking> {
    let (nu, m) = (d.nu(), d.arc_count());
    if nu > caps.max_nu || m > caps.max_arcs || m > 64 {
        return Err(Error::OracleCap {
            nu,
            arcs: m,
            max_nu: caps.max_nu,
            max_arcs: caps.max_arcs.min(64),
        });
    }
    let arcs: Vec<(usize, usize)> = d.arcs().collect();
    let arc_id = |a: usize, b: usize| {
        arcs.binary_search(&(a, b))
            .expect("cycle arc is in the digraph")
    };
    let cycles = hamilton_cycles(d);
    let mut groups: Vec<Vec<(u64, usize)>> = vec![Vec::new(); nu];
    for (ci, c) in cycles.iter().enumerate() {
        let mask = cycle_arcs(c).fold(0u64, |m, (a, b)| m | (1 << arc_id(a, b)));
        groups[c[1]].push((mask, ci));
    }
    groups.retain(|g| !g.is_empty());

    struct Search<'a> {
        groups: &'a [Vec<(u64, usize)>],
        best: Vec<usize>,
        chosen: Vec<usize>,
        bound: usize,
    }
    impl Search<'_> {
        fn go(&mut self, g: usize, used: u64) {
            if self.chosen.len() > self.best.len() {
                self.best = self.chosen.clone();
            }
            if g == self.groups.len()
                || self.best.len() >= self.bound
                || self.chosen.len() + (self.groups.len() - g) <= self.best.len()
            {
                return;
            }
            for &(mask, ci) in &self.groups[g] {
                if mask & used == 0 {
                    self.chosen.push(ci);
                    self.go(g + 1, used | mask);
                    self.chosen.pop();
                }
            }
            self.go(g + 1, used);
        }
    }
    let mut s = Search {
        groups: &groups,
        best: Vec::new(),
        chosen: Vec::new(),
        bound: degree_bound(d),
    };
    s.go(0, 0);
    let chosen = s.best.iter().map(|&ci| cycles[ci].clone()).collect();
    let packing = DiPacking::assemble(d, chosen, cycles.len() as u64, 1);
    debug_assert_eq!(validate_packing(d, &packing), Ok(()));
    Ok(packing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cycle() {
        let d = Digraph::cycle(6);
        let p = pack_hamilton_cycles(&d, &PackerConfig::default(), 1);
        assert_eq!(p.cycles.len(), 1);
        assert_eq!(p.leftover_fraction, 0.0);
        assert_eq!(exact_max_packing(&d).unwrap().cycles.len(), 1);
    }

    #[test]
    fn sink_vertex_blocks_everything() {
        let d = Digraph::from_arcs(4, [(0, 1), (1, 2), (2, 0), (0, 3), (1, 3)]).unwrap();
        assert_eq!(exact_max_packing(&d).unwrap().cycles.len(), 0);
        let p = pack_hamilton_cycles(&d, &PackerConfig::default(), 1);
        assert!(p.cycles.is_empty());
        assert_eq!(p.leftover_arcs.len(), 5);
    }

    #[test]
    fn complete_five_decomposes() {
        let d = Digraph::complete(5);
        assert_eq!(exact_max_packing(&d).unwrap().cycles.len(), 4);
        let p = pack_hamilton_cycles(&d, &PackerConfig::default(), 3);
        assert_eq!(p.cycles.len(), 4);
        assert!(p.leftover_arcs.is_empty());
        assert_eq!(validate_packing(&d, &p), Ok(()));
    }

    #[test]
    fn hamilton_cycle_counts() {
        // complete digraph on nu vertices has (nu-1)! directed Hamilton cycles
        assert_eq!(hamilton_cycles(&Digraph::complete(5)).len(), 24);
        assert_eq!(hamilton_cycles(&Digraph::complete(2)).len(), 1);
        assert!(hamilton_cycles(&Digraph::empty(4)).is_empty());
    }

    #[test]
    fn oracle_caps() {
        assert!(matches!(
            exact_max_packing(&Digraph::complete(9)),
            Err(Error::OracleCap { .. })
        ));
    }

    #[test]
    fn validator_catches_corruption() {
        let d = Digraph::complete(5);
        let mut p = pack_hamilton_cycles(&d, &PackerConfig::default(), 3);
        p.cycles.push(p.cycles[0].clone());
        assert!(validate_packing(&d, &p).is_err());
    }

    #[test]
    fn deterministic() {
        let d = Digraph::random(7, 0.7, 2).unwrap();
        let cfg = PackerConfig::default();
        assert_eq!(
            pack_hamilton_cycles(&d, &cfg, 9),
            pack_hamilton_cycles(&d, &cfg, 9)
        );
    }
}
