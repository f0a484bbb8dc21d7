//! Repeated seeded trials of the quantities the round analysis relies on,
//! summarized against their predicted values.
//!
//! - `coverage`: mean `|I_e|` over edges, against `r p_1`.
//! - `firstorder`: for a fixed `(k-d)`-set `A` and the family `B` of all
//!   d-sets completing it to an edge, the number `N_B` of `B` with `A ∪ B` in
//!   some `H'_i`, against `|B| / kappa^(z-1)`.
//! - `secondorder`: for two fixed sets `A_1, A_2`, the number of common
//!   completions with both edges in some `H'_i`, against `7q|B| / kappa^z`.
//! - `condensed`: the largest number of digraphs in which any one vertex set
//!   is condensed, against `4q + 1`.
//! - `digraph-regularity`: `eps_hat` of `D_sigma` audited at density `p^z`.

use std::str::FromStr;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::combinatorics::combinations;
use crate::digraph::{audit_digraph_regularity, DigraphAuditConfig};
use crate::error::{Error, Result};
use crate::kgraph::{merge_sorted, KGraph, Vertex};
use crate::params::Params;
use crate::procedure::{
    compute_procedure_params, coverage_probabilities, run_procedure1, Overrides, ProcedureOutput,
    DEFAULT_R_BUDGET,
};
use crate::reduction::{build_digraph, Permutation};
use crate::rng::{derive_seed, stream_rng, Stream};

pub const DEFAULT_TRIAL_FLOOR: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaTarget {
    Coverage,
    Condensed,
    FirstOrder,
    SecondOrder,
    DigraphRegularity,
}

impl FromStr for LemmaTarget {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "coverage" => LemmaTarget::Coverage,
            "condensed" => LemmaTarget::Condensed,
            "firstorder" | "first-order" => LemmaTarget::FirstOrder,
            "secondorder" | "second-order" => LemmaTarget::SecondOrder,
            "digraph-regularity" => LemmaTarget::DigraphRegularity,
            other => {
                return Err(format!(
                    "unknown target {other:?} (coverage|condensed|firstorder|secondorder|digraph-regularity)"
                ))
            }
        })
    }
}

/// The host k-graph of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphSpec {
    Complete,
    Random { p: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub k: usize,
    pub ell: usize,
    pub n: usize,
    pub graph: GraphSpec,
    pub eps: f64,
    pub kappa: f64,
    pub r: usize,
    pub trials: usize,
    /// Extension size for the first- and second-order targets.
    pub d: usize,
    pub trial_floor: usize,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        LemmaConfig {
            k: 3,
            ell: 1,
            n: 12,
            graph: GraphSpec::Complete,
            eps: 0.1,
            kappa: 5.0,
            r: 30,
            trials: 200,
            d: 1,
            trial_floor: DEFAULT_TRIAL_FLOOR,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub target: LemmaTarget,
    pub config: LemmaConfig,
    pub seed: u64,
    pub samples: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    /// Predicted value and the band the analysis allows around it.
    pub predicted: f64,
    pub predicted_band: (f64, f64),
    /// Quantiles 5/25/50/75/95 of `sample / predicted - 1`.
    pub deviation_quantiles: [f64; 5],
    /// Mean of a per-trial prediction computed from that trial's own state.
    pub oracle_mean: Option<f64>,
    pub oracle_label: Option<String>,
    /// Trials outside `predicted_band`.
    pub outside_band: usize,
    pub notes: Vec<String>,
}

struct Trial {
    value: f64,
    oracle: Option<f64>,
    coverage: f64,
}

/// Mean, sample standard deviation and standard error.
pub fn summarize(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let sd = var.sqrt();
    (mean, sd, sd / n.sqrt())
}

fn quantiles(mut xs: Vec<f64>) -> [f64; 5] {
    if xs.is_empty() {
        return [0.0; 5];
    }
    xs.sort_by(f64::total_cmp);
    let at = |q: f64| xs[((xs.len() - 1) as f64 * q).round() as usize];
    [at(0.05), at(0.25), at(0.5), at(0.75), at(0.95)]
}

pub fn lemma_montecarlo(target: LemmaTarget, cfg: &LemmaConfig, seed: u64) -> Result<LemmaReport> {
    if cfg.trials < cfg.trial_floor {
        return Err(Error::TooFewTrials {
            trials: cfg.trials,
            floor: cfg.trial_floor,
        });
    }
    let params = Params::derive(cfg.k, cfg.ell, cfg.n)?;
    let p = match cfg.graph {
        GraphSpec::Complete => 1.0,
        GraphSpec::Random { p } => p,
    };
    let h = match cfg.graph {
        GraphSpec::Complete => KGraph::complete(cfg.n, cfg.k),
        GraphSpec::Random { p } => {
            KGraph::random(cfg.n, cfg.k, p, derive_seed(seed, Stream::Graph, &[0]))?
        }
    };
    let pp = compute_procedure_params(
        &params,
        p.max(f64::MIN_POSITIVE),
        cfg.eps,
        Overrides {
            kappa: Some(cfg.kappa),
            r: Some(cfg.r),
        },
        DEFAULT_R_BUDGET,
    )?;
    let (z, q) = (params.z as f64, params.q as f64);
    let mut notes = vec![format!(
        "kappa = {} and r = {} overridden",
        cfg.kappa, cfg.r
    )];

    let run = |t: usize| {
        run_procedure1(
            &h,
            &params,
            &pp,
            derive_seed(seed, Stream::Trial, &[t as u64]),
        )
    };
    let (trials, predicted, band, oracle_label): (Vec<Trial>, f64, (f64, f64), Option<String>) =
        match target {
            LemmaTarget::Coverage => {
                let probs = coverage_probabilities(&params, p);
                let pred = cfg.r as f64 * probs.leading;
                notes.push(format!(
                    "p_1 leading = {:.6}, window count = {:.6}, exact = {:.6}",
                    probs.leading, probs.window_count, probs.exact
                ));
                let trials = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let out = run(t)?;
                        Ok(Trial {
                            value: mean_coverage(&out),
                            oracle: Some(cfg.r as f64 * probs.exact),
                            coverage: mean_coverage(&out),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                (
                    trials,
                    pred,
                    (pred * (1.0 - z * cfg.eps), pred * (1.0 + z * cfg.eps)),
                    Some("r * exact p_1".into()),
                )
            }
            LemmaTarget::FirstOrder => {
                let a: Vec<Vertex> = (1..=(cfg.k - cfg.d) as Vertex).collect();
                let family = completions(&h, &[&a], cfg.d);
                if family.is_empty() {
                    return Err(Error::Invariant("A has no completions in H".into()));
                }
                let pred = family.len() as f64 / cfg.kappa.powf(z - 1.0);
                let w = z * z + z;
                notes.push(format!("A = {a:?}, |B| = {}", family.len()));
                let trials = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let out = run(t)?;
                        let edges: Vec<Vec<Vertex>> = family.iter().map(|b| union(&a, b)).collect();
                        let value = edges.iter().filter(|e| in_packed(&h, &out, e)).count() as f64;
                        let oracle = edges.iter().map(|e| packing_probability(&h, &out, e)).sum();
                        Ok(Trial {
                            value,
                            oracle: Some(oracle),
                            coverage: mean_coverage(&out),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                (
                    trials,
                    pred,
                    (pred * (1.0 - w * cfg.eps), pred * (1.0 + w * cfg.eps)),
                    Some("conditional expectation given the digraphs".into()),
                )
            }
            LemmaTarget::SecondOrder => {
                let m = cfg.k - cfg.d;
                let a1: Vec<Vertex> = (1..=m as Vertex).collect();
                let a2: Vec<Vertex> = (2..=(m + 1) as Vertex).collect();
                let family = completions(&h, &[&a1, &a2], cfg.d);
                let pred = 7.0 * q * family.len() as f64 / cfg.kappa.powf(z);
                notes.push(format!(
                    "A_1 = {a1:?}, A_2 = {a2:?}, |B| = {}; prediction is an upper bound",
                    family.len()
                ));
                let trials = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let out = run(t)?;
                        let value = family
                            .iter()
                            .filter(|b| {
                                in_packed(&h, &out, &union(&a1, b))
                                    && in_packed(&h, &out, &union(&a2, b))
                            })
                            .count() as f64;
                        Ok(Trial {
                            value,
                            oracle: None,
                            coverage: mean_coverage(&out),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                (trials, pred, (0.0, pred), None)
            }
            LemmaTarget::Condensed => {
                let bound = 4.0 * q + 1.0;
                notes.push(
                    "value is the max over all vertex sets of the number of condensing digraphs"
                        .into(),
                );
                let trials = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let out = run(t)?;
                        Ok(Trial {
                            value: max_condensed(&h, &params, &out) as f64,
                            oracle: None,
                            coverage: mean_coverage(&out),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                (trials, bound, (0.0, bound), None)
            }
            LemmaTarget::DigraphRegularity => {
                let pz = p.powi(params.z as i32);
                let nu = params.nu_q as f64;
                let analytic = match cfg.graph {
                    GraphSpec::Complete if params.nu_q >= 5 => Some(4.0 / nu),
                    GraphSpec::Complete => Some(2.0 / nu),
                    GraphSpec::Random { .. } => None,
                };
                let eps_band = (2.0 * z + 5.0) * cfg.eps;
                notes.push(format!("audited at density p^z = {pz}; analysis allows eps_hat up to (2z+5) eps = {eps_band}"));
                let trials = (0..cfg.trials)
                    .into_par_iter()
                    .map(|t| {
                        let mut rng = stream_rng(seed, Stream::Trial, &[t as u64, 1]);
                        let d = build_digraph(&h, &Permutation::random(cfg.n, &mut rng), &params)?;
                        let rep = audit_digraph_regularity(
                            &d.to_digraph(),
                            pz,
                            &DigraphAuditConfig::default(),
                        )?;
                        Ok(Trial {
                            value: rep.eps_hat,
                            oracle: analytic,
                            coverage: 0.0,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let pred = analytic.unwrap_or(eps_band);
                (
                    trials,
                    pred,
                    (0.0, eps_band),
                    analytic.map(|_| "complete-digraph closed form".into()),
                )
            }
        };

    let samples: Vec<f64> = trials.iter().map(|t| t.value).collect();
    let (mean, sd, se) = summarize(&samples);
    let oracles: Vec<f64> = trials.iter().filter_map(|t| t.oracle).collect();
    let oracle_mean = (!oracles.is_empty()).then(|| summarize(&oracles).0);
    if target == LemmaTarget::FirstOrder {
        let cov = summarize(&trials.iter().map(|t| t.coverage).collect::<Vec<_>>()).0;
        notes.push(format!(
            "measured mean coverage {cov:.4}; |B| * coverage^-(z-1) = {:.4}",
            predicted * cfg.kappa.powf(z - 1.0) / cov.powf(z - 1.0)
        ));
    }
    let deviation = samples
        .iter()
        .map(|x| {
            if predicted != 0.0 {
                x / predicted - 1.0
            } else {
                0.0
            }
        })
        .collect();
    let outside_band = samples
        .iter()
        .filter(|&&x| x < band.0 || x > band.1)
        .count();
    Ok(LemmaReport {
        target,
        config: cfg.clone(),
        seed,
        mean,
        sd,
        se,
        predicted,
        predicted_band: band,
        deviation_quantiles: quantiles(deviation),
        oracle_mean,
        oracle_label,
        outside_band,
        notes,
        samples,
    })
}

pub fn mean_coverage(out: &ProcedureOutput) -> f64 {
    let c = &out.labels.coverage;
    if c.is_empty() {
        0.0
    } else {
        c.iter().map(|x| x.len()).sum::<usize>() as f64 / c.len() as f64
    }
}

fn union(a: &[Vertex], b: &[Vertex]) -> Vec<Vertex> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    merge_sorted(a, b, &mut out);
    out
}

/// d-sets `B` disjoint from every `A` with `A ∪ B` an edge for every `A`.
fn completions(h: &KGraph, sets: &[&[Vertex]], d: usize) -> Vec<Vec<Vertex>> {
    let pool: Vec<Vertex> = (1..=h.n() as Vertex)
        .filter(|v| sets.iter().all(|a| !a.contains(v)))
        .collect();
    combinations(&pool, d)
        .into_iter()
        .filter(|b| sets.iter().all(|a| h.contains(&union(a, b))))
        .collect()
}

fn in_packed(h: &KGraph, out: &ProcedureOutput, e: &[Vertex]) -> bool {
    // an edge is packed iff it left the residual
    h.contains(e) && !out.residual.contains(e)
}

/// Probability over the labels alone that `e` joins some `H'_j`:
/// sum over `j` in `I_e` of `1/|I_e|` times `prod 1/|I_f|` over the partners
/// `f` of `e` in `D_j`.
fn packing_probability(h: &KGraph, out: &ProcedureOutput, e: &[Vertex]) -> f64 {
    let Some(id) = h.edge_id(e) else { return 0.0 };
    let cov = &out.labels.coverage[id];
    if cov.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for &j in cov {
        let d = &out.digraphs[j as usize];
        let list = d
            .owned_lists()
            .iter()
            .find(|l| l.iter().any(|f| f.vertices() == e))
            .expect("e is owned in D_j");
        let mut prob = 1.0 / cov.len() as f64;
        for f in list.iter().filter(|f| f.vertices() != e) {
            let fid = h.edge_id(f.vertices()).expect("owned edges are in H");
            prob /= out.labels.coverage[fid].len() as f64;
        }
        total += prob;
    }
    total
}

fn max_condensed(h: &KGraph, params: &Params, out: &ProcedureOutput) -> usize {
    let mut counts: FxHashMap<Vec<Vertex>, usize> = FxHashMap::default();
    let mut buf = Vec::new();
    for d in &out.digraphs {
        let mut here: Vec<Vec<Vertex>> = Vec::new();
        for list in d.owned_lists() {
            for a in 0..list.len() {
                for b in a + 1..list.len() {
                    if !h.contains_edge(&list[a]) || !h.contains_edge(&list[b]) {
                        continue;
                    }
                    merge_sorted(list[a].vertices(), list[b].vertices(), &mut buf);
                    buf.dedup();
                    if buf.len() > params.k && buf.len() <= 2 * params.q {
                        here.push(buf.clone());
                    }
                }
            }
        }
        here.sort();
        here.dedup();
        for s in here {
            *counts.entry(s).or_insert(0) += 1;
        }
    }
    counts.values().copied().max().unwrap_or(0)
}
