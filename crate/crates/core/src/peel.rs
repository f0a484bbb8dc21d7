//! The outer peeling loop: run a labelled round, pack every filtered digraph,
//! lift the packed cycles, delete all `H'_i`, repeat on the residual.

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kgraph::{Edge, KGraph};
use crate::packer::{pack_hamilton_cycles, validate_packing, PackerConfig};
use crate::params::Params;
use crate::procedure::{
    compute_procedure_params, run_procedure1_with, Overrides, ProcedureConfig, ValueMode,
    DEFAULT_R_BUDGET,
};
use crate::reduction::{lift_cycle, validate_type_l_cycle, TypeLCycle};
use crate::rng::{derive_seed, Stream};
use crate::schedule::PeelSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeelConfig {
    /// Applied to every round when set.
    pub overrides: Overrides,
    pub r_budget: f64,
    /// Upper bound on rounds; also the round count when the schedule has no
    /// stopping index.
    pub max_rounds: Option<usize>,
    pub packer: PackerConfig,
    pub procedure: ProcedureConfig,
}

impl Default for PeelConfig {
    fn default() -> Self {
        PeelConfig {
            overrides: Overrides::default(),
            r_budget: DEFAULT_R_BUDGET,
            max_rounds: None,
            packer: PackerConfig::default(),
            procedure: ProcedureConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: usize,
    pub seed: u64,
    pub eps_t: f64,
    pub p_t: f64,
    pub kappa: f64,
    pub kappa_raw: f64,
    pub kappa_mode: ValueMode,
    pub r: usize,
    pub r_raw: f64,
    pub r_mode: ValueMode,
    pub edges_before: usize,
    /// `sum |E(H'_i)|`.
    pub filtered_edges: usize,
    pub cycles: usize,
    pub cycle_edges: usize,
    /// Edges of some `H'_i` left out of every packed cycle; deleted anyway.
    pub lost_edges: usize,
    /// Edges with `I_e` empty.
    pub uncovered: usize,
    /// Covered edges kept out of every `H'_i` by the label filter.
    pub unkept: usize,
    pub residual: usize,
    /// Leftover arc fraction of each nonempty filtered digraph.
    pub leftover_fractions: Vec<f64>,
    pub packer_attempts: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingResult {
    pub params: Params,
    pub seed: u64,
    pub eps: f64,
    pub p: f64,
    pub alpha: f64,
    pub schedule_t: Option<usize>,
    pub rounds_run: usize,
    pub stop_reason: String,
    pub nu_q_even: bool,
    pub two_q_divides_n: bool,
    pub per_round: Vec<RoundStats>,
    pub cycles: Vec<TypeLCycle>,
    /// `(round, digraph)` that produced each cycle.
    pub cycle_origin: Vec<(usize, usize)>,
    pub total_edges: usize,
    pub covered_edges: usize,
    pub lost_edges: usize,
    pub final_residual: usize,
    pub uncovered_fraction: f64,
    pub covered_fraction: f64,
    /// `eps^alpha`; report only.
    pub eps_alpha: f64,
    /// `(12 z^2 eps_(T-1))^(1/8)` when the schedule stops; report only.
    pub leftover_target: Option<f64>,
}

pub fn run_peeling(
    h: &KGraph,
    params: &Params,
    schedule: &PeelSchedule,
    cfg: &PeelConfig,
    seed: u64,
) -> Result<PackingResult> {
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
    let planned = match (schedule.t_stop, cfg.max_rounds) {
        (Some(t), Some(m)) => t.min(m),
        (Some(t), None) => t,
        (None, m) => m.unwrap_or(0),
    };
    let mut current = h.clone();
    let mut per_round = Vec::new();
    let mut cycles = Vec::new();
    let mut origin = Vec::new();
    let mut stop_reason = if planned == 0 {
        "no rounds scheduled".to_string()
    } else {
        format!("completed {planned} rounds")
    };

    for t in 0..planned {
        let idx = t.min(schedule.eps_t.len() - 1);
        let (eps_t, p_t) = (schedule.eps_t[idx], schedule.p_t[idx]);
        let pp = compute_procedure_params(
            params,
            p_t.max(f64::MIN_POSITIVE),
            eps_t,
            cfg.overrides,
            cfg.r_budget,
        )?;
        let round_seed = derive_seed(seed, Stream::Round, &[t as u64]);
        let out = run_procedure1_with(&current, params, &pp, round_seed, &cfg.procedure)?;

        let packed: Vec<(usize, Vec<TypeLCycle>, Option<f64>, u64)> = out
            .filtered
            .par_iter()
            .enumerate()
            .map(|(i, f)| {
                let dg = f.to_digraph();
                let packing = pack_hamilton_cycles(
                    &dg,
                    &cfg.packer,
                    derive_seed(round_seed, Stream::Pack, &[i as u64]),
                );
                validate_packing(&dg, &packing)
                    .map_err(|m| Error::Invariant(format!("round {t}, digraph {i}: {m}")))?;
                let mut lifted = Vec::with_capacity(packing.cycles.len());
                for c in &packing.cycles {
                    let cyc = lift_cycle(f, c)?;
                    validate_type_l_cycle(&current, &cyc, params).map_err(|violation| {
                        Error::CycleValidation {
                            round: t,
                            digraph: i,
                            violation,
                        }
                    })?;
                    lifted.push(cyc);
                }
                let frac = (dg.arc_count() > 0).then_some(packing.leftover_fraction);
                Ok((i, lifted, frac, packing.attempts))
            })
            .collect::<Result<_>>()?;

        let filtered_edges = out.packed_total();
        let mut round_cycles = 0;
        let mut leftover_fractions = Vec::new();
        let mut attempts = 0;
        for (i, lifted, frac, a) in packed {
            round_cycles += lifted.len();
            leftover_fractions.extend(frac);
            attempts += a;
            for c in lifted {
                origin.push((t, i));
                cycles.push(c);
            }
        }
        let cycle_edges = round_cycles * params.nu_ell;
        let uncovered = out.uncovered();
        let stats = RoundStats {
            round: t,
            seed: round_seed,
            eps_t,
            p_t,
            kappa: pp.kappa,
            kappa_raw: pp.kappa_raw,
            kappa_mode: pp.kappa_mode,
            r: pp.r,
            r_raw: pp.r_raw,
            r_mode: pp.r_mode,
            edges_before: current.edge_count(),
            filtered_edges,
            cycles: round_cycles,
            cycle_edges,
            lost_edges: filtered_edges - cycle_edges,
            uncovered,
            unkept: out.residual.edge_count() - uncovered,
            residual: out.residual.edge_count(),
            leftover_fractions,
            packer_attempts: attempts,
        };
        if stats.cycle_edges + stats.lost_edges + stats.uncovered + stats.unkept
            != stats.edges_before
        {
            return Err(Error::Invariant(format!(
                "round {t}: conservation fails: {stats:?}"
            )));
        }
        per_round.push(stats);
        current = out.residual;
        if round_cycles == 0 {
            stop_reason = format!("round {t} packed no cycles");
            break;
        }
    }

    let total = h.edge_count();
    let covered: usize = per_round.iter().map(|s| s.cycle_edges).sum();
    let lost: usize = per_round.iter().map(|s| s.lost_edges).sum();
    if covered + lost + current.edge_count() != total {
        return Err(Error::Invariant(format!(
            "global conservation: {total} != {covered} + {lost} + {}",
            current.edge_count()
        )));
    }
    check_global_disjointness(h, &cycles)?;
    let uncovered_fraction = if total == 0 {
        0.0
    } else {
        (total - covered) as f64 / total as f64
    };
    let eps = schedule.eps;
    let z = params.z as f64;
    Ok(PackingResult {
        params: *params,
        seed,
        eps,
        p: schedule.p,
        alpha: schedule.alpha,
        schedule_t: schedule.t_stop,
        rounds_run: per_round.len(),
        stop_reason,
        nu_q_even: params.nu_q % 2 == 0,
        two_q_divides_n: params.two_q_divides_n(),
        per_round,
        cycles,
        cycle_origin: origin,
        total_edges: total,
        covered_edges: covered,
        lost_edges: lost,
        final_residual: current.edge_count(),
        uncovered_fraction,
        covered_fraction: 1.0 - uncovered_fraction,
        eps_alpha: eps.powf(schedule.alpha),
        leftover_target: schedule
            .t_stop
            .filter(|&t| t > 0)
            .map(|t| (12.0 * z * z * schedule.eps_t[t - 1]).powf(0.125)),
    })
}

/// Every cycle edge lies in `h` and no edge appears twice across all cycles.
pub fn check_global_disjointness(h: &KGraph, cycles: &[TypeLCycle]) -> Result<()> {
    let mut seen: FxHashSet<&Edge> = FxHashSet::default();
    for (ci, c) in cycles.iter().enumerate() {
        for e in &c.edge_sequence {
            if !h.contains_edge(e) {
                return Err(Error::Invariant(format!(
                    "cycle {ci} uses {e:?}, not an edge of H"
                )));
            }
            if !seen.insert(e) {
                return Err(Error::Invariant(format!(
                    "edge {e:?} appears in two cycles"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::compute_schedule;

    fn overrides(kappa: f64, r: usize) -> PeelConfig {
        PeelConfig {
            overrides: Overrides {
                kappa: Some(kappa),
                r: Some(r),
            },
            max_rounds: Some(1),
            ..Default::default()
        }
    }

    #[test]
    fn zero_rounds() {
        let params = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        let s = compute_schedule(&params, 1.0, 0.3).unwrap();
        let cfg = PeelConfig {
            max_rounds: Some(0),
            ..overrides(3.0, 20)
        };
        let res = run_peeling(&h, &params, &s, &cfg, 1).unwrap();
        assert!(res.cycles.is_empty());
        assert_eq!(res.uncovered_fraction, 1.0);
    }

    #[test]
    fn single_digraph_round_packs() {
        // r = 1 keeps every arc; the complete digraph on 4 vertices has at
        // most 2 arc-disjoint Hamilton cycles
        let params = Params::derive(3, 1, 8).unwrap();
        let h = KGraph::complete(8, 3);
        let s = compute_schedule(&params, 1.0, 0.3).unwrap();
        let res = run_peeling(&h, &params, &s, &overrides(3.0, 1), 5).unwrap();
        assert_eq!(res.per_round[0].filtered_edges, 24);
        assert_eq!(res.cycles.len(), 2);
        assert_eq!(res.covered_edges, 16);
        assert_eq!(res.lost_edges, 8);
        assert!(res.uncovered_fraction < 1.0);
        let again = run_peeling(&h, &params, &s, &overrides(3.0, 1), 5).unwrap();
        assert_eq!(
            serde_json::to_string(&res).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }
}
