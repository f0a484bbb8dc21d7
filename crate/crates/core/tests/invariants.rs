use hyperpack::packer::validate_packing;
use hyperpack::procedure::check_procedure_output;
use hyperpack::rng::{stream_rng, Stream};
use hyperpack::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn shuffled(n: usize, seed: u64) -> Vec<u32> {
    let mut v: Vec<u32> = (1..=n as u32).collect();
    v.shuffle(&mut stream_rng(seed, Stream::Sample, &[n as u64]));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn indexed_and_plain_counts_agree(seed in any::<u64>(), p in 0.3f64..1.0, d in 1usize..3) {
        let h = KGraph::random(10, 4, p, seed).unwrap();
        let perm = shuffled(10, seed);
        let a = vec![perm[0..4 - d].to_vec(), perm[3..7 - d].to_vec()];
        prop_assert_eq!(h.count_extensions(&a, d).unwrap(), h.count_extensions_unindexed(&a, d).unwrap());
    }

    #[test]
    fn relabelling_preserves_extension_counts(seed in any::<u64>()) {
        let h = KGraph::random(9, 3, 0.6, seed).unwrap();
        let perm = shuffled(9, seed ^ 1);
        let g = h.relabel(&perm).unwrap();
        let sets = [vec![1u32, 2], vec![2, 5]];
        let image: Vec<Vec<u32>> = sets.iter().map(|s| s.iter().map(|&v| perm[v as usize - 1]).collect()).collect();
        prop_assert_eq!(h.count_extensions(&sets, 1).unwrap(), g.count_extensions(&image, 1).unwrap());
        prop_assert_eq!(h.edge_count(), g.edge_count());
    }

    #[test]
    fn remove_then_add_restores(seed in any::<u64>(), take in 0usize..20) {
        let h = KGraph::random(8, 3, 0.5, seed).unwrap();
        let removed: Vec<Edge> = h.edges().iter().take(take).cloned().collect();
        let back = h.remove_edges(&removed).unwrap().add_edges(removed.clone()).unwrap();
        prop_assert_eq!(back.edges(), h.edges());
    }

    #[test]
    fn ownership_partition_on_random_graphs(seed in any::<u64>(), p in 0.2f64..1.0) {
        let params = Params::derive(4, 1, 12).unwrap();
        let h = KGraph::random(12, 4, p, seed).unwrap();
        let sigma = Permutation::random(12, &mut stream_rng(seed, Stream::Permutation, &[0]));
        let d = build_digraph(&h, &sigma, &params).unwrap();
        prop_assert!(check_ownership_partition(&d));
        let back = ShiftDigraph::read_dump(d.to_dump().as_bytes()).unwrap();
        prop_assert_eq!(back.arcs(), d.arcs());
        prop_assert_eq!(back.owned_lists(), d.owned_lists());
    }

    #[test]
    fn packings_validate(seed in any::<u64>(), nu in 3usize..9, p in 0.3f64..1.0) {
        let d = Digraph::random(nu, p, seed).unwrap();
        let packing = pack_hamilton_cycles(&d, &PackerConfig::default(), seed);
        prop_assert!(validate_packing(&d, &packing).is_ok());
        if nu <= 7 {
            let exact = exact_max_packing(&d).unwrap();
            prop_assert!(packing.cycles.len() <= exact.cycles.len());
        }
    }

    #[test]
    fn digraph_relabel_keeps_regularity(seed in any::<u64>()) {
        let d = Digraph::random(7, 0.5, seed).unwrap();
        let mut perm: Vec<usize> = (0..7).collect();
        perm.shuffle(&mut stream_rng(seed, Stream::Sample, &[9]));
        let cfg = DigraphAuditConfig::default();
        let a = audit_digraph_regularity(&d, 0.5, &cfg).unwrap();
        let b = audit_digraph_regularity(&d.relabel(&perm).unwrap(), 0.5, &cfg).unwrap();
        prop_assert_eq!(a.eps_hat, b.eps_hat);
    }
}

#[test]
fn procedure_low_memory_matches_full() {
    let params = Params::derive(3, 1, 12).unwrap();
    let h = KGraph::random(12, 3, 0.8, 11).unwrap();
    let pp = compute_procedure_params(
        &params,
        0.8,
        0.1,
        Overrides {
            kappa: Some(5.0),
            r: Some(25),
        },
        1e6,
    )
    .unwrap();
    let full = run_procedure1_with(
        &h,
        &params,
        &pp,
        3,
        &ProcedureConfig {
            memory: hyperpack::procedure::MemoryMode::Full,
            ..Default::default()
        },
    )
    .unwrap();
    let low = run_procedure1_with(
        &h,
        &params,
        &pp,
        3,
        &ProcedureConfig {
            memory: hyperpack::procedure::MemoryMode::Low,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(check_procedure_output(&h, &full).is_ok());
    assert!(check_procedure_output(&h, &low).is_ok());
    assert_eq!(full.filtered, low.filtered);
    assert_eq!(full.labels, low.labels);
    assert_eq!(full.residual, low.residual);
}

#[test]
fn lifted_cycles_are_type_ell_cycles_of_h() {
    for (k, ell, n) in [(4, 1, 9), (7, 3, 12), (5, 2, 8)] {
        let params = match Params::derive(k, ell, n) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let h = KGraph::complete(n, k);
        let d = build_digraph(&h, &Permutation::identity(n), &params).unwrap();
        for c in hamilton_cycles(&d.to_digraph()).into_iter().take(50) {
            let cyc = lift_cycle(&d, &c).unwrap();
            assert_eq!(cyc.edge_sequence.len(), params.nu_ell);
            assert!(validate_type_l_cycle(&h, &cyc, &params).is_ok());
        }
    }
}

#[test]
fn peel_on_random_graph_conserves_edges() {
    let params = Params::derive(3, 1, 12).unwrap();
    let h = KGraph::random(12, 3, 0.9, 5).unwrap();
    let schedule = compute_schedule(&params, 0.9, 0.3).unwrap();
    let cfg = PeelConfig {
        overrides: Overrides {
            kappa: Some(2.0),
            r: Some(3),
        },
        max_rounds: Some(3),
        ..Default::default()
    };
    let res = run_peeling(&h, &params, &schedule, &cfg, 9).unwrap();
    assert_eq!(
        res.covered_edges + res.lost_edges + res.final_residual,
        res.total_edges
    );
    assert_eq!(res.covered_edges, res.cycles.len() * params.nu_ell);
    for c in &res.cycles {
        assert!(validate_type_l_cycle(&h, c, &params).is_ok());
    }
}
