use netpart_core::clock::FrozenClock;
use netpart_core::dmpc::{reassemble, split_system};
use netpart_core::exact::{
    branch_and_bound, brute_force_partition, BnbOptions, Objective, PairForm,
};
use netpart_core::fsu::{select_fsus, FsuCollection};
use netpart_core::generate::{gen_generic, gen_random_fsu, GenericSpec, RandomFsuSpec};
use netpart_core::graph::{build_linear_graph, EquivalentGraph, Subgraph, Vertex};
use netpart_core::greedy::{greedy_partition, refine_partition};
use netpart_core::metrics::{
    condensed_components, delta_from_partition, index_quadratic, index_ratio, quadratic_of_labels,
    w_inter, w_intra, IndexConfig, Partition,
};
use proptest::prelude::*;

fn random_fsu(seed: u64, n: usize, density: f64) -> (EquivalentGraph, FsuCollection) {
    let model = gen_random_fsu(&RandomFsuSpec {
        n_fsus: n,
        density,
        seed,
        ..RandomFsuSpec::default()
    });
    let g = build_linear_graph(model.as_linear().unwrap());
    let coll = select_fsus(&g).unwrap();
    (g, coll)
}

fn generic(seed: u64, n: usize, p: usize) -> (EquivalentGraph, FsuCollection) {
    let gs = gen_generic(&GenericSpec {
        n,
        p,
        density: 0.05,
        seed,
        planted: false,
    });
    let g = build_linear_graph(&gs.system);
    let coll = select_fsus(&g).unwrap();
    (g, coll)
}

/// Labels drawn freely, then canonicalized by the partition constructor.
fn labels(n: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..n, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn intra_plus_half_inter_is_total_mass(seed in 0u64..1000, raw in labels(12)) {
        let (g, coll) = random_fsu(seed, 12, 0.3);
        let p = Partition::from_labels(&raw);
        let lhs = w_intra(&g, &coll, &p) + 0.5 * w_inter(&g, &coll, &p);
        let total = g.total_mass();
        prop_assert!((lhs - total).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn condensed_mass_equals_graph_mass(seed in 0u64..1000) {
        let (g, coll) = generic(seed, 30, 6);
        let total = g.total_mass();
        prop_assert!((coll.total_mass() - total).abs() <= 1e-9 * total);
    }

    #[test]
    fn node_and_condensed_ratio_agree(seed in 0u64..1000, raw in labels(10), alpha in 0.0f64..20.0) {
        let (g, coll) = random_fsu(seed, 10, 0.4);
        let p = Partition::from_labels(&raw);
        let cfg = IndexConfig::new(alpha).unwrap();
        let node = index_ratio(&g, &coll, &p, &cfg);
        let cond = condensed_components(&coll, &p, &cfg).ratio(alpha);
        prop_assert!((node - cond).abs() <= 1e-9 * node.abs().max(1.0));
    }

    #[test]
    fn no_edge_ends_in_an_input(seed in 0u64..1000) {
        let (g, _) = generic(seed, 40, 8);
        prop_assert!(g.edges().iter().all(|e| e.target.is_state()));
    }

    #[test]
    fn fsus_cover_disjointly_and_are_csus(seed in 0u64..1000) {
        let (g, coll) = generic(seed, 40, 8);
        prop_assert!(coll.len() <= 8);
        let mut seen_x = vec![0usize; 40];
        let mut seen_u = [0usize; 8];
        for f in coll.fsus() {
            prop_assert!(!f.inputs.is_empty() && !f.states.is_empty());
            f.states.iter().for_each(|&x| seen_x[x] += 1);
            f.inputs.iter().for_each(|&u| seen_u[u] += 1);
            prop_assert!(f.subgraph(&g).is_csu());
        }
        prop_assert!(seen_x.iter().all(|&c| c == 1));
        prop_assert!(seen_u.iter().all(|&c| c == 1));
    }

    #[test]
    fn aggregated_fsus_remain_csus(seed in 0u64..1000, raw in labels(8)) {
        let (g, coll) = generic(seed, 32, 8);
        let p = Partition::from_labels(&raw[..coll.len()]);
        for b in 0..p.block_count() {
            let mut members = p.blocks()[b].iter().map(|&f| coll.fsus()[f].subgraph(&g));
            let first = members.next().unwrap();
            let merged = members.fold(first, |acc, s| acc.aggregate(&s).unwrap());
            prop_assert!(merged.is_csu());
            let direct = Subgraph::new(&g, p.block_nodes(&coll, b)).unwrap();
            prop_assert_eq!(merged.nodes(), direct.nodes());
        }
    }

    #[test]
    fn quadratic_forms_agree(seed in 0u64..1000, raw in labels(9), alpha in 0.0f64..10.0) {
        let (_, coll) = random_fsu(seed, 9, 0.3);
        let p = Partition::from_labels(&raw);
        let cfg = IndexConfig::new(alpha).unwrap();
        let literal = index_quadratic(&delta_from_partition(&p), &coll, &cfg);
        let fast = quadratic_of_labels(&coll, &p.labels(), alpha);
        let pair = PairForm::new(&coll, alpha).value(&p.labels());
        let scale = literal.abs().max(1.0);
        prop_assert!((literal - fast).abs() <= 1e-9 * scale);
        prop_assert!((literal - pair).abs() <= 1e-9 * scale);
    }

    #[test]
    fn partitions_are_equal_up_to_relabeling(raw in labels(10), shift in 1usize..10) {
        let permuted: Vec<usize> = raw.iter().map(|&l| (l + shift) % 10).collect();
        prop_assert_eq!(Partition::from_labels(&raw), Partition::from_labels(&permuted));
    }

    #[test]
    fn refinement_never_lowers_the_ratio(seed in 0u64..1000, alpha in 0.0f64..30.0) {
        let (_, coll) = random_fsu(seed, 10, 0.3);
        let cfg = IndexConfig::new(alpha).unwrap();
        let g = greedy_partition(&coll, &cfg);
        let r = refine_partition(&coll, &g, &cfg);
        let before = condensed_components(&coll, &g, &cfg).ratio(alpha);
        let after = condensed_components(&coll, &r, &cfg).ratio(alpha);
        prop_assert!(after >= before - 1e-12 * before.abs().max(1.0));
    }

    #[test]
    fn branch_and_bound_matches_brute_force(seed in 0u64..1000, alpha in 0.0f64..4.0) {
        let (_, coll) = random_fsu(seed, 7, 0.4);
        let cfg = IndexConfig::new(alpha).unwrap();
        let (_, best) = brute_force_partition(&coll, &cfg, Objective::Quadratic).unwrap();
        let r = branch_and_bound(&coll, &cfg, BnbOptions::default(), &FrozenClock);
        prop_assert!(r.is_optimal());
        prop_assert!((r.value - best).abs() <= 1e-9 * best.abs().max(1.0));
    }

    #[test]
    fn split_reassembles_exactly(seed in 0u64..1000, raw in labels(8)) {
        let gs = gen_generic(&GenericSpec { n: 24, p: 8, density: 0.1, seed, planted: false });
        let g = build_linear_graph(&gs.system);
        let coll = select_fsus(&g).unwrap();
        let p = Partition::from_labels(&raw[..coll.len()]);
        let csus = split_system(&gs.system, &p, &coll).unwrap();
        let (a, b) = reassemble(&csus, 24, 8);
        prop_assert_eq!(&a, gs.system.a());
        prop_assert_eq!(&b, gs.system.b());
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>()) {
        let spec = GenericSpec { n: 20, p: 4, density: 0.1, seed, planted: true };
        prop_assert_eq!(gen_generic(&spec), gen_generic(&spec));
        let spec = RandomFsuSpec { seed, pwa: true, ..RandomFsuSpec::default() };
        let (a, b) = (gen_random_fsu(&spec), gen_random_fsu(&spec));
        prop_assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}

#[test]
fn input_vertices_only_feed_states() {
    let (g, _) = generic(7, 50, 10);
    for v in g.vertices().filter(|v| v.is_input()) {
        assert_eq!(g.in_edges(v).count(), 0);
    }
    assert!(g.contains(Vertex::Input(9)) && !g.contains(Vertex::Input(10)));
}
