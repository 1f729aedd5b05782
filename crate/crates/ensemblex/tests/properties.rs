//! Randomized invariants over small inputs, where brute force is cheap
//! enough to act as the ground truth.


use proptest::prelude::*;

use ensemblex::canonical::{log_prob, solve_model, solve_unipartite, SolveOptions};
use ensemblex::entropy::{
    binomial_kl, poisson_kl, relative_entropy_direct_kl, relative_entropy_exact,
    relative_entropy_with_witness,
};
use ensemblex::graphical::{erdos_gallai, gale_ryser, realize_bipartite, realize_unipartite};
use ensemblex::microcanonical::{count_exact_bipartite, count_exact_unipartite, CountMethod};
use ensemblex::model::{
    bipartite_degree_model, unipartite_degree_model, MasterGraph, MultilayerGraph,
};
use ensemblex::structure::{block_modularity, modularity, BlockLinkMatrix, Partition};

/// Random simple graph on n nodes from an edge bitmask.
fn graph_from_mask(n: usize, mask: u64) -> MultilayerGraph {
    let mut g = MultilayerGraph::single_layer(n);
    let mut b = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if mask >> b & 1 == 1 {
                g.add_edge(i, j);
            }
            b += 1;
        }
    }
    g
}

fn degrees(g: &MultilayerGraph) -> Vec<usize> {
    (0..g.n()).map(|i| g.degree(i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Erdos-Gallai agrees with brute-force fiber non-emptiness
    #[test]
    fn erdos_gallai_matches_enumeration(k in proptest::collection::vec(0usize..6, 2..7)) {
        let n = k.len();
        let spec = unipartite_degree_model(k.clone());
        let mut found = false;
        spec.enumerate_admissible_graphs(|g| {
            if !found && spec.is_realization(g) {
                found = true;
            }
        }).unwrap();
        prop_assert_eq!(erdos_gallai(&k), found, "k={:?} max degree may exceed n-1={}", k, n - 1);
    }

    #[test]
    fn gale_ryser_matches_enumeration(
        rows in proptest::collection::vec(0usize..4, 1..4),
        cols in proptest::collection::vec(0usize..4, 1..4),
    ) {
        let feasible = count_exact_bipartite(&rows, &cols).unwrap() > 0;
        prop_assert_eq!(gale_ryser(&rows, &cols), feasible);
    }

    // counting is a function of the degree multiset, not the labels
    #[test]
    fn exact_count_is_permutation_invariant(mask in 0u64..(1 << 15)) {
        let g = graph_from_mask(6, mask);
        let k = degrees(&g);
        let mut shuffled = k.clone();
        shuffled.reverse();
        shuffled.swap(0, 2);
        prop_assert_eq!(
            count_exact_unipartite(&k).unwrap(),
            count_exact_unipartite(&shuffled).unwrap()
        );
    }

    // realized witnesses hit their degree targets exactly
    #[test]
    fn realizations_match_degrees(mask in 0u64..(1 << 21)) {
        let g = graph_from_mask(7, mask);
        let k = degrees(&g);
        let w = realize_unipartite(&k).unwrap();
        prop_assert_eq!(degrees(&w), k);
    }

    #[test]
    fn bipartite_realizations_match_degrees(mask in 0u64..(1 << 12)) {
        // 3x4 bipartite pattern
        let mut rows = vec![0usize; 3];
        let mut cols = vec![0usize; 4];
        for i in 0..3 {
            for j in 0..4 {
                if mask >> (i * 4 + j) & 1 == 1 {
                    rows[i] += 1;
                    cols[j] += 1;
                }
            }
        }
        let w = realize_bipartite(&rows, &cols).unwrap();
        for (i, &r) in rows.iter().enumerate() {
            prop_assert_eq!(w.degree(i), r);
        }
        for (j, &c) in cols.iter().enumerate() {
            prop_assert_eq!(w.degree(3 + j), c);
        }
    }

    // solver residuals honor the tolerance and probabilities stay in range
    #[test]
    fn solver_meets_tolerance(mask in 0u64..(1 << 28)) {
        let g = graph_from_mask(8, mask);
        let k = degrees(&g);
        let b = solve_unipartite(&k, SolveOptions::default()).unwrap();
        prop_assert!(b.residual <= 1e-10);
        for i in 0..8 {
            for j in 0..8 {
                let p = b.p_at(i, j);
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    // the canonical measure is a probability measure
    #[test]
    fn canonical_normalizes(mask in 0u64..(1 << 10)) {
        let g = graph_from_mask(5, mask);
        let spec = unipartite_degree_model(degrees(&g));
        let sol = solve_model(&spec, SolveOptions::default()).unwrap();
        let mut total = 0.0;
        spec.enumerate_admissible_graphs(|h| {
            let lp = log_prob(&spec, &sol, h).unwrap();
            if lp > f64::NEG_INFINITY {
                total += lp.exp();
            }
        }).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-8, "total = {}", total);
    }

    // the relative entropy does not depend on which fiber member is used
    #[test]
    fn entropy_witness_independent(mask in 0u64..(1 << 10)) {
        let g = graph_from_mask(5, mask);
        let spec = unipartite_degree_model(degrees(&g));
        let base = relative_entropy_exact(&spec, CountMethod::Exact, SolveOptions::default())
            .unwrap()
            .s_total();
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        spec.enumerate_admissible_graphs(|h| {
            if checked < 5 && spec.is_realization(h) {
                let s = relative_entropy_with_witness(
                    &spec, h, CountMethod::Exact, SolveOptions::default(),
                ).unwrap().s_total();
                worst = worst.max((s - base).abs());
                checked += 1;
            }
        }).unwrap();
        prop_assert!(worst < 1e-9, "spread {}", worst);
    }

    // witness route and definition-route KL agree
    #[test]
    fn exact_entropy_equals_direct_kl(mask in 0u64..(1 << 10)) {
        let g = graph_from_mask(5, mask);
        let spec = unipartite_degree_model(degrees(&g));
        let a = relative_entropy_exact(&spec, CountMethod::Exact, SolveOptions::default())
            .unwrap()
            .s_total();
        let b = relative_entropy_direct_kl(&spec).unwrap();
        prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
    }

    // finite-size degree weight sits below its limit and closes in
    #[test]
    fn binomial_weight_below_poisson(k in 1u64..20) {
        let g = poisson_kl(k);
        let mut prev = f64::INFINITY;
        for n in [k + 1, 2 * k + 4, 50 * (k + 1), 5000 * (k + 1)] {
            let gn = binomial_kl(n, k);
            prop_assert!(gn < g);
            let gap = g - gn;
            prop_assert!(gap < prev);
            prev = gap;
        }
    }

    // block form never exceeds the pairwise modularity of the same split
    // (they differ by the diagonal null terms, which are non-negative)
    #[test]
    fn block_modularity_lower_bounds_pairwise(mask in 1u64..(1 << 15)) {
        let flat = graph_from_mask(6, mask);
        if flat.link_count() == 0 {
            return Ok(());
        }
        // same adjacency viewed as a 2-layer graph
        let mut g = MultilayerGraph::new(&[3, 3]);
        for (i, j) in flat.edges() {
            g.add_edge(i, j);
        }
        let sigma = Partition::from_layers(&g);
        let q = modularity(&g, &sigma, None).unwrap();
        let l = BlockLinkMatrix::from_partition(&g, &sigma).unwrap();
        let qb = block_modularity(&l, None).unwrap();
        prop_assert!(qb <= q + 1e-12, "qb={} q={}", qb, q);
    }

    // mixed multilayer fibers factorize: blockwise count == enumeration
    #[test]
    fn block_counts_match_enumeration(
        mask_a in 0u64..(1 << 3),
        l in 0usize..7,
        mask_b in 0u64..(1 << 1),
    ) {
        // layer 0: 3 nodes with intra degrees; layer 1: 2 nodes;
        // cross pair carries a link count, intra-1 from mask_b
        let a = graph_from_mask(3, mask_a);
        let b = graph_from_mask(2, mask_b);
        let mut spec = unipartite_degree_model(degrees(&a));
        spec.master = MasterGraph::complete_with_loops(2);
        spec.layer_sizes = vec![3, 2];
        spec.constraints.set_intra_degrees(1, degrees(&b));
        spec.constraints.set_link_count(0, 1, l.min(6));
        let blockwise = ensemblex::microcanonical::count_model(&spec, CountMethod::Exact)
            .unwrap()
            .ln_omega();
        let mut direct = 0u64;
        spec.enumerate_admissible_graphs(|h| {
            if spec.is_realization(h) {
                direct += 1;
            }
        }).unwrap();
        if direct == 0 {
            prop_assert!(blockwise == f64::NEG_INFINITY);
        } else {
            prop_assert!((blockwise - (direct as f64).ln()).abs() < 1e-12);
        }
    }
}

#[test]
fn bipartite_counts_match_enumeration_grid() {
    // every bi-degree pair on a 2x3 grid
    for mask in 0u64..(1 << 6) {
        let mut rows = vec![0usize; 2];
        let mut cols = vec![0usize; 3];
        for i in 0..2 {
            for j in 0..3 {
                if mask >> (i * 3 + j) & 1 == 1 {
                    rows[i] += 1;
                    cols[j] += 1;
                }
            }
        }
        let spec = bipartite_degree_model(rows.clone(), cols.clone());
        let mut direct = 0u128;
        spec.enumerate_admissible_graphs(|h| {
            if spec.is_realization(h) {
                direct += 1;
            }
        })
        .unwrap();
        assert_eq!(count_exact_bipartite(&rows, &cols).unwrap(), direct);
    }
}

#[test]
fn multiplex_blocks_solve_independently() {
    // two layers, each 4 nodes of degree 1: the solved cross-block of a
    // loops-only master does not exist, and each intra block is p = 1/3
    let spec = ensemblex::structure::build_family(&ensemblex::structure::Family::Multiplex {
        total_nodes: 8,
        layer_degrees: vec![vec![1; 4], vec![1; 4]],
    })
    .unwrap();
    let sol = solve_model(&spec, SolveOptions::default()).unwrap();
    assert_eq!(sol.blocks.len(), 2);
    for b in &sol.blocks {
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!((b.p_at(i, j) - 1.0 / 3.0).abs() < 1e-10);
                }
            }
        }
    }
    // per-block fiber: 3 matchings each, ln(3*3) total
    let c = ensemblex::microcanonical::count_model(&spec, CountMethod::Exact).unwrap();
    assert!((c.ln_omega() - 9.0f64.ln()).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // community condition is exactly the sign of the block-form modularity
    #[test]
    fn condition_is_block_sign(entries in proptest::collection::vec(0u64..6, 3)) {
        let m = [
            2 * entries[0], entries[1],
            entries[1], 2 * entries[2],
        ];
        if m.iter().sum::<u64>() == 0 {
            return Ok(());
        }
        let l = BlockLinkMatrix::from_entries(2, &m).unwrap();
        let cond = ensemblex::structure::community_condition(&l).unwrap();
        let q = block_modularity(&l, None).unwrap();
        // entries are small, so the float arithmetic is exact
        prop_assert_eq!(cond, q > 0.0, "m={:?} q={}", m, q);
    }
}
