//! Relative entropy between the two ensembles, exactly at finite size and
//! in the large-size limit.
//!
//! The per-node relative entropy decides equivalence: zero limit means the
//! ensembles agree on their typical graphs, positive limit means they
//! never do, no matter how large the system.

use std::collections::BTreeMap;

use crate::canonical::{solve_model, BlockSolution, CanonicalSolution, SolveOptions};
use crate::graphical::realize_model;
use crate::logspace::{ln_factorial, ln_one_minus};
use crate::microcanonical::{count_model, count_top_only, CountMethod};
use crate::model::{
    DegreeDistribution, LayerLimits, MasterGraph, ModelSpec, MultilayerGraph,
};
use crate::{Error, Result};

/// KL divergence of a point mass at k from a Poisson law with mean k:
///   ln k! - k ln k + k,   zero at k = 0.
/// This is the per-node price of pinning a degree exactly.
pub fn poisson_kl(k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k < 32 {
        let kf = k as f64;
        return ln_factorial(k) - kf * kf.ln() + kf;
    }
    // Stirling tail of ln k! - (k ln k - k); no cancellation at large k
    let kf = k as f64;
    let k2 = kf * kf;
    0.5 * (2.0 * std::f64::consts::PI * kf).ln() + 1.0 / (12.0 * kf) - 1.0 / (360.0 * k2 * kf)
        + 1.0 / (1260.0 * k2 * k2 * kf)
}

/// Same quantity evaluated the slow way, straight from the Poisson mass
/// function. Kept as an independent cross-check of [`poisson_kl`].
pub fn poisson_kl_via_pmf(k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    use statrs::distribution::{Discrete, Poisson};
    let d = Poisson::new(k as f64).expect("positive mean");
    -d.pmf(k).ln()
}

/// KL divergence of a point mass at k from a Binomial(n, k/n) law:
///   -ln [ C(n,k) (k/n)^k (1-k/n)^(n-k) ]   for 0 <= k <= n.
/// Outside that range the weight is defined as zero. Converges to
/// [`poisson_kl`] from below as n grows with k fixed.
pub fn binomial_kl(n: u64, k: u64) -> f64 {
    if k == 0 || k >= n {
        // k = n gives C(n,n) 1^n 0^0 = 1; k > n is outside the support
        return 0.0;
    }
    let (nf, kf) = (n as f64, k as f64);
    // -ln C(n,k) - k ln(k/n) = ln k! - k ln k - sum_i ln(1 - i/n)
    let mut v = ln_factorial(k) - kf * kf.ln();
    for i in 0..k {
        v -= ln_one_minus(i as f64 / nf);
    }
    v - (nf - kf) * ln_one_minus(kf / nf)
}

/// Which per-degree weight to integrate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostWeight {
    /// The Poisson weight of the proportional-growth limit.
    Poisson,
    /// The Binomial weight of a fixed opposite layer of size n.
    Binomial(u64),
}

/// sum_k f(k) w(k): the weighted first moment that every limit formula
/// reduces to.
pub fn l1_norm(f: &DegreeDistribution, w: CostWeight) -> f64 {
    f.iter()
        .map(|(k, p)| {
            p * match w {
                CostWeight::Poisson => poisson_kl(k),
                CostWeight::Binomial(n) => binomial_kl(n, k),
            }
        })
        .sum()
}

/// One block's share of the relative entropy.
#[derive(Debug, Clone)]
pub struct BlockEntropy {
    pub pair: (usize, usize),
    pub ln_omega: f64,
    /// ln of the canonical probability of the block's witness pattern.
    pub ln_p_canonical: f64,
    /// -ln_omega - ln_p_canonical.
    pub s: f64,
    pub exact_count: bool,
}

/// Exact finite-size relative entropy with its per-block decomposition.
#[derive(Debug, Clone)]
pub struct EntropyReport {
    pub blocks: Vec<BlockEntropy>,
    pub n: usize,
    /// Link counts of the witness per block, recorded so a report can be
    /// traced back to the configuration that produced it.
    pub witness_links: BTreeMap<(usize, usize), usize>,
}

impl EntropyReport {
    pub fn s_total(&self) -> f64 {
        self.blocks.iter().map(|b| b.s).sum()
    }

    pub fn s_per_node(&self) -> f64 {
        self.s_total() / self.n as f64
    }

    pub fn all_exact(&self) -> bool {
        self.blocks.iter().all(|b| b.exact_count)
    }
}

/// ln of the probability the solved block assigns to the witness pattern
/// restricted to that block.
fn block_witness_log_prob(
    b: &BlockSolution,
    g: &MultilayerGraph,
) -> f64 {
    let (s, t) = b.pair;
    let (rs, rt) = (g.layer_range(s), g.layer_range(t));
    let (offs, offt) = (rs.start, rt.start);
    let mut lp = 0.0;
    let mut cell = |p: f64, present: bool| {
        if present {
            lp += if p == 0.0 { f64::NEG_INFINITY } else { p.ln() };
        } else {
            lp += if p == 1.0 { f64::NEG_INFINITY } else { ln_one_minus(p) };
        }
    };
    if s == t {
        for i in rs.clone() {
            for j in (i + 1)..rt.end {
                cell(b.p_at(i - offs, j - offt), g.has_edge(i, j));
            }
        }
    } else {
        for i in rs.clone() {
            for j in rt.clone() {
                cell(b.p_at(i - offs, j - offt), g.has_edge(i, j));
            }
        }
    }
    lp
}

/// S_n = ln P_mic(G*) - ln P_can(G*) evaluated on a deterministic witness
/// G* of the constraints. The value does not depend on the witness: the
/// canonical probability is a function of the constraints alone.
pub fn relative_entropy_exact(
    spec: &ModelSpec,
    method: CountMethod,
    opts: SolveOptions,
) -> Result<EntropyReport> {
    let witness = realize_model(spec)?;
    relative_entropy_with_witness(spec, &witness, method, opts)
}

/// Same computation on a caller-supplied realization, used to demonstrate
/// witness independence.
pub fn relative_entropy_with_witness(
    spec: &ModelSpec,
    witness: &MultilayerGraph,
    method: CountMethod,
    opts: SolveOptions,
) -> Result<EntropyReport> {
    if !spec.is_realization(witness) {
        return Err(Error::InvalidInput(
            "witness does not realize the constraints".into(),
        ));
    }
    let counts = count_model(spec, method)?;
    let sol: CanonicalSolution = solve_model(spec, opts)?;
    let mut blocks = Vec::new();
    for (bc, bs) in counts.blocks.iter().zip(sol.blocks.iter()) {
        debug_assert_eq!(bc.pair, bs.pair);
        let lp = block_witness_log_prob(bs, witness);
        blocks.push(BlockEntropy {
            pair: bc.pair,
            ln_omega: bc.ln_omega,
            ln_p_canonical: lp,
            s: -bc.ln_omega - lp,
            exact_count: bc.exact,
        });
    }
    Ok(EntropyReport {
        blocks,
        n: spec.n(),
        witness_links: witness.block_link_counts(),
    })
}

/// Relative entropy straight from its definition, as the expected log
/// ratio over the full graph space. Exponential in the admissible pairs,
/// usable only as a desk-scale cross-check.
pub fn relative_entropy_direct_kl(spec: &ModelSpec) -> Result<f64> {
    let sol = solve_model(spec, SolveOptions::default())?;
    let mut fiber: Vec<f64> = Vec::new();
    spec.enumerate_admissible_graphs(|g| {
        if spec.is_realization(g) {
            fiber.push(
                crate::canonical::log_prob(spec, &sol, g).expect("dimensions match"),
            );
        }
    })?;
    if fiber.is_empty() {
        return Err(Error::Infeasible("empty fiber".into()));
    }
    let omega = fiber.len() as f64;
    let ln_pmic = -omega.ln();
    Ok(fiber.iter().map(|&lp| (ln_pmic - lp) / omega).sum())
}

/// Exact S_n for the bipartite block constrained on the row side only:
/// both ensembles factor over rows, giving sum_i of the binomial weight.
pub fn s_n_top_only(k: &[usize], n2: usize) -> Result<(f64, f64)> {
    let ln_omega = count_top_only(k, n2)?;
    if ln_omega == f64::NEG_INFINITY {
        return Err(Error::Infeasible("row degree exceeds n2".into()));
    }
    // canonical witness probability: row i contributes
    // k_i ln(k_i/n2) + (n2 - k_i) ln(1 - k_i/n2)
    let mut ln_p = 0.0;
    for &ki in k {
        if ki == 0 || ki == n2 {
            continue;
        }
        let (kf, nf) = (ki as f64, n2 as f64);
        ln_p += kf * (kf / nf).ln() + (nf - kf) * ln_one_minus(kf / nf);
    }
    let s = -ln_omega - ln_p;
    let n = k.len() + n2;
    Ok((s, s / n as f64))
}

/// How the two sides of a one-sided bipartite block grow in the limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopOnlyRegime {
    /// Constrained side fixed, free side grows.
    ConstrainedFixed,
    /// Both grow, free side much faster.
    FreeSideDominates,
    /// Free side pinned at n2 while the constrained side grows.
    FreeSideFixed { n2: u64 },
    /// Free side = c times the constrained side, both growing.
    Proportional { c: f64 },
}

/// Per-node limit for the one-sided bipartite block. The regime is part of
/// the problem statement: the same degree distribution gives different
/// limits along different growth paths.
pub fn s_infinity_top_only(f: &DegreeDistribution, regime: TopOnlyRegime) -> f64 {
    match regime {
        TopOnlyRegime::ConstrainedFixed | TopOnlyRegime::FreeSideDominates => 0.0,
        TopOnlyRegime::FreeSideFixed { n2 } => l1_norm(f, CostWeight::Binomial(n2)),
        TopOnlyRegime::Proportional { c } => l1_norm(f, CostWeight::Poisson) / (1.0 + c),
    }
}

/// Statement of a thermodynamic limit: the master graph, the limiting
/// layer fractions, a limiting targeted degree distribution for every
/// ordered degree-constrained pair, and the list of count-constrained
/// pairs (unordered). All layers are assumed to grow in proportion.
#[derive(Debug, Clone)]
pub struct LimitDescriptor {
    pub master: MasterGraph,
    pub limits: LayerLimits,
    pub degree_limits: BTreeMap<(usize, usize), DegreeDistribution>,
    pub count_pairs: Vec<(usize, usize)>,
}

impl LimitDescriptor {
    fn validate(&self) -> Result<()> {
        let m = self.master.layers();
        if self.limits.layers() != m {
            return Err(Error::Dimension("layer fraction count mismatch".into()));
        }
        for (&(s, t), _) in &self.degree_limits {
            if s >= m || t >= m || !self.master.admits(s, t) {
                return Err(Error::InvalidInput(format!(
                    "degree limit on inadmissible pair ({s},{t})"
                )));
            }
        }
        for &(s, t) in &self.count_pairs {
            if s > t || t >= m || !self.master.admits(s, t) {
                return Err(Error::InvalidInput(format!(
                    "count pair ({s},{t}) invalid"
                )));
            }
        }
        // every admissible pair must be covered by exactly one constraint
        for (s, t) in self.master.admissible_pairs() {
            let counted = self.count_pairs.contains(&(s, t));
            let degreed = if s == t {
                self.degree_limits.contains_key(&(s, s))
            } else {
                self.degree_limits.contains_key(&(s, t))
                    && self.degree_limits.contains_key(&(t, s))
            };
            if counted == degreed {
                return Err(Error::InvalidInput(format!(
                    "pair ({s},{t}) must carry exactly one kind of constraint"
                )));
            }
        }
        Ok(())
    }
}

/// Per-node relative entropy in the proportional-growth limit:
///   sum over ordered degree-constrained pairs (s,t) of A_s |f_{s->t}|
/// with the Poisson weight. Count-constrained pairs drop out; only exact
/// degree pins keep the ensembles apart.
pub fn s_infinity(d: &LimitDescriptor) -> Result<f64> {
    d.validate()?;
    Ok(d
        .degree_limits
        .iter()
        .map(|(&(s, _), f)| d.limits.fraction(s) * l1_norm(f, CostWeight::Poisson))
        .sum())
}

/// nats -> bits.
pub fn to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        bipartite_degree_model, unipartite_degree_model, unipartite_link_model,
    };

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn poisson_kl_small_values() {
        assert_eq!(poisson_kl(0), 0.0);
        assert!((poisson_kl(1) - 1.0).abs() < 1e-15);
        assert!((poisson_kl(2) - (2.0 - LN2)).abs() < 1e-14);
        let g3 = 6.0f64.ln() - 3.0 * 3.0f64.ln() + 3.0;
        assert!((poisson_kl(3) - g3).abs() < 1e-14);
    }

    #[test]
    fn poisson_kl_matches_pmf_route() {
        for k in 0..=40 {
            let a = poisson_kl(k);
            let b = poisson_kl_via_pmf(k);
            assert!((a - b).abs() < 1e-10, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn poisson_kl_monotone_and_unbounded() {
        let mut prev = poisson_kl(0);
        for k in 1..200 {
            let v = poisson_kl(k);
            assert!(v > prev, "k={k}");
            prev = v;
        }
        assert!(poisson_kl(1_000_000) > 7.0);
    }

    #[test]
    fn poisson_kl_stirling_band() {
        // g(k) is within 1/(12k) above the half-log term
        for &k in &[1u64, 2, 5, 31, 32, 100, 10_000, 1_000_000] {
            let half_log = 0.5 * (2.0 * std::f64::consts::PI * k as f64).ln();
            let d = poisson_kl(k) - half_log;
            let slack = 4.0 * f64::EPSILON * poisson_kl(k).abs();
            assert!(d > 0.0 && d <= 1.0 / (12.0 * k as f64) + slack, "k={k} d={d}");
        }
    }

    #[test]
    fn binomial_kl_values() {
        assert_eq!(binomial_kl(10, 0), 0.0);
        assert_eq!(binomial_kl(10, 10), 0.0);
        assert!((binomial_kl(4, 2) - (16.0f64 / 6.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn binomial_kl_below_poisson_and_converging() {
        for k in 1..10u64 {
            let g = poisson_kl(k);
            let mut prev_gap = f64::INFINITY;
            for &n in &[20u64, 100, 1000, 10_000] {
                let gn = binomial_kl(n, k);
                assert!(gn < g, "n={n} k={k}");
                let gap = g - gn;
                assert!(gap < prev_gap, "gap not shrinking at n={n} k={k}");
                prev_gap = gap;
            }
        }
    }

    #[test]
    fn l1_norm_of_point_mass() {
        let f = DegreeDistribution::delta(3);
        assert!((l1_norm(&f, CostWeight::Poisson) - poisson_kl(3)).abs() < 1e-15);
        assert!((l1_norm(&f, CostWeight::Binomial(6)) - binomial_kl(6, 3)).abs() < 1e-15);
    }

    #[test]
    fn exact_entropy_matchings_n4() {
        // 1-regular on 4 nodes: 3 graphs, p = 1/3 everywhere
        let spec = unipartite_degree_model(vec![1; 4]);
        let r = relative_entropy_exact(&spec, CountMethod::Exact, SolveOptions::default())
            .unwrap();
        let expect = (729.0f64 / 48.0).ln();
        assert!((r.s_total() - expect).abs() < 1e-8, "{}", r.s_total());
        assert!(r.all_exact());
    }

    #[test]
    fn exact_entropy_link_model_n4() {
        // n=4, L=3: omega = C(6,3) = 20, p = 1/2
        let spec = unipartite_link_model(4, 3);
        let r = relative_entropy_exact(&spec, CountMethod::Exact, SolveOptions::default())
            .unwrap();
        let expect = (64.0f64 / 20.0).ln();
        assert!((r.s_total() - expect).abs() < 1e-12);
    }

    #[test]
    fn exact_matches_direct_kl() {
        for spec in [
            unipartite_degree_model(vec![1, 1, 2, 2]),
            unipartite_degree_model(vec![1; 4]),
            unipartite_link_model(4, 2),
            bipartite_degree_model(vec![2, 1], vec![1, 1, 1]),
        ] {
            let r = relative_entropy_exact(&spec, CountMethod::Exact, SolveOptions::default())
                .unwrap();
            let d = relative_entropy_direct_kl(&spec).unwrap();
            assert!(
                (r.s_total() - d).abs() < 1e-7,
                "exact {} vs direct {}",
                r.s_total(),
                d
            );
        }
    }

    #[test]
    fn witness_independence() {
        // every fiber member gives the same S_n
        let spec = unipartite_degree_model(vec![1, 1, 2, 2]);
        let mut values = Vec::new();
        let mut members = Vec::new();
        spec.enumerate_admissible_graphs(|g| {
            if spec.is_realization(g) {
                members.push(g.clone());
            }
        })
        .unwrap();
        assert!(members.len() >= 2);
        for w in &members {
            let r = relative_entropy_with_witness(
                &spec,
                w,
                CountMethod::Exact,
                SolveOptions::default(),
            )
            .unwrap();
            values.push(r.s_total());
        }
        for v in &values[1..] {
            assert!((v - values[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn top_only_entropy_decomposes_over_rows() {
        let (s, _) = s_n_top_only(&[2, 1], 4).unwrap();
        let expect = binomial_kl(4, 2) + binomial_kl(4, 1);
        assert!((s - expect).abs() < 1e-12);
        let (_, per_node) = s_n_top_only(&[2, 1], 4).unwrap();
        assert!((per_node - expect / 6.0).abs() < 1e-15);
    }

    #[test]
    fn top_only_limit_regimes() {
        let f = DegreeDistribution::delta(2);
        assert_eq!(
            s_infinity_top_only(&f, TopOnlyRegime::ConstrainedFixed),
            0.0
        );
        assert_eq!(
            s_infinity_top_only(&f, TopOnlyRegime::FreeSideDominates),
            0.0
        );
        let v = s_infinity_top_only(&f, TopOnlyRegime::FreeSideFixed { n2: 4 });
        assert!((v - binomial_kl(4, 2)).abs() < 1e-15);
        let v = s_infinity_top_only(&f, TopOnlyRegime::Proportional { c: 1.0 });
        assert!((v - poisson_kl(2) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn s_infinity_unipartite_regular() {
        let mut degree_limits = BTreeMap::new();
        degree_limits.insert((0, 0), DegreeDistribution::delta(1));
        let d = LimitDescriptor {
            master: MasterGraph::unipartite(),
            limits: LayerLimits::uniform(1),
            degree_limits,
            count_pairs: vec![],
        };
        assert!((s_infinity(&d).unwrap() - poisson_kl(1)).abs() < 1e-15);
    }

    #[test]
    fn s_infinity_count_only_vanishes() {
        let d = LimitDescriptor {
            master: MasterGraph::unipartite(),
            limits: LayerLimits::uniform(1),
            degree_limits: BTreeMap::new(),
            count_pairs: vec![(0, 0)],
        };
        assert_eq!(s_infinity(&d).unwrap(), 0.0);
    }

    #[test]
    fn s_infinity_bipartite_two_sided() {
        // A1 |f12| + A2 |f21|
        let mut degree_limits = BTreeMap::new();
        degree_limits.insert((0, 1), DegreeDistribution::delta(2));
        degree_limits.insert((1, 0), DegreeDistribution::delta(3));
        let d = LimitDescriptor {
            master: MasterGraph::bipartite(),
            limits: LayerLimits::new(vec![0.6, 0.4]).unwrap(),
            degree_limits,
            count_pairs: vec![],
        };
        let expect = 0.6 * poisson_kl(2) + 0.4 * poisson_kl(3);
        assert!((s_infinity(&d).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn s_infinity_mixed_pairs_only_degree_contributes() {
        // two layers, intra pairs degree-constrained, cross pair relaxed
        let mut degree_limits = BTreeMap::new();
        degree_limits.insert((0, 0), DegreeDistribution::delta(2));
        degree_limits.insert((1, 1), DegreeDistribution::delta(2));
        let d = LimitDescriptor {
            master: MasterGraph::complete_with_loops(2),
            limits: LayerLimits::uniform(2),
            degree_limits,
            count_pairs: vec![(0, 1)],
        };
        assert!((s_infinity(&d).unwrap() - poisson_kl(2)).abs() < 1e-15);
    }

    #[test]
    fn s_infinity_rejects_uncovered_pair() {
        let d = LimitDescriptor {
            master: MasterGraph::bipartite(),
            limits: LayerLimits::uniform(2),
            degree_limits: BTreeMap::new(),
            count_pairs: vec![],
        };
        assert!(s_infinity(&d).is_err());
    }

    #[test]
    fn bits_conversion() {
        assert!((to_bits(LN2) - 1.0).abs() < 1e-15);
    }
}
