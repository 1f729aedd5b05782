//! Community structure, scale-free limits, and builders for the named
//! model families.

use std::collections::BTreeMap;

use crate::entropy::poisson_kl;
use crate::model::{
    ConstraintSet, DegreeDistribution, MasterGraph, ModelSpec, MultilayerGraph,
};
use crate::{Error, Result};

/// Assignment of every node to one of M communities, labels 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    sigma: Vec<usize>,
    m: usize,
}

impl Partition {
    pub fn new(sigma: Vec<usize>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::EmptySequence);
        }
        let m = sigma.iter().max().unwrap() + 1;
        Ok(Partition { sigma, m })
    }

    /// Every node in its own community.
    pub fn singletons(n: usize) -> Self {
        Partition {
            sigma: (0..n).collect(),
            m: n,
        }
    }

    /// One community holding everything.
    pub fn all_in_one(n: usize) -> Self {
        Partition {
            sigma: vec![0; n],
            m: 1,
        }
    }

    /// Communities = layers of the multilayer graph.
    pub fn from_layers(g: &MultilayerGraph) -> Self {
        let sigma: Vec<usize> = (0..g.n()).map(|v| g.layer_of(v)).collect();
        Partition {
            sigma,
            m: g.num_layers(),
        }
    }

    pub fn label(&self, v: usize) -> usize {
        self.sigma[v]
    }

    pub fn communities(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

/// Community-resolved link counts. Off-diagonal entries count links between
/// the two communities; diagonal entries are twice the intra-community link
/// count, so every row sums to the community's total degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLinkMatrix {
    m: usize,
    l: Vec<u64>,
}

impl BlockLinkMatrix {
    pub fn from_entries(m: usize, entries: &[u64]) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::Dimension(format!(
                "expected {} entries for M={m}",
                m * m
            )));
        }
        for s in 0..m {
            if entries[s * m + s] % 2 != 0 {
                return Err(Error::InvalidInput(
                    "diagonal entries are twice a link count, so must be even".into(),
                ));
            }
            for t in 0..m {
                if entries[s * m + t] != entries[t * m + s] {
                    return Err(Error::InvalidInput("matrix must be symmetric".into()));
                }
            }
        }
        Ok(BlockLinkMatrix {
            m,
            l: entries.to_vec(),
        })
    }

    pub fn from_partition(g: &MultilayerGraph, sigma: &Partition) -> Result<Self> {
        if sigma.len() != g.n() {
            return Err(Error::Dimension("partition length != node count".into()));
        }
        let m = sigma.communities();
        let mut l = vec![0u64; m * m];
        for (i, j) in g.edges() {
            let (s, t) = (sigma.label(i), sigma.label(j));
            l[s * m + t] += 1;
            l[t * m + s] += 1;
        }
        Ok(BlockLinkMatrix { m, l })
    }

    pub fn communities(&self) -> usize {
        self.m
    }

    pub fn at(&self, s: usize, t: usize) -> u64 {
        self.l[s * self.m + t]
    }

    pub fn row_sum(&self, s: usize) -> u64 {
        (0..self.m).map(|t| self.at(s, t)).sum()
    }

    pub fn total(&self) -> u64 {
        (0..self.m).map(|s| self.row_sum(s)).sum()
    }
}

/// Modularity of a partition:
///   K sum_{i<j} (g_ij - k_i k_j / 2L) [sigma_i = sigma_j]
/// with the null term taken from the sparse canonical configuration model
/// of g itself. `normalization` defaults to 1/(2L).
pub fn modularity(
    g: &MultilayerGraph,
    sigma: &Partition,
    normalization: Option<f64>,
) -> Result<f64> {
    if sigma.len() != g.n() {
        return Err(Error::Dimension("partition length != node count".into()));
    }
    let l = g.link_count();
    if l == 0 {
        return Err(Error::InvalidInput("no links".into()));
    }
    let n = g.n();
    let k: Vec<f64> = (0..n).map(|i| g.degree(i) as f64).collect();
    let two_l = 2.0 * l as f64;
    let kcoef = normalization.unwrap_or(1.0 / two_l);
    let mut q = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            if sigma.label(i) != sigma.label(j) {
                continue;
            }
            let a = if g.has_edge(i, j) { 1.0 } else { 0.0 };
            q += a - k[i] * k[j] / two_l;
        }
    }
    Ok(kcoef * q)
}

/// The block-count form of the same quantity for the partition that
/// produced `l`:
///   K ( sum_s L_ss / 2  -  sum_s (row_s)^2 / (2 total) ).
/// This is the algebraic rewriting whose sign [`community_condition`]
/// tests; it differs from [`modularity`] by the diagonal null terms
/// sum_i k_i^2 / 4L, which the rewriting absorbs.
pub fn block_modularity(l: &BlockLinkMatrix, normalization: Option<f64>) -> Result<f64> {
    let total = l.total() as f64;
    if total == 0.0 {
        return Err(Error::InvalidInput("no links".into()));
    }
    let kcoef = normalization.unwrap_or(1.0 / total);
    let intra: f64 = (0..l.communities()).map(|s| l.at(s, s) as f64).sum();
    let rows: f64 = (0..l.communities())
        .map(|s| {
            let r = l.row_sum(s) as f64;
            r * r
        })
        .sum();
    Ok(kcoef * (intra / 2.0 - rows / (2.0 * total)))
}

/// True iff the communities hold more intra links than the configuration
/// null model expects:
///   sum_s L_ss > sum_s (sum_t L_st)^2 / sum_{s,t} L_st.
/// Equality (for instance a uniform matrix, or all links intra in equal
/// communities) is not community structure.
pub fn community_condition(l: &BlockLinkMatrix) -> Result<bool> {
    let total = l.total();
    if total == 0 {
        return Err(Error::InvalidInput("no links".into()));
    }
    let lhs: u64 = (0..l.communities()).map(|s| l.at(s, s)).sum();
    // compare in integers: lhs * total > sum_s row_s^2
    let rows: u64 = (0..l.communities())
        .map(|s| {
            let r = l.row_sum(s);
            r * r
        })
        .sum();
    Ok(lhs * total > rows)
}

/// Riemann zeta for gamma > 1: direct partial sum plus a tail expansion
/// around the integral bound. Absolute error well below 1e-12 for any
/// gamma bounded away from 1 by 1e-3.
pub fn zeta(gamma: f64) -> Result<f64> {
    if gamma <= 1.0 {
        return Err(Error::InvalidInput("zeta series diverges for gamma <= 1".into()));
    }
    let n = 10_000u64;
    let mut sum = 0.0;
    for k in (1..=n).rev() {
        sum += (k as f64).powf(-gamma);
    }
    let nf = n as f64;
    // tail sum_{k>n} k^-g = integral - f(n)/2 - f'(n)/12 + f'''(n)/720 ...
    let f = nf.powf(-gamma);
    let tail = nf.powf(1.0 - gamma) / (gamma - 1.0) - 0.5 * f
        + gamma * f / (12.0 * nf)
        - gamma * (gamma + 1.0) * (gamma + 2.0) * f / (720.0 * nf * nf * nf);
    Ok(sum + tail)
}

/// Per-node limiting relative entropy of the scale-free configuration
/// model:  (1/zeta(gamma)) sum_{k>=1} g(k) k^-gamma.
/// The tail past the cutoff uses the Stirling form of g, with the same
/// expansion as [`zeta`] applied to each tail piece.
pub fn s_infinity_scale_free(gamma: f64) -> Result<f64> {
    if gamma <= 1.0 {
        return Err(Error::InvalidInput("series diverges for gamma <= 1".into()));
    }
    let n = 100_000u64;
    let mut sum = 0.0;
    for k in (1..=n).rev() {
        sum += poisson_kl(k) * (k as f64).powf(-gamma);
    }
    sum += tail_weighted(n as f64, gamma);
    Ok(sum / zeta(gamma)?)
}

// tail of sum_{k>n} x^-g (ln(2 pi x)/2 + 1/(12x)), the Stirling form of g,
// via the same expansion around the integral
fn tail_weighted(n: f64, gamma: f64) -> f64 {
    let c = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let f = |x: f64| x.powf(-gamma) * (c + 0.5 * x.ln() + 1.0 / (12.0 * x));
    let fp = |x: f64| {
        -gamma * x.powf(-gamma - 1.0) * (c + 0.5 * x.ln() + 1.0 / (12.0 * x))
            + x.powf(-gamma) * (0.5 / x - 1.0 / (12.0 * x * x))
    };
    let gm1 = gamma - 1.0;
    // integral_n^inf of the three pieces
    let int = n.powf(-gm1) * (c / gm1 + 0.5 * (n.ln() / gm1 + 1.0 / (gm1 * gm1)))
        + n.powf(-gamma) / (12.0 * gamma);
    int - 0.5 * f(n) - fp(n) / 12.0
}

/// f(k) proportional to k^-gamma on 1..=k_c, normalized.
pub fn truncated_power_law(gamma: f64, k_c: u64) -> Result<DegreeDistribution> {
    if gamma <= 1.0 || k_c < 1 {
        return Err(Error::InvalidInput("need gamma > 1 and k_c >= 1".into()));
    }
    let raw: Vec<f64> = (1..=k_c).map(|k| (k as f64).powf(-gamma)).collect();
    let z: f64 = raw.iter().sum();
    DegreeDistribution::from_masses((1..=k_c).zip(raw.into_iter().map(|w| w / z)))
}

/// The named model families. Each variant carries exactly the data its
/// constraint pattern needs; degree sequences are per ordered pair.
#[derive(Debug, Clone)]
pub enum Family {
    /// All-to-all multipartite: no intra-layer edges, every cross pair
    /// degree-constrained. Key (s, t) with s < t holds (k_{s->t}, k_{t->s}).
    Multipartite {
        layer_sizes: Vec<usize>,
        cross_degrees: BTreeMap<(usize, usize), (Vec<usize>, Vec<usize>)>,
    },
    /// Intra-layer edges only, equal layer sizes; one degree vector per
    /// layer. Total node count must be divisible by the layer count.
    Multiplex {
        total_nodes: usize,
        layer_degrees: Vec<Vec<usize>>,
    },
    /// Complete master with loops, every pair relaxed to a link count.
    BlockModel {
        layer_sizes: Vec<usize>,
        counts: BTreeMap<(usize, usize), usize>,
    },
    /// Complete master with loops, every pair degree-constrained.
    TargetedBlockModel {
        layer_sizes: Vec<usize>,
        intra_degrees: Vec<Vec<usize>>,
        cross_degrees: BTreeMap<(usize, usize), (Vec<usize>, Vec<usize>)>,
    },
    /// Two layers, intra and inter pairs all degree-constrained.
    Interdependent {
        layer_sizes: [usize; 2],
        intra_degrees: [Vec<usize>; 2],
        cross_forward: Vec<usize>,
        cross_backward: Vec<usize>,
    },
    /// Degree-constrained micro-networks on the diagonal, link counts on
    /// every cross pair.
    NetworksOfNetworks {
        layer_sizes: Vec<usize>,
        intra_degrees: Vec<Vec<usize>>,
        cross_counts: BTreeMap<(usize, usize), usize>,
    },
}

/// Assemble the ModelSpec for a named family: the master graph and the
/// degree/count split follow from the family alone.
pub fn build_family(f: &Family) -> Result<ModelSpec> {
    let spec = match f {
        Family::Multipartite {
            layer_sizes,
            cross_degrees,
        } => {
            let m = layer_sizes.len();
            let mut constraints = ConstraintSet::new();
            for s in 0..m {
                for t in (s + 1)..m {
                    let (fwd, bwd) = cross_degrees.get(&(s, t)).ok_or_else(|| {
                        Error::InvalidInput(format!("missing degrees for pair ({s},{t})"))
                    })?;
                    constraints.set_inter_degrees(s, t, fwd.clone(), bwd.clone());
                }
            }
            ModelSpec {
                master: MasterGraph::multipartite(m),
                layer_sizes: layer_sizes.clone(),
                constraints,
                limits: None,
            }
        }
        Family::Multiplex {
            total_nodes,
            layer_degrees,
        } => {
            let m = layer_degrees.len();
            if m == 0 || total_nodes % m != 0 {
                return Err(Error::InvalidInput(format!(
                    "{total_nodes} nodes cannot split into {m} equal layers"
                )));
            }
            let per = total_nodes / m;
            let mut constraints = ConstraintSet::new();
            for (s, k) in layer_degrees.iter().enumerate() {
                if k.len() != per {
                    return Err(Error::Dimension(format!(
                        "layer {s} degree vector has length {}, expected {per}",
                        k.len()
                    )));
                }
                constraints.set_intra_degrees(s, k.clone());
            }
            ModelSpec {
                master: MasterGraph::loops_only(m),
                layer_sizes: vec![per; m],
                constraints,
                limits: None,
            }
        }
        Family::BlockModel { layer_sizes, counts } => {
            let m = layer_sizes.len();
            let mut constraints = ConstraintSet::new();
            for s in 0..m {
                for t in s..m {
                    let l = counts.get(&(s, t)).ok_or_else(|| {
                        Error::InvalidInput(format!("missing count for pair ({s},{t})"))
                    })?;
                    constraints.set_link_count(s, t, *l);
                }
            }
            ModelSpec {
                master: MasterGraph::complete_with_loops(m),
                layer_sizes: layer_sizes.clone(),
                constraints,
                limits: None,
            }
        }
        Family::TargetedBlockModel {
            layer_sizes,
            intra_degrees,
            cross_degrees,
        } => {
            let m = layer_sizes.len();
            if intra_degrees.len() != m {
                return Err(Error::Dimension("one intra degree vector per layer".into()));
            }
            let mut constraints = ConstraintSet::new();
            for (s, k) in intra_degrees.iter().enumerate() {
                constraints.set_intra_degrees(s, k.clone());
            }
            for s in 0..m {
                for t in (s + 1)..m {
                    let (fwd, bwd) = cross_degrees.get(&(s, t)).ok_or_else(|| {
                        Error::InvalidInput(format!("missing degrees for pair ({s},{t})"))
                    })?;
                    constraints.set_inter_degrees(s, t, fwd.clone(), bwd.clone());
                }
            }
            ModelSpec {
                master: MasterGraph::complete_with_loops(m),
                layer_sizes: layer_sizes.clone(),
                constraints,
                limits: None,
            }
        }
        Family::Interdependent {
            layer_sizes,
            intra_degrees,
            cross_forward,
            cross_backward,
        } => {
            let mut constraints = ConstraintSet::new();
            constraints.set_intra_degrees(0, intra_degrees[0].clone());
            constraints.set_intra_degrees(1, intra_degrees[1].clone());
            constraints.set_inter_degrees(0, 1, cross_forward.clone(), cross_backward.clone());
            ModelSpec {
                master: MasterGraph::complete_with_loops(2),
                layer_sizes: layer_sizes.to_vec(),
                constraints,
                limits: None,
            }
        }
        Family::NetworksOfNetworks {
            layer_sizes,
            intra_degrees,
            cross_counts,
        } => {
            let m = layer_sizes.len();
            if intra_degrees.len() != m {
                return Err(Error::Dimension("one intra degree vector per layer".into()));
            }
            let mut constraints = ConstraintSet::new();
            for (s, k) in intra_degrees.iter().enumerate() {
                constraints.set_intra_degrees(s, k.clone());
            }
            for s in 0..m {
                for t in (s + 1)..m {
                    let l = cross_counts.get(&(s, t)).ok_or_else(|| {
                        Error::InvalidInput(format!("missing count for pair ({s},{t})"))
                    })?;
                    constraints.set_link_count(s, t, *l);
                }
            }
            ModelSpec {
                master: MasterGraph::complete_with_loops(m),
                layer_sizes: layer_sizes.clone(),
                constraints,
                limits: None,
            }
        }
    };
    let violations = spec.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidInput(format!(
            "family parameters invalid: {}",
            violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }
    Ok(spec)
}
