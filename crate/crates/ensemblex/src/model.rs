//! Domain model shared by all other modules: multilayer graphs, master
//! graphs, constraint sets, degree distributions, and the model spec that
//! ties them together.
//!
//! Node indexing is global `0..n-1` with layers occupying contiguous index
//! ranges in layer order, so block extraction is O(1) arithmetic. All types
//! are immutable after construction and safe to share across threads.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use crate::{Error, Result};

/// M-layer superstructure declaring which layer pairs may carry edges.
/// Symmetric, self-loops allowed (a self-loop admits intra-layer edges).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterGraph {
    m: usize,
    gamma: Vec<bool>,
}

impl MasterGraph {
    /// Master graph with no admissible pairs.
    pub fn empty(m: usize) -> Self {
        assert!(m >= 1, "layer count must be at least 1");
        MasterGraph {
            m,
            gamma: vec![false; m * m],
        }
    }

    /// Single layer with a self-loop: plain uni-partite graphs.
    pub fn unipartite() -> Self {
        let mut g = Self::empty(1);
        g.connect(0, 0);
        g
    }

    /// Two layers, cross edges only.
    pub fn bipartite() -> Self {
        let mut g = Self::empty(2);
        g.connect(0, 1);
        g
    }

    /// Self-loops only: multiplex / time-varying structure.
    pub fn loops_only(m: usize) -> Self {
        let mut g = Self::empty(m);
        for s in 0..m {
            g.connect(s, s);
        }
        g
    }

    /// All pairs admissible except intra-layer: all-to-all multipartite.
    pub fn multipartite(m: usize) -> Self {
        let mut g = Self::empty(m);
        for s in 0..m {
            for t in 0..m {
                if s != t {
                    g.connect(s, t);
                }
            }
        }
        g
    }

    /// Complete with all self-loops: block-model structure.
    pub fn complete_with_loops(m: usize) -> Self {
        let mut g = Self::empty(m);
        for s in 0..m {
            for t in 0..m {
                g.connect(s, t);
            }
        }
        g
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidInput("master graph needs M >= 1".into()));
        }
        let mut g = Self::empty(m);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Dimension(format!(
                    "master row {s} has length {} expected {m}",
                    row.len()
                )));
            }
            for (t, &v) in row.iter().enumerate() {
                if v {
                    g.connect(s, t);
                }
            }
        }
        for s in 0..m {
            for t in 0..m {
                if g.admits(s, t) != g.admits(t, s) {
                    return Err(Error::InvalidInput("master graph must be symmetric".into()));
                }
            }
        }
        Ok(g)
    }

    pub fn connect(&mut self, s: usize, t: usize) {
        self.gamma[s * self.m + t] = true;
        self.gamma[t * self.m + s] = true;
    }

    pub fn layers(&self) -> usize {
        self.m
    }

    pub fn admits(&self, s: usize, t: usize) -> bool {
        self.gamma[s * self.m + t]
    }

    /// Unordered admissible pairs (s, t) with s <= t.
    pub fn admissible_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 0..self.m {
            for t in s..self.m {
                if self.admits(s, t) {
                    out.push((s, t));
                }
            }
        }
        out
    }
}

/// Simple undirected labeled graph plus a node -> layer assignment.
/// Adjacency is symmetric with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultilayerGraph {
    layer_sizes: Vec<usize>,
    offsets: Vec<usize>,
    adj: Vec<bool>,
}

impl MultilayerGraph {
    pub fn new(layer_sizes: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(layer_sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in layer_sizes {
            acc += s;
            offsets.push(acc);
        }
        MultilayerGraph {
            layer_sizes: layer_sizes.to_vec(),
            offsets,
            adj: vec![false; acc * acc],
        }
    }

    pub fn single_layer(n: usize) -> Self {
        Self::new(&[n])
    }

    pub fn n(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layer_range(&self, s: usize) -> Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }

    pub fn layer_of(&self, v: usize) -> usize {
        debug_assert!(v < self.n());
        // layers are contiguous; linear scan over M is fine (M is small)
        (0..self.layer_sizes.len())
            .find(|&s| v < self.offsets[s + 1])
            .unwrap()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n() + j]
    }

    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        assert_ne!(i, j, "self-loops are not allowed");
        let n = self.n();
        self.adj[i * n + j] = present;
        self.adj[j * n + i] = present;
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        self.set_edge(i, j, true);
    }

    /// All edges as (i, j) with i < j, lexicographic.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adj[i * n + j] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn link_count(&self) -> usize {
        let n = self.n();
        let mut c = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adj[i * n + j] {
                    c += 1;
                }
            }
        }
        c
    }

    pub fn degree(&self, i: usize) -> usize {
        let n = self.n();
        (0..n).filter(|&j| self.adj[i * n + j]).count()
    }

    /// Count of neighbours of node `i` lying in layer `t`.
    pub fn targeted_degree(&self, i: usize, t: usize) -> usize {
        self.layer_range(t).filter(|&j| self.has_edge(i, j)).count()
    }

    /// True when every edge joins a layer pair admitted by `master`.
    pub fn is_admissible(&self, master: &MasterGraph) -> bool {
        if master.layers() != self.num_layers() {
            return false;
        }
        self.edges()
            .iter()
            .all(|&(i, j)| master.admits(self.layer_of(i), self.layer_of(j)))
    }

    /// Link counts per unordered layer pair; diagonal entries are actual
    /// intra-layer link counts (not doubled).
    pub fn block_link_counts(&self) -> BTreeMap<(usize, usize), usize> {
        let mut out = BTreeMap::new();
        for &(i, j) in &self.edges() {
            let (s, t) = ordered_pair(self.layer_of(i), self.layer_of(j));
            *out.entry((s, t)).or_insert(0) += 1;
        }
        out
    }
}

fn ordered_pair(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Targeted degree sequences k_{s->t} for every ordered admissible pair:
/// entry i is the number of neighbours of the i-th node of layer s lying in
/// layer t.
pub fn degree_matrix(
    g: &MultilayerGraph,
    master: &MasterGraph,
) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut out = BTreeMap::new();
    for s in 0..master.layers() {
        for t in 0..master.layers() {
            if master.admits(s, t) {
                let v: Vec<usize> = g
                    .layer_range(s)
                    .map(|i| g.targeted_degree(i, t))
                    .collect();
                out.insert((s, t), v);
            }
        }
    }
    out
}

/// Probability distribution on the non-negative integers with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    mass: BTreeMap<u64, f64>,
}

impl DegreeDistribution {
    pub fn delta(k: u64) -> Self {
        let mut mass = BTreeMap::new();
        mass.insert(k, 1.0);
        DegreeDistribution { mass }
    }

    /// Empirical distribution of a degree vector: f(k) = multiplicity(k)/len.
    pub fn empirical(degrees: &[usize]) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut mass: BTreeMap<u64, f64> = BTreeMap::new();
        let w = 1.0 / degrees.len() as f64;
        for &k in degrees {
            *mass.entry(k as u64).or_insert(0.0) += w;
        }
        Ok(DegreeDistribution { mass })
    }

    pub fn from_masses<I: IntoIterator<Item = (u64, f64)>>(masses: I) -> Result<Self> {
        let mut mass = BTreeMap::new();
        let mut total = 0.0;
        for (k, p) in masses {
            if p < 0.0 {
                return Err(Error::InvalidInput(format!("negative mass at k={k}")));
            }
            if p > 0.0 {
                *mass.entry(k).or_insert(0.0) += p;
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(DegreeDistribution { mass })
    }

    pub fn mass(&self, k: u64) -> f64 {
        self.mass.get(&k).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.mass.iter().map(|(&k, &p)| (k, p))
    }

    pub fn max_support(&self) -> u64 {
        self.mass.keys().next_back().copied().unwrap_or(0)
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Limiting layer-size fractions A_s of the thermodynamic limit. These are
/// user-supplied, never inferred from finite sizes: different realizations
/// of the limit give different answers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerLimits {
    a: Vec<f64>,
}

impl LayerLimits {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidInput("empty layer limits".into()));
        }
        if a.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidInput("layer fractions must lie in [0,1]".into()));
        }
        let total: f64 = a.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "layer fractions sum to {total}, expected 1"
            )));
        }
        Ok(LayerLimits { a })
    }

    pub fn uniform(m: usize) -> Self {
        LayerLimits {
            a: vec![1.0 / m as f64; m],
        }
    }

    pub fn fraction(&self, s: usize) -> f64 {
        self.a[s]
    }

    pub fn layers(&self) -> usize {
        self.a.len()
    }
}

/// Constraint attached to one admissible layer block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockConstraint {
    /// k_{s->s}: intra-layer degree sequence (one vector of length n_s).
    IntraDegrees(Vec<usize>),
    /// k_{s->t} and k_{t->s} for an inter-layer pair, s < t.
    InterDegrees {
        forward: Vec<usize>,
        backward: Vec<usize>,
    },
    /// L*_{s,t}: number of links carried by the block.
    LinkCount(usize),
}

impl BlockConstraint {
    pub fn is_degree(&self) -> bool {
        !matches!(self, BlockConstraint::LinkCount(_))
    }
}

/// One constraint per admissible pair: either a targeted degree-sequence
/// constraint or a link-count constraint. Degree pairs form the set D,
/// count pairs the set L; together they partition the admissible pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    blocks: BTreeMap<(usize, usize), BlockConstraint>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_intra_degrees(&mut self, s: usize, k: Vec<usize>) {
        self.blocks.insert((s, s), BlockConstraint::IntraDegrees(k));
    }

    pub fn set_inter_degrees(&mut self, s: usize, t: usize, forward: Vec<usize>, backward: Vec<usize>) {
        assert!(s < t, "inter-layer pair must have s < t");
        self.blocks
            .insert((s, t), BlockConstraint::InterDegrees { forward, backward });
    }

    pub fn set_link_count(&mut self, s: usize, t: usize, l: usize) {
        let (s, t) = ordered_pair(s, t);
        self.blocks.insert((s, t), BlockConstraint::LinkCount(l));
    }

    pub fn get(&self, s: usize, t: usize) -> Option<&BlockConstraint> {
        let (s, t) = ordered_pair(s, t);
        self.blocks.get(&(s, t))
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &BlockConstraint)> {
        self.blocks.iter().map(|(&p, c)| (p, c))
    }

    /// Unordered pairs carrying a degree constraint (the set D).
    pub fn degree_pairs(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .filter(|(_, c)| c.is_degree())
            .map(|(&p, _)| p)
            .collect()
    }

    /// Unordered pairs carrying a link-count constraint (the set L).
    pub fn count_pairs(&self) -> Vec<(usize, usize)> {
        self.blocks
            .iter()
            .filter(|(_, c)| !c.is_degree())
            .map(|(&p, _)| p)
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// A violation found by [`ModelSpec::validate`]. Violations are data, not
/// errors: validate never fails, it reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub pair: Option<(usize, usize)>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pair {
            Some((s, t)) => write!(f, "pair ({s},{t}): {}", self.rule),
            None => write!(f, "{}", self.rule),
        }
    }
}

/// Full model: master graph, layer sizes, one constraint per admissible
/// pair, and (optionally) the limiting layer fractions needed by the
/// asymptotic operations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub master: MasterGraph,
    pub layer_sizes: Vec<usize>,
    pub constraints: ConstraintSet,
    pub limits: Option<LayerLimits>,
}

impl ModelSpec {
    pub fn n(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    pub fn empty_graph(&self) -> MultilayerGraph {
        MultilayerGraph::new(&self.layer_sizes)
    }

    /// Capacity of a block: number of node pairs it can carry.
    pub fn block_capacity(&self, s: usize, t: usize) -> usize {
        if s == t {
            self.layer_sizes[s] * (self.layer_sizes[s] - 1) / 2
        } else {
            self.layer_sizes[s] * self.layer_sizes[t]
        }
    }

    /// Checks every constraint-set invariant; returns the empty list iff
    /// they all hold.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let m = self.master.layers();
        if self.layer_sizes.len() != m {
            v.push(Violation {
                pair: None,
                rule: format!(
                    "{} layer sizes for {} master layers",
                    self.layer_sizes.len(),
                    m
                ),
            });
            return v;
        }
        for (s, &ns) in self.layer_sizes.iter().enumerate() {
            if ns == 0 {
                v.push(Violation {
                    pair: None,
                    rule: format!("layer {s} is empty"),
                });
            }
        }
        if let Some(lim) = &self.limits {
            if lim.layers() != m {
                v.push(Violation {
                    pair: None,
                    rule: "layer limits dimension mismatch".into(),
                });
            }
        }
        for ((s, t), c) in self.constraints.iter() {
            if s >= m || t >= m {
                v.push(Violation {
                    pair: Some((s, t)),
                    rule: "references unknown layer".into(),
                });
                continue;
            }
            if !self.master.admits(s, t) {
                v.push(Violation {
                    pair: Some((s, t)),
                    rule: "constrains a pair not admitted by the master graph".into(),
                });
                continue;
            }
            let (ns, nt) = (self.layer_sizes[s], self.layer_sizes[t]);
            match c {
                BlockConstraint::IntraDegrees(k) => {
                    if s != t {
                        v.push(Violation {
                            pair: Some((s, t)),
                            rule: "intra-layer degrees on an inter-layer pair".into(),
                        });
                        continue;
                    }
                    if k.len() != ns {
                        v.push(Violation {
                            pair: Some((s, t)),
                            rule: format!("degree vector length {} != n_{s}={ns}", k.len()),
                        });
                        continue;
                    }
                    let sum: usize = k.iter().sum();
                    if sum % 2 != 0 {
                        v.push(Violation {
                            pair: Some((s, t)),
                            rule: format!("intra-layer degree sum {sum} is odd"),
                        });
                    }
                    if let Some(&mx) = k.iter().max() {
                        if ns > 0 && mx > ns - 1 {
                            v.push(Violation {
                                pair: Some((s, t)),
                                rule: format!("degree {mx} exceeds n_{s}-1={}", ns - 1),
                            });
                        }
                    }
                }
                BlockConstraint::InterDegrees { forward, backward } => {
                    if s == t {
                        v.push(Violation {
                            pair: Some((s, t)),
                            rule: "inter-layer degrees on an intra-layer pair".into(),
                        });
                        continue;
                    }
                    if forward.len() != ns || backward.len() != nt {
                        v.push(Violation {
                            pair: Some((s, t)),
                            rule: format!(
                                "degree vector lengths ({},{}) != ({ns},{nt})",
                                forward.len(),
                                backward.len()
                            ),
                        });
                        continue;
                    }
                    let a: usize = forward.iter().sum();
                    let b: usize = backward.iter().sum();
                    if a != b {
                        v.push(Violation {
                            pair: Some((s, t)),
                            rule: format!("sum mismatch {a}≠{b}"),
                        });
                    }
                    if forward.iter().any(|&x| x > nt) {
                        v.push(Violation {
                            pair: Some((s, t)),
                            rule: format!("forward degree exceeds n_{t}={nt}"),
                        });
                    }
                    if backward.iter().any(|&x| x > ns) {
                        v.push(Violation {
                            pair: Some((s, t)),
                            rule: format!("backward degree exceeds n_{s}={ns}"),
                        });
                    }
                }
                BlockConstraint::LinkCount(l) => {
                    let cap = self.block_capacity(s, t);
                    if *l > cap {
                        v.push(Violation {
                            pair: Some((s, t)),
                            rule: format!("exceeds n{s}n{t}={cap}"),
                        });
                    }
                }
            }
        }
        // every admissible pair must carry exactly one constraint
        for (s, t) in self.master.admissible_pairs() {
            if self.constraints.get(s, t).is_none() {
                v.push(Violation {
                    pair: Some((s, t)),
                    rule: "admissible pair carries no constraint".into(),
                });
            }
        }
        v
    }

    /// Node pairs (i, j), i < j, that may carry an edge under the master
    /// graph, in lexicographic order.
    pub fn admissible_node_pairs(&self) -> Vec<(usize, usize)> {
        let g = self.empty_graph();
        let n = g.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.master.admits(g.layer_of(i), g.layer_of(j)) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Calls `visit` with every admissible graph. Caps at 2^26 graphs.
    pub fn enumerate_admissible_graphs<F: FnMut(&MultilayerGraph)>(
        &self,
        mut visit: F,
    ) -> Result<()> {
        let pairs = self.admissible_node_pairs();
        if pairs.len() > 26 {
            return Err(Error::SizeCap(format!(
                "{} admissible pairs exceeds enumeration cap",
                pairs.len()
            )));
        }
        let mut g = self.empty_graph();
        for mask in 0u64..(1u64 << pairs.len()) {
            for (b, &(i, j)) in pairs.iter().enumerate() {
                g.set_edge(i, j, mask >> b & 1 == 1);
            }
            visit(&g);
        }
        Ok(())
    }

    /// True iff `g` realizes every constraint exactly.
    pub fn is_realization(&self, g: &MultilayerGraph) -> bool {
        if g.layer_sizes() != self.layer_sizes.as_slice() || !g.is_admissible(&self.master) {
            return false;
        }
        let dm = degree_matrix(g, &self.master);
        for ((s, t), c) in self.constraints.iter() {
            match c {
                BlockConstraint::IntraDegrees(k) => {
                    if dm.get(&(s, s)) != Some(k) {
                        return false;
                    }
                }
                BlockConstraint::InterDegrees { forward, backward } => {
                    if dm.get(&(s, t)) != Some(forward) || dm.get(&(t, s)) != Some(backward) {
                        return false;
                    }
                }
                BlockConstraint::LinkCount(l) => {
                    let count: usize = if s == t {
                        dm.get(&(s, s)).map(|v| v.iter().sum::<usize>() / 2).unwrap_or(0)
                    } else {
                        dm.get(&(s, t)).map(|v| v.iter().sum()).unwrap_or(0)
                    };
                    if count != *l {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Convenience constructor for the plain uni-partite degree model.
pub fn unipartite_degree_model(k: Vec<usize>) -> ModelSpec {
    let n = k.len();
    let mut constraints = ConstraintSet::new();
    constraints.set_intra_degrees(0, k);
    ModelSpec {
        master: MasterGraph::unipartite(),
        layer_sizes: vec![n],
        constraints,
        limits: None,
    }
}

/// Convenience constructor for the uni-partite link-count model.
pub fn unipartite_link_model(n: usize, l: usize) -> ModelSpec {
    let mut constraints = ConstraintSet::new();
    constraints.set_link_count(0, 0, l);
    ModelSpec {
        master: MasterGraph::unipartite(),
        layer_sizes: vec![n],
        constraints,
        limits: None,
    }
}

/// Convenience constructor for the two-layer bipartite degree model.
pub fn bipartite_degree_model(top: Vec<usize>, bottom: Vec<usize>) -> ModelSpec {
    let (n1, n2) = (top.len(), bottom.len());
    let mut constraints = ConstraintSet::new();
    constraints.set_inter_degrees(0, 1, top, bottom);
    ModelSpec {
        master: MasterGraph::bipartite(),
        layer_sizes: vec![n1, n2],
        constraints,
        limits: None,
    }
}
