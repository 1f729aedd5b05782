//! Maximum-entropy ensembles matching the constraints on average.
//!
//! Every block is an independent product of Bernoulli edges. Degree blocks
//! need the hidden-variable system p_ij = x_i x_j / (1 + x_i x_j) solved
//! numerically; count blocks and one-sided bipartite blocks are closed form.

use crate::model::{BlockConstraint, ModelSpec, MultilayerGraph};
use crate::logspace::ln_one_minus;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    IntraDegrees,
    InterDegrees,
    /// p_i = k_i / n2: only the row side is constrained.
    TopOnly,
    LinkCount,
}

/// Solved edge probabilities for one block. `p` is row-major rows x cols;
/// intra blocks are square and symmetric with zero diagonal.
#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub pair: (usize, usize),
    pub kind: BlockKind,
    pub rows: usize,
    pub cols: usize,
    pub p: Vec<f64>,
    /// Max absolute constraint violation of the returned probabilities.
    pub residual: f64,
    /// True when some p_ij sits at 0 or 1 by necessity (forced edges).
    pub boundary: bool,
}

impl BlockSolution {
    pub fn p_at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.cols + j]
    }

    /// Expected degree of row node i (intra blocks count all neighbours).
    pub fn expected_row_degree(&self, i: usize) -> f64 {
        (0..self.cols).map(|j| self.p_at(i, j)).sum()
    }

    pub fn expected_col_degree(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.p_at(i, j)).sum()
    }

    /// Shannon entropy of the block's edge product measure, in nats.
    /// Pairs at p in {0,1} contribute zero. Intra blocks sum i < j.
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        let mut cell = |p: f64| {
            if p > 0.0 && p < 1.0 {
                h -= p * p.ln() + (1.0 - p) * ln_one_minus(p);
            }
        };
        if self.kind == BlockKind::IntraDegrees {
            for i in 0..self.rows {
                for j in (i + 1)..self.cols {
                    cell(self.p_at(i, j));
                }
            }
        } else {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    cell(self.p_at(i, j));
                }
            }
        }
        h
    }
}

/// Full canonical solution: one closed block per constrained layer pair.
#[derive(Debug, Clone)]
pub struct CanonicalSolution {
    pub blocks: Vec<BlockSolution>,
}

impl CanonicalSolution {
    pub fn block(&self, s: usize, t: usize) -> Option<&BlockSolution> {
        let key = if s <= t { (s, t) } else { (t, s) };
        self.blocks.iter().find(|b| b.pair == key)
    }

    pub fn max_residual(&self) -> f64 {
        self.blocks.iter().map(|b| b.residual).fold(0.0, f64::max)
    }

    pub fn entropy(&self) -> f64 {
        self.blocks.iter().map(|b| b.entropy()).sum()
    }
}

// node status during forced-edge peeling
#[derive(Clone, Copy, PartialEq)]
enum Peel {
    Active,
    Retired,
}

/// Solve the uni-partite soft degree problem. Zero-degree nodes get x = 0
/// and full-degree nodes get their edges forced at p = 1 before the
/// interior system is solved; peeling repeats until neither case applies.
pub fn solve_unipartite(k: &[usize], opts: SolveOptions) -> Result<BlockSolution> {
    let n = k.len();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let total: usize = k.iter().sum();
    if k.iter().any(|&x| x > n - 1) {
        return Err(Error::Infeasible("degree exceeds n-1".into()));
    }
    let mut p = vec![0.0f64; n * n];
    let mut status = vec![Peel::Active; n];
    let mut residual_deg: Vec<i64> = k.iter().map(|&x| x as i64).collect();
    let mut boundary = false;

    // peel zeros and saturated nodes; a saturated node's edges to all
    // currently active nodes are forced
    loop {
        let active: Vec<usize> = (0..n).filter(|&i| status[i] == Peel::Active).collect();
        let mut changed = false;
        for &i in &active {
            if residual_deg[i] == 0 {
                status[i] = Peel::Retired;
                changed = true;
            }
        }
        let active: Vec<usize> = (0..n).filter(|&i| status[i] == Peel::Active).collect();
        let na = active.len() as i64;
        for &i in &active {
            if residual_deg[i] < 0 || residual_deg[i] > na - 1 {
                return Err(Error::Infeasible(format!(
                    "residual degree {} outside [0,{}] after peeling",
                    residual_deg[i],
                    na - 1
                )));
            }
            if residual_deg[i] == na - 1 && na > 1 {
                for &j in &active {
                    if j != i && p[i * n + j] == 0.0 {
                        p[i * n + j] = 1.0;
                        p[j * n + i] = 1.0;
                        residual_deg[j] -= 1;
                    }
                }
                residual_deg[i] = 0;
                status[i] = Peel::Retired;
                boundary = true;
                changed = true;
                break;
            }
        }
        if !changed {
            break;
        }
    }

    let active: Vec<usize> = (0..n).filter(|&i| status[i] == Peel::Active).collect();
    if active.is_empty() {
        return Ok(BlockSolution {
            pair: (0, 0),
            kind: BlockKind::IntraDegrees,
            rows: n,
            cols: n,
            p,
            residual: 0.0,
            boundary: boundary || total > 0,
        });
    }

    // A tight subset inequality pins structure even when no single node is
    // saturated: for any node set S, the edges S can absorb are bounded by
    // |S|(|S|-1) + sum over j outside S of min(|S|, k_j). Equality at the
    // prefix S of the sorted residual sequence forces S to be a clique,
    // every outside node with residual >= |S| to attach to all of S, and
    // every other outside node to spend all its residual inside S. No
    // interior solution exists then; force the pinned cells and solve the
    // two independent remainders.
    {
        let mut order = active.clone();
        order.sort_by_key(|&i| std::cmp::Reverse(residual_deg[i]));
        let na = order.len();
        for r in 1..na {
            let lhs: i64 = order[..r].iter().map(|&i| residual_deg[i]).sum();
            let rhs: i64 = (r * (r - 1)) as i64
                + order[r..]
                    .iter()
                    .map(|&j| residual_deg[j].min(r as i64))
                    .sum::<i64>();
            if lhs < rhs {
                continue;
            }
            if lhs > rhs {
                return Err(Error::NotGraphical);
            }
            let prefix = &order[..r];
            let (t_big, t_small): (Vec<usize>, Vec<usize>) = order[r..]
                .iter()
                .partition(|&&j| residual_deg[j] >= r as i64);
            for (ai, &i) in prefix.iter().enumerate() {
                for &j in &prefix[ai + 1..] {
                    p[i * n + j] = 1.0;
                    p[j * n + i] = 1.0;
                }
                for &j in &t_big {
                    p[i * n + j] = 1.0;
                    p[j * n + i] = 1.0;
                }
            }
            if !t_big.is_empty() {
                let sub: Vec<usize> = t_big
                    .iter()
                    .map(|&j| (residual_deg[j] - r as i64) as usize)
                    .collect();
                let b = solve_unipartite(&sub, opts)?;
                for (a, &i) in t_big.iter().enumerate() {
                    for (c, &j) in t_big.iter().enumerate() {
                        if a != c {
                            p[i * n + j] = b.p_at(a, c);
                        }
                    }
                }
            }
            let srows: Vec<i64> = prefix
                .iter()
                .map(|&i| residual_deg[i] - (r - 1) as i64 - t_big.len() as i64)
                .collect();
            if srows.iter().any(|&d| d < 0) {
                return Err(Error::Infeasible(
                    "forced split over-assigns a prefix node".into(),
                ));
            }
            if t_small.is_empty() {
                if srows.iter().any(|&d| d != 0) {
                    return Err(Error::Infeasible(
                        "forced split leaves unplaced degree".into(),
                    ));
                }
            } else {
                let ar: Vec<usize> = srows.iter().map(|&d| d as usize).collect();
                let ac: Vec<usize> = t_small
                    .iter()
                    .map(|&j| residual_deg[j] as usize)
                    .collect();
                let b = solve_bipartite(&ar, &ac, opts)?;
                for (a, &i) in prefix.iter().enumerate() {
                    for (c, &j) in t_small.iter().enumerate() {
                        let q = b.p_at(a, c);
                        p[i * n + j] = q;
                        p[j * n + i] = q;
                    }
                }
            }
            let mut residual: f64 = 0.0;
            for i in 0..n {
                let s: f64 = (0..n).map(|j| p[i * n + j]).sum();
                residual = residual.max((s - k[i] as f64).abs());
            }
            return Ok(BlockSolution {
                pair: (0, 0),
                kind: BlockKind::IntraDegrees,
                rows: n,
                cols: n,
                p,
                residual,
                boundary: true,
            });
        }
    }

    let kk: Vec<f64> = active.iter().map(|&i| residual_deg[i] as f64).collect();
    let na = active.len();
    let mut x: Vec<f64> = kk.iter().map(|&d| d / na as f64).collect();

    let pij = |x: &[f64], a: usize, b: usize| {
        let v = x[a] * x[b];
        v / (1.0 + v)
    };
    let resid = |x: &[f64]| {
        let mut r: f64 = 0.0;
        for a in 0..na {
            let s: f64 = (0..na).filter(|&b| b != a).map(|b| pij(x, a, b)).sum();
            r = r.max((s - kk[a]).abs());
        }
        r
    };

    let mut best = resid(&x);
    let mut it = 0;
    // damped fixed point until the residual is small enough for Newton
    while best > 1e-3 && it < opts.max_iter {
        let mut nx = vec![0.0; na];
        for a in 0..na {
            let denom: f64 = (0..na)
                .filter(|&b| b != a)
                .map(|b| x[b] / (1.0 + x[a] * x[b]))
                .sum();
            nx[a] = if denom > 0.0 { kk[a] / denom } else { 0.0 };
        }
        for a in 0..na {
            x[a] = 0.5 * x[a] + 0.5 * nx[a];
        }
        best = resid(&x);
        it += 1;
    }
    // Newton on theta = ln x for quadratic tail convergence
    while best > opts.tol && it < opts.max_iter {
        let mut jac = vec![0.0f64; na * na];
        let mut f = vec![0.0f64; na];
        for a in 0..na {
            let mut s = 0.0;
            let mut diag = 0.0;
            for b in 0..na {
                if b == a {
                    continue;
                }
                let q = pij(&x, a, b);
                s += q;
                let w = q * (1.0 - q);
                jac[a * na + b] = w;
                diag += w;
            }
            jac[a * na + a] = diag;
            f[a] = s - kk[a];
        }
        let step = match solve_dense(&mut jac, &mut f, na) {
            Some(step) => step,
            None => break,
        };
        let mut tx = x.clone();
        let mut lambda = 1.0;
        loop {
            for a in 0..na {
                tx[a] = x[a] * (-lambda * step[a]).exp();
            }
            let r = resid(&tx);
            if r < best || lambda < 1e-4 {
                x = tx.clone();
                best = r;
                break;
            }
            lambda *= 0.5;
        }
        it += 1;
    }
    if best > opts.tol {
        return Err(Error::NonConvergence {
            iterations: it,
            residual: best,
        });
    }

    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            if a < b {
                let q = pij(&x, a, b);
                p[i * n + j] = q;
                p[j * n + i] = q;
            }
        }
    }
    Ok(BlockSolution {
        pair: (0, 0),
        kind: BlockKind::IntraDegrees,
        rows: n,
        cols: n,
        p,
        residual: best,
        boundary,
    })
}

/// Solve the bipartite soft degree problem p_ij = x_i y_j / (1 + x_i y_j).
/// The system has a one-parameter gauge (x -> cx, y -> y/c), so it is
/// solved by damped alternating fixed point, which is gauge-agnostic.
pub fn solve_bipartite(rows: &[usize], cols: &[usize], opts: SolveOptions) -> Result<BlockSolution> {
    let (n1, n2) = (rows.len(), cols.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::EmptySequence);
    }
    let sr: usize = rows.iter().sum();
    let sc: usize = cols.iter().sum();
    if sr != sc {
        return Err(Error::Infeasible(format!("degree sums differ: {sr} vs {sc}")));
    }
    let mut p = vec![0.0f64; n1 * n2];
    let mut rstat = vec![Peel::Active; n1];
    let mut cstat = vec![Peel::Active; n2];
    let mut rres: Vec<i64> = rows.iter().map(|&x| x as i64).collect();
    let mut cres: Vec<i64> = cols.iter().map(|&x| x as i64).collect();
    let mut boundary = false;

    loop {
        let ra: Vec<usize> = (0..n1).filter(|&i| rstat[i] == Peel::Active).collect();
        let ca: Vec<usize> = (0..n2).filter(|&j| cstat[j] == Peel::Active).collect();
        let mut changed = false;
        for &i in &ra {
            if rres[i] == 0 {
                rstat[i] = Peel::Retired;
                changed = true;
            }
        }
        for &j in &ca {
            if cres[j] == 0 {
                cstat[j] = Peel::Retired;
                changed = true;
            }
        }
        let ra: Vec<usize> = (0..n1).filter(|&i| rstat[i] == Peel::Active).collect();
        let ca: Vec<usize> = (0..n2).filter(|&j| cstat[j] == Peel::Active).collect();
        for &i in &ra {
            if rres[i] < 0 || rres[i] > ca.len() as i64 {
                return Err(Error::Infeasible("row degree outside range after peeling".into()));
            }
            if rres[i] == ca.len() as i64 && !ca.is_empty() {
                for &j in &ca {
                    p[i * n2 + j] = 1.0;
                    cres[j] -= 1;
                }
                rres[i] = 0;
                rstat[i] = Peel::Retired;
                boundary = true;
                changed = true;
                break;
            }
        }
        if changed {
            continue;
        }
        for &j in &ca {
            if cres[j] < 0 || cres[j] > ra.len() as i64 {
                return Err(Error::Infeasible("column degree outside range after peeling".into()));
            }
            if cres[j] == ra.len() as i64 && !ra.is_empty() {
                for &i in &ra {
                    p[i * n2 + j] = 1.0;
                    rres[i] -= 1;
                }
                cres[j] = 0;
                cstat[j] = Peel::Retired;
                boundary = true;
                changed = true;
                break;
            }
        }
        if !changed {
            break;
        }
    }

    let ra: Vec<usize> = (0..n1).filter(|&i| rstat[i] == Peel::Active).collect();
    let ca: Vec<usize> = (0..n2).filter(|&j| cstat[j] == Peel::Active).collect();
    if ra.is_empty() != ca.is_empty() {
        let stranded: i64 = if ra.is_empty() {
            ca.iter().map(|&j| cres[j]).sum()
        } else {
            ra.iter().map(|&i| rres[i]).sum()
        };
        if stranded != 0 {
            return Err(Error::Infeasible("unmatched residual degree".into()));
        }
    }
    if !ra.is_empty() && !ca.is_empty() {
        let (m1, m2) = (ra.len(), ca.len());
        let rk_int: Vec<usize> = ra.iter().map(|&i| rres[i] as usize).collect();
        let ck_int: Vec<usize> = ca.iter().map(|&j| cres[j] as usize).collect();
        if let Some(sub) = bipartite_boundary_split(&rk_int, &ck_int, opts)? {
            for (a, &i) in ra.iter().enumerate() {
                for (b, &j) in ca.iter().enumerate() {
                    p[i * n2 + j] = sub[a * m2 + b];
                }
            }
            boundary = true;
            let mut residual: f64 = 0.0;
            for i in 0..n1 {
                let s: f64 = (0..n2).map(|j| p[i * n2 + j]).sum();
                residual = residual.max((s - rows[i] as f64).abs());
            }
            for j in 0..n2 {
                let s: f64 = (0..n1).map(|i| p[i * n2 + j]).sum();
                residual = residual.max((s - cols[j] as f64).abs());
            }
            return Ok(BlockSolution {
                pair: (0, 1),
                kind: BlockKind::InterDegrees,
                rows: n1,
                cols: n2,
                p,
                residual,
                boundary,
            });
        }
        let rk: Vec<f64> = ra.iter().map(|&i| rres[i] as f64).collect();
        let ck: Vec<f64> = ca.iter().map(|&j| cres[j] as f64).collect();
        let mut x: Vec<f64> = rk.iter().map(|&d| d / m2 as f64).collect();
        let mut y: Vec<f64> = ck.iter().map(|&d| d / m1 as f64).collect();
        let q = |x: &[f64], y: &[f64], a: usize, b: usize| {
            let v = x[a] * y[b];
            v / (1.0 + v)
        };
        let resid = |x: &[f64], y: &[f64]| {
            let mut r: f64 = 0.0;
            for a in 0..m1 {
                let s: f64 = (0..m2).map(|b| q(x, y, a, b)).sum();
                r = r.max((s - rk[a]).abs());
            }
            for b in 0..m2 {
                let s: f64 = (0..m1).map(|a| q(x, y, a, b)).sum();
                r = r.max((s - ck[b]).abs());
            }
            r
        };
        let mut best = resid(&x, &y);
        let mut it = 0;
        while best > opts.tol && it < opts.max_iter {
            let mut nx = vec![0.0; m1];
            for a in 0..m1 {
                let denom: f64 = (0..m2).map(|b| y[b] / (1.0 + x[a] * y[b])).sum();
                nx[a] = if denom > 0.0 { rk[a] / denom } else { 0.0 };
            }
            for a in 0..m1 {
                x[a] = 0.5 * x[a] + 0.5 * nx[a];
            }
            let mut ny = vec![0.0; m2];
            for b in 0..m2 {
                let denom: f64 = (0..m1).map(|a| x[a] / (1.0 + x[a] * y[b])).sum();
                ny[b] = if denom > 0.0 { ck[b] / denom } else { 0.0 };
            }
            for b in 0..m2 {
                y[b] = 0.5 * y[b] + 0.5 * ny[b];
            }
            best = resid(&x, &y);
            it += 1;
        }
        if best > opts.tol {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: best,
            });
        }
        for (a, &i) in ra.iter().enumerate() {
            for (b, &j) in ca.iter().enumerate() {
                p[i * n2 + j] = q(&x, &y, a, b);
            }
        }
    }

    let mut residual: f64 = 0.0;
    for i in 0..n1 {
        let s: f64 = (0..n2).map(|j| p[i * n2 + j]).sum();
        residual = residual.max((s - rows[i] as f64).abs());
    }
    for j in 0..n2 {
        let s: f64 = (0..n1).map(|i| p[i * n2 + j]).sum();
        residual = residual.max((s - cols[j] as f64).abs());
    }
    Ok(BlockSolution {
        pair: (0, 1),
        kind: BlockKind::InterDegrees,
        rows: n1,
        cols: n2,
        p,
        residual,
        boundary,
    })
}

/// Bi-partite analogue of the subset bound: any row set S can absorb at
/// most sum over columns of min(c_j, |S|). Equality at a proper sorted
/// prefix of either side pins structure and splits the block in two. Returns
/// the m1 x m2 probabilities when a tight prefix exists on either side.
fn bipartite_boundary_split(
    rk: &[usize],
    ck: &[usize],
    opts: SolveOptions,
) -> Result<Option<Vec<f64>>> {
    if let Some(p) = gr_prefix_split(rk, ck, opts)? {
        return Ok(Some(p));
    }
    if let Some(pt) = gr_prefix_split(ck, rk, opts)? {
        let (m1, m2) = (rk.len(), ck.len());
        let mut p = vec![0.0f64; m1 * m2];
        for a in 0..m2 {
            for b in 0..m1 {
                p[b * m2 + a] = pt[a * m1 + b];
            }
        }
        return Ok(Some(p));
    }
    Ok(None)
}

/// Row-side prefix check behind [`bipartite_boundary_split`]: a tight
/// prefix S forces every column with c_j >= |S| to attach to all of S and
/// every other column to spend all its degree inside S; the two remainders
/// (S against the light columns, the other rows against the heavy columns)
/// are independent and solved recursively.
fn gr_prefix_split(rk: &[usize], ck: &[usize], opts: SolveOptions) -> Result<Option<Vec<f64>>> {
    let (m1, m2) = (rk.len(), ck.len());
    let mut order: Vec<usize> = (0..m1).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(rk[i]));
    for r in 1..m1 {
        let lhs: usize = order[..r].iter().map(|&i| rk[i]).sum();
        let rhs: usize = ck.iter().map(|&c| c.min(r)).sum();
        if lhs < rhs {
            continue;
        }
        if lhs > rhs {
            return Err(Error::NotBigraphical);
        }
        let top = &order[..r];
        let rest = &order[r..];
        let cbig: Vec<usize> = (0..m2).filter(|&j| ck[j] >= r).collect();
        let csmall: Vec<usize> = (0..m2).filter(|&j| ck[j] < r).collect();
        let mut p = vec![0.0f64; m1 * m2];
        for &i in top {
            for &j in &cbig {
                p[i * m2 + j] = 1.0;
            }
        }
        // prefix rows against light columns
        let ar: Vec<usize> = top
            .iter()
            .map(|&i| {
                rk[i].checked_sub(cbig.len()).ok_or_else(|| {
                    Error::Infeasible("forced split over-assigns a row".into())
                })
            })
            .collect::<Result<_>>()?;
        if csmall.is_empty() {
            if ar.iter().any(|&d| d != 0) {
                return Err(Error::Infeasible("forced split leaves unplaced degree".into()));
            }
        } else {
            let ac: Vec<usize> = csmall.iter().map(|&j| ck[j]).collect();
            let b = solve_bipartite(&ar, &ac, opts)?;
            for (a, &i) in top.iter().enumerate() {
                for (c, &j) in csmall.iter().enumerate() {
                    p[i * m2 + j] = b.p_at(a, c);
                }
            }
        }
        // remaining rows against heavy columns
        let bc: Vec<usize> = cbig.iter().map(|&j| ck[j] - r).collect();
        if rest.is_empty() {
            if bc.iter().any(|&d| d != 0) {
                return Err(Error::Infeasible("forced split leaves unplaced degree".into()));
            }
        } else if !cbig.is_empty() {
            let br: Vec<usize> = rest.iter().map(|&i| rk[i]).collect();
            let b = solve_bipartite(&br, &bc, opts)?;
            for (a, &i) in rest.iter().enumerate() {
                for (c, &j) in cbig.iter().enumerate() {
                    p[i * m2 + j] = b.p_at(a, c);
                }
            }
        } else if rest.iter().any(|&i| rk[i] != 0) {
            return Err(Error::Infeasible("forced split leaves unplaced degree".into()));
        }
        return Ok(Some(p));
    }
    Ok(None)
}

/// Bipartite block where only the row degrees are constrained. Closed form:
/// every cell of row i has probability k_i / n2.
pub fn solve_bipartite_top_only(k: &[usize], n2: usize) -> Result<BlockSolution> {
    let n1 = k.len();
    if n1 == 0 || n2 == 0 {
        return Err(Error::EmptySequence);
    }
    if k.iter().any(|&x| x > n2) {
        return Err(Error::Infeasible(format!("row degree exceeds n2={n2}")));
    }
    let mut p = vec![0.0f64; n1 * n2];
    let mut boundary = false;
    for (i, &ki) in k.iter().enumerate() {
        let pi = ki as f64 / n2 as f64;
        if ki == 0 || ki == n2 {
            boundary = true;
        }
        for j in 0..n2 {
            p[i * n2 + j] = pi;
        }
    }
    Ok(BlockSolution {
        pair: (0, 1),
        kind: BlockKind::TopOnly,
        rows: n1,
        cols: n2,
        p,
        residual: 0.0,
        boundary,
    })
}

/// Count-constrained block: uniform probability L / capacity on every pair.
/// Intra blocks are stored as a square matrix with zero diagonal.
pub fn solve_link_count(rows: usize, cols: usize, intra: bool, l: usize) -> Result<BlockSolution> {
    let capacity = if intra { rows * (rows - 1) / 2 } else { rows * cols };
    if l > capacity {
        return Err(Error::Infeasible(format!("link count {l} exceeds capacity {capacity}")));
    }
    let pv = if capacity == 0 { 0.0 } else { l as f64 / capacity as f64 };
    let mut p = vec![pv; rows * cols];
    if intra {
        for i in 0..rows {
            p[i * cols + i] = 0.0;
        }
    }
    Ok(BlockSolution {
        pair: (0, 0),
        kind: BlockKind::LinkCount,
        rows,
        cols,
        p,
        residual: 0.0,
        boundary: pv == 0.0 || pv == 1.0,
    })
}

/// Solve every block of a model. Blocks are independent, so the full
/// canonical measure is the product of the block measures.
pub fn solve_model(spec: &ModelSpec, opts: SolveOptions) -> Result<CanonicalSolution> {
    let violations = spec.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidInput(format!(
            "invalid model: {}",
            violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }
    let mut blocks = Vec::new();
    for ((s, t), c) in spec.constraints.iter() {
        let mut b = match c {
            BlockConstraint::IntraDegrees(k) => {
                solve_unipartite(k, opts).map_err(|e| e.in_block(s, t))?
            }
            BlockConstraint::InterDegrees { forward, backward } => {
                solve_bipartite(forward, backward, opts).map_err(|e| e.in_block(s, t))?
            }
            BlockConstraint::LinkCount(l) => {
                let (rows, cols) = if s == t {
                    (spec.layer_sizes[s], spec.layer_sizes[s])
                } else {
                    (spec.layer_sizes[s], spec.layer_sizes[t])
                };
                solve_link_count(rows, cols, s == t, *l).map_err(|e| e.in_block(s, t))?
            }
        };
        b.pair = (s, t);
        blocks.push(b);
    }
    Ok(CanonicalSolution { blocks })
}

/// Log probability the block measure assigns to a 0/1 edge pattern given as
/// the block submatrix of `g`. Returns -inf when an edge contradicts a
/// forced probability.
pub fn block_log_prob(b: &BlockSolution, edges: &[(usize, usize)], capacity_cells: &[(usize, usize)]) -> f64 {
    let mut lp = 0.0;
    let edge_set: std::collections::HashSet<(usize, usize)> = edges.iter().copied().collect();
    for &(i, j) in capacity_cells {
        let p = b.p_at(i, j);
        let present = edge_set.contains(&(i, j));
        if present {
            if p == 0.0 {
                return f64::NEG_INFINITY;
            }
            lp += p.ln();
        } else {
            if p == 1.0 {
                return f64::NEG_INFINITY;
            }
            lp += ln_one_minus(p);
        }
    }
    lp
}

/// ln P_can(G) for a full model solution. Sums over admissible node pairs;
/// every block contributes independently.
pub fn log_prob(spec: &ModelSpec, sol: &CanonicalSolution, g: &MultilayerGraph) -> Result<f64> {
    if g.layer_sizes() != spec.layer_sizes.as_slice() {
        return Err(Error::Dimension("graph layer sizes do not match model".into()));
    }
    if !g.is_admissible(&spec.master) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut lp = 0.0;
    for b in &sol.blocks {
        let (s, t) = b.pair;
        let (rs, rt) = (g.layer_range(s), g.layer_range(t));
        let (offs, offt) = (rs.start, rt.start);
        if s == t {
            for i in rs.clone() {
                for j in (i + 1)..rt.end {
                    let p = b.p_at(i - offs, j - offt);
                    let present = g.has_edge(i, j);
                    lp += cell_log_prob(p, present)?;
                }
            }
        } else {
            for i in rs.clone() {
                for j in rt.clone() {
                    let p = b.p_at(i - offs, j - offt);
                    let present = g.has_edge(i, j);
                    lp += cell_log_prob(p, present)?;
                }
            }
        }
    }
    Ok(lp)
}

fn cell_log_prob(p: f64, present: bool) -> Result<f64> {
    Ok(if present {
        if p == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        p.ln()
    } else {
        if p == 1.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ln_one_minus(p)
    })
}

/// Sparse-regime approximation p_ij = k_i k_j / 2L for a uni-partite block.
pub fn sparse_p_hat(k: &[usize]) -> Result<Vec<f64>> {
    let n = k.len();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let two_l: usize = k.iter().sum();
    if two_l == 0 {
        return Ok(vec![0.0; n * n]);
    }
    let mut p = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = k[i] as f64 * k[j] as f64 / two_l as f64;
            }
        }
    }
    Ok(p)
}

/// Gaussian elimination with partial pivoting; consumes its inputs.
/// Returns None when the matrix is singular to working precision.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-14 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for c in (col + 1)..n {
            s -= a[col * n + c] * x[c];
        }
        x[col] = s / a[col * n + col];
    }
    Some(x)
}
