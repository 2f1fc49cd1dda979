//! Brute-force spanning-tree enumeration: the independent ground truth for
//! Laplacian determinants and for the free/wired determinant comparison.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::laplace::log_det_h0;
use crate::lattice::{Graph, UnionFind};
use crate::report::CheckReport;

/// Enumeration guard on non-loop edges.
pub const MAX_ENUMERATION_EDGES: usize = 20;

/// Spanning trees of a graph as sorted lists of edge positions.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanningTreeSet {
    pub trees: Vec<Vec<usize>>,
}

impl SpanningTreeSet {
    /// Deletion–contraction over the non-loop edges in position order.
    pub fn enumerate(g: &Graph) -> Result<Self> {
        let edges = g.non_loop_positions();
        if edges.len() > MAX_ENUMERATION_EDGES {
            return Err(Error::GuardExceeded {
                what: "non-loop edges",
                value: edges.len() as f64,
                limit: MAX_ENUMERATION_EDGES as f64,
            });
        }
        let need = g.num_vertices().saturating_sub(1);
        let mut trees = Vec::new();
        let mut chosen = Vec::with_capacity(need);
        recurse(
            g,
            &edges,
            0,
            need,
            UnionFind::new(g.num_vertices()),
            &mut chosen,
            &mut trees,
        );
        Ok(SpanningTreeSet { trees })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// `Σ_t Π_{e∈t} κ_e`.
    pub fn weighted_sum(&self, kappa: &[f64]) -> f64 {
        self.trees.iter().map(|t| tree_weight(t, kappa)).sum()
    }
}

fn recurse(
    g: &Graph,
    edges: &[usize],
    idx: usize,
    need: usize,
    uf: UnionFind,
    chosen: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if chosen.len() == need {
        out.push(chosen.clone());
        return;
    }
    if edges.len() - idx < need - chosen.len() {
        return;
    }
    let e = g.edge(edges[idx]);
    // contract: take the edge if it joins two components
    let mut with = uf.clone();
    if with.union(e.tail, e.head) {
        chosen.push(edges[idx]);
        recurse(g, edges, idx + 1, need, with, chosen, out);
        chosen.pop();
    }
    // delete
    recurse(g, edges, idx + 1, need, uf, chosen, out);
}

pub fn tree_weight(tree: &[usize], kappa: &[f64]) -> f64 {
    tree.iter().map(|&e| kappa[e]).product()
}

/// `Σ_t Π_{e∈t} κ_e` over all spanning trees of `g`.
pub fn weighted_tree_sum(g: &Graph, kappa: &[f64]) -> Result<f64> {
    Ok(SpanningTreeSet::enumerate(g)?.weighted_sum(kappa))
}

/// Uniform conductances in `[1/λ, λ]` for every edge.
pub fn random_conductances<R: Rng + ?Sized>(g: &Graph, lambda: f64, rng: &mut R) -> Vec<f64> {
    (0..g.num_edges())
        .map(|_| rng.random_range(lambda.recip()..=lambda))
        .collect()
}

/// Compare `log_det_h0` against `ln(|V| · tree sum)` for random conductances.
/// Passing requires relative deviation ≤ 1e-10 on every trial.
pub fn verify_kirchhoff<R: Rng + ?Sized>(
    g: &Graph,
    trials: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<CheckReport> {
    const TOL: f64 = 1e-10;
    let trees = SpanningTreeSet::enumerate(g)?;
    let mut report = CheckReport::new("kirchhoff", g.label());
    for _ in 0..trials {
        let kappa = random_conductances(g, lambda, rng);
        let det = log_det_h0(g, &kappa)?;
        let oracle = (g.num_vertices() as f64 * trees.weighted_sum(&kappa)).ln();
        let dev = relative_deviation(det, oracle);
        report.record(dev, dev <= TOL, || {
            json!({"kappa": kappa, "log_det": det, "tree_log_det": oracle})
        });
    }
    Ok(report)
}

pub(crate) fn relative_deviation(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Tree-sum ratios for one conductance configuration on a box and its wiring.
#[derive(Clone, Debug)]
pub struct DetComparison {
    /// `ln(T_0(κ)) − ln(T_1(κ))` with `T_i` the tree sums (free, wired).
    pub log_tree_ratio: f64,
    /// `ln(det Δ⁰ / det Δ¹)`.
    pub log_det_ratio: f64,
    /// `ln(2^{2d|∂Λ|} λ^{|∂Λ|})`.
    pub log_constant: f64,
    /// `ln(|Λ^w| / |Λ|)`.
    pub log_volume_ratio: f64,
}

impl DetComparison {
    /// Slack of `T_0 ≤ 2^{2d|∂Λ|} λ^{|∂Λ|} T_1` (non-negative when it holds).
    pub fn free_over_wired_slack(&self) -> f64 {
        self.log_constant - self.log_tree_ratio
    }

    /// Slack of `T_1 ≤ λ^{|∂Λ|} 2^{2d|∂Λ|} T_0`.
    pub fn wired_over_free_slack(&self) -> f64 {
        self.log_constant + self.log_tree_ratio
    }

    /// Slack of the displayed lower bound `(|Λ^w|/|Λ|)(2^{2d}λ)^{|∂Λ|} ≤ det⁰/det¹`.
    pub fn displayed_lower_slack(&self) -> f64 {
        self.log_det_ratio - (self.log_volume_ratio + self.log_constant)
    }

    /// Slack of the displayed upper bound `det⁰/det¹ ≤ (2^{2d}λ)^{|∂Λ|}`.
    pub fn displayed_upper_slack(&self) -> f64 {
        self.log_constant - self.log_det_ratio
    }
}

/// Check the tree-level free/wired comparison inequalities on a box small
/// enough for enumeration. Violations of the two tree inequalities fail the
/// report; the displayed two-sided determinant bound is evaluated and noted.
pub fn verify_det_ratio_bounds<R: Rng + ?Sized>(
    free: &Graph,
    trials: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<CheckReport> {
    let (dim, _) = free
        .box_shape()
        .filter(|_| free.is_plain_box())
        .ok_or_else(|| Error::NotABox(free.label()))?;
    let boundary = free.boundary_vertices()?.len() as f64;
    let wired = free.wire_boundary()?;
    let t0 = SpanningTreeSet::enumerate(free)?;
    let t1 = SpanningTreeSet::enumerate(&wired)?;
    let log_constant = boundary * (2.0 * dim as f64 * 2f64.ln() + lambda.ln());
    let log_volume_ratio = (wired.num_vertices() as f64 / free.num_vertices() as f64).ln();

    let mut report = CheckReport::new("det_ratio_bounds", free.label());
    let (mut lower_fail, mut upper_fail) = (0usize, 0usize);
    for _ in 0..trials {
        let kappa = random_conductances(free, lambda, rng);
        let (s0, s1) = (t0.weighted_sum(&kappa), t1.weighted_sum(&kappa));
        let cmp = DetComparison {
            log_tree_ratio: s0.ln() - s1.ln(),
            log_det_ratio: log_det_h0(free, &kappa)? - log_det_h0(&wired, &kappa)?,
            log_constant,
            log_volume_ratio,
        };
        let worst = cmp
            .free_over_wired_slack()
            .min(cmp.wired_over_free_slack());
        // exact tree sums: only roundoff can push the slack below zero
        let ok = worst >= -1e-12;
        report.record(-worst, ok, || {
            json!({"kappa": kappa, "tree_sum_free": s0, "tree_sum_wired": s1})
        });
        if cmp.displayed_lower_slack() < 0.0 {
            lower_fail += 1;
        }
        if cmp.displayed_upper_slack() < 0.0 {
            upper_fail += 1;
        }
    }
    report.note(format!(
        "displayed lower bound violated in {lower_fail}/{trials} trials"
    ));
    report.note(format!(
        "displayed upper bound violated in {upper_fail}/{trials} trials"
    ));
    Ok(report)
}

/// The pruning map `T_0 → T_1`: keep the interior edges of a free tree and
/// greedily add its remaining edges until it spans the wired box.
pub fn prune_to_wired(free: &Graph, wired: &Graph, tree: &[usize]) -> Vec<usize> {
    let boundary: BTreeSet<usize> = free
        .boundary_vertices()
        .expect("plain box")
        .into_iter()
        .collect();
    let interior = |p: usize| {
        let e = free.edge(p);
        !boundary.contains(&e.tail) && !boundary.contains(&e.head)
    };
    let mut uf = UnionFind::new(wired.num_vertices());
    let mut out = Vec::new();
    for &p in tree.iter().filter(|&&p| interior(p)) {
        let e = wired.edge(p);
        assert!(uf.union(e.tail, e.head), "interior edges stay acyclic");
        out.push(p);
    }
    for &p in tree.iter().filter(|&&p| !interior(p)) {
        let e = wired.edge(p);
        if uf.union(e.tail, e.head) {
            out.push(p);
        }
    }
    out.sort_unstable();
    out
}

/// Largest preimage count of the pruning map over all wired trees, together
/// with the counting bound `2^{2d|∂Λ|}`.
pub fn pruning_preimage_counts(free: &Graph) -> Result<(usize, f64)> {
    let (dim, _) = free.box_shape().ok_or_else(|| Error::NotABox(free.label()))?;
    let wired = free.wire_boundary()?;
    let t0 = SpanningTreeSet::enumerate(free)?;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for t in &t0.trees {
        *counts.entry(prune_to_wired(free, &wired, t)).or_default() += 1;
    }
    let boundary = free.boundary_vertices()?.len() as f64;
    let bound = 2f64.powf(2.0 * dim as f64 * boundary);
    Ok((counts.values().copied().max().unwrap_or(0), bound))
}
