//! Stochastic domination on a finite product lattice, decided by the
//! feasibility of a monotone coupling as a max-flow problem.
//!
//! Network: `source → L_a` with capacity `d1(a)`, `L_a → R_a` uncapped,
//! `R_a → R_b` uncapped whenever `b` covers `a` (one coordinate one atom
//! higher), and `R_b → sink` with capacity `d2(b)`. Flow from `L_a` can reach
//! `R_b` exactly when `a ≤ b`, so `d1 ≼ d2` iff the max flow saturates the
//! source.

use std::collections::VecDeque;

use serde_json::json;

use super::ExactDistribution;
use crate::error::{Error, Result};
use crate::report::CheckReport;

const EPS: f64 = 1e-15;

/// Tolerance on the unsaturated source mass.
pub const DOMINATION_TOLERANCE: f64 = 1e-9;

struct Arc {
    to: usize,
    cap: f64,
}

struct Dinic {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic {
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
            level: vec![0; n],
            iter: vec![0; n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap });
        self.adj[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, cap: 0.0 });
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &a in &self.adj[v] {
                let arc = &self.arcs[a];
                if arc.cap > EPS && self.level[arc.to] < 0 {
                    self.level[arc.to] = self.level[v] + 1;
                    q.push_back(arc.to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: f64) -> f64 {
        if v == t {
            return pushed;
        }
        while self.iter[v] < self.adj[v].len() {
            let a = self.adj[v][self.iter[v]];
            let (to, cap) = (self.arcs[a].to, self.arcs[a].cap);
            if cap > EPS && self.level[v] < self.level[to] {
                let d = self.dfs(to, t, pushed.min(cap));
                if d > 0.0 {
                    self.arcs[a].cap -= d;
                    self.arcs[a ^ 1].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= 0.0 {
                    break;
                }
                flow += f;
            }
        }
    }

    /// Vertices reachable from `s` in the residual network.
    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &a in &self.adj[v] {
                let arc = &self.arcs[a];
                if arc.cap > EPS && !seen[arc.to] {
                    seen[arc.to] = true;
                    q.push_back(arc.to);
                }
            }
        }
        seen
    }
}

/// Value of the maximal monotone sub-coupling of `d1` under `d2`, plus the
/// configurations of an up-set `U` with `d1(U) > d2(U)` when the flow falls short.
pub fn max_flow_coupling(
    d1: &ExactDistribution,
    d2: &ExactDistribution,
) -> Result<(f64, Vec<usize>)> {
    if !d1.same_space(d2) || d1.edges() != d2.edges() {
        return Err(Error::StateSpaceMismatch(format!(
            "{} vs {}",
            d1.label(),
            d2.label()
        )));
    }
    let n = d1.len();
    let (source, sink) = (2 * n, 2 * n + 1);
    let mut net = Dinic::new(2 * n + 2);
    let slots = d1.edges().len();
    for a in 0..n {
        if d1.probs()[a] > 0.0 {
            net.add(source, a, d1.probs()[a]);
        }
        net.add(a, n + a, f64::INFINITY);
        if d2.probs()[a] > 0.0 {
            net.add(n + a, sink, d2.probs()[a]);
        }
        let idx = d1.indices(a);
        for s in 0..slots {
            if idx[s] + 1 < d1.atoms(s).len() {
                let mut up = idx.clone();
                up[s] += 1;
                net.add(n + a, n + d1.encode(&up), f64::INFINITY);
            }
        }
    }
    let flow = net.max_flow(source, sink);
    // residual-reachable right nodes form an up-set carrying more d1 than d2 mass
    let seen = net.reachable(source);
    let witness = (0..n).filter(|&b| seen[n + b]).collect();
    Ok((flow, witness))
}

/// Decide `d1 ≼ d2` exactly. The report's deviation is the unsaturated mass `1 − flow`.
pub fn verify_stochastic_domination(
    d1: &ExactDistribution,
    d2: &ExactDistribution,
) -> Result<CheckReport> {
    let (flow, upset) = max_flow_coupling(d1, d2)?;
    let mut report = CheckReport::new(
        "stochastic_domination",
        format!("{} <= {}", d1.label(), d2.label()),
    );
    let deficit = 1.0 - flow;
    report.record(deficit, deficit <= DOMINATION_TOLERANCE, || {
        let m1: f64 = upset.iter().map(|&b| d1.probs()[b]).sum();
        let m2: f64 = upset.iter().map(|&b| d2.probs()[b]).sum();
        json!({"flow": flow, "upset_size": upset.len(), "d1_mass": m1, "d2_mass": m2})
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Graph;
    use crate::measures::{exact_distribution, AtomicBaseMeasure, ModelSpec};

    fn table(probs: Vec<f64>, atoms: Vec<Vec<f64>>) -> ExactDistribution {
        let edges = (0..atoms.len()).collect();
        let lw = probs.iter().map(|p: &f64| p.ln()).collect();
        ExactDistribution::from_log_weights("t".into(), edges, atoms, lw)
    }

    #[test]
    fn identity_coupling() {
        let d = table(vec![0.1, 0.2, 0.3, 0.4], vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
        let r = verify_stochastic_domination(&d, &d).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn incomparable_pair_fails() {
        // mass on (2,1) versus mass on (1,2): neither dominates
        let atoms = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let a = table(vec![1e-300, 1.0, 1e-300, 1e-300], atoms.clone());
        let b = table(vec![1e-300, 1e-300, 1.0, 1e-300], atoms);
        let r = verify_stochastic_domination(&a, &b).unwrap();
        assert!(!r.passed);
        let r = verify_stochastic_domination(&b, &a).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn one_dimensional_matches_cdf_order() {
        let atoms = vec![vec![1.0, 2.0, 3.0]];
        let lo = table(vec![0.5, 0.3, 0.2], atoms.clone());
        let hi = table(vec![0.2, 0.3, 0.5], atoms);
        assert!(verify_stochastic_domination(&lo, &hi).unwrap().passed);
        assert!(!verify_stochastic_domination(&hi, &lo).unwrap().passed);
    }

    #[test]
    fn tilt_raises_k2_law() {
        let rho = AtomicBaseMeasure::two_point(0.5, 3.0).unwrap();
        let a = ModelSpec::homogeneous(Graph::complete(2), rho.clone(), vec![0.0], 3.0).unwrap();
        let b = a.with_xi(vec![0.4]).unwrap();
        let (da, db) = (exact_distribution(&a).unwrap(), exact_distribution(&b).unwrap());
        assert!(db.probs()[1] > da.probs()[1]);
        assert!(verify_stochastic_domination(&da, &db).unwrap().passed);
        assert!(!verify_stochastic_domination(&db, &da).unwrap().passed);
    }

    #[test]
    fn mismatched_spaces_rejected() {
        let a = table(vec![0.5, 0.5], vec![vec![1.0, 2.0]]);
        let b = table(vec![0.5, 0.5], vec![vec![1.0, 3.0]]);
        assert!(matches!(
            verify_stochastic_domination(&a, &b),
            Err(Error::StateSpaceMismatch(_))
        ));
    }
}
