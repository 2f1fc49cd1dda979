//! Self-checking inequality and identity suites for the conductance measures.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{exact_conditioned_distribution, exact_distribution, ExactDistribution, ModelSpec};
use crate::error::{Error, Result};
use crate::laplace::log_det_h0;
use crate::lattice::Graph;
use crate::report::CheckReport;
use crate::trees::{random_conductances, relative_deviation};

/// Log-scale slack allowed on inequalities evaluated through factorizations.
pub const FACTOR_SLACK: f64 = 1e-9;
/// Tolerance for identities evaluated on exact tables.
pub const TABLE_TOLERANCE: f64 = 1e-12;

/// Which density the lattice-condition suite scores. `NegatedExponent`
/// (`√det` instead of `1/√det`) is a seeded fault for exercising failure paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityVariant {
    Standard,
    NegatedExponent,
}

impl DensityVariant {
    pub fn log_density(self, g: &Graph, kappa: &[f64]) -> Result<f64> {
        let ld = log_det_h0(g, kappa)?;
        Ok(match self {
            DensityVariant::Standard => -0.5 * ld,
            DensityVariant::NegatedExponent => 0.5 * ld,
        })
    }
}

/// FKG lattice condition `s(κ₁∧κ₂) s(κ₁∨κ₂) ≥ s(κ₁) s(κ₂)` for uniform pairs
/// in `[1/λ, λ]^E`.
pub fn verify_lattice_condition<R: Rng + ?Sized>(
    spec: &ModelSpec,
    trials: usize,
    rng: &mut R,
    variant: DensityVariant,
) -> Result<CheckReport> {
    let g = spec.graph();
    let mut report = CheckReport::new("fkg_lattice_condition", g.label());
    for _ in 0..trials {
        let k1 = random_conductances(g, spec.lambda(), rng);
        let k2 = random_conductances(g, spec.lambda(), rng);
        let meet: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| a.min(*b)).collect();
        let join: Vec<f64> = k1.iter().zip(&k2).map(|(a, b)| a.max(*b)).collect();
        let slack = variant.log_density(g, &meet)? + variant.log_density(g, &join)?
            - variant.log_density(g, &k1)?
            - variant.log_density(g, &k2)?;
        report.record(-slack, slack >= -FACTOR_SLACK, || {
            json!({"kappa1": k1, "kappa2": k2, "slack": slack})
        });
    }
    Ok(report)
}

fn draw_pair<R: Rng + ?Sized>(spec: &ModelSpec, e: usize, rng: &mut R) -> (f64, f64) {
    let rho = spec.rho(e);
    let (lo, hi) = if rho.max_atom() > rho.min_atom() {
        (rho.min_atom(), rho.max_atom())
    } else {
        (spec.lambda().recip(), spec.lambda())
    };
    loop {
        let a = rng.random_range(lo..=hi);
        let b = rng.random_range(lo..=hi);
        if a != b {
            return (a.min(b), a.max(b));
        }
    }
}

/// `det Δ_{κ⁺⁺} det Δ_{κ⁻⁻} ≤ det Δ_{κ⁺⁻} det Δ_{κ⁻⁺}` for random κ and
/// random pairs of distinct non-loop edges.
pub fn verify_two_edge_inequality<R: Rng + ?Sized>(
    spec: &ModelSpec,
    trials: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let g = spec.graph();
    let edges = g.non_loop_positions();
    let mut report = CheckReport::new("two_edge_inequality", g.label());
    if edges.len() < 2 {
        report.fail("needs two non-loop edges");
        return Ok(report);
    }
    for _ in 0..trials {
        let mut kappa = random_conductances(g, spec.lambda(), rng);
        let f = *edges.choose(rng).expect("non-empty");
        let h = loop {
            let h = *edges.choose(rng).expect("non-empty");
            if h != f {
                break h;
            }
        };
        let (f_lo, f_hi) = draw_pair(spec, f, rng);
        let (h_lo, h_hi) = draw_pair(spec, h, rng);
        let mut ld = |a: f64, b: f64| -> Result<f64> {
            kappa[f] = a;
            kappa[h] = b;
            log_det_h0(g, &kappa)
        };
        let pp = ld(f_hi, h_hi)?;
        let mm = ld(f_lo, h_lo)?;
        let pm = ld(f_hi, h_lo)?;
        let mp = ld(f_lo, h_hi)?;
        let slack = pm + mp - pp - mm;
        report.record(-slack, slack >= -FACTOR_SLACK, || {
            json!({"f": f, "g": h, "c_f": [f_lo, f_hi], "c_g": [h_lo, h_hi], "slack": slack})
        });
    }
    Ok(report)
}

/// Single-edge determinant ratios ordered subgraph ≥ graph ≥ contraction:
/// `det^{G'}(κ⁺)/det^{G'}(κ⁻) ≥ det^G(κ⁺)/det^G(κ⁻) ≥ det^{G/F}(κ⁺)/det^{G/F}(κ⁻)`.
///
/// `sub` must be derived from `spec.graph()` by restriction and `contracted`
/// by a quotient; both are matched by edge id.
pub fn verify_det_monotonicity<R: Rng + ?Sized>(
    spec: &ModelSpec,
    sub: &Graph,
    contracted: &Graph,
    trials: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let g = spec.graph();
    let sub_pos: Vec<Option<usize>> = g.edges().iter().map(|e| sub.edge_position(e.id)).collect();
    let con_pos: Vec<Option<usize>> = g
        .edges()
        .iter()
        .map(|e| contracted.edge_position(e.id))
        .collect();
    let candidates: Vec<usize> = (0..g.num_edges())
        .filter(|&e| {
            matches!((sub_pos[e], con_pos[e]), (Some(s), Some(c))
                if !sub.edge(s).is_loop() && !contracted.edge(c).is_loop() && !g.edge(e).is_loop())
        })
        .collect();
    let mut report = CheckReport::new(
        "det_ratio_monotonicity",
        format!("{} ⊂ {} → {}", sub.label(), g.label(), contracted.label()),
    );
    if candidates.is_empty() {
        report.fail("no edge common to subgraph and contraction");
        return Ok(report);
    }
    let project = |kappa: &[f64], other: &Graph| -> Vec<f64> {
        other
            .edges()
            .iter()
            .map(|e| kappa[g.edge_position(e.id).expect("edge of parent")])
            .collect()
    };
    for _ in 0..trials {
        let mut kappa = random_conductances(g, spec.lambda(), rng);
        let f = *candidates.choose(rng).expect("non-empty");
        let (lo, hi) = draw_pair(spec, f, rng);
        let mut ratio = |graph: &Graph, on_parent: bool| -> Result<f64> {
            kappa[f] = hi;
            let kp = if on_parent { kappa.clone() } else { project(&kappa, graph) };
            kappa[f] = lo;
            let km = if on_parent { kappa.clone() } else { project(&kappa, graph) };
            Ok(log_det_h0(graph, &kp)? - log_det_h0(graph, &km)?)
        };
        let r_sub = ratio(sub, false)?;
        let r_g = ratio(g, true)?;
        let r_con = ratio(contracted, false)?;
        let slack = (r_sub - r_g).min(r_g - r_con);
        report.record(-slack, slack >= -FACTOR_SLACK, || {
            json!({"edge": f, "c": [lo, hi], "sub": r_sub, "graph": r_g, "contracted": r_con})
        });
    }
    Ok(report)
}

/// Random increasing events `∩ {κ_s ≥ a_s}` must be non-negatively correlated.
pub fn verify_fkg_inequality<R: Rng + ?Sized>(
    dist: &ExactDistribution,
    trials: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    let slots = dist.edges().len();
    let mut report = CheckReport::new("fkg_inequality", dist.label().to_string());
    let draw_event = |rng: &mut R| -> Vec<(usize, usize)> {
        let k = rng.random_range(1..=slots.min(3));
        (0..k)
            .map(|_| {
                let s = rng.random_range(0..slots);
                let t = rng.random_range(0..dist.atoms(s).len());
                (s, t)
            })
            .collect()
    };
    for _ in 0..trials {
        let x = draw_event(rng);
        let y = draw_event(rng);
        let (mut px, mut py, mut pxy) = (0.0, 0.0, 0.0);
        for i in 0..dist.len() {
            let idx = dist.indices(i);
            let ix = x.iter().all(|&(s, t)| idx[s] >= t);
            let iy = y.iter().all(|&(s, t)| idx[s] >= t);
            let p = dist.probs()[i];
            if ix {
                px += p;
            }
            if iy {
                py += p;
            }
            if ix && iy {
                pxy += p;
            }
        }
        let cov = pxy - px * py;
        report.record(-cov, cov >= -TABLE_TOLERANCE, || {
            json!({"x": x, "y": y, "cov": cov})
        });
    }
    Ok(report)
}

/// Reweighting identity `μ[ξ+δξ](f) = μ[ξ](f e^{Σδξκ}) / μ[ξ](e^{Σδξκ})`,
/// checked entrywise on the tables.
pub fn verify_covariance_identities(spec: &ModelSpec, delta_xi: &[f64]) -> Result<CheckReport> {
    if delta_xi.len() != spec.num_edges() {
        return Err(Error::InvalidParameter("δξ has the wrong length".into()));
    }
    let base = exact_distribution(spec)?;
    let xi: Vec<f64> = spec.xi().iter().zip(delta_xi).map(|(a, b)| a + b).collect();
    let shifted = exact_distribution(&spec.with_xi(xi)?)?;
    let reweighted: Vec<f64> = (0..base.len())
        .map(|i| {
            let k = base.values(i);
            let tilt: f64 = k.iter().zip(delta_xi).map(|(a, b)| a * b).sum();
            base.probs()[i].ln() + tilt
        })
        .collect();
    let norm = super::log_sum_exp(&reweighted);
    let mut report = CheckReport::new("shift_reweighting", spec.graph().label());
    let mut worst: f64 = 0.0;
    for (i, lw) in reweighted.iter().enumerate() {
        worst = worst.max(relative_deviation((lw - norm).exp(), shifted.probs()[i]));
    }
    report.record(worst, worst <= TABLE_TOLERANCE, || json!({"delta_xi": delta_xi}));
    Ok(report)
}

/// Translation identity `μ[ξ](f∘τ) = μ[τξ](f)` for an edge permutation `perm`
/// that is a graph automorphism: `perm[e]` is the image of edge `e`.
pub fn verify_translation_identity(spec: &ModelSpec, perm: &[usize]) -> Result<CheckReport> {
    let m = spec.num_edges();
    let mut seen = vec![false; m];
    if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidParameter("not an edge permutation".into()));
    }
    // (τξ)_{τ(e)} = ξ_e
    let mut moved_xi = vec![0.0; m];
    for e in 0..m {
        moved_xi[perm[e]] = spec.xi()[e];
    }
    let base = exact_distribution(spec)?;
    let moved = exact_distribution(&spec.with_xi(moved_xi)?)?;
    if !base.same_space(&moved) {
        return Err(Error::StateSpaceMismatch("base measures differ".into()));
    }
    let mut report = CheckReport::new("shift_translation", spec.graph().label());
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let idx = base.indices(i);
        let mut image = vec![0; m];
        for e in 0..m {
            image[perm[e]] = idx[e];
        }
        let j = moved.encode(&image);
        worst = worst.max(relative_deviation(base.probs()[i], moved.probs()[j]));
    }
    report.record(worst, worst <= TABLE_TOLERANCE, || json!({"perm": perm}));
    Ok(report)
}

/// Domain Markov property: the full law conditioned on `κ = α` off
/// `free_edges` equals the boundary-conditioned law. `alpha` gives atom
/// indices for every edge; entries on `free_edges` are ignored.
pub fn verify_domain_markov(
    spec: &ModelSpec,
    free_edges: &[usize],
    alpha: &[usize],
) -> Result<CheckReport> {
    let full = exact_distribution(spec)?;
    let fixed: Vec<(usize, usize)> = (0..spec.num_edges())
        .filter(|e| !free_edges.contains(e))
        .map(|e| (e, alpha[e]))
        .collect();
    let conditioned = full.condition(&fixed)?;
    let alpha_values: Vec<f64> = alpha
        .iter()
        .enumerate()
        .map(|(e, &i)| spec.rho(e).atoms()[i])
        .collect();
    let mut sorted = free_edges.to_vec();
    sorted.sort_unstable();
    let direct = exact_conditioned_distribution(spec, &sorted, &alpha_values)?;
    let mut report = CheckReport::new("domain_markov", spec.graph().label());
    let worst = conditioned
        .probs()
        .iter()
        .zip(direct.probs())
        .map(|(a, b)| relative_deviation(*a, *b))
        .fold(0.0, f64::max);
    report.record(worst, worst <= TABLE_TOLERANCE, || {
        json!({"free_edges": free_edges, "alpha": alpha})
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomicBaseMeasure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(g: Graph, xi: Option<Vec<f64>>) -> ModelSpec {
        let m = g.num_edges();
        let rho = AtomicBaseMeasure::new(vec![1.0, 2.0, 4.0], vec![0.3, 0.3, 0.4]).unwrap();
        ModelSpec::homogeneous(g, rho, xi.unwrap_or(vec![0.0; m]), 4.0).unwrap()
    }

    #[test]
    fn comparable_pair_gives_equality() {
        let g = Graph::build_box(2, 1);
        let k1 = vec![0.5; 12];
        let k2 = vec![2.0; 12];
        let v = DensityVariant::Standard;
        let meet = k1.clone();
        let join = k2.clone();
        let slack = v.log_density(&g, &meet).unwrap() + v.log_density(&g, &join).unwrap()
            - v.log_density(&g, &k1).unwrap()
            - v.log_density(&g, &k2).unwrap();
        assert_eq!(slack, 0.0);
    }

    #[test]
    fn lattice_condition_and_fault() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = spec(Graph::build_box(2, 1), None);
        let ok = verify_lattice_condition(&s, 200, &mut rng, DensityVariant::Standard).unwrap();
        assert!(ok.passed, "{ok:?}");
        let bad =
            verify_lattice_condition(&s, 200, &mut rng, DensityVariant::NegatedExponent).unwrap();
        assert!(!bad.passed);
        assert!(!bad.witnesses.is_empty());
    }

    #[test]
    fn two_edge_inequality_k3_matches_tree_sums() {
        // on K3 the tree sum is κ₀κ₁ + κ₁κ₂ + κ₀κ₂; check the sign by hand
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let k: Vec<f64> = (0..3).map(|_| rng.random_range(0.25..4.0)).collect();
            let (a, b) = (rng.random_range(0.25..4.0f64), rng.random_range(0.25..4.0f64));
            let (c, d) = (rng.random_range(0.25..4.0f64), rng.random_range(0.25..4.0f64));
            let (f_lo, f_hi) = (a.min(b), a.max(b));
            let (g_lo, g_hi) = (c.min(d), c.max(d));
            let t = |x: f64, y: f64| x * y + y * k[2] + x * k[2];
            assert!(t(f_hi, g_hi) * t(f_lo, g_lo) <= t(f_hi, g_lo) * t(f_lo, g_hi) * (1.0 + 1e-12));
        }
        let r = verify_two_edge_inequality(&spec(Graph::complete(3), None), 200, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn monotonicity_on_small_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Graph::build_box(2, 2);
        let inner: Vec<usize> = (0..g.num_vertices())
            .filter(|&v| g.root_coords(v).unwrap().iter().all(|c| c.abs() <= 1))
            .collect();
        let sub = g.induced_subgraph(&inner).unwrap();
        let wired = g.wire_boundary().unwrap();
        let r = verify_det_monotonicity(&spec(g, None), &sub, &wired, 200, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn fkg_on_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = exact_distribution(&spec(Graph::complete(4), Some(vec![0.3, -0.2, 0.1, 0.0, 0.5, -0.4])))
            .unwrap();
        let r = verify_fkg_inequality(&d, 300, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn reweighting_identity() {
        let s = spec(Graph::complete(2), None);
        let r = verify_covariance_identities(&s, &[0.0]).unwrap();
        assert!(r.passed && r.max_deviation == 0.0, "{r:?}");
        let r = verify_covariance_identities(&s, &[0.7]).unwrap();
        assert!(r.passed && r.max_deviation < 1e-14, "{r:?}");
        let s = spec(Graph::complete(3), Some(vec![0.2, -0.1, 0.3]));
        let r = verify_covariance_identities(&s, &[0.5, 0.0, -0.25]).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn cycle_rotation() {
        let s = spec(Graph::cycle(4), Some(vec![0.3, -0.1, 0.25, 0.05]));
        let perm = s.graph().edge_image(|v| (v + 1) % 4).unwrap();
        assert_eq!(perm, vec![1, 2, 3, 0]);
        let r = verify_translation_identity(&s, &perm).unwrap();
        assert!(r.passed, "{r:?}");
        // a relabeling that is not an automorphism of the weights breaks it
        let bad = Graph::from_edges("kite", 4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let s = spec(bad, Some(vec![0.3, -0.1, 0.25, 0.05, 0.0]));
        let r = verify_translation_identity(&s, &[1, 2, 3, 4, 0]).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn domain_markov_k3() {
        let s = spec(Graph::complete(3), Some(vec![0.1, 0.2, -0.3]));
        for a in 0..3 {
            let r = verify_domain_markov(&s, &[0, 1], &[0, 0, a]).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }
}
