//! Conductance measures: atomic base measures, disorder fields, the tilted
//! determinant density and its exact enumeration.
//!
//! The unnormalized log-weight of a configuration `κ` on a graph `G` is
//!
//! ```text
//! −½ ln det Δ_κ|_{H_0} + Σ_e (ξ_e κ_e + ln w_e(κ_e))
//! ```
//!
//! where `w_e` is the atom weight of `κ_e` under the base measure of edge `e`.

mod exact;
mod flow;
mod verify;

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::log_det_h0;
use crate::lattice::Graph;

pub use exact::{exact_conditioned_distribution, exact_distribution, ExactDistribution};
pub use flow::{max_flow_coupling, verify_stochastic_domination};
pub use verify::{
    verify_covariance_identities, verify_det_monotonicity, verify_domain_markov,
    verify_fkg_inequality, verify_lattice_condition, verify_translation_identity,
    verify_two_edge_inequality, DensityVariant,
};

/// Upper limit on the size of an enumerated probability table.
pub const MAX_TABLE_SIZE: f64 = 2e6;

/// Finite atomic measure `Σ_i w_i δ_{a_i}` with atoms sorted ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicBaseMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicBaseMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidMeasure("atoms must be positive".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidMeasure("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidMeasure("repeated atom".into()));
        }
        let (atoms, weights) = pairs.into_iter().unzip();
        Ok(AtomicBaseMeasure { atoms, weights })
    }

    pub fn point_mass(a: f64) -> Result<Self> {
        Self::new(vec![a], vec![1.0])
    }

    /// `p δ_q + (1 − p) δ_1`.
    pub fn two_point(p: f64, q: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidMeasure(format!("p = {p} not in (0,1)")));
        }
        Self::new(vec![1.0, q], vec![1.0 - p, p])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_atom(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max_atom(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.atoms
            .iter()
            .position(|&a| (a - value).abs() <= 1e-12 * a.abs().max(1.0))
    }

    /// Atoms lie in `[1/λ, λ]`.
    pub fn within(&self, lambda: f64) -> bool {
        let tol = 1e-12 * lambda;
        self.min_atom() >= lambda.recip() - tol && self.max_atom() <= lambda + tol
    }
}

/// `V(s) = −ln Σ_i w_i exp(−a_i s²/2 + ξ a_i)`.
pub fn potential_value(rho: &AtomicBaseMeasure, xi: f64, s: f64) -> f64 {
    let terms: Vec<f64> = rho
        .atoms()
        .iter()
        .zip(rho.weights())
        .map(|(&a, &w)| w.ln() - 0.5 * a * s * s + xi * a)
        .collect();
    -log_sum_exp(&terms)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `p(ξ) = e^ξ / (e^ξ + e^{ξ q})`.
pub fn p_from_xi(xi: f64, q: f64) -> f64 {
    1.0 / (1.0 + (xi * (q - 1.0)).exp())
}

/// Inverse of [`p_from_xi`]: `ξ = ln((1 − p)/p) / (q − 1)`.
pub fn xi_from_p(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} not in (0,1)")));
    }
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must exceed 1")));
    }
    Ok(((1.0 - p) / p).ln() / (q - 1.0))
}

/// Solution of `p⁴/(1 − p)⁴ = q`.
pub fn self_dual_p(q: f64) -> f64 {
    let r = q.powf(0.25);
    r / (1.0 + r)
}

/// I.i.d. disorder law for `ξ_e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisorderDistribution {
    None,
    /// `±a` with probability ½ each.
    TwoPoint { a: f64 },
    /// Uniform on `(−a, a)`.
    Uniform { a: f64 },
    /// Centered Gaussian with deviation `sigma`, conditioned on `|ξ| ≤ cutoff`.
    GaussianTruncated { sigma: f64, cutoff: f64 },
}

impl DisorderDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            DisorderDistribution::None => "none",
            DisorderDistribution::TwoPoint { .. } => "two_point",
            DisorderDistribution::Uniform { .. } => "uniform",
            DisorderDistribution::GaussianTruncated { .. } => "gaussian_truncated",
        }
    }

    /// Main scale parameter (for CSV output).
    pub fn param(&self) -> f64 {
        match *self {
            DisorderDistribution::None => 0.0,
            DisorderDistribution::TwoPoint { a } | DisorderDistribution::Uniform { a } => a,
            DisorderDistribution::GaussianTruncated { sigma, .. } => sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DisorderDistribution::None => true,
            DisorderDistribution::TwoPoint { a } | DisorderDistribution::Uniform { a } => {
                a.is_finite() && a >= 0.0
            }
            DisorderDistribution::GaussianTruncated { sigma, cutoff } => {
                sigma.is_finite() && sigma > 0.0 && cutoff.is_finite() && cutoff > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad disorder law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DisorderDistribution::None => 0.0,
            DisorderDistribution::TwoPoint { a } => {
                if rng.random::<bool>() {
                    a
                } else {
                    -a
                }
            }
            DisorderDistribution::Uniform { a } => {
                if a == 0.0 {
                    0.0
                } else {
                    rng.random_range(-a..a)
                }
            }
            DisorderDistribution::GaussianTruncated { sigma, cutoff } => loop {
                let z: f64 = rng.sample(StandardNormal);
                let x = sigma * z;
                if x.abs() <= cutoff {
                    break x;
                }
            },
        }
    }
}

/// Per-edge disorder values with their sampling provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderField {
    pub values: Vec<f64>,
    pub distribution: DisorderDistribution,
    pub stream: Option<u64>,
}

impl DisorderField {
    pub fn zero(num_edges: usize) -> Self {
        DisorderField {
            values: vec![0.0; num_edges],
            distribution: DisorderDistribution::None,
            stream: None,
        }
    }

    pub fn fixed(values: Vec<f64>) -> Self {
        DisorderField {
            values,
            distribution: DisorderDistribution::None,
            stream: None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        num_edges: usize,
        distribution: DisorderDistribution,
        rng: &mut R,
    ) -> Self {
        let values = (0..num_edges).map(|_| distribution.sample(rng)).collect();
        DisorderField {
            values,
            distribution,
            stream: None,
        }
    }
}

/// A graph with per-edge base measures, a disorder field and the box `λ`.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    graph: Arc<Graph>,
    rho: Vec<AtomicBaseMeasure>,
    xi: Vec<f64>,
    lambda: f64,
}

impl ModelSpec {
    pub fn new(
        graph: impl Into<Arc<Graph>>,
        rho: Vec<AtomicBaseMeasure>,
        xi: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let graph = graph.into();
        let m = graph.num_edges();
        if rho.len() != m || xi.len() != m {
            return Err(Error::InvalidParameter(format!(
                "{m} edges but {} base measures and {} disorder values",
                rho.len(),
                xi.len()
            )));
        }
        if !(lambda >= 1.0) {
            return Err(Error::InvalidParameter(format!("λ = {lambda} < 1")));
        }
        if let Some(e) = rho.iter().position(|r| !r.within(lambda)) {
            return Err(Error::InvalidMeasure(format!(
                "atoms of edge {e} leave [1/λ, λ] for λ = {lambda}"
            )));
        }
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite disorder".into()));
        }
        if !graph.is_connected() {
            return Err(Error::Disconnected(graph.num_vertices()));
        }
        Ok(ModelSpec {
            graph,
            rho,
            xi,
            lambda,
        })
    }

    /// Same base measure on every edge.
    pub fn homogeneous(
        graph: impl Into<Arc<Graph>>,
        rho: AtomicBaseMeasure,
        xi: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let graph = graph.into();
        let m = graph.num_edges();
        Self::new(graph, vec![rho; m], xi, lambda)
    }

    /// The same edge data on another graph with the same edge list
    /// (e.g. the wired quotient of a box).
    pub fn on_graph(&self, graph: impl Into<Arc<Graph>>) -> Result<Self> {
        let graph = graph.into();
        let same = graph.num_edges() == self.graph.num_edges()
            && graph
                .edges()
                .iter()
                .zip(self.graph.edges())
                .all(|(a, b)| a.id == b.id);
        if !same {
            return Err(Error::StateSpaceMismatch(format!(
                "{} and {} have different edge lists",
                graph.label(),
                self.graph.label()
            )));
        }
        Self::new(graph, self.rho.clone(), self.xi.clone(), self.lambda)
    }

    pub fn with_xi(&self, xi: Vec<f64>) -> Result<Self> {
        Self::new(self.graph.clone(), self.rho.clone(), xi, self.lambda)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn rho(&self, e: usize) -> &AtomicBaseMeasure {
        &self.rho[e]
    }

    pub fn rhos(&self) -> &[AtomicBaseMeasure] {
        &self.rho
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn atom_indices(&self, kappa: &[f64]) -> Result<Vec<usize>> {
        kappa
            .iter()
            .enumerate()
            .map(|(e, &k)| {
                self.rho[e]
                    .index_of(k)
                    .ok_or(Error::NotAnAtom { edge: e, value: k })
            })
            .collect()
    }

    /// Product of the per-edge atom counts.
    pub fn table_size(&self) -> f64 {
        self.rho.iter().map(|r| r.len() as f64).product()
    }

    /// Unnormalized `ln` of the tilted density at `κ` (each `κ_e` an atom).
    pub fn config_log_weight(&self, kappa: &[f64]) -> Result<f64> {
        let idx = self.atom_indices(kappa)?;
        let local: f64 = idx
            .iter()
            .enumerate()
            .map(|(e, &i)| self.xi[e] * kappa[e] + self.rho[e].weights()[i].ln())
            .sum();
        Ok(-0.5 * log_det_h0(&self.graph, kappa)? + local)
    }

    /// Log-weight of `κ` on the edges `free_edges` with `alpha` plugged in
    /// everywhere else. `kappa` lists values for `free_edges` in order.
    pub fn boundary_conditioned_log_weight(
        &self,
        free_edges: &[usize],
        alpha: &[f64],
        kappa: &[f64],
    ) -> Result<f64> {
        if alpha.len() != self.num_edges() || kappa.len() != free_edges.len() {
            return Err(Error::InvalidParameter(
                "boundary configuration has the wrong length".into(),
            ));
        }
        let mut full = alpha.to_vec();
        for (&e, &k) in free_edges.iter().zip(kappa) {
            if e >= full.len() {
                return Err(Error::EdgeOutOfRange(e));
            }
            full[e] = k;
        }
        self.config_log_weight(&full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn base_measure_validation() {
        assert!(AtomicBaseMeasure::new(vec![], vec![]).is_err());
        assert!(AtomicBaseMeasure::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(AtomicBaseMeasure::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(AtomicBaseMeasure::new(vec![-1.0], vec![1.0]).is_err());
        let r = AtomicBaseMeasure::new(vec![3.0, 1.0], vec![0.25, 0.75]).unwrap();
        assert_eq!(r.atoms(), &[1.0, 3.0]);
        assert_eq!(r.weights(), &[0.75, 0.25]);
        assert!(r.within(3.0));
        assert!(!r.within(2.0));
    }

    #[test]
    fn potential_examples() {
        let delta1 = AtomicBaseMeasure::point_mass(1.0).unwrap();
        for s in [-2.0, 0.0, 0.7, 3.0] {
            assert_relative_eq!(potential_value(&delta1, 0.0, s), s * s / 2.0, epsilon = 1e-14);
        }
        let rho = AtomicBaseMeasure::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(potential_value(&rho, 0.0, 0.0), 0.0);
        let direct = -(0.5 * (-0.5f64).exp() + 0.5 * (-1.0f64).exp()).ln();
        assert_relative_eq!(potential_value(&rho, 0.0, 1.0), direct, max_relative = 1e-14);
        assert_relative_eq!(
            potential_value(&rho, 0.3, 1.1),
            potential_value(&rho, 0.3, -1.1)
        );
    }

    #[test]
    fn p_xi_bijection() {
        for q in [1.5, 4.0, 16.0] {
            assert_eq!(xi_from_p(0.5, q).unwrap(), 0.0);
        }
        for p in [0.01, 0.2, 0.5, 2.0 / 3.0, 0.97] {
            let xi = xi_from_p(p, 16.0).unwrap();
            assert_relative_eq!(p_from_xi(xi, 16.0), p, max_relative = 1e-14);
        }
        let xi = xi_from_p(2.0 / 3.0, 16.0).unwrap();
        assert_relative_eq!(xi, 0.5f64.ln() / 15.0, max_relative = 1e-14);
        let forward = xi.exp() / (xi.exp() + (16.0 * xi).exp());
        assert_relative_eq!(forward, 2.0 / 3.0, max_relative = 1e-14);
        assert!(xi_from_p(0.0, 2.0).is_err());
        assert!(xi_from_p(1.0, 2.0).is_err());
        assert!(xi_from_p(0.5, 1.0).is_err());
    }

    #[test]
    fn self_dual_point() {
        assert_relative_eq!(self_dual_p(16.0), 2.0 / 3.0, max_relative = 1e-15);
        let p = self_dual_p(7.0);
        assert_relative_eq!(p.powi(4) / (1.0 - p).powi(4), 7.0, max_relative = 1e-12);
    }

    #[test]
    fn k2_weight_ratio() {
        let rho = AtomicBaseMeasure::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let spec = ModelSpec::homogeneous(Graph::complete(2), rho, vec![0.0], 2.0).unwrap();
        let ratio = (spec.config_log_weight(&[2.0]).unwrap()
            - spec.config_log_weight(&[1.0]).unwrap())
        .exp();
        assert_relative_eq!(ratio, 0.5f64.sqrt(), max_relative = 1e-14);
        assert!(matches!(
            spec.config_log_weight(&[1.5]),
            Err(Error::NotAnAtom { .. })
        ));
    }

    #[test]
    fn tilt_multiplies_weight() {
        let g = Graph::complete(3);
        let rho = AtomicBaseMeasure::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let spec = ModelSpec::homogeneous(g, rho, vec![0.1, -0.2, 0.3], 2.0).unwrap();
        let kappa = [2.0, 1.0, 2.0];
        let base = spec.config_log_weight(&kappa).unwrap();
        let mut xi = spec.xi().to_vec();
        xi[2] += 0.7;
        let shifted = spec.with_xi(xi).unwrap().config_log_weight(&kappa).unwrap();
        assert_relative_eq!(shifted - base, 0.7 * 2.0, max_relative = 1e-13);
    }

    #[test]
    fn loops_carry_no_determinant() {
        let w = Graph::build_box(2, 1).wire_boundary().unwrap();
        let rho = AtomicBaseMeasure::new(vec![1.0, 2.0], vec![0.25, 0.75]).unwrap();
        let spec = ModelSpec::homogeneous(w.clone(), rho, vec![0.4; 12], 2.0).unwrap();
        let lp = (0..12).find(|&e| w.edge(e).is_loop()).unwrap();
        let mut a = vec![1.0; 12];
        let base = spec.config_log_weight(&a).unwrap();
        a[lp] = 2.0;
        let diff = spec.config_log_weight(&a).unwrap() - base;
        assert_relative_eq!(diff, 0.4 + 3f64.ln(), max_relative = 1e-13);
    }

    #[test]
    fn boundary_conditioned_reduces() {
        let g = Graph::complete(3);
        let rho = AtomicBaseMeasure::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let spec = ModelSpec::homogeneous(g, rho, vec![0.0; 3], 2.0).unwrap();
        let k = [2.0, 1.0, 2.0];
        assert_eq!(
            spec.boundary_conditioned_log_weight(&[0, 1, 2], &[1.0; 3], &k)
                .unwrap(),
            spec.config_log_weight(&k).unwrap()
        );
    }

    #[test]
    fn spec_rejects_atoms_outside_lambda() {
        let rho = AtomicBaseMeasure::two_point(0.5, 4.0).unwrap();
        assert!(ModelSpec::homogeneous(Graph::complete(2), rho.clone(), vec![0.0], 3.0).is_err());
        assert!(ModelSpec::homogeneous(Graph::complete(2), rho, vec![0.0], 4.0).is_ok());
    }

    #[test]
    fn disorder_samples_stay_in_support() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let laws = [
            DisorderDistribution::TwoPoint { a: 0.3 },
            DisorderDistribution::Uniform { a: 0.5 },
            DisorderDistribution::GaussianTruncated {
                sigma: 1.0,
                cutoff: 0.8,
            },
        ];
        for law in laws {
            let f = DisorderField::sample(500, law.clone(), &mut rng);
            let bound = match law {
                DisorderDistribution::GaussianTruncated { cutoff, .. } => cutoff,
                other => other.param(),
            };
            assert!(f.values.iter().all(|x| x.abs() <= bound));
        }
        let f = DisorderField::sample(10, DisorderDistribution::None, &mut rng);
        assert!(f.values.iter().all(|&x| x == 0.0));
    }
}
