//! Exact single-edge heat-bath dynamics for the tilted conductance measure,
//! monotone free/wired coupling and the alternating gradient/conductance sampler.

mod checkpoint;
mod coupled;
mod extended;

pub use checkpoint::{spec_digest, ChainCheckpoint, CHECKPOINT_VERSION};
pub use coupled::{CoupledEstimate, CoupledPair};
pub use extended::{check_gaussian_conditional, ExtendedState};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::LaplacianFactor;
use crate::measures::ModelSpec;
use crate::rng::StreamRng;

/// Minimum number of batches behind any batched-means standard error.
pub const MIN_BATCHES: usize = 20;
/// Floor for automatically chosen burn-in, in sweeps.
pub const MIN_BURN_IN: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Free,
    Wired,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Free => "free",
            Boundary::Wired => "wired",
        }
    }

    /// The spec on the graph this boundary condition lives on: the box itself
    /// for free, its wired quotient otherwise.
    pub fn apply(self, spec: &ModelSpec) -> Result<ModelSpec> {
        match self {
            Boundary::Free => Ok(spec.clone()),
            Boundary::Wired => spec.on_graph(spec.graph().wire_boundary()?),
        }
    }
}

/// Starting configuration of a chain.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Minimal,
    Maximal,
    Indices(Vec<usize>),
}

/// Normalized probabilities from log-weights.
fn normalize(logs: &mut [f64]) {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logs.iter_mut() {
        *l = (*l - m).exp();
        total += *l;
    }
    for l in logs.iter_mut() {
        *l /= total;
    }
}

/// Smallest index whose cumulative probability reaches `u`.
pub fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// One Markov chain on the conductance configurations of a spec.
#[derive(Clone, Debug)]
pub struct ChainState {
    spec: ModelSpec,
    idx: Vec<usize>,
    factor: LaplacianFactor,
    sweeps: u64,
    master_seed: u64,
    rng: StreamRng,
}

impl ChainState {
    pub fn new(spec: ModelSpec, init: Init, master_seed: u64, rng: StreamRng) -> Result<Self> {
        let m = spec.num_edges();
        let idx = match init {
            Init::Minimal => vec![0; m],
            Init::Maximal => (0..m).map(|e| spec.rho(e).len() - 1).collect(),
            Init::Indices(v) => {
                if v.len() != m {
                    return Err(Error::InvalidParameter("initial state has the wrong length".into()));
                }
                if let Some(e) = (0..m).find(|&e| v[e] >= spec.rho(e).len()) {
                    return Err(Error::InvalidParameter(format!("atom index out of range on edge {e}")));
                }
                v
            }
        };
        let kappa: Vec<f64> = (0..m).map(|e| spec.rho(e).atoms()[idx[e]]).collect();
        let factor = LaplacianFactor::new(spec.graph(), &kappa)?;
        Ok(ChainState {
            spec,
            idx,
            factor,
            sweeps: 0,
            master_seed,
            rng,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kappa(&self) -> &[f64] {
        self.factor.kappa()
    }

    pub fn atom_indices(&self) -> &[usize] {
        &self.idx
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn rng(&self) -> &StreamRng {
        &self.rng
    }

    pub fn factor(&self) -> &LaplacianFactor {
        &self.factor
    }

    /// Refactorize from the current κ. Checkpoints call this so that a
    /// restored chain and the original continue from the same numerical state.
    pub fn refresh(&mut self) -> Result<()> {
        self.factor.refresh()
    }

    /// Law of `κ_e` given all other conductances, over the atoms of edge `e`.
    pub fn edge_conditional(&self, e: usize) -> Vec<f64> {
        let rho = self.spec.rho(e);
        let xi = self.spec.xi()[e];
        let a0 = self.factor.kappa()[e];
        let r = self.factor.effective_resistance(e);
        let mut logs: Vec<f64> = rho
            .atoms()
            .iter()
            .zip(rho.weights())
            .map(|(&a, &w)| {
                // R_eff ≤ 1/a0, so the bracket stays ≥ a·R_eff > 0
                let ratio = (1.0 + (a - a0) * r).max(f64::MIN_POSITIVE);
                w.ln() + xi * a - 0.5 * ratio.ln()
            })
            .collect();
        normalize(&mut logs);
        logs
    }

    /// Resample edge `e` by inverse CDF at `u ∈ [0, 1)`.
    pub fn update_edge(&mut self, e: usize, u: f64) -> Result<()> {
        let probs = self.edge_conditional(e);
        self.set_atom(e, inverse_cdf(&probs, u))
    }

    fn set_atom(&mut self, e: usize, i: usize) -> Result<()> {
        if i == self.idx[e] {
            return Ok(());
        }
        self.idx[e] = i;
        let a = self.spec.rho(e).atoms()[i];
        match self.factor.update_edge_conductance(e, a) {
            // the factor has already been rebuilt for the new κ
            Ok(_) | Err(Error::BadMultiplier(_)) => Ok(()),
            Err(err) => Err(err),
        }
    }

    /// One pass over all edges in position (= id) order.
    pub fn heat_bath_sweep(&mut self) -> Result<()> {
        for e in 0..self.spec.num_edges() {
            let u: f64 = self.rng.random();
            self.update_edge(e, u)?;
        }
        self.sweeps += 1;
        Ok(())
    }

    pub(crate) fn advance_sweep_counter(&mut self) {
        self.sweeps += 1;
    }
}

/// Streaming batched-means accumulator for a vector observable.
#[derive(Clone, Debug)]
pub struct BatchedMeans {
    dim: usize,
    batch_size: u64,
    current: Vec<f64>,
    filled: u64,
    batches: Vec<Vec<f64>>,
}

impl BatchedMeans {
    pub fn new(dim: usize, batch_size: u64) -> Self {
        BatchedMeans {
            dim,
            batch_size: batch_size.max(1),
            current: vec![0.0; dim],
            filled: 0,
            batches: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (c, v) in self.current.iter_mut().zip(x) {
            *c += v;
        }
        self.filled += 1;
        if self.filled == self.batch_size {
            let n = self.batch_size as f64;
            self.batches.push(self.current.iter().map(|c| c / n).collect());
            self.current.iter_mut().for_each(|c| *c = 0.0);
            self.filled = 0;
        }
    }

    /// Complete batches only; a trailing partial batch is dropped.
    pub fn finish(self) -> Result<BatchedEstimate> {
        let b = self.batches.len();
        if b < MIN_BATCHES {
            return Err(Error::InsufficientBatches {
                got: b,
                need: MIN_BATCHES,
            });
        }
        let means: Vec<f64> = (0..self.dim)
            .map(|k| self.batches.iter().map(|r| r[k]).sum::<f64>() / b as f64)
            .collect();
        let ses = (0..self.dim)
            .map(|k| {
                let var = self
                    .batches
                    .iter()
                    .map(|r| (r[k] - means[k]).powi(2))
                    .sum::<f64>()
                    / (b - 1) as f64;
                (var / b as f64).sqrt()
            })
            .collect();
        Ok(BatchedEstimate {
            means,
            ses,
            batch_means: self.batches,
            batch_size: self.batch_size,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchedEstimate {
    pub means: Vec<f64>,
    pub ses: Vec<f64>,
    pub batch_means: Vec<Vec<f64>>,
    pub batch_size: u64,
}

impl BatchedEstimate {
    pub fn batches(&self) -> usize {
        self.batch_means.len()
    }

    /// Standard error of `Σ_k c_k · mean_k` from the batch series.
    pub fn linear_se(&self, coeffs: &[f64]) -> f64 {
        let b = self.batches() as f64;
        let comb: Vec<f64> = self
            .batch_means
            .iter()
            .map(|r| r.iter().zip(coeffs).map(|(x, c)| x * c).sum())
            .collect();
        let m = comb.iter().sum::<f64>() / b;
        let var = comb.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b - 1.0);
        (var / b).sqrt()
    }
}

/// Integrated autocorrelation time with Sokal's self-consistent window (`c = 5`).
pub fn integrated_autocorrelation_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..n {
        let ct = series[..n - t]
            .iter()
            .zip(&series[t..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64;
        tau += 2.0 * ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Per-edge marginal means of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeEstimate {
    pub means: Vec<f64>,
    pub ses: Vec<f64>,
    pub burn_in: u64,
    pub sweeps: u64,
    pub batches: usize,
}

/// Edge used for burn-in diagnostics: the central edge of a box, else edge 0.
pub(crate) fn probe_edge(spec: &ModelSpec) -> usize {
    spec.graph().central_edge().unwrap_or(0)
}

/// Run burn-in then `sweeps` measured sweeps. `burn_in = None` picks
/// `max(MIN_BURN_IN, 10 τ_int)` from a pilot on the probe edge, counting the
/// pilot itself towards burn-in.
pub fn run_estimation(
    chain: &mut ChainState,
    sweeps: u64,
    burn_in: Option<u64>,
    batches: usize,
) -> Result<EdgeEstimate> {
    let batches = batches.max(MIN_BATCHES);
    if sweeps < batches as u64 {
        return Err(Error::InsufficientBatches {
            got: sweeps as usize,
            need: batches,
        });
    }
    let burn = burn_in_chain(chain, burn_in)?;
    let m = chain.spec().num_edges();
    let mut acc = BatchedMeans::new(m, sweeps / batches as u64);
    for _ in 0..sweeps {
        chain.heat_bath_sweep()?;
        acc.push(chain.kappa());
    }
    let est = acc.finish()?;
    Ok(EdgeEstimate {
        batches: est.batches(),
        means: est.means,
        ses: est.ses,
        burn_in: burn,
        sweeps,
    })
}

fn burn_in_chain(chain: &mut ChainState, burn_in: Option<u64>) -> Result<u64> {
    match burn_in {
        Some(b) => {
            for _ in 0..b {
                chain.heat_bath_sweep()?;
            }
            Ok(b)
        }
        None => {
            let probe = probe_edge(chain.spec());
            let mut series = Vec::with_capacity(MIN_BURN_IN as usize);
            for _ in 0..MIN_BURN_IN {
                chain.heat_bath_sweep()?;
                series.push(chain.kappa()[probe]);
            }
            let target = ((10.0 * integrated_autocorrelation_time(&series)).ceil() as u64)
                .max(MIN_BURN_IN);
            for _ in MIN_BURN_IN..target {
                chain.heat_bath_sweep()?;
            }
            Ok(target)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Graph;
    use crate::measures::{exact_distribution, AtomicBaseMeasure};
    use crate::rng::{stream_rng, StreamId};
    use approx::assert_relative_eq;

    fn chain(spec: ModelSpec, seed: u64) -> ChainState {
        let rng = stream_rng(seed, StreamId::derive("test", &[]));
        ChainState::new(spec, Init::Minimal, seed, rng).unwrap()
    }

    fn half_half() -> AtomicBaseMeasure {
        AtomicBaseMeasure::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn k2_conditional_is_exact_marginal() {
        let spec = ModelSpec::homogeneous(Graph::complete(2), half_half(), vec![0.0], 2.0).unwrap();
        let c = chain(spec, 1);
        let p = c.edge_conditional(0);
        assert_relative_eq!(p[1], 2f64.sqrt() - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn point_mass_is_frozen() {
        let g = Graph::build_box(2, 1);
        let m = g.num_edges();
        let rho = AtomicBaseMeasure::point_mass(1.5).unwrap();
        let mut c = chain(ModelSpec::homogeneous(g, rho, vec![0.3; m], 2.0).unwrap(), 2);
        for _ in 0..5 {
            c.heat_bath_sweep().unwrap();
        }
        assert!(c.kappa().iter().all(|&k| k == 1.5));
    }

    #[test]
    fn transition_matrix_preserves_k3_table() {
        // single-edge kernel K_e(x, y) applied to the exact law returns it
        let rho = AtomicBaseMeasure::new(vec![1.0, 2.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        let spec =
            ModelSpec::homogeneous(Graph::complete(3), rho, vec![0.2, -0.4, 0.1], 3.0).unwrap();
        let d = exact_distribution(&spec).unwrap();
        for e in 0..3 {
            let mut next = vec![0.0; d.len()];
            for i in 0..d.len() {
                let c = ChainState::new(
                    spec.clone(),
                    Init::Indices(d.indices(i)),
                    0,
                    stream_rng(0, StreamId(0)),
                )
                .unwrap();
                let cond = c.edge_conditional(e);
                let mut idx = d.indices(i);
                for (a, p) in cond.iter().enumerate() {
                    idx[e] = a;
                    next[d.encode(&idx)] += d.probs()[i] * p;
                }
            }
            for (a, b) in next.iter().zip(d.probs()) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn batched_means_reject_few_batches() {
        let mut acc = BatchedMeans::new(1, 10);
        for i in 0..150 {
            acc.push(&[i as f64]);
        }
        assert!(matches!(acc.finish(), Err(Error::InsufficientBatches { got: 15, .. })));
    }

    #[test]
    fn iat_of_white_noise_is_near_one() {
        let mut rng = stream_rng(5, StreamId(1));
        let xs: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let tau = integrated_autocorrelation_time(&xs);
        assert!((0.8..1.3).contains(&tau), "{tau}");
    }

    #[test]
    fn k3_estimates_match_table() {
        let rho = AtomicBaseMeasure::new(vec![1.0, 3.0], vec![0.5, 0.5]).unwrap();
        let spec = ModelSpec::homogeneous(Graph::complete(3), rho, vec![0.3, 0.0, -0.2], 3.0).unwrap();
        let d = exact_distribution(&spec).unwrap();
        let mut c = chain(spec, 7);
        let est = run_estimation(&mut c, 20_000, Some(100), 20).unwrap();
        for e in 0..3 {
            assert!((est.means[e] - d.mean(e)).abs() <= 4.0 * est.ses[e], "{est:?}");
        }
    }
}
