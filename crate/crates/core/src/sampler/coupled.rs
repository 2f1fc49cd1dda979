use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BatchedMeans, ChainState, Init, MIN_BATCHES};
use crate::error::{Error, Result};
use crate::measures::ModelSpec;
use crate::rng::StreamRng;

/// Two heat-bath chains driven by one uniform per (edge, sweep).
///
/// `lower` starts at the minimal configuration and `upper` at the maximal one.
/// When the upper spec dominates the lower one (free box vs wired quotient,
/// or a smaller vs larger disorder field) the order `lower ≤ upper` is
/// preserved edgewise and checked after every update.
#[derive(Clone, Debug)]
pub struct CoupledPair {
    lower: ChainState,
    upper: ChainState,
    rng: StreamRng,
    sweeps: u64,
}

/// Coupled estimates of both marginals and of their difference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledEstimate {
    pub lower_means: Vec<f64>,
    pub lower_ses: Vec<f64>,
    pub upper_means: Vec<f64>,
    pub upper_ses: Vec<f64>,
    pub gap_means: Vec<f64>,
    pub gap_ses: Vec<f64>,
    pub sweeps: u64,
    pub burn_in: u64,
}

impl CoupledPair {
    pub fn new(lower: ModelSpec, upper: ModelSpec, master_seed: u64, rng: StreamRng) -> Result<Self> {
        let same_edges = lower.num_edges() == upper.num_edges()
            && lower
                .graph()
                .edges()
                .iter()
                .zip(upper.graph().edges())
                .all(|(a, b)| a.id == b.id)
            && lower.rhos() == upper.rhos();
        if !same_edges {
            return Err(Error::StateSpaceMismatch(format!(
                "{} and {} index different configuration spaces",
                lower.graph().label(),
                upper.graph().label()
            )));
        }
        // the chains' own streams are never drawn from
        let lower = ChainState::new(lower, Init::Minimal, master_seed, rng.clone())?;
        let upper = ChainState::new(upper, Init::Maximal, master_seed, rng.clone())?;
        Ok(CoupledPair {
            lower,
            upper,
            rng,
            sweeps: 0,
        })
    }

    /// Free chain on a box and wired chain on its quotient.
    pub fn free_wired(spec: &ModelSpec, master_seed: u64, rng: StreamRng) -> Result<Self> {
        let wired = spec.on_graph(spec.graph().wire_boundary()?)?;
        Self::new(spec.clone(), wired, master_seed, rng)
    }

    pub fn lower(&self) -> &ChainState {
        &self.lower
    }

    pub fn upper(&self) -> &ChainState {
        &self.upper
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn sweep(&mut self) -> Result<()> {
        for e in 0..self.lower.spec().num_edges() {
            let u: f64 = self.rng.random();
            self.lower.update_edge(e, u)?;
            self.upper.update_edge(e, u)?;
            let (lo, hi) = (self.lower.kappa()[e], self.upper.kappa()[e]);
            if lo > hi {
                return Err(Error::OrderingViolation {
                    edge: e,
                    sweep: self.sweeps,
                    free: lo,
                    wired: hi,
                });
            }
        }
        self.lower.advance_sweep_counter();
        self.upper.advance_sweep_counter();
        self.sweeps += 1;
        Ok(())
    }

    /// Burn in, then estimate per-edge means of both chains and their gap.
    pub fn run(&mut self, sweeps: u64, burn_in: u64, batches: usize) -> Result<CoupledEstimate> {
        let batches = batches.max(MIN_BATCHES);
        for _ in 0..burn_in {
            self.sweep()?;
        }
        let m = self.lower.spec().num_edges();
        let mut acc = BatchedMeans::new(3 * m, sweeps / batches as u64);
        let mut row = vec![0.0; 3 * m];
        for _ in 0..sweeps {
            self.sweep()?;
            for e in 0..m {
                let (lo, hi) = (self.lower.kappa()[e], self.upper.kappa()[e]);
                row[e] = lo;
                row[m + e] = hi;
                row[2 * m + e] = hi - lo;
            }
            acc.push(&row);
        }
        let est = acc.finish()?;
        Ok(CoupledEstimate {
            lower_means: est.means[..m].to_vec(),
            lower_ses: est.ses[..m].to_vec(),
            upper_means: est.means[m..2 * m].to_vec(),
            upper_ses: est.ses[m..2 * m].to_vec(),
            gap_means: est.means[2 * m..].to_vec(),
            gap_ses: est.ses[2 * m..].to_vec(),
            sweeps,
            burn_in,
        })
    }

    /// Sweep while feeding `(lower κ, upper κ)` to an observer.
    pub fn run_observed(
        &mut self,
        sweeps: u64,
        mut observe: impl FnMut(&[f64], &[f64]),
    ) -> Result<()> {
        for _ in 0..sweeps {
            self.sweep()?;
            observe(self.lower.kappa(), self.upper.kappa());
        }
        Ok(())
    }
}
