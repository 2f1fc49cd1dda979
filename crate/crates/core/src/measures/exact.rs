use serde::Serialize;

use super::{log_sum_exp, ModelSpec, MAX_TABLE_SIZE};
use crate::error::{Error, Result};
use crate::laplace::log_det_h0;

/// Full probability table over a product of atom sets.
///
/// Configurations are indexed in mixed radix with the first enumerated edge
/// varying fastest.
#[derive(Clone, Debug, Serialize)]
pub struct ExactDistribution {
    label: String,
    edges: Vec<usize>,
    atoms: Vec<Vec<f64>>,
    probs: Vec<f64>,
    log_z: f64,
}

impl ExactDistribution {
    pub(crate) fn from_log_weights(
        label: String,
        edges: Vec<usize>,
        atoms: Vec<Vec<f64>>,
        log_weights: Vec<f64>,
    ) -> Self {
        let log_z = log_sum_exp(&log_weights);
        let probs = log_weights.iter().map(|w| (w - log_z).exp()).collect();
        ExactDistribution {
            label,
            edges,
            atoms,
            probs,
            log_z,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Graph edge positions covered by the table, in slot order.
    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn atoms(&self, slot: usize) -> &[f64] {
        &self.atoms[slot]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `ln Z` of the unnormalized weights the table was built from.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn slot_of(&self, edge: usize) -> Option<usize> {
        self.edges.iter().position(|&e| e == edge)
    }

    pub fn indices(&self, mut i: usize) -> Vec<usize> {
        self.atoms
            .iter()
            .map(|a| {
                let k = i % a.len();
                i /= a.len();
                k
            })
            .collect()
    }

    pub fn encode(&self, indices: &[usize]) -> usize {
        let mut i = 0;
        for (k, a) in indices.iter().zip(&self.atoms).rev() {
            i = i * a.len() + k;
        }
        i
    }

    pub fn values(&self, i: usize) -> Vec<f64> {
        self.indices(i)
            .iter()
            .zip(&self.atoms)
            .map(|(&k, a)| a[k])
            .collect()
    }

    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len())
            .map(|i| self.probs[i] * f(&self.values(i)))
            .sum()
    }

    /// Mean of the conductance in `slot`.
    pub fn mean(&self, slot: usize) -> f64 {
        self.expectation(|k| k[slot])
    }

    pub fn variance(&self, slot: usize) -> f64 {
        let m = self.mean(slot);
        self.expectation(|k| (k[slot] - m).powi(2))
    }

    /// Law of the single conductance in `slot`, as probabilities over its atoms.
    pub fn single_marginal(&self, slot: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.atoms[slot].len()];
        for i in 0..self.len() {
            out[self.indices(i)[slot]] += self.probs[i];
        }
        out
    }

    /// Marginal on a subset of slots (kept in the given order).
    pub fn marginal(&self, slots: &[usize]) -> ExactDistribution {
        let atoms: Vec<Vec<f64>> = slots.iter().map(|&s| self.atoms[s].clone()).collect();
        let size: usize = atoms.iter().map(|a| a.len()).product();
        let mut probs = vec![0.0; size];
        let mut out = ExactDistribution {
            label: format!("{}|marginal", self.label),
            edges: slots.iter().map(|&s| self.edges[s]).collect(),
            atoms,
            probs: Vec::new(),
            log_z: 0.0,
        };
        for i in 0..self.len() {
            let idx = self.indices(i);
            let sub: Vec<usize> = slots.iter().map(|&s| idx[s]).collect();
            probs[out.encode(&sub)] += self.probs[i];
        }
        out.probs = probs;
        out
    }

    /// Condition on fixed atom indices for some slots; the result covers the
    /// remaining slots.
    pub fn condition(&self, fixed: &[(usize, usize)]) -> Result<ExactDistribution> {
        let keep: Vec<usize> = (0..self.edges.len())
            .filter(|s| fixed.iter().all(|(f, _)| f != s))
            .collect();
        let atoms: Vec<Vec<f64>> = keep.iter().map(|&s| self.atoms[s].clone()).collect();
        let size: usize = atoms.iter().map(|a| a.len()).product();
        let mut out = ExactDistribution {
            label: format!("{}|conditioned", self.label),
            edges: keep.iter().map(|&s| self.edges[s]).collect(),
            atoms,
            probs: vec![0.0; size],
            log_z: 0.0,
        };
        let mut total = 0.0;
        for i in 0..self.len() {
            let idx = self.indices(i);
            if fixed.iter().all(|&(s, k)| idx[s] == k) {
                let sub: Vec<usize> = keep.iter().map(|&s| idx[s]).collect();
                let j = out.encode(&sub);
                out.probs[j] += self.probs[i];
                total += self.probs[i];
            }
        }
        if total <= 0.0 {
            return Err(Error::InvalidParameter("conditioning on a null event".into()));
        }
        for p in out.probs.iter_mut() {
            *p /= total;
        }
        out.log_z = total.ln();
        Ok(out)
    }

    pub fn same_space(&self, other: &ExactDistribution) -> bool {
        self.atoms == other.atoms
    }
}

fn guard(size: f64) -> Result<()> {
    if size > MAX_TABLE_SIZE {
        return Err(Error::GuardExceeded {
            what: "table size",
            value: size,
            limit: MAX_TABLE_SIZE,
        });
    }
    Ok(())
}

/// Enumerate the tilted conductance law of `spec` over all edges.
pub fn exact_distribution(spec: &ModelSpec) -> Result<ExactDistribution> {
    guard(spec.table_size())?;
    let edges: Vec<usize> = (0..spec.num_edges()).collect();
    let base = vec![0.0; spec.num_edges()];
    enumerate(spec, edges, &base, spec.graph().label())
}

/// Enumerate the law on `free_edges` with the conductances `alpha` plugged in
/// on every other edge (`alpha` entries on `free_edges` are ignored).
pub fn exact_conditioned_distribution(
    spec: &ModelSpec,
    free_edges: &[usize],
    alpha: &[f64],
) -> Result<ExactDistribution> {
    if alpha.len() != spec.num_edges() {
        return Err(Error::InvalidParameter(
            "boundary configuration has the wrong length".into(),
        ));
    }
    if let Some(&e) = free_edges.iter().find(|&&e| e >= spec.num_edges()) {
        return Err(Error::EdgeOutOfRange(e));
    }
    let size: f64 = free_edges.iter().map(|&e| spec.rho(e).len() as f64).product();
    guard(size)?;
    enumerate(
        spec,
        free_edges.to_vec(),
        alpha,
        format!("{}|bc", spec.graph().label()),
    )
}

fn enumerate(
    spec: &ModelSpec,
    edges: Vec<usize>,
    base: &[f64],
    label: String,
) -> Result<ExactDistribution> {
    let atoms: Vec<Vec<f64>> = edges.iter().map(|&e| spec.rho(e).atoms().to_vec()).collect();
    let size: usize = atoms.iter().map(|a| a.len()).product();
    let mut kappa = base.to_vec();
    let mut log_weights = Vec::with_capacity(size);
    let mut idx = vec![0usize; edges.len()];
    for _ in 0..size {
        let mut local = 0.0;
        for (s, &e) in edges.iter().enumerate() {
            let k = atoms[s][idx[s]];
            kappa[e] = k;
            local += spec.xi()[e] * k + spec.rho(e).weights()[idx[s]].ln();
        }
        log_weights.push(local - 0.5 * log_det_h0(spec.graph(), &kappa)?);
        // odometer increment, first slot fastest
        for (s, a) in atoms.iter().enumerate() {
            idx[s] += 1;
            if idx[s] < a.len() {
                break;
            }
            idx[s] = 0;
        }
    }
    Ok(ExactDistribution::from_log_weights(
        label, edges, atoms, log_weights,
    ))
}
