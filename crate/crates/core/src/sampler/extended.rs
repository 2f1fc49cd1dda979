use rand::Rng;
use serde_json::json;

use super::{inverse_cdf, normalize};
use crate::error::{Error, Result};
use crate::laplace::{sample_pinned_gaussian, FieldConfig, LaplacianFactor};
use crate::measures::ModelSpec;
use crate::report::CheckReport;

/// Alternating sampler for the joint law of gradients and conductances.
///
/// Given κ the heights are the Gaussian field pinned at vertex 0 with
/// covariance `Δ_κ⁻¹`; given the gradients η each `κ_e` is drawn
/// independently with weight `w_a e^{ξ_e a − a η_e²/2}`.
#[derive(Clone, Debug)]
pub struct ExtendedState {
    spec: ModelSpec,
    kappa: Vec<f64>,
    field: FieldConfig,
    eta: Vec<f64>,
    sweeps: u64,
}

impl ExtendedState {
    pub fn new(spec: ModelSpec) -> Self {
        let m = spec.num_edges();
        let kappa: Vec<f64> = (0..m).map(|e| spec.rho(e).atoms()[0]).collect();
        ExtendedState {
            field: FieldConfig {
                heights: vec![0.0; spec.graph().num_vertices()],
            },
            kappa,
            eta: vec![0.0; m],
            spec,
            sweeps: 0,
        }
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn field(&self) -> &FieldConfig {
        &self.field
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    /// Heights given κ, then conductances given the gradients.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let g = self.spec.graph();
        self.field = sample_pinned_gaussian(g, &self.kappa, rng)?;
        self.eta = self.field.gradient(g);
        for e in 0..self.spec.num_edges() {
            let rho = self.spec.rho(e);
            let xi = self.spec.xi()[e];
            let s2 = self.eta[e] * self.eta[e];
            let mut logs: Vec<f64> = rho
                .atoms()
                .iter()
                .zip(rho.weights())
                .map(|(&a, &w)| w.ln() + xi * a - 0.5 * a * s2)
                .collect();
            normalize(&mut logs);
            let i = inverse_cdf(&logs, rng.random());
            self.kappa[e] = rho.atoms()[i];
        }
        self.sweeps += 1;
        Ok(())
    }
}

/// Compare the empirical moments of the pinned Gaussian at fixed κ with the
/// exact inverse, and check that sampled gradients sum to zero around faces.
///
/// Fails when more than 1% of the mean and covariance entries fall outside
/// 3 standard errors, or when any face sum exceeds `1e-12`.
pub fn check_gaussian_conditional<R: Rng + ?Sized>(
    spec: &ModelSpec,
    kappa: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<CheckReport> {
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let g = spec.graph();
    let factor = LaplacianFactor::new(g, kappa)?;
    let n = g.num_vertices();
    let faces = g.plaquettes();
    let mut sum = vec![0.0; n];
    let mut prod = vec![0.0; n * n];
    let mut worst_face: f64 = 0.0;
    for _ in 0..samples {
        let field = factor.sample_pinned_gaussian(rng)?;
        let h = &field.heights;
        for x in 1..n {
            sum[x] += h[x];
            for y in x..n {
                prod[x * n + y] += h[x] * h[y];
            }
        }
        let eta = field.gradient(g);
        for face in &faces {
            let s: f64 = face.iter().map(|&(e, sign)| sign * eta[e]).sum();
            worst_face = worst_face.max(s.abs());
        }
    }
    let ns = samples as f64;
    let mut report = CheckReport::new("gaussian_conditional", g.label());
    let mut entries = 0usize;
    let mut outside = 0usize;
    let mut worst_z: f64 = 0.0;
    let mut check = |z: f64, what: serde_json::Value, report: &mut CheckReport| {
        entries += 1;
        worst_z = worst_z.max(z.abs());
        if z.abs() > 3.0 {
            outside += 1;
            report.witnesses.push(what);
        }
    };
    for x in 1..n {
        let c_xx = factor.covariance_entry(x, x);
        let mean = sum[x] / ns;
        check(mean / (c_xx / ns).sqrt(), json!({"mean": x, "value": mean}), &mut report);
        for y in x..n {
            let exact = factor.covariance_entry(x, y);
            let emp = prod[x * n + y] / ns - mean * sum[y] / ns;
            let se = ((c_xx * factor.covariance_entry(y, y) + exact * exact) / ns).sqrt();
            check(
                (emp - exact) / se,
                json!({"cov": [x, y], "empirical": emp, "exact": exact}),
                &mut report,
            );
        }
    }
    report.witnesses.truncate(8);
    report.trials = samples;
    report.max_deviation = worst_z;
    report.violations = outside;
    report.note(format!(
        "{outside} of {entries} entries beyond 3 SE; max face sum {worst_face:e}"
    ));
    if outside as f64 > 0.01 * entries as f64 {
        report.fail("too many moment entries beyond 3 SE");
    }
    if worst_face > 1e-12 {
        report.fail(format!("face sum {worst_face:e} exceeds 1e-12"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Graph;
    use crate::measures::AtomicBaseMeasure;
    use crate::rng::{stream_rng, StreamId};

    #[test]
    fn k2_variance_is_inverse_conductance() {
        let spec = ModelSpec::homogeneous(
            Graph::complete(2),
            AtomicBaseMeasure::point_mass(2.0).unwrap(),
            vec![0.0],
            2.0,
        )
        .unwrap();
        let mut rng = stream_rng(1, StreamId(9));
        let r = check_gaussian_conditional(&spec, &[2.0], 20_000, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn point_mass_keeps_kappa() {
        let g = Graph::build_box(2, 1);
        let m = g.num_edges();
        let spec =
            ModelSpec::homogeneous(g, AtomicBaseMeasure::point_mass(1.0).unwrap(), vec![0.0; m], 1.0)
                .unwrap();
        let mut st = ExtendedState::new(spec);
        let mut rng = stream_rng(2, StreamId(9));
        for _ in 0..3 {
            st.sweep(&mut rng).unwrap();
        }
        assert!(st.kappa().iter().all(|&k| k == 1.0));
        assert!(st.eta().iter().any(|&x| x != 0.0));
    }
}
