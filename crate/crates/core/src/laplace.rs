//! Weighted graph Laplacians: determinants on the zero-sum subspace,
//! effective resistances with rank-one updates, Dirichlet problems and the
//! pinned Gaussian field.
//!
//! The Laplacian is reduced by deleting the row and column of the ground
//! vertex (vertex 0, the smallest id). On a connected graph with positive
//! conductances the reduced matrix is SPD and
//! `det Δ|_{H_0} = |V| · det(reduced)`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::Graph;

/// Full refactorization period for incremental updates.
pub const DEFAULT_REFRESH_PERIOD: usize = 250;

/// Max-norm residual tolerance for Dirichlet solves.
pub const DIRICHLET_TOLERANCE: f64 = 1e-10;

/// Reduced index of a vertex (`None` for the ground).
fn reduced(v: usize) -> Option<usize> {
    v.checked_sub(1)
}

pub fn reduced_laplacian(g: &Graph, kappa: &[f64]) -> DMatrix<f64> {
    let n = g.num_vertices().saturating_sub(1);
    let mut m = DMatrix::zeros(n, n);
    for (e, &k) in g.edges().iter().zip(kappa) {
        if e.is_loop() {
            continue;
        }
        let (a, b) = (reduced(e.tail), reduced(e.head));
        if let Some(a) = a {
            m[(a, a)] += k;
        }
        if let Some(b) = b {
            m[(b, b)] += k;
        }
        if let (Some(a), Some(b)) = (a, b) {
            m[(a, b)] -= k;
            m[(b, a)] -= k;
        }
    }
    m
}

fn cholesky(m: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(m).ok_or(Error::NotPositiveDefinite)
}

fn log_det_of(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum()
}

/// `ln det Δ_κ` on the zero-sum subspace. Self-loops are ignored.
pub fn log_det_h0(g: &Graph, kappa: &[f64]) -> Result<f64> {
    let chol = cholesky(reduced_laplacian(g, kappa))?;
    Ok((g.num_vertices() as f64).ln() + log_det_of(&chol))
}

/// Vertex heights. Gradients follow the edge orientation: `η_e = φ(head) − φ(tail)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldConfig {
    pub heights: Vec<f64>,
}

impl FieldConfig {
    pub fn gradient(&self, g: &Graph) -> Vec<f64> {
        g.edges()
            .iter()
            .map(|e| self.heights[e.head] - self.heights[e.tail])
            .collect()
    }
}

/// `Σ_e κ_e |∇φ(e)|²`.
pub fn dirichlet_energy(g: &Graph, kappa: &[f64], phi: &[f64]) -> f64 {
    g.edges()
        .iter()
        .zip(kappa)
        .map(|(e, k)| {
            let d = phi[e.head] - phi[e.tail];
            k * d * d
        })
        .sum()
}

/// Dense factor of the reduced Laplacian with a cached inverse, kept in sync
/// with single-edge conductance changes by Sherman–Morrison updates.
#[derive(Clone, Debug)]
pub struct LaplacianFactor {
    num_vertices: usize,
    ends: Vec<(Option<usize>, Option<usize>)>,
    is_loop: Vec<bool>,
    kappa: Vec<f64>,
    inverse: DMatrix<f64>,
    log_det_reduced: f64,
    updates_since_refresh: usize,
    refresh_period: usize,
}

impl LaplacianFactor {
    pub fn new(g: &Graph, kappa: &[f64]) -> Result<Self> {
        Self::with_refresh_period(g, kappa, DEFAULT_REFRESH_PERIOD)
    }

    pub fn with_refresh_period(g: &Graph, kappa: &[f64], refresh_period: usize) -> Result<Self> {
        if kappa.len() != g.num_edges() {
            return Err(Error::InvalidParameter(format!(
                "{} conductances for {} edges",
                kappa.len(),
                g.num_edges()
            )));
        }
        let n = g.num_vertices().saturating_sub(1);
        let mut f = LaplacianFactor {
            num_vertices: g.num_vertices(),
            ends: g
                .edges()
                .iter()
                .map(|e| (reduced(e.tail), reduced(e.head)))
                .collect(),
            is_loop: g.edges().iter().map(|e| e.is_loop()).collect(),
            kappa: kappa.to_vec(),
            inverse: DMatrix::zeros(n, n),
            log_det_reduced: 0.0,
            updates_since_refresh: 0,
            refresh_period: refresh_period.max(1),
        };
        f.refresh()?;
        Ok(f)
    }

    fn assemble(&self) -> DMatrix<f64> {
        let n = self.num_vertices.saturating_sub(1);
        let mut m = DMatrix::zeros(n, n);
        for (i, &(a, b)) in self.ends.iter().enumerate() {
            if self.is_loop[i] {
                continue;
            }
            let k = self.kappa[i];
            if let Some(a) = a {
                m[(a, a)] += k;
            }
            if let Some(b) = b {
                m[(b, b)] += k;
            }
            if let (Some(a), Some(b)) = (a, b) {
                m[(a, b)] -= k;
                m[(b, a)] -= k;
            }
        }
        m
    }

    /// Refactorize from scratch, replacing the incremental ledger.
    pub fn refresh(&mut self) -> Result<()> {
        let chol = cholesky(self.assemble())?;
        self.log_det_reduced = log_det_of(&chol);
        self.inverse = chol.inverse();
        self.updates_since_refresh = 0;
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }

    pub fn log_det_h0(&self) -> f64 {
        (self.num_vertices as f64).ln() + self.log_det_reduced
    }

    /// Effective resistance across edge `pos` (zero for a self-loop).
    pub fn effective_resistance(&self, pos: usize) -> f64 {
        if self.is_loop[pos] {
            return 0.0;
        }
        let g = &self.inverse;
        match self.ends[pos] {
            (Some(a), Some(b)) => g[(a, a)] + g[(b, b)] - 2.0 * g[(a, b)],
            (Some(a), None) | (None, Some(a)) => g[(a, a)],
            (None, None) => 0.0,
        }
    }

    /// Set `κ_pos = new_kappa` and return the determinant multiplier
    /// `1 + (κ_new − κ_old) R_eff`.
    pub fn update_edge_conductance(&mut self, pos: usize, new_kappa: f64) -> Result<f64> {
        let delta = new_kappa - self.kappa[pos];
        if delta == 0.0 {
            return Ok(1.0);
        }
        if self.is_loop[pos] {
            self.kappa[pos] = new_kappa;
            return Ok(1.0);
        }
        let multiplier = 1.0 + delta * self.effective_resistance(pos);
        self.kappa[pos] = new_kappa;
        if !(multiplier > 0.0) || !multiplier.is_finite() {
            self.refresh()?;
            return Err(Error::BadMultiplier(multiplier));
        }
        let n = self.inverse.nrows();
        let mut col = DVector::zeros(n);
        let (a, b) = self.ends[pos];
        if let Some(a) = a {
            col += self.inverse.column(a);
        }
        if let Some(b) = b {
            col -= self.inverse.column(b);
        }
        self.inverse.ger(-delta / multiplier, &col, &col, 1.0);
        self.log_det_reduced += multiplier.ln();
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= self.refresh_period {
            self.refresh()?;
        }
        Ok(multiplier)
    }

    /// `Cov(φ(x), φ(y))` for the Gaussian field pinned at the ground vertex.
    pub fn covariance_entry(&self, x: usize, y: usize) -> f64 {
        match (reduced(x), reduced(y)) {
            (Some(a), Some(b)) => self.inverse[(a, b)],
            _ => 0.0,
        }
    }

    /// Draw `φ` with covariance `Δ_κ^{-1}` on the reduced space and `φ(ground) = 0`.
    pub fn sample_pinned_gaussian<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<FieldConfig> {
        let chol = cholesky(self.assemble())?;
        sample_with_cholesky(&chol, self.num_vertices, rng)
    }
}

fn sample_with_cholesky<R: Rng + ?Sized>(
    chol: &Cholesky<f64, nalgebra::Dyn>,
    num_vertices: usize,
    rng: &mut R,
) -> Result<FieldConfig> {
    let n = num_vertices.saturating_sub(1);
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    // reduced Δ = L Lᵀ, so φ = L^{-T} z has covariance Δ^{-1}
    let phi = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or(Error::NotPositiveDefinite)?;
    let mut heights = Vec::with_capacity(num_vertices);
    heights.push(0.0);
    heights.extend(phi.iter());
    Ok(FieldConfig { heights })
}

/// Draw the pinned Gaussian field for conductances `kappa` without keeping a factor.
pub fn sample_pinned_gaussian<R: Rng + ?Sized>(
    g: &Graph,
    kappa: &[f64],
    rng: &mut R,
) -> Result<FieldConfig> {
    let chol = cholesky(reduced_laplacian(g, kappa))?;
    sample_with_cholesky(&chol, g.num_vertices(), rng)
}

/// Harmonic extension of boundary data: `Δ_κ χ = 0` off `boundary`,
/// `χ = data` on it. Returns `χ` and its energy `W = Σ κ_e |∇χ(e)|²`.
pub fn solve_dirichlet(
    g: &Graph,
    kappa: &[f64],
    boundary: &[(usize, f64)],
) -> Result<(FieldConfig, f64)> {
    let nv = g.num_vertices();
    let mut fixed: Vec<Option<f64>> = vec![None; nv];
    for &(v, val) in boundary {
        if v >= nv {
            return Err(Error::VertexOutOfRange(v));
        }
        fixed[v] = Some(val);
    }
    let interior: Vec<usize> = (0..nv).filter(|&v| fixed[v].is_none()).collect();
    let mut slot = vec![usize::MAX; nv];
    for (i, &v) in interior.iter().enumerate() {
        slot[v] = i;
    }
    let m = interior.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (e, &k) in g.edges().iter().zip(kappa) {
        if e.is_loop() {
            continue;
        }
        for (x, y) in [(e.tail, e.head), (e.head, e.tail)] {
            if fixed[x].is_some() {
                continue;
            }
            let i = slot[x];
            a[(i, i)] += k;
            match fixed[y] {
                Some(val) => rhs[i] += k * val,
                None => a[(i, slot[y])] -= k,
            }
        }
    }
    let mut heights: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    if m > 0 {
        let chol = Cholesky::new(a.clone()).ok_or(Error::SingularDirichlet)?;
        let sol = chol.solve(&rhs);
        let residual = (&a * &sol - &rhs).amax();
        let scale = rhs.amax().max(1.0);
        if !(residual <= DIRICHLET_TOLERANCE * scale) {
            return Err(Error::SingularDirichlet);
        }
        for (i, &v) in interior.iter().enumerate() {
            heights[v] = sol[i];
        }
    }
    let energy = dirichlet_energy(g, kappa, &heights);
    Ok((FieldConfig { heights }, energy))
}
