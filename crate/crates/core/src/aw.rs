//! Free-energy observables comparing wired and free boundary conditions:
//! the generating function of the disorder coupling, its conditional
//! average over outer disorder, the response field of one edge, and the
//! free/wired gap across box sizes.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::lattice::Graph;
use crate::measures::{
    exact_distribution, AtomicBaseMeasure, DisorderDistribution, DisorderField, ModelSpec,
};
use crate::pool::run_indexed;
use crate::report::CheckReport;
use crate::rng::{stream_rng, StreamId};
use crate::sampler::{BatchedMeans, Boundary, ChainState, CoupledPair, Init, MIN_BATCHES};
use crate::trees::relative_deviation;

/// Minimum outer-disorder resamples behind a conditional average.
pub const MIN_RESAMPLES: usize = 30;
/// Relative tolerance for the finite-difference response identities.
pub const RESPONSE_TOLERANCE: f64 = 1e-6;

/// Sweep budget of one chain run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub sweeps: u64,
    pub burn_in: u64,
    pub batches: usize,
}

impl Budget {
    pub fn new(sweeps: u64, burn_in: u64) -> Self {
        Budget {
            sweeps,
            burn_in,
            batches: MIN_BATCHES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// `2d + 1 + ln λ`, the per-boundary-vertex cost of switching boundary conditions.
pub fn bound_constant(dim: usize, lambda: f64) -> f64 {
    2.0 * dim as f64 + 1.0 + lambda.ln()
}

/// `|∂Λ_n| / √|Λ_n|` from the vertex counts `(2n+1)^d − (2n−1)^d` and `(2n+1)^d`.
pub fn boundary_scaling(dim: usize, radius: usize) -> f64 {
    let side = (2 * radius + 1) as f64;
    let inner = (2 * radius) as f64 - 1.0;
    let boundary = side.powi(dim as i32) - inner.max(0.0).powi(dim as i32);
    boundary / side.powf(0.5 * dim as f64)
}

fn exponent(xi: &[f64], region: &[usize], kappa: &[f64]) -> f64 {
    -region.iter().map(|&e| xi[e] * kappa[e]).sum::<f64>()
}

/// Exponent at the mid-range configuration; subtracting it keeps the
/// integrand near 1.
fn shift(spec: &ModelSpec, region: &[usize]) -> f64 {
    -region
        .iter()
        .map(|&e| {
            let r = spec.rho(e);
            spec.xi()[e] * 0.5 * (r.min_atom() + r.max_atom())
        })
        .sum::<f64>()
}

fn check_region(spec: &ModelSpec, region: &[usize]) -> Result<()> {
    match region.iter().find(|&&e| e >= spec.num_edges()) {
        Some(&e) => Err(Error::EdgeOutOfRange(e)),
        None => Ok(()),
    }
}

/// `G = −ln μ(e^{−Σ_{e∈region} ξ_e κ_e})` under one boundary condition,
/// by batched means with the delta-method standard error.
pub fn generating_function(
    spec: &ModelSpec,
    bc: Boundary,
    region: &[usize],
    budget: Budget,
    master_seed: u64,
    stream: StreamId,
) -> Result<Estimate> {
    check_region(spec, region)?;
    let spec = bc.apply(spec)?;
    let c = shift(&spec, region);
    let mut chain = ChainState::new(spec.clone(), Init::Minimal, master_seed, stream_rng(master_seed, stream))?;
    for _ in 0..budget.burn_in {
        chain.heat_bath_sweep()?;
    }
    let batches = budget.batches.max(MIN_BATCHES);
    let mut acc = BatchedMeans::new(1, budget.sweeps / batches as u64);
    for _ in 0..budget.sweeps {
        chain.heat_bath_sweep()?;
        acc.push(&[(exponent(spec.xi(), region, chain.kappa()) - c).exp()]);
    }
    let est = acc.finish()?;
    let m = est.means[0];
    Ok(Estimate {
        value: -(c + m.ln()),
        se: est.ses[0] / m,
    })
}

/// Exact `G` from the enumerated table.
pub fn exact_generating_function(spec: &ModelSpec, bc: Boundary, region: &[usize]) -> Result<f64> {
    check_region(spec, region)?;
    let spec = bc.apply(spec)?;
    let d = exact_distribution(&spec)?;
    let terms: Vec<f64> = (0..d.len())
        .map(|i| d.probs()[i].ln() + exponent(spec.xi(), region, &d.values(i)))
        .collect();
    Ok(-crate::measures::log_sum_exp(&terms))
}

/// Check `∂G/∂ξ_f = μ(κ_f)` and `∂μ(κ_f)/∂ξ_f = Var(κ_f)` on exact tables by
/// central differences with step `h`, `G` taken over all edges.
pub fn verify_response_identities(
    spec: &ModelSpec,
    bc: Boundary,
    f: usize,
    h: f64,
) -> Result<CheckReport> {
    if f >= spec.num_edges() {
        return Err(Error::EdgeOutOfRange(f));
    }
    let region: Vec<usize> = (0..spec.num_edges()).collect();
    let bumped = |dx: f64| -> Result<ModelSpec> {
        let mut xi = spec.xi().to_vec();
        xi[f] += dx;
        spec.with_xi(xi)
    };
    let (plus, minus) = (bumped(h)?, bumped(-h)?);
    let mean_at = |s: &ModelSpec| -> Result<f64> { Ok(exact_distribution(&bc.apply(s)?)?.mean(f)) };
    let base = exact_distribution(&bc.apply(spec)?)?;
    let dg = (exact_generating_function(&plus, bc, &region)?
        - exact_generating_function(&minus, bc, &region)?)
        / (2.0 * h);
    let dmean = (mean_at(&plus)? - mean_at(&minus)?) / (2.0 * h);
    let (mean, var) = (base.mean(f), base.variance(f));

    let mut report = CheckReport::new("response_identities", format!("{}/{}", spec.graph().label(), bc.name()));
    let dev = relative_deviation(dg, mean);
    report.record(dev, dev <= RESPONSE_TOLERANCE, || {
        json!({"identity": "dG/dxi = mean", "edge": f, "fd": dg, "exact": mean})
    });
    // a vanishing variance leaves only round-off in the difference quotient
    let dev = if var.abs() < 1e-12 { dmean.abs() } else { relative_deviation(dmean, var) };
    report.record(dev, dev <= RESPONSE_TOLERANCE, || {
        json!({"identity": "dmean/dxi = var", "edge": f, "fd": dmean, "exact": var})
    });
    report.note(format!("h = {h:e}"));
    Ok(report)
}

/// Coupled free/wired statistics of one disorder realization on a box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStatistics {
    pub g0: Estimate,
    pub g1: Estimate,
    /// `G¹ − G⁰` with a standard error that accounts for the coupling.
    pub diff: Estimate,
    /// `μ¹(κ_e) − μ⁰(κ_e)` at the probe edge.
    pub gap: Estimate,
}

/// Run coupled free/wired chains on the box of `spec` and estimate `G⁰`, `G¹`
/// over `region` together with the gap at `probe`.
pub fn coupled_statistics(
    spec: &ModelSpec,
    region: &[usize],
    probe: usize,
    budget: Budget,
    master_seed: u64,
    stream: StreamId,
) -> Result<PairStatistics> {
    check_region(spec, region)?;
    if probe >= spec.num_edges() {
        return Err(Error::EdgeOutOfRange(probe));
    }
    let c = shift(spec, region);
    let xi = spec.xi().to_vec();
    let mut pair = CoupledPair::free_wired(spec, master_seed, stream_rng(master_seed, stream))?;
    for _ in 0..budget.burn_in {
        pair.sweep()?;
    }
    let batches = budget.batches.max(MIN_BATCHES);
    let mut acc = BatchedMeans::new(3, budget.sweeps / batches as u64);
    pair.run_observed(budget.sweeps, |lo, hi| {
        acc.push(&[
            (exponent(&xi, region, lo) - c).exp(),
            (exponent(&xi, region, hi) - c).exp(),
            hi[probe] - lo[probe],
        ]);
    })?;
    let est = acc.finish()?;
    let (m0, m1) = (est.means[0], est.means[1]);
    Ok(PairStatistics {
        g0: Estimate {
            value: -(c + m0.ln()),
            se: est.ses[0] / m0,
        },
        g1: Estimate {
            value: -(c + m1.ln()),
            se: est.ses[1] / m1,
        },
        diff: Estimate {
            value: m0.ln() - m1.ln(),
            se: est.linear_se(&[1.0 / m0, -1.0 / m1, 0.0]),
        },
        gap: Estimate {
            value: est.means[2],
            se: est.ses[2],
        },
    })
}

/// Response field `π_e = (μ¹(κ_e) − μ⁰(κ_e))/λ` with its `ξ_e`-derivative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiEstimate {
    pub pi: Estimate,
    pub derivative: Estimate,
    pub report: CheckReport,
}

/// Estimate `π_e` from coupled chains and its derivative by a common-random-number
/// central difference of step `h`; checks `0 ≤ π ≤ 1` and `|∂π/∂ξ_e| ≤ λ`
/// within 3 SE.
pub fn pi_edge(
    spec: &ModelSpec,
    e: usize,
    h: f64,
    budget: Budget,
    master_seed: u64,
    stream: StreamId,
) -> Result<PiEstimate> {
    if e >= spec.num_edges() {
        return Err(Error::EdgeOutOfRange(e));
    }
    let lambda = spec.lambda();
    let gap_series = |s: &ModelSpec| -> Result<Vec<f64>> {
        let mut pair = CoupledPair::free_wired(s, master_seed, stream_rng(master_seed, stream))?;
        for _ in 0..budget.burn_in {
            pair.sweep()?;
        }
        let mut out = Vec::with_capacity(budget.sweeps as usize);
        pair.run_observed(budget.sweeps, |lo, hi| out.push(hi[e] - lo[e]))?;
        Ok(out)
    };
    let bumped = |dx: f64| -> Result<ModelSpec> {
        let mut xi = spec.xi().to_vec();
        xi[e] += dx;
        spec.with_xi(xi)
    };
    let base = gap_series(spec)?;
    let plus = gap_series(&bumped(h)?)?;
    let minus = gap_series(&bumped(-h)?)?;
    let batches = budget.batches.max(MIN_BATCHES);
    let mut acc = BatchedMeans::new(2, budget.sweeps / batches as u64);
    for i in 0..base.len() {
        acc.push(&[base[i] / lambda, (plus[i] - minus[i]) / (2.0 * h * lambda)]);
    }
    let est = acc.finish()?;
    let pi = Estimate {
        value: est.means[0],
        se: est.ses[0],
    };
    let derivative = Estimate {
        value: est.means[1],
        se: est.ses[1],
    };
    let mut report = CheckReport::new("response_field", format!("{} edge {e}", spec.graph().label()));
    let range_dev = (-pi.value).max(pi.value - 1.0);
    report.record(range_dev, range_dev <= 3.0 * pi.se, || {
        json!({"pi": pi.value, "se": pi.se})
    });
    let slope_dev = derivative.value.abs() - lambda;
    report.record(slope_dev, slope_dev <= 1e-9 * lambda + 3.0 * derivative.se, || {
        json!({"dpi": derivative.value, "se": derivative.se, "lambda": lambda})
    });
    Ok(PiEstimate {
        pi,
        derivative,
        report,
    })
}

/// Base measure and disorder law shared by a family of boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxFamily {
    pub dim: usize,
    pub rho: AtomicBaseMeasure,
    pub lambda: f64,
    pub disorder: DisorderDistribution,
}

impl BoxFamily {
    /// Spec on `Λ_radius` with disorder drawn from the stream `(kind, radius, replica)`.
    pub fn spec(&self, radius: usize, master_seed: u64, kind: &str, replica: u64) -> Result<ModelSpec> {
        let g = Graph::build_box(self.dim, radius);
        let mut rng = stream_rng(master_seed, StreamId::derive(kind, &[radius as u64, replica]));
        let xi = DisorderField::sample(g.num_edges(), self.disorder.clone(), &mut rng).values;
        ModelSpec::homogeneous(g, self.rho.clone(), xi, self.lambda)
    }

    /// Atom with the largest value and its weight (the `q`, `p` of a two-point law).
    pub fn q_p(&self) -> (f64, f64) {
        let q = self.rho.max_atom();
        (q, *self.rho.weights().last().expect("non-empty"))
    }
}

/// One CSV measurement row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AwRow {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub outer: usize,
    pub q: f64,
    pub p: f64,
    pub disorder_kind: String,
    pub disorder_param: f64,
    pub replica: u64,
    pub edge: usize,
    pub gap: f64,
    pub gap_se: f64,
    #[serde(rename = "G0")]
    pub g0: f64,
    #[serde(rename = "G1")]
    pub g1: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "F_se")]
    pub f_se: f64,
    pub bound: f64,
    pub margin: f64,
}

/// Per-replica boundary comparison on one box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub radius: usize,
    pub replica: u64,
    pub stats: PairStatistics,
    pub bound: f64,
    pub margin: f64,
}

/// `|G¹ − G⁰| ≤ (2d+1+ln λ)|∂Λ|` over all edges of each box, per replica,
/// with 3-SE slack.
pub fn verify_upper_bound(
    family: &BoxFamily,
    radii: &[usize],
    replicas: usize,
    budget: Budget,
    master_seed: u64,
    workers: usize,
) -> Result<(CheckReport, Vec<BoundRow>)> {
    let tasks: Vec<(usize, u64)> = radii
        .iter()
        .flat_map(|&n| (0..replicas as u64).map(move |r| (n, r)))
        .collect();
    let rows = run_indexed(workers, tasks.len(), |i| {
        let (n, r) = tasks[i];
        let spec = family.spec(n, master_seed, "bound-disorder", r)?;
        let region: Vec<usize> = (0..spec.num_edges()).collect();
        let probe = spec.graph().central_edge().unwrap_or(0);
        let stream = StreamId::derive("bound-chain", &[n as u64, r]);
        let stats = coupled_statistics(&spec, &region, probe, budget, master_seed, stream)?;
        let bound = bound_constant(family.dim, family.lambda) * spec.graph().boundary_vertices()?.len() as f64;
        Ok(BoundRow {
            radius: n,
            replica: r,
            margin: bound - stats.diff.value.abs(),
            stats,
            bound,
        })
    })?;
    let mut report = CheckReport::new("upper_bound", format!("d={} radii={radii:?}", family.dim));
    for row in &rows {
        let slack = row.margin + 3.0 * row.stats.diff.se;
        report.record(row.stats.diff.value.abs() / row.bound, slack >= 0.0, || json!(row));
    }
    for &n in radii {
        let g = Graph::build_box(family.dim, n);
        let b = g.boundary_vertices()?.len();
        if 2 * b > g.num_vertices() {
            report.note(format!(
                "Λ_{n}: |∂Λ| = {b} exceeds half of |Λ| = {}; the bound is still implied in finite volume",
                g.num_vertices()
            ));
        }
    }
    Ok((report, rows))
}

/// Position in `outer` of every edge of the box `inner`, matched by the
/// coordinates of its endpoints. Both graphs must be plain boxes of the same
/// dimension with `inner` no larger than `outer`.
pub fn embed_box_edges(inner: &Graph, outer: &Graph) -> Result<Vec<usize>> {
    let mut by_ends = std::collections::HashMap::new();
    for e in 0..outer.num_edges() {
        let (a, b) = outer.root_ends(e);
        by_ends.insert((a.min(b), a.max(b)), e);
    }
    (0..inner.num_edges())
        .map(|e| {
            let (a, b) = inner.root_ends(e);
            let lift = |r: usize| {
                inner
                    .root_coords(r)
                    .and_then(|c| outer.root_at(&c))
                    .ok_or_else(|| Error::NotABox(inner.label()))
            };
            let (x, y) = (lift(a)?, lift(b)?);
            by_ends
                .get(&(x.min(y), x.max(y)))
                .copied()
                .ok_or_else(|| Error::NotABox(outer.label()))
        })
        .collect()
}

/// Conditional average of `G¹ − G⁰` over `E(Λ_n)` given the inner disorder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalF {
    pub inner: usize,
    pub outer: usize,
    pub value: Estimate,
    pub resamples: usize,
    pub samples: Vec<f64>,
}

/// Fix `inner_xi` (in the edge order of `Λ_n`) on `E(Λ_n)`, resample the rest of `Λ_N` from the family's
/// disorder law and average the coupled `G¹ − G⁰` over the resamples.
/// `Λ_N` stands in for the infinite volume.
#[allow(clippy::too_many_arguments)]
pub fn conditional_f(
    family: &BoxFamily,
    inner: usize,
    outer: usize,
    inner_xi: &[f64],
    resamples: usize,
    budget: Budget,
    master_seed: u64,
    replica: u64,
    workers: usize,
) -> Result<ConditionalF> {
    if outer <= inner {
        return Err(Error::InvalidParameter(format!("outer box Λ_{outer} must strictly contain Λ_{inner}")));
    }
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidParameter(format!(
            "{resamples} outer resamples; at least {MIN_RESAMPLES} required"
        )));
    }
    let g = Graph::build_box(family.dim, outer);
    let region = embed_box_edges(&Graph::build_box(family.dim, inner), &g)?;
    if inner_xi.len() != region.len() {
        return Err(Error::InvalidParameter(format!(
            "{} inner disorder values for {} inner edges",
            inner_xi.len(),
            region.len()
        )));
    }
    let probe = g.central_edge().unwrap_or(0);
    let samples = run_indexed(workers, resamples, |r| {
        let key = [inner as u64, outer as u64, replica, r as u64];
        let mut rng = stream_rng(master_seed, StreamId::derive("outer-disorder", &key));
        let mut xi = DisorderField::sample(g.num_edges(), family.disorder.clone(), &mut rng).values;
        for (&e, &x) in region.iter().zip(inner_xi) {
            xi[e] = x;
        }
        let spec = ModelSpec::homogeneous(g.clone(), family.rho.clone(), xi, family.lambda)?;
        // the same chain stream for every resample couples them through common numbers
        let stream = StreamId::derive("outer-chain", &[inner as u64, outer as u64, replica]);
        Ok(coupled_statistics(&spec, &region, probe, budget, master_seed, stream)?.diff.value)
    })?;
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(ConditionalF {
        inner,
        outer,
        value: Estimate {
            value: mean,
            se: (var / k).sqrt(),
        },
        resamples,
        samples,
    })
}

/// Disorder-averaged gap on one box size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub n: usize,
    pub mean_gap: f64,
    pub gap_se: f64,
    /// `F̃/√|Λ_n|` per replica, with `F̃ = (G¹ − G⁰) − mean over replicas`.
    pub scaled_fluctuations: Vec<f64>,
    pub fluctuation_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapScan {
    pub rows: Vec<AwRow>,
    pub summaries: Vec<GapSummary>,
}

/// Coupled free/wired measurement on `Λ_n` for one disorder replica: gap at
/// the central edge and `G¹ − G⁰` over all edges.
///
/// Chain streams depend only on `(n, replica)`, so scans that differ only in
/// the disorder law are paired through common random numbers.
pub fn gap_task(family: &BoxFamily, n: usize, replica: u64, budget: Budget, master_seed: u64) -> Result<AwRow> {
    let (q, p) = family.q_p();
    let spec = family.spec(n, master_seed, "gap-disorder", replica)?;
    let region: Vec<usize> = (0..spec.num_edges()).collect();
    let edge = spec.graph().central_edge().unwrap_or(0);
    let stream = StreamId::derive("gap-chain", &[n as u64, replica]);
    let s = coupled_statistics(&spec, &region, edge, budget, master_seed, stream)?;
    let bound = bound_constant(family.dim, family.lambda) * spec.graph().boundary_vertices()?.len() as f64;
    Ok(AwRow {
        d: family.dim,
        n,
        outer: n,
        q,
        p,
        disorder_kind: family.disorder.name().into(),
        disorder_param: family.disorder.param(),
        replica,
        edge,
        gap: s.gap.value,
        gap_se: s.gap.se,
        g0: s.g0.value,
        g1: s.g1.value,
        f: s.diff.value,
        f_se: s.diff.se,
        bound,
        margin: bound - s.diff.value.abs(),
    })
}

/// Disorder averages of gap rows per box size. `F̃` centers the `F` column
/// over the replicas of each size.
pub fn summarize_gaps(dim: usize, radii: &[usize], rows: &[AwRow]) -> Vec<GapSummary> {
    radii
        .iter()
        .map(|&n| {
            let sel: Vec<&AwRow> = rows.iter().filter(|r| r.n == n).collect();
            let k = sel.len() as f64;
            let mean_gap = sel.iter().map(|r| r.gap).sum::<f64>() / k;
            // replica spread, floored by the within-chain error
            let spread = if sel.len() > 1 {
                sel.iter().map(|r| (r.gap - mean_gap).powi(2)).sum::<f64>() / (k - 1.0) / k
            } else {
                0.0
            };
            let within = sel.iter().map(|r| r.gap_se.powi(2)).sum::<f64>() / (k * k);
            let mean_f = sel.iter().map(|r| r.f).sum::<f64>() / k;
            let volume = ((2 * n + 1) as f64).powi(dim as i32);
            let scaled: Vec<f64> = sel.iter().map(|r| (r.f - mean_f) / volume.sqrt()).collect();
            let sd = if sel.len() > 1 {
                (scaled.iter().map(|x| x * x).sum::<f64>() / (k - 1.0)).sqrt()
            } else {
                0.0
            };
            GapSummary {
                n,
                mean_gap,
                gap_se: spread.max(within).sqrt(),
                scaled_fluctuations: scaled,
                fluctuation_sd: sd,
            }
        })
        .collect()
}

/// [`gap_task`] for every `(n, replica)`, merged in task order.
pub fn gap_scan(
    family: &BoxFamily,
    radii: &[usize],
    replicas: usize,
    budget: Budget,
    master_seed: u64,
    workers: usize,
) -> Result<GapScan> {
    let tasks: Vec<(usize, u64)> = radii
        .iter()
        .flat_map(|&n| (0..replicas as u64).map(move |r| (n, r)))
        .collect();
    let rows = run_indexed(workers, tasks.len(), |i| {
        gap_task(family, tasks[i].0, tasks[i].1, budget, master_seed)
    })?;
    let summaries = summarize_gaps(family.dim, radii, &rows);
    Ok(GapScan { rows, summaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::AtomicBaseMeasure;
    use approx::assert_relative_eq;

    fn k2(xi: f64) -> ModelSpec {
        let rho = AtomicBaseMeasure::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        ModelSpec::homogeneous(Graph::complete(2), rho, vec![xi], 2.0).unwrap()
    }

    #[test]
    fn point_mass_g_is_disorder_sum() {
        let g = Graph::complete(3);
        let spec =
            ModelSpec::homogeneous(g, AtomicBaseMeasure::point_mass(1.0).unwrap(), vec![0.3, -0.1, 0.5], 1.0)
                .unwrap();
        let v = exact_generating_function(&spec, Boundary::Free, &[0, 1, 2]).unwrap();
        assert_relative_eq!(v, 0.7, max_relative = 1e-14);
        let mc = generating_function(&spec, Boundary::Free, &[0, 1, 2], Budget::new(200, 0), 1, StreamId(1)).unwrap();
        assert_relative_eq!(mc.value, 0.7, max_relative = 1e-14);
        assert_eq!(mc.se, 0.0);
    }

    #[test]
    fn k2_closed_form() {
        // P(2) = (√2−1)-type weights tilted by e^{ξκ}
        let xi: f64 = 0.4;
        let (w1, w2) = (0.5 * xi.exp(), 0.5 * (2.0 * xi).exp() / 2f64.sqrt());
        let p2 = w2 / (w1 + w2);
        let direct = -((1.0 - p2) * (-xi).exp() + p2 * (-2.0 * xi).exp()).ln();
        let v = exact_generating_function(&k2(xi), Boundary::Free, &[0]).unwrap();
        assert_relative_eq!(v, direct, max_relative = 1e-13);
        let r = verify_response_identities(&k2(xi), Boundary::Free, 0, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn point_mass_response() {
        let spec = ModelSpec::homogeneous(
            Graph::complete(3),
            AtomicBaseMeasure::point_mass(1.0).unwrap(),
            vec![0.1, 0.2, 0.3],
            1.0,
        )
        .unwrap();
        let r = verify_response_identities(&spec, Boundary::Free, 1, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn boundary_scaling_bounded_in_two_dimensions() {
        for n in 1..200 {
            let s = boundary_scaling(2, n);
            assert!(s < 4.0, "{n}: {s}");
            let g_count = (2 * n + 1).pow(2) - (2 * n - 1).pow(2);
            assert_relative_eq!(s, g_count as f64 / (2 * n + 1) as f64, max_relative = 1e-14);
        }
        assert!(boundary_scaling(3, 100) > boundary_scaling(3, 10));
        assert_eq!(boundary_scaling(2, 2), 16.0 / 5.0);
    }

    #[test]
    fn box_embedding() {
        let (small, big) = (Graph::build_box(2, 1), Graph::build_box(2, 3));
        let map = embed_box_edges(&small, &big).unwrap();
        assert_eq!(map.len(), 12);
        for (e, &f) in map.iter().enumerate() {
            let (a, b) = small.root_ends(e);
            let (c, d) = big.root_ends(f);
            assert_eq!(small.root_coords(a), big.root_coords(c));
            assert_eq!(small.root_coords(b), big.root_coords(d));
        }
        let same = embed_box_edges(&big, &big).unwrap();
        assert!(same.iter().enumerate().all(|(i, &j)| i == j));
    }

    #[test]
    fn conditional_f_without_disorder_is_deterministic() {
        let family = BoxFamily {
            dim: 2,
            rho: AtomicBaseMeasure::two_point(0.5, 2.0).unwrap(),
            lambda: 2.0,
            disorder: DisorderDistribution::None,
        };
        let budget = Budget::new(200, 20);
        let f = conditional_f(&family, 1, 2, &[0.0; 12], 30, budget, 3, 0, 1).unwrap();
        assert_eq!(f.value.value, 0.0);
        assert_eq!(f.value.se, 0.0);
    }
}
