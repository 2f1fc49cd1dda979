//! Acceptance criteria as a custom test harness: every criterion prints one
//! `PASS`/`FAIL` line and any gated failure makes the process exit nonzero.
//! The trend criterion is advisory and never fails the run.
//!
//! Scale knobs: `RCM_FULL_BOUND=1` runs the conditional-F part of the upper
//! bound on every box size; `RCM_FULL_TREND=1` runs the trend experiment at
//! n ∈ {4, 8, 12} (hours rather than seconds).

use std::time::Instant;

use rand::Rng;
use rcm_core::aw::{bound_constant, conditional_f, gap_scan, verify_upper_bound, BoxFamily, Budget};
use rcm_core::experiment::{run_suite, Config, Suite};
use rcm_core::laplace::LaplacianFactor;
use rcm_core::lattice::Graph;
use rcm_core::measures::{self_dual_p, AtomicBaseMeasure, DisorderDistribution, DisorderField, ModelSpec};
use rcm_core::report::CheckReport;
use rcm_core::rng::{stream_rng, StreamId};
use rcm_core::sampler::CoupledPair;

const SEED: u64 = 20_240_611;

/// Outcome of one criterion.
struct Verdict {
    criterion: u32,
    title: &'static str,
    passed: bool,
    gated: bool,
    detail: String,
    seconds: f64,
}

impl Verdict {
    fn gated(criterion: u32, title: &'static str, passed: bool, detail: String, start: Instant) -> Self {
        Verdict {
            criterion,
            title,
            passed,
            gated: true,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {}{}: {} [{:.1} s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.title,
            if self.gated { "" } else { " (advisory, not gated)" },
            self.detail,
            self.seconds
        )
    }
}

fn summarize(reports: &[&CheckReport]) -> (bool, String) {
    let passed = reports.iter().all(|r| r.passed);
    let trials: usize = reports.iter().map(|r| r.trials).sum();
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let worst = reports.iter().map(|r| r.max_deviation).fold(f64::NEG_INFINITY, f64::max);
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} on {}", r.test, r.graph))
        .collect();
    let mut detail = format!(
        "{} checks, {trials} trials, {violations} violations, max deviation {worst:.2e}",
        reports.len()
    );
    if !failed.is_empty() {
        detail.push_str(&format!("; failing: {}", failed.join(", ")));
    }
    (passed, detail)
}

fn select<'a>(reports: &'a [CheckReport], tests: &[&str]) -> Vec<&'a CheckReport> {
    reports.iter().filter(|r| tests.contains(&r.test.as_str())).collect()
}

fn base_config() -> Config {
    Config {
        seed: SEED,
        workers: 4,
        ..Config::default()
    }
}

fn kirchhoff() -> Verdict {
    let start = Instant::now();
    let mut cfg = base_config();
    cfg.suites.trials = 100;
    cfg.model.lambda = 4.0;
    let reports = run_suite(Suite::Kirchhoff, &cfg).unwrap();
    let (ok, detail) = summarize(&reports.iter().collect::<Vec<_>>());
    let fast = start.elapsed().as_secs_f64() < 30.0;
    Verdict::gated(1, "Kirchhoff equivalence", ok && fast, detail, start)
}

fn incremental_updates() -> Verdict {
    let start = Instant::now();
    let g = Graph::build_box(2, 3);
    let lambda = 4.0;
    let mut rng = stream_rng(SEED, StreamId::derive("acceptance-updates", &[]));
    let mut kappa: Vec<f64> = (0..g.num_edges()).map(|_| rng.random_range(1.0 / lambda..=lambda)).collect();
    let mut f = LaplacianFactor::with_refresh_period(&g, &kappa, 250).unwrap();
    let mut fresh = LaplacianFactor::new(&g, &kappa).unwrap();
    let (mut worst_mult, mut worst_det) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let e = rng.random_range(0..g.num_edges());
        let v = rng.random_range(1.0 / lambda..=lambda);
        let expect = 1.0 + (v - kappa[e]) * fresh.effective_resistance(e);
        let mult = f.update_edge_conductance(e, v).unwrap();
        kappa[e] = v;
        worst_mult = worst_mult.max((mult - expect).abs() / expect.abs());
        // compared after every update, not only at refresh points
        fresh = LaplacianFactor::new(&g, &kappa).unwrap();
        let dev = (f.log_det_h0() - fresh.log_det_h0()).abs() / fresh.log_det_h0().abs();
        worst_det = worst_det.max(dev);
    }
    let ok = worst_det <= 1e-8 && worst_mult <= 1e-10 && start.elapsed().as_secs_f64() < 120.0;
    let detail = format!(
        "10000 updates on Λ_3, worst log-det deviation {worst_det:.2e}, worst multiplier deviation {worst_mult:.2e}"
    );
    Verdict::gated(2, "incremental-update fidelity", ok, detail, start)
}

/// Inequalities suite on free and wired Λ_2 with λ = 4 and 10⁴ witnesses per check.
fn inequalities() -> Vec<Verdict> {
    let start = Instant::now();
    let mut cfg = base_config();
    cfg.suites.trials = 10_000;
    cfg.model.radius = 2;
    cfg.model.lambda = 4.0;
    cfg.model.disorder = DisorderDistribution::Uniform { a: 0.5 };
    let reports = run_suite(Suite::Inequalities, &cfg).unwrap();

    let sel = select(&reports, &["fkg_lattice_condition"]);
    let (ok, detail) = summarize(&sel);
    let ok = ok && sel.len() == 2 && sel.iter().all(|r| r.trials == 10_000) && start.elapsed().as_secs_f64() < 300.0;
    let c3 = Verdict::gated(3, "FKG lattice condition on free and wired Λ_2", ok, detail, start);

    let sel = select(
        &reports,
        &["two_edge_inequality", "det_ratio_monotonicity", "det_ratio_bounds", "pruning_preimages"],
    );
    let (ok, mut detail) = summarize(&sel);
    for r in sel.iter().filter(|r| r.test == "det_ratio_bounds") {
        detail.push_str(&format!("; reported only: {}", r.notes.join(", ")));
    }
    let c4 = Verdict::gated(4, "two-edge inequality, monotonicity, free/wired tree bounds", ok, detail, start);
    vec![c3, c4]
}

/// Sampler-exactness suite on Λ_1 with one fixed uniform(−½, ½) replica.
fn sampler_exactness() -> Vec<Verdict> {
    let start = Instant::now();
    let mut cfg = base_config();
    cfg.model.radius = 1;
    cfg.model.disorder = DisorderDistribution::Uniform { a: 0.5 };
    cfg.suites.sweeps = 100_000;
    cfg.suites.gaussian_samples = 100_000;
    let reports = run_suite(Suite::SamplerExactness, &cfg).unwrap();

    let sel = select(&reports, &["heat_bath_vs_table", "extended_vs_table", "kernel_stationarity", "factor_drift"]);
    let (ok, mut detail) = summarize(&sel);
    for r in sel.iter().filter(|r| !r.notes.is_empty()) {
        detail.push_str(&format!("; {}: {}", r.test, r.notes.join(", ")));
    }
    let ok = ok && start.elapsed().as_secs_f64() < 300.0;
    let c5 = Verdict::gated(5, "exact enumeration vs heat-bath and extended sampler", ok, detail, start);

    let sel = select(&reports, &["gaussian_conditional"]);
    let (ok, mut detail) = summarize(&sel);
    for r in &sel {
        detail.push_str(&format!("; {}", r.notes.join(", ")));
    }
    let c10 = Verdict::gated(10, "conditional Gaussian covariance and plaquette sums", ok, detail, start);
    vec![c5, c10]
}

fn monotone_coupling() -> Verdict {
    let start = Instant::now();
    let rho = AtomicBaseMeasure::two_point(self_dual_p(4.0), 4.0).unwrap();
    let mut central = Vec::new();
    let mut violation = None;
    for n in [2usize, 3, 4] {
        let g = Graph::build_box(2, n);
        let spec = ModelSpec::homogeneous(g.clone(), rho.clone(), vec![0.0; g.num_edges()], 4.0).unwrap();
        let rng = stream_rng(SEED, StreamId::derive("acceptance-coupling", &[n as u64]));
        let mut pair = CoupledPair::free_wired(&spec, SEED, rng).unwrap();
        match pair.run(10_000, 1000, 20) {
            Ok(est) => {
                let e = g.central_edge().unwrap();
                central.push((n, est.lower_means[e], est.lower_ses[e]));
            }
            Err(err) => violation = Some(format!("Λ_{n}: {err}")),
        }
    }
    let monotone = central.windows(2).all(|w| {
        let se = (w[0].2.powi(2) + w[1].2.powi(2)).sqrt();
        w[1].1 >= w[0].1 - 3.0 * se
    });
    let ok = violation.is_none() && monotone;
    let means: Vec<String> = central.iter().map(|(n, m, s)| format!("n={n}: {m:.4}±{s:.4}")).collect();
    let detail = format!(
        "10000 coupled sweeps per box, {}; free central-edge means {}",
        violation.as_deref().unwrap_or("no ordering violations"),
        means.join(", ")
    );
    Verdict::gated(6, "monotone coupling and free-box monotonicity in n", ok, detail, start)
}

fn identities() -> Vec<Verdict> {
    let start = Instant::now();
    let mut cfg = base_config();
    cfg.model.disorder = DisorderDistribution::Uniform { a: 0.5 };
    let reports = run_suite(Suite::Identities, &cfg).unwrap();

    let (ok, detail) = summarize(&select(&reports, &["response_identities"]));
    let c7 = Verdict::gated(7, "response identities by central differences", ok, detail, start);
    let (ok, detail) = summarize(&select(&reports, &["shift_reweighting", "shift_translation", "domain_markov"]));
    let c8 = Verdict::gated(8, "reweighting, translation and domain Markov identities", ok, detail, start);
    vec![c7, c8]
}

fn upper_bound() -> Verdict {
    let start = Instant::now();
    let family = BoxFamily {
        dim: 2,
        rho: AtomicBaseMeasure::two_point(0.5, 3.0).unwrap(),
        lambda: 4.0,
        disorder: DisorderDistribution::Uniform { a: 0.5 },
    };
    let (report, _) = verify_upper_bound(&family, &[2, 3, 4], 20, Budget::new(1000, 200), SEED, 4).unwrap();

    // conditional F with Λ_{n+1} standing in for the infinite volume
    let full = std::env::var("RCM_FULL_BOUND").is_ok_and(|v| v == "1");
    let inner_radii: &[usize] = if full { &[2, 3, 4] } else { &[2] };
    let replicas = if full { 20 } else { 8 };
    let budget = Budget::new(if full { 1000 } else { 200 }, 50);
    let mut f_report = CheckReport::new("conditional_f_bound", format!("n={inner_radii:?}"));
    let k = bound_constant(2, family.lambda);
    for &n in inner_radii {
        let g = Graph::build_box(2, n);
        let bound = 2.0 * k * g.boundary_vertices().unwrap().len() as f64;
        for r in 0..replicas {
            let mut rng = stream_rng(SEED, StreamId::derive("acceptance-inner", &[n as u64, r]));
            let xi = DisorderField::sample(g.num_edges(), family.disorder.clone(), &mut rng).values;
            let f = conditional_f(&family, n, n + 1, &xi, 30, budget, SEED, r, 4).unwrap();
            let v = f.value.value.abs();
            f_report.record(v / bound, v <= bound + 3.0 * f.value.se, || {
                serde_json::json!({"n": n, "replica": r, "F": f.value.value, "se": f.value.se, "bound": bound})
            });
        }
    }
    let (ok, mut detail) = summarize(&[&report, &f_report]);
    if !full {
        detail.push_str("; conditional F at n=2, N=3, 8 replicas (RCM_FULL_BOUND=1 for n=2..4, 20 replicas)");
    }
    Verdict::gated(9, "finite-volume upper bounds on G¹−G⁰ and F", ok, detail, start)
}

fn disorder_trend() -> Verdict {
    let start = Instant::now();
    let full = std::env::var("RCM_FULL_TREND").is_ok_and(|v| v == "1");
    let radii: Vec<usize> = if full { vec![4, 8, 12] } else { vec![2, 3, 4] };
    let budget = if full { Budget::new(20_000, 2000) } else { Budget::new(1000, 200) };
    let q = 16.0;
    let rho = AtomicBaseMeasure::two_point(self_dual_p(q), q).unwrap();
    let scan = |disorder: DisorderDistribution| {
        let family = BoxFamily {
            dim: 2,
            rho: rho.clone(),
            lambda: q,
            disorder,
        };
        gap_scan(&family, &radii, 20, budget, SEED, 4).unwrap()
    };
    let clean = scan(DisorderDistribution::None);
    let dirty = scan(DisorderDistribution::Uniform { a: 0.5 });
    let table: Vec<String> = clean
        .summaries
        .iter()
        .zip(&dirty.summaries)
        .map(|(c, d)| {
            format!(
                "n={}: clean {:.4}±{:.4}, disordered {:.4}±{:.4}",
                c.n, c.mean_gap, c.gap_se, d.mean_gap, d.gap_se
            )
        })
        .collect();
    let (c, d) = (clean.summaries.last().unwrap(), dirty.summaries.last().unwrap());
    let smaller = d.mean_gap < c.mean_gap;
    let detail = format!(
        "{}; at the largest box the disordered gap is {} the clean gap{}",
        table.join("; "),
        if smaller { "smaller than" } else { "not smaller than" },
        if full { "" } else { " (scaled: RCM_FULL_TREND=1 for n=4,8,12)" }
    );
    Verdict {
        gated: false,
        ..Verdict::gated(11, "disorder trend of the free/wired gap", smaller, detail, start)
    }
}

fn main() {
    let mut verdicts: Vec<Verdict> = std::thread::scope(|s| {
        let jobs: Vec<std::thread::ScopedJoinHandle<Vec<Verdict>>> = vec![
            s.spawn(|| vec![kirchhoff()]),
            s.spawn(|| vec![incremental_updates()]),
            s.spawn(inequalities),
            s.spawn(sampler_exactness),
            s.spawn(|| vec![monotone_coupling()]),
            s.spawn(identities),
            s.spawn(|| vec![upper_bound()]),
            s.spawn(|| vec![disorder_trend()]),
        ];
        jobs.into_iter().flat_map(|j| j.join().expect("criterion panicked")).collect()
    });
    verdicts.sort_by_key(|v| v.criterion);
    for v in &verdicts {
        println!("{}", v.line());
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| v.gated && !v.passed).map(|v| v.criterion).collect();
    if failed.is_empty() {
        println!("acceptance: all gated criteria passed");
    } else {
        println!("acceptance: gated criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
