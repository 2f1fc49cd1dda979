use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::suites::{fixture_graphs, run_suite, Suite};
use super::Config;
use crate::aw::{bound_constant, conditional_f, coupled_statistics, gap_task, summarize_gaps, AwRow};
use crate::error::{Error, Result};
use crate::lattice::Graph;
use crate::laplace::log_det_h0;
use crate::measures::{potential_value, DisorderField};
use crate::pool::run_indexed;
use crate::report::{sha256_hex, CheckReport};
use crate::rng::{stream_rng, StreamId};
use crate::trees::{random_conductances, weighted_tree_sum};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GapScan,
    AwStats,
    PotentialTable,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::GapScan,
        ExperimentKind::AwStats,
        ExperimentKind::PotentialTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GapScan => "gap-scan",
            ExperimentKind::AwStats => "aw-stats",
            ExperimentKind::PotentialTable => "potential-table",
        }
    }

    fn stem(self) -> &'static str {
        match self {
            ExperimentKind::GapScan => "gap_scan",
            ExperimentKind::AwStats => "aw_stats",
            ExperimentKind::PotentialTable => "potential_table",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Verify { suite: String },
    Experiment { kind: ExperimentKind },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub index: usize,
    pub label: String,
    pub stream: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to replay a run and check its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub artifact_version: String,
    pub command: Command,
    pub config: Config,
    pub master_seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub tasks: Vec<TaskRecord>,
    pub outputs: Vec<OutputDigest>,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub complete: bool,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::VersionMismatch {
                expected: MANIFEST_VERSION,
                found: m.version,
            });
        }
        Ok(m)
    }

    fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Recompute the digests of the listed outputs and report mismatches.
    pub fn verify_outputs(&self) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for o in &self.outputs {
            let bytes = fs::read(self.out_dir.join(&o.file))?;
            if sha256_hex(&bytes) != o.sha256 {
                bad.push(o.file.clone());
            }
        }
        Ok(bad)
    }
}

/// Test hooks for interrupted runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Stop after this many newly computed tasks, leaving the run incomplete.
    pub stop_after: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub passed: bool,
    pub reports: Vec<CheckReport>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn digest_of(out_dir: &Path, file: &str) -> Result<OutputDigest> {
    Ok(OutputDigest {
        file: file.to_string(),
        sha256: sha256_hex(&fs::read(out_dir.join(file))?),
    })
}

fn new_manifest(command: Command, cfg: &Config, out_dir: &Path, tasks: Vec<TaskRecord>) -> RunManifest {
    RunManifest {
        version: MANIFEST_VERSION,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        config: cfg.clone(),
        master_seed: cfg.seed,
        workers: cfg.workers,
        out_dir: out_dir.to_path_buf(),
        tasks,
        outputs: Vec::new(),
        started_unix: now(),
        finished_unix: None,
        complete: false,
    }
}

/// Log-determinants next to their tree-sum values, 17 significant digits.
fn write_log_det_table(cfg: &Config, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["graph", "trial", "log_det", "tree_log_det"])?;
    for (i, g) in fixture_graphs()?.iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, StreamId::derive("log-det-table", &[i as u64]));
        for t in 0..3 {
            let kappa = random_conductances(g, cfg.model.lambda, &mut rng);
            let det = log_det_h0(g, &kappa)?;
            let trees = (g.num_vertices() as f64 * weighted_tree_sum(g, &kappa)?).ln();
            w.write_record([g.label(), t.to_string(), format!("{det:.16e}"), format!("{trees:.16e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Run a verification suite and write `<suite>.jsonl` plus its manifest.
pub fn run_suite_to_dir(suite: Suite, cfg: &Config, out_dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let stem = suite.name().replace('-', "_");
    let mut manifest = new_manifest(
        Command::Verify {
            suite: suite.name().to_string(),
        },
        cfg,
        out_dir,
        vec![TaskRecord {
            index: 0,
            label: suite.name().to_string(),
            stream: StreamId::derive(suite.name(), &[]).0,
        }],
    );
    let reports = run_suite(suite, cfg)?;
    let report_file = format!("{stem}.jsonl");
    let mut text = String::new();
    for r in &reports {
        text.push_str(&r.to_jsonl());
        text.push('\n');
    }
    fs::write(out_dir.join(&report_file), text)?;
    manifest.outputs.push(digest_of(out_dir, &report_file)?);
    if suite == Suite::Kirchhoff {
        let table = "kirchhoff_log_det.csv";
        write_log_det_table(cfg, &out_dir.join(table))?;
        manifest.outputs.push(digest_of(out_dir, table)?);
    }
    manifest.finished_unix = Some(now());
    manifest.complete = true;
    let manifest_path = out_dir.join(format!("{stem}.manifest.json"));
    manifest.save(&manifest_path)?;
    Ok(RunOutcome {
        passed: reports.iter().all(|r| r.passed),
        manifest,
        manifest_path,
        reports,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialRow {
    pub s: f64,
    pub xi: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

fn plan(kind: ExperimentKind, cfg: &Config) -> Vec<TaskRecord> {
    match kind {
        ExperimentKind::GapScan => {
            let g = &cfg.gap_scan;
            g.radii
                .iter()
                .flat_map(|&n| (0..g.replicas as u64).map(move |r| (n, r)))
                .enumerate()
                .map(|(index, (n, r))| TaskRecord {
                    index,
                    label: format!("n={n} replica={r}"),
                    stream: StreamId::derive("gap-chain", &[n as u64, r]).0,
                })
                .collect()
        }
        ExperimentKind::AwStats => {
            let a = &cfg.aw_stats;
            (0..a.replicas)
                .map(|r| TaskRecord {
                    index: r,
                    label: format!("n={} N={} replica={r}", a.inner, a.outer),
                    stream: StreamId::derive("aw-inner-disorder", &[a.inner as u64, r as u64]).0,
                })
                .collect()
        }
        ExperimentKind::PotentialTable => vec![TaskRecord {
            index: 0,
            label: "grid".into(),
            stream: 0,
        }],
    }
}

fn aw_stats_task(cfg: &Config, replica: u64) -> Result<Vec<AwRow>> {
    let a = &cfg.aw_stats;
    let family = cfg.model.family()?;
    let (q, p) = family.q_p();
    let inner_box = Graph::build_box(family.dim, a.inner);
    let mut rng = stream_rng(cfg.seed, StreamId::derive("aw-inner-disorder", &[a.inner as u64, replica]));
    let inner_xi = DisorderField::sample(inner_box.num_edges(), family.disorder.clone(), &mut rng).values;
    let boundary = inner_box.boundary_vertices()?.len() as f64;
    let edge = inner_box.central_edge().unwrap_or(0);

    // the inner box on its own: G⁰, G¹ and the gap
    let spec = crate::measures::ModelSpec::homogeneous(inner_box.clone(), family.rho.clone(), inner_xi.clone(), family.lambda)?;
    let region: Vec<usize> = (0..spec.num_edges()).collect();
    let stream = StreamId::derive("aw-inner-chain", &[a.inner as u64, replica]);
    let own = coupled_statistics(&spec, &region, edge, a.budget(), cfg.seed, stream)?;

    let bound = 2.0 * bound_constant(family.dim, family.lambda) * boundary;
    let mut outers = vec![a.outer];
    if a.doubling_probe {
        outers.push(2 * a.outer);
    }
    outers
        .into_iter()
        .map(|outer| {
            let f = conditional_f(&family, a.inner, outer, &inner_xi, a.resamples, a.budget(), cfg.seed, replica, 1)?;
            Ok(AwRow {
                d: family.dim,
                n: a.inner,
                outer,
                q,
                p,
                disorder_kind: family.disorder.name().into(),
                disorder_param: family.disorder.param(),
                replica,
                edge,
                gap: own.gap.value,
                gap_se: own.gap.se,
                g0: own.g0.value,
                g1: own.g1.value,
                f: f.value.value,
                f_se: f.value.se,
                bound,
                margin: bound - f.value.value.abs(),
            })
        })
        .collect()
}

fn potential_rows(cfg: &Config) -> Result<Vec<PotentialRow>> {
    let t = &cfg.potential_table;
    let rho = cfg.model.rho.build()?;
    let step = (t.s_max - t.s_min) / (t.points - 1) as f64;
    let mut rows = Vec::new();
    for &xi in &t.xi {
        for i in 0..t.points {
            let s = if i + 1 == t.points { t.s_max } else { t.s_min + i as f64 * step };
            rows.push(PotentialRow {
                s,
                xi,
                v: potential_value(&rho, xi, s),
            });
        }
    }
    Ok(rows)
}

fn execute(kind: ExperimentKind, cfg: &Config, task: &TaskRecord) -> Result<Value> {
    Ok(match kind {
        ExperimentKind::GapScan => {
            let g = &cfg.gap_scan;
            let per = g.replicas.max(1);
            let (n, r) = (g.radii[task.index / per], (task.index % per) as u64);
            let row = gap_task(&cfg.model.family()?, n, r, g.budget(), cfg.seed)?;
            serde_json::to_value(vec![row])?
        }
        ExperimentKind::AwStats => serde_json::to_value(aw_stats_task(cfg, task.index as u64)?)?,
        ExperimentKind::PotentialTable => serde_json::to_value(potential_rows(cfg)?)?,
    })
}

/// Completed task results from the journal; a torn trailing line is ignored.
fn read_journal(path: &Path) -> Result<BTreeMap<usize, Value>> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if let Ok(v) = serde_json::from_str::<Value>(&line) {
            if let (Some(i), Some(rows)) = (v.get("index").and_then(Value::as_u64), v.get("rows")) {
                done.insert(i as usize, rows.clone());
            }
        }
    }
    Ok(done)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn aw_stats_summary(cfg: &Config, rows: &[AwRow]) -> Value {
    let a = &cfg.aw_stats;
    let volume = ((2 * a.inner + 1) as f64).powi(cfg.model.dim as i32);
    let mut per_outer = Vec::new();
    let mut outers: Vec<usize> = rows.iter().map(|r| r.outer).collect();
    outers.sort_unstable();
    outers.dedup();
    for &outer in &outers {
        let sel: Vec<&AwRow> = rows.iter().filter(|r| r.outer == outer).collect();
        let mean = sel.iter().map(|r| r.f).sum::<f64>() / sel.len() as f64;
        let centered: Vec<f64> = sel.iter().map(|r| r.f - mean).collect();
        let scaled: Vec<f64> = centered.iter().map(|x| x / volume.sqrt()).collect();
        let violations = sel.iter().filter(|r| r.margin + 3.0 * r.f_se < 0.0).count();
        per_outer.push(json!({
            "outer": outer,
            "mean_F": mean,
            "centered_F": centered,
            "scaled_centered_F": scaled,
            "bound_violations": violations,
        }));
    }
    let doubling: Vec<Value> = if outers.len() == 2 {
        let (small, big) = (outers[0], outers[1]);
        (0..a.replicas as u64)
            .filter_map(|r| {
                let x = rows.iter().find(|w| w.replica == r && w.outer == small)?;
                let y = rows.iter().find(|w| w.replica == r && w.outer == big)?;
                let se = (x.f_se.powi(2) + y.f_se.powi(2)).sqrt();
                Some(json!({
                    "replica": r,
                    "change": y.f - x.f,
                    "se": se,
                    "within_3se": (y.f - x.f).abs() <= 3.0 * se,
                }))
            })
            .collect()
    } else {
        Vec::new()
    };
    json!({"per_outer": per_outer, "doubling": doubling})
}

/// Run (or continue) an experiment in `out_dir`. Completed tasks are
/// journaled, so an interrupted run picks up where it stopped and produces
/// the same files as an uninterrupted one.
pub fn run_experiment(kind: ExperimentKind, cfg: &Config, out_dir: &Path, opts: RunOptions) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let stem = kind.stem();
    let manifest_path = out_dir.join(format!("{stem}.manifest.json"));
    let journal_path = out_dir.join(format!("{stem}.tasks.jsonl"));
    let tasks = plan(kind, cfg);
    let mut manifest = new_manifest(Command::Experiment { kind }, cfg, out_dir, tasks.clone());
    if manifest_path.exists() {
        let old = RunManifest::load(&manifest_path)?;
        if old.config != *cfg || old.command != manifest.command {
            return Err(Error::Checkpoint(format!(
                "{} belongs to a different configuration",
                manifest_path.display()
            )));
        }
        manifest.started_unix = old.started_unix;
    }
    manifest.save(&manifest_path)?;

    let done = read_journal(&journal_path)?;
    let mut pending: Vec<&TaskRecord> = tasks.iter().filter(|t| !done.contains_key(&t.index)).collect();
    if let Some(k) = opts.stop_after {
        pending.truncate(k);
    }
    let journal = Mutex::new(OpenOptions::new().create(true).append(true).open(&journal_path)?);
    let fresh = run_indexed(cfg.workers, pending.len(), |i| {
        let task = pending[i];
        let rows = execute(kind, cfg, task)?;
        let line = json!({"index": task.index, "rows": rows}).to_string();
        let mut f = journal.lock().expect("journal lock");
        writeln!(f, "{line}")?;
        f.flush()?;
        Ok((task.index, rows))
    })?;
    let mut all = done;
    all.extend(fresh);

    if all.len() < tasks.len() {
        manifest.save(&manifest_path)?;
        return Ok(RunOutcome {
            manifest,
            manifest_path,
            passed: true,
            reports: Vec::new(),
        });
    }

    let mut reports = Vec::new();
    match kind {
        ExperimentKind::PotentialTable => {
            let rows: Vec<PotentialRow> = serde_json::from_value(all[&0].clone())?;
            let file = format!("{stem}.csv");
            write_csv(&out_dir.join(&file), &rows)?;
            manifest.outputs.push(digest_of(out_dir, &file)?);
        }
        ExperimentKind::GapScan | ExperimentKind::AwStats => {
            let mut rows: Vec<AwRow> = Vec::new();
            for v in all.values() {
                rows.extend(serde_json::from_value::<Vec<AwRow>>(v.clone())?);
            }
            let file = format!("{stem}.csv");
            write_csv(&out_dir.join(&file), &rows)?;
            manifest.outputs.push(digest_of(out_dir, &file)?);
            let summary = if kind == ExperimentKind::GapScan {
                serde_json::to_value(summarize_gaps(cfg.model.dim, &cfg.gap_scan.radii, &rows))?
            } else {
                aw_stats_summary(cfg, &rows)
            };
            let file = format!("{stem}_summary.json");
            fs::write(out_dir.join(&file), serde_json::to_string_pretty(&summary)?)?;
            manifest.outputs.push(digest_of(out_dir, &file)?);
            let mut rep = CheckReport::new(format!("{}_bounds", stem), format!("d={}", cfg.model.dim));
            for r in &rows {
                rep.record(r.f.abs() / r.bound, r.margin + 3.0 * r.f_se >= 0.0, || json!(r));
                if r.gap + 3.0 * r.gap_se < 0.0 {
                    rep.fail(format!("negative gap beyond 3 SE at n={} replica={}", r.n, r.replica));
                }
            }
            reports.push(rep);
        }
    }
    manifest.finished_unix = Some(now());
    manifest.complete = true;
    manifest.save(&manifest_path)?;
    Ok(RunOutcome {
        passed: reports.iter().all(|r| r.passed),
        manifest,
        manifest_path,
        reports,
    })
}

/// Continue the run recorded in a manifest with its own configuration.
pub fn resume(manifest_path: &Path, opts: RunOptions) -> Result<RunOutcome> {
    let m = RunManifest::load(manifest_path)?;
    match &m.command {
        Command::Experiment { kind } => run_experiment(*kind, &m.config, &m.out_dir, opts),
        Command::Verify { suite } => run_suite_to_dir(suite.parse()?, &m.config, &m.out_dir),
    }
}
