use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use rcm_core::experiment::{
    resume, run_experiment, run_suite_to_dir, Config, ExperimentKind, RunOptions, RunOutcome, Suite,
};

/// Finite-volume laboratory for the disordered random conductance model.
#[derive(Parser, Debug)]
#[command(name = "rcm", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, overriding the configuration.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory, overriding the configuration.
    #[arg(long, env = "RCM_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run a verification suite: kirchhoff, inequalities, domination,
    /// identities, sampler-exactness or all.
    Verify {
        suite: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run an experiment: gap-scan, aw-stats or potential-table.
    Experiment {
        kind: ExperimentKind,
        #[command(flatten)]
        common: Common,
    },
    /// Continue an interrupted run from its manifest.
    Resume { manifest: PathBuf },
}

fn load(common: &Common) -> Result<(Config, PathBuf)> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = Some(d.clone());
    }
    cfg.validate()?;
    let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("rcm-out"));
    Ok((cfg, out))
}

fn summarize(outcome: &RunOutcome) -> bool {
    for r in &outcome.reports {
        println!(
            "{} {} on {}: {} trials, {} violations, max deviation {:.3e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.test,
            r.graph,
            r.trials,
            r.violations,
            r.max_deviation
        );
        for n in &r.notes {
            println!("    {n}");
        }
    }
    if !outcome.manifest.complete {
        println!("incomplete run; continue with `rcm resume {}`", outcome.manifest_path.display());
    }
    println!("manifest: {}", outcome.manifest_path.display());
    outcome.passed
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Cmd::Verify { suite, common } => {
            let (cfg, out) = load(&common)?;
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            let mut ok = true;
            for s in suites {
                let outcome = run_suite_to_dir(s, &cfg, &out).with_context(|| format!("suite {s}"))?;
                ok &= summarize(&outcome);
            }
            Ok(ok)
        }
        Cmd::Experiment { kind, common } => {
            let (cfg, out) = load(&common)?;
            let outcome = run_experiment(kind, &cfg, &out, RunOptions::default())?;
            Ok(summarize(&outcome))
        }
        Cmd::Resume { manifest } => {
            let outcome = resume(&manifest, RunOptions::default())
                .with_context(|| format!("resuming {}", manifest.display()))?;
            Ok(summarize(&outcome))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
