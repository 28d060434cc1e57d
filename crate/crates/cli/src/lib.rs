//! Command-line driver for `modgff`.
//!
//! Every subcommand reads an optional TOML config, runs inside a rayon pool
//! of the requested size and writes CSV tables plus `manifest.json` into the
//! output directory.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;

use acceptance::{Budget, CRITERIA, DEFAULT_SEED};
use commands::Report;
use config::ExperimentConfig;
use io::{artifact_version, Manifest, MANIFEST_SCHEMA};

#[derive(Debug, Parser)]
#[command(name = "modgff", version, about = "GFF reconstruction from phases modulo 2π/T")]
struct Cli {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: modgff-out/<command>].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the config.
    #[arg(long, global = true, env = "MODGFF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact GFF samples and their observed phases.
    Sample,
    /// Posterior-mean reconstruction of one sampled field.
    Reconstruct,
    /// Conditional variance ratio over a (T, n) grid.
    Sweep,
    /// Tail of the disagreement cluster of the origin.
    Peierls,
    /// Theta-function identities; exits 1 if a gap exceeds its threshold.
    ThetaCheck,
    /// Annealed variance profile of the random-phase Sine-Gordon model.
    SineGordon,
    /// True, phase and reconstructed level lines of one sample.
    LevelLine,
    /// Acceptance suite; exits 1 if any criterion fails.
    Verify {
        /// Reduced Monte Carlo budget.
        #[arg(long)]
        quick: bool,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Reconstruct => "reconstruct",
            Command::Sweep => "sweep",
            Command::Peierls => "peierls",
            Command::ThetaCheck => "theta-check",
            Command::SineGordon => "sine-gordon",
            Command::LevelLine => "level-line",
            Command::Verify { .. } => "verify",
        }
    }
}

/// Parse `argv`, run the command and return the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let name = cli.command.name();
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if matches!(cli.command, Command::Verify { .. }) && cfg.seed.is_none() {
        cfg.seed = Some(DEFAULT_SEED);
    }
    let seed = cfg.master_seed()?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| Path::new("modgff-out").join(name));
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let start = Instant::now();
    let report = pool.install(|| match &cli.command {
        Command::Sample => commands::sample(&cfg, seed, &out),
        Command::Reconstruct => commands::reconstruct_cmd(&cfg, seed, &out),
        Command::Sweep => commands::sweep(&cfg, seed, &out),
        Command::Peierls => commands::peierls(&cfg, seed, &out),
        Command::ThetaCheck => commands::theta_check(&cfg, seed, &out),
        Command::SineGordon => commands::sine_gordon(&cfg, seed, &out),
        Command::LevelLine => commands::level_line(&cfg, seed, &out),
        Command::Verify { quick, only } => verify(*quick, only, seed, &out),
    })?;

    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        command: name.into(),
        version: artifact_version(),
        config_hash: cfg.hash(),
        config: serde_json::to_value(&cfg)?,
        master_seed: seed,
        seeds: report.seeds.clone(),
        threads: pool.current_num_threads(),
        outputs: report
            .outputs
            .iter()
            .filter_map(|p| p.file_name())
            .map(|f| f.to_string_lossy().into_owned())
            .collect(),
        diagnostics: report.diagnostics.clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(&out.join("manifest.json"))?;
    println!(
        "{name}: wrote {} to {}",
        manifest.outputs.join(", "),
        out.display()
    );
    Ok(!report.failed)
}

fn verify(quick: bool, only: &[u8], seed: u64, out: &Path) -> Result<Report> {
    let budget = if quick { Budget::quick() } else { Budget::full() };
    if let Some(bad) = only.iter().find(|id| !CRITERIA.iter().any(|(c, _)| c == *id)) {
        anyhow::bail!("no criterion {bad}");
    }
    let ids: Vec<u8> = if only.is_empty() {
        CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        only.to_vec()
    };
    let outcomes = acceptance::run(&budget, seed, &ids, out, |o| println!("{}", o.line()));
    let mut r = Report {
        outputs: acceptance::write_tables(&outcomes, out)?,
        ..Report::default()
    };
    for o in &outcomes {
        r.seeds.push((format!("criterion_{}", o.id), o.seed));
        r.diagnostics
            .insert(format!("seconds_{}", o.id), Value::from(o.seconds));
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    r.diagnostics.insert("budget".into(), Value::from(budget.name));
    r.diagnostics.insert("failed".into(), Value::from(failed));
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    r.failed = failed > 0;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{read_results, SampleRow, ThetaRow};

    fn run_in(dir: &Path, args: &[&str]) -> i32 {
        let mut argv = vec!["modgff".to_string(), "--out".into(), dir.display().to_string()];
        argv.extend(args.iter().map(|s| s.to_string()));
        run(argv)
    }

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("cfg.toml");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn missing_seed_is_an_error() {
        let d = tempfile::tempdir().unwrap();
        assert_eq!(run_in(d.path(), &["sample"]), 2);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["modgff", "nope"]), 2);
        assert_eq!(run(["modgff", "sample", "--threads", "x"]), 2);
    }

    #[test]
    fn sample_writes_table_and_manifest() {
        let d = tempfile::tempdir().unwrap();
        let cfg = write_config(d.path(), "[sample]\nn = 3\nsamples = 2\nt = 0.5\n");
        let code = run_in(
            d.path(),
            &["sample", "--seed", "5", "--threads", "2", "--config", cfg.to_str().unwrap()],
        );
        assert_eq!(code, 0);
        let rows: Vec<SampleRow> = read_results(&d.path().join("samples.csv")).unwrap();
        assert_eq!(rows.len(), 2 * 49);
        assert!(rows.iter().all(|r| r.seed == 5 && (0.0..1.0).contains(&r.a)));
        let m = Manifest::read(&d.path().join("manifest.json")).unwrap();
        assert_eq!(m.command, "sample");
        assert_eq!(m.master_seed, 5);
        assert_eq!(m.threads, 2);
        assert_eq!(m.outputs, vec!["samples.csv".to_string()]);
        assert_eq!(m.config["seed"], 5);
    }

    #[test]
    fn same_seed_same_bytes_across_threads() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg = write_config(d1.path(), "seed = 11\n[sample]\nn = 4\nsamples = 3\n");
        let c = cfg.to_str().unwrap();
        assert_eq!(run_in(d1.path(), &["sample", "--config", c, "--threads", "1"]), 0);
        assert_eq!(run_in(d2.path(), &["sample", "--config", c, "--threads", "3"]), 0);
        let a = std::fs::read(d1.path().join("samples.csv")).unwrap();
        let b = std::fs::read(d2.path().join("samples.csv")).unwrap();
        assert_eq!(a, b);
        let m1 = Manifest::read(&d1.path().join("manifest.json")).unwrap();
        let m2 = Manifest::read(&d2.path().join("manifest.json")).unwrap();
        assert_eq!(m1.config_hash, m2.config_hash);
    }

    #[test]
    fn seed_flag_changes_hash() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let cfg = write_config(d1.path(), "[sample]\nn = 2\n");
        let c = cfg.to_str().unwrap();
        assert_eq!(run_in(d1.path(), &["sample", "--config", c, "--seed", "1"]), 0);
        assert_eq!(run_in(d2.path(), &["sample", "--config", c, "--seed", "2"]), 0);
        let m1 = Manifest::read(&d1.path().join("manifest.json")).unwrap();
        let m2 = Manifest::read(&d2.path().join("manifest.json")).unwrap();
        assert_ne!(m1.config_hash, m2.config_hash);
    }

    #[test]
    fn bad_config_exits_2() {
        let d = tempfile::tempdir().unwrap();
        let cfg = write_config(d.path(), "seed = 1\n[sample]\nn = 0\n");
        assert_eq!(run_in(d.path(), &["sample", "--config", cfg.to_str().unwrap()]), 2);
    }

    #[test]
    fn theta_check_passes_on_small_grid() {
        let d = tempfile::tempdir().unwrap();
        let cfg = write_config(d.path(), "seed = 3\n[theta-check]\nbetas = [0.5, 2.0]\na_step = 0.7\ndraws = 1\n");
        assert_eq!(run_in(d.path(), &["theta-check", "--config", cfg.to_str().unwrap()]), 0);
        let rows: Vec<ThetaRow> = read_results(&d.path().join("theta.csv")).unwrap();
        // 2 betas x 9 shifts for each scalar identity, 2 x 1 draws per lattice
        assert_eq!(rows.len(), 2 * 2 * 9 + 2 * 2);
    }

    #[test]
    fn commands_run_on_tiny_configs() {
        let text = "seed = 9\n\
            [chain]\nburn_in = 5\nthin = 1\nsamples = 4\npairs_per_disorder = 1\n\
            [reconstruct]\nn = 2\n\
            [sweep]\nts = [1.0]\nns = [2]\nn_disorder = 1\n\
            [peierls]\nn = 3\npairs = 2\n\
            [sine-gordon]\nns = [2]\nn_disorder = 1\nchains = 2\n\
            [level-line]\nn = 3\n";
        for (cmd, file) in [
            ("reconstruct", "reconstruction.csv"),
            ("sweep", "sweep.csv"),
            ("peierls", "survival.csv"),
            ("sine-gordon", "profile.csv"),
            ("level-line", "paths.csv"),
        ] {
            let d = tempfile::tempdir().unwrap();
            let cfg = write_config(d.path(), text);
            assert_eq!(run_in(d.path(), &[cmd, "--config", cfg.to_str().unwrap()]), 0, "{cmd}");
            assert!(d.path().join(file).exists(), "{cmd}");
            let m = Manifest::read(&d.path().join("manifest.json")).unwrap();
            assert_eq!(m.command, cmd);
        }
    }

    #[test]
    fn verify_rejects_unknown_criterion() {
        let d = tempfile::tempdir().unwrap();
        assert_eq!(run_in(d.path(), &["verify", "--only", "13"]), 2);
    }

    #[test]
    fn verify_single_criterion_writes_tables() {
        let d = tempfile::tempdir().unwrap();
        assert_eq!(run_in(d.path(), &["verify", "--only", "5,9"]), 0);
        let v: Vec<crate::io::VerdictRow> = read_results(&d.path().join("verdicts.csv")).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|r| r.pass));
        let m = Manifest::read(&d.path().join("manifest.json")).unwrap();
        assert_eq!(m.master_seed, DEFAULT_SEED);
    }
}
