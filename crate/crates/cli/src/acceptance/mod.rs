//! The acceptance suite behind `modgff verify`.
//!
//! Each criterion returns a verdict, a one-line summary with the measured
//! values and their thresholds, and a list of named measurements. Verdicts
//! and measurements are written as CSV; wall-clock times go only to the
//! console and the manifest so that the tables are reproducible byte for
//! byte.

mod criteria;

use std::path::{Path, PathBuf};
use std::time::Instant;

use modgff::iv_gff::ChainConfig;
use modgff::reconstruction::PairConfig;
use modgff::rng::derive_seed;

use crate::config::ThetaSection;
use crate::io::{write_results, IoError, MeasureRow, VerdictRow};

/// Master seed used by `verify` when none is given.
pub const DEFAULT_SEED: u64 = 20_240_917;

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "exact theta identities"),
    (2, "modular invariance"),
    (3, "conditional law oracle"),
    (4, "sampler correctness"),
    (5, "sigma(T) asymptotics"),
    (6, "localization at T=0.25"),
    (7, "delocalization at T=30"),
    (8, "Peierls cluster tail"),
    (9, "free-boundary dichotomy"),
    (10, "Sine-Gordon roughening"),
    (11, "level lines"),
    (12, "determinism"),
];

/// Monte Carlo budgets. Thresholds never depend on the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    pub name: &'static str,
    /// Grid of the theta identities.
    pub theta: ThetaSection,
    /// Random shifts per (lattice, β) in the modular check.
    pub modular_draws: usize,
    pub gff_draws: usize,
    pub gibbs_sweeps: usize,
    pub loc: PairConfig,
    pub loc_disorder: usize,
    pub deloc: PairConfig,
    pub deloc_disorder: usize,
    pub peierls_pairs: usize,
    pub peierls_chain: ChainConfig,
    pub sg_chain: ChainConfig,
    pub sg_disorder: usize,
    pub sg_chains: usize,
    pub sg_free_chain: ChainConfig,
    pub sg_free_disorder: usize,
    pub sg_tv_nodes: usize,
    pub level_reps: usize,
    pub level: PairConfig,
    /// Budget of the repeated runs inside the determinism criterion.
    pub determinism: Option<Box<Budget>>,
}

fn chain(burn_in: usize, thin: usize, samples: usize) -> ChainConfig {
    ChainConfig {
        burn_in,
        thin,
        samples,
        ground_rounds: 10_000,
    }
}

fn pairs(chain: ChainConfig, pairs_per_disorder: usize) -> PairConfig {
    PairConfig {
        chain,
        pairs_per_disorder,
        rhat_max: 1.1,
    }
}

impl Budget {
    pub fn full() -> Self {
        Self {
            name: "full",
            theta: ThetaSection::default(),
            modular_draws: 5,
            gff_draws: 200_000,
            gibbs_sweeps: 100_000,
            loc: pairs(chain(1000, 10, 100), 1),
            loc_disorder: 16,
            deloc: pairs(chain(2000, 10, 200), 1),
            deloc_disorder: 24,
            peierls_pairs: 500,
            peierls_chain: chain(300, 1, 4),
            sg_chain: chain(1000, 5, 200),
            sg_disorder: 32,
            sg_chains: 4,
            sg_free_chain: chain(100, 10, 100),
            sg_free_disorder: 32,
            sg_tv_nodes: 2000,
            level_reps: 20,
            level: pairs(chain(200, 2, 20), 2),
            determinism: Some(Box::new(Self::smoke())),
        }
    }

    /// Smaller disorder counts and chains; the pinned sample sizes of the
    /// criteria (draw counts, pair counts, repetitions) are kept.
    pub fn quick() -> Self {
        Self {
            name: "quick",
            loc: pairs(chain(500, 10, 50), 1),
            loc_disorder: 8,
            deloc: pairs(chain(1000, 10, 100), 1),
            deloc_disorder: 12,
            peierls_chain: chain(100, 1, 4),
            sg_chain: chain(500, 5, 100),
            sg_disorder: 8,
            sg_free_chain: chain(50, 10, 50),
            sg_free_disorder: 16,
            level: pairs(chain(100, 2, 10), 2),
            ..Self::full()
        }
    }

    /// Tiny budgets for exercising the whole pipeline; verdicts under this
    /// budget carry no meaning.
    pub fn smoke() -> Self {
        Self {
            name: "smoke",
            theta: ThetaSection {
                betas: vec![0.5, 2.0],
                a_step: 0.5,
                draws: 1,
            },
            modular_draws: 1,
            gff_draws: 2_000,
            gibbs_sweeps: 2_000,
            loc: pairs(chain(20, 2, 8), 1),
            loc_disorder: 2,
            deloc: pairs(chain(20, 2, 8), 1),
            deloc_disorder: 2,
            peierls_pairs: 8,
            peierls_chain: chain(10, 1, 4),
            sg_chain: chain(20, 2, 8),
            sg_disorder: 2,
            sg_chains: 2,
            sg_free_chain: chain(10, 2, 8),
            sg_free_disorder: 2,
            sg_tv_nodes: 200,
            level_reps: 2,
            level: pairs(chain(10, 1, 4), 1),
            determinism: None,
        }
    }
}

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub summary: String,
    pub measures: Vec<(String, f64)>,
    pub seed: u64,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {}: {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.summary,
            self.seconds
        )
    }
}

/// Per-criterion context handed to the checks.
pub(crate) struct Ctx<'a> {
    pub budget: &'a Budget,
    pub seed: u64,
    pub out: &'a Path,
    measures: Vec<(String, f64)>,
}

impl Ctx<'_> {
    pub fn measure(&mut self, key: impl Into<String>, value: f64) {
        self.measures.push((key.into(), value));
    }
}

/// Run the listed criteria in order, calling `report` after each one.
pub fn run(
    budget: &Budget,
    master: u64,
    ids: &[u8],
    out: &Path,
    mut report: impl FnMut(&Outcome),
) -> Vec<Outcome> {
    let mut outcomes = Vec::new();
    for &(id, name) in CRITERIA.iter().filter(|(id, _)| ids.contains(id)) {
        let seed = derive_seed(master, &[id as u64]);
        let mut ctx = Ctx {
            budget,
            seed,
            out,
            measures: Vec::new(),
        };
        let start = Instant::now();
        let (pass, summary) = match criteria::check(id, &mut ctx) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e:#}")),
        };
        let o = Outcome {
            id,
            name,
            pass,
            summary,
            measures: ctx.measures,
            seed,
            seconds: start.elapsed().as_secs_f64(),
        };
        report(&o);
        outcomes.push(o);
    }
    outcomes
}

pub const VERDICTS: &str = "verdicts.csv";
pub const MEASURES: &str = "measures.csv";

/// Write `verdicts.csv` and `measures.csv` into `dir`.
pub fn write_tables(outcomes: &[Outcome], dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::File {
        path: dir.display().to_string(),
        source,
    })?;
    let verdicts: Vec<VerdictRow> = outcomes
        .iter()
        .map(|o| VerdictRow {
            criterion: o.id,
            name: o.name.into(),
            pass: o.pass,
            summary: o.summary.clone(),
        })
        .collect();
    let measures: Vec<MeasureRow> = outcomes
        .iter()
        .flat_map(|o| {
            o.measures.iter().map(move |(k, v)| MeasureRow {
                criterion: o.id,
                key: k.clone(),
                value: *v,
                seed: o.seed,
            })
        })
        .collect();
    let vp = dir.join(VERDICTS);
    let mp = dir.join(MEASURES);
    write_results(&verdicts, &vp)?;
    write_results(&measures, &mp)?;
    Ok(vec![vp, mp])
}
