//! Experiment configuration: a TOML file with one table per subcommand.
//!
//! ```toml
//! seed = 42
//!
//! [chain]
//! burn_in = 1000
//!
//! [sweep]
//! ts = [0.25, 30.0]
//! ns = [8, 16, 32]
//! ```
//!
//! Every table is optional and falls back to its defaults. Unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use modgff::iv_gff::ChainConfig;
use modgff::level_lines::LAMBDA;
use modgff::reconstruction::PairConfig;
use modgff::sine_gordon::Disorder;
use modgff::BoundaryCondition;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: `{field}` must be {rule}, got {value}")]
    Invalid {
        field: String,
        rule: &'static str,
        value: String,
    },
    #[error("no master seed: set `seed` in the config or pass --seed")]
    MissingSeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub reconstruct: ReconstructSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub peierls: PeierlsSection,
    #[serde(default, rename = "theta-check")]
    pub theta_check: ThetaSection,
    #[serde(default, rename = "sine-gordon")]
    pub sine_gordon: SineGordonSection,
    #[serde(default, rename = "level-line")]
    pub level_line: LevelLineSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: None,
            threads: None,
            chain: Default::default(),
            sample: Default::default(),
            reconstruct: Default::default(),
            sweep: Default::default(),
            peierls: Default::default(),
            theta_check: Default::default(),
            sine_gordon: Default::default(),
            level_line: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Free,
}

impl Boundary {
    /// Free boundary is rooted at the bottom-left corner.
    pub fn condition(self) -> BoundaryCondition {
        match self {
            Boundary::Dirichlet => BoundaryCondition::Dirichlet,
            Boundary::Free => BoundaryCondition::Free { root: (0, 0) },
        }
    }
}

/// Chain budget shared by every Monte Carlo subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub burn_in: usize,
    pub thin: usize,
    pub samples: usize,
    pub ground_rounds: usize,
    pub pairs_per_disorder: usize,
    pub rhat_max: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        let p = PairConfig::default();
        Self {
            burn_in: p.chain.burn_in,
            thin: p.chain.thin,
            samples: p.chain.samples,
            ground_rounds: p.chain.ground_rounds,
            pairs_per_disorder: p.pairs_per_disorder,
            rhat_max: p.rhat_max,
        }
    }
}

impl ChainSection {
    pub fn chain(&self) -> ChainConfig {
        ChainConfig {
            burn_in: self.burn_in,
            thin: self.thin,
            samples: self.samples,
            ground_rounds: self.ground_rounds,
        }
    }

    pub fn pair(&self) -> PairConfig {
        PairConfig {
            chain: self.chain(),
            pairs_per_disorder: self.pairs_per_disorder,
            rhat_max: self.rhat_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    pub n: usize,
    pub boundary: Boundary,
    pub t: f64,
    pub samples: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            n: 16,
            boundary: Boundary::Dirichlet,
            t: 1.0,
            samples: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSection {
    pub n: usize,
    pub boundary: Boundary,
    pub t: f64,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        Self {
            n: 16,
            boundary: Boundary::Dirichlet,
            t: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub ts: Vec<f64>,
    pub ns: Vec<usize>,
    pub n_disorder: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            ts: vec![0.25, 1.0, 4.0, 30.0],
            ns: vec![8, 16],
            n_disorder: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeierlsSection {
    pub n: usize,
    pub t: f64,
    pub pairs: usize,
}

impl Default for PeierlsSection {
    fn default() -> Self {
        Self {
            n: 16,
            t: 0.25,
            pairs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaSection {
    pub betas: Vec<f64>,
    pub a_step: f64,
    /// Random shifts per inverse temperature for the two-vertex identity.
    pub draws: usize,
}

impl Default for ThetaSection {
    fn default() -> Self {
        Self {
            betas: vec![0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
            a_step: 0.1,
            draws: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderKind {
    Uniform,
    Gff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SineGordonSection {
    pub beta: f64,
    /// Activity; `inf` selects the pinned model.
    pub z: Activity,
    pub disorder: DisorderKind,
    /// Temperature of the `gff` disorder.
    pub disorder_t: f64,
    pub ns: Vec<usize>,
    pub n_disorder: usize,
    pub chains: usize,
}

impl Default for SineGordonSection {
    fn default() -> Self {
        Self {
            beta: 0.2,
            z: Activity(4.0),
            disorder: DisorderKind::Uniform,
            disorder_t: 1.0,
            ns: vec![8, 16],
            n_disorder: 8,
            chains: 4,
        }
    }
}

impl SineGordonSection {
    pub fn disorder(&self) -> Disorder {
        match self.disorder {
            DisorderKind::Uniform => Disorder::Uniform,
            DisorderKind::Gff => Disorder::GffMod { t: self.disorder_t },
        }
    }
}

/// A non-negative real or infinity. Written as a number or the string
/// `"inf"` so that it survives JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activity(pub f64);

impl Serialize for Activity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Activity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Activity(x)),
            Raw::Int(x) => Ok(Activity(x as f64)),
            Raw::Text(s) if s == "inf" => Ok(Activity(f64::INFINITY)),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("activity `{s}` is not a number or \"inf\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelLineSection {
    pub n: usize,
    pub t: f64,
    pub lambda: f64,
}

impl Default for LevelLineSection {
    fn default() -> Self {
        Self {
            n: 16,
            t: 0.25,
            lambda: LAMBDA,
        }
    }
}

fn positive_f(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field: field.into(),
            rule: "a positive finite number",
            value: x.to_string(),
        })
    }
}

fn positive_u(field: &str, x: usize) -> Result<(), ConfigError> {
    if x > 0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field: field.into(),
            rule: "positive",
            value: x.to_string(),
        })
    }
}

fn nonempty<T>(field: &str, xs: &[T]) -> Result<(), ConfigError> {
    if xs.is_empty() {
        Err(ConfigError::Invalid {
            field: field.into(),
            rule: "a non-empty list",
            value: "[]".into(),
        })
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Every numeric field must be positive; the activity may also be zero
    /// or infinite.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t) = self.threads {
            positive_u("threads", t)?;
        }
        let c = &self.chain;
        positive_u("chain.burn_in", c.burn_in)?;
        positive_u("chain.thin", c.thin)?;
        positive_u("chain.samples", c.samples)?;
        positive_u("chain.ground_rounds", c.ground_rounds)?;
        positive_u("chain.pairs_per_disorder", c.pairs_per_disorder)?;
        positive_f("chain.rhat_max", c.rhat_max)?;
        if c.samples < 4 {
            return Err(ConfigError::Invalid {
                field: "chain.samples".into(),
                rule: "at least 4 (split R-hat needs two halves of two points)",
                value: c.samples.to_string(),
            });
        }

        positive_u("sample.n", self.sample.n)?;
        positive_f("sample.t", self.sample.t)?;
        positive_u("sample.samples", self.sample.samples)?;

        positive_u("reconstruct.n", self.reconstruct.n)?;
        positive_f("reconstruct.t", self.reconstruct.t)?;

        nonempty("sweep.ts", &self.sweep.ts)?;
        nonempty("sweep.ns", &self.sweep.ns)?;
        for &t in &self.sweep.ts {
            positive_f("sweep.ts", t)?;
        }
        for &n in &self.sweep.ns {
            positive_u("sweep.ns", n)?;
        }
        positive_u("sweep.n_disorder", self.sweep.n_disorder)?;

        positive_u("peierls.n", self.peierls.n)?;
        positive_f("peierls.t", self.peierls.t)?;
        positive_u("peierls.pairs", self.peierls.pairs)?;

        nonempty("theta-check.betas", &self.theta_check.betas)?;
        for &b in &self.theta_check.betas {
            positive_f("theta-check.betas", b)?;
        }
        positive_f("theta-check.a_step", self.theta_check.a_step)?;
        positive_u("theta-check.draws", self.theta_check.draws)?;

        let sg = &self.sine_gordon;
        positive_f("sine-gordon.beta", sg.beta)?;
        if !(sg.z.0 >= 0.0) {
            return Err(ConfigError::Invalid {
                field: "sine-gordon.z".into(),
                rule: "non-negative or \"inf\"",
                value: sg.z.0.to_string(),
            });
        }
        positive_f("sine-gordon.disorder_t", sg.disorder_t)?;
        nonempty("sine-gordon.ns", &sg.ns)?;
        for &n in &sg.ns {
            positive_u("sine-gordon.ns", n)?;
        }
        positive_u("sine-gordon.n_disorder", sg.n_disorder)?;
        if sg.chains < 2 {
            return Err(ConfigError::Invalid {
                field: "sine-gordon.chains".into(),
                rule: "at least 2",
                value: sg.chains.to_string(),
            });
        }

        positive_u("level-line.n", self.level_line.n)?;
        positive_f("level-line.t", self.level_line.t)?;
        positive_f("level-line.lambda", self.level_line.lambda)?;
        Ok(())
    }

    /// The master seed, after any command-line override.
    pub fn master_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or(ConfigError::MissingSeed)
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert!(matches!(cfg.master_seed(), Err(ConfigError::MissingSeed)));
    }

    #[test]
    fn sections_parse() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            seed = 7
            [chain]
            burn_in = 50
            [sweep]
            ts = [0.5, 2.0]
            ns = [4]
            [sine-gordon]
            z = "inf"
            disorder = "gff"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.master_seed().unwrap(), 7);
        assert_eq!(cfg.chain.burn_in, 50);
        assert_eq!(cfg.chain.thin, 10);
        assert_eq!(cfg.sweep.ts, vec![0.5, 2.0]);
        assert!(cfg.sine_gordon.z.0.is_infinite());
        assert_eq!(cfg.sine_gordon.disorder(), Disorder::GffMod { t: 1.0 });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml("sede = 1"), Err(ConfigError::Parse(_))));
        assert!(ExperimentConfig::from_toml("[chain]\nburnin = 3").is_err());
        assert!(ExperimentConfig::from_toml("[nope]\nx = 1").is_err());
    }

    #[test]
    fn non_positive_values_are_rejected() {
        for text in [
            "[chain]\nthin = 0",
            "[sweep]\nts = [1.0, -2.0]",
            "[sweep]\nns = []",
            "[peierls]\nt = 0.0",
            "[sine-gordon]\nz = -1.0",
            "[sine-gordon]\nchains = 1",
            "[level-line]\nlambda = nan",
        ] {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert!(matches!(err, ConfigError::Invalid { .. }), "{text}: {err}");
        }
        assert!(ExperimentConfig::from_toml("[sine-gordon]\nz = 0").is_ok());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_toml("seed = 1").unwrap();
        let b = ExperimentConfig::from_toml("seed = 1\n[chain]\nthin = 10").unwrap();
        let c = ExperimentConfig::from_toml("seed = 2").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn config_echo_round_trips_through_json() {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = Some(u64::MAX);
        cfg.sine_gordon.z = Activity(f64::INFINITY);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
