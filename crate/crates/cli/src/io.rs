//! CSV result tables and the JSON run manifest.
//!
//! Every table has a fixed header. Floats are written in shortest
//! round-trip form, so reading a table back gives bit-identical values.

use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: header mismatch, expected [{expected}] found [{found}]")]
    Schema {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

/// A row type with a fixed CSV header. The header must list the struct's
/// fields in declaration order.
pub trait Record: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

pub fn write_results<R: Record>(rows: &[R], path: &Path) -> Result<(), IoError> {
    let p = path.display().to_string();
    let csv_err = |source| IoError::Csv { path: p.clone(), source };
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(R::HEADER).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| IoError::File { path: p.clone(), source })?;
    Ok(())
}

pub fn read_results<R: Record>(path: &Path) -> Result<Vec<R>, IoError> {
    let p = path.display().to_string();
    let csv_err = |source| IoError::Csv { path: p.clone(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let found: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if found != R::HEADER {
        return Err(IoError::Schema {
            path: p,
            expected: R::HEADER.join(","),
            found: found.join(","),
        });
    }
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

/// One vertex of a sampled field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub sample: usize,
    pub vertex: usize,
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub a: f64,
    pub seed: u64,
}

impl Record for SampleRow {
    const HEADER: &'static [&'static str] = &["sample", "vertex", "i", "j", "x", "y", "phi", "a", "seed"];
}

/// One vertex of a reconstruction: the hidden field, its phase, the
/// posterior mean and the posterior variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconRow {
    pub vertex: usize,
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub a: f64,
    pub mean: f64,
    pub var: f64,
    pub seed: u64,
}

impl Record for ReconRow {
    const HEADER: &'static [&'static str] = &["vertex", "i", "j", "x", "y", "phi", "a", "mean", "var", "seed"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub n: usize,
    pub ratio: f64,
    pub stderr: f64,
    pub rhat: f64,
    pub n_excluded: usize,
    pub converged: bool,
    pub seed: u64,
}

impl Record for SweepRow {
    const HEADER: &'static [&'static str] = &["t", "n", "ratio", "stderr", "rhat", "n_excluded", "converged", "seed"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub l: usize,
    pub survival: f64,
    pub pairs: usize,
    pub seed: u64,
}

impl Record for SurvivalRow {
    const HEADER: &'static [&'static str] = &["l", "survival", "pairs", "seed"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub identity: String,
    pub beta: f64,
    pub a: f64,
    pub gap: f64,
    pub threshold: f64,
    pub seed: u64,
}

impl Record for ThetaRow {
    const HEADER: &'static [&'static str] = &["identity", "beta", "a", "gap", "threshold", "seed"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub n: usize,
    pub variance: f64,
    pub stderr: f64,
    pub gff_variance: f64,
    pub rhat: f64,
    pub unconverged: usize,
    pub n_disorder: usize,
    pub converged: bool,
    pub seed: u64,
}

impl Record for ProfileRow {
    const HEADER: &'static [&'static str] = &[
        "n",
        "variance",
        "stderr",
        "gff_variance",
        "rhat",
        "unconverged",
        "n_disorder",
        "converged",
        "seed",
    ];
}

/// A point of a traced path, in continuum coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub path: String,
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub seed: u64,
}

impl Record for PathRow {
    const HEADER: &'static [&'static str] = &["path", "step", "x", "y", "seed"];
}

/// A named measurement made by the acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub criterion: u8,
    pub key: String,
    pub value: f64,
    pub seed: u64,
}

impl Record for MeasureRow {
    const HEADER: &'static [&'static str] = &["criterion", "key", "value", "seed"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub criterion: u8,
    pub name: String,
    pub pass: bool,
    pub summary: String,
}

impl Record for VerdictRow {
    const HEADER: &'static [&'static str] = &["criterion", "name", "pass", "summary"];
}

pub const MANIFEST_SCHEMA: &str = "modgff-manifest/1";

/// Written next to the CSV tables of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub master_seed: u64,
    /// Derived seeds by task name.
    pub seeds: Vec<(String, u64)>,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let p = path.display().to_string();
        let f = File::create(path).map_err(|source| IoError::File { path: p.clone(), source })?;
        serde_json::to_writer_pretty(f, self).map_err(|source| IoError::Json { path: p, source })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let p = path.display().to_string();
        let f = File::open(path).map_err(|source| IoError::File { path: p.clone(), source })?;
        let m: Manifest = serde_json::from_reader(f).map_err(|source| IoError::Json { path: p.clone(), source })?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(IoError::Schema {
                path: p,
                expected: MANIFEST_SCHEMA.into(),
                found: m.schema,
            });
        }
        Ok(m)
    }
}

/// `git describe`-style version of this build.
pub fn artifact_version() -> String {
    format!("modgff-v{}", env!("CARGO_PKG_VERSION"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_of<R: Record>(row: &R) -> Vec<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.serialize(row).unwrap();
        let bytes = w.into_inner().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        text.lines().next().unwrap().split(',').map(String::from).collect()
    }

    #[test]
    fn headers_match_field_order() {
        let s = SampleRow { sample: 0, vertex: 0, i: 0, j: 0, x: 0.0, y: 0.0, phi: 0.0, a: 0.0, seed: 0 };
        assert_eq!(header_of(&s), SampleRow::HEADER);
        let r = ReconRow { vertex: 0, i: 0, j: 0, x: 0.0, y: 0.0, phi: 0.0, a: 0.0, mean: 0.0, var: 0.0, seed: 0 };
        assert_eq!(header_of(&r), ReconRow::HEADER);
        let w = SweepRow { t: 0.0, n: 0, ratio: 0.0, stderr: 0.0, rhat: 0.0, n_excluded: 0, converged: true, seed: 0 };
        assert_eq!(header_of(&w), SweepRow::HEADER);
        assert_eq!(header_of(&SurvivalRow { l: 0, survival: 0.0, pairs: 0, seed: 0 }), SurvivalRow::HEADER);
        let t = ThetaRow { identity: "x".into(), beta: 0.0, a: 0.0, gap: 0.0, threshold: 0.0, seed: 0 };
        assert_eq!(header_of(&t), ThetaRow::HEADER);
        let p = ProfileRow {
            n: 0,
            variance: 0.0,
            stderr: 0.0,
            gff_variance: 0.0,
            rhat: 0.0,
            unconverged: 0,
            n_disorder: 0,
            converged: true,
            seed: 0,
        };
        assert_eq!(header_of(&p), ProfileRow::HEADER);
        let q = PathRow { path: "x".into(), step: 0, x: 0.0, y: 0.0, seed: 0 };
        assert_eq!(header_of(&q), PathRow::HEADER);
        let m = MeasureRow { criterion: 0, key: "k".into(), value: 0.0, seed: 0 };
        assert_eq!(header_of(&m), MeasureRow::HEADER);
        let v = VerdictRow { criterion: 0, name: "n".into(), pass: true, summary: "s".into() };
        assert_eq!(header_of(&v), VerdictRow::HEADER);
    }

    #[test]
    fn rows_round_trip_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let rows: Vec<SweepRow> = [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, f64::INFINITY, -0.0, f64::MIN_POSITIVE]
            .iter()
            .enumerate()
            .map(|(k, &x)| SweepRow {
                t: x,
                n: k,
                ratio: x * std::f64::consts::PI,
                stderr: x.sqrt(),
                rhat: f64::NAN,
                n_excluded: k * 7,
                converged: k % 2 == 0,
                seed: u64::MAX - k as u64,
            })
            .collect();
        write_results(&rows, &path).unwrap();
        let back: Vec<SweepRow> = read_results(&path).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
            assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
            assert!(b.rhat.is_nan());
            assert_eq!((a.n, a.n_excluded, a.converged, a.seed), (b.n, b.n_excluded, b.converged, b.seed));
        }
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,n,ratio,stderr,rhat,n_excluded,converged,seed\n"));
        assert!(text.contains("\n0.1,0,"), "{text}");
    }

    #[test]
    fn header_mismatch_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_results(&[SurvivalRow { l: 1, survival: 0.5, pairs: 2, seed: 3 }], &path).unwrap();
        let err = read_results::<SweepRow>(&path).unwrap_err();
        assert!(matches!(err, IoError::Schema { .. }), "{err}");
        std::fs::write(&path, "l,survival,pairs\n1,0.5,2\n").unwrap();
        assert!(matches!(read_results::<SurvivalRow>(&path), Err(IoError::Schema { .. })));
    }

    #[test]
    fn manifest_round_trips_and_checks_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let mut diagnostics = serde_json::Map::new();
        diagnostics.insert("max_rhat".into(), serde_json::json!(1.02));
        let m = Manifest {
            schema: MANIFEST_SCHEMA.into(),
            command: "sweep".into(),
            version: artifact_version(),
            config_hash: "00".repeat(32),
            config: serde_json::json!({"seed": 1}),
            master_seed: 1,
            seeds: vec![("t0_n0".into(), 99)],
            threads: 2,
            outputs: vec!["sweep.csv".into()],
            diagnostics,
            wall_clock_seconds: 0.25,
        };
        m.write(&path).unwrap();
        assert_eq!(Manifest::read(&path).unwrap(), m);
        let mut bad = m.clone();
        bad.schema = "other/2".into();
        bad.write(&path).unwrap();
        assert!(matches!(Manifest::read(&path), Err(IoError::Schema { .. })));
        std::fs::write(&path, r#"{"schema": "modgff-manifest/1"}"#).unwrap();
        assert!(matches!(Manifest::read(&path), Err(IoError::Json { .. })));
    }
}
