//! One function per subcommand. Each writes its CSV tables into `out` and
//! returns what goes into the manifest.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::Result;
use rand::Rng as _;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use modgff::level_lines::{
    harmonic_boundary, hausdorff, reconstructed_level_line, trace_level_line, trace_phase_level_line, DualPath,
};
use modgff::peierls::cluster_tail;
use modgff::reconstruction::{reconstruct, transition_sweep};
use modgff::rng::{derive_seed, stream};
use modgff::sine_gordon::{variance_profile, SgConfig};
use modgff::theta::{
    cond_mean_dual, cond_mean_primal, jacobi_identity_gap, laplacian_theta_params, riemann_identity_gap,
};
use modgff::{observe, BoundaryCondition, GffSampler, Lattice};

use crate::config::{ExperimentConfig, ThetaSection};
use crate::io::{
    write_results, PathRow, ProfileRow, ReconRow, Record, SampleRow, SurvivalRow, SweepRow, ThetaRow,
};

/// What a command produced.
#[derive(Debug, Default)]
pub struct Report {
    pub outputs: Vec<PathBuf>,
    pub seeds: Vec<(String, u64)>,
    pub diagnostics: Map<String, Value>,
    /// A check inside the command failed; the process exits with status 1.
    pub failed: bool,
}

impl Report {
    fn table<R: Record>(&mut self, rows: &[R], out: &Path, name: &str) -> Result<()> {
        let path = out.join(name);
        write_results(rows, &path)?;
        self.outputs.push(path);
        Ok(())
    }

    fn diag(&mut self, key: &str, value: impl Into<Value>) {
        self.diagnostics.insert(key.into(), value.into());
    }
}

pub fn sample(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Report> {
    let s = &cfg.sample;
    let l = Lattice::new(s.n, s.boundary.condition())?;
    let sampler = GffSampler::new(&l);
    let mut rows = Vec::with_capacity(s.samples * l.vertex_count());
    for k in 0..s.samples {
        let phi = sampler.sample(&mut stream(seed, &[k as u64]));
        let a = observe(&l, &phi, s.t);
        for v in 0..l.vertex_count() {
            let (i, j) = l.grid_pos(v);
            let (x, y) = l.coords(v);
            rows.push(SampleRow {
                sample: k,
                vertex: v,
                i,
                j,
                x,
                y,
                phi: phi[v],
                a: a.a[v],
                seed,
            });
        }
    }
    let mut r = Report::default();
    r.table(&rows, out, "samples.csv")?;
    r.diag("vertices", l.vertex_count());
    Ok(r)
}

pub fn reconstruct_cmd(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Report> {
    let s = &cfg.reconstruct;
    let l = Lattice::new(s.n, s.boundary.condition())?;
    let phi = GffSampler::new(&l).sample(&mut stream(seed, &[0]));
    let a = observe(&l, &phi, s.t);
    let rs = derive_seed(seed, &[1]);
    let rec = reconstruct(&l, &a, &cfg.chain.pair(), rs)?;
    let rows: Vec<ReconRow> = (0..l.vertex_count())
        .map(|v| {
            let (i, j) = l.grid_pos(v);
            let (x, y) = l.coords(v);
            ReconRow {
                vertex: v,
                i,
                j,
                x,
                y,
                phi: phi[v],
                a: a.a[v],
                mean: rec.mean_field[v],
                var: rec.per_site_var[v],
                seed,
            }
        })
        .collect();
    let mse = rows.iter().map(|r| (r.mean - r.phi).powi(2)).sum::<f64>() / rows.len() as f64;
    let mut r = Report::default();
    r.table(&rows, out, "reconstruction.csv")?;
    r.seeds.push(("field".into(), seed));
    r.seeds.push(("chains".into(), rs));
    r.diag("max_rhat", rec.max_rhat);
    r.diag("converged", rec.converged);
    r.diag("sweeps", rec.sweeps);
    r.diag("rmse", mse.sqrt());
    Ok(r)
}

pub fn sweep(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Report> {
    let s = &cfg.sweep;
    let pair = cfg.chain.pair();
    let res = transition_sweep(&s.ts, &s.ns, s.n_disorder, &pair, seed)?;
    let rows: Vec<SweepRow> = res
        .iter()
        .map(|x| SweepRow {
            t: x.t,
            n: x.n,
            ratio: x.ratio,
            stderr: x.std_error,
            rhat: x.max_rhat,
            n_excluded: x.n_excluded,
            converged: x.n_excluded == 0,
            seed,
        })
        .collect();
    let mut r = Report::default();
    r.table(&rows, out, "sweep.csv")?;
    r.diag("unconverged_rows", rows.iter().filter(|x| !x.converged).count());
    Ok(r)
}

pub fn peierls(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Report> {
    let s = &cfg.peierls;
    let l = Lattice::new(s.n, BoundaryCondition::Dirichlet)?;
    let tail = cluster_tail(&l, s.t, s.pairs, l.center(), &cfg.chain.chain(), seed)?;
    let rows: Vec<SurvivalRow> = tail
        .ls
        .iter()
        .zip(&tail.survival)
        .map(|(&len, &survival)| SurvivalRow {
            l: len,
            survival,
            pairs: tail.pairs,
            seed,
        })
        .collect();
    let mut r = Report::default();
    r.table(&rows, out, "survival.csv")?;
    r.diag("degenerate", tail.degenerate);
    r.diag("gradient_violations", tail.gradient_violations);
    if let Some(f) = tail.fit {
        r.diag("slope", f.slope);
        r.diag("intercept", f.intercept);
        r.diag("r_squared", f.r_squared);
    }
    Ok(r)
}

/// Thresholds on the relative gaps of the theta identities.
pub const SCALAR_THRESHOLD: f64 = 1e-10;
pub const RIEMANN_THRESHOLD: f64 = 1e-8;

/// Gaps of the scalar identities on the `(β, a)` grid and of the
/// multivariate inversion on one- and two-vertex lattices.
pub fn theta_rows(s: &ThetaSection, seed: u64) -> Result<Vec<ThetaRow>> {
    let kmax = ((PI - 1e-12) / s.a_step).floor() as i64;
    let grid: Vec<(f64, f64)> = s
        .betas
        .iter()
        .flat_map(|&b| (-kmax..=kmax).map(move |k| (b, k as f64 * s.a_step)))
        .collect();
    let scalar: Vec<[ThetaRow; 2]> = grid
        .par_iter()
        .map(|&(beta, a)| {
            let p = cond_mean_primal(beta, a);
            let d = cond_mean_dual(beta, a);
            let row = |identity: &str, gap| ThetaRow {
                identity: identity.into(),
                beta,
                a,
                gap,
                threshold: SCALAR_THRESHOLD,
                seed,
            };
            Ok([
                row("primal_dual", (p - d).abs() / p.abs().max(1.0)),
                row("jacobi", jacobi_identity_gap(beta, a)?),
            ])
        })
        .collect::<Result<_>>()?;
    let (pd, jac): (Vec<ThetaRow>, Vec<ThetaRow>) = scalar.into_iter().map(|[x, y]| (x, y)).unzip();

    let lattices = [
        ("riemann_g1", Lattice::new(1, BoundaryCondition::Dirichlet)?),
        ("riemann_g2", Lattice::rectangle(4, 3, BoundaryCondition::Dirichlet)?),
    ];
    let mut tasks = Vec::new();
    for (li, (name, l)) in lattices.iter().enumerate() {
        for (bi, &beta) in s.betas.iter().enumerate() {
            for d in 0..s.draws {
                tasks.push((li, *name, l, bi, beta, d));
            }
        }
    }
    let riemann: Vec<ThetaRow> = tasks
        .par_iter()
        .map(|&(li, name, l, bi, beta, d)| {
            let mut rng = stream(seed, &[li as u64, bi as u64, d as u64]);
            let mut a = l.zero_vertex_field();
            for &v in l.interior() {
                a[v] = rng.random_range(-PI..PI);
            }
            let (z, omega) = laplacian_theta_params(l, beta, &a);
            Ok(ThetaRow {
                identity: name.into(),
                beta,
                a: a[l.interior()[0]],
                gap: riemann_identity_gap(&z, &omega)?,
                threshold: RIEMANN_THRESHOLD,
                seed,
            })
        })
        .collect::<Result<_>>()?;

    Ok(pd.into_iter().chain(jac).chain(riemann).collect())
}

pub fn theta_check(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Report> {
    let rows = theta_rows(&cfg.theta_check, seed)?;
    let mut r = Report::default();
    r.table(&rows, out, "theta.csv")?;
    let over = rows.iter().filter(|x| !(x.gap <= x.threshold)).count();
    let worst = rows.iter().map(|x| x.gap).fold(0.0, f64::max);
    r.diag("rows", rows.len());
    r.diag("max_gap", worst);
    r.diag("over_threshold", over);
    r.failed = over > 0;
    Ok(r)
}

pub fn sine_gordon(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Report> {
    let s = &cfg.sine_gordon;
    let sg = SgConfig {
        beta: s.beta,
        z: s.z.0,
        disorder: s.disorder(),
        chain: cfg.chain.chain(),
        chains: s.chains,
    };
    let res = variance_profile(&sg, &s.ns, s.n_disorder, seed)?;
    let rows: Vec<ProfileRow> = res
        .iter()
        .map(|x| ProfileRow {
            n: x.n,
            variance: x.variance,
            stderr: x.std_error,
            gff_variance: x.gff_variance,
            rhat: x.max_rhat,
            unconverged: x.unconverged,
            n_disorder: x.n_disorder,
            converged: x.unconverged == 0,
            seed,
        })
        .collect();
    let mut r = Report::default();
    r.table(&rows, out, "profile.csv")?;
    r.diag("unconverged_rows", rows.iter().filter(|x| !x.converged).count());
    Ok(r)
}

fn path_rows(name: &str, p: &DualPath, l: &Lattice, seed: u64) -> Vec<PathRow> {
    p.points(l)
        .into_iter()
        .enumerate()
        .map(|(step, (x, y))| PathRow {
            path: name.into(),
            step,
            x,
            y,
            seed,
        })
        .collect()
}

pub fn level_line(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<Report> {
    let s = &cfg.level_line;
    let l = Lattice::new(s.n, BoundaryCondition::Dirichlet)?;
    let phi = GffSampler::new(&l).sample(&mut stream(seed, &[0]));
    let u = harmonic_boundary(&l, s.lambda);
    let field: Vec<f64> = phi.iter().zip(u.iter()).map(|(p, h)| p + h).collect();
    let truth = trace_level_line(&field, &l)?;
    let a = observe(&l, &phi, s.t);
    let rs = derive_seed(seed, &[1]);
    let (rec, res) = reconstructed_level_line(&a, s.lambda, &l, &cfg.chain.pair(), rs)?;

    let mut r = Report::default();
    let mut rows = path_rows("field", &truth, &l, seed);
    // the phase line only exists while T·λ < π
    match trace_phase_level_line(&a, s.lambda, &l) {
        Ok(p) => {
            rows.extend(path_rows("phase", &p, &l, seed));
            r.diag("hausdorff_phase", hausdorff(&p, &truth, &l));
        }
        Err(e) => r.diag("phase_line", json!(format!("not traced: {e}"))),
    }
    rows.extend(path_rows("reconstructed", &rec, &l, seed));
    r.table(&rows, out, "paths.csv")?;
    r.seeds.push(("field".into(), seed));
    r.seeds.push(("chains".into(), rs));
    r.diag("hausdorff_reconstructed", hausdorff(&rec, &truth, &l));
    r.diag("max_rhat", res.max_rhat);
    r.diag("converged", res.converged);
    Ok(r)
}
