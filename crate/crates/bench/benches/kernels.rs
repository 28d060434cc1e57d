use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use modgff::iv_gff::{unwrap_lift, IvGibbsChain};
use modgff::level_lines::{harmonic_boundary, trace_level_line, LAMBDA};
use modgff::rng::{stream, Rng};
use modgff::theta::{cond_mean_dual, cond_mean_primal, jacobi_identity_gap};
use modgff::GffSampler;
use modgff_bench::{box_lattice, observed};

fn gff_sample(c: &mut Criterion) {
    let mut g = c.benchmark_group("gff_sample");
    for n in [8, 16, 32] {
        let l = box_lattice(n);
        let sampler = GffSampler::new(&l);
        let mut rng = stream(1, &[]);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| black_box(sampler.sample(&mut rng)))
        });
    }
    g.finish();
}

fn gibbs_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("iv_gibbs_sweep");
    for (n, t) in [(16, 0.25), (16, 30.0), (32, 0.25)] {
        let l = box_lattice(n);
        let (_, a) = observed(&l, t, 2);
        let init = unwrap_lift::<Rng>(&l, &a.a, None);
        let mut chain = IvGibbsChain::new(&l, &a.a, a.beta(), init, stream(3, &[])).unwrap();
        g.bench_function(format!("n{n}_T{t}"), |b| b.iter(|| chain.sweep()));
    }
    g.finish();
}

fn theta(c: &mut Criterion) {
    let mut g = c.benchmark_group("theta");
    for beta in [0.1, 1.0, 10.0] {
        g.bench_function(format!("cond_mean_primal_b{beta}"), |b| {
            b.iter(|| cond_mean_primal(black_box(beta), black_box(1.3)))
        });
        g.bench_function(format!("cond_mean_dual_b{beta}"), |b| {
            b.iter(|| cond_mean_dual(black_box(beta), black_box(1.3)))
        });
    }
    g.bench_function("jacobi_identity_b2", |b| {
        b.iter(|| jacobi_identity_gap(black_box(2.0), black_box(0.7)).unwrap())
    });
    g.finish();
}

fn level_line(c: &mut Criterion) {
    let mut g = c.benchmark_group("level_line_trace");
    for n in [16, 32, 64] {
        let l = box_lattice(n);
        let (phi, _) = observed(&l, 1.0, 4);
        let u = harmonic_boundary(&l, LAMBDA);
        let s: Vec<f64> = phi.iter().zip(u.iter()).map(|(p, h)| p + h).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| trace_level_line(black_box(&s), &l).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, gff_sample, gibbs_sweep, theta, level_line);
criterion_main!(benches);
