use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use frictionbem::config::RunConfig;
use frictionbem::estimator::{compute_indicators, EstimatorOptions};
use frictionbem::operators::{assemble_v, assemble_w};
use frictionbem::solver::{assemble_system, reduce, solve, solve_newton, Discretization, NewtonOptions};
use frictionbem::spaces::Spaces;

fn setup(n: usize) -> (RunConfig, Discretization) {
    let mut c = RunConfig::builtin("tresca2d").unwrap();
    c.discretization.elements_per_side = n;
    let disc = Discretization::new(c.initial_mesh().unwrap(), c.material, 1e-3, 0, 1e-10).unwrap();
    (c, disc)
}

fn operators(c: &mut Criterion) {
    let mut g = c.benchmark_group("assembly");
    g.sample_size(10);
    for n in [4, 8, 16] {
        let (cfg, disc) = setup(n);
        let sp = Spaces::new(&disc.mesh, 0);
        g.bench_with_input(BenchmarkId::new("v", 4 * n), &n, |b, _| {
            b.iter(|| assemble_v(&disc.mesh, &sp.dual, &cfg.material, 1e-10).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("w", 4 * n), &n, |b, _| {
            b.iter(|| assemble_w(&disc.mesh, &sp.primal, &cfg.material, 1e-10).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("system", 4 * n), &n, |b, _| {
            b.iter(|| Discretization::new(disc.mesh.clone(), cfg.material, 1e-3, 0, 1e-10).unwrap())
        });
    }
    g.finish();
}

fn solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    for n in [4, 16] {
        let (cfg, disc) = setup(n);
        let sys = assemble_system(&disc, &cfg.problem()).unwrap();
        let red = reduce(&sys).unwrap();
        g.bench_with_input(BenchmarkId::new("reduce", 4 * n), &n, |b, _| b.iter(|| reduce(&sys).unwrap()));
        g.bench_with_input(BenchmarkId::new("newton", 4 * n), &n, |b, _| {
            b.iter(|| solve_newton(&sys, &red, NewtonOptions::default(), None).unwrap())
        });
    }
    g.finish();
}

fn estimator(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimator");
    g.sample_size(10);
    for n in [4, 16] {
        let (cfg, disc) = setup(n);
        let data = cfg.problem();
        let state = solve(&assemble_system(&disc, &data).unwrap(), NewtonOptions::default()).unwrap();
        g.bench_with_input(BenchmarkId::new("indicators", 4 * n), &n, |b, _| {
            b.iter(|| compute_indicators(&disc, &data, &state, EstimatorOptions::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, operators, solver, estimator);
criterion_main!(benches);
