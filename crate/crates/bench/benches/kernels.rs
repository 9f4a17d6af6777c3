use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use normground_core::dynamics::Propagator;
use normground_core::groundstate::{minimize, SolverConfig};
use normground_core::hartree::Hartree;
use normground_core::{GridSpec, ModelParams, RadialProfile, SchrodingerPoisson, Spectral};

fn field(n: usize) -> (GridSpec, normground_core::ComplexField) {
    let spec = GridSpec::new(3, n, 16.0).unwrap();
    (spec, RadialProfile::gaussian(1.0, 1.5).sample(spec, [0.3, 0.0, -0.2]))
}

fn fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft3d");
    for n in [32, 64] {
        let (spec, u) = field(n);
        let sp = Spectral::new(spec);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| sp.inverse(&sp.forward(black_box(&u))))
        });
    }
    g.finish();
}

fn hartree(c: &mut Criterion) {
    let mut g = c.benchmark_group("hartree_potential");
    for n in [32, 64] {
        let (spec, u) = field(n);
        let h = Hartree::new(spec).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| h.potential_values(black_box(&u))));
    }
    g.finish();
}

fn strang(c: &mut Criterion) {
    let (spec, u) = field(32);
    let model = SchrodingerPoisson::new(spec, ModelParams::schrodinger_poisson(8.0 / 3.0).unwrap()).unwrap();
    let prop = Propagator::new(&model, 1e-3);
    c.bench_function("strang_step_32", |b| {
        b.iter_batched(|| u.clone(), |mut psi| prop.step(&mut psi), criterion::BatchSize::LargeInput)
    });
}

fn solver(c: &mut Criterion) {
    let (spec, _) = field(32);
    let model = SchrodingerPoisson::new(spec, ModelParams::schrodinger_poisson(3.2).unwrap()).unwrap();
    let cfg = SolverConfig { rho: 2.0, max_iters: 10, tol: 1e-300, ..SolverConfig::default() };
    c.bench_function("solver_10_iters_32", |b| b.iter(|| minimize(&model, black_box(&cfg)).unwrap()));
}

criterion_group!(benches, fft, hartree, strang, solver);
criterion_main!(benches);
