use std::hint::black_box;

use berezin_bench::sample_point;
use berezin_core::berezin::{berezin_numeric, QuadPolicy};
use berezin_core::coherent_family::kernel_t;
use berezin_core::egorov::{corpus_phi, covariant_symbol_pdo, CorpusSymbol};
use berezin_core::specfun::bessel_i;
use berezin_core::{Complex64, MultiIndex, Params, SeriesControl, SymbolFunction};
use criterion::{criterion_group, criterion_main, Criterion};

fn specfun(c: &mut Criterion) {
    let ctl = SeriesControl::default();
    let mut g = c.benchmark_group("bessel_i");
    for (name, w) in [("series", Complex64::new(3.0, 1.0)), ("asymptotic", Complex64::new(80.0, 10.0))] {
        g.bench_function(name, |b| b.iter(|| bessel_i(black_box(1.5), black_box(w), &ctl).unwrap()));
    }
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let z = sample_point();
    let w: Vec<Complex64> = z.iter().rev().copied().collect();
    for (p, h) in [(0.0, 0.5), (-1.0, 0.05)] {
        let params = Params::new(2, p, h).unwrap();
        c.bench_function(&format!("kernel_t p={p} hbar={h}"), |b| b.iter(|| kernel_t(&params, black_box(&z), black_box(&w)).unwrap()));
    }
}

fn berezin(c: &mut Criterion) {
    let z = sample_point();
    let params = Params::new(2, 0.0, 0.3).unwrap();
    let spec = QuadPolicy::for_dim(2).spec(0.3);
    let phi = SymbolFunction::monomial(MultiIndex(vec![1, 1]));
    let ctl = SeriesControl::default();
    let mut g = c.benchmark_group("berezin_numeric");
    g.sample_size(10);
    g.bench_function("n=2 hbar=0.3", |b| b.iter(|| berezin_numeric(&params, &phi, black_box(&z), &spec, &ctl).unwrap()));
    g.finish();
}

fn egorov(c: &mut Criterion) {
    let z: Vec<Complex64> = sample_point().iter().map(|v| v * 3.0).collect();
    let params = Params::new(2, 0.0, 0.4).unwrap();
    let op = CorpusSymbol::Phi.operator(2, &corpus_phi()).unwrap();
    let mut g = c.benchmark_group("covariant_symbol_pdo");
    g.sample_size(10);
    g.bench_function("multiplication 16 nodes", |b| b.iter(|| covariant_symbol_pdo(&params, &op, black_box(&z), 16).unwrap()));
    g.finish();
}

criterion_group!(benches, specfun, kernel, berezin, egorov);
criterion_main!(benches);
