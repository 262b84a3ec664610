use criterion::{criterion_group, criterion_main, Criterion};
use holfol::flows::{flow, leaf_sample, LEAF_SEED};
use holfol_bench::scenario;
use std::hint::black_box;

fn flows(c: &mut Criterion) {
    let s = scenario("cylinder");
    let x = s.foliation().unwrap().fields().remove(0);
    c.bench_function("flow cylinder t=1", |b| b.iter(|| flow(&x, black_box(&[0.3, 1.0]), 1.0).unwrap()));
    c.bench_function("flow cylinder t=-2", |b| b.iter(|| flow(&x, black_box(&[0.3, 1.0]), -2.0).unwrap()));

    let p = scenario("punctured");
    let f = p.foliation().unwrap();
    let xp = f.fields().remove(0);
    c.bench_function("flow punctured into the slit", |b| b.iter(|| flow(&xp, black_box(&[1.0, 1.0]), -2.0).unwrap()));
    c.bench_function("leaf_sample punctured budget 1000", |b| {
        b.iter(|| leaf_sample(f, black_box(&[1.0, 1.0]), 1000, LEAF_SEED).unwrap())
    });
}

criterion_group!(benches, flows);
criterion_main!(benches);
