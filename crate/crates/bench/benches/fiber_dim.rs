use criterion::{criterion_group, criterion_main, Criterion};
use holfol::foliation::FoliationModule;
use holfol::sampling::{random_field, SeededRng};
use holfol::symcore::ChartManifold;
use holfol_bench::scenario;
use std::hint::black_box;
use std::sync::Arc;

fn fiber_dim(c: &mut Criterion) {
    let s = scenario("cylinder-pullback");
    let f = s.foliation().unwrap();
    c.bench_function("fiber_dim cylinder-pullback at y=0", |b| b.iter(|| f.fiber_dim(black_box(&[0.0, 0.0])).unwrap()));
    c.bench_function("tangent_dim cylinder-pullback at y=0", |b| b.iter(|| f.tangent_dim(black_box(&[0.0, 0.0])).unwrap()));

    let m = Arc::new(ChartManifold::euclidean("R3", &["x", "y", "z"]));
    let mut rng = SeededRng::new(3);
    let fields = (0..4).map(|_| random_field(&m, &mut rng)).collect();
    let g = FoliationModule::from_fields(m, fields).unwrap();
    c.bench_function("fiber_dim four random fields on R3", |b| b.iter(|| g.fiber_dim(black_box(&[0.1, 0.2, 0.3])).unwrap()));
}

criterion_group!(benches, fiber_dim);
criterion_main!(benches);
