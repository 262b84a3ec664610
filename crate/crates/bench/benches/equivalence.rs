use criterion::{criterion_group, criterion_main, Criterion};
use holfol::bisubmersion::{compose, equivalent, invert, random_word, GeneratorSet, HolonomyWord};
use holfol::quotient::xi;
use holfol::sampling::SeededRng;
use holfol_bench::scenario;
use std::hint::black_box;

fn equivalence(c: &mut Criterion) {
    let s = scenario("cylinder-pullback");
    let f = s.foliation().unwrap();
    let set = GeneratorSet::of_foliation(f, "F");
    let mut rng = SeededRng::new(7);
    let w = random_word(&set, &[1.0, 0.5], 3, 1.0, &mut rng).unwrap();
    let unit = HolonomyWord::empty(f.manifold().clone(), w.source()).unwrap();
    let loop_ = compose(&invert(&w).unwrap(), &w).unwrap();
    c.bench_function("equivalent w⁻¹∘w ≡ 1 (length 6 max)", |b| b.iter(|| equivalent(black_box(&loop_), &unit).unwrap()));
    let q = s.quotient().unwrap();
    c.bench_function("xi of a random word", |b| b.iter(|| xi(black_box(&w), q).unwrap()));
}

criterion_group!(benches, equivalence);
criterion_main!(benches);
