use std::hint::black_box;

use cainf::ainf::{verify_ainf, verify_cyclic};
use cainf::isotopy::{extend_isotopy, integrate_to_morphism, verify_isotopy, IntegrateOptions, PseudoIsotopy};
use cainf::novikov::{q, DiscreteMonoid, MonoidElement, NovikovScalar};
use cainf::random::{random_connection, random_gapped_algebra, GappedSpec};
use cainf::transfer::{build_hodge_for, transfer_canonical};
use cainf::trees::{enumerate_trees, order_polytope_volume, tree_partial_order};
use cainf::FilteredAinfAlgebra;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn algebra(seed: u64) -> FilteredAinfAlgebra {
    random_gapped_algebra(&mut ChaCha8Rng::seed_from_u64(seed), &GappedSpec::default()).unwrap()
}

fn isotopy(seed: u64) -> PseudoIsotopy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_gapped_algebra(&mut rng, &GappedSpec { rounds: 1, ..Default::default() }).unwrap();
    let e0 = a.monoid.min_energy().unwrap();
    let base = PseudoIsotopy::constant(&a.truncate(&e0));
    let labels: Vec<MonoidElement> = a.monoid.enumerate(&a.e_cut).into_iter().filter(|b| !b.is_zero()).collect();
    let c = random_connection(&mut rng, &base.m, &labels, 2, 0.5);
    extend_isotopy(&base, &a, &c).unwrap()
}

fn novikov(c: &mut Criterion) {
    let x: NovikovScalar = "1 + 2*T^(1/2) - 3/4*T^1*e^1 + T^(3/2)".parse().unwrap();
    let small: NovikovScalar = "T^(1/4) - 1/3*T^(1/2)".parse().unwrap();
    c.bench_function("novikov/inverse", |b| b.iter(|| black_box(&x).inverse(&q(6)).unwrap()));
    c.bench_function("novikov/exp", |b| b.iter(|| black_box(&small).exp(&q(4)).unwrap()));
}

fn verification(c: &mut Criterion) {
    let a = algebra(1);
    let mut g = c.benchmark_group("verify");
    for k in [3usize, 4, 5] {
        g.bench_with_input(BenchmarkId::new("ainf", k), &k, |b, &k| b.iter(|| verify_ainf(&a, k)));
        g.bench_with_input(BenchmarkId::new("cyclic", k), &k, |b, &k| b.iter(|| verify_cyclic(&a, k)));
    }
    g.finish();
}

fn transfer(c: &mut Criterion) {
    let a = algebra(2);
    let h = build_hodge_for(&a).unwrap();
    let mut g = c.benchmark_group("transfer");
    for k in [3usize, 5] {
        g.bench_with_input(BenchmarkId::new("canonical", k), &k, |b, &k| b.iter(|| transfer_canonical(&a, &h, k)));
    }
    g.finish();
}

fn isotopies(c: &mut Criterion) {
    let pi = isotopy(3);
    let opts = IntegrateOptions { verify_k_max: None };
    c.bench_function("isotopy/verify", |b| b.iter(|| verify_isotopy(&pi, 3).unwrap()));
    c.bench_function("isotopy/integrate", |b| b.iter(|| integrate_to_morphism(&pi, &q(0), &q(1), &opts).unwrap()));
}

fn trees(c: &mut Criterion) {
    let g = DiscreteMonoid::new(vec![MonoidElement::new(q(1), 0).unwrap()]).unwrap();
    let beta = MonoidElement::new(q(3), 0).unwrap();
    c.bench_function("trees/enumerate", |b| b.iter(|| enumerate_trees(3, &beta, &g).unwrap()));
    let all = enumerate_trees(3, &beta, &g).unwrap();
    c.bench_function("trees/volumes", |b| {
        b.iter(|| all.iter().map(|t| order_polytope_volume(&tree_partial_order(t))).count())
    });
}

criterion_group!(benches, novikov, verification, transfer, isotopies, trees);
criterion_main!(benches);
