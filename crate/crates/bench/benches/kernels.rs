use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qbayes::asymptotics::channel_spectrum;
use qbayes::matcore::eig_hermitian;
use qbayes::posterior::sample_trajectory;
use qbayes::random::{ginibre, random_density, random_instrument};
use qbayes::rng::substream;
use qbayes::compose;

fn eig(c: &mut Criterion) {
    let mut group = c.benchmark_group("eig_hermitian");
    for d in [2, 8, 32] {
        let g = ginibre(&mut substream(1, d as u64), d, d);
        let h = (g.clone() + g.adjoint()).scale_real(0.5);
        group.bench_with_input(BenchmarkId::from_parameter(d), &h, |b, h| b.iter(|| eig_hermitian(black_box(h)).unwrap()));
    }
    group.finish();
}

fn composition(c: &mut Criterion) {
    let mut group = c.benchmark_group("compose");
    for d in [2, 4] {
        let mut rng = substream(2, d as u64);
        let insts: Vec<_> = (0..3).map(|_| random_instrument(&mut rng, d, 3, 2)).collect();
        group.bench_with_input(BenchmarkId::from_parameter(d), &insts, |b, insts| b.iter(|| compose(black_box(insts)).unwrap()));
    }
    group.finish();
}

fn trajectory(c: &mut Criterion) {
    let mut rng = substream(3, 0);
    let inst = random_instrument(&mut rng, 4, 3, 2);
    let insts = vec![inst; 1000];
    let rho = random_density(&mut rng, 4, 4);
    c.bench_function("sample_trajectory_d4_n1000", |b| b.iter(|| sample_trajectory(black_box(&insts), &rho, 11).unwrap()));
}

fn spectrum(c: &mut Criterion) {
    let mut group = c.benchmark_group("channel_spectrum");
    for d in [2, 4, 8] {
        let kraus = random_instrument(&mut substream(4, d as u64), d, 1, 3).all_kraus();
        group.bench_with_input(BenchmarkId::from_parameter(d), &kraus, |b, k| b.iter(|| channel_spectrum(black_box(k)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, eig, composition, trajectory, spectrum);
criterion_main!(benches);
