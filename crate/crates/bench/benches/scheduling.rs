use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ulofdma_core::assignment::{solve_max_assignment, WeightMatrix};
use ulofdma_core::scheduler::{dpp_epoch, srm_epoch};
use ulofdma_core::*;

fn random_matrix(n: usize, seed: u64) -> WeightMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * n).map(|_| rng.random_range(-1000.0..1000.0)).collect();
    WeightMatrix::new(n, n, data).unwrap()
}

fn hungarian(c: &mut Criterion) {
    let mut group = c.benchmark_group("hungarian");
    for n in [9, 16, 32, 64] {
        let w = random_matrix(n, n as u64);
        group.bench_with_input(BenchmarkId::new("skip", n), &w, |b, w| {
            b.iter(|| solve_max_assignment(black_box(w), true))
        });
        group.bench_with_input(BenchmarkId::new("no_skip", n), &w, |b, w| {
            b.iter(|| solve_max_assignment(black_box(w), false))
        });
    }
    group.finish();
}

fn epoch(c: &mut Criterion) {
    let phy = PhyConfig::default();
    let mcs = McsTable::default();
    let powers = phy.power_levels_mw();
    let mut group = c.benchmark_group("epoch");
    for k in [8, 16, 32] {
        let topo = generate_topology(k, &TopologyParams::default(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let state = sample_channel(k, phy.n_rus, &mut rng);
        let rates = rate_table(&state, &topo, &phy, &mcs).unwrap();
        let mut queues = QueueState::zeros(k);
        for x in queues.q.iter_mut().chain(queues.z.iter_mut()).chain(queues.g.iter_mut()) {
            *x = rng.random_range(0.0..50_000.0);
        }
        let cfg = PolicyConfig::homogeneous(PolicyKind::Dpp, k, 100.0, 20_000.0, 25.0, &phy, &mcs);
        group.bench_with_input(BenchmarkId::new("dpp", k), &rates, |b, r| {
            b.iter(|| dpp_epoch(black_box(&queues), r, &powers, &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("srm", k), &rates, |b, r| {
            b.iter(|| srm_epoch(black_box(r), &powers))
        });
    }
    group.finish();
}

criterion_group!(benches, hungarian, epoch);
criterion_main!(benches);
