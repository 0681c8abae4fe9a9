use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tetracomm::bounds::fuzz_hbl;
use tetracomm::simulator::{simulate_with, Mode};
use tetracomm::tensor::random_vector;
use tetracomm::{Exec, PackedSymTensor, SteinerSystem, TetraPartition, VectorLayout};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_p2p");
    group.sample_size(10);
    for (q, n) in [(2u64, 120usize), (3, 240)] {
        let part = TetraPartition::build(&SteinerSystem::construct_spherical(q).unwrap()).unwrap();
        let layout = VectorLayout::new(n, &part).unwrap();
        let a = PackedSymTensor::random(n, 1);
        let x = random_vector(n, 2);
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, format!("q{q}_n{n}")), &exec, |bench, &exec| {
                bench.iter(|| simulate_with(&a, black_box(&x), &part, &layout, Mode::P2p, exec, None).unwrap())
            });
        }
    }
    group.finish();
}

fn construct(c: &mut Criterion) {
    let mut group = c.benchmark_group("construct_spherical");
    group.sample_size(10);
    for q in [4u64, 7] {
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, q), &q, |bench, &q| {
                bench.iter(|| SteinerSystem::construct_spherical_with(black_box(q), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn hbl_fuzz(c: &mut Criterion) {
    let mut group = c.benchmark_group("hbl_fuzz");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(name, |bench| bench.iter(|| fuzz_hbl(2_000, 20, black_box(7), exec)));
    }
    group.finish();
}

criterion_group!(benches, simulate, construct, hbl_fuzz);
criterion_main!(benches);
