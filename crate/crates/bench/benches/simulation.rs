use aoi_bench::fading_config;
use aoi_core::sim::Simulator;
use aoi_core::{AssignmentMode, Policy};
use criterion::{criterion_group, criterion_main, Criterion};

fn slots(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulator_100_slots");
    for (name, policy, mode) in [
        ("blind_rr_uniform", Policy::ClusteredRr, AssignmentMode::UniformBlind),
        ("aoi_index_recursive", Policy::AoiIndex, AssignmentMode::RecursiveCsi),
    ] {
        let cfg = fading_config(policy, mode, 3.0);
        let mut sim = Simulator::new(&cfg, 11).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| {
                for _ in 0..100 {
                    sim.run_slot().unwrap();
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, slots);
criterion_main!(benches);
