use ambrose_bench::prepare;
use ambrose_core::homogeneity::{orbit_match, stabilizer_chain, OrbitOptions};
use ambrose_core::total_space::{bar_parallel_residuals, TotalSpaceModel};
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn towers(c: &mut Criterion) {
    let mut group = c.benchmark_group("tower");
    group.sample_size(10);
    for (name, params) in [("round_sphere2", vec![]), ("berger_sphere", vec![("lambda", 2.0)]), ("hopf_monopole", vec![])] {
        let b = prepare(name, &params, 1);
        for depth in [1, 2] {
            group.bench_function(format!("{name}/depth{depth}"), |bench| {
                bench.iter(|| b.setup.tower(black_box(&b.points[0]), depth).unwrap())
            });
        }
    }
    group.finish();
}

fn chains(c: &mut Criterion) {
    let b = prepare("berger_sphere", &[("lambda", 2.0)], 1);
    let tower = b.setup.tower(&b.points[0], 2).unwrap();
    c.bench_function("stabilizer_chain/berger_sphere", |bench| {
        bench.iter(|| stabilizer_chain(black_box(&tower), &b.setup.algebra).unwrap())
    });
}

fn orbits(c: &mut Criterion) {
    let mut group = c.benchmark_group("orbit_match");
    group.sample_size(10);
    for name in ["round_sphere2", "berger_sphere", "su2_canonical"] {
        let b = prepare(name, &[], 2);
        let t1 = b.setup.tower(&b.points[0], 2).unwrap();
        let t2 = b.setup.tower(&b.points[1], 2).unwrap();
        let opts = OrbitOptions::default();
        group.bench_function(name, |bench| {
            bench.iter(|| orbit_match(black_box(&t1), &t2, &b.setup.algebra, 1, &opts).unwrap())
        });
    }
    group.finish();
}

fn total_space(c: &mut Criterion) {
    let b = prepare("hopf_monopole", &[], 1);
    let model = TotalSpaceModel::from_fixture(&b.fixture).unwrap();
    let mut group = c.benchmark_group("total_space");
    group.sample_size(10);
    group.bench_function("bar_parallel_residuals/hopf_monopole", |bench| {
        bench.iter(|| bar_parallel_residuals(&model, black_box(&b.points[0])).unwrap())
    });
    group.finish();
}

criterion_group!(benches, towers, chains, orbits, total_space);
criterion_main!(benches);
