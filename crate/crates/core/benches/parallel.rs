//! Parallel vs single-worker throughput of the sample loops.
//!
//! `cargo bench -p rikit-core` compares the rayon pool (all cores) with a
//! one-thread pool; `--no-default-features` builds the sequential fallback,
//! where both variants coincide.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rikit_core::operators::{pair_h, pair_r};
use rikit_core::verify::{run_case, CaseId, RunOptions};
use rikit_core::{par, sample, Bijection, OperatorSpec, Weight};

fn duality_batch(n: usize) -> f64 {
    let r = OperatorSpec::r(Weight::power(1.0, -0.25), Weight::power(1.0, -0.5), Bijection::power(1.5), 4.0);
    let h = r.with_inverse_nu();
    let h = OperatorSpec::h(h.u, h.v, h.nu, h.len);
    par::map_range(n, |i| {
        let mut rng = sample::stream(1, i as u64);
        let f = sample::random_step(&mut rng, 4.0, 8);
        let g = sample::random_step(&mut rng, 4.0, 8);
        let a = pair_r(&r, &f, &g).unwrap();
        let b = pair_h(&h, &g, &f).unwrap();
        (a - b).abs()
    })
    .into_iter()
    .fold(0.0, f64::max)
}

fn bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("parallel");
    g.sample_size(10);
    let jobs = [("all-cores", None), ("one-worker", Some(1))];
    for (label, j) in jobs {
        g.bench_with_input(BenchmarkId::new("duality-batch-2000", label), &j, |b, &j| {
            b.iter(|| par::with_jobs(j, || black_box(duality_batch(2000))))
        });
    }
    let o = RunOptions::default();
    for id in [CaseId::Hlp, CaseId::Sandwich] {
        for (label, j) in jobs {
            g.bench_with_input(BenchmarkId::new(id.as_str(), label), &j, |b, &j| {
                b.iter(|| par::with_jobs(j, || black_box(run_case(id, None, &o).unwrap())))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
