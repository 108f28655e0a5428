use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use fairdraw_bench::completed_transcript;
use fairdraw_core::{
    chi_square_uniformity, commit, mod_add, verify_transcript, ContributionValue, Mask, Modulus,
};

fn bench_mod_add(c: &mut Criterion) {
    let m = Modulus::new((1 << 63) - 25).unwrap();
    let values: Vec<ContributionValue> = (0..1000u64)
        .map(|i| ContributionValue::new(m.get() - 1 - i, m).unwrap())
        .collect();
    let mut g = c.benchmark_group("mod_add");
    g.throughput(Throughput::Elements(values.len() as u64));
    g.bench_function("1000 near-max values", |b| b.iter(|| mod_add(black_box(&values), m)));
    g.finish();
}

fn bench_commit(c: &mut Criterion) {
    let m = Modulus::new(10_000_000).unwrap();
    let v = ContributionValue::new(1_610_027, m).unwrap();
    let mask = Mask::from_bytes([7; 32]);
    c.bench_function("commit", |b| {
        b.iter(|| commit(black_box("session-0001"), black_box("stakeholder-3"), v, &mask))
    });
}

fn bench_verify(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify_transcript");
    for k in [5usize, 50, 500] {
        let bytes = completed_transcript(k, 10_000_000).to_jsonl().into_bytes();
        g.throughput(Throughput::Bytes(bytes.len() as u64));
        g.bench_with_input(BenchmarkId::from_parameter(k), &bytes, |b, bytes| {
            b.iter(|| verify_transcript(black_box(bytes)))
        });
    }
    g.finish();
}

fn bench_chi_square(c: &mut Criterion) {
    let counts: Vec<u64> = (0..1000u64).map(|i| 1000 + (i * 37) % 61).collect();
    c.bench_function("chi_square 1000 bins", |b| b.iter(|| chi_square_uniformity(black_box(&counts))));
}

criterion_group!(benches, bench_mod_add, bench_commit, bench_verify, bench_chi_square);
criterion_main!(benches);
