//! Measures the four operations everything else is built from: pointer
//! chasing, source enumeration, a full protocol run, and protocol search.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use crglab_core::lab::{exhaustive_protocol_search, SearchObjective, SearchOptions};
use crglab_core::perm::random_permutation;
use crglab_core::protocols::pointer_chasing_skg;
use crglab_core::sources::{enumerate_source, sample_pcs, PcsParams, PvParams, PvWhich,
    SourceFamily};
use crglab_core::{chase, run_protocol};

fn bench_chase(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let perms: Vec<_> = (0..6).map(|_| random_permutation(64, &mut rng)).collect();
    let refs: Vec<&_> = perms.iter().collect();
    c.bench_function("chase r=5 n=64", |b| b.iter(|| chase(black_box(&refs), black_box(0))));
}

fn bench_enumerate(c: &mut Criterion) {
    let params = PcsParams::new(1, 4, 1).expect("valid params");
    let family = SourceFamily::Pcs { params };
    c.bench_function("enumerate pcs r=1 n=4 l=1", |b| {
        b.iter(|| enumerate_source(black_box(&family), 1_000_000).expect("fits cap"))
    });
}

fn bench_protocol_run(c: &mut Criterion) {
    let params = PcsParams::new(3, 8, 8).expect("valid params");
    let spec = pointer_chasing_skg(3, 8, 8).expect("valid spec");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let s = sample_pcs(&params, &mut rng).expect("sample");
    c.bench_function("skg run r=3 n=8 l=8", |b| {
        b.iter(|| run_protocol(black_box(&spec), &s.alice, &s.bob, 0).expect("runs"))
    });
}

fn bench_search(c: &mut Criterion) {
    let params = PvParams::new(1, 3).expect("valid params");
    let mix = enumerate_source(&SourceFamily::Pv { params, which: PvWhich::Mix }, 1_000_000)
        .expect("fits cap");
    let objective = SearchObjective::Success { mix: &mix };
    let opts = SearchOptions::default();
    c.bench_function("search mix r=1 n=3 c=1", |b| {
        b.iter(|| exhaustive_protocol_search(black_box(&objective), 1, 1, &opts).expect("runs"))
    });
}

criterion_group!(benches, bench_chase, bench_enumerate, bench_protocol_run, bench_search);
criterion_main!(benches);
