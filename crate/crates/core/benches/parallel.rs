use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aplbridge::backends::{HashedNgramEmbedder, DEFAULT_DIMENSION};
use aplbridge::lexer::{tokenizer_metrics_with, GlyphInventory, IdentityTokenizer};
use aplbridge::par::ExecMode;
use aplbridge::retrieval::{retrieve, ChunkStore};

const MODES: [ExecMode; 2] = [ExecMode::Sequential, ExecMode::Parallel];

// Random APL-ish lines drawn from the glyph inventory plus some names.
fn corpus(lines: usize, seed: u64) -> Vec<String> {
    let glyphs: Vec<char> = GlyphInventory::standard().iter().map(|(c, _)| c).collect();
    let words = ["x", "y", "r", "mean", "sum", "idx", " ", "1", "2 3", "'abc'"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..lines)
        .map(|_| {
            let mut s = String::new();
            for _ in 0..rng.random_range(20..120) {
                if rng.random_bool(0.4) {
                    s.push(glyphs[rng.random_range(0..glyphs.len())]);
                } else {
                    s.push_str(words[rng.random_range(0..words.len())]);
                }
            }
            s
        })
        .collect()
}

fn tokenizer(c: &mut Criterion) {
    let lines = corpus(4000, 1);
    let inventory = GlyphInventory::standard();
    let mut group = c.benchmark_group("tokenizer_metrics");
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| tokenizer_metrics_with(black_box(&lines), &IdentityTokenizer, &inventory, mode).unwrap())
        });
    }
    group.finish();
}

fn retrieval(c: &mut Criterion) {
    let docs: Vec<(String, String)> = corpus(600, 2)
        .into_iter()
        .enumerate()
        .map(|(i, text)| (format!("doc{i}"), text.repeat(4)))
        .collect();
    let embedder = HashedNgramEmbedder {
        dimension: DEFAULT_DIMENSION,
        n: 3,
    };

    let mut group = c.benchmark_group("chunk_store_build");
    group.sample_size(20);
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| ChunkStore::build(black_box(&docs), 400, 50, &embedder, mode).unwrap())
        });
    }
    group.finish();

    let store = ChunkStore::build(&docs, 400, 50, &embedder, ExecMode::Sequential).unwrap();
    let query = &docs[17].1;
    let mut group = c.benchmark_group("retrieve_top5");
    for mode in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| retrieve(&store, black_box(query), &embedder, 5, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, tokenizer, retrieval);
criterion_main!(benches);
