//! Sequential (`jobs = 1`) versus rayon (`jobs = 4`) on the three parallel
//! stages. Build with `--no-default-features` to compare against the
//! fallback, where both variants run sequentially.

use std::collections::HashSet;
use std::hint::black_box;
use std::path::Path;

use compgen::aligner::{token_targets, train_model1, AlignOptions, ParallelCorpus};
use compgen::corpus::{load_corpus, load_schema, Corpus, Schema};
use compgen::grammar::{corpus_grammar, coverage_report};
use compgen::metrics::{evaluate, EvalRecord};
use compgen::normalizer::{canonicalize, normalize_program, tokenize};
use compgen::{Grammar, Jobs};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const VARIANTS: [(&str, usize); 2] = [("sequential", 1), ("parallel", 4)];

fn geo() -> (Schema, Corpus) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/geo");
    let schema = load_schema(dir.join("schema.toml")).unwrap();
    let mut c = load_corpus(dir.join("corpus.jsonl")).unwrap();
    for e in &mut c.examples {
        e.program = normalize_program(&e.program, Some(&schema)).unwrap().0;
    }
    // Enough work for the pool to matter.
    let copies: Vec<_> = (0..8)
        .flat_map(|k| {
            c.examples.iter().map(move |e| {
                let mut e = e.clone();
                e.id = format!("{}-{k}", e.id);
                e
            })
        })
        .collect();
    (schema, Corpus::new(copies))
}

fn bench_coverage(cr: &mut Criterion) {
    let (schema, c) = geo();
    let g = corpus_grammar(&Grammar::sql(), Some(&schema), &c, 3);
    let mut group = cr.benchmark_group("coverage_report");
    for (name, jobs) in VARIANTS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &jobs, |b, &j| {
            b.iter(|| coverage_report(black_box(&g), black_box(&c), Jobs(j)))
        });
    }
    group.finish();
}

fn bench_aligner(cr: &mut Criterion) {
    let (_, c) = geo();
    let pc = ParallelCorpus::new(
        c.examples
            .iter()
            .map(|e| (e.question.clone(), token_targets(&e.program)))
            .collect(),
    )
    .unwrap();
    let mut group = cr.benchmark_group("model1_em");
    for (name, jobs) in VARIANTS {
        let opts = AlignOptions {
            jobs: Jobs(jobs),
            ..AlignOptions::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, o| {
            b.iter(|| train_model1(black_box(&pc), 5, o).unwrap())
        });
    }
    group.finish();
}

fn bench_eval(cr: &mut Criterion) {
    let (schema, c) = geo();
    let g = corpus_grammar(&Grammar::sql(), Some(&schema), &c, 3);
    let records: Vec<EvalRecord> = c
        .examples
        .iter()
        .enumerate()
        .map(|(k, e)| {
            // Half the predictions are wrong, so categorization parses them.
            let predicted = if k % 2 == 0 {
                e.program.clone()
            } else {
                tokenize(&e.program)[..6].join(" ")
            };
            EvalRecord {
                id: e.id.clone(),
                gold: e.program.clone(),
                predicted,
                dataset: e.dataset.clone(),
            }
        })
        .collect();
    let train: HashSet<String> = c
        .examples
        .iter()
        .map(|e| canonicalize(&e.program, Some(&schema)))
        .collect();
    let mut group = cr.benchmark_group("evaluate");
    for (name, jobs) in VARIANTS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &jobs, |b, &j| {
            b.iter(|| evaluate(black_box(&records), &train, &g, Some(&schema), Jobs(j)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_coverage, bench_aligner, bench_eval);
criterion_main!(benches);
