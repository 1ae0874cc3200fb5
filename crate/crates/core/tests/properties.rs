use std::collections::{BTreeMap, BTreeSet, HashSet};

use compgen::aligner::{
    parse_pharaoh, to_pharaoh, train_model1, AlignOptions, Links, ParallelCorpus,
};
use compgen::attention::{coverage_loss, softmax, supervision_loss, update_coverage};
use compgen::grammar::{delinearize, linearize, parse, sample_tree, tree_yield};
use compgen::normalizer::{canonicalize, rewrite_joins, tokenize};
use compgen::splitter::{split, Partition, SplitError, SplitMode, SplitSpec, TemplateIndex};
use compgen::Grammar;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn join_program() -> impl Strategy<Value = String> {
    let tables = prop::collection::vec(0usize..4, 2..5);
    (tables, prop::option::of(0u32..100), any::<bool>()).prop_map(|(ts, filter, or)| {
        let mut s = format!("SELECT a0.x FROM t{} AS a0", ts[0]);
        for (k, t) in ts.iter().enumerate().skip(1) {
            s.push_str(&format!(" JOIN t{t} AS a{k} ON a{}.id = a{k}.id", k - 1));
        }
        if let Some(v) = filter {
            if or {
                s.push_str(&format!(" WHERE a0.y = {v} OR a0.y = 0"));
            } else {
                s.push_str(&format!(" WHERE a0.y = {v}"));
            }
        }
        s
    })
}

fn content_tokens(p: &str) -> BTreeMap<String, usize> {
    let glue = ["JOIN", "ON", ",", "AND", "WHERE", "(", ")"];
    let mut m = BTreeMap::new();
    for t in tokenize(p) {
        if !glue.contains(&t.to_uppercase().as_str()) {
            *m.entry(t).or_insert(0) += 1;
        }
    }
    m
}

proptest! {
    #[test]
    fn join_rewrite_is_idempotent_and_keeps_content(p in join_program()) {
        let (once, rep) = rewrite_joins(&p).unwrap();
        let (twice, rep2) = rewrite_joins(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(rep2.rewrites_applied, 0);
        prop_assert_eq!(rep.rewrites_applied, tokenize(&p).iter().filter(|t| *t == "JOIN").count());
        prop_assert!(!tokenize(&once).iter().any(|t| t == "JOIN" || t == "ON"));
        prop_assert_eq!(content_tokens(&p), content_tokens(&once));
    }

    #[test]
    fn canonicalize_is_idempotent(p in join_program(), spaces in prop::collection::vec(1usize..4, 0..40)) {
        let (flat, _) = rewrite_joins(&p).unwrap();
        let mut noisy = String::new();
        for (k, tok) in flat.split(' ').enumerate() {
            noisy.push_str(&" ".repeat(*spaces.get(k).unwrap_or(&1)));
            noisy.push_str(&tok.to_lowercase());
        }
        let c = canonicalize(&noisy, None);
        prop_assert_eq!(canonicalize(&c, None), c.clone());
        prop_assert_eq!(c, canonicalize(&flat, None));
    }

    #[test]
    fn qdmr_samples_roundtrip(seed in any::<u64>(), depth in 2usize..8) {
        let g = Grammar::qdmr();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = sample_tree(&g, g.start(), depth, &mut rng).unwrap();
        prop_assert_eq!(&delinearize(&g, &linearize(&t)).unwrap(), &t);
        let words = tree_yield(&g, &t);
        let parsed = parse(&g, &words).unwrap();
        prop_assert_eq!(tree_yield(&g, &parsed), words);
    }

    #[test]
    fn program_split_invariants(
        sizes in prop::collection::vec(1usize..30, 1..30),
        seed in any::<u64>(),
        cap in prop::option::of(1usize..25),
    ) {
        let mut pairs = Vec::new();
        for (t, &n) in sizes.iter().enumerate() {
            for k in 0..n {
                pairs.push((format!("e{t}-{k}"), format!("T{t}")));
            }
        }
        let ti = TemplateIndex::from_pairs(pairs);
        let mut spec = SplitSpec::new(SplitMode::Program, [0.6, 0.2, 0.2], seed);
        spec.downsample_cap = cap;
        let kept: usize = sizes.iter().map(|&n| cap.map_or(n, |c| n.min(c))).sum();
        let r = match split(&ti, &spec) {
            Err(SplitError::TooSmall(k)) => {
                prop_assert!(kept < 3 && k == kept);
                return Ok(());
            }
            r => r.unwrap(),
        };
        prop_assert_eq!(&r, &split(&ti, &spec).unwrap());
        prop_assert_eq!(r.assignment.len(), kept);
        for (id, _) in ti.templates() {
            let parts: HashSet<Partition> =
                ti.members(id).iter().filter_map(|m| r.assignment.get(m)).copied().collect();
            prop_assert!(parts.len() == 1);
        }
    }

    #[test]
    fn attention_losses_are_bounded(
        logits in prop::collection::vec(-5.0f64..5.0, 1..16),
        cov in prop::collection::vec(0.0f64..3.0, 16),
        mask in prop::collection::vec(any::<bool>(), 16),
    ) {
        let n = logits.len();
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let c = &cov[..n];
        let l = coverage_loss(c, &p).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&l) && l <= c.iter().sum::<f64>() + 1e-12);
        let next = update_coverage(c, &p).unwrap();
        prop_assert!((next.iter().sum::<f64>() - c.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let aligned: BTreeSet<usize> = (0..n).filter(|&k| mask[k]).collect();
        prop_assert!(supervision_loss(&p, &aligned).unwrap() >= -1e-12);
    }

    #[test]
    fn pharaoh_roundtrip(links in prop::collection::btree_set((0usize..30, 0usize..30), 0..40)) {
        let links: Links = links;
        prop_assert_eq!(parse_pharaoh(&to_pharaoh(&links)), Some(links));
    }

    #[test]
    fn translation_rows_are_distributions(
        pairs in prop::collection::vec(
            (prop::collection::vec(0u8..6, 1..6), prop::collection::vec(0u8..6, 1..6)),
            1..8,
        ),
        null_word in any::<bool>(),
    ) {
        let pairs = pairs
            .into_iter()
            .map(|(s, t)| {
                (
                    s.iter().map(|w| format!("s{w}")).collect(),
                    t.iter().map(|w| format!("t{w}")).collect(),
                )
            })
            .collect();
        let c = ParallelCorpus::new(pairs).unwrap();
        let opts = AlignOptions { null_word, ..AlignOptions::default() };
        let tr = train_model1(&c, 4, &opts).unwrap();
        for (src, sum) in tr.model.table.row_sums() {
            prop_assert!((sum - 1.0).abs() < 1e-9, "{} sums to {}", src, sum);
        }
        for w in tr.loglik.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
    }
}
