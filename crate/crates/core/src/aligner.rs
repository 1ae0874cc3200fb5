//! IBM Model 1 and a FastAlign-style Model 2 (diagonal alignment prior)
//! trained with EM on question/program pairs. Alignments point from each
//! target (program) position to a source (question) position.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::exec::{par_map, Jobs};
use crate::grammar::{linearize, parse, Grammar, ParseError};
use crate::normalizer::tokenize;

/// E-step work is always cut into this many chunks and merged in chunk
/// order, so float results do not depend on the number of workers.
const CHUNKS: usize = 16;
const NULL_WORD: &str = "<null>";
const NULL_PROB: f64 = 0.08;
const LAMBDA_STEPS: usize = 8;
pub const DEFAULT_LAMBDA: f64 = 4.0;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("empty parallel corpus")]
    Empty,
    #[error("pair {0} has an empty side")]
    EmptySide(usize),
    #[error("iterations must be at least 1")]
    NoIterations,
}

#[derive(Debug, Clone, Default)]
struct Vocab {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.ids.get(w) {
            return id;
        }
        self.words.push(w.to_owned());
        self.ids.insert(w.to_owned(), self.words.len() as u32 - 1);
        self.words.len() as u32 - 1
    }

    fn get(&self, w: &str) -> Option<u32> {
        self.ids.get(w).copied()
    }
}

#[derive(Debug, Clone)]
pub struct ParallelCorpus {
    pairs: Vec<(Vec<String>, Vec<String>)>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<(Vec<String>, Vec<String>)>) -> Result<Self, AlignError> {
        if pairs.is_empty() {
            return Err(AlignError::Empty);
        }
        if let Some(k) = pairs.iter().position(|(s, t)| s.is_empty() || t.is_empty()) {
            return Err(AlignError::EmptySide(k));
        }
        Ok(ParallelCorpus { pairs })
    }

    /// Builds a corpus from whitespace-separated strings.
    pub fn from_strs(pairs: &[(&str, &str)]) -> Result<Self, AlignError> {
        let split = |s: &str| s.split_whitespace().map(str::to_owned).collect();
        Self::new(pairs.iter().map(|(s, t)| (split(s), split(t))).collect())
    }

    pub fn pairs(&self) -> &[(Vec<String>, Vec<String>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Program tokens as alignment targets.
pub fn token_targets(program: &str) -> Vec<String> {
    tokenize(program)
}

/// Linearized grammar rules (`R<id>`) as alignment targets.
pub fn rule_targets(g: &Grammar, program: &str) -> Result<Vec<String>, ParseError> {
    let tree = parse(g, &tokenize(program))?;
    Ok(linearize(&tree).0.iter().map(|r| format!("R{r}")).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlignOptions {
    /// Prepend a NULL word to every source sentence.
    pub null_word: bool,
    pub jobs: Jobs,
}

/// `t(f | e)` for target word `f` and source word `e`. Every source row
/// sums to one over the target words it co-occurs with.
#[derive(Debug, Clone)]
pub struct TranslationTable {
    src: Vocab,
    tgt: Vocab,
    t: HashMap<(u32, u32), f64>,
}

impl TranslationTable {
    pub fn prob(&self, target: &str, source: &str) -> f64 {
        match (self.src.get(source), self.tgt.get(target)) {
            (Some(e), Some(f)) => self.t.get(&(e, f)).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    fn prob_ids(&self, e: Option<u32>, f: Option<u32>) -> f64 {
        match (e, f) {
            (Some(e), Some(f)) => self.t.get(&(e, f)).copied().unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Sum of `t(· | e)` for every source word, by word.
    pub fn row_sums(&self) -> BTreeMap<String, f64> {
        let mut rows = vec![Vec::new(); self.src.words.len()];
        for (&(e, f), &p) in &self.t {
            rows[e as usize].push((f, p));
        }
        rows.into_iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .map(|(e, mut r)| {
                r.sort_by_key(|&(f, _)| f);
                (self.src.words[e].clone(), r.iter().map(|(_, p)| p).sum())
            })
            .collect()
    }

    /// Entries as `(source, target, prob)` sorted by words.
    pub fn entries(&self) -> Vec<(String, String, f64)> {
        let mut v: Vec<_> = self
            .t
            .iter()
            .map(|(&(e, f), &p)| {
                (
                    self.src.words[e as usize].clone(),
                    self.tgt.words[f as usize].clone(),
                    p,
                )
            })
            .collect();
        v.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distortion {
    pub lambda: f64,
}

/// Unnormalized diagonal feature `|i/n - j/m|` for 1-based positions.
fn dist(i: usize, j: usize, n: usize, m: usize) -> f64 {
    (i as f64 / n as f64 - j as f64 / m as f64).abs()
}

/// Prior over source positions `1..=n` for target position `j`.
fn prior_row(lambda: f64, j: usize, n: usize, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (1..=n)
        .map(|i| (-lambda * dist(i, j, n, m)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// `(log Z_j(λ), E[d]_j)` under the prior for target position `j`.
fn log_z_and_mean(lambda: f64, j: usize, n: usize, m: usize) -> (f64, f64) {
    let ds: Vec<f64> = (1..=n).map(|i| dist(i, j, n, m)).collect();
    // Stabilize with the smallest distance.
    let dmin = ds.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = ds.iter().map(|d| (-lambda * (d - dmin)).exp()).collect();
    let z: f64 = w.iter().sum();
    let mean = ds.iter().zip(&w).map(|(d, x)| d * x).sum::<f64>() / z;
    (z.ln() - lambda * dmin, mean)
}

#[derive(Debug, Clone)]
pub struct AlignmentModel {
    pub table: TranslationTable,
    /// `None` for Model 1 (uniform alignment prior).
    pub distortion: Option<Distortion>,
    pub null_word: bool,
}

struct Encoded {
    src: Vocab,
    tgt: Vocab,
    pairs: Vec<(Vec<u32>, Vec<u32>)>,
    null: Option<u32>,
}

fn encode(c: &ParallelCorpus, null_word: bool) -> Encoded {
    let mut src = Vocab::default();
    let mut tgt = Vocab::default();
    let null = null_word.then(|| src.intern(NULL_WORD));
    let pairs = c
        .pairs
        .iter()
        .map(|(s, t)| {
            (
                s.iter().map(|w| src.intern(w)).collect(),
                t.iter().map(|w| tgt.intern(w)).collect(),
            )
        })
        .collect();
    Encoded {
        src,
        tgt,
        pairs,
        null,
    }
}

#[derive(Default)]
struct Counts {
    pair: HashMap<(u32, u32), f64>,
    total: HashMap<u32, f64>,
    loglik: f64,
    /// Sum of posterior-weighted distances (non-null links).
    emp_dist: f64,
    /// Non-null posterior mass per `(n, m)` and target position.
    weight: HashMap<(usize, usize), Vec<f64>>,
}

impl Counts {
    fn merge(&mut self, other: Counts) {
        for (k, v) in other.pair {
            *self.pair.entry(k).or_insert(0.0) += v;
        }
        for (k, v) in other.total {
            *self.total.entry(k).or_insert(0.0) += v;
        }
        self.loglik += other.loglik;
        self.emp_dist += other.emp_dist;
        for (k, v) in other.weight {
            let w = self.weight.entry(k).or_insert_with(|| vec![0.0; v.len()]);
            for (a, b) in w.iter_mut().zip(v) {
                *a += b;
            }
        }
    }
}

/// Alignment posteriors over source positions (NULL first when enabled)
/// and the marginal likelihood of target position `j` (0-based).
fn posterior(
    t: &HashMap<(u32, u32), f64>,
    null: Option<u32>,
    lambda: Option<f64>,
    s: &[Option<u32>],
    f: Option<u32>,
    j: usize,
    m: usize,
) -> (Vec<f64>, f64) {
    let n = s.len();
    let tp = |e: Option<u32>| match (e, f) {
        (Some(e), Some(f)) => t.get(&(e, f)).copied().unwrap_or(0.0),
        _ => 0.0,
    };
    let prior: Vec<f64> = match lambda {
        Some(l) => prior_row(l, j + 1, n, m),
        None => vec![1.0 / n as f64; n],
    };
    let mut q = Vec::with_capacity(n + 1);
    let scale = if null.is_some() {
        q.push(NULL_PROB * tp(null));
        1.0 - NULL_PROB
    } else {
        1.0
    };
    for (i, e) in s.iter().enumerate() {
        q.push(scale * prior[i] * tp(*e));
    }
    let z: f64 = q.iter().sum();
    if z > 0.0 {
        q.iter_mut().for_each(|x| *x /= z);
    } else {
        let u = 1.0 / q.len() as f64;
        q.iter_mut().for_each(|x| *x = u);
    }
    (q, z)
}

fn e_step(enc: &Encoded, t: &HashMap<(u32, u32), f64>, lambda: Option<f64>, jobs: Jobs) -> Counts {
    let size = enc.pairs.len().div_ceil(CHUNKS).max(1);
    let chunks: Vec<&[(Vec<u32>, Vec<u32>)]> = enc.pairs.chunks(size).collect();
    let parts = par_map(jobs, &chunks, |chunk| {
        let mut c = Counts::default();
        for (s, tt) in chunk.iter() {
            let (n, m) = (s.len(), tt.len());
            let src: Vec<Option<u32>> = s.iter().map(|&e| Some(e)).collect();
            let mut w = vec![0.0; m];
            for (j, &f) in tt.iter().enumerate() {
                let (q, z) = posterior(t, enc.null, lambda, &src, Some(f), j, m);
                c.loglik += z.ln();
                let off = usize::from(enc.null.is_some());
                if let Some(nw) = enc.null {
                    *c.pair.entry((nw, f)).or_insert(0.0) += q[0];
                    *c.total.entry(nw).or_insert(0.0) += q[0];
                }
                for (i, &e) in s.iter().enumerate() {
                    let p = q[i + off];
                    *c.pair.entry((e, f)).or_insert(0.0) += p;
                    *c.total.entry(e).or_insert(0.0) += p;
                    c.emp_dist += p * dist(i + 1, j + 1, n, m);
                    w[j] += p;
                }
            }
            let acc = c.weight.entry((n, m)).or_insert_with(|| vec![0.0; m]);
            for (a, b) in acc.iter_mut().zip(w) {
                *a += b;
            }
        }
        c
    });
    let mut total = Counts::default();
    for p in parts {
        total.merge(p);
    }
    total
}

fn m_step(c: &Counts) -> HashMap<(u32, u32), f64> {
    c.pair
        .iter()
        .map(|(&(e, f), &v)| ((e, f), v / c.total[&e]))
        .collect()
}

fn uniform_init(enc: &Encoded) -> HashMap<(u32, u32), f64> {
    let mut co: HashMap<u32, BTreeSet<u32>> = HashMap::new();
    for (s, t) in &enc.pairs {
        for &e in s.iter().chain(enc.null.iter()) {
            co.entry(e).or_default().extend(t.iter().copied());
        }
    }
    co.into_iter()
        .flat_map(|(e, fs)| {
            let p = 1.0 / fs.len() as f64;
            fs.into_iter().map(move |f| ((e, f), p))
        })
        .collect()
}

/// Expected complete-data log prior as a function of λ, with its gradient,
/// per target token.
fn lambda_objective(c: &Counts, lambda: f64, tokens: f64) -> (f64, f64) {
    let mut q = -lambda * c.emp_dist;
    let mut grad = -c.emp_dist;
    let mut keys: Vec<_> = c.weight.keys().copied().collect();
    keys.sort_unstable();
    for (n, m) in keys {
        for (j, w) in c.weight[&(n, m)].iter().enumerate() {
            let (lz, mean) = log_z_and_mean(lambda, j + 1, n, m);
            q -= w * lz;
            grad += w * mean;
        }
    }
    (q / tokens, grad / tokens)
}

/// A few projected gradient-ascent steps on λ. Each step backtracks until
/// the objective does not decrease, so EM stays monotone.
fn update_lambda(c: &Counts, lambda: f64, tokens: f64) -> f64 {
    let mut lambda = lambda;
    for _ in 0..LAMBDA_STEPS {
        let (q0, g) = lambda_objective(c, lambda, tokens);
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let cand = (lambda + step * g).max(0.0);
            if cand == lambda {
                break;
            }
            if lambda_objective(c, cand, tokens).0 >= q0 {
                lambda = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    lambda
}

/// Result of a training run: the model and the corpus log-likelihood seen
/// at each iteration (computed under the parameters entering it).
#[derive(Debug, Clone)]
pub struct Training {
    pub model: AlignmentModel,
    pub loglik: Vec<f64>,
}

fn table(enc: &Encoded, t: HashMap<(u32, u32), f64>) -> TranslationTable {
    TranslationTable {
        src: enc.src.clone(),
        tgt: enc.tgt.clone(),
        t,
    }
}

pub fn train_model1(
    c: &ParallelCorpus,
    iters: usize,
    opts: &AlignOptions,
) -> Result<Training, AlignError> {
    if iters == 0 {
        return Err(AlignError::NoIterations);
    }
    let enc = encode(c, opts.null_word);
    let mut t = uniform_init(&enc);
    let mut loglik = Vec::with_capacity(iters);
    for _ in 0..iters {
        let counts = e_step(&enc, &t, None, opts.jobs);
        loglik.push(counts.loglik);
        t = m_step(&counts);
    }
    Ok(Training {
        model: AlignmentModel {
            table: table(&enc, t),
            distortion: None,
            null_word: opts.null_word,
        },
        loglik,
    })
}

/// Model 2 with the diagonal prior, starting from a Model 1 table. With
/// `learn_lambda` false, λ stays at `lambda0`.
pub fn train_model2(
    c: &ParallelCorpus,
    init: &TranslationTable,
    iters: usize,
    lambda0: f64,
    learn_lambda: bool,
    opts: &AlignOptions,
) -> Result<Training, AlignError> {
    if iters == 0 {
        return Err(AlignError::NoIterations);
    }
    let enc = encode(c, opts.null_word);
    let mut t: HashMap<(u32, u32), f64> = HashMap::new();
    for (s, tt) in &enc.pairs {
        for &e in s.iter().chain(enc.null.iter()) {
            for &f in tt {
                let p = init.prob_ids(
                    init.src.get(&enc.src.words[e as usize]),
                    init.tgt.get(&enc.tgt.words[f as usize]),
                );
                t.insert((e, f), p);
            }
        }
    }
    let tokens: f64 = enc.pairs.iter().map(|(_, t)| t.len() as f64).sum();
    let mut lambda = lambda0.max(0.0);
    let mut loglik = Vec::with_capacity(iters);
    for _ in 0..iters {
        let counts = e_step(&enc, &t, Some(lambda), opts.jobs);
        loglik.push(counts.loglik);
        t = m_step(&counts);
        if learn_lambda {
            lambda = update_lambda(&counts, lambda, tokens);
        }
    }
    Ok(Training {
        model: AlignmentModel {
            table: table(&enc, t),
            distortion: Some(Distortion { lambda }),
            null_word: opts.null_word,
        },
        loglik,
    })
}

/// `(source index, target index)` links.
pub type Links = BTreeSet<(usize, usize)>;

impl AlignmentModel {
    /// Posterior over source positions for every target position (NULL
    /// excluded; rows sum to the non-null mass).
    pub fn posteriors(&self, source: &[String], target: &[String]) -> Vec<Vec<f64>> {
        let tab = &self.table;
        let s: Vec<Option<u32>> = source.iter().map(|w| tab.src.get(w)).collect();
        let null = if self.null_word {
            tab.src.get(NULL_WORD)
        } else {
            None
        };
        let lambda = self.distortion.map(|d| d.lambda);
        let m = target.len();
        target
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let (q, _) = posterior(&tab.t, null, lambda, &s, tab.tgt.get(f), j, m);
                if self.null_word {
                    q[1..].to_vec()
                } else {
                    q
                }
            })
            .collect()
    }

    /// Links each target position to its most probable source position
    /// (ties go to the smaller index), unless that posterior is below
    /// `threshold` or NULL is more probable.
    pub fn viterbi_align(&self, source: &[String], target: &[String], threshold: f64) -> Links {
        let mut links = Links::new();
        for (j, row) in self.posteriors(source, target).iter().enumerate() {
            let mut best = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = i;
                }
            }
            let null_mass = 1.0 - row.iter().sum::<f64>();
            if row[best] >= threshold && !(self.null_word && null_mass > row[best]) {
                links.insert((best, j));
            }
        }
        links
    }
}

pub fn supervision_indices(links: &Links, m: usize) -> Vec<BTreeSet<usize>> {
    let mut out = vec![BTreeSet::new(); m];
    for &(i, j) in links {
        if j < m {
            out[j].insert(i);
        }
    }
    out
}

/// Pharaoh format: `i-j` pairs ordered by target then source index.
pub fn to_pharaoh(links: &Links) -> String {
    let mut v: Vec<_> = links.iter().copied().collect();
    v.sort_by_key(|&(i, j)| (j, i));
    v.iter()
        .map(|(i, j)| format!("{i}-{j}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_pharaoh(line: &str) -> Option<Links> {
    line.split_whitespace()
        .map(|p| {
            let (i, j) = p.split_once('-')?;
            Some((i.parse().ok()?, j.parse().ok()?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::IndexedRandom;
    use rand::SeedableRng;

    fn toy() -> ParallelCorpus {
        ParallelCorpus::from_strs(&[("a b", "x y"), ("a", "x")]).unwrap()
    }

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn diagonal(pairs: usize) -> ParallelCorpus {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let vocab: Vec<String> = (0..10).map(|k| format!("w{k}")).collect();
        let v = (0..pairs)
            .map(|_| {
                let s: Vec<String> = vocab.choose_multiple(&mut rng, 4).cloned().collect();
                (s.clone(), s)
            })
            .collect();
        ParallelCorpus::new(v).unwrap()
    }

    fn assert_monotone(ll: &[f64]) {
        for w in ll.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "likelihood dropped: {ll:?}");
        }
    }

    #[test]
    fn toy_model1_matches_reference_em() {
        let tr = train_model1(&toy(), 20, &AlignOptions::default()).unwrap();
        let p = tr.model.table.prob("x", "a");
        assert!(p >= 0.9);
        // Independent reference EM gives 0.999994210 after 20 iterations.
        assert!((p - 0.999994210).abs() < 1e-8, "{p}");
        assert_monotone(&tr.loglik);
        let links = tr.model.viterbi_align(&words("a b"), &words("x y"), 0.0);
        assert_eq!(links, Links::from([(0, 0), (1, 1)]));
    }

    #[test]
    fn single_pair() {
        let c = ParallelCorpus::from_strs(&[("a", "x")]).unwrap();
        let tr = train_model1(&c, 1, &AlignOptions::default()).unwrap();
        assert_eq!(tr.model.table.prob("x", "a"), 1.0);
        let links = tr.model.viterbi_align(&words("a"), &words("x"), 0.0);
        assert_eq!(links, Links::from([(0, 0)]));
        assert!(tr
            .model
            .viterbi_align(&words("a"), &words("x"), 1.01)
            .is_empty());
    }

    #[test]
    fn rows_sum_to_one() {
        let c = diagonal(20);
        for iters in 1..4 {
            let tr = train_model1(&c, iters, &AlignOptions::default()).unwrap();
            for (_, s) in tr.model.table.row_sums() {
                assert!((s - 1.0).abs() < 1e-9);
            }
            let m2 = train_model2(
                &c,
                &tr.model.table,
                iters,
                4.0,
                true,
                &AlignOptions::default(),
            )
            .unwrap();
            for (_, s) in m2.model.table.row_sums() {
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_lambda_frozen_is_model1() {
        let c = ParallelCorpus::from_strs(&[("a b c", "x y"), ("a c", "x z"), ("b", "y")]).unwrap();
        let opts = AlignOptions::default();
        let m1 = train_model1(&c, 3, &opts).unwrap();
        let m2 = train_model2(&c, &m1.model.table, 1, 0.0, false, &opts).unwrap();
        let m1b = train_model1(&c, 4, &opts).unwrap();
        for (s, t) in c.pairs() {
            let a = m2.model.posteriors(s, t);
            let b = m1b.model.posteriors(s, t);
            for (ra, rb) in a.iter().zip(&b) {
                for (x, y) in ra.iter().zip(rb) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn diagonal_corpus_learns_positive_lambda() {
        let c = diagonal(50);
        let opts = AlignOptions::default();
        let m1 = train_model1(&c, 5, &opts).unwrap();
        let m2 = train_model2(&c, &m1.model.table, 5, 0.0, true, &opts).unwrap();
        assert_monotone(&m1.loglik);
        assert_monotone(&m2.loglik);
        assert!(m2.model.distortion.unwrap().lambda > 0.0);
        for (s, t) in c.pairs() {
            let links = m2.model.viterbi_align(s, t, 0.0);
            assert_eq!(links, (0..4).map(|k| (k, k)).collect::<Links>());
        }
    }

    #[test]
    fn null_word_keeps_likelihood_monotone() {
        let c =
            ParallelCorpus::from_strs(&[("a b the", "x y"), ("a the", "x"), ("b", "y z")]).unwrap();
        let opts = AlignOptions {
            null_word: true,
            ..Default::default()
        };
        let m1 = train_model1(&c, 10, &opts).unwrap();
        assert_monotone(&m1.loglik);
        let m2 = train_model2(&c, &m1.model.table, 10, 4.0, true, &opts).unwrap();
        assert_monotone(&m2.loglik);
    }

    #[test]
    fn parallel_e_step_is_identical() {
        let c = diagonal(40);
        let a = train_model1(&c, 3, &AlignOptions::default()).unwrap();
        let b = train_model1(
            &c,
            3,
            &AlignOptions {
                jobs: Jobs(4),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.loglik, b.loglik);
        assert_eq!(a.model.table.entries(), b.model.table.entries());
    }

    #[test]
    fn supervision_sets() {
        let links = Links::from([(0, 0), (2, 0)]);
        let sets = supervision_indices(&links, 2);
        assert_eq!(sets, vec![BTreeSet::from([0, 2]), BTreeSet::new()]);
        assert_eq!(
            supervision_indices(&Links::new(), 3),
            vec![BTreeSet::new(); 3]
        );
    }

    #[test]
    fn pharaoh_roundtrip() {
        let links = Links::from([(2, 0), (0, 1), (1, 0)]);
        let s = to_pharaoh(&links);
        assert_eq!(s, "1-0 2-0 0-1");
        assert_eq!(parse_pharaoh(&s), Some(links));
        assert_eq!(parse_pharaoh(""), Some(Links::new()));
        assert_eq!(parse_pharaoh("1-x"), None);
    }

    #[test]
    fn errors() {
        assert_eq!(ParallelCorpus::new(vec![]).unwrap_err(), AlignError::Empty);
        assert_eq!(
            ParallelCorpus::from_strs(&[("a", "")]).unwrap_err(),
            AlignError::EmptySide(0)
        );
        assert_eq!(
            train_model1(&toy(), 0, &AlignOptions::default()).unwrap_err(),
            AlignError::NoIterations
        );
    }
}
