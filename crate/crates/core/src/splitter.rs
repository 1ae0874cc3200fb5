//! Program templates, iid / program / KB-free splits, and downsampling of
//! frequent templates.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{Corpus, Example, Schema};
use crate::grammar::Grammar;
use crate::normalizer::{anonymize_predicates, canonicalize, NormalizeError};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("invalid split spec: {0}")]
    Spec(String),
    #[error("{id}: {source}")]
    Template {
        id: String,
        #[source]
        source: NormalizeError,
    },
    #[error("need at least 3 examples, got {0}")]
    TooSmall(usize),
}

/// How program templates are derived from (already anonymized) examples.
#[derive(Debug, Clone, Copy)]
pub enum TemplateMode<'a> {
    /// Canonical form of the entity-anonymized program.
    Entity { schema: Option<&'a Schema> },
    /// Canonical form with schema tables and columns anonymized too.
    KbFree {
        schema: &'a Schema,
        grammar: &'a Grammar,
    },
}

pub fn extract_template(e: &Example, mode: TemplateMode) -> Result<String, NormalizeError> {
    match mode {
        TemplateMode::Entity { schema } => Ok(canonicalize(&e.program, schema)),
        TemplateMode::KbFree { schema, grammar } => {
            let anon = anonymize_predicates(&e.program, schema, grammar)?;
            Ok(canonicalize(&anon, None))
        }
    }
}

/// Templates numbered by first occurrence, with their member example ids in
/// corpus order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateIndex {
    templates: Vec<String>,
    ids: HashMap<String, usize>,
    members: Vec<Vec<String>>,
    of_example: HashMap<String, usize>,
}

impl TemplateIndex {
    pub fn build(corpus: &Corpus, mode: TemplateMode) -> Result<Self, SplitError> {
        let mut pairs = Vec::with_capacity(corpus.len());
        for e in &corpus.examples {
            let t = extract_template(e, mode).map_err(|source| SplitError::Template {
                id: e.id.clone(),
                source,
            })?;
            pairs.push((e.id.clone(), t));
        }
        Ok(Self::from_pairs(pairs))
    }

    /// Builds an index from `(example id, template)` pairs.
    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut ti = TemplateIndex::default();
        for (id, t) in pairs {
            let (id, t) = (id.into(), t.into());
            let tid = match ti.ids.get(&t) {
                Some(&k) => k,
                None => {
                    ti.templates.push(t.clone());
                    ti.members.push(Vec::new());
                    ti.ids.insert(t, ti.templates.len() - 1);
                    ti.templates.len() - 1
                }
            };
            ti.of_example.insert(id.clone(), tid);
            ti.members[tid].push(id);
        }
        ti
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn num_examples(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn template(&self, id: usize) -> &str {
        &self.templates[id]
    }

    pub fn members(&self, id: usize) -> &[String] {
        &self.members[id]
    }

    pub fn id_of(&self, template: &str) -> Option<usize> {
        self.ids.get(template).copied()
    }

    pub fn template_of(&self, example_id: &str) -> Option<usize> {
        self.of_example.get(example_id).copied()
    }

    pub fn templates(&self) -> impl Iterator<Item = (usize, &str)> {
        self.templates
            .iter()
            .enumerate()
            .map(|(i, t)| (i, t.as_str()))
    }

    /// Example ids of all templates, template by template.
    fn example_ids(&self) -> Vec<String> {
        self.members.iter().flatten().cloned().collect()
    }

    fn retain_examples(&self, keep: &HashSet<String>) -> TemplateIndex {
        let pairs = self
            .members
            .iter()
            .enumerate()
            .flat_map(|(t, m)| m.iter().map(move |id| (id, t)))
            .filter(|(id, _)| keep.contains(*id))
            .map(|(id, t)| (id.clone(), self.templates[t].clone()));
        TemplateIndex::from_pairs(pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Dev, Partition::Test];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Iid,
    Program,
    KbFree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub downsample_cap: Option<usize>,
    /// Downsample the training partition after splitting instead of the
    /// whole corpus before it.
    pub downsample_after: bool,
}

impl SplitSpec {
    pub fn new(mode: SplitMode, ratios: [f64; 3], seed: u64) -> Self {
        SplitSpec {
            mode,
            ratios,
            seed,
            downsample_cap: None,
            downsample_after: false,
        }
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        if self.ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(SplitError::Spec("ratios must be positive".into()));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(SplitError::Spec(format!("ratios sum to {sum}, not 1")));
        }
        if self.downsample_cap == Some(0) {
            return Err(SplitError::Spec("downsample cap must be at least 1".into()));
        }
        Ok(())
    }

    /// Example-count targets for `n` examples.
    pub fn targets(&self, n: usize) -> [usize; 3] {
        let train = ((n as f64) * self.ratios[0]).round() as usize;
        let dev = (((n as f64) * self.ratios[1]).round() as usize).min(n - train.min(n));
        let train = train.min(n);
        [train, dev, n - train - dev]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitResult {
    pub assignment: BTreeMap<String, Partition>,
    pub warnings: Vec<String>,
}

impl SplitResult {
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for p in self.assignment.values() {
            c[p.index()] += 1;
        }
        c
    }

    /// The examples of each partition, in corpus order.
    pub fn partition_corpus(&self, corpus: &Corpus) -> [Corpus; 3] {
        let mut out: [Corpus; 3] = Default::default();
        for c in &mut out {
            c.schema = corpus.schema.clone();
        }
        for e in &corpus.examples {
            if let Some(p) = self.assignment.get(&e.id) {
                out[p.index()].examples.push(e.clone());
            }
        }
        out
    }
}

fn shuffled<T>(mut v: Vec<T>, rng: &mut ChaCha8Rng) -> Vec<T> {
    v.shuffle(rng);
    v
}

/// Assigns whole templates to partitions. Templates are visited largest
/// first (seeded shuffle breaks size ties) and each goes to the partition
/// with the largest remaining deficit.
pub fn make_program_split(ti: &TemplateIndex, spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    spec.validate()?;
    let n = ti.num_examples();
    if n < 3 {
        return Err(SplitError::TooSmall(n));
    }
    let targets = spec.targets(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order = shuffled((0..ti.len()).collect::<Vec<_>>(), &mut rng);
    order.sort_by_key(|&t| std::cmp::Reverse(ti.members(t).len()));

    let mut counts = [0usize; 3];
    let mut result = SplitResult::default();
    for t in order {
        let size = ti.members(t).len();
        let p = if size > targets[0] {
            result.warnings.push(format!(
                "template {t} has {size} examples, more than the train target {}; assigned to train",
                targets[0]
            ));
            Partition::Train
        } else {
            let deficit = |p: Partition| targets[p.index()] as i64 - counts[p.index()] as i64;
            Partition::ALL
                .into_iter()
                .max_by(|a, b| deficit(*a).cmp(&deficit(*b)).then(b.cmp(a)))
                .expect("three partitions")
        };
        counts[p.index()] += size;
        for id in ti.members(t) {
            result.assignment.insert(id.clone(), p);
        }
    }
    for p in [Partition::Dev, Partition::Test] {
        if counts[p.index()] == 0 {
            result.warnings.push(format!("{p} partition is empty"));
        }
    }
    Ok(result)
}

fn iid_assign(ids: Vec<String>, spec: &SplitSpec) -> SplitResult {
    let targets = spec.targets(ids.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ids = shuffled(ids, &mut rng);
    let mut result = SplitResult::default();
    for (k, id) in ids.into_iter().enumerate() {
        let p = if k < targets[0] {
            Partition::Train
        } else if k < targets[0] + targets[1] {
            Partition::Dev
        } else {
            Partition::Test
        };
        result.assignment.insert(id, p);
    }
    result
}

/// Seeded example-level split.
pub fn make_iid_split(corpus: &Corpus, spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    spec.validate()?;
    Ok(iid_assign(
        corpus.examples.iter().map(|e| e.id.clone()).collect(),
        spec,
    ))
}

/// Keeps at most `cap` members per template, sampled uniformly without
/// replacement. Kept members stay in their original order.
pub fn downsample(ti: &TemplateIndex, cap: usize, seed: u64) -> TemplateIndex {
    assert!(cap >= 1, "downsample cap must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = HashSet::new();
    for t in 0..ti.len() {
        let m = ti.members(t);
        if m.len() <= cap {
            keep.extend(m.iter().cloned());
        } else {
            let mut picked = index::sample(&mut rng, m.len(), cap).into_vec();
            picked.sort_unstable();
            keep.extend(picked.into_iter().map(|i| m[i].clone()));
        }
    }
    ti.retain_examples(&keep)
}

/// Splits according to `spec`, downsampling first unless
/// `spec.downsample_after` is set, in which case only train is capped.
pub fn split(ti: &TemplateIndex, spec: &SplitSpec) -> Result<SplitResult, SplitError> {
    spec.validate()?;
    let before = match spec.downsample_cap {
        Some(cap) if !spec.downsample_after => downsample(ti, cap, spec.seed),
        _ => ti.clone(),
    };
    let mut result = match spec.mode {
        SplitMode::Iid => iid_assign(before.example_ids(), spec),
        SplitMode::Program | SplitMode::KbFree => make_program_split(&before, spec)?,
    };
    if let (Some(cap), true) = (spec.downsample_cap, spec.downsample_after) {
        let train = before.retain_examples(
            &result
                .assignment
                .iter()
                .filter(|(_, p)| **p == Partition::Train)
                .map(|(id, _)| id.clone())
                .collect(),
        );
        let kept: HashSet<String> = downsample(&train, cap, spec.seed)
            .example_ids()
            .into_iter()
            .collect();
        result
            .assignment
            .retain(|id, p| *p != Partition::Train || kept.contains(id));
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitStats {
    pub examples: [usize; 3],
    pub templates: [usize; 3],
    /// Templates of each partition that never occur in train (train: all).
    pub new_templates: [usize; 3],
}

pub fn split_stats(r: &SplitResult, ti: &TemplateIndex) -> SplitStats {
    let mut examples = [0; 3];
    let mut per: [BTreeSet<usize>; 3] = Default::default();
    for (id, p) in &r.assignment {
        examples[p.index()] += 1;
        if let Some(t) = ti.template_of(id) {
            per[p.index()].insert(t);
        }
    }
    let templates = [per[0].len(), per[1].len(), per[2].len()];
    let unseen = |k: usize| per[k].difference(&per[0]).count();
    SplitStats {
        examples,
        templates,
        new_templates: [templates[0], unseen(1), unseen(2)],
    }
}

fn row(v: &[usize; 3]) -> String {
    format!("{} / {} / {}", v[0], v[1], v[2])
}

impl SplitStats {
    pub fn examples_row(&self) -> String {
        row(&self.examples)
    }

    pub fn templates_row(&self) -> String {
        row(&self.templates)
    }

    pub fn new_templates_row(&self) -> String {
        row(&self.new_templates)
    }
}

impl fmt::Display for SplitStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "examples (train / dev / test): {}", self.examples_row())?;
        writeln!(f, "templates: {}", self.templates_row())?;
        writeln!(f, "new templates: {}", self.new_templates_row())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(sizes: &[(&str, usize)]) -> TemplateIndex {
        TemplateIndex::from_pairs(
            sizes
                .iter()
                .flat_map(|(t, n)| (0..*n).map(move |k| (format!("{t}{k}"), t.to_string()))),
        )
    }

    fn spec(mode: SplitMode) -> SplitSpec {
        SplitSpec::new(mode, [0.6, 0.2, 0.2], 13)
    }

    #[test]
    fn lexically_different_questions_share_template() {
        let a = Example::new(
            "1",
            "how big is state0",
            "select area from state where name = state0",
            "geo",
        );
        let b = Example::new(
            "2",
            "what is the area of state0",
            "SELECT  area FROM state\nWHERE name = state0",
            "geo",
        );
        let m = TemplateMode::Entity { schema: None };
        assert_eq!(
            extract_template(&a, m).unwrap(),
            extract_template(&b, m).unwrap()
        );
        let canon = extract_template(&a, m).unwrap();
        let c = Example::new("3", "q", &canon, "geo");
        assert_eq!(extract_template(&c, m).unwrap(), canon);
    }

    #[test]
    fn small_program_split_is_optimal() {
        let ti = index(&[("A", 5), ("B", 3), ("C", 2)]);
        let r = make_program_split(&ti, &spec(SplitMode::Program)).unwrap();
        let c = r.counts();
        assert_eq!(c[0], 5);
        assert!(c == [5, 3, 2] || c == [5, 2, 3]);

        // Exhaustive search over all 3^3 assignments.
        let sizes = [5usize, 3, 2];
        let targets = spec(SplitMode::Program).targets(10);
        let mut best = usize::MAX;
        for code in 0..27 {
            let mut counts = [0usize; 3];
            let mut x = code;
            for s in sizes {
                counts[x % 3] += s;
                x /= 3;
            }
            let dev: usize = (0..3).map(|k| counts[k].abs_diff(targets[k])).sum();
            best = best.min(dev);
        }
        let got: usize = (0..3).map(|k| c[k].abs_diff(targets[k])).sum();
        assert_eq!(got, best);
    }

    #[test]
    fn single_template_goes_to_train() {
        let ti = index(&[("A", 7)]);
        let r = make_program_split(&ti, &spec(SplitMode::Program)).unwrap();
        assert_eq!(r.counts(), [7, 0, 0]);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn program_split_is_deterministic() {
        let ti = index(&[("A", 4), ("B", 4), ("C", 4), ("D", 1), ("E", 2), ("F", 2)]);
        let s = spec(SplitMode::Program);
        assert_eq!(
            make_program_split(&ti, &s).unwrap(),
            make_program_split(&ti, &s).unwrap()
        );
    }

    #[test]
    fn iid_counts() {
        let c = Corpus::new(
            (0..10)
                .map(|i| Example::new(i.to_string(), "q", "p", "d"))
                .collect(),
        );
        let a = make_iid_split(&c, &spec(SplitMode::Iid)).unwrap();
        assert_eq!(a.counts(), [6, 2, 2]);
        let mut s = spec(SplitMode::Iid);
        s.seed = 14;
        let b = make_iid_split(&c, &s).unwrap();
        assert_eq!(b.counts(), [6, 2, 2]);
        assert_ne!(a, b);
    }

    #[test]
    fn iid_templates_repeat_across_partitions() {
        let ti = index(&[("A", 10)]);
        let r = split(&ti, &spec(SplitMode::Iid)).unwrap();
        let st = split_stats(&r, &ti);
        assert_eq!(st.examples, [6, 2, 2]);
        assert_eq!(st.templates, [1, 1, 1]);
        assert_eq!(st.new_templates, [1, 0, 0]);
    }

    #[test]
    fn downsample_caps() {
        let ti = index(&[("A", 50), ("B", 12)]);
        let d = downsample(&ti, 20, 13);
        assert_eq!(d.members(d.id_of("A").unwrap()).len(), 20);
        assert_eq!(d.members(d.id_of("B").unwrap()), ti.members(1));
        let uniq: HashSet<_> = d.members(0).iter().collect();
        assert_eq!(uniq.len(), 20);
        assert_eq!(d, downsample(&ti, 20, 13));
    }

    #[test]
    fn downsample_after_split_only_touches_train() {
        let ti = index(&[("A", 50), ("B", 12), ("C", 10), ("D", 8)]);
        let mut s = spec(SplitMode::Program);
        s.downsample_cap = Some(5);
        s.downsample_after = true;
        let r = split(&ti, &s).unwrap();
        let plain = make_program_split(&ti, &spec(SplitMode::Program)).unwrap();
        let c = r.counts();
        let pc = plain.counts();
        assert_eq!(c[0], 5);
        assert_eq!((c[1], c[2]), (pc[1], pc[2]));
    }

    #[test]
    fn stats_rows() {
        let ti = index(&[("A", 409), ("B", 103), ("C", 95)]);
        let mut r = SplitResult::default();
        for (t, p) in [
            (0, Partition::Train),
            (1, Partition::Dev),
            (2, Partition::Test),
        ] {
            for id in ti.members(t) {
                r.assignment.insert(id.clone(), p);
            }
        }
        let st = split_stats(&r, &ti);
        assert_eq!(st.examples_row(), "409 / 103 / 95");
        assert_eq!(st.new_templates, st.templates);
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(SplitMode::Iid);
        s.ratios = [0.5, 0.5, 0.0];
        assert!(s.validate().is_err());
        s.ratios = [0.5, 0.3, 0.3];
        assert!(s.validate().is_err());
        let mut s = spec(SplitMode::Iid);
        s.downsample_cap = Some(0);
        assert!(s.validate().is_err());
    }
}
