//! Earley recognizer with lexicographically-minimal tree extraction.
//!
//! Grammars here never contain empty rules, so completion never has to look
//! at items created in the same chart set.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use thiserror::Error;

use super::{delinearize, Derivation, Grammar, NtId, ParseTree, RuleId, Symbol, TermId};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("no parse: stuck at token {furthest}{}", .token.as_ref().map(|t| format!(" ({t})")).unwrap_or_default())]
pub struct ParseError {
    /// Index of the first token that could not be consumed (`len` when the
    /// input ended too early).
    pub furthest: usize,
    pub token: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Item {
    rule: u32,
    dot: u32,
    origin: u32,
}

/// Parses `tokens` from the start symbol. When several trees exist, the
/// one whose preorder rule sequence is lexicographically smallest wins.
pub fn parse(g: &Grammar, tokens: &[String]) -> Result<ParseTree, ParseError> {
    let start = g.start();
    parse_from(g, start, tokens)
}

pub(crate) fn parse_from(
    g: &Grammar,
    start: NtId,
    tokens: &[String],
) -> Result<ParseTree, ParseError> {
    let n = tokens.len();
    let ids: Vec<Option<TermId>> = tokens.iter().map(|t| g.t_id(t)).collect();
    let index = g.predict_index();

    let mut sets: Vec<Vec<Item>> = vec![Vec::new(); n + 1];
    let mut seen: Vec<HashSet<Item>> = vec![HashSet::new(); n + 1];
    let mut waiting: Vec<HashMap<NtId, Vec<Item>>> = vec![HashMap::new(); n + 1];
    let mut predicted: Vec<HashSet<NtId>> = vec![HashSet::new(); n + 1];

    let predict = |nt: NtId, i: usize, sets: &mut Vec<Vec<Item>>, seen: &mut Vec<HashSet<Item>>| {
        let Some(Some(tok)) = ids.get(i) else { return };
        if let Some(rules) = index.by_first[nt.0 as usize].get(tok) {
            for &r in rules {
                let it = Item {
                    rule: r as u32,
                    dot: 0,
                    origin: i as u32,
                };
                if seen[i].insert(it) {
                    sets[i].push(it);
                }
            }
        }
    };

    predicted[0].insert(start);
    predict(start, 0, &mut sets, &mut seen);
    let mut furthest = 0;
    for i in 0..=n {
        if !sets[i].is_empty() {
            furthest = i;
        }
        let mut k = 0;
        while k < sets[i].len() {
            let it = sets[i][k];
            k += 1;
            let rule = g.rule(it.rule as usize);
            match rule.rhs.get(it.dot as usize) {
                None => {
                    let origin = it.origin as usize;
                    let parents = waiting[origin].get(&rule.lhs).cloned().unwrap_or_default();
                    for p in parents {
                        let adv = Item {
                            dot: p.dot + 1,
                            ..p
                        };
                        if seen[i].insert(adv) {
                            sets[i].push(adv);
                        }
                    }
                }
                Some(Symbol::N(y)) => {
                    waiting[i].entry(*y).or_default().push(it);
                    if predicted[i].insert(*y) {
                        predict(*y, i, &mut sets, &mut seen);
                    }
                }
                Some(Symbol::T(t)) => {
                    if i < n && ids[i] == Some(*t) {
                        let adv = Item {
                            dot: it.dot + 1,
                            ..it
                        };
                        if seen[i + 1].insert(adv) {
                            sets[i + 1].push(adv);
                        }
                    }
                }
            }
        }
    }

    let accepted = sets[n].iter().any(|it| {
        it.origin == 0
            && g.rule(it.rule as usize).lhs == start
            && it.dot as usize == g.rule(it.rule as usize).rhs.len()
    });
    if !accepted || n == 0 {
        // The last non-empty set is where scanning stopped.
        let stuck = if furthest >= n && n > 0 { n } else { furthest };
        return Err(ParseError {
            furthest: stuck,
            token: tokens.get(stuck).cloned(),
        });
    }

    // completed[(nt, i)] -> [(j, rule)]
    let mut completed: HashMap<(NtId, usize), Vec<(usize, RuleId)>> = HashMap::new();
    for (j, set) in sets.iter().enumerate() {
        for it in set {
            let rule = g.rule(it.rule as usize);
            if it.dot as usize == rule.rhs.len() {
                completed
                    .entry((rule.lhs, it.origin as usize))
                    .or_default()
                    .push((j, it.rule as usize));
            }
        }
    }
    for v in completed.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let mut ex = Extractor {
        g,
        ids: &ids,
        completed: &completed,
        node_memo: HashMap::new(),
        seq_memo: HashMap::new(),
        in_progress: HashSet::new(),
    };
    let seq = ex.best(start, 0, n).expect("accepted input has a tree");
    Ok(delinearize(g, &Derivation(seq.as_ref().clone())).expect("extracted derivation is valid"))
}

type Seq = Rc<Vec<RuleId>>;

struct Extractor<'a> {
    g: &'a Grammar,
    ids: &'a [Option<TermId>],
    completed: &'a HashMap<(NtId, usize), Vec<(usize, RuleId)>>,
    node_memo: HashMap<(NtId, usize, usize), Option<Seq>>,
    seq_memo: HashMap<(RuleId, usize, usize, usize), Option<Seq>>,
    in_progress: HashSet<(NtId, usize, usize)>,
}

fn better(a: &Option<Seq>, b: &Option<Seq>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.as_slice().cmp(y.as_slice()) == Ordering::Less,
        (Some(_), None) => true,
        _ => false,
    }
}

impl Extractor<'_> {
    /// Lexicographically smallest preorder derivation of `nt` over `i..j`.
    fn best(&mut self, nt: NtId, i: usize, j: usize) -> Option<Seq> {
        if let Some(hit) = self.node_memo.get(&(nt, i, j)) {
            return hit.clone();
        }
        if !self.in_progress.insert((nt, i, j)) {
            // Unit cycle; a cyclic tree is never a candidate.
            return None;
        }
        let rules: Vec<RuleId> = self
            .completed
            .get(&(nt, i))
            .map(|v| {
                v.iter()
                    .filter(|(end, _)| *end == j)
                    .map(|(_, r)| *r)
                    .collect()
            })
            .unwrap_or_default();
        let mut best: Option<Seq> = None;
        for r in rules {
            let Some(rest) = self.rhs_seq(r, 0, i, j) else {
                continue;
            };
            let mut v = Vec::with_capacity(rest.len() + 1);
            v.push(r);
            v.extend_from_slice(&rest);
            let cand = Some(Rc::new(v));
            if best.is_none() || better(&cand, &best) {
                best = cand;
            }
            // Rules are visited in id order; later rules start with a larger
            // id, so the first success is already minimal.
            break;
        }
        self.in_progress.remove(&(nt, i, j));
        self.node_memo.insert((nt, i, j), best.clone());
        best
    }

    fn rhs_seq(&mut self, r: RuleId, k: usize, p: usize, j: usize) -> Option<Seq> {
        let key = (r, k, p, j);
        if let Some(hit) = self.seq_memo.get(&key) {
            return hit.clone();
        }
        let rhs = &self.g.rule(r).rhs;
        let out = if k == rhs.len() {
            (p == j).then(|| Rc::new(Vec::new()))
        } else {
            let remaining = rhs.len() - k - 1;
            match rhs[k] {
                Symbol::T(t) => {
                    if p < j && self.ids[p] == Some(t) {
                        self.rhs_seq(r, k + 1, p + 1, j)
                    } else {
                        None
                    }
                }
                Symbol::N(y) => {
                    let ends: Vec<usize> = self
                        .completed
                        .get(&(y, p))
                        .map(|v| {
                            let mut e: Vec<usize> = v.iter().map(|(end, _)| *end).collect();
                            e.dedup();
                            e
                        })
                        .unwrap_or_default();
                    let mut best: Option<Seq> = None;
                    for q in ends {
                        if q + remaining > j {
                            continue;
                        }
                        let Some(rest) = self.rhs_seq(r, k + 1, q, j) else {
                            continue;
                        };
                        let Some(head) = self.best(y, p, q) else {
                            continue;
                        };
                        let mut v = Vec::with_capacity(head.len() + rest.len());
                        v.extend_from_slice(&head);
                        v.extend_from_slice(&rest);
                        let cand = Some(Rc::new(v));
                        if best.is_none() || better(&cand, &best) {
                            best = cand;
                        }
                    }
                    best
                }
            }
        };
        self.seq_memo.insert(key, out.clone());
        out
    }
}
