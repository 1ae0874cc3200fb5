//! Context-free grammars over program tokens, schema instantiation, parse
//! trees and their rule-sequence linearization.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use thiserror::Error;

use crate::corpus::{Corpus, Schema};
use crate::exec::{self, Jobs};
use crate::normalizer;

mod earley;

pub use earley::{parse, ParseError};

pub const SQL_GRAMMAR: &str = include_str!("../../grammars/sql.grammar");
pub const QDMR_GRAMMAR: &str = include_str!("../../grammars/qdmr.grammar");

/// Nonterminals filled from a schema.
pub mod names {
    pub const TABLE_NAME: &str = "table_name";
    pub const TABLE_WORD: &str = "table_word";
    pub const COLUMN_NAME: &str = "column_name";
    pub const COL_REF: &str = "col_ref";
    pub const COL_ALIAS: &str = "col_alias";
    pub const SUBQ_ALIAS: &str = "subq_alias";
    pub const VALUE_LITERAL: &str = "value_literal";
}

pub const DEFAULT_MAX_ALIASES: usize = 3;

pub type RuleId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NtId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    N(NtId),
    T(TermId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub id: RuleId,
    pub lhs: NtId,
    pub rhs: Vec<Symbol>,
}

impl Rule {
    pub fn nonterminals(&self) -> impl Iterator<Item = NtId> + '_ {
        self.rhs.iter().filter_map(|s| match s {
            Symbol::N(n) => Some(*n),
            Symbol::T(_) => None,
        })
    }

    pub fn is_terminal_only(&self) -> bool {
        self.rhs.iter().all(|s| matches!(s, Symbol::T(_)))
    }
}

/// Right-hand-side item used when building rules by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sym {
    N(String),
    T(String),
}

impl Sym {
    pub fn n(s: &str) -> Sym {
        Sym::N(s.to_owned())
    }
    pub fn t(s: &str) -> Sym {
        Sym::T(s.to_owned())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("nonterminal {0} has no rules")]
    Undefined(String),
    #[error("grammar has no start symbol")]
    NoStart,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid derivation at position {position}: {message}")]
pub struct DerivationError {
    pub position: usize,
    pub message: String,
}

/// Top-down left-to-right sequence of rule applications.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Derivation(pub Vec<RuleId>);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParseTree {
    pub rule: RuleId,
    pub children: Vec<ParseTree>,
}

impl ParseTree {
    pub fn leaf(rule: RuleId) -> Self {
        ParseTree {
            rule,
            children: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(ParseTree::size).sum::<usize>()
    }
}

#[derive(Debug, Default)]
pub(crate) struct PredictIndex {
    /// Per nonterminal: terminal -> rules whose FIRST set contains it.
    pub(crate) by_first: Vec<HashMap<TermId, Vec<RuleId>>>,
}

#[derive(Debug, Default)]
pub struct Grammar {
    rules: Vec<Rule>,
    start: Option<NtId>,
    nonterminals: Vec<String>,
    terminals: Vec<String>,
    nt_index: HashMap<String, NtId>,
    t_index: HashMap<String, TermId>,
    by_lhs: Vec<Vec<RuleId>>,
    externs: HashSet<NtId>,
    seen: HashSet<(NtId, Vec<Symbol>)>,
    predict: OnceLock<PredictIndex>,
}

impl Clone for Grammar {
    fn clone(&self) -> Self {
        Grammar {
            rules: self.rules.clone(),
            start: self.start,
            nonterminals: self.nonterminals.clone(),
            terminals: self.terminals.clone(),
            nt_index: self.nt_index.clone(),
            t_index: self.t_index.clone(),
            by_lhs: self.by_lhs.clone(),
            externs: self.externs.clone(),
            seen: self.seen.clone(),
            predict: OnceLock::new(),
        }
    }
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.rules.len() == other.rules.len()
            && self.start_name() == other.start_name()
            && (0..self.rules.len()).all(|r| self.rule_text(r) == other.rule_text(r))
    }
}

impl Grammar {
    pub fn new() -> Self {
        Grammar::default()
    }

    pub fn sql() -> Self {
        Grammar::from_text(SQL_GRAMMAR).expect("bundled SQL grammar is valid")
    }

    pub fn qdmr() -> Self {
        Grammar::from_text(QDMR_GRAMMAR).expect("bundled QDMR grammar is valid")
    }

    pub fn nonterminal(&mut self, name: &str) -> NtId {
        if let Some(&id) = self.nt_index.get(name) {
            return id;
        }
        let id = NtId(self.nonterminals.len() as u32);
        self.nonterminals.push(name.to_owned());
        self.nt_index.insert(name.to_owned(), id);
        self.by_lhs.push(Vec::new());
        id
    }

    pub fn terminal(&mut self, text: &str) -> TermId {
        if let Some(&id) = self.t_index.get(text) {
            return id;
        }
        let id = TermId(self.terminals.len() as u32);
        self.terminals.push(text.to_owned());
        self.t_index.insert(text.to_owned(), id);
        id
    }

    pub fn set_start(&mut self, name: &str) {
        let id = self.nonterminal(name);
        self.start = Some(id);
    }

    pub fn mark_extern(&mut self, name: &str) {
        let id = self.nonterminal(name);
        self.externs.insert(id);
    }

    /// Adds `lhs -> rhs`, returning the id of the new rule or of an
    /// identical existing one. The first rule added fixes the start symbol
    /// unless one was set explicitly.
    pub fn add_rule(&mut self, lhs: &str, rhs: &[Sym]) -> RuleId {
        assert!(
            !rhs.is_empty(),
            "rule for {lhs} has an empty right-hand side"
        );
        let lhs = self.nonterminal(lhs);
        let rhs: Vec<Symbol> = rhs
            .iter()
            .map(|s| match s {
                Sym::N(n) => Symbol::N(self.nonterminal(n)),
                Sym::T(t) => Symbol::T(self.terminal(t)),
            })
            .collect();
        if self.seen.contains(&(lhs, rhs.clone())) {
            return self.by_lhs[lhs.0 as usize]
                .iter()
                .copied()
                .find(|&r| self.rules[r].rhs == rhs)
                .expect("seen rule is indexed");
        }
        self.seen.insert((lhs, rhs.clone()));
        let id = self.rules.len();
        self.rules.push(Rule { id, lhs, rhs });
        self.by_lhs[lhs.0 as usize].push(id);
        if self.start.is_none() {
            self.start = Some(lhs);
        }
        self.predict = OnceLock::new();
        id
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id]
    }

    pub fn num_rules(&self) -> usize {
        self.rules.len()
    }

    pub fn start(&self) -> NtId {
        self.start.expect("grammar has a start symbol")
    }

    pub fn start_name(&self) -> Option<&str> {
        self.start.map(|s| self.nt_name(s))
    }

    pub fn rules_for(&self, nt: NtId) -> &[RuleId] {
        &self.by_lhs[nt.0 as usize]
    }

    pub fn nt_name(&self, nt: NtId) -> &str {
        &self.nonterminals[nt.0 as usize]
    }

    pub fn t_text(&self, t: TermId) -> &str {
        &self.terminals[t.0 as usize]
    }

    pub fn nt_id(&self, name: &str) -> Option<NtId> {
        self.nt_index.get(name).copied()
    }

    pub fn t_id(&self, text: &str) -> Option<TermId> {
        self.t_index.get(text).copied()
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = (NtId, &str)> {
        self.nonterminals
            .iter()
            .enumerate()
            .map(|(i, n)| (NtId(i as u32), n.as_str()))
    }

    pub fn terminals(&self) -> impl Iterator<Item = (TermId, &str)> {
        self.terminals
            .iter()
            .enumerate()
            .map(|(i, n)| (TermId(i as u32), n.as_str()))
    }

    /// The rule in text format, e.g. `source_table -> table_word "AS" table_name`.
    pub fn rule_text(&self, id: RuleId) -> String {
        let r = &self.rules[id];
        let mut s = format!("{} ->", self.nt_name(r.lhs));
        for sym in &r.rhs {
            s.push(' ');
            match sym {
                Symbol::N(n) => s.push_str(self.nt_name(*n)),
                Symbol::T(t) => s.push_str(&quote(self.t_text(*t))),
            }
        }
        s
    }

    /// Terminal text of a rule whose right-hand side is a single terminal.
    pub fn single_terminal(&self, id: RuleId) -> Option<&str> {
        match self.rules[id].rhs.as_slice() {
            [Symbol::T(t)] => Some(self.t_text(*t)),
            _ => None,
        }
    }

    pub fn from_text(text: &str) -> Result<Self, GrammarError> {
        let mut g = Grammar::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix("%start") {
                let name = rest.trim();
                if name.is_empty() {
                    return Err(GrammarError::Syntax {
                        line,
                        message: "%start needs a nonterminal".into(),
                    });
                }
                g.set_start(name);
                continue;
            }
            if let Some(rest) = content.strip_prefix("%extern") {
                for name in rest.split_whitespace() {
                    g.mark_extern(name);
                }
                continue;
            }
            let (lhs, rhs) = content
                .split_once("->")
                .ok_or_else(|| GrammarError::Syntax {
                    line,
                    message: "expected `lhs -> rhs`".into(),
                })?;
            let lhs = lhs.trim();
            if lhs.is_empty() || lhs.contains(char::is_whitespace) || lhs.starts_with('"') {
                return Err(GrammarError::Syntax {
                    line,
                    message: format!("bad left-hand side `{lhs}`"),
                });
            }
            let symbols = lex_rhs(rhs).map_err(|message| GrammarError::Syntax { line, message })?;
            for alt in symbols.split(|s| matches!(s, Lexed::Bar)) {
                if alt.is_empty() {
                    return Err(GrammarError::Syntax {
                        line,
                        message: "empty alternative".into(),
                    });
                }
                let rhs: Vec<Sym> = alt
                    .iter()
                    .map(|s| match s {
                        Lexed::Nt(n) => Sym::N(n.clone()),
                        Lexed::T(t) => Sym::T(t.clone()),
                        Lexed::Bar => unreachable!(),
                    })
                    .collect();
                g.add_rule(lhs, &rhs);
            }
        }
        g.validate()?;
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(start) = self.start_name() {
            s.push_str(&format!("%start {start}\n"));
        }
        let mut externs: Vec<&str> = self.externs.iter().map(|n| self.nt_name(*n)).collect();
        externs.sort_unstable();
        if !externs.is_empty() {
            s.push_str(&format!("%extern {}\n", externs.join(" ")));
        }
        for r in 0..self.rules.len() {
            s.push_str(&self.rule_text(r));
            s.push('\n');
        }
        s
    }

    /// Every nonterminal used on a right-hand side has a rule (unless it is
    /// declared `%extern`), and the start symbol has a rule.
    pub fn validate(&self) -> Result<(), GrammarError> {
        let start = self.start.ok_or(GrammarError::NoStart)?;
        if self.by_lhs[start.0 as usize].is_empty() {
            return Err(GrammarError::Undefined(self.nt_name(start).to_owned()));
        }
        for r in &self.rules {
            for n in r.nonterminals() {
                if self.by_lhs[n.0 as usize].is_empty() && !self.externs.contains(&n) {
                    return Err(GrammarError::Undefined(self.nt_name(n).to_owned()));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn predict_index(&self) -> &PredictIndex {
        self.predict.get_or_init(|| self.build_predict_index())
    }

    /// FIRST sets per nonterminal (no empty rules, so no nullable handling).
    pub fn first_sets(&self) -> Vec<HashSet<TermId>> {
        let mut first: Vec<HashSet<TermId>> = vec![HashSet::new(); self.nonterminals.len()];
        loop {
            let mut changed = false;
            for r in &self.rules {
                let add: Vec<TermId> = match r.rhs[0] {
                    Symbol::T(t) => vec![t],
                    Symbol::N(n) => first[n.0 as usize].iter().copied().collect(),
                };
                let set = &mut first[r.lhs.0 as usize];
                for t in add {
                    changed |= set.insert(t);
                }
            }
            if !changed {
                return first;
            }
        }
    }

    fn build_predict_index(&self) -> PredictIndex {
        let first = self.first_sets();
        let mut by_first: Vec<HashMap<TermId, Vec<RuleId>>> =
            vec![HashMap::new(); self.nonterminals.len()];
        for r in &self.rules {
            let map = &mut by_first[r.lhs.0 as usize];
            match r.rhs[0] {
                Symbol::T(t) => map.entry(t).or_default().push(r.id),
                Symbol::N(n) => {
                    for &t in &first[n.0 as usize] {
                        map.entry(t).or_default().push(r.id);
                    }
                }
            }
        }
        for map in &mut by_first {
            for v in map.values_mut() {
                v.sort_unstable();
            }
        }
        PredictIndex { by_first }
    }

    /// Minimal tree height per nonterminal; `None` when unproductive.
    pub fn min_heights(&self) -> Vec<Option<usize>> {
        let mut h: Vec<Option<usize>> = vec![None; self.nonterminals.len()];
        loop {
            let mut changed = false;
            for r in &self.rules {
                if let Some(rh) = self.rule_height(r, &h) {
                    let cur = &mut h[r.lhs.0 as usize];
                    if cur.is_none_or(|c| rh < c) {
                        *cur = Some(rh);
                        changed = true;
                    }
                }
            }
            if !changed {
                return h;
            }
        }
    }

    fn rule_height(&self, r: &Rule, h: &[Option<usize>]) -> Option<usize> {
        let mut max = 0;
        for n in r.nonterminals() {
            max = max.max(h[n.0 as usize]?);
        }
        Some(1 + max)
    }
}

fn quote(t: &str) -> String {
    let mut s = String::with_capacity(t.len() + 2);
    s.push('"');
    for c in t.chars() {
        if c == '"' || c == '\\' {
            s.push('\\');
        }
        s.push(c);
    }
    s.push('"');
    s
}

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_quote => escaped = true,
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

enum Lexed {
    Nt(String),
    T(String),
    Bar,
}

fn lex_rhs(s: &str) -> Result<Vec<Lexed>, String> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '|' {
            chars.next();
            out.push(Lexed::Bar);
        } else if c == '"' {
            chars.next();
            let mut t = String::new();
            loop {
                match chars.next() {
                    None => return Err("unterminated terminal".into()),
                    Some('\\') => match chars.next() {
                        Some(e) => t.push(e),
                        None => return Err("dangling escape".into()),
                    },
                    Some('"') => break,
                    Some(o) => t.push(o),
                }
            }
            if t.is_empty() {
                return Err("empty terminal".into());
            }
            out.push(Lexed::T(t));
        } else {
            let mut n = String::new();
            while let Some(&d) = chars.peek() {
                if d.is_whitespace() || d == '|' || d == '"' {
                    break;
                }
                n.push(d);
                chars.next();
            }
            out.push(Lexed::Nt(n));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Schema instantiation

/// Adds the schema's terminal rules to a copy of `base`: aliased table
/// names, bare table words, columns, aliased column references, derived
/// field/table aliases and literal values.
pub fn instantiate_schema_rules(base: &Grammar, schema: &Schema, max_aliases: usize) -> Grammar {
    assert!(max_aliases >= 1, "max_aliases must be at least 1");
    use names::*;
    let mut g = base.clone();
    let p = &schema.alias_patterns;
    for table in &schema.tables {
        for k in 0..max_aliases {
            g.add_rule(TABLE_NAME, &[Sym::T(p.table_alias(table, k))]);
        }
    }
    for table in &schema.tables {
        g.add_rule(TABLE_WORD, &[Sym::T(table.clone())]);
    }
    for table in &schema.tables {
        for col in schema.columns_of(table) {
            g.add_rule(COLUMN_NAME, &[Sym::T(col.clone())]);
        }
    }
    for table in &schema.tables {
        for k in 0..max_aliases {
            let alias = p.table_alias(table, k);
            for col in schema.columns_of(table) {
                g.add_rule(COL_REF, &[Sym::T(format!("{alias}.{col}"))]);
            }
        }
    }
    if !schema.tables.is_empty() {
        for k in 0..max_aliases {
            g.add_rule(COL_ALIAS, &[Sym::T(p.derived_field_alias(k))]);
        }
        for k in 0..max_aliases {
            g.add_rule(SUBQ_ALIAS, &[Sym::T(p.derived_table_alias(k))]);
        }
        // Columns selected out of a derived table.
        let mut cols: Vec<&String> = schema.columns.values().flatten().collect();
        cols.sort_unstable();
        cols.dedup();
        for k in 0..max_aliases {
            let alias = p.derived_table_alias(k);
            for col in &cols {
                g.add_rule(COL_REF, &[Sym::T(format!("{alias}.{col}"))]);
            }
        }
    }
    add_value_terminals(&mut g, schema.values.iter().map(String::as_str));
    g
}

/// Adds `value_literal -> "v"` for every value.
pub fn add_value_terminals<'a>(g: &mut Grammar, values: impl IntoIterator<Item = &'a str>) {
    for v in values {
        g.add_rule(names::VALUE_LITERAL, &[Sym::T(v.to_owned())]);
    }
}

/// Value terminals for the typed variables bound in a corpus, both bare
/// (`number0`) and double-quoted (`"city_name0"`).
pub fn corpus_value_terminals(corpus: &Corpus) -> Vec<String> {
    let mut names: Vec<&String> = corpus
        .examples
        .iter()
        .flat_map(|e| e.variables.keys())
        .collect();
    names.sort_unstable();
    names.dedup();
    names
        .into_iter()
        .flat_map(|n| [n.clone(), format!("\"{n}\"")])
        .collect()
}

/// `base` extended with the schema's terminal rules (if any) and the
/// corpus's variable names as values.
pub fn corpus_grammar(
    base: &Grammar,
    schema: Option<&Schema>,
    corpus: &Corpus,
    max_aliases: usize,
) -> Grammar {
    let mut g = match schema {
        Some(s) => instantiate_schema_rules(base, s, max_aliases),
        None => base.clone(),
    };
    if g.nt_id(names::VALUE_LITERAL).is_some() {
        let values = corpus_value_terminals(corpus);
        add_value_terminals(&mut g, values.iter().map(String::as_str));
    }
    g
}

// ---------------------------------------------------------------------------
// Trees and derivations

pub fn linearize(t: &ParseTree) -> Derivation {
    let mut out = Vec::with_capacity(t.size());
    fn walk(t: &ParseTree, out: &mut Vec<RuleId>) {
        out.push(t.rule);
        for c in &t.children {
            walk(c, out);
        }
    }
    walk(t, &mut out);
    Derivation(out)
}

/// Rebuilds the tree for a derivation rooted at the grammar's start symbol.
pub fn delinearize(g: &Grammar, d: &Derivation) -> Result<ParseTree, DerivationError> {
    let mut pos = 0;
    let tree = build(g, &d.0, &mut pos, g.start())?;
    if pos != d.0.len() {
        return Err(DerivationError {
            position: pos,
            message: "derivation continues after the tree is complete".into(),
        });
    }
    Ok(tree)
}

fn build(
    g: &Grammar,
    d: &[RuleId],
    pos: &mut usize,
    expected: NtId,
) -> Result<ParseTree, DerivationError> {
    let at = *pos;
    let &r = d.get(at).ok_or_else(|| DerivationError {
        position: at,
        message: format!("derivation ended while expecting {}", g.nt_name(expected)),
    })?;
    if r >= g.num_rules() {
        return Err(DerivationError {
            position: at,
            message: format!("unknown rule {r}"),
        });
    }
    let rule = g.rule(r);
    if rule.lhs != expected {
        return Err(DerivationError {
            position: at,
            message: format!(
                "expected {}, rule {r} expands {}",
                g.nt_name(expected),
                g.nt_name(rule.lhs)
            ),
        });
    }
    *pos += 1;
    let mut children = Vec::new();
    for n in rule.nonterminals() {
        children.push(build(g, d, pos, n)?);
    }
    Ok(ParseTree { rule: r, children })
}

/// Left-to-right terminal yield of a tree.
pub fn tree_yield(g: &Grammar, t: &ParseTree) -> Vec<String> {
    let mut out = Vec::new();
    fn walk(g: &Grammar, t: &ParseTree, out: &mut Vec<String>) {
        let mut kids = t.children.iter();
        for sym in &g.rule(t.rule).rhs {
            match sym {
                Symbol::T(x) => out.push(g.t_text(*x).to_owned()),
                Symbol::N(_) => walk(g, kids.next().expect("child per nonterminal"), out),
            }
        }
    }
    walk(g, t, &mut out);
    out
}

/// Checks the structural tree invariant: one child per rhs nonterminal,
/// with matching left-hand sides.
pub fn check_tree(g: &Grammar, t: &ParseTree) -> bool {
    let rule = g.rule(t.rule);
    let nts: Vec<NtId> = rule.nonterminals().collect();
    nts.len() == t.children.len()
        && nts
            .iter()
            .zip(&t.children)
            .all(|(n, c)| g.rule(c.rule).lhs == *n && check_tree(g, c))
}

/// Samples a random tree from `root`. Below `max_depth` rules are chosen
/// uniformly; at or beyond it only rules of minimal height are eligible,
/// which guarantees termination. Returns `None` if `root` is unproductive.
pub fn sample_tree<R: Rng + ?Sized>(
    g: &Grammar,
    root: NtId,
    max_depth: usize,
    rng: &mut R,
) -> Option<ParseTree> {
    let heights = g.min_heights();
    heights[root.0 as usize]?;
    Some(sample_rec(g, root, 0, max_depth, &heights, rng))
}

fn sample_rec<R: Rng + ?Sized>(
    g: &Grammar,
    nt: NtId,
    depth: usize,
    max_depth: usize,
    heights: &[Option<usize>],
    rng: &mut R,
) -> ParseTree {
    let productive: Vec<(RuleId, usize)> = g
        .rules_for(nt)
        .iter()
        .filter_map(|&r| g.rule_height(g.rule(r), heights).map(|h| (r, h)))
        .collect();
    let pool: Vec<RuleId> = if depth >= max_depth {
        let min = productive.iter().map(|p| p.1).min().expect("productive");
        productive
            .iter()
            .filter(|p| p.1 == min)
            .map(|p| p.0)
            .collect()
    } else {
        productive.iter().map(|p| p.0).collect()
    };
    let r = pool[rng.random_range(0..pool.len())];
    let children = g
        .rule(r)
        .nonterminals()
        .map(|n| sample_rec(g, n, depth + 1, max_depth, heights, rng))
        .collect();
    ParseTree { rule: r, children }
}

// ---------------------------------------------------------------------------
// Coverage

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub parsed: usize,
    pub failed: Vec<String>,
}

impl CoverageReport {
    /// Parsed fraction; 1.0 for an empty corpus.
    pub fn fraction(&self) -> f64 {
        let total = self.parsed + self.failed.len();
        if total == 0 {
            1.0
        } else {
            self.parsed as f64 / total as f64
        }
    }
}

impl fmt::Display for CoverageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parsed {} / {} ({:.1}%)",
            self.parsed,
            self.parsed + self.failed.len(),
            100.0 * self.fraction()
        )
    }
}

/// Parses every program in the corpus.
pub fn coverage_report(g: &Grammar, c: &Corpus, jobs: Jobs) -> CoverageReport {
    let results = exec::par_map(jobs, &c.examples, |e| {
        parse(g, &normalizer::tokenize(&e.program)).is_ok()
    });
    let mut parsed = 0;
    let mut failed = Vec::new();
    for (e, ok) in c.examples.iter().zip(results) {
        if ok {
            parsed += 1;
        } else {
            failed.push(e.id.clone());
        }
    }
    CoverageReport { parsed, failed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn text_roundtrip() {
        let g = Grammar::from_text("s -> a b | \"x\"\na -> \"a\" # c\nb -> \"b\\\"q\"").unwrap();
        assert_eq!(g.num_rules(), 4);
        assert_eq!(g.rule_text(3), r#"b -> "b\"q""#);
        assert_eq!(Grammar::from_text(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn undefined_nonterminal() {
        assert_eq!(
            Grammar::from_text("s -> a").unwrap_err(),
            GrammarError::Undefined("a".into())
        );
    }

    #[test]
    fn bundled_grammars_load() {
        let sql = Grammar::sql();
        assert_eq!(sql.start_name(), Some("query"));
        let q = Grammar::qdmr();
        assert_eq!(q.start_name(), Some("program"));
    }

    #[test]
    fn single_rule_linearization() {
        let g = Grammar::from_text(r#"S -> "a""#).unwrap();
        let t = parse(&g, &toks("a")).unwrap();
        assert_eq!(linearize(&t), Derivation(vec![0]));
        assert_eq!(delinearize(&g, &linearize(&t)).unwrap(), t);
    }

    #[test]
    fn preorder_linearization() {
        let g = Grammar::from_text("S -> A B\nA -> \"a\"\nB -> \"b\"").unwrap();
        let t = parse(&g, &toks("a b")).unwrap();
        assert_eq!(linearize(&t), Derivation(vec![0, 1, 2]));
        assert_eq!(tree_yield(&g, &t), toks("a b"));
    }

    #[test]
    fn delinearize_wrong_root() {
        let g = Grammar::from_text("S -> A B\nA -> \"a\"\nB -> \"b\"").unwrap();
        let err = delinearize(&g, &Derivation(vec![1])).unwrap_err();
        assert_eq!(err.position, 0);
        let err = delinearize(&g, &Derivation(vec![0, 1])).unwrap_err();
        assert_eq!(err.position, 2);
        let err = delinearize(&g, &Derivation(vec![0, 1, 2, 2])).unwrap_err();
        assert_eq!(err.position, 3);
    }

    fn flight_schema(tables: &[(&str, &[&str])]) -> Schema {
        Schema {
            tables: tables.iter().map(|t| t.0.to_owned()).collect(),
            columns: tables
                .iter()
                .map(|(t, c)| (t.to_string(), c.iter().map(|s| s.to_string()).collect()))
                .collect(),
            ..Schema::default()
        }
    }

    fn terminals_of(g: &Grammar, nt: &str) -> Vec<String> {
        g.nt_id(nt)
            .map(|n| {
                g.rules_for(n)
                    .iter()
                    .filter_map(|&r| g.single_terminal(r).map(str::to_owned))
                    .collect()
            })
            .unwrap_or_default()
    }

    #[test]
    fn instantiate_flight() {
        let g = instantiate_schema_rules(
            &Grammar::sql(),
            &flight_schema(&[("FLIGHT", &["FLIGHT_ID"])]),
            1,
        );
        assert_eq!(terminals_of(&g, names::TABLE_NAME), ["FLIGHTalias0"]);
        assert!(terminals_of(&g, names::COL_REF).contains(&"FLIGHTalias0.FLIGHT_ID".to_owned()));
        assert_eq!(terminals_of(&g, names::SUBQ_ALIAS), ["DERIVED_TABLEalias0"]);
        assert_eq!(terminals_of(&g, names::COL_ALIAS), ["DERIVED_FIELDalias0"]);
        assert_eq!(terminals_of(&g, names::COLUMN_NAME), ["FLIGHT_ID"]);
        // Base rules are untouched and keep their ids.
        let base = Grammar::sql();
        for r in 0..base.num_rules() {
            assert_eq!(g.rule_text(r), base.rule_text(r));
        }
    }

    #[test]
    fn instantiate_empty_schema_is_identity() {
        let base = Grammar::sql();
        let g = instantiate_schema_rules(&base, &Schema::default(), 3);
        assert_eq!(g, base);
    }

    #[test]
    fn instantiate_counts() {
        let g = instantiate_schema_rules(
            &Grammar::sql(),
            &flight_schema(&[("A", &["X"]), ("B", &["Y"])]),
            2,
        );
        assert_eq!(terminals_of(&g, names::TABLE_NAME).len(), 4);
        let table_refs: Vec<_> = terminals_of(&g, names::COL_REF)
            .into_iter()
            .filter(|t| !t.starts_with("DERIVED"))
            .collect();
        assert_eq!(
            table_refs,
            ["Aalias0.X", "Aalias1.X", "Balias0.Y", "Balias1.Y"]
        );
    }

    #[test]
    fn col_refs_always_aliased() {
        let schema = flight_schema(&[
            ("FLIGHT", &["FLIGHT_ID", "STOPS"]),
            ("CITY", &["CITY_NAME"]),
        ]);
        let g = instantiate_schema_rules(&Grammar::sql(), &schema, 3);
        for t in terminals_of(&g, names::COL_REF) {
            let (prefix, _) = t.split_once('.').unwrap();
            assert!(
                schema.find_table(prefix).is_none(),
                "bare table prefix in {t}"
            );
        }
    }

    #[test]
    fn sampling_terminates_and_roundtrips() {
        let g = Grammar::qdmr();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let t = sample_tree(&g, g.start(), 6, &mut rng).unwrap();
            assert!(check_tree(&g, &t));
            let d = linearize(&t);
            assert_eq!(delinearize(&g, &d).unwrap(), t);
        }
    }

    #[test]
    fn coverage_of_empty_corpus() {
        let rep = coverage_report(&Grammar::qdmr(), &Corpus::default(), Jobs::default());
        assert_eq!(rep.parsed, 0);
        assert_eq!(rep.fraction(), 1.0);
    }
}
