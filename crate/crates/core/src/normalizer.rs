//! SQL style normalization, canonical formatting and anonymization.
//!
//! Programs are handled as token streams: whitespace separated words, with
//! `(`, `)` and `,` always split into their own tokens and quoted literals
//! kept whole. Nothing here builds a full SQL AST; clause structure is
//! recovered from keywords and parenthesis depth.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::corpus::{Example, Schema};
use crate::grammar::{self, Grammar};

#[derive(Debug, Error, PartialEq)]
pub enum NormalizeError {
    #[error("dangling ON")]
    DanglingOn,
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("unparseable program: {0}")]
    Unparseable(#[from] grammar::ParseError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NormalizationReport {
    pub rewrites_applied: usize,
    pub where_conditions_moved: usize,
}

impl std::ops::AddAssign for NormalizationReport {
    fn add_assign(&mut self, rhs: Self) {
        self.rewrites_applied += rhs.rewrites_applied;
        self.where_conditions_moved += rhs.where_conditions_moved;
    }
}

const KEYWORDS: &[&str] = &[
    "SELECT",
    "DISTINCT",
    "FROM",
    "WHERE",
    "AND",
    "OR",
    "NOT",
    "IN",
    "AS",
    "GROUP",
    "BY",
    "ORDER",
    "HAVING",
    "LIMIT",
    "ASC",
    "DESC",
    "COUNT",
    "MAX",
    "MIN",
    "SUM",
    "AVG",
    "BETWEEN",
    "LIKE",
    "IS",
    "NULL",
    "JOIN",
    "INNER",
    "LEFT",
    "RIGHT",
    "FULL",
    "OUTER",
    "CROSS",
    "NATURAL",
    "ON",
    "UNION",
    "INTERSECT",
    "EXCEPT",
    "EXISTS",
    "ALL",
    "ANY",
];

const CLAUSE_END: &[&str] = &[
    "WHERE",
    "GROUP",
    "ORDER",
    "HAVING",
    "LIMIT",
    "UNION",
    "INTERSECT",
    "EXCEPT",
];

fn is_kw(tok: &str, kw: &str) -> bool {
    tok.eq_ignore_ascii_case(kw)
}

fn is_any_kw(tok: &str, kws: &[&str]) -> bool {
    kws.iter().any(|k| tok.eq_ignore_ascii_case(k))
}

fn is_quoted(tok: &str) -> bool {
    tok.starts_with('"') || tok.starts_with('\'')
}

/// Splits a program into tokens. Quoted literals (single or double quotes)
/// stay whole, including embedded spaces.
pub fn tokenize(program: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = program.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' | '\'' => {
                cur.push(c);
                for d in chars.by_ref() {
                    cur.push(d);
                    if d == c {
                        break;
                    }
                }
            }
            '(' | ')' | ',' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Tok(String),
    Group(Vec<Node>),
}

impl Node {
    fn tok(&self) -> Option<&str> {
        match self {
            Node::Tok(t) => Some(t),
            Node::Group(_) => None,
        }
    }
}

fn build_tree(tokens: &[String]) -> Result<Vec<Node>, NormalizeError> {
    let mut stack: Vec<Vec<Node>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let inner = stack.pop().ok_or(NormalizeError::Unbalanced)?;
                stack
                    .last_mut()
                    .ok_or(NormalizeError::Unbalanced)?
                    .push(Node::Group(inner));
            }
            _ => stack
                .last_mut()
                .expect("stack non-empty")
                .push(Node::Tok(t.clone())),
        }
    }
    if stack.len() != 1 {
        return Err(NormalizeError::Unbalanced);
    }
    Ok(stack.pop().unwrap())
}

fn flatten_into(nodes: &[Node], out: &mut Vec<String>) {
    for n in nodes {
        match n {
            Node::Tok(t) => out.push(t.clone()),
            Node::Group(inner) => {
                out.push("(".into());
                flatten_into(inner, out);
                out.push(")".into());
            }
        }
    }
}

fn join_nodes(nodes: &[Node]) -> String {
    let mut toks = Vec::new();
    flatten_into(nodes, &mut toks);
    toks.join(" ")
}

// ---------------------------------------------------------------------------
// JOIN rewrite

/// Rewrites `t1 <join> t2 ON cond` into `t1 , t2` and conjoins `cond` into
/// the WHERE clause of the same query block. Programs without join syntax
/// are returned unchanged.
pub fn rewrite_joins(program: &str) -> Result<(String, NormalizationReport), NormalizeError> {
    let tokens = tokenize(program);
    let has_join = tokens.iter().any(|t| is_kw(t, "JOIN") || is_kw(t, "ON"));
    if !has_join {
        return Ok((program.to_owned(), NormalizationReport::default()));
    }
    let upper = tokens
        .iter()
        .find(|t| is_kw(t, "SELECT"))
        .map(|t| t.chars().all(|c| c.is_ascii_uppercase()))
        .unwrap_or(true);
    let tree = build_tree(&tokens)?;
    let mut report = NormalizationReport::default();
    let out = rewrite_seq(tree, upper, &mut report)?;
    Ok((join_nodes(&out), report))
}

fn rewrite_seq(
    items: Vec<Node>,
    upper: bool,
    report: &mut NormalizationReport,
) -> Result<Vec<Node>, NormalizeError> {
    let mut rewritten = Vec::with_capacity(items.len());
    for n in items {
        rewritten.push(match n {
            Node::Group(inner) => Node::Group(rewrite_seq(inner, upper, report)?),
            t => t,
        });
    }
    // Set operators separate independent query blocks at the same level.
    let mut out = Vec::new();
    let mut segment = Vec::new();
    for n in rewritten {
        if n.tok()
            .is_some_and(|t| is_any_kw(t, &["UNION", "INTERSECT", "EXCEPT"]))
        {
            out.extend(rewrite_block(std::mem::take(&mut segment), upper, report)?);
            out.push(n);
        } else {
            segment.push(n);
        }
    }
    out.extend(rewrite_block(segment, upper, report)?);
    Ok(out)
}

/// Length of the join keyword sequence starting at `i` (ending in JOIN), or 0.
fn join_keyword_len(seg: &[Node], i: usize) -> usize {
    let mut j = i;
    let tok = |j: usize| seg.get(j).and_then(Node::tok);
    if tok(j).is_some_and(|t| is_any_kw(t, &["INNER", "CROSS", "NATURAL"])) {
        j += 1;
    }
    if tok(j).is_some_and(|t| is_any_kw(t, &["LEFT", "RIGHT", "FULL"])) {
        j += 1;
        if tok(j).is_some_and(|t| is_kw(t, "OUTER")) {
            j += 1;
        }
    }
    if tok(j).is_some_and(|t| is_kw(t, "JOIN")) {
        j + 1 - i
    } else {
        0
    }
}

fn rewrite_block(
    seg: Vec<Node>,
    upper: bool,
    report: &mut NormalizationReport,
) -> Result<Vec<Node>, NormalizeError> {
    let kw = |s: &str| {
        Node::Tok(if upper {
            s.to_owned()
        } else {
            s.to_lowercase()
        })
    };
    let mut out: Vec<Node> = Vec::with_capacity(seg.len());
    let mut conditions: Vec<Vec<Node>> = Vec::new();
    let mut open_joins = 0usize;
    let mut i = 0;
    while i < seg.len() {
        let len = join_keyword_len(&seg, i);
        if len > 0 {
            out.push(Node::Tok(",".into()));
            report.rewrites_applied += 1;
            open_joins += 1;
            i += len;
            continue;
        }
        if seg[i].tok().is_some_and(|t| is_kw(t, "ON")) {
            if open_joins == 0 {
                return Err(NormalizeError::DanglingOn);
            }
            open_joins -= 1;
            let mut j = i + 1;
            let mut cond = Vec::new();
            while j < seg.len() {
                let stop = join_keyword_len(&seg, j) > 0
                    || seg[j]
                        .tok()
                        .is_some_and(|t| t == "," || is_any_kw(t, CLAUSE_END) || is_kw(t, "ON"));
                if stop {
                    break;
                }
                cond.push(seg[j].clone());
                j += 1;
            }
            conditions.push(cond);
            report.where_conditions_moved += 1;
            i = j;
            continue;
        }
        out.push(seg[i].clone());
        i += 1;
    }
    if conditions.is_empty() {
        return Ok(out);
    }
    let mut moved: Vec<Node> = Vec::new();
    for (k, c) in conditions.into_iter().enumerate() {
        if k > 0 {
            moved.push(kw("AND"));
        }
        moved.extend(c);
    }
    let where_pos = out
        .iter()
        .position(|n| n.tok().is_some_and(|t| is_kw(t, "WHERE")));
    match where_pos {
        Some(w) => {
            let end = out[w + 1..]
                .iter()
                .position(|n| {
                    n.tok()
                        .is_some_and(|t| is_any_kw(t, &["GROUP", "ORDER", "HAVING", "LIMIT"]))
                })
                .map(|p| p + w + 1)
                .unwrap_or(out.len());
            let existing: Vec<Node> = out[w + 1..end].to_vec();
            let has_or = existing
                .iter()
                .any(|n| n.tok().is_some_and(|t| is_kw(t, "OR")));
            let mut replacement = moved;
            replacement.push(kw("AND"));
            if has_or {
                replacement.push(Node::Group(existing));
            } else {
                replacement.extend(existing);
            }
            out.splice(w + 1..end, replacement);
        }
        None => {
            let at = out
                .iter()
                .position(|n| {
                    n.tok()
                        .is_some_and(|t| is_any_kw(t, &["GROUP", "ORDER", "HAVING", "LIMIT"]))
                })
                .unwrap_or(out.len());
            let mut ins = vec![kw("WHERE")];
            ins.extend(moved);
            out.splice(at..at, ins);
        }
    }
    Ok(out)
}

/// JOIN rewrite followed by canonicalization.
pub fn normalize_program(
    program: &str,
    schema: Option<&Schema>,
) -> Result<(String, NormalizationReport), NormalizeError> {
    let (rewritten, report) = rewrite_joins(program)?;
    Ok((canonicalize(&rewritten, schema), report))
}

// ---------------------------------------------------------------------------
// Canonical form

/// Canonical program text: single spaces, split punctuation, uppercase SQL
/// keywords. With a schema, schema identifiers take their schema spelling
/// and every table source gets a pattern alias (`STATE AS STATEalias0`),
/// with column references rewritten to match.
pub fn canonicalize(program: &str, schema: Option<&Schema>) -> String {
    let mut tokens: Vec<String> = tokenize(program)
        .into_iter()
        .map(|t| {
            if !is_quoted(&t) && is_any_kw(&t, KEYWORDS) {
                t.to_ascii_uppercase()
            } else {
                t
            }
        })
        .collect();
    if let Some(schema) = schema {
        if let Some(aliased) = canonical_aliases(&tokens, schema) {
            tokens = aliased;
        }
    }
    tokens.join(" ")
}

struct Block {
    parent: Option<usize>,
    /// lowercase alias spelling -> (table, canonical alias)
    aliases: HashMap<String, (String, String)>,
}

fn canonical_aliases(tokens: &[String], schema: &Schema) -> Option<Vec<String>> {
    // Assign every token to a query block: a parenthesized group opened
    // directly before SELECT starts a nested block.
    let mut blocks = vec![Block {
        parent: None,
        aliases: HashMap::new(),
    }];
    let mut owner = Vec::with_capacity(tokens.len());
    let mut stack: Vec<(usize, bool)> = vec![(0, false)];
    for (i, t) in tokens.iter().enumerate() {
        let cur = stack.last()?.0;
        match t.as_str() {
            "(" => {
                owner.push(cur);
                if tokens.get(i + 1).is_some_and(|n| is_kw(n, "SELECT")) {
                    blocks.push(Block {
                        parent: Some(cur),
                        aliases: HashMap::new(),
                    });
                    stack.push((blocks.len() - 1, true));
                } else {
                    stack.push((cur, false));
                }
            }
            ")" => {
                stack.pop();
                owner.push(stack.last()?.0);
            }
            _ => owner.push(cur),
        }
    }
    if stack.len() != 1 {
        return None;
    }

    // Reserve alias indices already present in the program.
    let mut used: HashMap<String, HashSet<usize>> = HashMap::new();
    for t in tokens {
        let head = t.split('.').next().unwrap_or(t);
        if let Some((table, k)) = parse_alias_ci(schema, head) {
            used.entry(table).or_default().insert(k);
        }
    }
    let next_index = |table: &str, used: &mut HashMap<String, HashSet<usize>>| {
        let set = used.entry(table.to_owned()).or_default();
        let k = (0..).find(|k| !set.contains(k)).unwrap();
        set.insert(k);
        k
    };

    let mut replace: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, t) in tokens.iter().enumerate() {
        if !is_kw(t, "FROM") {
            continue;
        }
        let b = owner[i];
        // Tokens of this block after FROM, up to the end of the FROM region.
        let mut region: Vec<usize> = Vec::new();
        let mut depth = 0i32;
        for (j, tj) in tokens.iter().enumerate().skip(i + 1) {
            if owner[j] != b {
                continue;
            }
            match tj.as_str() {
                "(" => depth += 1,
                ")" => {
                    depth -= 1;
                    if depth < 0 {
                        break;
                    }
                }
                _ if depth == 0 && (is_any_kw(tj, CLAUSE_END) || is_kw(tj, "ON")) => break,
                _ => {}
            }
            region.push(j);
        }
        // Split into sources at top-level commas.
        let mut sources: Vec<Vec<usize>> = vec![Vec::new()];
        let mut depth = 0i32;
        for &j in &region {
            match tokens[j].as_str() {
                "(" => depth += 1,
                ")" => depth -= 1,
                "," if depth == 0 => {
                    sources.push(Vec::new());
                    continue;
                }
                _ => {}
            }
            sources.last_mut().unwrap().push(j);
        }
        for src in sources {
            let Some(&first) = src.first() else { continue };
            let Some(table) = schema.find_table(&tokens[first]) else {
                continue;
            };
            let table = table.to_owned();
            let (given, alias_pos) = match src.len() {
                1 => (None, None),
                2 => (Some(tokens[src[1]].clone()), Some(src[1])),
                3 if is_kw(&tokens[src[1]], "AS") => (Some(tokens[src[2]].clone()), Some(src[2])),
                _ => continue,
            };
            let canonical = match given
                .as_deref()
                .and_then(|a| parse_alias_ci(schema, a).filter(|(t, _)| *t == table))
            {
                Some((_, k)) => schema.alias_patterns.table_alias(&table, k),
                None => {
                    let k = next_index(&table, &mut used);
                    schema.alias_patterns.table_alias(&table, k)
                }
            };
            let key = given
                .clone()
                .unwrap_or_else(|| table.clone())
                .to_lowercase();
            blocks[b]
                .aliases
                .insert(key, (table.clone(), canonical.clone()));
            // A bare table name also resolves when used as a qualifier.
            blocks[b]
                .aliases
                .entry(table.to_lowercase())
                .or_insert_with(|| (table.clone(), canonical.clone()));
            replace.insert(first, vec![table.clone(), "AS".into(), canonical.clone()]);
            if let Some(p) = alias_pos {
                replace.insert(p, Vec::new());
                if src.len() == 3 {
                    replace.insert(src[1], Vec::new());
                }
            }
        }
    }

    let resolve = |b: usize, qualifier: &str| -> Option<(String, String)> {
        let key = qualifier.to_lowercase();
        let mut cur = Some(b);
        while let Some(c) = cur {
            if let Some(hit) = blocks[c].aliases.get(&key) {
                return Some(hit.clone());
            }
            cur = blocks[c].parent;
        }
        None
    };

    let mut out = Vec::with_capacity(tokens.len() + 8);
    for (i, t) in tokens.iter().enumerate() {
        if let Some(r) = replace.get(&i) {
            out.extend(r.iter().cloned());
            continue;
        }
        if is_quoted(t) {
            out.push(t.clone());
            continue;
        }
        if let Some((q, col)) = t.split_once('.') {
            if let Some((table, alias)) = resolve(owner[i], q) {
                let col = schema.find_column(&table, col).unwrap_or(col);
                out.push(format!("{alias}.{col}"));
                continue;
            }
            if let Some((table, k)) = parse_alias_ci(schema, q) {
                let col = schema.find_column(&table, col).unwrap_or(col);
                out.push(format!(
                    "{}.{col}",
                    schema.alias_patterns.table_alias(&table, k)
                ));
                continue;
            }
        }
        if let Some(table) = schema.find_table(t) {
            out.push(table.to_owned());
            continue;
        }
        out.push(t.clone());
    }
    Some(out)
}

/// Case-insensitive alias recognition against the schema's table pattern.
fn parse_alias_ci(schema: &Schema, token: &str) -> Option<(String, usize)> {
    schema.tables.iter().find_map(|t| {
        let p = &schema.alias_patterns;
        let lower_pat = p.table.to_lowercase().replace("{table}", "{TABLE}");
        let pat = crate::corpus::AliasPatterns {
            table: lower_pat,
            ..p.clone()
        };
        pat.parse_table_alias(&token.to_lowercase(), &t.to_lowercase())
            .map(|k| (t.clone(), k))
    })
}

// ---------------------------------------------------------------------------
// Entity anonymization

#[derive(Debug, Clone, PartialEq)]
pub struct Anonymized {
    pub example: Example,
    pub warnings: Vec<String>,
}

/// Replaces every bound literal value with its typed variable name, in the
/// question (whole-token, longest match first) and in the program
/// (quoted literals and bare numeric tokens).
pub fn anonymize_entities(e: &Example) -> Anonymized {
    let mut bindings: Vec<(&str, Vec<&str>, &str)> = e
        .variables
        .iter()
        .map(|(name, b)| {
            (
                name.as_str(),
                b.value.split_whitespace().collect(),
                b.value.as_str(),
            )
        })
        .filter(|(_, toks, _): &(&str, Vec<&str>, &str)| !toks.is_empty())
        .collect();
    // Longest value first; ties by name for determinism.
    bindings.sort_by(|a, b| {
        b.1.len()
            .cmp(&a.1.len())
            .then(b.2.len().cmp(&a.2.len()))
            .then(a.0.cmp(b.0))
    });

    let mut used: HashSet<&str> = HashSet::new();
    let mut question = Vec::with_capacity(e.question.len());
    let mut i = 0;
    while i < e.question.len() {
        let hit = bindings.iter().find(|(_, toks, _)| {
            i + toks.len() <= e.question.len()
                && toks
                    .iter()
                    .zip(&e.question[i..])
                    .all(|(a, b)| *a == b.as_str())
        });
        match hit {
            Some((name, toks, _)) => {
                question.push((*name).to_owned());
                used.insert(name);
                i += toks.len();
            }
            None => {
                question.push(e.question[i].clone());
                i += 1;
            }
        }
    }

    let mut program = e.program.clone();
    for (name, _, value) in &bindings {
        let mut hit = false;
        for q in ['"', '\''] {
            let needle = format!("{q}{value}{q}");
            if program.contains(&needle) {
                program = program.replace(&needle, &format!("{q}{name}{q}"));
                hit = true;
            }
        }
        if value.parse::<f64>().is_ok() || value == name {
            let replaced = replace_whole_words(&program, value, name);
            if replaced != program {
                hit = true;
                program = replaced;
            } else if program
                .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.'))
                .any(|w| w == *name)
            {
                hit = true;
            }
        }
        if hit {
            used.insert(name);
        }
    }

    let warnings = e
        .variables
        .keys()
        .filter(|n| !used.contains(n.as_str()))
        .map(|n| format!("{}: value of {n} not found", e.id))
        .collect();
    Anonymized {
        example: Example {
            question,
            program,
            ..e.clone()
        },
        warnings,
    }
}

fn replace_whole_words(s: &str, word: &str, with: &str) -> String {
    let is_word = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '.';
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    let mut prev: Option<char> = None;
    while let Some(pos) = rest.find(word) {
        let before = rest[..pos].chars().next_back().or(prev);
        let after = rest[pos + word.len()..].chars().next();
        out.push_str(&rest[..pos]);
        if before.is_some_and(is_word) || after.is_some_and(is_word) {
            out.push_str(word);
        } else {
            out.push_str(with);
        }
        prev = word.chars().next_back();
        rest = &rest[pos + word.len()..];
    }
    out.push_str(rest);
    out
}

// ---------------------------------------------------------------------------
// Predicate anonymization

/// Replaces schema tables with `TABLE<i>` and columns with `COL<j>`,
/// numbered by first occurrence, leaving no schema constant in the output.
/// The canonical form of `program` must parse under `grammar`.
pub fn anonymize_predicates(
    program: &str,
    schema: &Schema,
    grammar: &Grammar,
) -> Result<String, NormalizeError> {
    let canonical = canonicalize(program, Some(schema));
    grammar::parse(grammar, &tokenize(&canonical))?;

    let mut tables: HashMap<String, usize> = HashMap::new();
    let mut cols: HashMap<(String, String), usize> = HashMap::new();
    let table_ph = |t: &str, tables: &mut HashMap<String, usize>| {
        let n = tables.len();
        let i = *tables.entry(t.to_owned()).or_insert(n);
        format!("TABLE{i}")
    };
    let any_table_with = |c: &str| {
        schema
            .tables
            .iter()
            .any(|t| schema.find_column(t, c).is_some())
    };

    let mut out = Vec::new();
    for tok in tokenize(program) {
        if is_quoted(&tok) {
            out.push(tok);
            continue;
        }
        let (head, tail) = match tok.split_once('.') {
            Some((h, t)) => (h.to_owned(), Some(t.to_owned())),
            None => (tok.clone(), None),
        };
        let mut owner: Option<String> = None;
        let new_head = if let Some(t) = schema.find_table(&head) {
            owner = Some(t.to_owned());
            table_ph(t, &mut tables)
        } else if let Some((t, k)) = parse_alias_ci(schema, &head) {
            let ph = table_ph(&t, &mut tables);
            owner = Some(t);
            schema.alias_patterns.table_alias(&ph, k)
        } else {
            head.clone()
        };
        let new_tail = tail.map(|c| {
            let key = match &owner {
                Some(t) if schema.find_column(t, &c).is_some() => {
                    Some((t.clone(), c.to_uppercase()))
                }
                None if any_table_with(&c) => Some(("*".to_owned(), c.to_uppercase())),
                _ => None,
            };
            match key {
                Some(key) => {
                    let n = cols.len();
                    format!("COL{}", cols.entry(key).or_insert(n))
                }
                None => c,
            }
        });
        out.push(match new_tail {
            Some(c) => format!("{new_head}.{c}"),
            None => new_head,
        });
    }
    Ok(out.join(" "))
}
