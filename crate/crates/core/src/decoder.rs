//! Grammar-constrained decoding as a state machine over rule applications.
//!
//! A [`DecoderState`] holds the pending nonterminals and the derivation so
//! far. [`Decoder::valid_actions`] lists the rules that may expand the next
//! nonterminal, filtered by context-sensitive SQL constraints:
//!
//! * inside WHERE, column references must belong to a table alias declared
//!   in the FROM clause of the current or an enclosing query;
//! * the FROM clause cannot be closed while tables referenced in the select
//!   results are missing from it;
//! * a table alias must belong to the table written before `AS`, and each
//!   alias is declared once per program.
//!
//! When filtering would leave nothing, the unfiltered set is returned and
//! flagged as relaxed. Grammars without the SQL nonterminals (e.g. QDMR)
//! are decoded without constraints.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::corpus::Schema;
use crate::grammar::{names, Derivation, Grammar, NtId, RuleId, Symbol};

pub const DEFAULT_ENUMERATION_DEPTH: usize = 12;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("derivation is already complete")]
    Complete,
    #[error("unknown rule {0}")]
    UnknownRule(RuleId),
    #[error("expected {expected}, rule {rule} expands {found}")]
    Expected {
        expected: String,
        found: String,
        rule: RuleId,
    },
    #[error("rule {rule} violates constraint: {constraint}")]
    Violation { rule: RuleId, constraint: String },
    #[error("derivation step {step}: {source}")]
    Replay {
        step: usize,
        #[source]
        source: Box<DecodeError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Clause {
    Select,
    From,
    Where,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Scope {
    clause: Clause,
    from: BTreeSet<u32>,
    select: BTreeSet<u32>,
    closing_from: bool,
    pending_table: Option<u32>,
}

impl Scope {
    fn new() -> Self {
        Scope {
            clause: Clause::Select,
            from: BTreeSet::new(),
            select: BTreeSet::new(),
            closing_from: false,
            pending_table: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    Expand(NtId),
    EndScope,
}

/// Tables seen so far, by schema table name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    /// Tables declared in FROM clauses.
    pub selected_tables: BTreeSet<String>,
    /// Tables mentioned anywhere (FROM sources and column references).
    pub mentioned_tables: BTreeSet<String>,
    /// Tables whose columns appear in select results.
    pub select_result_tables: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderState {
    stack: Vec<Frame>,
    history: Derivation,
    scopes: Vec<Scope>,
    declared: BTreeSet<u32>,
    context: Context,
    relaxed: bool,
}

impl DecoderState {
    pub fn is_complete(&self) -> bool {
        self.stack.is_empty()
    }

    pub fn history(&self) -> &Derivation {
        &self.history
    }

    pub fn context(&self) -> &Context {
        &self.context
    }

    /// True once any step had to bypass a constraint.
    pub fn relaxed(&self) -> bool {
        self.relaxed
    }

    /// Pending nonterminals, top of stack last.
    pub fn pending(&self) -> Vec<NtId> {
        self.stack
            .iter()
            .filter_map(|f| match f {
                Frame::Expand(n) => Some(*n),
                Frame::EndScope => None,
            })
            .collect()
    }

    fn top(&self) -> Option<NtId> {
        match self.stack.last() {
            Some(Frame::Expand(n)) => Some(*n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    pub rules: Vec<RuleId>,
    pub relaxed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RuleInfo {
    Plain,
    TableWord { table: u32 },
    TableName { alias: u32 },
    ColRef { alias: u32 },
    CloseSource,
}

#[derive(Debug, Default)]
struct Roles {
    query: Option<NtId>,
    select_results: Option<NtId>,
    from_clause: Option<NtId>,
    where_clause: Option<NtId>,
    groupby: Option<NtId>,
    orderby: Option<NtId>,
}

pub struct Decoder<'g> {
    g: &'g Grammar,
    roles: Roles,
    info: Vec<RuleInfo>,
    tables: Vec<String>,
    alias_table: Vec<u32>,
}

impl<'g> Decoder<'g> {
    /// Builds a decoder, recognizing table aliases of the form
    /// `<TABLE>alias<k>`.
    pub fn new(g: &'g Grammar) -> Self {
        Self::build(g, |tok| {
            let pos = tok.rfind("alias")?;
            let digits = &tok[pos + 5..];
            (pos > 0
                && !digits.is_empty()
                && digits.bytes().all(|b| b.is_ascii_digit())
                && !tok.starts_with("DERIVED_"))
            .then(|| tok[..pos].to_owned())
        })
    }

    /// Builds a decoder that resolves aliases with the schema's patterns.
    pub fn with_schema(g: &'g Grammar, schema: &Schema) -> Self {
        Self::build(g, |tok| schema.parse_alias(tok).map(|(t, _)| t.to_owned()))
    }

    fn build(g: &'g Grammar, alias_table: impl Fn(&str) -> Option<String>) -> Self {
        let roles = Roles {
            query: g.nt_id("query"),
            select_results: g.nt_id("select_results"),
            from_clause: g.nt_id("from_clause"),
            where_clause: g.nt_id("where_clause"),
            groupby: g.nt_id("groupby_clause"),
            orderby: g.nt_id("orderby_clause"),
        };
        let source = g.nt_id("source");
        let nt = |n: &str| g.nt_id(n);
        let (table_word, table_name, col_ref) = (
            nt(names::TABLE_WORD),
            nt(names::TABLE_NAME),
            nt(names::COL_REF),
        );

        let mut tables: Vec<String> = Vec::new();
        let mut table_ids: HashMap<String, u32> = HashMap::new();
        let mut aliases: HashMap<String, u32> = HashMap::new();
        let mut alias_tab: Vec<u32> = Vec::new();
        let mut intern_table = |t: &str, tables: &mut Vec<String>| -> u32 {
            *table_ids.entry(t.to_owned()).or_insert_with(|| {
                tables.push(t.to_owned());
                (tables.len() - 1) as u32
            })
        };
        let mut info = Vec::with_capacity(g.num_rules());
        for r in g.rules() {
            let term = g.single_terminal(r.id);
            let i = if let (true, Some(word)) = (Some(r.lhs) == table_word, term) {
                RuleInfo::TableWord {
                    table: intern_table(word, &mut tables),
                }
            } else if Some(r.lhs) == table_name || Some(r.lhs) == col_ref {
                let alias = term.map(|t| t.split('.').next().unwrap_or(t));
                match alias.and_then(|a| alias_table(a).map(|t| (a, t))) {
                    Some((a, t)) => {
                        let tid = intern_table(&t, &mut tables);
                        let next = aliases.len() as u32;
                        let aid = *aliases.entry(a.to_owned()).or_insert(next);
                        if aid == next {
                            alias_tab.push(tid);
                        }
                        if Some(r.lhs) == table_name {
                            RuleInfo::TableName { alias: aid }
                        } else {
                            RuleInfo::ColRef { alias: aid }
                        }
                    }
                    None => RuleInfo::Plain,
                }
            } else if Some(r.lhs) == source && !r.rhs.contains(&Symbol::N(r.lhs)) {
                RuleInfo::CloseSource
            } else {
                RuleInfo::Plain
            };
            info.push(i);
        }
        Decoder {
            g,
            roles,
            info,
            tables,
            alias_table: alias_tab,
        }
    }

    pub fn grammar(&self) -> &'g Grammar {
        self.g
    }

    pub fn initial_state(&self) -> DecoderState {
        DecoderState {
            stack: vec![Frame::Expand(self.g.start())],
            history: Derivation::default(),
            scopes: Vec::new(),
            declared: BTreeSet::new(),
            context: Context::default(),
            relaxed: false,
        }
    }

    fn visible_from(&self, s: &DecoderState) -> BTreeSet<u32> {
        s.scopes
            .iter()
            .flat_map(|sc| sc.from.iter().copied())
            .collect()
    }

    fn missing(&self, s: &DecoderState) -> BTreeSet<u32> {
        let Some(scope) = s.scopes.last() else {
            return BTreeSet::new();
        };
        let visible = self.visible_from(s);
        scope.select.difference(&visible).copied().collect()
    }

    /// Constraint check for a rule whose lhs matches the stack top.
    fn check(&self, s: &DecoderState, r: RuleId) -> Result<(), String> {
        let Some(scope) = s.scopes.last() else {
            return Ok(());
        };
        match self.info[r] {
            RuleInfo::Plain => Ok(()),
            RuleInfo::ColRef { alias } => {
                if scope.clause == Clause::Where && !self.visible_from(s).contains(&alias) {
                    Err("WHERE column must belong to a table in FROM".into())
                } else {
                    Ok(())
                }
            }
            RuleInfo::CloseSource => {
                if self.missing(s).len() > 1 {
                    Err("FROM clause must contain the tables in the select results".into())
                } else {
                    Ok(())
                }
            }
            RuleInfo::TableWord { table } => {
                let missing = self.missing(s);
                if scope.closing_from
                    && !missing.is_empty()
                    && !missing
                        .iter()
                        .any(|a| self.alias_table[*a as usize] == table)
                {
                    Err("FROM clause must contain the tables in the select results".into())
                } else {
                    Ok(())
                }
            }
            RuleInfo::TableName { alias } => {
                if let Some(t) = scope.pending_table {
                    if self.alias_table[alias as usize] != t {
                        return Err("alias does not match its table".into());
                    }
                }
                if s.declared.contains(&alias) {
                    return Err("alias already declared".into());
                }
                let missing = self.missing(s);
                if scope.closing_from && !missing.is_empty() && !missing.contains(&alias) {
                    return Err("FROM clause must contain the tables in the select results".into());
                }
                Ok(())
            }
        }
    }

    pub fn valid_actions(&self, s: &DecoderState) -> Result<ActionSet, DecodeError> {
        let top = s.top().ok_or(DecodeError::Complete)?;
        let all = self.g.rules_for(top);
        let rules: Vec<RuleId> = all
            .iter()
            .copied()
            .filter(|&r| self.check(s, r).is_ok())
            .collect();
        if rules.is_empty() {
            Ok(ActionSet {
                rules: all.to_vec(),
                relaxed: true,
            })
        } else {
            Ok(ActionSet {
                rules,
                relaxed: false,
            })
        }
    }

    fn check_lhs(&self, s: &DecoderState, r: RuleId) -> Result<NtId, DecodeError> {
        let top = s.top().ok_or(DecodeError::Complete)?;
        if r >= self.g.num_rules() {
            return Err(DecodeError::UnknownRule(r));
        }
        let lhs = self.g.rule(r).lhs;
        if lhs != top {
            return Err(DecodeError::Expected {
                expected: self.g.nt_name(top).to_owned(),
                found: self.g.nt_name(lhs).to_owned(),
                rule: r,
            });
        }
        Ok(top)
    }

    /// Applies a rule that must be among `valid_actions(s)`.
    pub fn apply_action(&self, s: &DecoderState, r: RuleId) -> Result<DecoderState, DecodeError> {
        self.check_lhs(s, r)?;
        let relaxed = match self.check(s, r) {
            Ok(()) => false,
            Err(constraint) => {
                if self.valid_actions(s)?.relaxed {
                    true
                } else {
                    return Err(DecodeError::Violation {
                        rule: r,
                        constraint,
                    });
                }
            }
        };
        Ok(self.transition(s, r, relaxed))
    }

    /// Applies any grammar-valid rule, marking the state relaxed if it
    /// breaks a constraint.
    pub fn apply_action_relaxed(
        &self,
        s: &DecoderState,
        r: RuleId,
    ) -> Result<DecoderState, DecodeError> {
        self.check_lhs(s, r)?;
        let relaxed = self.check(s, r).is_err();
        Ok(self.transition(s, r, relaxed))
    }

    fn transition(&self, s: &DecoderState, r: RuleId, relaxed: bool) -> DecoderState {
        let mut s = s.clone();
        s.relaxed |= relaxed;
        let Some(Frame::Expand(lhs)) = s.stack.pop() else {
            unreachable!("checked by caller")
        };
        let rule = self.g.rule(r);
        let roles = &self.roles;
        if Some(lhs) == roles.query {
            s.scopes.push(Scope::new());
            s.stack.push(Frame::EndScope);
        }
        if let Some(scope) = s.scopes.last_mut() {
            if Some(lhs) == roles.select_results {
                scope.clause = Clause::Select;
            } else if Some(lhs) == roles.from_clause {
                scope.clause = Clause::From;
            } else if Some(lhs) == roles.where_clause {
                scope.clause = Clause::Where;
            } else if Some(lhs) == roles.groupby || Some(lhs) == roles.orderby {
                scope.clause = Clause::Other;
            }
        }
        match self.info[r] {
            RuleInfo::Plain => {}
            RuleInfo::CloseSource => {
                if let Some(scope) = s.scopes.last_mut() {
                    scope.closing_from = true;
                }
            }
            RuleInfo::TableWord { table } => {
                if let Some(scope) = s.scopes.last_mut() {
                    scope.pending_table = Some(table);
                }
            }
            RuleInfo::TableName { alias } => {
                let table = self.tables[self.alias_table[alias as usize] as usize].clone();
                if let Some(scope) = s.scopes.last_mut() {
                    scope.from.insert(alias);
                    scope.pending_table = None;
                }
                s.declared.insert(alias);
                s.context.selected_tables.insert(table.clone());
                s.context.mentioned_tables.insert(table);
            }
            RuleInfo::ColRef { alias } => {
                let table = self.tables[self.alias_table[alias as usize] as usize].clone();
                if let Some(scope) = s.scopes.last_mut() {
                    if scope.clause == Clause::Select {
                        scope.select.insert(alias);
                        s.context.select_result_tables.insert(table.clone());
                    }
                }
                s.context.mentioned_tables.insert(table);
            }
        }
        for sym in rule.rhs.iter().rev() {
            if let Symbol::N(n) = sym {
                s.stack.push(Frame::Expand(*n));
            }
        }
        while s.stack.last() == Some(&Frame::EndScope) {
            s.stack.pop();
            s.scopes.pop();
        }
        s.history.0.push(r);
        s
    }

    /// Replays a derivation from the initial state. With `allow_relaxed`,
    /// constraint violations are recorded on the state instead of failing.
    pub fn replay(&self, d: &Derivation, allow_relaxed: bool) -> Result<DecoderState, DecodeError> {
        let mut s = self.initial_state();
        for (step, &r) in d.0.iter().enumerate() {
            let next = if allow_relaxed {
                self.apply_action_relaxed(&s, r)
            } else {
                self.apply_action(&s, r)
            };
            s = next.map_err(|e| DecodeError::Replay {
                step,
                source: Box::new(e),
            })?;
        }
        Ok(s)
    }

    /// All derivations of at most `max_depth` rule applications that reach
    /// a complete state through `valid_actions`.
    pub fn enumerate_complete(&self, max_depth: usize) -> BTreeSet<Derivation> {
        let mut out = BTreeSet::new();
        self.enumerate_rec(self.initial_state(), max_depth, &mut out);
        out
    }

    fn enumerate_rec(&self, s: DecoderState, max_depth: usize, out: &mut BTreeSet<Derivation>) {
        if s.is_complete() {
            out.insert(s.history.clone());
            return;
        }
        // Every pending nonterminal needs at least one more expansion.
        if s.history.0.len() + s.pending().len() > max_depth {
            return;
        }
        let Ok(actions) = self.valid_actions(&s) else {
            return;
        };
        for r in actions.rules {
            if let Ok(next) = self.apply_action(&s, r) {
                self.enumerate_rec(next, max_depth, out);
            }
        }
    }
}

/// Convenience wrapper over [`Decoder::enumerate_complete`].
pub fn enumerate_complete(g: &Grammar, max_depth: usize) -> BTreeSet<Derivation> {
    Decoder::new(g).enumerate_complete(max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{instantiate_schema_rules, linearize, parse, Sym};
    use crate::normalizer::tokenize;

    fn schema() -> Schema {
        crate::corpus::parse_schema(
            r#"
tables = ["FLIGHT", "CITY"]
[columns]
FLIGHT = ["FLIGHT_ID", "FROM_AIRPORT"]
CITY = ["CITY_CODE", "CITY_NAME"]
"#,
        )
        .unwrap()
    }

    fn sql() -> Grammar {
        instantiate_schema_rules(&Grammar::sql(), &schema(), 2)
    }

    fn rule_named(g: &Grammar, text: &str) -> RuleId {
        (0..g.num_rules())
            .find(|&r| g.rule_text(r) == text)
            .unwrap_or_else(|| panic!("no rule {text}"))
    }

    #[test]
    fn initial_state_expands_start() {
        let g = sql();
        let dec = Decoder::new(&g);
        let s = dec.initial_state();
        assert_eq!(s.pending(), vec![g.nt_id("query").unwrap()]);
        let acts = dec.valid_actions(&s).unwrap();
        assert_eq!(acts.rules, g.rules_for(g.start()).to_vec());
        assert!(!acts.relaxed);

        let q = Grammar::qdmr();
        let dq = Decoder::new(&q);
        assert_eq!(dq.initial_state().pending(), vec![q.start()]);
    }

    #[test]
    fn where_col_refs_limited_to_from_tables() {
        let g = sql();
        let dec = Decoder::new(&g);
        let p = "SELECT FLIGHTalias0.FLIGHT_ID FROM FLIGHT AS FLIGHTalias0 WHERE FLIGHTalias0.FROM_AIRPORT = 1";
        let d = linearize(&parse(&g, &tokenize(p)).unwrap());
        // Walk until the col_ref inside WHERE is on top of the stack.
        let col_ref = g.nt_id(names::COL_REF).unwrap();
        let mut s = dec.initial_state();
        let mut seen_where = false;
        for &r in &d.0 {
            if seen_where && s.top() == Some(col_ref) {
                break;
            }
            if g.rule(r).lhs == g.nt_id("where_clause").unwrap() {
                seen_where = true;
            }
            s = dec.apply_action(&s, r).unwrap();
        }
        assert_eq!(s.top(), Some(col_ref));
        let acts = dec.valid_actions(&s).unwrap();
        assert!(!acts.relaxed);
        let texts: Vec<&str> = acts
            .rules
            .iter()
            .filter_map(|&r| g.single_terminal(r))
            .collect();
        assert!(!texts.is_empty());
        for t in &texts {
            assert!(
                t.starts_with("FLIGHTalias0.") || t.starts_with("DERIVED_"),
                "unexpected {t}"
            );
        }
        assert!(texts.contains(&"FLIGHTalias0.FROM_AIRPORT"));
    }

    #[test]
    fn singleton_actions_in_unambiguous_toy() {
        let g = Grammar::from_text("S -> A B\nA -> \"a\"\nB -> \"b\"").unwrap();
        let dec = Decoder::new(&g);
        let mut s = dec.initial_state();
        while !s.is_complete() {
            let acts = dec.valid_actions(&s).unwrap();
            assert_eq!(acts.rules.len(), 1);
            s = dec.apply_action(&s, acts.rules[0]).unwrap();
        }
        assert_eq!(s.history().0, vec![0, 1, 2]);
        assert_eq!(dec.valid_actions(&s), Err(DecodeError::Complete));
    }

    #[test]
    fn wrong_lhs_is_rejected() {
        let g = Grammar::from_text("S -> A B\nA -> \"a\"\nB -> \"b\"").unwrap();
        let dec = Decoder::new(&g);
        let err = dec.apply_action(&dec.initial_state(), 1).unwrap_err();
        assert_eq!(err.to_string(), "expected S, rule 1 expands A");
    }

    #[test]
    fn table_name_adds_to_mentioned() {
        let g = sql();
        let dec = Decoder::new(&g);
        let mut s = dec.initial_state();
        // query -> select_core ... until table_word is on top.
        let p = "SELECT CITYalias0.CITY_NAME FROM CITY AS CITYalias0";
        let d = linearize(&parse(&g, &tokenize(p)).unwrap());
        let table_name = rule_named(&g, r#"table_name -> "CITYalias0""#);
        for &r in &d.0 {
            if r == table_name {
                assert!(!s.context().selected_tables.contains("CITY"));
                s = dec.apply_action(&s, r).unwrap();
                assert!(s.context().mentioned_tables.contains("CITY"));
                assert!(s.context().selected_tables.contains("CITY"));
                break;
            }
            s = dec.apply_action(&s, r).unwrap();
        }
    }

    #[test]
    fn from_clause_must_cover_select_results() {
        let g = sql();
        let dec = Decoder::new(&g);
        // Select CITY, then try to close FROM with FLIGHT.
        let good = "SELECT CITYalias0.CITY_NAME FROM FLIGHT AS FLIGHTalias0 , CITY AS CITYalias0";
        let d = linearize(&parse(&g, &tokenize(good)).unwrap());
        let s = dec.replay(&d, false).unwrap();
        assert!(s.is_complete() && !s.relaxed());

        let bad = "SELECT CITYalias0.CITY_NAME FROM FLIGHT AS FLIGHTalias0";
        let d = linearize(&parse(&g, &tokenize(bad)).unwrap());
        assert!(matches!(
            dec.replay(&d, false),
            Err(DecodeError::Replay { .. })
        ));
        let s = dec.replay(&d, true).unwrap();
        assert!(s.is_complete() && s.relaxed());
    }

    #[test]
    fn alias_must_match_table() {
        let g = sql();
        let dec = Decoder::new(&g);
        let p = "SELECT CITYalias0.CITY_NAME FROM CITY AS CITYalias0";
        let d = linearize(&parse(&g, &tokenize(p)).unwrap());
        let tn = g.nt_id(names::TABLE_NAME).unwrap();
        let mut s = dec.initial_state();
        for &r in &d.0 {
            if s.top() == Some(tn) {
                break;
            }
            s = dec.apply_action(&s, r).unwrap();
        }
        let acts = dec.valid_actions(&s).unwrap();
        let texts: Vec<&str> = acts
            .rules
            .iter()
            .filter_map(|&r| g.single_terminal(r))
            .collect();
        assert_eq!(texts, ["CITYalias0"]);
    }

    #[test]
    fn relaxes_when_everything_is_filtered() {
        // A WHERE clause whose only column reference belongs to an alias
        // that is not in FROM.
        let mut g = Grammar::new();
        for (lhs, rhs) in [
            (
                "query",
                vec![
                    Sym::n("select_results"),
                    Sym::n("from_clause"),
                    Sym::t("WHERE"),
                    Sym::n("where_clause"),
                ],
            ),
            ("select_results", vec![Sym::t("SELECT"), Sym::t("*")]),
            ("from_clause", vec![Sym::t("FROM"), Sym::n("source")]),
            (
                "source",
                vec![Sym::n("table_word"), Sym::t("AS"), Sym::n("table_name")],
            ),
            ("table_word", vec![Sym::t("FLIGHT")]),
            ("table_name", vec![Sym::t("FLIGHTalias0")]),
            ("where_clause", vec![Sym::n("col_ref")]),
            ("col_ref", vec![Sym::t("CITYalias0.CITY_NAME")]),
        ] {
            g.add_rule(lhs, &rhs);
        }
        let dec = Decoder::new(&g);
        let mut s = dec.initial_state();
        loop {
            let acts = dec.valid_actions(&s).unwrap();
            if g.rule(acts.rules[0]).lhs == g.nt_id("col_ref").unwrap() {
                assert!(acts.relaxed);
                s = dec.apply_action(&s, acts.rules[0]).unwrap();
                break;
            }
            assert!(!acts.relaxed);
            s = dec.apply_action(&s, acts.rules[0]).unwrap();
        }
        assert!(s.is_complete());
        assert!(s.relaxed());
    }

    #[test]
    fn enumerate_small_grammars() {
        let g = Grammar::from_text(r#"S -> "a" | "b""#).unwrap();
        assert_eq!(enumerate_complete(&g, DEFAULT_ENUMERATION_DEPTH).len(), 2);

        let g = Grammar::from_text(r#"S -> "a" S | "b""#).unwrap();
        let got = enumerate_complete(&g, 3);
        let want: BTreeSet<Derivation> = [vec![1], vec![0, 1], vec![0, 0, 1]]
            .into_iter()
            .map(Derivation)
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn replay_matches_incremental_state() {
        let g = sql();
        let dec = Decoder::with_schema(&g, &schema());
        let p = "SELECT DISTINCT FLIGHTalias0.FLIGHT_ID FROM FLIGHT AS FLIGHTalias0 , CITY AS CITYalias0 WHERE CITYalias0.CITY_CODE = FLIGHTalias0.FROM_AIRPORT AND CITYalias0.CITY_NAME = 1";
        let d = linearize(&parse(&g, &tokenize(p)).unwrap());
        let mut s = dec.initial_state();
        for (i, &r) in d.0.iter().enumerate() {
            s = dec.apply_action(&s, r).unwrap();
            let prefix = Derivation(d.0[..=i].to_vec());
            assert_eq!(dec.replay(&prefix, false).unwrap(), s);
        }
        assert!(s.is_complete());
        assert!(!s.relaxed());
    }
}
