//! Examples, corpora and database schemas, plus their on-disk formats.
//!
//! A corpus file holds one JSON record per line:
//!
//! ```text
//! {"id":"geo-1","question":"what states border river_name0","program":"...","variables":{"river_name0":{"type":"river_name","value":"mississippi"}},"dataset":"geo"}
//! ```
//!
//! Blank lines and lines starting with `#` are skipped, so tool headers can be
//! prepended to any corpus file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("schema: {0}")]
    Schema(String),
}

/// A typed-variable binding: `city_name0 -> (city_name, "boston")`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    #[serde(rename = "type")]
    pub ty: String,
    pub value: String,
}

impl Binding {
    pub fn new(ty: impl Into<String>, value: impl Into<String>) -> Self {
        Binding {
            ty: ty.into(),
            value: value.into(),
        }
    }
}

/// One question/program pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub id: String,
    pub question: Vec<String>,
    pub program: String,
    pub variables: BTreeMap<String, Binding>,
    pub dataset: String,
}

impl Example {
    pub fn new(
        id: impl Into<String>,
        question: &str,
        program: impl Into<String>,
        dataset: impl Into<String>,
    ) -> Self {
        Example {
            id: id.into(),
            question: question.split_whitespace().map(str::to_owned).collect(),
            program: program.into(),
            variables: BTreeMap::new(),
            dataset: dataset.into(),
        }
    }

    pub fn with_binding(mut self, name: &str, ty: &str, value: &str) -> Self {
        self.variables
            .insert(name.to_owned(), Binding::new(ty, value));
        self
    }

    pub fn question_text(&self) -> String {
        self.question.join(" ")
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    question: String,
    program: String,
    #[serde(default)]
    variables: BTreeMap<String, Binding>,
    #[serde(default)]
    dataset: String,
}

impl From<&Example> for Record {
    fn from(e: &Example) -> Self {
        Record {
            id: e.id.clone(),
            question: e.question_text(),
            program: e.program.clone(),
            variables: e.variables.clone(),
            dataset: e.dataset.clone(),
        }
    }
}

impl From<Record> for Example {
    fn from(r: Record) -> Self {
        Example {
            id: r.id,
            question: r.question.split_whitespace().map(str::to_owned).collect(),
            program: r.program,
            variables: r.variables,
            dataset: r.dataset,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub examples: Vec<Example>,
    pub schema: Option<Schema>,
}

impl Corpus {
    pub fn new(examples: Vec<Example>) -> Self {
        Corpus {
            examples,
            schema: None,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.id == id)
    }

    /// Lookup table from example id to position.
    pub fn index(&self) -> HashMap<&str, usize> {
        self.examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect()
    }
}

const REQUIRED_FIELDS: [&str; 3] = ["id", "question", "program"];

/// Parses corpus text. Duplicate (question, program) pairs are dropped,
/// keeping the first; a repeated id among retained records is an error.
pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut examples = Vec::new();
    let mut seen_pairs: HashSet<(String, String)> = HashSet::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(trimmed).map_err(|e| CorpusError::Record {
                line,
                message: format!("malformed record: {e}"),
            })?;
        let obj = value.as_object().ok_or_else(|| CorpusError::Record {
            line,
            message: "record is not an object".into(),
        })?;
        for field in REQUIRED_FIELDS {
            if !obj.contains_key(field) {
                return Err(CorpusError::Record {
                    line,
                    message: format!("missing field {field}"),
                });
            }
        }
        let record: Record = serde_json::from_value(value).map_err(|e| CorpusError::Record {
            line,
            message: format!("malformed record: {e}"),
        })?;
        let example = Example::from(record);
        let key = (example.question_text(), example.program.clone());
        if !seen_pairs.insert(key) {
            continue;
        }
        if !seen_ids.insert(example.id.clone()) {
            return Err(CorpusError::Record {
                line,
                message: format!("duplicate id {}", example.id),
            });
        }
        examples.push(example);
    }
    Ok(Corpus::new(examples))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_corpus(&text)
}

/// Renders a corpus in the record format. `header` lines are emitted first,
/// each prefixed with `# `.
pub fn render_corpus(corpus: &Corpus, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for l in h.lines() {
            let _ = writeln!(out, "# {l}");
        }
    }
    for e in &corpus.examples {
        let rec = Record::from(e);
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(
    path: impl AsRef<Path>,
    corpus: &Corpus,
    header: Option<&str>,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, render_corpus(corpus, header)).map_err(|e| io_err(path, e))
}

pub(crate) fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Lists invariant violations of a single example; empty when it is valid.
pub fn validate_example(e: &Example) -> Vec<String> {
    let mut out = Vec::new();
    if e.id.is_empty() {
        out.push("empty id".to_owned());
    }
    let mut reported = HashSet::new();
    let words = e
        .question
        .iter()
        .flat_map(|t| identifier_words(t))
        .chain(identifier_words(&e.program));
    for w in words {
        if is_variable_name(w) && !e.variables.contains_key(w) && reported.insert(w.to_owned()) {
            out.push(format!("unbound variable {w}"));
        }
    }
    out
}

fn identifier_words(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
}

/// Typed variable names look like `city_name0` or `number1`: lowercase
/// letters and underscores followed by a numeric index. Table aliases such
/// as `flightalias0` are excluded.
pub fn is_variable_name(w: &str) -> bool {
    let stem = w.trim_end_matches(|c: char| c.is_ascii_digit());
    if stem.len() == w.len() || stem.is_empty() {
        return false;
    }
    if !stem.starts_with(|c: char| c.is_ascii_lowercase()) {
        return false;
    }
    if !stem.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
        return false;
    }
    !stem.ends_with("alias")
}

// ---------------------------------------------------------------------------
// Schema

/// Alias pattern kinds, each a template containing a `{k}` index placeholder
/// (and `{TABLE}` for table aliases).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasPatterns {
    #[serde(default = "default_table_pattern")]
    pub table: String,
    #[serde(default = "default_field_pattern")]
    pub derived_field: String,
    #[serde(default = "default_derived_table_pattern")]
    pub derived_table: String,
}

fn default_table_pattern() -> String {
    "{TABLE}alias{k}".into()
}
fn default_field_pattern() -> String {
    "DERIVED_FIELDalias{k}".into()
}
fn default_derived_table_pattern() -> String {
    "DERIVED_TABLEalias{k}".into()
}

impl Default for AliasPatterns {
    fn default() -> Self {
        AliasPatterns {
            table: default_table_pattern(),
            derived_field: default_field_pattern(),
            derived_table: default_derived_table_pattern(),
        }
    }
}

impl AliasPatterns {
    pub fn table_alias(&self, table: &str, k: usize) -> String {
        self.table
            .replace("{TABLE}", table)
            .replace("{k}", &k.to_string())
    }

    pub fn derived_field_alias(&self, k: usize) -> String {
        self.derived_field.replace("{k}", &k.to_string())
    }

    pub fn derived_table_alias(&self, k: usize) -> String {
        self.derived_table.replace("{k}", &k.to_string())
    }

    /// Inverse of [`table_alias`](Self::table_alias) for a known table.
    pub fn parse_table_alias(&self, token: &str, table: &str) -> Option<usize> {
        let (head, tail) = self.table.split_once("{k}")?;
        let head = head.replace("{TABLE}", table);
        let tail = tail.replace("{TABLE}", table);
        let digits = token
            .strip_prefix(head.as_str())?
            .strip_suffix(tail.as_str())?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        digits.parse().ok()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub tables: Vec<String>,
    #[serde(default)]
    pub columns: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub alias_patterns: AliasPatterns,
    /// Literal value terminals (typed variables, constants) the grammar
    /// should accept in value positions.
    #[serde(default)]
    pub values: Vec<String>,
}

impl Schema {
    pub fn columns_of(&self, table: &str) -> &[String] {
        self.columns.get(table).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Case-insensitive table lookup returning the schema spelling.
    pub fn find_table(&self, name: &str) -> Option<&str> {
        self.tables
            .iter()
            .find(|t| t.eq_ignore_ascii_case(name))
            .map(String::as_str)
    }

    pub fn find_column(&self, table: &str, name: &str) -> Option<&str> {
        self.columns_of(table)
            .iter()
            .find(|c| c.eq_ignore_ascii_case(name))
            .map(String::as_str)
    }

    /// Resolves an alias token such as `FLIGHTalias0` to `(table, index)`.
    pub fn parse_alias(&self, token: &str) -> Option<(&str, usize)> {
        self.tables.iter().find_map(|t| {
            self.alias_patterns
                .parse_table_alias(token, t)
                .map(|k| (t.as_str(), k))
        })
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for t in &self.tables {
            if !seen.insert(t.as_str()) {
                return Err(CorpusError::Schema(format!("duplicate table {t}")));
            }
        }
        for table in self.columns.keys() {
            if !seen.contains(table.as_str()) {
                return Err(CorpusError::Schema(format!(
                    "column entry references unknown table {table}"
                )));
            }
        }
        let p = &self.alias_patterns;
        if !p.table.contains("{TABLE}") {
            return Err(CorpusError::Schema(
                "table alias pattern lacks {TABLE}".into(),
            ));
        }
        for (kind, pat) in [
            ("table", &p.table),
            ("derived_field", &p.derived_field),
            ("derived_table", &p.derived_table),
        ] {
            if pat.matches("{k}").count() != 1 {
                return Err(CorpusError::Schema(format!(
                    "{kind} alias pattern must contain exactly one {{k}}"
                )));
            }
        }
        // Instantiation must be injective over a reasonable index range.
        let mut rendered = HashSet::new();
        for k in 0..16 {
            for t in &self.tables {
                if !rendered.insert(p.table_alias(t, k)) {
                    return Err(CorpusError::Schema(format!(
                        "alias pattern is not injective ({t}, {k})"
                    )));
                }
            }
            for s in [p.derived_field_alias(k), p.derived_table_alias(k)] {
                if !rendered.insert(s.clone()) {
                    return Err(CorpusError::Schema(format!(
                        "alias pattern is not injective ({s})"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn parse_schema(text: &str) -> Result<Schema, CorpusError> {
    let schema: Schema = toml::from_str(text).map_err(|e| CorpusError::Schema(e.to_string()))?;
    schema.validate()?;
    Ok(schema)
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema, CorpusError> {
    parse_schema(&read(path.as_ref())?)
}
