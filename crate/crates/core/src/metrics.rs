//! Exact match, relative gap, and error categories for predictions.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::corpus::Schema;
use crate::exec::{par_map, Jobs};
use crate::grammar::{parse, Grammar};
use crate::normalizer::{canonicalize, tokenize};

/// Equality of canonical forms.
pub fn exact_match(pred: &str, gold: &str, schema: Option<&Schema>) -> bool {
    canonicalize(pred, schema) == canonicalize(gold, schema)
}

/// `100 · (1 − em_program / em_iid)`; undefined when `em_iid` is 0.
pub fn relative_gap(em_iid: f64, em_program: f64) -> Option<f64> {
    (em_iid > 0.0).then(|| 100.0 * (1.0 - em_program / em_iid))
}

/// Mean of per-dataset gaps.
pub fn aggregate_gap(gaps: &[f64]) -> Option<f64> {
    (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
}

/// One decimal, or `n/a`.
pub fn format_pct(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.1}"),
        None => "n/a".to_owned(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorCategory {
    InvalidSyntax,
    SeenProgram,
    NewProgram,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 3] = [
        ErrorCategory::InvalidSyntax,
        ErrorCategory::SeenProgram,
        ErrorCategory::NewProgram,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::InvalidSyntax => "invalid_syntax",
            ErrorCategory::SeenProgram => "seen_program",
            ErrorCategory::NewProgram => "new_program",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifies a wrong prediction: unparseable, a training template, or a
/// template never seen in training. `train_templates` holds canonical
/// forms.
pub fn categorize_error(
    pred: &str,
    train_templates: &HashSet<String>,
    g: &Grammar,
    schema: Option<&Schema>,
) -> ErrorCategory {
    let canonical = canonicalize(pred, schema);
    if parse(g, &tokenize(&canonical)).is_err() {
        ErrorCategory::InvalidSyntax
    } else if train_templates.contains(&canonical) {
        ErrorCategory::SeenProgram
    } else {
        ErrorCategory::NewProgram
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalRecord {
    pub id: String,
    pub gold: String,
    pub predicted: String,
    pub dataset: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetScore {
    pub total: usize,
    pub correct: usize,
    pub errors: BTreeMap<ErrorCategory, usize>,
}

impl DatasetScore {
    /// Exact match in percent.
    pub fn em(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub datasets: BTreeMap<String, DatasetScore>,
    /// Per-record outcome in input order: `None` when correct.
    pub outcomes: Vec<(String, Option<ErrorCategory>)>,
}

/// Scores records in parallel; the report does not depend on `jobs`.
pub fn evaluate(
    records: &[EvalRecord],
    train_templates: &HashSet<String>,
    g: &Grammar,
    schema: Option<&Schema>,
    jobs: Jobs,
) -> MetricsReport {
    let outcomes = par_map(jobs, records, |r| {
        if exact_match(&r.predicted, &r.gold, schema) {
            None
        } else {
            Some(categorize_error(&r.predicted, train_templates, g, schema))
        }
    });
    let mut report = MetricsReport::default();
    for (r, o) in records.iter().zip(outcomes) {
        let d = report.datasets.entry(r.dataset.clone()).or_default();
        d.total += 1;
        match o {
            None => d.correct += 1,
            Some(c) => *d.errors.entry(c).or_insert(0) += 1,
        }
        report.outcomes.push((r.id.clone(), o));
    }
    report
}

impl MetricsReport {
    pub fn error_counts(&self) -> BTreeMap<ErrorCategory, usize> {
        let mut out: BTreeMap<ErrorCategory, usize> =
            ErrorCategory::ALL.iter().map(|c| (*c, 0)).collect();
        for d in self.datasets.values() {
            for (c, n) in &d.errors {
                *out.get_mut(c).expect("all categories present") += n;
            }
        }
        out
    }

    /// Relative gaps against iid exact-match scores, per dataset present in
    /// both, plus their mean.
    pub fn gaps(&self, em_iid: &BTreeMap<String, f64>) -> (Vec<GapRow>, Option<f64>) {
        let rows: Vec<GapRow> = self
            .datasets
            .iter()
            .filter_map(|(name, d)| {
                em_iid.get(name).map(|&iid| GapRow {
                    dataset: name.clone(),
                    em_iid: iid,
                    em_program: d.em(),
                    gap: relative_gap(iid, d.em()),
                })
            })
            .collect();
        let defined: Vec<f64> = rows.iter().filter_map(|r| r.gap).collect();
        (rows, aggregate_gap(&defined))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub dataset: String,
    pub em_iid: f64,
    pub em_program: f64,
    pub gap: Option<f64>,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "dataset\ttotal\tcorrect\tem\tinvalid_syntax\tseen_program\tnew_program"
        )?;
        for (name, d) in &self.datasets {
            write!(f, "{name}\t{}\t{}\t{:.1}", d.total, d.correct, d.em())?;
            for c in ErrorCategory::ALL {
                write!(f, "\t{}", d.errors.get(&c).copied().unwrap_or(0))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_canonical() {
        assert!(exact_match("select a from b", "select a from b", None));
        assert!(!exact_match("select a from b", "select a from c", None));
        assert!(exact_match("select  a\nfrom b", "SELECT a FROM b", None));
    }

    #[test]
    fn gaps_from_table() {
        assert_eq!(format_pct(relative_gap(70.1, 19.1)), "72.8");
        assert_eq!(format_pct(relative_gap(70.5, 12.3)), "82.6");
        assert_eq!(format_pct(relative_gap(42.0, 42.0)), "0.0");
        assert_eq!(relative_gap(0.0, 10.0), None);
        assert_eq!(format_pct(None), "n/a");
    }

    #[test]
    fn aggregate_is_mean_of_gaps() {
        let g = aggregate_gap(&[99.9, 82.6, 72.8, 83.2]).unwrap();
        assert_eq!(format_pct(Some(g)), "84.6");
        assert_eq!(aggregate_gap(&[12.5]), Some(12.5));
        assert_eq!(aggregate_gap(&[]), None);
    }

    #[test]
    fn categories() {
        let g = Grammar::from_text("S -> \"SELECT\" C \"FROM\" T\nC -> \"a\" | \"b\"\nT -> \"t\"")
            .unwrap();
        let train: HashSet<String> = [canonicalize("select a from t", None)].into();
        assert_eq!(
            categorize_error("select from", &train, &g, None),
            ErrorCategory::InvalidSyntax
        );
        assert_eq!(
            categorize_error("select a from t", &train, &g, None),
            ErrorCategory::SeenProgram
        );
        assert_eq!(
            categorize_error("select b from t", &train, &g, None),
            ErrorCategory::NewProgram
        );
    }

    #[test]
    fn evaluate_counts() {
        let g = Grammar::from_text("S -> \"SELECT\" C \"FROM\" T\nC -> \"a\" | \"b\"\nT -> \"t\"")
            .unwrap();
        let rec = |id: &str, gold: &str, pred: &str, ds: &str| EvalRecord {
            id: id.into(),
            gold: gold.into(),
            predicted: pred.into(),
            dataset: ds.into(),
        };
        let records = vec![
            rec("1", "select a from t", "select a from t", "x"),
            rec("2", "select a from t", "select b from t", "x"),
            rec("3", "select b from t", "oops", "y"),
        ];
        let r = evaluate(&records, &HashSet::new(), &g, None, Jobs(1));
        assert_eq!(r.datasets["x"].correct, 1);
        assert!((r.datasets["x"].em() - 50.0).abs() < 1e-12);
        let counts = r.error_counts();
        assert_eq!(counts[&ErrorCategory::NewProgram], 1);
        assert_eq!(counts[&ErrorCategory::InvalidSyntax], 1);
        assert_eq!(counts.values().sum::<usize>(), 2);
        let (rows, mean) = r.gaps(&[("x".to_owned(), 100.0)].into());
        assert_eq!(rows.len(), 1);
        assert_eq!(mean, Some(50.0));
    }
}
