use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use compgen::aligner::{self, AlignOptions, ParallelCorpus};
use compgen::corpus::{load_corpus, load_schema, render_corpus, Corpus, CorpusError, Schema};
use compgen::decoder::Decoder;
use compgen::exec::{par_map, Jobs};
use compgen::grammar::{corpus_grammar, linearize, parse, Grammar};
use compgen::metrics::{self, ErrorCategory, EvalRecord};
use compgen::normalizer::{self, canonicalize, normalize_program, tokenize, NormalizationReport};
use compgen::splitter::{self, SplitMode, SplitResult, SplitSpec, TemplateIndex, TemplateMode};

use crate::{Cli, Command, GrammarArgs, Mode, Target};

fn header(cli: &Cli, sub: &str) -> String {
    format!(
        "compgen {} {sub} seed={}",
        env!("CARGO_PKG_VERSION"),
        cli.seed
    )
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// I/O errors already name the file; record errors get it prepended.
fn with_path(e: CorpusError, path: &Path) -> anyhow::Error {
    match e {
        CorpusError::Io { .. } => e.into(),
        _ => anyhow::Error::from(e).context(path.display().to_string()),
    }
}

fn corpus(path: &Path) -> Result<Corpus> {
    load_corpus(path).map_err(|e| with_path(e, path))
}

fn schema(path: Option<&Path>) -> Result<Option<Schema>> {
    path.map(|p| load_schema(p).map_err(|e| with_path(e, p)))
        .transpose()
}

fn base_grammar(name: &str) -> Result<Grammar> {
    Ok(match name {
        "sql" => Grammar::sql(),
        "qdmr" => Grammar::qdmr(),
        path => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading grammar {path}"))?;
            Grammar::from_text(&text).with_context(|| format!("grammar {path}"))?
        }
    })
}

/// Base grammar instantiated for `schema` and the variables of `c`.
fn grammar_for(args: &GrammarArgs, schema: Option<&Schema>, c: &Corpus) -> Result<Grammar> {
    if args.max_aliases == 0 {
        bail!("--max-aliases must be at least 1");
    }
    let base = base_grammar(&args.grammar)?;
    Ok(corpus_grammar(&base, schema, c, args.max_aliases))
}

/// `id<TAB>program` lines; blank and `#` lines are skipped.
fn read_predictions(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, prog) = line.split_once('\t').with_context(|| {
            format!(
                "{}: line {}: expected id<TAB>program",
                path.display(),
                k + 1
            )
        })?;
        out.push((id.to_owned(), prog.to_owned()));
    }
    Ok(out)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

fn template_mode<'a>(
    mode: Mode,
    schema: Option<&'a Schema>,
    grammar: &'a Grammar,
) -> Result<TemplateMode<'a>> {
    Ok(match mode {
        Mode::KbFree => TemplateMode::KbFree {
            schema: schema.context("kb-free templates need --schema")?,
            grammar,
        },
        _ => TemplateMode::Entity { schema },
    })
}

pub fn run(cli: &Cli) -> Result<()> {
    let jobs = Jobs(cli.jobs);
    match &cli.command {
        Command::Normalize {
            input,
            out,
            schema: schema_path,
            anonymize,
        } => {
            let mut c = corpus(input)?;
            let s = schema(schema_path.as_deref())?;
            let mut total = NormalizationReport::default();
            for e in &mut c.examples {
                if *anonymize {
                    let a = normalizer::anonymize_entities(e);
                    for w in &a.warnings {
                        eprintln!("warning: {w}");
                    }
                    *e = a.example;
                }
                let (p, r) = normalize_program(&e.program, s.as_ref())
                    .with_context(|| format!("example {}", e.id))?;
                e.program = p;
                total += r;
            }
            eprintln!(
                "normalized {} programs: {} join rewrites, {} conditions moved",
                c.len(),
                total.rewrites_applied,
                total.where_conditions_moved
            );
            emit(
                out.as_deref(),
                &render_corpus(&c, Some(&header(cli, "normalize"))),
            )
        }

        Command::Parse {
            input,
            grammar,
            out,
            keep,
        } => {
            let c = corpus(input)?;
            let s = schema(grammar.schema.as_deref())?;
            let g = grammar_for(grammar, s.as_ref(), &c)?;
            let results = par_map(jobs, &c.examples, |e| {
                let p = canonicalize(&e.program, s.as_ref());
                parse(&g, &tokenize(&p)).map(|t| linearize(&t).0.len())
            });
            let mut text = format!("# {}\n", header(cli, "parse"));
            let mut kept = Corpus {
                examples: Vec::new(),
                schema: None,
            };
            for (e, r) in c.examples.iter().zip(&results) {
                match r {
                    Ok(n) => {
                        let _ = writeln!(text, "{}\tok\t{n}", e.id);
                        kept.examples.push(e.clone());
                    }
                    Err(err) => {
                        let _ = writeln!(text, "{}\tfail\t{err}", e.id);
                    }
                }
            }
            let report = compgen::grammar::CoverageReport {
                parsed: kept.len(),
                failed: c
                    .examples
                    .iter()
                    .zip(&results)
                    .filter(|(_, r)| r.is_err())
                    .map(|(e, _)| e.id.clone())
                    .collect(),
            };
            let _ = writeln!(
                text,
                "coverage\t{}/{}\t{:.1}",
                report.parsed,
                c.len(),
                100.0 * report.fraction()
            );
            eprintln!("{report}");
            if let Some(k) = keep {
                fs::write(k, render_corpus(&kept, Some(&header(cli, "parse"))))
                    .with_context(|| format!("writing {}", k.display()))?;
            }
            emit(out.as_deref(), &text)
        }

        Command::Split {
            input,
            mode,
            ratios,
            downsample_cap,
            downsample_after,
            grammar,
            out_dir,
        } => {
            let c = corpus(input)?;
            let s = schema(grammar.schema.as_deref())?;
            let g = grammar_for(grammar, s.as_ref(), &c)?;
            let tm = template_mode(*mode, s.as_ref(), &g)?;
            let ti = TemplateIndex::build(&c, tm)?;
            let spec = SplitSpec {
                mode: match mode {
                    Mode::Iid => SplitMode::Iid,
                    Mode::Program => SplitMode::Program,
                    Mode::KbFree => SplitMode::KbFree,
                },
                ratios: *ratios,
                seed: cli.seed,
                downsample_cap: *downsample_cap,
                downsample_after: *downsample_after,
            };
            let result = splitter::split(&ti, &spec)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            fs::create_dir_all(out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            let h = header(cli, "split");
            let parts = result.partition_corpus(&c);
            for (p, part) in splitter::Partition::ALL.iter().zip(&parts) {
                let path = out_dir.join(format!("{p}.jsonl"));
                fs::write(&path, render_corpus(part, Some(&h)))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let train_templates: std::collections::BTreeSet<&str> = parts[0]
                .examples
                .iter()
                .filter_map(|e| ti.template_of(&e.id).map(|t| ti.template(t)))
                .collect();
            let mut tt = format!("# {h}\n");
            for t in train_templates {
                let _ = writeln!(tt, "{t}");
            }
            fs::write(out_dir.join("train_templates.txt"), tt)?;
            let stats = splitter::split_stats(&result, &ti);
            let text = format!("# {h}\n{stats}");
            fs::write(out_dir.join("stats.txt"), &text)?;
            print!("{text}");
            Ok(())
        }

        Command::Align {
            input,
            target,
            grammar,
            iters,
            model2_iters,
            lambda,
            freeze_lambda,
            null_word,
            threshold,
            out,
        } => {
            let c = corpus(input)?;
            let s = schema(grammar.schema.as_deref())?;
            let g = match target {
                Target::Rules => Some(grammar_for(grammar, s.as_ref(), &c)?),
                Target::Tokens => None,
            };
            let sides: Vec<Option<(Vec<String>, Vec<String>)>> = c
                .examples
                .iter()
                .map(|e| {
                    let tgt = match &g {
                        Some(g) => {
                            let p = canonicalize(&e.program, s.as_ref());
                            match aligner::rule_targets(g, &p) {
                                Ok(t) => t,
                                Err(err) => {
                                    eprintln!("warning: {}: {err}; left unaligned", e.id);
                                    return None;
                                }
                            }
                        }
                        None => aligner::token_targets(&e.program),
                    };
                    (!e.question.is_empty() && !tgt.is_empty()).then(|| (e.question.clone(), tgt))
                })
                .collect();
            let pc = ParallelCorpus::new(sides.iter().flatten().cloned().collect())?;
            let opts = AlignOptions {
                null_word: *null_word,
                jobs,
            };
            let m1 = aligner::train_model1(&pc, *iters, &opts)?;
            let model = if *model2_iters > 0 {
                let m2 = aligner::train_model2(
                    &pc,
                    &m1.model.table,
                    *model2_iters,
                    *lambda,
                    !freeze_lambda,
                    &opts,
                )?;
                eprintln!(
                    "model 2 log-likelihood {:.4}, lambda {:.4}",
                    m2.loglik.last().copied().unwrap_or(f64::NAN),
                    m2.model.distortion.map_or(0.0, |d| d.lambda)
                );
                m2.model
            } else {
                eprintln!(
                    "model 1 log-likelihood {:.4}",
                    m1.loglik.last().copied().unwrap_or(f64::NAN)
                );
                m1.model
            };
            let aligned = par_map(jobs, &sides, |side| {
                side.as_ref()
                    .map(|(s, t)| aligner::to_pharaoh(&model.viterbi_align(s, t, *threshold)))
                    .unwrap_or_default()
            });
            let mut text = format!("# {}\n", header(cli, "align"));
            for line in aligned {
                text.push_str(&line);
                text.push('\n');
            }
            emit(out.as_deref(), &text)
        }

        Command::DecodeCheck {
            input,
            grammar,
            corpus: corpus_path,
            out,
        } => {
            let preds = read_predictions(input)?;
            let c = match corpus_path {
                Some(p) => corpus(p)?,
                None => Corpus::default(),
            };
            let s = schema(grammar.schema.as_deref())?;
            let g = grammar_for(grammar, s.as_ref(), &c)?;
            let dec = match &s {
                Some(s) => Decoder::with_schema(&g, s),
                None => Decoder::new(&g),
            };
            let flags = par_map(jobs, &preds, |(_, p)| {
                let p = canonicalize(p, s.as_ref());
                match parse(&g, &tokenize(&p)) {
                    Ok(tree) => {
                        let st = dec
                            .replay(&linearize(&tree), true)
                            .expect("parsed derivation replays");
                        (true, st.relaxed())
                    }
                    Err(_) => (false, false),
                }
            });
            let mut text = format!("# {}\nid\tvalid\trelaxed\n", header(cli, "decode-check"));
            for ((id, _), (valid, relaxed)) in preds.iter().zip(&flags) {
                let _ = writeln!(text, "{id}\t{valid}\t{relaxed}");
            }
            let valid = flags.iter().filter(|f| f.0).count();
            let relaxed = flags.iter().filter(|f| f.1).count();
            eprintln!(
                "{valid} / {} valid, {relaxed} needed relaxed constraints",
                flags.len()
            );
            emit(out.as_deref(), &text)
        }

        Command::Eval {
            gold,
            pred,
            train_templates,
            grammar,
            iid_report,
            out,
            json,
        } => {
            let c = corpus(gold)?;
            let s = schema(grammar.schema.as_deref())?;
            let g = grammar_for(grammar, s.as_ref(), &c)?;
            let preds: BTreeMap<String, String> = read_predictions(pred)?.into_iter().collect();
            for id in preds.keys() {
                if c.get(id).is_none() {
                    bail!("{}: unknown example id {id}", pred.display());
                }
            }
            let train: HashSet<String> = read_lines(train_templates)?
                .into_iter()
                .map(|t| canonicalize(&t, s.as_ref()))
                .collect();
            let records: Vec<EvalRecord> = c
                .examples
                .iter()
                .map(|e| EvalRecord {
                    id: e.id.clone(),
                    gold: e.program.clone(),
                    predicted: preds.get(&e.id).cloned().unwrap_or_default(),
                    dataset: e.dataset.clone(),
                })
                .collect();
            let report = metrics::evaluate(&records, &train, &g, s.as_ref(), jobs);

            let h = header(cli, "eval");
            let mut text = format!("# {h}\n{report}");
            let counts = report.error_counts();
            for cat in ErrorCategory::ALL {
                let _ = writeln!(text, "errors\t{cat}\t{}", counts[&cat]);
            }
            let mut datasets = serde_json::Map::new();
            for (name, d) in &report.datasets {
                let mut m = serde_json::Map::new();
                m.insert("total".into(), d.total.into());
                m.insert("correct".into(), d.correct.into());
                m.insert("em".into(), d.em().into());
                for cat in ErrorCategory::ALL {
                    m.insert(
                        cat.name().into(),
                        d.errors.get(&cat).copied().unwrap_or(0).into(),
                    );
                }
                datasets.insert(name.clone(), m.into());
            }
            let mut doc = serde_json::Map::new();
            doc.insert("header".into(), h.clone().into());
            doc.insert("datasets".into(), datasets.into());
            if let Some(path) = iid_report {
                let iid = read_iid_report(path)?;
                let (rows, mean) = report.gaps(&iid);
                let mut gaps = serde_json::Map::new();
                for r in &rows {
                    let _ = writeln!(
                        text,
                        "gap\t{}\t{:.1}\t{:.1}\t{}",
                        r.dataset,
                        r.em_iid,
                        r.em_program,
                        metrics::format_pct(r.gap)
                    );
                    gaps.insert(r.dataset.clone(), r.gap.into());
                }
                let _ = writeln!(text, "gap\tmean\t{}", metrics::format_pct(mean));
                doc.insert("gaps".into(), gaps.into());
                doc.insert("mean_gap".into(), mean.into());
            }
            if let Some(j) = json {
                let body = serde_json::to_string_pretty(&serde_json::Value::Object(doc))?;
                fs::write(j, body + "\n").with_context(|| format!("writing {}", j.display()))?;
            }
            emit(out.as_deref(), &text)
        }

        Command::Stats {
            train,
            dev,
            test,
            mode,
            grammar,
            out,
        } => {
            let parts = [corpus(train)?, corpus(dev)?, corpus(test)?];
            let mut all = Corpus::default();
            let mut result = SplitResult::default();
            for (p, part) in splitter::Partition::ALL.iter().zip(&parts) {
                for e in &part.examples {
                    if result.assignment.insert(e.id.clone(), *p).is_some() {
                        bail!("example {} appears in more than one partition", e.id);
                    }
                    all.examples.push(e.clone());
                }
            }
            let s = schema(grammar.schema.as_deref())?;
            let g = grammar_for(grammar, s.as_ref(), &all)?;
            let ti = TemplateIndex::build(&all, template_mode(*mode, s.as_ref(), &g)?)?;
            let stats = splitter::split_stats(&result, &ti);
            emit(
                out.as_deref(),
                &format!("# {}\n{stats}", header(cli, "stats")),
            )
        }
    }
}

fn read_iid_report(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let ds = v
        .get("datasets")
        .and_then(|d| d.as_object())
        .with_context(|| format!("{}: no datasets", path.display()))?;
    ds.iter()
        .map(|(k, d)| {
            let em = d
                .get("em")
                .and_then(|x| x.as_f64())
                .with_context(|| format!("{}: dataset {k} has no em", path.display()))?;
            Ok((k.clone(), em))
        })
        .collect()
}
