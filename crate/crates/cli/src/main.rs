use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(
    name = "compgen",
    version,
    about = "Corpus, split, grammar and alignment tooling for compositional semantic parsing"
)]
pub struct Cli {
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 13)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GrammarArgs {
    /// `sql`, `qdmr`, or a grammar file.
    #[arg(long, default_value = "sql")]
    pub grammar: String,
    /// Schema file (TOML) used to instantiate table and column rules.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Aliases generated per table.
    #[arg(long, default_value_t = 3)]
    pub max_aliases: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Iid,
    Program,
    KbFree,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Tokens,
    Rules,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rewrite JOINs, canonicalize programs, optionally anonymize entities.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Replace bound entity values with their variable names first.
        #[arg(long)]
        anonymize: bool,
    },
    /// Parse every program and report coverage.
    Parse {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        grammar: GrammarArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the parseable examples to this corpus file.
        #[arg(long)]
        keep: Option<PathBuf>,
    },
    /// Split a corpus into train / dev / test.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long, default_value = "0.6,0.2,0.2", value_parser = parse_ratios)]
        ratios: [f64; 3],
        #[arg(long, value_parser = parse_cap)]
        downsample_cap: Option<usize>,
        /// Cap only the training partition, after splitting.
        #[arg(long)]
        downsample_after: bool,
        #[command(flatten)]
        grammar: GrammarArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train word alignments and write them in Pharaoh format.
    Align {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "tokens")]
        target: Target,
        #[command(flatten)]
        grammar: GrammarArgs,
        /// Model 1 iterations.
        #[arg(long, default_value_t = 5)]
        iters: usize,
        /// Model 2 iterations after Model 1 (0 to stop at Model 1).
        #[arg(long, default_value_t = 5)]
        model2_iters: usize,
        #[arg(long, default_value_t = compgen::aligner::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long)]
        freeze_lambda: bool,
        /// Allow target tokens to align to nothing.
        #[arg(long)]
        null_word: bool,
        /// Drop links whose posterior is below this value.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check predicted programs against the grammar and decoding constraints.
    DecodeCheck {
        /// Predictions: `id<TAB>program` per line.
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        grammar: GrammarArgs,
        /// Corpus whose bound variables are accepted as values.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact match, error categories and relative gaps.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Training templates, one per line.
        #[arg(long)]
        train_templates: PathBuf,
        #[command(flatten)]
        grammar: GrammarArgs,
        /// JSON report of the iid run, for relative gaps.
        #[arg(long)]
        iid_report: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Machine-readable report.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Example and template counts of an existing split.
    Stats {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum, default_value = "program")]
        mode: Mode,
        #[command(flatten)]
        grammar: GrammarArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let [a, b, c] = v[..] else {
        return Err(format!(
            "expected three comma-separated ratios, got {}",
            v.len()
        ));
    };
    let sum = a + b + c;
    if [a, b, c].iter().any(|r| !(r.is_finite() && *r > 0.0)) || (sum - 1.0).abs() > 1e-6 {
        return Err("ratios must be positive and sum to 1".into());
    }
    Ok([a, b, c])
}

fn parse_cap(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("cap must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
