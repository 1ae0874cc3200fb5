//! Attention-side objectives: coverage accumulation, the coverage penalty,
//! the alignment-supervision loss, their gradients with respect to the
//! attention logits, and constituent spans from bracketed parses.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AttentionError {
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("source index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("unbalanced brackets at byte {0}")]
    Unbalanced(usize),
    #[error("empty tree")]
    Empty,
}

fn same_len(a: &[f64], b: &[f64]) -> Result<(), AttentionError> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(AttentionError::Length(a.len(), b.len()))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Accumulated attention mass per source position.
#[derive(Debug, Clone, PartialEq)]
pub struct Coverage(pub Vec<f64>);

impl Coverage {
    pub fn zeros(n: usize) -> Self {
        Coverage(vec![0.0; n])
    }

    pub fn update(&self, p: &[f64]) -> Result<Coverage, AttentionError> {
        update_coverage(&self.0, p).map(Coverage)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn update_coverage(c: &[f64], p: &[f64]) -> Result<Vec<f64>, AttentionError> {
    same_len(c, p)?;
    Ok(c.iter().zip(p).map(|(a, b)| a + b).collect())
}

/// `Σ min(c_i, p_i)`: mass placed on already-covered tokens.
pub fn coverage_loss(c: &[f64], p: &[f64]) -> Result<f64, AttentionError> {
    same_len(c, p)?;
    Ok(c.iter().zip(p).map(|(a, b)| a.min(*b)).sum())
}

fn check_indices(index: &BTreeSet<usize>, len: usize) -> Result<(), AttentionError> {
    match index.iter().find(|&&i| i >= len) {
        Some(&i) => Err(AttentionError::Index { index: i, len }),
        None => Ok(()),
    }
}

/// `-log Σ_{i∈I} p_i`; zero when `I` is empty.
pub fn supervision_loss(p: &[f64], aligned: &BTreeSet<usize>) -> Result<f64, AttentionError> {
    check_indices(aligned, p.len())?;
    if aligned.is_empty() {
        return Ok(0.0);
    }
    let mass: f64 = aligned.iter().map(|&i| p[i]).sum();
    Ok(-mass.ln())
}

/// Gradient of `supervision_loss(softmax(z), I)` with respect to `z`.
pub fn supervision_loss_grad(
    logits: &[f64],
    aligned: &BTreeSet<usize>,
) -> Result<Vec<f64>, AttentionError> {
    check_indices(aligned, logits.len())?;
    if aligned.is_empty() {
        return Ok(vec![0.0; logits.len()]);
    }
    let p = softmax(logits);
    let s: f64 = aligned.iter().map(|&i| p[i]).sum();
    Ok(p.iter()
        .enumerate()
        .map(|(k, &pk)| {
            if aligned.contains(&k) {
                pk - pk / s
            } else {
                pk
            }
        })
        .collect())
}

/// Gradient of `coverage_loss(c, softmax(z))` with respect to `z`. At ties
/// `p_i = c_i` the subgradient of `min` through `p` is taken as 0.
pub fn coverage_loss_grad(c: &[f64], logits: &[f64]) -> Result<Vec<f64>, AttentionError> {
    same_len(c, logits)?;
    let p = softmax(logits);
    let g: Vec<f64> = p
        .iter()
        .zip(c)
        .map(|(pi, ci)| if pi < ci { 1.0 } else { 0.0 })
        .collect();
    let mean: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
    Ok(p.iter().zip(&g).map(|(pk, gk)| pk * (gk - mean)).collect())
}

/// Sum of the auxiliary terms added to the decoding loss, each scaled by
/// its weight.
pub fn auxiliary_loss(
    p: &[f64],
    coverage: &[f64],
    aligned: &BTreeSet<usize>,
    supervision_weight: f64,
    coverage_weight: f64,
) -> Result<f64, AttentionError> {
    Ok(supervision_weight * supervision_loss(p, aligned)?
        + coverage_weight * coverage_loss(coverage, p)?)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = x[k];
            x[k] = orig + h;
            let up = f(&x);
            x[k] = orig - h;
            let down = f(&x);
            x[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, or the absolute norm when both are tiny.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Inclusive `(start, end)` token spans.
pub type SpanSet = BTreeSet<(usize, usize)>;

/// Spans of every constituent in a bracketed tree such as
/// `(S (NP a b) (VP c))`, plus every single-token span. The first word
/// after an opening bracket is the label.
pub fn enumerate_spans(tree: &str) -> Result<SpanSet, AttentionError> {
    let mut spans = SpanSet::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut leaves = 0usize;
    let mut expect_label = false;
    let mut closed_root = false;
    let bytes = tree.as_bytes();
    let mut k = 0;
    while k < bytes.len() {
        match bytes[k] {
            b'(' => {
                if closed_root {
                    return Err(AttentionError::Unbalanced(k));
                }
                stack.push(leaves);
                expect_label = true;
                k += 1;
            }
            b')' => {
                let start = stack.pop().ok_or(AttentionError::Unbalanced(k))?;
                if leaves > start {
                    spans.insert((start, leaves - 1));
                }
                expect_label = false;
                closed_root = stack.is_empty();
                k += 1;
            }
            c if c.is_ascii_whitespace() => k += 1,
            _ => {
                while k < bytes.len()
                    && !bytes[k].is_ascii_whitespace()
                    && bytes[k] != b'('
                    && bytes[k] != b')'
                {
                    k += 1;
                }
                if stack.is_empty() {
                    return Err(AttentionError::Unbalanced(k));
                }
                if expect_label {
                    expect_label = false;
                } else {
                    spans.insert((leaves, leaves));
                    leaves += 1;
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err(AttentionError::Unbalanced(tree.len()));
    }
    if leaves == 0 {
        return Err(AttentionError::Empty);
    }
    Ok(spans)
}
