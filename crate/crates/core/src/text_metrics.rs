//! BLEU and ROUGE-L for generated protein descriptions.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            let key: Vec<&str> = w.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

pub const BLEU_MAX_N: usize = 4;

/// Sentence BLEU with uniform weights over orders `1..=max_n`.
///
/// Orders for which the candidate has no n-grams are left out of the
/// geometric mean. A zero precision at order two or higher is replaced by
/// `1 / (2 · candidate n-gram count)`; a zero unigram precision or an empty
/// candidate scores 0.
pub fn bleu<S: AsRef<str>>(candidate: &[S], reference: &[S], max_n: usize) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_n {
        let cand = ngram_counts(candidate, n);
        let total: usize = cand.values().sum();
        if total == 0 {
            continue;
        }
        let refs = ngram_counts(reference, n);
        let matched: usize = cand
            .iter()
            .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
            .sum();
        let precision = if matched > 0 {
            matched as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (2.0 * total as f64)
        };
        log_sum += precision.ln();
        orders += 1;
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let brevity = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    brevity * (log_sum / orders as f64).exp()
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1, evaluated as `2·LCS / (|candidate| + |reference|)`, which
/// equals `2PR / (P + R)` for LCS precision P and recall R.
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l = lcs_len(candidate, reference);
    2.0 * l as f64 / (candidate.len() + reference.len()) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextScore {
    pub rouge: f64,
    pub bleu: f64,
    pub n: usize,
}

pub fn score_pair(candidate: &str, reference: &str) -> (f64, f64) {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    (rouge_l(&c, &r), bleu(&c, &r, BLEU_MAX_N))
}

/// Macro-averaged scores over `(candidate, reference)` pairs.
pub fn score_corpus<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> TextScore {
    let (mut rouge, mut bleu_sum, mut n) = (0.0, 0.0, 0usize);
    for (c, r) in pairs {
        let (rl, b) = score_pair(c, r);
        rouge += rl;
        bleu_sum += b;
        n += 1;
    }
    if n == 0 {
        return TextScore {
            rouge: 0.0,
            bleu: 0.0,
            n,
        };
    }
    TextScore {
        rouge: rouge / n as f64,
        bleu: bleu_sum / n as f64,
        n,
    }
}
