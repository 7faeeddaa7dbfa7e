//! Word-similarity and title-classification evaluation.

mod classify;
mod logreg;
mod similarity;

use std::cmp::Ordering;

pub use classify::{
    classification_table, eval_classify, stratified_split, title_vector, BigramSource, ClassMetrics,
    ClassificationDataset, ClassificationReport, ClassifyConfig, ConfusionMatrix, TitleFeatures, TitleMode,
};
pub use logreg::{train_logreg, LogRegConfig, LogRegModel};
pub use similarity::{
    eval_similarity, similarity_table, word_vector, CategoryResult, Composition, SimilarityDataset, SimilarityRecord,
    SimilarityReport,
};

use crate::trainer::Embeddings;

/// Why a statistic has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum Undefined {
    #[error("inputs differ in length")]
    LengthMismatch,
    #[error("fewer than two observations")]
    TooFew,
    #[error("an input has zero variance")]
    Constant,
    #[error("no pair survived vocabulary filtering")]
    NoCoverage,
    #[error("class absent from the test split")]
    AbsentClass,
}

pub type Statistic = std::result::Result<f64, Undefined>;

/// Formats a statistic for tables and CSV rows; undefined values print as `NA`.
pub fn format_statistic(s: &Statistic, digits: usize) -> String {
    match s {
        Ok(v) => format!("{v:.digits$}"),
        Err(_) => "NA".to_string(),
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let mean = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = mean;
        }
        i = j;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Statistic {
    if xs.len() != ys.len() {
        return Err(Undefined::LengthMismatch);
    }
    if xs.len() < 2 {
        return Err(Undefined::TooFew);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Undefined::Constant);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Statistic {
    if xs.len() != ys.len() {
        return Err(Undefined::LengthMismatch);
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// The `k` tokens closest to `token` by cosine, best first, excluding itself.
pub fn nearest<'a>(emb: &'a Embeddings, token: &str, k: usize) -> Option<Vec<(&'a str, f64)>> {
    let query = emb.get(token)?;
    let mut scored: Vec<(&str, f64)> = emb
        .iter()
        .filter(|(t, _)| *t != token)
        .map(|(t, v)| (t, cosine(query, v)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(b.0)));
    scored.truncate(k);
    Some(scored)
}
