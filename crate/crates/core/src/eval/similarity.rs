use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::{cosine, format_statistic, spearman, Statistic, Undefined};
use crate::error::{Error, Result};
use crate::trainer::Embeddings;

/// How a two-character word gets its vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Composition {
    /// Concatenation of the two character vectors.
    Uni,
    /// The vector of the word itself as a bigram token.
    Bi,
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Composition::Uni => "uni",
            Composition::Bi => "bi",
        })
    }
}

impl FromStr for Composition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uni" => Ok(Composition::Uni),
            "bi" => Ok(Composition::Bi),
            other => Err(Error::Config(format!("unknown mode '{other}' (expected uni|bi)"))),
        }
    }
}

/// Vector for a two-character `word`, or `None` when it has another length
/// or uses an out-of-vocabulary unit.
pub fn word_vector(word: &str, emb: &Embeddings, mode: Composition) -> Option<Vec<f64>> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() != 2 {
        return None;
    }
    match mode {
        Composition::Uni => {
            let a = emb.get(&chars[0].to_string())?;
            let b = emb.get(&chars[1].to_string())?;
            Some([a, b].concat())
        }
        Composition::Bi => emb.get(word).map(<[f64]>::to_vec),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRecord {
    pub word_a: String,
    pub word_b: String,
    pub gold: f64,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDataset {
    pub records: Vec<SimilarityRecord>,
}

impl SimilarityDataset {
    /// `word_a<TAB>word_b<TAB>gold<TAB>category` per line; blank and `#` lines
    /// are skipped.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [a, b, gold, category] = fields[..] else {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected 4 tab-separated fields, found {}", fields.len()),
                ));
            };
            if a.is_empty() || b.is_empty() {
                return Err(Error::parse(origin, lineno, "empty word"));
            }
            let gold: f64 = gold
                .parse()
                .ok()
                .filter(|g: &f64| g.is_finite())
                .ok_or_else(|| Error::parse(origin, lineno, format!("invalid gold score '{gold}'")))?;
            records.push(SimilarityRecord {
                word_a: a.to_string(),
                word_b: b.to_string(),
                gold,
                category: category.to_string(),
            });
        }
        if records.is_empty() {
            return Err(Error::EmptyInput { origin: origin.into() });
        }
        Ok(SimilarityDataset { records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryResult {
    pub category: String,
    pub pairs: usize,
    /// Pairs whose two word vectors both exist.
    pub covered: usize,
    pub rho: Statistic,
}

impl CategoryResult {
    pub fn dropped(&self) -> usize {
        self.pairs - self.covered
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    /// In category-label order.
    pub categories: Vec<CategoryResult>,
    pub overall: CategoryResult,
}

impl SimilarityReport {
    pub fn category(&self, label: &str) -> Option<&CategoryResult> {
        self.categories.iter().find(|c| c.category == label)
    }

    pub fn coverage_line(&self) -> String {
        let o = &self.overall;
        format!("coverage: {}/{} pairs, {} dropped", o.covered, o.pairs, o.dropped())
    }

    /// `<model>,<category>,<metric>,<value>` rows; overall uses category `all`.
    pub fn csv_rows(&self, model: &str) -> Vec<String> {
        self.categories
            .iter()
            .chain(std::iter::once(&self.overall))
            .flat_map(|c| {
                [
                    format!("{model},{},rho,{}", c.category, format_statistic(&c.rho, 6)),
                    format!("{model},{},covered,{}", c.category, c.covered),
                    format!("{model},{},pairs,{}", c.category, c.pairs),
                ]
            })
            .collect()
    }
}

/// Spearman's rho between gold scores and cosine similarities, per category
/// and overall. Pairs without vectors are dropped.
pub fn eval_similarity(emb: &Embeddings, dataset: &SimilarityDataset, mode: Composition) -> Result<SimilarityReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput {
            origin: "similarity dataset".into(),
        });
    }
    // category -> (pairs, gold, model)
    let mut groups: BTreeMap<&str, (usize, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut all = (0, Vec::new(), Vec::new());
    for r in &dataset.records {
        let g = groups.entry(r.category.as_str()).or_default();
        g.0 += 1;
        all.0 += 1;
        let (Some(a), Some(b)) = (word_vector(&r.word_a, emb, mode), word_vector(&r.word_b, emb, mode)) else {
            continue;
        };
        let score = cosine(&a, &b);
        g.1.push(r.gold);
        g.2.push(score);
        all.1.push(r.gold);
        all.2.push(score);
    }

    let result = |category: &str, (pairs, gold, model): &(usize, Vec<f64>, Vec<f64>)| CategoryResult {
        category: category.to_string(),
        pairs: *pairs,
        covered: gold.len(),
        rho: if gold.is_empty() {
            Err(Undefined::NoCoverage)
        } else {
            spearman(gold, model)
        },
    };
    Ok(SimilarityReport {
        categories: groups.iter().map(|(c, g)| result(c, g)).collect(),
        overall: result("all", &all),
    })
}

/// One row per model, one column per category plus `all`.
pub fn similarity_table(rows: &[(&str, &SimilarityReport)]) -> String {
    let mut categories: Vec<&str> = rows
        .iter()
        .flat_map(|(_, r)| r.categories.iter().map(|c| c.category.as_str()))
        .collect();
    categories.sort_unstable();
    categories.dedup();
    categories.push("all");

    let name_width = rows.iter().map(|(m, _)| m.chars().count()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<name_width$}", "model");
    for c in &categories {
        out.push_str(&format!(" {c:>7}"));
    }
    out.push('\n');
    for (model, report) in rows {
        out.push_str(&format!("{model:<name_width$}"));
        for &c in &categories {
            let cell = if c == "all" {
                Some(&report.overall)
            } else {
                report.category(c)
            };
            let text = cell.map_or_else(|| "-".to_string(), |r| format_statistic(&r.rho, 3));
            out.push_str(&format!(" {text:>7}"));
        }
        out.push('\n');
    }
    out
}
