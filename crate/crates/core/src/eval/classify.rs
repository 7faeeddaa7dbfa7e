use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::logreg::{train_logreg, LogRegConfig, LogRegModel};
use super::{format_statistic, Statistic, Undefined};
use crate::corpus::is_chinese;
use crate::error::{Error, Result};
use crate::rng;
use crate::trainer::Embeddings;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationDataset {
    /// Sorted, distinct label names; record labels index into this.
    pub labels: Vec<String>,
    pub records: Vec<(usize, Vec<char>)>,
}

impl ClassificationDataset {
    /// `label<TAB>title` per line; blank and `#` lines are skipped. Only the
    /// Chinese characters of a title are kept.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut raw = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((label, title)) = line.split_once('\t') else {
                return Err(Error::parse(origin, i + 1, "expected 'label<TAB>title'"));
            };
            let label = label.trim();
            if label.is_empty() {
                return Err(Error::parse(origin, i + 1, "empty label"));
            }
            raw.push((label.to_string(), title.chars().filter(|&c| is_chinese(c)).collect()));
        }
        if raw.is_empty() {
            return Err(Error::EmptyInput { origin: origin.into() });
        }
        Ok(Self::from_labeled(raw))
    }

    pub fn from_labeled(raw: Vec<(String, Vec<char>)>) -> Self {
        let mut labels: Vec<String> = raw.iter().map(|(l, _)| l.clone()).collect();
        labels.sort_unstable();
        labels.dedup();
        let records = raw
            .into_iter()
            .map(|(l, t)| (labels.binary_search(&l).expect("label collected above"), t))
            .collect();
        ClassificationDataset { labels, records }
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

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TitleMode {
    /// Average of character vectors.
    Uni,
    /// Average of overlapping bigram vectors.
    Bi,
    /// `[uni average; bi average]`.
    Combine,
}

impl fmt::Display for TitleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TitleMode::Uni => "uni",
            TitleMode::Bi => "bi",
            TitleMode::Combine => "combine",
        })
    }
}

impl FromStr for TitleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uni" => Ok(TitleMode::Uni),
            "bi" => Ok(TitleMode::Bi),
            "combine" => Ok(TitleMode::Combine),
            other => Err(Error::Config(format!("unknown mode '{other}' (expected uni|bi|combine)"))),
        }
    }
}

/// Where the vector of one bigram inside a title comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BigramSource {
    /// The bigram token's own vector.
    #[default]
    Token,
    /// Mean of its two characters' vectors from the uni-gram table.
    CharAverage,
}

impl fmt::Display for BigramSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BigramSource::Token => "token",
            BigramSource::CharAverage => "char-average",
        })
    }
}

impl FromStr for BigramSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(BigramSource::Token),
            "char-average" => Ok(BigramSource::CharAverage),
            other => Err(Error::Config(format!(
                "unknown bigram source '{other}' (expected token|char-average)"
            ))),
        }
    }
}

/// Embedding tables available for building title vectors.
#[derive(Debug, Clone, Copy)]
pub struct TitleFeatures<'a> {
    pub uni: Option<&'a Embeddings>,
    pub bi: Option<&'a Embeddings>,
    pub bigram_source: BigramSource,
}

impl<'a> TitleFeatures<'a> {
    pub fn uni(emb: &'a Embeddings) -> Self {
        TitleFeatures {
            uni: Some(emb),
            bi: None,
            bigram_source: BigramSource::Token,
        }
    }

    pub fn bi(emb: &'a Embeddings) -> Self {
        TitleFeatures {
            uni: None,
            bi: Some(emb),
            bigram_source: BigramSource::Token,
        }
    }

    pub fn combine(uni: &'a Embeddings, bi: &'a Embeddings) -> Self {
        TitleFeatures {
            uni: Some(uni),
            bi: Some(bi),
            bigram_source: BigramSource::Token,
        }
    }

    fn uni_table(&self) -> Result<&'a Embeddings> {
        self.uni
            .ok_or_else(|| Error::Config("uni-gram embeddings are required for this mode".into()))
    }

    fn bigram_table(&self) -> Result<&'a Embeddings> {
        match self.bigram_source {
            BigramSource::Token => self
                .bi
                .ok_or_else(|| Error::Config("bi-gram embeddings are required for this mode".into())),
            BigramSource::CharAverage => self.uni_table(),
        }
    }

    /// Feature length for `mode`; also checks the needed tables exist.
    pub fn dim(&self, mode: TitleMode) -> Result<usize> {
        match mode {
            TitleMode::Uni => Ok(self.uni_table()?.dim()),
            TitleMode::Bi => Ok(self.bigram_table()?.dim()),
            TitleMode::Combine => Ok(self.uni_table()?.dim() + self.bigram_table()?.dim()),
        }
    }
}

fn mean_of<'v>(vectors: impl Iterator<Item = &'v [f64]>, dim: usize) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for v in vectors {
        sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
        n += 1;
    }
    (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
}

fn uni_average(title: &[char], emb: &Embeddings) -> Option<Vec<f64>> {
    let vectors: Vec<&[f64]> = title.iter().filter_map(|c| emb.get(&c.to_string())).collect();
    mean_of(vectors.into_iter(), emb.dim())
}

fn bi_average(title: &[char], emb: &Embeddings, source: BigramSource) -> Option<Vec<f64>> {
    let grams: Vec<Vec<f64>> = title
        .windows(2)
        .filter_map(|w| match source {
            BigramSource::Token => emb.get(&w.iter().collect::<String>()).map(<[f64]>::to_vec),
            BigramSource::CharAverage => {
                let a = emb.get(&w[0].to_string())?;
                let b = emb.get(&w[1].to_string())?;
                Some(a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect())
            }
        })
        .collect();
    mean_of(grams.iter().map(Vec::as_slice), emb.dim())
}

/// Title representation, or `None` when no gram of the title is in the
/// vocabulary. In combine mode a missing half is filled with zeros.
pub fn title_vector(title: &[char], features: &TitleFeatures, mode: TitleMode) -> Result<Option<Vec<f64>>> {
    features.dim(mode)?;
    Ok(match mode {
        TitleMode::Uni => uni_average(title, features.uni_table()?),
        TitleMode::Bi => bi_average(title, features.bigram_table()?, features.bigram_source),
        TitleMode::Combine => {
            let uni = features.uni_table()?;
            let bi = features.bigram_table()?;
            let u = uni_average(title, uni);
            let b = bi_average(title, bi, features.bigram_source);
            if u.is_none() && b.is_none() {
                None
            } else {
                let mut v = u.unwrap_or_else(|| vec![0.0; uni.dim()]);
                v.extend(b.unwrap_or_else(|| vec![0.0; bi.dim()]));
                Some(v)
            }
        }
    })
}

/// Splits indices per label: `round(n_label * test_fraction)` of each label
/// go to the test side, chosen by a shuffle of the `split` sub-stream.
pub fn stratified_split(labels: &[usize], num_classes: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = rng::substream(seed, rng::SPLIT);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            n: num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn from_pairs(num_classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::new(num_classes);
        pairs.into_iter().for_each(|(a, p)| m.add(a, p));
        m
    }

    pub fn add(&mut self, actual: usize, predicted: usize) {
        self.counts[actual * self.n + predicted] += 1;
    }

    pub fn num_classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual * self.n + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Test items whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        (0..self.n).map(|p| self.get(c, p)).sum()
    }

    pub fn predicted(&self, c: usize) -> u64 {
        (0..self.n).map(|a| self.get(a, c)).sum()
    }

    /// 0 when nothing was predicted as `c`.
    pub fn precision(&self, c: usize) -> Statistic {
        if self.support(c) == 0 {
            return Err(Undefined::AbsentClass);
        }
        let predicted = self.predicted(c);
        Ok(if predicted == 0 {
            0.0
        } else {
            self.get(c, c) as f64 / predicted as f64
        })
    }

    pub fn recall(&self, c: usize) -> Statistic {
        match self.support(c) {
            0 => Err(Undefined::AbsentClass),
            s => Ok(self.get(c, c) as f64 / s as f64),
        }
    }

    /// `2PR/(P+R)`, 0 when `P+R = 0`.
    pub fn f1(&self, c: usize) -> Statistic {
        let p = self.precision(c)?;
        let r = self.recall(c)?;
        Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
    }

    pub fn accuracy(&self) -> Statistic {
        match self.total() {
            0 => Err(Undefined::TooFew),
            t => Ok((0..self.n).map(|c| self.get(c, c)).sum::<u64>() as f64 / t as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: Statistic,
    pub recall: Statistic,
    pub f1: Statistic,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    pub test_fraction: f64,
    pub seed: u64,
    pub logreg: LogRegConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            test_fraction: 0.2,
            seed: 1,
            logreg: LogRegConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: Statistic,
    pub confusion: ConfusionMatrix,
    pub train_size: usize,
    pub test_size: usize,
    /// Titles with no in-vocabulary gram, represented by the zero vector.
    pub oov_titles: usize,
    pub model: LogRegModel,
}

impl ClassificationReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.label == label)
    }

    pub fn coverage_line(&self, total: usize) -> String {
        format!(
            "coverage: {}/{} titles, {} without any in-vocabulary gram",
            total - self.oov_titles,
            total,
            self.oov_titles
        )
    }

    /// `<model>,<category>,<metric>,<value>` rows.
    pub fn csv_rows(&self, model: &str) -> Vec<String> {
        let mut rows = Vec::new();
        for c in &self.classes {
            for (metric, value) in [("P", &c.precision), ("R", &c.recall), ("F", &c.f1)] {
                rows.push(format!("{model},{},{metric},{}", c.label, format_statistic(value, 6)));
            }
        }
        rows.push(format!("{model},all,accuracy,{}", format_statistic(&self.accuracy, 6)));
        rows
    }
}

/// Featurizes every title, trains on a stratified split and scores the
/// held-out part.
pub fn eval_classify(
    dataset: &ClassificationDataset,
    features: &TitleFeatures,
    mode: TitleMode,
    cfg: &ClassifyConfig,
) -> Result<ClassificationReport> {
    let k = dataset.labels.len();
    if k < 2 {
        return Err(Error::TooFewClasses { found: k });
    }
    if !(0.0..1.0).contains(&cfg.test_fraction) {
        return Err(Error::Config("test_fraction must lie in [0, 1)".into()));
    }
    let dim = features.dim(mode)?;
    let mut oov_titles = 0;
    let mut x = Vec::with_capacity(dataset.len());
    for (_, title) in &dataset.records {
        match title_vector(title, features, mode)? {
            Some(v) => x.push(v),
            None => {
                oov_titles += 1;
                x.push(vec![0.0; dim]);
            }
        }
    }
    if oov_titles > 0 {
        log::warn!("{oov_titles} titles have no in-vocabulary gram; using zero vectors");
    }
    let labels: Vec<usize> = dataset.records.iter().map(|(l, _)| *l).collect();
    let (train_idx, test_idx) = stratified_split(&labels, k, cfg.test_fraction, cfg.seed);

    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
    let train_y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let model = train_logreg(&train_x, &train_y, k, &cfg.logreg)?;

    let confusion = ConfusionMatrix::from_pairs(k, test_idx.iter().map(|&i| (labels[i], model.predict(&x[i]))));
    let classes = dataset
        .labels
        .iter()
        .enumerate()
        .map(|(c, label)| ClassMetrics {
            label: label.clone(),
            precision: confusion.precision(c),
            recall: confusion.recall(c),
            f1: confusion.f1(c),
            support: confusion.support(c),
        })
        .collect();
    Ok(ClassificationReport {
        classes,
        accuracy: confusion.accuracy(),
        confusion,
        train_size: train_idx.len(),
        test_size: test_idx.len(),
        oov_titles,
        model,
    })
}

/// One row per model; for every category a `P R F` column triple.
pub fn classification_table(rows: &[(&str, &ClassificationReport)]) -> String {
    let mut labels: Vec<&str> = rows
        .iter()
        .flat_map(|(_, r)| r.classes.iter().map(|c| c.label.as_str()))
        .collect();
    labels.sort_unstable();
    labels.dedup();

    let name_width = rows.iter().map(|(m, _)| m.chars().count()).max().unwrap_or(0).max(5);
    let cell = 6;
    let group = 3 * cell + 2;
    let mut top = format!("{:<name_width$}", "");
    let mut sub = format!("{:<name_width$}", "model");
    for l in &labels {
        top.push_str(&format!(" | {l:^group$}"));
        sub.push_str(&format!(" | {:>cell$} {:>cell$} {:>cell$}", "P", "R", "F"));
    }
    let mut out = format!("{}\n{}\n", top.trim_end(), sub);
    for (model, report) in rows {
        out.push_str(&format!("{model:<name_width$}"));
        for &l in &labels {
            match report.class(l) {
                Some(c) => out.push_str(&format!(
                    " | {:>cell$} {:>cell$} {:>cell$}",
                    format_statistic(&c.precision, 3),
                    format_statistic(&c.recall, 3),
                    format_statistic(&c.f1, 3)
                )),
                None => out.push_str(&format!(" | {:>cell$} {:>cell$} {:>cell$}", "-", "-", "-")),
            }
        }
        out.push('\n');
    }
    out
}
