//! Raw text → character sentences → uni/bi-character token streams.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Default exponent applied to counts for the negative-sampling distribution.
pub const NS_POWER: f64 = 0.75;

/// True for code points in CJK Unified Ideographs and Extension A.
pub fn is_chinese(c: char) -> bool {
    matches!(c, '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}')
}

fn is_sentence_break(c: char) -> bool {
    matches!(c, '\n' | '。' | '！' | '？')
}

/// Decodes `raw` and splits it into sentences of Chinese characters.
pub fn preprocess(raw: &[u8]) -> Result<Vec<Vec<char>>> {
    let text = std::str::from_utf8(raw).map_err(|e| Error::InvalidUtf8 {
        offset: e.valid_up_to(),
    })?;
    Ok(preprocess_str(text))
}

/// Splits on newlines and `。！？`, keeps only Chinese characters, and drops
/// sentences left empty.
pub fn preprocess_str(text: &str) -> Vec<Vec<char>> {
    text.split(is_sentence_break)
        .map(|s| s.chars().filter(|&c| is_chinese(c)).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Token unit: single characters or overlapping character pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gram {
    Uni,
    Bi,
}

impl Gram {
    /// Characters per token.
    pub fn width(self) -> usize {
        match self {
            Gram::Uni => 1,
            Gram::Bi => 2,
        }
    }
}

impl fmt::Display for Gram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gram::Uni => "uni",
            Gram::Bi => "bi",
        })
    }
}

impl FromStr for Gram {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uni" => Ok(Gram::Uni),
            "bi" => Ok(Gram::Bi),
            other => Err(Error::Config(format!("unknown gram '{other}' (expected uni|bi)"))),
        }
    }
}

/// `[a, b, c]` → `[ab, bc]`; sentences shorter than two characters vanish.
pub fn to_bigrams(sentences: &[Vec<char>]) -> Vec<Vec<String>> {
    sentences
        .iter()
        .filter(|s| s.len() >= 2)
        .map(|s| s.windows(2).map(|w| w.iter().collect()).collect())
        .collect()
}

pub fn to_unigrams(sentences: &[Vec<char>]) -> Vec<Vec<String>> {
    sentences
        .iter()
        .map(|s| s.iter().map(|c| c.to_string()).collect())
        .collect()
}

pub fn tokenize(sentences: &[Vec<char>], gram: Gram) -> Vec<Vec<String>> {
    match gram {
        Gram::Uni => to_unigrams(sentences),
        Gram::Bi => to_bigrams(sentences),
    }
}

/// Cumulative distribution over ids, sampled by inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramSampler {
    cdf: Vec<f64>,
}

impl UnigramSampler {
    /// Distribution proportional to `weight^power`. Zero weights are never drawn.
    /// Falls back to uniform if every weight is zero.
    pub fn from_weights(weights: &[f64], power: f64) -> Self {
        assert!(!weights.is_empty(), "sampler needs at least one id");
        let mut raw: Vec<f64> = weights
            .iter()
            .map(|&w| if w > 0.0 { w.powf(power) } else { 0.0 })
            .collect();
        let mut total: f64 = raw.iter().sum();
        if total <= 0.0 {
            raw.iter_mut().for_each(|w| *w = 1.0);
            total = raw.len() as f64;
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = raw
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        // Pin the tail so a draw of u close to 1 can never fall past the end.
        let last_positive = raw.iter().rposition(|&w| w > 0.0).expect("some weight is positive");
        for c in &mut cdf[last_positive..] {
            *c = 1.0;
        }
        UnigramSampler { cdf }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn probability(&self, id: usize) -> f64 {
        let prev = if id == 0 { 0.0 } else { self.cdf[id - 1] };
        self.cdf[id] - prev
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as u32
    }
}

/// Token ↔ id mapping with counts, ids ordered by descending count and then
/// by token (code-point order).
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    counts: Vec<u64>,
    sampler: UnigramSampler,
    power: f64,
}

impl Vocabulary {
    pub fn build(sentences: &[Vec<String>], min_count: u64, power: f64) -> Result<Self> {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for token in sentences.iter().flatten() {
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
        Self::from_counts(counts.into_iter().map(|(t, c)| (t.to_string(), c)), min_count, power)
    }

    pub fn from_counts<I>(counts: I, min_count: u64, power: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        if min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut kept: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let (tokens, counts): (Vec<String>, Vec<u64>) = kept.into_iter().unzip();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        let sampler = UnigramSampler::from_weights(&weights, power);
        Ok(Vocabulary {
            tokens,
            index,
            counts,
            sampler,
            power,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn sampler(&self) -> &UnigramSampler {
        &self.sampler
    }

    /// Exponent applied to counts in the negative-sampling distribution.
    pub fn ns_power(&self) -> f64 {
        self.power
    }

    pub fn ns_probability(&self, id: u32) -> f64 {
        self.sampler.probability(id as usize)
    }

    pub fn sample_negative<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.sampler.sample(rng)
    }

    /// Probability of keeping one occurrence of `id` under frequent-token
    /// subsampling with threshold `t`; 1 when `t` is 0.
    pub fn keep_probability(&self, id: u32, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let threshold = t * self.total_count() as f64;
        let count = self.count(id) as f64;
        (((count / threshold).sqrt() + 1.0) * threshold / count).min(1.0)
    }

    /// Writes `<token> <count>` lines in id order.
    pub fn write_counts<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            writeln!(w, "{t} {c}")?;
        }
        Ok(())
    }

    pub fn read_counts<R: BufRead>(r: R, origin: &str, min_count: u64, power: f64) -> Result<Self> {
        let mut counts = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [token, count] = fields.as_slice() else {
                return Err(Error::parse(origin, idx + 1, "expected `<token> <count>`"));
            };
            let count = count
                .parse::<u64>()
                .map_err(|e| Error::parse(origin, idx + 1, format!("bad count: {e}")))?;
            counts.push((token.to_string(), count));
        }
        Self::from_counts(counts, min_count, power)
    }
}

/// Sentences of vocabulary ids. Tokens missing from the vocabulary are
/// deleted, so context windows close over the gap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    sentences: Vec<Vec<u32>>,
    gram: Gram,
}

impl TokenStream {
    pub fn encode(sentences: &[Vec<String>], vocab: &Vocabulary, gram: Gram) -> Self {
        let sentences = sentences
            .iter()
            .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect::<Vec<_>>())
            .filter(|s: &Vec<u32>| !s.is_empty())
            .collect();
        TokenStream { sentences, gram }
    }

    pub fn from_ids(sentences: Vec<Vec<u32>>, gram: Gram) -> Self {
        TokenStream { sentences, gram }
    }

    pub fn sentences(&self) -> &[Vec<u32>] {
        &self.sentences
    }

    pub fn gram(&self) -> Gram {
        self.gram
    }

    /// Total token count N.
    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Builds the vocabulary for `sentences` and the stream with excluded
/// tokens deleted.
pub fn build_vocab(sentences: &[Vec<String>], gram: Gram, min_count: u64) -> Result<(Vocabulary, TokenStream)> {
    let vocab = Vocabulary::build(sentences, min_count, NS_POWER)?;
    let stream = TokenStream::encode(sentences, &vocab, gram);
    Ok((vocab, stream))
}

pub fn sample_negative<R: Rng + ?Sized>(vocab: &Vocabulary, rng: &mut R) -> u32 {
    vocab.sample_negative(rng)
}
