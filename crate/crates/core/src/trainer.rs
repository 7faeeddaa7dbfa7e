//! Epoch loop, learning-rate schedule, worker threads and embedding files.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Barrier, Mutex};
use std::thread;

use rand::Rng;

use crate::corpus::{Gram, TokenStream, Vocabulary, NS_POWER};
use crate::error::{Error, Result};
use crate::lexicon::ComponentLexicon;
use crate::models::{Model, ModelConfig, Variant};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_min: f64,
    pub min_count: u64,
    /// Frequent-token subsampling threshold; 0 disables it.
    pub subsample: f64,
    /// Exponent on counts for the noise distributions.
    pub ns_power: f64,
    pub workers: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(variant: Variant, gram: Gram) -> Self {
        let lr_start = Self::default_lr(variant);
        TrainConfig {
            model: ModelConfig::new(variant, gram),
            epochs: 5,
            lr_start,
            lr_min: lr_start * 1e-4,
            min_count: 10,
            subsample: 0.0,
            ns_power: NS_POWER,
            workers: 1,
            seed: 1,
        }
    }

    pub fn default_lr(variant: Variant) -> f64 {
        if variant.is_cbow_family() {
            0.05
        } else {
            0.025
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let checks = [
            (self.epochs >= 1, "epochs must be at least 1"),
            (self.lr_min >= 0.0, "lr_min must be non-negative"),
            (self.lr_start > self.lr_min, "lr_start must exceed lr_min"),
            (self.workers >= 1, "workers must be at least 1"),
            (self.min_count >= 1, "min_count must be at least 1"),
            (self.subsample >= 0.0 && self.subsample.is_finite(), "subsample must be a finite threshold >= 0"),
            (self.ns_power.is_finite(), "ns_power must be finite"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config(msg.to_string())),
            None => Ok(()),
        }
    }

    pub fn schedule(&self, stream: &TokenStream) -> LearningRate {
        LearningRate::new(self.lr_start, self.lr_min, (self.epochs * stream.num_tokens()) as u64)
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::new(Variant::CharCbow, Gram::Uni)
    }
}

/// Linear decay from `start` to `min` over `total` positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    pub start: f64,
    pub min: f64,
    pub total: u64,
}

impl LearningRate {
    pub fn new(start: f64, min: f64, total: u64) -> Self {
        LearningRate { start, min, total }
    }

    pub fn at(&self, position: u64) -> f64 {
        if self.total == 0 {
            return self.start;
        }
        if position >= self.total {
            return self.min;
        }
        let frac = position as f64 / self.total as f64;
        (self.start + (self.min - self.start) * frac).max(self.min)
    }
}

/// Tokenizes `sentences`, builds the vocabulary and encodes the stream using
/// the gram, min_count and sampling power of `cfg`.
pub fn prepare(sentences: &[Vec<char>], cfg: &TrainConfig) -> Result<(Vocabulary, TokenStream)> {
    let gram = cfg.model.gram;
    let tokens = crate::corpus::tokenize(sentences, gram);
    let vocab = Vocabulary::build(&tokens, cfg.min_count, cfg.ns_power)?;
    let stream = TokenStream::encode(&tokens, &vocab, gram);
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    Ok((vocab, stream))
}

/// Row vectors keyed by token.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
}

impl Embeddings {
    pub fn new(tokens: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != tokens.len() * dim {
            return Err(Error::Dimension(format!(
                "{} tokens of dimension {dim} need {} values, got {}",
                tokens.len(),
                tokens.len() * dim,
                data.len()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Dimension(format!("duplicate token '{t}'")));
            }
        }
        Ok(Embeddings {
            tokens,
            index,
            dim,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens.iter().enumerate().map(|(i, t)| (t.as_str(), self.row(i)))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Embeddings {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (token, v) in self.iter() {
            write!(w, "{token}")?;
            for x in v {
                write!(w, " {x:.8e}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn read<R: BufRead>(r: R, origin: &str) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (n, dim) = loop {
            match lines.next() {
                None => return Err(Error::EmptyInput { origin: origin.into() }),
                Some((i, line)) => {
                    let line = line.map_err(|e| Error::io(origin, e))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break parse_header(&line).ok_or_else(|| {
                        Error::parse(origin, i + 1, format!("expected header '<count> <dim>', found '{line}'"))
                    })?;
                }
            }
        };

        let mut tokens = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * dim);
        let mut last_line = 1;
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(origin, e))?;
            let lineno = i + 1;
            last_line = lineno;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            if tokens.len() == n {
                return Err(Error::parse(origin, lineno, format!("header declares {n} vectors but more follow")));
            }
            let before = data.len();
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(origin, lineno, format!("invalid number '{f}'")))?;
                data.push(v);
            }
            let got = data.len() - before;
            if got != dim {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("vector for '{token}' has {got} values, header declares {dim}"),
                ));
            }
            tokens.push(token.to_string());
        }
        if tokens.len() != n {
            return Err(Error::parse(
                origin,
                last_line,
                format!("header declares {n} vectors but {} were found", tokens.len()),
            ));
        }
        Embeddings::new(tokens, dim, data).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let n = it.next()?.parse().ok()?;
    let dim = it.next()?.parse().ok()?;
    it.next().is_none().then_some((n, dim))
}

/// Output of a training run: one vector per vocabulary token, plus component
/// vectors for char* models.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEmbeddings {
    pub vectors: Embeddings,
    /// `comp_in` rows for charCBOW, `comp_out` rows for charSkipGram.
    pub components: Option<Embeddings>,
    pub config: Option<TrainConfig>,
}

impl TrainedEmbeddings {
    pub fn from_model(model: &Model, vocab: &Vocabulary, config: Option<TrainConfig>) -> Result<Self> {
        let tables = model.tables();
        let vectors = Embeddings::new(vocab.tokens().to_vec(), model.config().dim, tables.char_in.to_vec())?;
        let comp_table = match model.config().variant {
            Variant::CharCbow => tables.comp_in.as_ref(),
            Variant::CharSkipGram => tables.comp_out.as_ref(),
            _ => None,
        };
        let components = match (comp_table, model.component_space()) {
            (Some(m), Some(space)) => Some(Embeddings::new(space.vocab.names().to_vec(), m.cols(), m.to_vec())?),
            _ => None,
        };
        Ok(TrainedEmbeddings {
            vectors,
            components,
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token)
    }
}

/// `dir/name.vec` → `dir/name.components.vec`.
pub fn components_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.components.{}", ext.to_string_lossy()),
        None => format!("{stem}.components"),
    };
    path.with_file_name(name)
}

fn write_file(path: &Path, emb: &Embeddings) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    emb.write(BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Embeddings> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Embeddings::read(BufReader::new(file), &path.display().to_string())
}

/// Writes token vectors to `path` and component vectors, if any, to
/// [`components_path`]`(path)`.
pub fn save_embeddings(emb: &TrainedEmbeddings, path: &Path) -> Result<()> {
    write_file(path, &emb.vectors)?;
    if let Some(c) = &emb.components {
        write_file(&components_path(path), c)?;
    }
    Ok(())
}

/// Reads `path` and its component sibling when one exists.
pub fn load_embeddings(path: &Path) -> Result<TrainedEmbeddings> {
    let vectors = read_file(path)?;
    let sibling = components_path(path);
    let components = if sibling.is_file() {
        Some(read_file(&sibling)?)
    } else {
        None
    };
    Ok(TrainedEmbeddings {
        vectors,
        components,
        config: None,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainOptions {
    /// Embeddings are written here as `epoch-<n>.vec` after every epoch.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Mean loss per example with a non-empty context, one entry per epoch.
    pub epoch_losses: Vec<f64>,
    pub epoch_examples: Vec<u64>,
}

impl TrainingReport {
    pub fn first_loss(&self) -> f64 {
        self.epoch_losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().expect("at least one epoch")
    }
}

pub fn train(
    stream: &TokenStream,
    vocab: &Vocabulary,
    lexicon: Option<&ComponentLexicon>,
    cfg: &TrainConfig,
) -> Result<(TrainedEmbeddings, TrainingReport)> {
    train_with(stream, vocab, lexicon, cfg, &TrainOptions::default())
}

pub fn train_with(
    stream: &TokenStream,
    vocab: &Vocabulary,
    lexicon: Option<&ComponentLexicon>,
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<(TrainedEmbeddings, TrainingReport)> {
    cfg.validate()?;
    if stream.is_empty() || stream.num_tokens() == 0 {
        return Err(Error::EmptyStream);
    }
    if stream.gram() != cfg.model.gram {
        return Err(Error::Config(format!(
            "stream is {}-gram but the model is configured for {}",
            stream.gram(),
            cfg.model.gram
        )));
    }
    if let Some(bad) = stream.sentences().iter().flatten().find(|&&id| id as usize >= vocab.len()) {
        return Err(Error::Config(format!("token id {bad} is outside the vocabulary")));
    }
    if let Some(dir) = &opts.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let owned = Model::new(cfg.model, vocab, lexicon, cfg.seed)?;
    let model = &owned;
    let schedule = cfg.schedule(stream);
    let workers = cfg.workers.min(stream.sentences().len()).max(1);
    let shards: Vec<Vec<&[u32]>> = (0..workers)
        .map(|w| stream.sentences().iter().skip(w).step_by(workers).map(Vec::as_slice).collect())
        .collect();

    let position = AtomicU64::new(0);
    let barrier = Barrier::new(workers);
    let stop = AtomicBool::new(false);
    let failure: Mutex<Option<Error>> = Mutex::new(None);

    let per_worker: Vec<Vec<(f64, u64)>> = thread::scope(|s| {
        let handles: Vec<_> = shards
            .iter()
            .enumerate()
            .map(|(w, shard)| {
                let ctx = EpochContext {
                    model,
                    vocab,
                    cfg,
                    schedule,
                    position: &position,
                };
                let (barrier, stop, failure) = (&barrier, &stop, &failure);
                s.spawn(move || {
                    let mut rng = rng::substream(cfg.seed, &rng::worker(w));
                    let mut stats = Vec::with_capacity(cfg.epochs);
                    for epoch in 1..=cfg.epochs {
                        stats.push(ctx.run_shard(shard, &mut rng));
                        barrier.wait();
                        if w == 0 {
                            if let Err(e) = end_of_epoch(model, vocab, cfg, epoch, opts) {
                                *failure.lock().expect("failure lock") = Some(e);
                                stop.store(true, Ordering::SeqCst);
                            }
                        }
                        barrier.wait();
                        if stop.load(Ordering::SeqCst) {
                            break;
                        }
                    }
                    stats
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e);
    }

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut epoch_examples = Vec::with_capacity(cfg.epochs);
    for e in 0..cfg.epochs {
        let (sum, n) = per_worker
            .iter()
            .map(|s| s[e])
            .fold((0.0, 0u64), |(a, b), (c, d)| (a + c, b + d));
        epoch_losses.push(if n == 0 { 0.0 } else { sum / n as f64 });
        epoch_examples.push(n);
    }
    let embeddings = TrainedEmbeddings::from_model(model, vocab, Some(*cfg))?;
    Ok((
        embeddings,
        TrainingReport {
            epoch_losses,
            epoch_examples,
        },
    ))
}

struct EpochContext<'a> {
    model: &'a Model,
    vocab: &'a Vocabulary,
    cfg: &'a TrainConfig,
    schedule: LearningRate,
    position: &'a AtomicU64,
}

impl EpochContext<'_> {
    /// One pass over `shard`; returns (loss sum, examples with context).
    fn run_shard<R: Rng>(&self, shard: &[&[u32]], rng: &mut R) -> (f64, u64) {
        let mut loss = 0.0;
        let mut examples = 0;
        let mut kept = Vec::new();
        for sentence in shard {
            let base = self.position.fetch_add(sentence.len() as u64, Ordering::Relaxed);
            let sentence: &[u32] = if self.cfg.subsample > 0.0 {
                kept.clear();
                kept.extend(sentence.iter().copied().filter(|&id| {
                    let p = self.vocab.keep_probability(id, self.cfg.subsample);
                    p >= 1.0 || rng.gen::<f64>() < p
                }));
                &kept
            } else {
                sentence
            };
            for pos in 0..sentence.len() {
                let example = self.model.example(sentence, pos);
                if !example.has_context() {
                    continue;
                }
                let lr = self.schedule.at(base + pos as u64);
                loss += self.model.step(&example, lr, rng);
                examples += 1;
            }
        }
        (loss, examples)
    }
}

fn end_of_epoch(model: &Model, vocab: &Vocabulary, cfg: &TrainConfig, epoch: usize, opts: &TrainOptions) -> Result<()> {
    if let Some(table) = model.tables().first_non_finite() {
        return Err(Error::NonFinite { table, epoch });
    }
    log::info!("epoch {epoch}/{} done", cfg.epochs);
    if let Some(dir) = &opts.checkpoint_dir {
        let emb = TrainedEmbeddings::from_model(model, vocab, Some(*cfg))?;
        save_embeddings(&emb, &dir.join(format!("epoch-{epoch}.vec")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let s = LearningRate::new(0.025, 0.0000025, 1000);
        assert_eq!(s.at(0), 0.025);
        assert!((s.at(500) - (0.025 + (0.0000025 - 0.025) * 0.5)).abs() < 1e-15);
        assert_eq!(s.at(1000), 0.0000025);
        assert_eq!(s.at(5000), 0.0000025);
    }

    #[test]
    fn defaults_follow_variant() {
        let sg = TrainConfig::new(Variant::SkipGram, Gram::Uni);
        let cb = TrainConfig::new(Variant::CharCbow, Gram::Bi);
        assert_eq!(sg.lr_start, 0.025);
        assert_eq!(cb.lr_start, 0.05);
        assert!((cb.lr_min - 0.05e-4).abs() < 1e-18);
        assert_eq!(sg.epochs, 5);
        assert_eq!(sg.subsample, 0.0);
    }

    #[test]
    fn invalid_configs() {
        let base = TrainConfig::default();
        let bad = [
            TrainConfig { epochs: 0, ..base },
            TrainConfig { workers: 0, ..base },
            TrainConfig { lr_min: base.lr_start, ..base },
            TrainConfig { lr_min: -1.0, lr_start: 0.1, ..base },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
        base.validate().unwrap();
    }

    #[test]
    fn components_path_keeps_extension() {
        assert_eq!(components_path(Path::new("out/a.vec")), PathBuf::from("out/a.components.vec"));
        assert_eq!(components_path(Path::new("emb")), PathBuf::from("emb.components"));
    }

    #[test]
    fn text_format_round_trip() {
        let e = Embeddings::new(vec!["池".into(), "水".into()], 2, vec![0.1, -2.5e-7, 1.0 / 3.0, 12345.678]).unwrap();
        let mut buf = Vec::new();
        e.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("2 2\n池 "));
        let back = Embeddings::read(&buf[..], "mem").unwrap();
        assert_eq!(back.tokens(), e.tokens());
        for (a, b) in back.data.iter().zip(&e.data) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn count_mismatch_is_reported_with_line() {
        let err = Embeddings::read("3 2\na 1 2\nb 3 4\n".as_bytes(), "f.vec").unwrap_err();
        assert!(err.to_string().starts_with("f.vec:3:"), "{err}");
        let err = Embeddings::read("1 2\na 1 2\nb 3 4\n".as_bytes(), "f.vec").unwrap_err();
        assert!(err.to_string().starts_with("f.vec:3:"), "{err}");
    }

    #[test]
    fn dim_mismatch_is_reported_with_line() {
        let err = Embeddings::read("2 3\na 1 2 3\nb 3 4\n".as_bytes(), "f.vec").unwrap_err();
        assert!(err.to_string().starts_with("f.vec:3:"), "{err}");
        let err = Embeddings::read("oops\n".as_bytes(), "f.vec").unwrap_err();
        assert!(err.to_string().starts_with("f.vec:1:"), "{err}");
        let err = Embeddings::read("1 1\na x\n".as_bytes(), "f.vec").unwrap_err();
        assert!(err.to_string().contains("invalid number"), "{err}");
    }
}
