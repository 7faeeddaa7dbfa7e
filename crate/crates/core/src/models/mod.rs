//! CBOW, SkipGram, charCBOW and charSkipGram trained with negative sampling.
//!
//! Every step is split into three phases so gradients can be checked
//! against finite differences in isolation:
//!
//! 1. [`Model::draw_negatives`] samples noise targets for each prediction,
//! 2. [`Model::loss_and_grads`] evaluates the example loss and its exact
//!    gradient at the current parameters,
//! 3. [`Gradients::apply`] performs the SGD update.

mod objective;
mod tables;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::corpus::{Gram, UnigramSampler, Vocabulary};
use crate::error::{Error, Result};
use crate::lexicon::{ComponentLexicon, PAD, UNK};
use crate::rng;

pub use objective::{ns_loss_and_grads, sigmoid, softplus, NsOutcome};
pub use tables::{EmbeddingTables, Gradients, Matrix, Table};

/// Number of extra draws allowed when a negative collides with its target.
pub const MAX_RESAMPLE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Cbow,
    SkipGram,
    CharCbow,
    CharSkipGram,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Cbow, Variant::SkipGram, Variant::CharCbow, Variant::CharSkipGram];

    pub fn uses_components(self) -> bool {
        matches!(self, Variant::CharCbow | Variant::CharSkipGram)
    }

    /// CBOW-style variants predict the center from its context.
    pub fn is_cbow_family(self) -> bool {
        matches!(self, Variant::Cbow | Variant::CharCbow)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Cbow => "cbow",
            Variant::SkipGram => "skipgram",
            Variant::CharCbow => "charcbow",
            Variant::CharSkipGram => "charskipgram",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cbow" => Ok(Variant::Cbow),
            "skipgram" => Ok(Variant::SkipGram),
            "charcbow" => Ok(Variant::CharCbow),
            "charskipgram" => Ok(Variant::CharSkipGram),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected cbow|skipgram|charcbow|charskipgram)"
            ))),
        }
    }
}

/// How CBOW merges context vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContextCombine {
    Average,
    Sum,
}

impl fmt::Display for ContextCombine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextCombine::Average => "average",
            ContextCombine::Sum => "sum",
        })
    }
}

impl FromStr for ContextCombine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(ContextCombine::Average),
            "sum" => Ok(ContextCombine::Sum),
            other => Err(Error::Config(format!("unknown context combine '{other}' (expected average|sum)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub variant: Variant,
    pub gram: Gram,
    /// Embedding dimension K.
    pub dim: usize,
    /// Context radius T.
    pub window: usize,
    /// Components kept per character, M.
    pub components: usize,
    pub negatives: usize,
    pub combine: ContextCombine,
}

impl ModelConfig {
    pub fn new(variant: Variant, gram: Gram) -> Self {
        ModelConfig {
            variant,
            gram,
            dim: 50,
            window: 2,
            components: 2,
            negatives: 5,
            combine: ContextCombine::Average,
        }
    }

    /// Components per token, L_c: M for single characters, 2M for pairs.
    pub fn component_slots(&self) -> usize {
        self.components * self.gram.width()
    }

    /// Context slots per example, 2T.
    pub fn context_slots(&self) -> usize {
        2 * self.window
    }

    /// Width of one `char_out` row: 2T(1+L_c)K for charCBOW, K otherwise.
    pub fn output_width(&self) -> usize {
        match self.variant {
            Variant::CharCbow => self.context_slots() * (1 + self.component_slots()) * self.dim,
            _ => self.dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.dim >= 1, "dim must be at least 1"),
            (self.window >= 1, "window must be at least 1"),
            (self.components >= 1, "components must be at least 1"),
            (self.negatives >= 1, "negatives must be at least 1"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config(msg.to_string())),
            None => Ok(()),
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(Variant::CharCbow, Gram::Uni)
    }
}

/// Component identifiers ↔ row ids. Id 0 is [`PAD`], id 1 is [`UNK`], the
/// rest follow in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentVocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl ComponentVocab {
    pub const PAD_ID: u32 = 0;
    pub const UNK_ID: u32 = 1;

    pub fn from_lexicon(lexicon: &ComponentLexicon) -> Self {
        let mut names = vec![PAD.to_string(), UNK.to_string()];
        names.extend(lexicon.component_inventory());
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
        ComponentVocab { names, index }
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Component ids of a token, length L_c. A bigram concatenates the lists of
/// its two characters, each radical first.
pub fn token_components(
    token: &str,
    gram: Gram,
    lexicon: &ComponentLexicon,
    m: usize,
    vocab: &ComponentVocab,
) -> Vec<u32> {
    let chars: Vec<char> = token.chars().collect();
    debug_assert_eq!(chars.len(), gram.width(), "token '{token}' does not match gram {gram}");
    chars
        .iter()
        .take(gram.width())
        .flat_map(|&c| lexicon.components_of(c, m).as_slice().to_vec())
        .map(|name| vocab.id(&name).unwrap_or(ComponentVocab::UNK_ID))
        .collect()
}

/// Component rows, per-token component ids and the component noise
/// distribution of a char* model.
#[derive(Debug, Clone)]
pub struct ComponentSpace {
    pub vocab: ComponentVocab,
    per_token: Vec<u32>,
    slots: usize,
    sampler: UnigramSampler,
}

impl ComponentSpace {
    /// Component noise distribution: occurrence counts over the corpus raised
    /// to the vocabulary's sampling power. PAD is never drawn.
    pub fn build(vocab: &Vocabulary, lexicon: &ComponentLexicon, gram: Gram, m: usize) -> Self {
        let comp_vocab = ComponentVocab::from_lexicon(lexicon);
        let slots = m * gram.width();
        let mut per_token = Vec::with_capacity(vocab.len() * slots);
        let mut weights = vec![0.0; comp_vocab.len()];
        for (id, token) in vocab.tokens().iter().enumerate() {
            let comps = token_components(token, gram, lexicon, m, &comp_vocab);
            let count = vocab.count(id as u32) as f64;
            for &c in &comps {
                if c != ComponentVocab::PAD_ID {
                    weights[c as usize] += count;
                }
            }
            per_token.extend(comps);
        }
        let sampler = UnigramSampler::from_weights(&weights, vocab.ns_power());
        ComponentSpace {
            vocab: comp_vocab,
            per_token,
            slots,
            sampler,
        }
    }

    /// Space over explicit per-token component ids (`per_token.len()` must be
    /// a multiple of `slots`).
    pub fn from_parts(vocab: ComponentVocab, per_token: Vec<u32>, slots: usize, sampler: UnigramSampler) -> Self {
        assert!(slots > 0 && per_token.len() % slots == 0, "per-token ids do not tile");
        ComponentSpace {
            vocab,
            per_token,
            slots,
            sampler,
        }
    }

    pub fn of(&self, token: u32) -> &[u32] {
        let start = token as usize * self.slots;
        &self.per_token[start..start + self.slots]
    }

    pub fn sampler(&self) -> &UnigramSampler {
        &self.sampler
    }
}

/// One context position: the token and its L_c component ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextSlot<'a> {
    pub token: u32,
    pub components: &'a [u32],
}

/// A center token with its 2T positional context slots, ordered
/// −T..−1, +1..+T. Slots past a sentence edge are `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample<'a> {
    pub center: u32,
    pub context: Vec<Option<ContextSlot<'a>>>,
}

impl<'a> TrainingExample<'a> {
    pub fn present(&self) -> impl Iterator<Item = &ContextSlot<'a>> {
        self.context.iter().flatten()
    }

    pub fn has_context(&self) -> bool {
        self.context.iter().any(Option::is_some)
    }
}

/// Negative samples for each prediction of an example, in prediction order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NegativeDraws(pub Vec<Vec<u32>>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Prediction {
    table: Table,
    target: u32,
}

/// Concatenation of each slot's token vector followed by its L_c component
/// vectors; absent slots contribute zero blocks.
pub fn charcbow_context_vector(example: &TrainingExample, tables: &EmbeddingTables, config: &ModelConfig) -> Result<Vec<f64>> {
    let k = config.dim;
    let lc = config.component_slots();
    let block = (1 + lc) * k;
    if example.context.len() != config.context_slots() {
        return Err(Error::Dimension(format!(
            "example has {} context slots, config expects {}",
            example.context.len(),
            config.context_slots()
        )));
    }
    let comp_in = tables
        .comp_in
        .as_ref()
        .ok_or_else(|| Error::Dimension("charCBOW needs a comp_in table".into()))?;
    let mut h = vec![0.0; config.context_slots() * block];
    for (s, slot) in example.context.iter().enumerate() {
        let Some(slot) = slot else { continue };
        if slot.components.len() != lc {
            return Err(Error::Dimension(format!(
                "context slot {s} has {} components, config expects {lc}",
                slot.components.len()
            )));
        }
        let base = s * block;
        tables.char_in.read_row_into(slot.token as usize, &mut h[base..base + k]);
        for (j, &c) in slot.components.iter().enumerate() {
            let at = base + (1 + j) * k;
            comp_in.read_row_into(c as usize, &mut h[at..at + k]);
        }
    }
    Ok(h)
}

/// Parameters and noise distributions of one embedding model.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    tables: EmbeddingTables,
    char_sampler: UnigramSampler,
    components: Option<ComponentSpace>,
}

impl Model {
    /// Fresh model: input tables uniform in ±0.5/K from the `init` sub-stream
    /// of `seed`, output tables zero.
    pub fn new(config: ModelConfig, vocab: &Vocabulary, lexicon: Option<&ComponentLexicon>, seed: u64) -> Result<Self> {
        config.validate()?;
        let components = match (config.variant.uses_components(), lexicon) {
            (true, Some(lex)) => Some(ComponentSpace::build(vocab, lex, config.gram, config.components)),
            (true, None) => {
                return Err(Error::Config(format!("model {} requires a component lexicon", config.variant)))
            }
            (false, _) => None,
        };

        let mut rng = rng::substream(seed, rng::INIT);
        let k = config.dim;
        let half = 0.5 / k as f64;
        let char_in = Matrix::uniform(vocab.len(), k, half, &mut rng);
        let n_comp = components.as_ref().map_or(0, |c| c.vocab.len());
        let comp_in = (config.variant == Variant::CharCbow).then(|| Matrix::uniform(n_comp, k, half, &mut rng));
        let char_out = Matrix::zeros(vocab.len(), config.output_width());
        let comp_out = (config.variant == Variant::CharSkipGram).then(|| Matrix::zeros(n_comp, k));

        Ok(Model {
            config,
            tables: EmbeddingTables {
                char_in,
                comp_in,
                char_out,
                comp_out,
            },
            char_sampler: vocab.sampler().clone(),
            components,
        })
    }

    /// Model over caller-supplied tables; shapes are checked against `config`.
    pub fn from_parts(
        config: ModelConfig,
        tables: EmbeddingTables,
        char_sampler: UnigramSampler,
        components: Option<ComponentSpace>,
    ) -> Result<Self> {
        config.validate()?;
        let v = tables.char_in.rows();
        let shape_ok = tables.char_in.cols() == config.dim
            && tables.char_out.rows() == v
            && tables.char_out.cols() == config.output_width()
            && char_sampler.len() == v;
        if !shape_ok {
            return Err(Error::Dimension("table shapes do not match the model config".into()));
        }
        if config.variant.uses_components() {
            let space = components
                .as_ref()
                .ok_or_else(|| Error::Config(format!("model {} requires a component space", config.variant)))?;
            if space.slots != config.component_slots() {
                return Err(Error::Dimension("component space slot count mismatch".into()));
            }
            let comp_table = match config.variant {
                Variant::CharCbow => tables.comp_in.as_ref(),
                _ => tables.comp_out.as_ref(),
            };
            if comp_table.is_none_or(|m| m.rows() != space.vocab.len() || m.cols() != config.dim) {
                return Err(Error::Dimension("component table shape mismatch".into()));
            }
        }
        Ok(Model {
            config,
            tables,
            char_sampler,
            components,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tables(&self) -> &EmbeddingTables {
        &self.tables
    }

    pub fn into_tables(self) -> EmbeddingTables {
        self.tables
    }

    pub fn component_space(&self) -> Option<&ComponentSpace> {
        self.components.as_ref()
    }

    /// Component ids of `token`; empty for models without components.
    pub fn token_components(&self, token: u32) -> &[u32] {
        self.components.as_ref().map_or(&[], |c| c.of(token))
    }

    /// Example centered at `sentence[pos]` with the full ±T window clipped
    /// at the sentence edges.
    pub fn example<'a>(&'a self, sentence: &[u32], pos: usize) -> TrainingExample<'a> {
        let t = self.config.window as isize;
        let context = (-t..=t)
            .filter(|&d| d != 0)
            .map(|d| {
                let j = pos as isize + d;
                (j >= 0 && (j as usize) < sentence.len()).then(|| {
                    let token = sentence[j as usize];
                    ContextSlot {
                        token,
                        components: self.token_components(token),
                    }
                })
            })
            .collect();
        TrainingExample {
            center: sentence[pos],
            context,
        }
    }

    fn predictions(&self, example: &TrainingExample) -> Vec<Prediction> {
        if !example.has_context() {
            return Vec::new();
        }
        match self.config.variant {
            Variant::Cbow | Variant::CharCbow => vec![Prediction {
                table: Table::CharOut,
                target: example.center,
            }],
            Variant::SkipGram => example
                .present()
                .map(|s| Prediction {
                    table: Table::CharOut,
                    target: s.token,
                })
                .collect(),
            Variant::CharSkipGram => {
                let mut out = Vec::new();
                for slot in example.present() {
                    out.push(Prediction {
                        table: Table::CharOut,
                        target: slot.token,
                    });
                    out.extend(
                        slot.components
                            .iter()
                            .filter(|&&c| c != ComponentVocab::PAD_ID)
                            .map(|&c| Prediction {
                                table: Table::CompOut,
                                target: c,
                            }),
                    );
                }
                out
            }
        }
    }

    /// Number of positive predictions the example contributes.
    pub fn prediction_count(&self, example: &TrainingExample) -> usize {
        self.predictions(example).len()
    }

    fn sampler_for(&self, table: Table) -> &UnigramSampler {
        match table {
            Table::CompOut => self
                .components
                .as_ref()
                .expect("component predictions need a component space")
                .sampler(),
            _ => &self.char_sampler,
        }
    }

    /// Draws `negatives` noise ids per prediction. A draw equal to the target
    /// is retried up to [`MAX_RESAMPLE`] times, then dropped.
    pub fn draw_negatives<R: Rng + ?Sized>(&self, example: &TrainingExample, rng: &mut R) -> NegativeDraws {
        let draws = self
            .predictions(example)
            .iter()
            .map(|p| {
                let sampler = self.sampler_for(p.table);
                (0..self.config.negatives)
                    .filter_map(|_| (0..=MAX_RESAMPLE).map(|_| sampler.sample(rng)).find(|&n| n != p.target))
                    .collect()
            })
            .collect();
        NegativeDraws(draws)
    }

    /// Example loss and its gradient at the current parameters.
    pub fn loss_and_grads(&self, example: &TrainingExample, draws: &NegativeDraws) -> (f64, Gradients) {
        let mut grads = Gradients::new();
        let predictions = self.predictions(example);
        if predictions.is_empty() {
            return (0.0, grads);
        }
        assert_eq!(predictions.len(), draws.0.len(), "negative draws do not match predictions");
        let k = self.config.dim;
        let t = &self.tables;

        let loss = match self.config.variant {
            Variant::Cbow => {
                let present: Vec<u32> = example.present().map(|s| s.token).collect();
                let mut h = vec![0.0; k];
                let mut row = vec![0.0; k];
                for &c in &present {
                    t.char_in.read_row_into(c as usize, &mut row);
                    h.iter_mut().zip(&row).for_each(|(a, b)| *a += b);
                }
                let scale = match self.config.combine {
                    ContextCombine::Average => 1.0 / present.len() as f64,
                    ContextCombine::Sum => 1.0,
                };
                h.iter_mut().for_each(|x| *x *= scale);
                let mut gh = vec![0.0; k];
                let loss = objective::accumulate(&h, example.center, &draws.0[0], &t.char_out, Table::CharOut, &mut grads, &mut gh);
                for &c in &present {
                    grads.add(Table::CharIn, c, &gh, scale);
                }
                loss
            }
            Variant::CharCbow => {
                let h = charcbow_context_vector(example, t, &self.config).expect("example matches model config");
                let mut gh = vec![0.0; h.len()];
                let loss = objective::accumulate(&h, example.center, &draws.0[0], &t.char_out, Table::CharOut, &mut grads, &mut gh);
                let block = (1 + self.config.component_slots()) * k;
                for (s, slot) in example.context.iter().enumerate() {
                    let Some(slot) = slot else { continue };
                    let base = s * block;
                    grads.add(Table::CharIn, slot.token, &gh[base..base + k], 1.0);
                    for (j, &c) in slot.components.iter().enumerate() {
                        let at = base + (1 + j) * k;
                        grads.add(Table::CompIn, c, &gh[at..at + k], 1.0);
                    }
                }
                loss
            }
            Variant::SkipGram | Variant::CharSkipGram => {
                let v = t.char_in.row(example.center as usize);
                let mut gv = vec![0.0; k];
                let mut loss = 0.0;
                for (p, negs) in predictions.iter().zip(&draws.0) {
                    loss += objective::accumulate(&v, p.target, negs, t.table(p.table), p.table, &mut grads, &mut gv);
                }
                grads.add(Table::CharIn, example.center, &gv, 1.0);
                loss
            }
        };
        (loss, grads)
    }

    pub fn loss(&self, example: &TrainingExample, draws: &NegativeDraws) -> f64 {
        self.loss_and_grads(example, draws).0
    }

    /// One SGD step on `example`; returns the loss before the update.
    pub fn step<R: Rng + ?Sized>(&self, example: &TrainingExample, lr: f64, rng: &mut R) -> f64 {
        let draws = self.draw_negatives(example, rng);
        let (loss, grads) = self.loss_and_grads(example, &draws);
        grads.apply(&self.tables, lr);
        loss
    }

    pub fn cbow_step<R: Rng + ?Sized>(&self, example: &TrainingExample, lr: f64, rng: &mut R) -> f64 {
        debug_assert_eq!(self.config.variant, Variant::Cbow);
        self.step(example, lr, rng)
    }

    pub fn skipgram_step<R: Rng + ?Sized>(&self, example: &TrainingExample, lr: f64, rng: &mut R) -> f64 {
        debug_assert_eq!(self.config.variant, Variant::SkipGram);
        self.step(example, lr, rng)
    }

    pub fn charcbow_step<R: Rng + ?Sized>(&self, example: &TrainingExample, lr: f64, rng: &mut R) -> f64 {
        debug_assert_eq!(self.config.variant, Variant::CharCbow);
        self.step(example, lr, rng)
    }

    pub fn charskipgram_step<R: Rng + ?Sized>(&self, example: &TrainingExample, lr: f64, rng: &mut R) -> f64 {
        debug_assert_eq!(self.config.variant, Variant::CharSkipGram);
        self.step(example, lr, rng)
    }
}
