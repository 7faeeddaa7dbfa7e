//! `hanzi-embed`: lexicon inspection, corpus preprocessing, training and
//! evaluation of component-enhanced character embeddings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hanzi_embed::corpus::{self, Gram, Vocabulary};
use hanzi_embed::eval::{
    classification_table, eval_classify, eval_similarity, similarity_table, BigramSource, ClassificationDataset,
    ClassifyConfig, Composition, LogRegConfig, SimilarityDataset, TitleFeatures, TitleMode,
};
use hanzi_embed::lexicon::{ComponentLexicon, VariantTable};
use hanzi_embed::manifest::RunManifest;
use hanzi_embed::models::{ContextCombine, Variant};
use hanzi_embed::trainer::{self, TrainConfig, TrainOptions};

#[derive(Debug, Parser)]
#[command(name = "hanzi-embed", version, about = "Component-enhanced Chinese character embeddings")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true, env = "HANZI_EMBED_VERBOSE")]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inspect a component lexicon.
    Lexicon(LexiconArgs),
    /// Clean a raw corpus into one sentence of Chinese characters per line.
    Preprocess(PreprocessArgs),
    /// Train embeddings.
    Train(TrainArgs),
    /// Word-similarity evaluation (Spearman's rho per category).
    EvalSim(EvalSimArgs),
    /// Title classification with one-vs-rest logistic regression.
    EvalClassify(EvalClassifyArgs),
}

#[derive(Debug, Args)]
struct LexiconArgs {
    /// Lexicon file (`char component...` per line).
    #[arg(long, global = true, env = "HANZI_EMBED_LEXICON")]
    lexicon: Option<PathBuf>,

    /// Extra variant rows (`variant original` per line) that take precedence
    /// over the built-in table.
    #[arg(long, global = true, env = "HANZI_EMBED_VARIANTS")]
    variants: Option<PathBuf>,

    #[command(subcommand)]
    action: LexiconAction,
}

#[derive(Debug, Subcommand)]
enum LexiconAction {
    /// Print the components of one character; exits 2 when it has no entry.
    Lookup { character: String },
    /// Entry count and component-count histogram.
    Stats,
    /// Print the original form of a component.
    Normalize { component: String },
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    corpus: PathBuf,

    /// Where to write the cleaned corpus; stdout when omitted.
    #[arg(short, long, env = "HANZI_EMBED_OUTPUT")]
    output: Option<PathBuf>,

    /// Also write token counts (`token count` per line) for `--gram`.
    #[arg(long, env = "HANZI_EMBED_COUNTS")]
    counts: Option<PathBuf>,

    #[arg(long, default_value = "uni", env = "HANZI_EMBED_GRAM")]
    gram: Gram,

    #[arg(long, default_value_t = 1, env = "HANZI_EMBED_MIN_COUNT")]
    min_count: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Raw UTF-8 corpus. May be omitted with `--from-manifest`.
    corpus: Option<PathBuf>,

    /// Embedding output file; components go to `<stem>.components.<ext>`.
    #[arg(short, long, env = "HANZI_EMBED_OUTPUT")]
    output: PathBuf,

    /// Manifest path [default: `<stem>.manifest` next to the output].
    #[arg(long, env = "HANZI_EMBED_MANIFEST")]
    manifest: Option<PathBuf>,

    /// Start from the configuration and inputs recorded in a manifest;
    /// explicit flags still take precedence.
    #[arg(long, env = "HANZI_EMBED_FROM_MANIFEST")]
    from_manifest: Option<PathBuf>,

    /// cbow | skipgram | charcbow | charskipgram [default: charcbow]
    #[arg(long, env = "HANZI_EMBED_MODEL")]
    model: Option<Variant>,

    /// uni | bi [default: uni]
    #[arg(long, env = "HANZI_EMBED_GRAM")]
    gram: Option<Gram>,

    /// Embedding dimension K [default: 50]
    #[arg(long, env = "HANZI_EMBED_DIM")]
    dim: Option<usize>,

    /// Context half-width T [default: 2]
    #[arg(long, env = "HANZI_EMBED_WINDOW")]
    window: Option<usize>,

    /// Negative samples per prediction [default: 5]
    #[arg(long, env = "HANZI_EMBED_NEGATIVES")]
    negatives: Option<usize>,

    /// Discard tokens seen fewer times [default: 10]
    #[arg(long, env = "HANZI_EMBED_MIN_COUNT")]
    min_count: Option<u64>,

    /// Components kept per character, M [default: 2]
    #[arg(long, env = "HANZI_EMBED_COMPONENTS")]
    components: Option<usize>,

    /// How cbow merges context vectors: average | sum [default: average]
    #[arg(long, env = "HANZI_EMBED_COMBINE")]
    combine: Option<ContextCombine>,

    /// [default: 5]
    #[arg(long, env = "HANZI_EMBED_EPOCHS")]
    epochs: Option<usize>,

    /// [default: 0.05 for cbow models, 0.025 for skip-gram models]
    #[arg(long, env = "HANZI_EMBED_LR_START")]
    lr_start: Option<f64>,

    /// [default: lr-start * 1e-4]
    #[arg(long, env = "HANZI_EMBED_LR_MIN")]
    lr_min: Option<f64>,

    /// Frequent-token subsampling threshold, 0 to disable [default: 0]
    #[arg(long, env = "HANZI_EMBED_SUBSAMPLE")]
    subsample: Option<f64>,

    /// Exponent on counts for negative sampling [default: 0.75]
    #[arg(long, env = "HANZI_EMBED_NS_POWER")]
    ns_power: Option<f64>,

    /// Lock-free training threads; only 1 is bit-reproducible [default: 1]
    #[arg(long, env = "HANZI_EMBED_WORKERS")]
    workers: Option<usize>,

    /// [default: 1]
    #[arg(long, env = "HANZI_EMBED_SEED")]
    seed: Option<u64>,

    /// Component lexicon, required by charcbow and charskipgram.
    #[arg(long, env = "HANZI_EMBED_LEXICON")]
    lexicon: Option<PathBuf>,

    #[arg(long, env = "HANZI_EMBED_VARIANTS")]
    variants: Option<PathBuf>,

    /// Write `epoch-<n>.vec` here after every epoch.
    #[arg(long, env = "HANZI_EMBED_CHECKPOINT_DIR")]
    checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalSimArgs {
    /// `word_a<TAB>word_b<TAB>gold<TAB>category` per line.
    dataset: PathBuf,

    /// Embedding file; repeat to compare several models.
    #[arg(short, long = "embeddings", required = true, env = "HANZI_EMBED_EMBEDDINGS")]
    embeddings: Vec<PathBuf>,

    /// uni: concatenate character vectors; bi: use the word's bigram vector.
    #[arg(long, default_value = "uni", env = "HANZI_EMBED_MODE")]
    mode: Composition,

    /// Also write the comma-separated rows here, with a manifest beside it.
    #[arg(short, long, env = "HANZI_EMBED_OUTPUT")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalClassifyArgs {
    /// `label<TAB>title` per line.
    dataset: PathBuf,

    /// Uni-gram embeddings for `uni` and `combine`, bi-gram embeddings for `bi`.
    #[arg(short, long, env = "HANZI_EMBED_EMBEDDINGS")]
    embeddings: PathBuf,

    /// Bi-gram embeddings for `combine`.
    #[arg(long, env = "HANZI_EMBED_BI_EMBEDDINGS")]
    bi_embeddings: Option<PathBuf>,

    /// uni | bi | combine
    #[arg(long, default_value = "uni", env = "HANZI_EMBED_MODE")]
    mode: TitleMode,

    /// token: the bigram's own vector; char-average: mean of its characters.
    #[arg(long, default_value = "token", env = "HANZI_EMBED_BIGRAM_SOURCE")]
    bigram_source: BigramSource,

    #[arg(long, default_value_t = 0.2, env = "HANZI_EMBED_TEST_FRACTION")]
    test_fraction: f64,

    /// Inverse L2 regularization strength.
    #[arg(long, default_value_t = 1.0, env = "HANZI_EMBED_L2_C")]
    l2_c: f64,

    #[arg(long, default_value_t = 1, env = "HANZI_EMBED_SEED")]
    seed: u64,

    /// Also write the comma-separated rows here, with a manifest beside it.
    #[arg(short, long, env = "HANZI_EMBED_OUTPUT")]
    output: Option<PathBuf>,
}

/// A failed command: exit status plus a one-line message.
struct Failure {
    code: u8,
    message: String,
}

impl From<hanzi_embed::Error> for Failure {
    fn from(e: hanzi_embed::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

fn fail(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            eprintln!("{}", rendered.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::from(2);
        }
    };
    let level = if cli.verbose { "info" } else { "error" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Lexicon(args) => cmd_lexicon(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Train(args) => cmd_train(args),
        Command::EvalSim(args) => cmd_eval_sim(args),
        Command::EvalClassify(args) => cmd_eval_classify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}

fn variant_table(overrides: Option<&Path>) -> Result<VariantTable, Failure> {
    let builtin = VariantTable::builtin();
    Ok(match overrides {
        Some(path) => builtin.overridden_by(&VariantTable::load(path)?)?,
        None => builtin,
    })
}

fn load_lexicon(path: &Path, variants: Option<&Path>) -> Result<ComponentLexicon, Failure> {
    Ok(ComponentLexicon::load_with_variants(path, variant_table(variants)?)?)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| fail(format!("{}: {e}", path.display())))
}

/// `dir/name.ext` → `dir/name.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn cmd_lexicon(args: LexiconArgs) -> CmdResult {
    let lexicon = match &args.lexicon {
        Some(path) => Some(load_lexicon(path, args.variants.as_deref())?),
        None => None,
    };
    let require = || lexicon.as_ref().ok_or_else(|| fail("--lexicon is required for this subcommand"));
    match &args.action {
        LexiconAction::Lookup { character } => {
            let lexicon = require()?;
            let mut chars = character.chars();
            let entry = match (chars.next(), chars.next()) {
                (Some(c), None) if corpus::is_chinese(c) => lexicon.get(c),
                _ => None,
            };
            match entry {
                Some(list) => println!("{character}: {}", list.iter().collect::<Vec<_>>().join(" ")),
                None => {
                    return Err(Failure {
                        code: 2,
                        message: format!("'{character}' has no lexicon entry"),
                    })
                }
            }
        }
        LexiconAction::Stats => {
            let lexicon = require()?;
            let total = lexicon.len();
            println!("entries: {total}");
            println!("distinct components: {}", lexicon.component_inventory().len());
            for (len, count) in lexicon.length_histogram() {
                let unit = if len == 1 { "component" } else { "components" };
                let share = 100.0 * count as f64 / total as f64;
                println!("{len} {unit}: {count} ({share:.1}%)");
            }
        }
        LexiconAction::Normalize { component } => {
            let normal = match &lexicon {
                Some(l) => l.normalize_variant(component).to_string(),
                None => variant_table(args.variants.as_deref())?.normalize(component).to_string(),
            };
            println!("{normal}");
        }
    }
    Ok(())
}

fn read_corpus(path: &Path) -> Result<Vec<Vec<char>>, Failure> {
    let raw = fs::read(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    corpus::preprocess(&raw).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn cmd_preprocess(args: PreprocessArgs) -> CmdResult {
    let sentences = read_corpus(&args.corpus)?;
    let mut text = String::new();
    for s in &sentences {
        text.extend(s.iter());
        text.push('\n');
    }
    let mut manifest = RunManifest::for_tool();
    manifest.add_input("corpus", &args.corpus)?;
    manifest.set("preprocess.sentences", sentences.len());
    manifest.set("preprocess.characters", sentences.iter().map(Vec::len).sum::<usize>());
    if let Some(path) = &args.counts {
        let tokens = corpus::tokenize(&sentences, args.gram);
        let vocab = Vocabulary::build(&tokens, args.min_count, corpus::NS_POWER)?;
        let mut buf = Vec::new();
        vocab.write_counts(&mut buf).map_err(|e| fail(e.to_string()))?;
        fs::write(path, buf).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        manifest.set("preprocess.gram", args.gram);
        manifest.set("preprocess.min_count", args.min_count);
        manifest.add_output("counts", path);
    }
    match &args.output {
        Some(path) => {
            write_text(path, &text)?;
            manifest.add_output("corpus", path);
            manifest.save(&sibling(path, "manifest"))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Base configuration from the manifest (if any) with explicit flags applied.
fn resolve_train_config(args: &TrainArgs, base: Option<&RunManifest>) -> Result<TrainConfig, Failure> {
    let mut cfg = match base {
        Some(m) => m.train_config()?,
        None => TrainConfig::new(args.model.unwrap_or(Variant::CharCbow), args.gram.unwrap_or(Gram::Uni)),
    };
    if let Some(v) = args.model {
        if base.is_some() && args.lr_start.is_none() && v.is_cbow_family() != cfg.model.variant.is_cbow_family() {
            cfg.lr_start = TrainConfig::default_lr(v);
            cfg.lr_min = cfg.lr_start * 1e-4;
        }
        cfg.model.variant = v;
    }
    if let Some(g) = args.gram {
        cfg.model.gram = g;
    }
    if let Some(x) = args.dim {
        cfg.model.dim = x;
    }
    if let Some(x) = args.window {
        cfg.model.window = x;
    }
    if let Some(x) = args.negatives {
        cfg.model.negatives = x;
    }
    if let Some(x) = args.components {
        cfg.model.components = x;
    }
    if let Some(x) = args.combine {
        cfg.model.combine = x;
    }
    if let Some(x) = args.min_count {
        cfg.min_count = x;
    }
    if let Some(x) = args.epochs {
        cfg.epochs = x;
    }
    if let Some(x) = args.lr_start {
        cfg.lr_start = x;
        if args.lr_min.is_none() {
            cfg.lr_min = x * 1e-4;
        }
    }
    if let Some(x) = args.lr_min {
        cfg.lr_min = x;
    }
    if let Some(x) = args.subsample {
        cfg.subsample = x;
    }
    if let Some(x) = args.ns_power {
        cfg.ns_power = x;
    }
    if let Some(x) = args.workers {
        cfg.workers = x;
    }
    if let Some(x) = args.seed {
        cfg.seed = x;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Explicit path, else the one recorded in the base manifest, whose digest
/// must still match.
fn resolve_input(explicit: Option<&Path>, name: &str, base: Option<&RunManifest>) -> Result<Option<PathBuf>, Failure> {
    if let Some(p) = explicit {
        return Ok(Some(p.to_path_buf()));
    }
    let Some(m) = base else { return Ok(None) };
    let Some(recorded) = m.get(&format!("input.{name}.path")) else {
        return Ok(None);
    };
    let path = PathBuf::from(recorded);
    let digest = hanzi_embed::manifest::file_digest(&path)?;
    if m.get(&format!("input.{name}.sha256")) != Some(digest.as_str()) {
        return Err(fail(format!("{recorded}: contents differ from the manifest digest")));
    }
    Ok(Some(path))
}

fn cmd_train(args: TrainArgs) -> CmdResult {
    let base = match &args.from_manifest {
        Some(p) => Some(RunManifest::load(p)?),
        None => None,
    };
    let cfg = resolve_train_config(&args, base.as_ref())?;
    let corpus_path = resolve_input(args.corpus.as_deref(), "corpus", base.as_ref())?
        .ok_or_else(|| fail("a corpus path is required"))?;
    let lexicon_path = resolve_input(args.lexicon.as_deref(), "lexicon", base.as_ref())?;
    let variants_path = resolve_input(args.variants.as_deref(), "variants", base.as_ref())?;
    if cfg.model.variant.uses_components() && lexicon_path.is_none() {
        return Err(fail(format!("--model {} requires --lexicon", cfg.model.variant)));
    }

    let sentences = read_corpus(&corpus_path)?;
    let lexicon = match &lexicon_path {
        Some(p) if cfg.model.variant.uses_components() => Some(load_lexicon(p, variants_path.as_deref())?),
        _ => None,
    };
    let (vocab, stream) = trainer::prepare(&sentences, &cfg)?;
    let opts = TrainOptions {
        checkpoint_dir: args.checkpoint_dir.clone(),
    };
    let (emb, report) = trainer::train_with(&stream, &vocab, lexicon.as_ref(), &cfg, &opts)?;
    trainer::save_embeddings(&emb, &args.output)?;

    let mut manifest = RunManifest::for_tool();
    manifest.set_train_config(&cfg);
    manifest.add_input("corpus", &corpus_path)?;
    if let Some(p) = &lexicon_path {
        if cfg.model.variant.uses_components() {
            manifest.add_input("lexicon", p)?;
        }
    }
    if let Some(p) = &variants_path {
        if cfg.model.variant.uses_components() {
            manifest.add_input("variants", p)?;
        }
    }
    manifest.add_output("embeddings", &args.output);
    if emb.components.is_some() {
        manifest.add_output("components", &trainer::components_path(&args.output));
    }
    manifest.set("result.vocab_size", vocab.len());
    manifest.set("result.tokens", stream.num_tokens());
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        manifest.set(format!("result.loss.epoch{:02}", i + 1), loss);
    }
    let manifest_path = args.manifest.clone().unwrap_or_else(|| sibling(&args.output, "manifest"));
    manifest.save(&manifest_path)?;
    Ok(())
}

fn model_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn cmd_eval_sim(args: EvalSimArgs) -> CmdResult {
    let dataset = SimilarityDataset::load(&args.dataset)?;
    let mut reports = Vec::new();
    for path in &args.embeddings {
        let emb = trainer::load_embeddings(path)?;
        reports.push((model_name(path), eval_similarity(&emb.vectors, &dataset, args.mode)?));
    }
    let rows: Vec<(&str, &_)> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    let csv: Vec<String> = reports.iter().flat_map(|(n, r)| r.csv_rows(n)).collect();
    let mut out = similarity_table(&rows);
    out.push('\n');
    for row in &csv {
        writeln!(out, "{row}").expect("write to string");
    }
    out.push('\n');
    for (name, r) in &reports {
        writeln!(out, "{name} {}", r.coverage_line()).expect("write to string");
    }
    print!("{out}");

    if let Some(path) = &args.output {
        write_text(path, &(csv.join("\n") + "\n"))?;
        let mut manifest = RunManifest::for_tool();
        manifest.set("eval.task", "similarity");
        manifest.set("eval.mode", args.mode);
        manifest.add_input("dataset", &args.dataset)?;
        for (i, p) in args.embeddings.iter().enumerate() {
            manifest.add_input(&format!("embeddings{i}"), p)?;
        }
        manifest.add_output("rows", path);
        manifest.save(&sibling(path, "manifest"))?;
    }
    Ok(())
}

fn cmd_eval_classify(args: EvalClassifyArgs) -> CmdResult {
    let dataset = ClassificationDataset::load(&args.dataset)?;
    let primary = trainer::load_embeddings(&args.embeddings)?.vectors;
    let secondary = match &args.bi_embeddings {
        Some(p) => Some(trainer::load_embeddings(p)?.vectors),
        None => None,
    };
    let mut features = match (args.mode, &secondary) {
        (TitleMode::Combine, Some(bi)) => TitleFeatures::combine(&primary, bi),
        (TitleMode::Combine, None) => return Err(fail("--mode combine requires --bi-embeddings")),
        (TitleMode::Bi, _) if args.bigram_source == BigramSource::Token => TitleFeatures::bi(&primary),
        _ => TitleFeatures::uni(&primary),
    };
    features.bigram_source = args.bigram_source;
    let cfg = ClassifyConfig {
        test_fraction: args.test_fraction,
        seed: args.seed,
        logreg: LogRegConfig {
            l2_c: args.l2_c,
            ..LogRegConfig::default()
        },
    };
    let report = eval_classify(&dataset, &features, args.mode, &cfg)?;
    let name = match &args.bi_embeddings {
        Some(bi) => format!("{}+{}", model_name(&args.embeddings), model_name(bi)),
        None => model_name(&args.embeddings),
    };
    let csv = report.csv_rows(&name);
    let mut out = classification_table(&[(name.as_str(), &report)]);
    out.push('\n');
    for row in &csv {
        writeln!(out, "{row}").expect("write to string");
    }
    out.push('\n');
    writeln!(out, "{name} {}", report.coverage_line(dataset.len())).expect("write to string");
    writeln!(out, "{name} split: {} train, {} test", report.train_size, report.test_size).expect("write to string");
    print!("{out}");

    if let Some(path) = &args.output {
        write_text(path, &(csv.join("\n") + "\n"))?;
        let mut manifest = RunManifest::for_tool();
        manifest.set("eval.task", "classification");
        manifest.set("eval.mode", args.mode);
        manifest.set("eval.bigram_source", args.bigram_source);
        manifest.set("eval.test_fraction", args.test_fraction);
        manifest.set("eval.l2_c", args.l2_c);
        manifest.set("eval.seed", args.seed);
        manifest.add_input("dataset", &args.dataset)?;
        manifest.add_input("embeddings", &args.embeddings)?;
        if let Some(p) = &args.bi_embeddings {
            manifest.add_input("bi_embeddings", p)?;
        }
        manifest.add_output("rows", path);
        manifest.save(&sibling(path, "manifest"))?;
    }
    Ok(())
}
