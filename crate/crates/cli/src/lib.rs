//! The `crossling` command line: argument parsing, configuration
//! resolution and one function per subcommand.

pub mod config;
pub mod metrics;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use crossling_core::bundle::{bundle_kind, BundleKind, ClassifierBundle, EmbeddingBundle};
use crossling_core::classifier::{evaluate, train_classifier, ClassifierModel, TrainRunResult};
use crossling_core::corpus::{
    build_vocab, corpus_stats, load_dataset, preprocess, stratified_sample, write_dataset, CleaningConfig, Document,
    Split, Vocabulary,
};
use crossling_core::embeddings::train_embeddings;
use crossling_core::eval::{aggregate_runs, load_pairs, pairs_to_tsv, translation_rank, Direction};
use crossling_core::synthdata::generate_corpus;
use crossling_core::transfer::{transfer_train, EmbeddingInit, TransferMode};
use crossling_core::{Error, Result};
use crossling_tensor::{Rng, Tensor};

use config::{required, ExperimentConfig, TargetInit};

#[derive(Debug, Parser)]
#[command(name = "crossling", version, about = "Hate-speech classifier training, transfer and evaluation")]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides `seeds.base`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of runs; overrides `seeds.runs`.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Runs trained concurrently. Results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Log progress (-v) or debug detail (-vv) to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Baseline,
    Enhanced,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus statistics of a TSV dataset.
    Stats {
        #[arg(long)]
        data: PathBuf,
        /// The file starts with a header row.
        #[arg(long)]
        header: bool,
        /// Cleaning preset; defaults to the config's `[cleaning]`.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Stratified random sample of a TSV dataset.
    Sample {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        header: bool,
        #[arg(long)]
        size: usize,
        /// HOF share of the sample; defaults to the input's.
        #[arg(long)]
        proportion: Option<f64>,
    },
    /// Synthetic bilingual corpus from `[synth]`.
    Synth,
    /// Train word embeddings on `data.train`.
    TrainEmbed,
    /// Train classifiers on top of an embedding bundle.
    TrainClf {
        /// Embedding bundle; overrides `data.embedding`.
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Swap in a target-language embedding and train on `data.train`.
    Transfer {
        /// Source classifier bundle; overrides `data.source`.
        #[arg(long)]
        source: Option<PathBuf>,
        /// Target embedding bundle; overrides `data.target_embedding`.
        #[arg(long)]
        target_embedding: Option<PathBuf>,
        /// Overrides `transfer.mode`.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<TransferMode>,
    },
    /// Score a classifier bundle on a TSV dataset.
    Eval {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        header: bool,
    },
    /// Cosine-ranking translation probe between two bundles.
    Translate {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Pair file: concept, source_word, target_word.
        #[arg(long)]
        pairs: PathBuf,
        /// Query with the target word and rank source words.
        #[arg(long)]
        reverse: bool,
    },
}

fn parse_mode(s: &str) -> std::result::Result<TransferMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Process exit code for an error: 1 configuration, 2 data, 3 numerical.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 1,
        Error::Numerical(_) | Error::Tensor(crossling_tensor::TensorError::NonFinite { .. }) => 3,
        _ => 2,
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `f(run_index, seed)` for every seed on up to `threads` threads and
/// returns the results in run order.
pub fn run_parallel<T: Send>(
    seeds: &[u64],
    threads: usize,
    f: impl Fn(usize, u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let threads = threads.clamp(1, seeds.len().max(1));
    if threads == 1 {
        return seeds.iter().enumerate().map(|(i, &s)| f(i, s)).collect();
    }
    let mut slots: Vec<Option<Result<T>>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let f = &f;
                scope.spawn(move || {
                    (w..seeds.len())
                        .step_by(threads)
                        .map(|i| (i, f(i, seeds[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker thread panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every run executed")).collect()
}

struct Context {
    config: ExperimentConfig,
    out: PathBuf,
    threads: usize,
    seed_flag: Option<u64>,
}

impl Context {
    fn load_docs(&self, path: &Path, split: Split, cleaning: &CleaningConfig) -> Result<Vec<Document>> {
        let records = load_dataset(path, self.config.data.has_header, split)?;
        Ok(preprocess(&records, cleaning))
    }

    fn write_out(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.out.join(name);
        write(&path, contents)?;
        Ok(path)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seeds.base = s;
    }
    if let Some(r) = cli.runs {
        config.seeds.runs = r;
    }
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be >= 1".into()));
    }
    match &cli.command {
        Command::TrainClf { embedding: Some(p) } => config.data.embedding = Some(p.clone()),
        Command::Transfer {
            source,
            target_embedding,
            mode,
        } => {
            if let Some(p) = source {
                config.data.source = Some(p.clone());
            }
            if let Some(p) = target_embedding {
                config.data.target_embedding = Some(p.clone());
            }
            if let Some(m) = mode {
                config.transfer.mode = *m;
            }
        }
        _ => {}
    }
    config.validate()?;
    create_dir(&cli.out)?;
    let ctx = Context {
        config,
        out: cli.out.clone(),
        threads: cli.threads,
        seed_flag: cli.seed,
    };
    match cli.command {
        Command::Stats { data, header, preset } => cmd_stats(&ctx, &data, header, preset),
        Command::Sample {
            data,
            header,
            size,
            proportion,
        } => cmd_sample(&ctx, &data, header, size, proportion),
        Command::Synth => cmd_synth(&ctx),
        Command::TrainEmbed => cmd_train_embed(&ctx),
        Command::TrainClf { .. } => cmd_train_clf(&ctx),
        Command::Transfer { .. } => cmd_transfer(&ctx),
        Command::Eval { bundle, data, header } => cmd_eval(&ctx, &bundle, &data, header),
        Command::Translate {
            source,
            target,
            pairs,
            reverse,
        } => cmd_translate(&ctx, &source, &target, &pairs, reverse),
    }
}

fn cmd_stats(ctx: &Context, data: &Path, header: bool, preset: Option<Preset>) -> Result<()> {
    let cleaning = match preset {
        Some(Preset::Baseline) => CleaningConfig::baseline(),
        Some(Preset::Enhanced) => CleaningConfig::enhanced(),
        None => ctx.config.cleaning.clone(),
    };
    let mut cleaning = cleaning;
    if let Some(p) = &ctx.config.data.stopwords {
        cleaning.stopwords.extend(crossling_core::corpus::load_stopwords(p)?);
    }
    let records = load_dataset(data, header, Split::Train)?;
    let docs = preprocess(&records, &cleaning);
    let vocab = build_vocab(&docs, ctx.config.vocab.min_count)?;
    let stats = corpus_stats(&docs, &vocab);
    print!("{stats}");
    ctx.write_out("stats.txt", stats.to_string())?;
    ctx.write_out(
        "stats.json",
        serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n",
    )?;
    Ok(())
}

fn cmd_sample(ctx: &Context, data: &Path, header: bool, size: usize, proportion: Option<f64>) -> Result<()> {
    let records = load_dataset(data, header, Split::Train)?;
    let proportion = proportion.unwrap_or_else(|| {
        records.iter().filter(|r| r.label.is_hof()).count() as f64 / records.len().max(1) as f64
    });
    let sample = stratified_sample(&records, size, proportion, ctx.config.seeds.base)?;
    let path = ctx.out.join("sample.tsv");
    write_dataset(&path, &sample, header)?;
    println!("wrote {} records to {}", sample.len(), path.display());
    Ok(())
}

fn cmd_synth(ctx: &Context) -> Result<()> {
    let mut cfg = ctx.config.synth.clone();
    if let Some(s) = ctx.seed_flag {
        cfg.seed = s;
    }
    let corpus = generate_corpus(&cfg)?;
    let header = ctx.config.data.has_header;
    for (name, records) in [
        ("train_a.tsv", &corpus.train_a),
        ("test_a.tsv", &corpus.test_a),
        ("train_b.tsv", &corpus.train_b),
        ("test_b.tsv", &corpus.test_b),
    ] {
        write_dataset(ctx.out.join(name), records, header)?;
    }
    ctx.write_out("pairs.tsv", pairs_to_tsv(&corpus.bijection))?;
    ctx.write_out("lexicon_a.txt", corpus.lexicon_a.join("\n") + "\n")?;
    ctx.write_out("lexicon_b.txt", corpus.lexicon_b.join("\n") + "\n")?;
    println!(
        "wrote {} + {} texts per language and {} translation pairs to {}",
        corpus.train_a.len(),
        corpus.test_a.len(),
        corpus.bijection.len(),
        ctx.out.display()
    );
    Ok(())
}

fn cmd_train_embed(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let cleaning = cfg.resolved_cleaning()?;
    let docs = ctx.load_docs(cfg.train_path()?, Split::Train, &cleaning)?;
    let vocab = build_vocab(&docs, cfg.vocab.min_count)?;
    let run = train_embeddings(&docs, &vocab, &cfg.embedding, cfg.seeds.base)?;
    let bundle = EmbeddingBundle {
        vocab,
        model: run.model,
        config: cfg.embedding.clone(),
        cleaning,
        seed: cfg.seeds.base,
        replay_config: Some(cfg.to_toml()),
    };
    let dir = ctx.out.join("embedding");
    bundle.save(&dir)?;
    ctx.write_out("embedding_metrics.csv", metrics::loss_csv(&run.epoch_losses))?;
    println!(
        "vocabulary {} x dim {}; final loss {:.5}; bundle at {}",
        bundle.vocab.len(),
        bundle.model.dim(),
        run.epoch_losses.last().copied().unwrap_or(f64::NAN),
        dir.display()
    );
    Ok(())
}

fn write_runs(ctx: &Context, results: &[TrainRunResult]) -> Result<()> {
    ctx.write_out("metrics.csv", metrics::metrics_csv(results))?;
    ctx.write_out("aggregate.csv", metrics::aggregate_csv(&aggregate_runs(results)?))?;
    for (i, r) in results.iter().enumerate() {
        let m = r.final_metrics();
        println!(
            "run {i} (seed {}): accuracy {} macro_f1 {}",
            r.seed,
            metrics::sig6(m.accuracy),
            metrics::sig6(m.macro_f1)
        );
    }
    let n = results.len() as f64;
    let mean = |f: fn(&TrainRunResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    println!(
        "mean over {} runs: accuracy {} macro_f1 {}",
        results.len(),
        metrics::sig6(mean(|r| r.final_metrics().accuracy)),
        metrics::sig6(mean(|r| r.final_metrics().macro_f1))
    );
    Ok(())
}

fn cmd_train_clf(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let emb = EmbeddingBundle::load(required(&cfg.data.embedding, "data.embedding")?)?;
    let train = ctx.load_docs(cfg.train_path()?, Split::Train, &emb.cleaning)?;
    let test = ctx.load_docs(cfg.test_path()?, Split::Test, &emb.cleaning)?;
    let replay = cfg.to_toml();
    let results = run_parallel(&cfg.runs(), ctx.threads, |i, seed| {
        let mut rng = Rng::with_stream(seed, 10);
        let mut model = ClassifierModel::new(cfg.classifier.clone(), emb.model.embedding().clone(), &mut rng)?;
        let result = train_classifier(&mut model, &train, &test, &emb.vocab, seed)?;
        let mut bundle = ClassifierBundle::new(emb.vocab.clone(), model, emb.cleaning.clone(), seed);
        bundle.replay_config = Some(replay.clone());
        bundle.save(ctx.out.join(format!("run{i}")))?;
        Ok(result)
    })?;
    write_runs(ctx, &results)
}

fn cmd_transfer(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let source = ClassifierBundle::load(required(&cfg.data.source, "data.source")?)?;
    let (vocab, cleaning, init) = match cfg.transfer.init {
        TargetInit::Pretrained => {
            let emb = EmbeddingBundle::load(required(&cfg.data.target_embedding, "data.target_embedding")?)?;
            let init = EmbeddingInit::Pretrained(emb.model.embedding().clone());
            (emb.vocab, emb.cleaning, init)
        }
        TargetInit::XavierFresh => {
            let cleaning = cfg.resolved_cleaning()?;
            let docs = ctx.load_docs(cfg.train_path()?, Split::Train, &cleaning)?;
            (build_vocab(&docs, cfg.vocab.min_count)?, cleaning, EmbeddingInit::XavierFresh)
        }
    };
    let train = ctx.load_docs(cfg.train_path()?, Split::Train, &cleaning)?;
    let test = ctx.load_docs(cfg.test_path()?, Split::Test, &cleaning)?;
    // the architecture is the source's; only optimization settings come
    // from the config
    let mut train_config = source.model.config.clone();
    train_config.lr0 = cfg.classifier.lr0;
    train_config.lr_gamma = cfg.classifier.lr_gamma;
    train_config.epochs = cfg.classifier.epochs;
    train_config.batch_size = cfg.classifier.batch_size;
    train_config.dropout_p = cfg.classifier.dropout_p;
    let replay = cfg.to_toml();
    let results = run_parallel(&cfg.runs(), ctx.threads, |i, seed| {
        let (model, result) = transfer_train(
            &source,
            &vocab,
            init.clone(),
            &train,
            &test,
            cfg.transfer.mode,
            &train_config,
            seed,
        )?;
        let mut bundle = ClassifierBundle::new(vocab.clone(), model, cleaning.clone(), seed);
        bundle.transfer = result.transfer.clone();
        bundle.replay_config = Some(replay.clone());
        bundle.save(ctx.out.join(format!("run{i}")))?;
        Ok(result)
    })?;
    write_runs(ctx, &results)
}

fn cmd_eval(ctx: &Context, bundle: &Path, data: &Path, header: bool) -> Result<()> {
    let b = ClassifierBundle::load(bundle)?;
    let records = load_dataset(data, header, Split::Test)?;
    let docs = preprocess(&records, &b.cleaning);
    let m = evaluate(&b.model, &docs, &b.vocab)?;
    let epoch = b.model.config.epochs;
    let mut csv = format!("{}\n", metrics::HEADER);
    for (name, v) in [("loss", m.loss), ("accuracy", m.accuracy), ("macro_f1", m.macro_f1)] {
        println!("{name}={}", metrics::sig6(v));
        csv.push_str(&format!("0,{epoch},eval,{name},{}\n", metrics::sig6(v)));
    }
    ctx.write_out("eval.csv", csv)?;
    Ok(())
}

/// Embedding matrix and vocabulary of either bundle kind.
fn load_embedding(dir: &Path) -> Result<(Tensor<f32>, Vocabulary)> {
    Ok(match bundle_kind(dir)? {
        BundleKind::Embedding => {
            let b = EmbeddingBundle::load(dir)?;
            (b.model.embedding().clone(), b.vocab)
        }
        BundleKind::Classifier => {
            let b = ClassifierBundle::load(dir)?;
            (b.model.embedding_matrix().clone(), b.vocab)
        }
    })
}

fn cmd_translate(ctx: &Context, source: &Path, target: &Path, pairs: &Path, reverse: bool) -> Result<()> {
    let (sm, sv) = load_embedding(source)?;
    let (tm, tv) = load_embedding(target)?;
    let pairs = load_pairs(pairs)?;
    let direction = if reverse {
        Direction::TargetToSource
    } else {
        Direction::SourceToTarget
    };
    let report = translation_rank((&sm, &sv), (&tm, &tv), &pairs, direction)?;
    print!("{report}");
    ctx.write_out("ranks.tsv", report.to_tsv())?;
    Ok(())
}
