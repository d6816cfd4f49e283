use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use transicd::embeddings::{train_cbow, CbowConfig};
use transicd::harness::{self, Dataset, RunConfig};
use transicd::model::Checkpoint;
use transicd::preprocess::{
    read_labels, read_records, write_labels, write_records, LabelSet, PrepConfig, Vocabulary,
};
use transicd::synth::{self, SynthSpec};
use transicd::{Error, Result};

/// TransICD: transformer encoder with label attention for multi-label
/// document coding.
#[derive(Parser)]
#[command(name = "transicd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a long-tailed synthetic corpus with trigger tokens.
    GenSynth(GenSynth),
    /// Normalize raw corpus splits and build the vocabulary.
    Preprocess(Preprocess),
    /// Train CBOW embeddings on a preprocessed split.
    Embed(Embed),
    /// Train one model, or one per seed.
    Train(Train),
    /// Score a checkpoint on a preprocessed split.
    Evaluate(Evaluate),
    /// Write per-token attention for one document.
    Attend(Attend),
    /// Aggregate per-seed reports into mean and standard deviation.
    Report(Report),
}

#[derive(Args)]
struct GenSynth {
    #[arg(long)]
    out: PathBuf,
    /// TOML file with SynthSpec fields; flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    num_docs: Option<usize>,
    #[arg(long)]
    num_labels: Option<usize>,
    #[arg(long)]
    vocab_noise_size: Option<usize>,
    #[arg(long)]
    doc_len_min: Option<usize>,
    #[arg(long)]
    doc_len_max: Option<usize>,
    #[arg(long)]
    tail_decay: Option<f64>,
    #[arg(long)]
    trigger_strength: Option<f64>,
    #[arg(long)]
    head_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Preprocess {
    /// Directory holding train.tsv and optionally valid.tsv, test.tsv, labels.txt.
    #[arg(long)]
    in_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    min_token_len: usize,
    #[arg(long)]
    keep_stopwords: bool,
    #[arg(long)]
    no_stem: bool,
    #[arg(long)]
    no_digit_mask: bool,
}

#[derive(Args)]
struct Embed {
    /// Preprocessed corpus; repeat to train on several splits. The
    /// vocabulary still comes from the training split only.
    #[arg(long, required = true)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct Train {
    #[arg(long)]
    config: PathBuf,
    /// `key=value` override, repeatable.
    #[arg(long = "set")]
    overrides: Vec<String>,
    /// Comma-separated seeds; each run goes to `<out_dir>/seed-<n>` on its own thread.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct Evaluate {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Write `<out>.json` and `<out>.txt` in addition to printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Attend {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Preprocessed corpus holding the document.
    #[arg(long, requires = "doc_id")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    doc_id: Option<String>,
    /// Raw text to preprocess and attend over instead of a corpus document.
    #[arg(long, conflicts_with = "corpus")]
    text: Option<String>,
    /// Comma-separated label names.
    #[arg(long, value_delimiter = ',', required = true)]
    labels: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Report {
    /// Per-seed report JSON files.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Write `<out>.json` and `<out>.txt` in addition to printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let msg: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("error\tusage\t{}", msg.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error\t{}\t{}", e.kind(), e.to_string().replace(['\n', '\t'], " "));
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenSynth(a) => gen_synth(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Embed(a) => embed(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Attend(a) => attend(a),
        Command::Report(a) => report(a),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn gen_synth(a: GenSynth) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => SynthSpec::default(),
    };
    macro_rules! apply {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { spec.$f = v; })* };
    }
    apply!(
        num_docs,
        num_labels,
        vocab_noise_size,
        doc_len_min,
        doc_len_max,
        tail_decay,
        trigger_strength,
        head_rate,
        seed
    );
    let corpus = synth::generate(&spec)?;
    corpus.write(&a.out)?;
    write_text(
        &a.out.join("spec.toml"),
        &toml::to_string(&spec).expect("spec serializes"),
    )?;
    println!(
        "wrote {} train, {} valid, {} test documents to {}",
        corpus.train.len(),
        corpus.valid.len(),
        corpus.test.len(),
        a.out.display()
    );
    Ok(())
}

fn preprocess(a: Preprocess) -> Result<()> {
    let config = PrepConfig {
        min_token_len: a.min_token_len,
        remove_stopwords: !a.keep_stopwords,
        stem: !a.no_stem,
        mask_digits: !a.no_digit_mask,
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let train = read_records(&a.in_dir.join("train.tsv"))?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let labels_path = a.in_dir.join("labels.txt");
    let labels = if labels_path.exists() {
        read_labels(&labels_path)?
    } else {
        LabelSet::from_records(&train)?
    };
    let train = harness::preprocess_records(&train, &config);
    let vocab = Vocabulary::build(&harness::token_lists(&train))?;
    let mut splits = vec![("train.tsv", train)];
    for name in ["valid.tsv", "test.tsv"] {
        let path = a.in_dir.join(name);
        if path.exists() {
            splits.push((name, harness::preprocess_records(&read_records(&path)?, &config)));
        }
    }
    for (name, records) in &splits {
        for r in records {
            labels.indices(&r.labels)?;
        }
        write_records(&a.out_dir.join(name), records)?;
        println!("{name}: {} documents", records.len());
    }
    vocab.write(&a.out_dir.join("vocab.txt"))?;
    write_labels(&a.out_dir.join("labels.txt"), &labels)?;
    println!("vocabulary: {} entries, checksum {}", vocab.len(), vocab.checksum());
    Ok(())
}

fn embed(a: Embed) -> Result<()> {
    let vocab = Vocabulary::read(&a.vocab)?;
    let mut docs: Vec<Vec<usize>> = Vec::new();
    for path in &a.corpus {
        let records = read_records(path)?;
        docs.extend(
            harness::token_lists(&records)
                .iter()
                .map(|t| vocab.encode(t, usize::MAX)),
        );
    }
    let config = CbowConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
    };
    let emb = train_cbow(&docs, vocab.len(), &config)?;
    emb.write(&a.out, &vocab.checksum())?;
    println!("embeddings {}x{} written to {}", emb.vocab_size(), emb.dim(), a.out.display());
    Ok(())
}

fn train(a: Train) -> Result<()> {
    let base = RunConfig::load(&a.config, &a.overrides)?;
    let data = Dataset::load(&base)?;
    if a.seeds.is_empty() {
        let out = harness::train(&base, &data, Some(&base.out_dir))?;
        print_outcome(&base, &out);
        return Ok(());
    }
    let configs: Vec<RunConfig> = a
        .seeds
        .iter()
        .map(|&seed| RunConfig {
            seed,
            out_dir: base.out_dir.join(format!("seed-{seed}")),
            ..base.clone()
        })
        .collect();
    let outcomes: Vec<Result<harness::TrainOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                let data = &data;
                s.spawn(move || harness::train(c, data, Some(&c.out_dir)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    let mut tests = Vec::new();
    for (c, out) in configs.iter().zip(outcomes) {
        let out = out?;
        print_outcome(c, &out);
        tests.extend(out.test_report);
    }
    if tests.len() == configs.len() {
        let summary = harness::aggregate(&tests)?;
        write_text(&base.out_dir.join("test_summary.txt"), &summary.to_text())?;
        write_text(&base.out_dir.join("test_summary.json"), &summary.to_json())?;
        print!("{}", summary.to_text());
    }
    Ok(())
}

fn print_outcome(c: &RunConfig, out: &harness::TrainOutcome) {
    let best = &out.history[out.best_epoch - 1].valid;
    println!(
        "seed {}: best epoch {} valid micro_auc {:.6} -> {}",
        c.seed,
        out.best_epoch,
        best.micro_auc,
        c.out_dir.display()
    );
    if let Some(t) = &out.test_report {
        print!("{}", t.to_text());
    }
}

fn load_for_inference(checkpoint: &Path, vocab: &Path) -> Result<(Checkpoint, Vocabulary, LabelSet)> {
    let ck = Checkpoint::load(checkpoint)?;
    let vocab = Vocabulary::read(vocab)?;
    ck.require_vocab(&vocab.checksum())?;
    let labels = LabelSet::new(ck.labels.clone())?;
    Ok((ck, vocab, labels))
}

fn evaluate(a: Evaluate) -> Result<()> {
    let (ck, vocab, labels) = load_for_inference(&a.checkpoint, &a.vocab)?;
    let docs = harness::documents(&read_records(&a.corpus)?, &vocab, &labels, ck.model.config.max_len)?;
    let report = harness::evaluate(&ck.model, &docs, a.k)?;
    if let Some(out) = &a.out {
        harness::write_report(out, &report)?;
    }
    print!("{}", report.to_text());
    Ok(())
}

fn attend(a: Attend) -> Result<()> {
    let (ck, vocab, labels) = load_for_inference(&a.checkpoint, &a.vocab)?;
    let max_len = ck.model.config.max_len;
    let records = match (&a.text, &a.corpus, &a.doc_id) {
        (Some(text), _, _) => vec![transicd::preprocess::RawRecord {
            id: "text".into(),
            labels: vec![],
            text: transicd::preprocess::pipeline(text, &PrepConfig::default()).join(" "),
        }],
        (None, Some(corpus), Some(id)) => {
            let all = read_records(corpus)?;
            let found: Vec<_> = all.into_iter().filter(|r| &r.id == id).collect();
            if found.is_empty() {
                return Err(Error::Validation(format!("document {id:?} not found")));
            }
            found
        }
        _ => {
            return Err(Error::Config(
                "give either --text or --corpus with --doc-id".into(),
            ))
        }
    };
    let doc = harness::documents(&records[..1], &vocab, &labels, max_len)?.remove(0);
    let report = harness::attend(&ck.model, &doc, &labels, &a.labels)?;
    report.write(&a.out_dir)?;
    print!("{}", report.to_tsv());
    Ok(())
}

fn report(a: Report) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| harness::read_report(p))
        .collect::<Result<Vec<_>>>()?;
    let summary = harness::aggregate(&reports)?;
    if let Some(out) = &a.out {
        write_text(&out.with_extension("txt"), &summary.to_text())?;
        write_text(&out.with_extension("json"), &summary.to_json())?;
    }
    print!("{}", summary.to_text());
    Ok(())
}
