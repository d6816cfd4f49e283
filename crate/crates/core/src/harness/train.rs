use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, Adam, Dataset, RunConfig};
use crate::error::{Error, Result};
use crate::losses::{LabelStats, LossKind, Objective};
use crate::metrics::MetricsReport;
use crate::model::{doc_graph, Checkpoint, Mode, Model};
use crate::numerics::{Tape, Tensor};
use crate::preprocess::Document;

/// One line of `history.jsonl`. Wall time is kept out of the serialized
/// record so that identical runs produce identical history files; it goes
/// to `timings.tsv` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid: MetricsReport,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best: Checkpoint,
    pub best_epoch: usize,
    pub last: Checkpoint,
    /// Best checkpoint scored on the test split, when one was given.
    pub test_report: Option<MetricsReport>,
}

/// Seed stream used for dropout and shuffling, kept apart from the
/// initialization stream.
const TRAIN_STREAM: u64 = 0x7472_6169_6e00;

pub fn objective(config: &RunConfig, train: &[Document], num_labels: usize) -> Result<Objective> {
    Ok(match config.loss {
        LossKind::Bce => Objective::Bce,
        LossKind::Ldam => Objective::Ldam {
            stats: label_stats(train, num_labels, config.margin_c)?,
            scale: config.ldam_scale,
        },
    })
}

pub fn label_stats(train: &[Document], num_labels: usize, c: f64) -> Result<LabelStats> {
    LabelStats::from_label_sets(num_labels, train.iter().map(|d| &d.labels), c)
}

/// Loss and gradients for one batch. The loss is the mean over documents of
/// the per-document loss summed over labels.
pub fn batch_gradients(
    model: &Model,
    batch: &[&Document],
    objective: &Objective,
    freeze_embeddings: bool,
    mode: &mut Mode<'_>,
) -> Result<(f64, Vec<Option<Tensor>>)> {
    let tape = Tape::new();
    let bound = model.params.bind(&tape, true, freeze_embeddings);
    let num_labels = model.config.num_labels;
    let mut total = None;
    for doc in batch {
        let ids: &[usize] = if doc.tokens.is_empty() { &[crate::preprocess::PAD] } else { &doc.tokens };
        let g = doc_graph(&tape, &bound, &model.config, ids, mode)?;
        let loss = objective.apply(g.logits, &doc.targets(num_labels))?;
        total = Some(match total {
            None => loss,
            Some(acc) => loss.add(acc)?,
        });
    }
    let total = total
        .ok_or(Error::EmptyCorpus)?
        .scale(1.0 / batch.len() as f64);
    let value = total.value().item().expect("scalar loss");
    let grads = tape.backward(total)?;
    let out = bound.vars.iter().map(|&v| grads.wrt(v).cloned()).collect();
    Ok((value, out))
}

struct RunFiles {
    history: File,
    timings: File,
    dir: PathBuf,
}

impl RunFiles {
    fn create(dir: &Path, config: &RunConfig, stats: Option<&LabelStats>) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("config.toml", config.to_toml())?;
        if let Some(s) = stats {
            write("label_stats.tsv", s.to_tsv())?;
        }
        let open = |name: &str| {
            let p = dir.join(name);
            OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(&p)
                .map_err(|e| Error::io(&p, e))
        };
        let history = open("history.jsonl")?;
        let mut timings = open("timings.tsv")?;
        writeln!(timings, "epoch\twall_seconds").map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            history,
            timings,
            dir: dir.to_path_buf(),
        })
    }

    fn append(&mut self, rec: &EpochRecord) -> Result<()> {
        let line = serde_json::to_string(rec).expect("record serializes");
        writeln!(self.history, "{line}").map_err(|e| Error::io(&self.dir, e))?;
        writeln!(self.timings, "{}\t{:.3}", rec.epoch, rec.wall_seconds)
            .map_err(|e| Error::io(&self.dir, e))?;
        self.history.flush().map_err(|e| Error::io(&self.dir, e))
    }
}

/// Trains a model on `data`. When `out_dir` is given, the resolved config,
/// label statistics, per-epoch history, `best.ckpt`, `final.ckpt` and the
/// reports are written there.
pub fn train(config: &RunConfig, data: &Dataset, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    let model_config = config.model_config(data.vocab.len(), data.labels.len());
    let mut model = Model::init(model_config, &data.embeddings, config.seed)?;
    let objective = objective(config, &data.train, data.labels.len())?;
    let stats = label_stats(&data.train, data.labels.len(), config.margin_c)?;
    let mut files = out_dir
        .map(|d| RunFiles::create(d, config, Some(&stats)))
        .transpose()?;

    let checkpoint = |model: &Model| Checkpoint {
        model: model.clone(),
        vocab_checksum: data.vocab.checksum(),
        labels: data.labels.names().to_vec(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ TRAIN_STREAM);
    let mut adam = Adam::new(&model.params, config.lr);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Model)> = None;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Document> = chunk.iter().map(|&i| &data.train[i]).collect();
            let (loss, grads) = batch_gradients(
                &model,
                &batch,
                &objective,
                config.freeze_embeddings,
                &mut Mode::Train(&mut rng),
            )?;
            let diverged = || Error::Divergence { epoch, batch: b + 1 };
            if !loss.is_finite() {
                return Err(diverged());
            }
            adam.step(&mut model.params, &grads)?;
            if !model.params.tensors.iter().all(Tensor::all_finite) {
                return Err(diverged());
            }
            loss_sum += loss * batch.len() as f64;
        }
        let valid = evaluate(&model, &data.valid, config.k)?;
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / data.train.len() as f64,
            valid,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        if best.as_ref().is_none_or(|(auc, _, _)| rec.valid.micro_auc > *auc) {
            best = Some((rec.valid.micro_auc, epoch, model.clone()));
            if let Some(f) = &files {
                checkpoint(&model).save(&f.dir.join("best.ckpt"))?;
            }
        }
        if let Some(f) = files.as_mut() {
            f.append(&rec)?;
        }
        history.push(rec);
    }

    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    let best = checkpoint(&best_model);
    let last = checkpoint(&model);
    let test_report = data
        .test
        .as_ref()
        .map(|t| evaluate(&best.model, t, config.k))
        .transpose()?;
    if let Some(f) = &files {
        last.save(&f.dir.join("final.ckpt"))?;
        let best_valid = &history[best_epoch - 1].valid;
        super::write_report(&f.dir.join("valid_report"), best_valid)?;
        if let Some(r) = &test_report {
            super::write_report(&f.dir.join("test_report"), r)?;
        }
    }
    Ok(TrainOutcome {
        history,
        best,
        best_epoch,
        last,
        test_report,
    })
}
