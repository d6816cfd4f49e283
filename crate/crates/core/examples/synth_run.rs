//! Trains on a generated long-tailed corpus and prints per-epoch validation
//! metrics and timings.
//!
//! cargo run --release -p transicd --example synth_run -- [epochs] [loss] [seed] [key=value ...]

use std::time::Instant;

use transicd::embeddings::CbowConfig;
use transicd::harness::{synthetic_dataset, train, trigger_fidelity, RunConfig};
use transicd::preprocess::PrepConfig;
use transicd::synth::SynthSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs = args.first().map_or(Ok(5), |s| s.parse())?;
    let loss = args.get(1).cloned().unwrap_or_else(|| "bce".into());
    let seed = args.get(2).map_or(Ok(1), |s| s.parse())?;
    let started = Instant::now();
    let spec = SynthSpec { seed, ..SynthSpec::default() };
    let cbow = CbowConfig { dim: 32, seed, ..CbowConfig::default() };
    let (data, corpus) = synthetic_dataset(&spec, &PrepConfig::default(), &cbow, 64)?;
    println!("prepared in {:.1}s, vocab {}", started.elapsed().as_secs_f64(), data.vocab.len());
    let mut overrides = vec![
        "d_model=32".to_string(),
        "max_len=64".to_string(),
        format!("epochs={epochs}"),
        format!("loss={loss}"),
        format!("seed={seed}"),
    ];
    overrides.extend(args.iter().skip(3).cloned());
    let config = RunConfig::from_toml_with("", &overrides)?;
    let out = train(&config, &data, None)?;
    for r in &out.history {
        println!(
            "epoch {:2} loss {:.4} micro_auc {:.4} macro_auc {:.4} micro_f1 {:.4} macro_f1 {:.4} ({:.1}s)",
            r.epoch, r.train_loss, r.valid.micro_auc, r.valid.macro_auc, r.valid.micro_f1, r.valid.macro_f1, r.wall_seconds
        );
    }
    if let Some(t) = &out.test_report {
        println!("test (best epoch {}): {}", out.best_epoch, t.to_text().replace('\n', "  "));
    }
    let triggers: Vec<usize> = corpus.triggers.iter().map(|t| data.vocab.id(t)).collect();
    let test = data.test.as_ref().expect("test split");
    for (name, model) in [("best", &out.best.model), ("final", &out.last.model)] {
        let f = trigger_fidelity(model, test, &triggers)?;
        println!(
            "trigger argmax ({name}): docs {}/{} ({:.3}), pairs {}/{} ({:.3})",
            f.docs_hit, f.docs, f.doc_rate(), f.pairs_hit, f.pairs, f.pair_rate()
        );
    }
    println!("total {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
