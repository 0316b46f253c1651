//! Linear probe on raw features versus trained CGNN embeddings.

use cgnn::contrastive::ContrastiveConfig;
use cgnn::dataset::{generate_sbm, SbmConfig};
use cgnn::eval::{embed_full, linear_probe, ProbeConfig};
use cgnn::trainer::{train, TrainConfig};

fn main() -> cgnn::Result<()> {
    let data = generate_sbm(&SbmConfig::default())?;
    let probe = ProbeConfig::default();

    let raw = linear_probe(&data.features, &data.labels, &data.splits, &probe)?;
    println!("raw features: test {:.3} (val {:.3})", raw.accuracy, raw.val_accuracy);

    let cfg = TrainConfig {
        contrastive: ContrastiveConfig { k: 128, ..ContrastiveConfig::default() },
        iterations: 200,
        ..TrainConfig::default()
    };
    let report = train(&cfg, &data)?;
    let z = embed_full(report.params(), &data)?;
    let learned = linear_probe(&z, &data.labels, &data.splits, &probe)?;
    println!("cgnn(gcn):    test {:.3} (val {:.3})", learned.accuracy, learned.val_accuracy);
    for (k, acc) in learned.per_class_accuracy.iter().enumerate() {
        println!("  class {k}: {}", acc.map_or("-".into(), |a| format!("{a:.3}")));
    }
    Ok(())
}
