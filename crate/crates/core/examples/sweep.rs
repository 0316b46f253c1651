//! Drop-ratio sweep: probe accuracy of short training runs across rho.

use cgnn::contrastive::ContrastiveConfig;
use cgnn::dataset::{generate_sbm, SbmConfig};
use cgnn::eval::{embed_full, linear_probe, ProbeConfig};
use cgnn::trainer::{train, TrainConfig};

fn main() -> cgnn::Result<()> {
    let data = generate_sbm(&SbmConfig::default())?;
    println!("rho,val_accuracy,test_accuracy");
    for rho in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let cfg = TrainConfig {
            contrastive: ContrastiveConfig { k: 64, rho, ..ContrastiveConfig::default() },
            iterations: 100,
            ..TrainConfig::default()
        };
        let report = train(&cfg, &data)?;
        let z = embed_full(report.params(), &data)?;
        let p = linear_probe(&z, &data.labels, &data.splits, &ProbeConfig::default())?;
        println!("{rho},{:.4},{:.4}", p.val_accuracy, p.accuracy);
    }
    Ok(())
}
