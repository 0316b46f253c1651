//! Train CGNN(GCN) on the SBM benchmark and save a checkpoint.
//!
//!     cargo run --release --example train_cgnn -- 300

use cgnn::checkpoint::{load_checkpoint, save_checkpoint};
use cgnn::contrastive::ContrastiveConfig;
use cgnn::dataset::{generate_sbm, SbmConfig};
use cgnn::trainer::{train, TrainConfig};

fn main() -> cgnn::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    let data = generate_sbm(&SbmConfig::default())?;
    let cfg = TrainConfig {
        contrastive: ContrastiveConfig { k: 128, ..ContrastiveConfig::default() },
        iterations,
        ..TrainConfig::default()
    };
    let report = train(&cfg, &data)?;

    let step = (iterations / 10).max(1);
    for (t, (l, b)) in report.loss_curve.iter().zip(&report.mi_bound_curve).enumerate().step_by(step) {
        println!("iter {t:5}  loss {l:10.3}  mi bound {b:.3}");
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let w = 10.min(iterations);
    println!(
        "first {w} mean {:.3}, last {w} mean {:.3}, {:.1}s",
        mean(&report.loss_curve[..w]),
        mean(&report.loss_curve[iterations - w..]),
        report.wall_time
    );

    let path = std::env::temp_dir().join("cgnn_example.ckpt");
    save_checkpoint(report.params(), &path)?;
    assert_eq!(&load_checkpoint(&path)?, report.params());
    println!("checkpoint: {}", path.display());
    Ok(())
}
