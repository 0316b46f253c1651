//! Silhouette of raw features, untrained embeddings and trained embeddings.

use cgnn::contrastive::ContrastiveConfig;
use cgnn::dataset::{generate_sbm, SbmConfig};
use cgnn::encoder::EncoderParams;
use cgnn::eval::{embed_full, silhouette};
use cgnn::trainer::{train, TrainConfig};

fn main() -> cgnn::Result<()> {
    let data = generate_sbm(&SbmConfig::default())?;
    let cfg = TrainConfig {
        contrastive: ContrastiveConfig { k: 128, ..ContrastiveConfig::default() },
        iterations: 200,
        ..TrainConfig::default()
    };
    let untrained = EncoderParams::init(cfg.arch, cfg.dims(data.num_features()), cfg.seed)?;
    let trained = train(&cfg, &data)?.final_params.expect("params");

    println!("raw:       {:.4}", silhouette(&data.features, &data.labels)?);
    println!("untrained: {:.4}", silhouette(&embed_full(&untrained, &data)?, &data.labels)?);
    println!("trained:   {:.4}", silhouette(&embed_full(&trained, &data)?, &data.labels)?);
    Ok(())
}
