//! Cosine similarity of one node's embedding across ten DropEdge
//! perturbations, for an untrained and a trained encoder.

use cgnn::contrastive::ContrastiveConfig;
use cgnn::dataset::{generate_sbm, SbmConfig};
use cgnn::encoder::EncoderParams;
use cgnn::eval::stability_matrix;
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

    let node = 42;
    for (name, params) in [("untrained", &untrained), ("trained", &trained)] {
        let r = stability_matrix(params, &data, node, 0.3, 10, 0)?;
        println!("{name}: mean off-diagonal cosine {:.4}", r.mean_similarity);
        for i in 0..3 {
            let row: Vec<String> = r.similarity_matrix.row(i).iter().take(5).map(|v| format!("{v:.3}")).collect();
            println!("  {}", row.join(" "));
        }
    }
    let out = std::env::temp_dir().join("cgnn_stability.csv");
    stability_matrix(&trained, &data, node, 0.3, 10, 0)?.write_csv(&out)?;
    println!("matrix written to {}", out.display());
    Ok(())
}
