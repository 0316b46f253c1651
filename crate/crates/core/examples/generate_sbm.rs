//! Generate a stochastic block model dataset and write it in the on-disk
//! formats the CLI reads.
//!
//!     cargo run --example generate_sbm -- /tmp/sbm

use std::path::PathBuf;

use cgnn::dataset::{generate_sbm, load_dataset, write_edge_list, write_features_binary, write_labels, SbmConfig, SplitSpec};

fn main() -> cgnn::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("cgnn_sbm"));
    std::fs::create_dir_all(&out).expect("create output dir");

    let cfg = SbmConfig::default();
    let data = generate_sbm(&cfg)?;
    println!(
        "{} nodes, {} undirected edges, {} features, {} classes",
        data.num_nodes(),
        data.graph.num_undirected_edges(),
        data.num_features(),
        data.num_classes()
    );

    // Count within- and between-block edges.
    let block = |v: usize| v / cfg.nodes_per_block;
    let (inside, across): (Vec<_>, Vec<_>) = data.graph.undirected_edges().partition(|&(u, v)| block(u) == block(v));
    println!("within-block {} / between-block {}", inside.len(), across.len());

    write_edge_list(&out.join("edges.txt"), &data.graph)?;
    write_features_binary(&out.join("features.bin"), &data.features)?;
    write_labels(&out.join("labels.txt"), &data.labels)?;

    let back = load_dataset(
        &out.join("edges.txt"),
        &out.join("features.bin"),
        &out.join("labels.txt"),
        &SplitSpec::default(),
    )?;
    assert_eq!(back, data);
    println!("round trip ok, files in {}", out.display());
    Ok(())
}
