//! Sample DropEdge views and look at what survives.

use cgnn::dataset::{generate_sbm, SbmConfig};
use cgnn::graph::{drop_edges, full_view};
use cgnn::rng::{stream_rng, Stream};

fn main() -> cgnn::Result<()> {
    let data = generate_sbm(&SbmConfig::default())?;
    let g = &data.graph;
    let m = g.num_undirected_edges();

    for rho in [0.0, 0.1, 0.3, 0.5, 0.9] {
        let mut rng = stream_rng(1, Stream::DropEdge, &[0, 0]);
        let view = drop_edges(g, rho, &mut rng)?;
        let kept = view.graph().num_undirected_edges();
        println!("rho {rho:.1}: kept {kept:4} of {m} (expected {:.0})", m as f64 * (1.0 - rho));
    }

    // Normalized operator entries of node 0 on the undropped graph.
    let full = full_view(g);
    let row: Vec<String> = full
        .graph()
        .neighbors(0)
        .iter()
        .map(|&v| format!("{v}:{:.3}", full.value(0, v).unwrap()))
        .collect();
    println!("node 0 row of D^-1/2 (A+I) D^-1/2: {}", row.join(" "));
    Ok(())
}
