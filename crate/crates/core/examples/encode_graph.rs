//! Encode a graph with the GCN and mean-aggregator SAGE backbones.

use cgnn::dataset::{generate_sbm, SbmConfig};
use cgnn::encoder::{encode, Arch, Dims, EncoderParams};
use cgnn::graph::full_view;

fn main() -> cgnn::Result<()> {
    let data = generate_sbm(&SbmConfig { nodes_per_block: 30, ..SbmConfig::default() })?;
    let view = full_view(&data.graph);

    for arch in [Arch::Gcn, Arch::Sage] {
        let params = EncoderParams::init(arch, Dims::new(data.num_features(), 32, 8), 0)?;
        let z = encode(&params, &view, &data.features)?;
        let n = params.tensors().map(|t| t.len()).sum::<usize>();
        println!("{arch}: {} parameters, output {:?}", n, z.shape());
        let head: Vec<String> = z.row(0).iter().take(4).map(|v| format!("{v:+.3}")).collect();
        println!("  node 0: [{} ...]", head.join(", "));
    }
    Ok(())
}
