//! Sweep the cluster count over a synthetic group with three planted laws.
//! The objective collapses at three clusters and flattens afterwards.
//!
//! ```text
//! cargo run --example cluster_sweep
//! ```

use immunocast::clustering::{kmeans, sweep_clusters, KMeansConfig};
use immunocast::series::{group_centroid, normalize, Orientation};
use immunocast::synth::three_law_group;

fn main() -> immunocast::Result<()> {
    let group = three_law_group(16, 0.001, 1)?;
    let (ds, _) = normalize(
        &group.dataset,
        &group_centroid(&group.dataset),
        Orientation::Corrected,
    )?;

    println!("c  objective");
    for row in sweep_clusters(&ds, 1..=6, &KMeansConfig::with_clusters(1))? {
        println!("{}  {:10.4}", row.c, row.objective);
    }

    let (partition, _) = kmeans(&ds, &KMeansConfig::with_clusters(3))?;
    println!("\nthree clusters:");
    for (r, members) in partition.blocks().iter().enumerate() {
        let ids: Vec<&str> = members
            .iter()
            .map(|&i| ds.series()[i].id.as_str())
            .collect();
        println!("  {r}: {}", ids.join(" "));
    }
    Ok(())
}
