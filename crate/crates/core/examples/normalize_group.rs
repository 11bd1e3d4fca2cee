//! Normalize a small group of indicators against their common centroid and
//! map it back.
//!
//! ```text
//! cargo run --example normalize_group
//! ```

use immunocast::series::{denormalize, group_centroid, normalize, Dataset, Orientation};

fn main() -> immunocast::Result<()> {
    let ds = Dataset::from_values([
        ("exports", vec![120.0, 131.0, 127.0, 139.0, 134.0, 146.0]),
        ("retail", vec![3.1, 3.4, 3.3, 3.9, 3.8, 4.2]),
        ("jobs", vec![904.0, 911.0, 930.0, 925.0, 941.0, 950.0]),
    ])?;
    let centroid = group_centroid(&ds);
    println!("group centroid: {:?}", centroid.values);

    for orientation in [Orientation::Corrected, Orientation::Paper] {
        let (normalized, params) = normalize(&ds, &centroid, orientation)?;
        println!("\n{orientation:?}");
        for ts in normalized.series() {
            let row: Vec<String> = ts.values.iter().map(|v| format!("{v:8.3}")).collect();
            println!("  {:8} {}", ts.id, row.join(" "));
        }
        let back = denormalize(&normalized, &params)?;
        let worst = back
            .series()
            .iter()
            .zip(ds.series())
            .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        println!("  round trip max error {worst:.2e}");
    }
    Ok(())
}
