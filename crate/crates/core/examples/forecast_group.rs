//! End to end: cluster a planted group, fit one model per cluster, refine
//! poorly served members and forecast three steps past a training cutoff.
//!
//! ```text
//! cargo run --release --example forecast_group
//! ```

use immunocast::pipeline::{count_model_fits, run_pipeline, ModelSource, PipelineConfig};
use immunocast::synth::three_law_group;

fn main() -> immunocast::Result<()> {
    let ds = three_law_group(16, 0.005, 1)?.dataset;
    let mut cfg = PipelineConfig::default();
    cfg.kmeans.c = 3;
    cfg.kmeans.seed = 5;
    cfg.mcsa.seed = 5;
    cfg.train_cutoff = Some(2012);

    let (general, report) = run_pipeline(&ds, &cfg)?;
    for m in &general.models {
        println!(
            "cluster {}: {}  (AFER {:.3}%)",
            m.cluster, m.model.analytic, m.model.train_afer
        );
    }
    println!();
    println!(
        "{:6} {:>3} {:>8} {:>10}  forecasts",
        "id", "c", "source", "hold err"
    );
    for s in &report.series {
        let source = match s.model_source {
            ModelSource::General { .. } => "general",
            ModelSource::Refined => "refined",
        };
        let err = s.horizon_error.map_or("-".into(), |e| format!("{e:.3}%"));
        let f: Vec<String> = s
            .forecasts
            .iter()
            .map(|v| v.map_or("invalid".into(), |v| format!("{v:.2}")))
            .collect();
        println!(
            "{:6} {:>3} {:>8} {:>10}  {}",
            s.id,
            s.cluster,
            source,
            err,
            f.join(" ")
        );
    }
    println!(
        "\n{} model fits for {} series",
        count_model_fits(&report),
        report.series.len()
    );
    Ok(())
}
