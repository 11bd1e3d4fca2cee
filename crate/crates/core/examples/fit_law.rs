//! Recover a generating law from a single series with the clonal selection
//! search, then print the convergence trace.
//!
//! ```text
//! cargo run --release --example fit_law
//! ```

use immunocast::genome::Antibody;
use immunocast::mcsa::{antibody_afer, mcsa_run, McsaConfig};
use immunocast::synth::iterate;

fn main() -> immunocast::Result<()> {
    let law = Antibody::parse("Q+_*_a_b_+_-_a_b_c", &[])?;
    let series = iterate(&law.to_tree(), &[2.0, 3.0, 2.5], 30).expect("law iterates");
    println!(
        "generating law {} scores {:.4}%",
        law.to_tree().to_analytic_string(),
        antibody_afer(&law, &series)?
    );

    let cfg = McsaConfig {
        seed: 3,
        ..McsaConfig::default()
    };
    let model = mcsa_run(&series, &cfg)?;
    println!("fitted {} (order {})", model.analytic, model.order_k);
    println!("train AFER {:.4}%", model.train_afer);
    for s in model.trace.iter().filter(|s| s.iteration % 100 == 0) {
        println!(
            "  iteration {:4}  best {:8.4}  invalid {}",
            s.iteration, s.best_afer, s.invalid_count
        );
    }
    Ok(())
}
