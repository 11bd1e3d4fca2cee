//! Decode antibody strings, print their formulas and evaluate them on a lag
//! window. Pass a string and a window to try your own:
//!
//! ```text
//! cargo run --example eval_antibody -- 'Q+_*_a_b_+_-_a_b_c' 4,3,2,1,1
//! ```

use immunocast::genome::Antibody;

fn show(text: &str, constants: &[f64], window: &[f64]) -> immunocast::Result<()> {
    let ab = Antibody::parse(text, constants)?;
    let tree = ab.to_tree();
    let value = match tree.evaluate(window)? {
        Some(v) => v.to_string(),
        None => "invalid".into(),
    };
    println!("{text}");
    println!("  order   {}", ab.effective_order()?);
    println!("  formula {}", tree.to_analytic_string());
    println!("  value   {value} on {window:?}");
    Ok(())
}

fn main() -> immunocast::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [text, window] = args.as_slice() {
        let window: Vec<f64> = window
            .split(',')
            .map(|v| v.trim().parse().unwrap_or(f64::NAN))
            .collect();
        return show(text, &[], &window);
    }
    let window = [3.0, 5.0, 7.0, 11.0, 13.0];
    show("_+_-_a_a_-_+_a_b_c", &[], &window)?;
    show("_*_+_?_e_-_-_a_b_?", &[2.0, 4.0], &window)?;
    show("L*S/SeSdC-S+EaCbEa", &[], &window)?;
    show("L*S/SeSdC-S+EaCbEa", &[], &[1.0; 5])?;
    Ok(())
}
