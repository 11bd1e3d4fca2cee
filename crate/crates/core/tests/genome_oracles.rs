mod common;

use immunocast::genome::{random_antibody, Antibody, SbtTemplate};
use immunocast::rng::stream;
use proptest::prelude::*;
use rand::Rng;

const SAMPLE: &str = "L*S/SeSdC-S+EaCbEa";

fn random_window<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(0.1..20.0)).collect()
}

/// Constants rounded to six significant digits, so the printed form is exact.
fn at_print_precision(v: f64) -> f64 {
    format!("{v:.5e}").parse().unwrap()
}

#[test]
fn evaluator_matches_string_walker() {
    let mut g = stream(11, &[]);
    let mut compared = 0;
    let mut attempts = 0;
    while compared < 500 {
        attempts += 1;
        assert!(attempts < 50_000, "too few finite outcomes");
        let s = g.random_range(1..=4);
        let template = SbtTemplate::new(s).unwrap();
        let ab = random_antibody(template, &mut g, (-10.0, 10.0));
        let window = random_window(&mut g, template.k_max());
        let ours = ab.to_tree().evaluate(&window).unwrap();
        let reference = common::walk_eval(&ab.encode(), &ab.constants, &window);
        assert_eq!(
            ours.is_some(),
            reference.is_some(),
            "{} on {window:?}",
            ab.encode()
        );
        if let (Some(a), Some(b)) = (ours, reference) {
            assert!(
                common::rel_close(a, b, 1e-12),
                "{}: {a} vs {b}",
                ab.encode()
            );
            compared += 1;
        }
    }
}

#[test]
fn rendering_evaluates_to_the_same_value() {
    let mut g = stream(12, &[]);
    let mut compared = 0;
    while compared < 500 {
        let template = SbtTemplate::new(g.random_range(1..=3)).unwrap();
        let mut ab = random_antibody(template, &mut g, (-250.0, 250.0));
        let constants: Vec<f64> = ab
            .constants
            .iter()
            .map(|&c| at_print_precision(c))
            .collect();
        ab = Antibody::parse(&ab.encode(), &constants).unwrap();
        let window = random_window(&mut g, template.k_max());
        let tree = ab.to_tree();
        let text = tree.to_analytic_string();
        let direct = tree.evaluate(&window).unwrap();
        let printed = common::infix_eval(&text, &window);
        assert_eq!(direct.is_some(), printed.is_some(), "{text}");
        if let (Some(a), Some(b)) = (direct, printed) {
            assert!(common::rel_close(a, b, 1e-6), "{text}: {a} vs {b}");
            compared += 1;
        }
    }
}

#[test]
fn example_string_at_unit_lags_is_invalid() {
    // ln(cos(sin(e + cos 1) - e) * sin(1)): the cosine term is negative
    let tree = Antibody::parse(SAMPLE, &[]).unwrap().to_tree();
    let ones = [1.0; 5];
    assert_eq!(tree.evaluate(&ones).unwrap(), None);
    assert_eq!(common::walk_eval(SAMPLE, &[], &ones), None);
    let e = std::f64::consts::E;
    let inner = ((e + 1f64.cos()).sin() - e).cos() * 1f64.sin();
    assert!(inner < 0.0);
}

#[test]
fn example_string_on_other_windows() {
    let tree = Antibody::parse(SAMPLE, &[]).unwrap().to_tree();
    let mut g = stream(13, &[]);
    let mut valid = 0;
    for _ in 0..200 {
        let w = random_window(&mut g, 5);
        let a = tree.evaluate(&w).unwrap();
        let b = common::walk_eval(SAMPLE, &[], &w);
        let c = common::infix_eval(&tree.to_analytic_string(), &w);
        assert_eq!(a.is_some(), b.is_some());
        assert_eq!(a.is_some(), c.is_some());
        if let (Some(a), Some(b), Some(c)) = (a, b, c) {
            assert!(common::rel_close(a, b, 1e-12));
            assert!(common::rel_close(a, c, 1e-12));
            valid += 1;
        }
    }
    assert!(valid > 0);
}

#[test]
fn walker_agrees_on_hand_written_strings() {
    let w = [3.0, 5.0, 7.0, 11.0, 13.0];
    let cases: [(&str, &[f64], f64); 3] = [
        ("_+_-_a_a_+_-_a_b_c", &[], 3.0 - 5.0 + 7.0),
        (
            "Q+_*_a_b_+_-_a_b_c",
            &[],
            (3.0f64 - 5.0 + 7.0 + 15.0).sqrt(),
        ),
        (
            "_*_+_?_e_-_-_a_b_?",
            &[2.0, 4.0],
            (3.0 - 5.0 - 4.0) * (2.0 + 13.0),
        ),
    ];
    for (s, constants, want) in cases {
        let ours = Antibody::parse(s, constants)
            .unwrap()
            .to_tree()
            .evaluate(&w)
            .unwrap()
            .unwrap();
        let walked = common::walk_eval(s, constants, &w).unwrap();
        assert!((ours - want).abs() < 1e-12, "{s}: {ours}");
        assert!((walked - want).abs() < 1e-12, "{s}: walker {walked}");
    }
}

proptest! {
    #[test]
    fn parse_encode_round_trip(seed in any::<u64>(), s in 1usize..=4) {
        let template = SbtTemplate::new(s).unwrap();
        let ab = random_antibody(template, &mut stream(seed, &[]), (-250.0, 250.0));
        let text = ab.encode();
        prop_assert_eq!(text.chars().count(), template.sign_count());
        prop_assert_eq!(Antibody::parse(&text, &ab.constants).unwrap(), ab);
    }

    #[test]
    fn mangled_strings_fail_with_an_offset_inside_the_string(seed in any::<u64>(), cut in 0usize..18, junk in "[#%&0-9]") {
        let ab = random_antibody(SbtTemplate::new(1).unwrap(), &mut stream(seed, &[]), (-1.0, 1.0));
        let mut chars: Vec<char> = ab.encode().chars().collect();
        chars[cut] = junk.chars().next().unwrap();
        let text: String = chars.into_iter().collect();
        match Antibody::parse(&text, &ab.constants) {
            Err(immunocast::Error::Parse { offset, .. }) => prop_assert!(offset <= cut),
            other => prop_assert!(false, "expected a parse error, got {:?}", other),
        }
    }
}
