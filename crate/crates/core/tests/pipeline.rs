mod common;

use immunocast::genome::{Antibody, SbtTemplate};
use immunocast::mcsa::{antibody_afer, FittedModel};
use immunocast::pipeline::{
    count_model_fits, fit_cluster_models, fit_general_models, forecast_series, refine,
    run_pipeline, ModelSource, PipelineConfig,
};
use immunocast::series::{Orientation, SeriesNormalization};
use immunocast::synth::three_law_group;

fn planted_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.kmeans.c = 3;
    cfg.kmeans.seed = 5;
    cfg.mcsa.seed = 5;
    cfg.train_cutoff = Some(2012);
    cfg
}

fn quick_config() -> PipelineConfig {
    let mut cfg = planted_config();
    cfg.mcsa.iterations = 60;
    cfg
}

/// `d[j] = d[j-1] + d[j-2] - d[j-3]` has characteristic roots 1, 1, -1, so
/// every solution is `A + B·j + C·(-1)^j`. Fit those from the last three
/// values and read off the next ones.
fn closed_form_continuation(d: &[f64], h: usize) -> Vec<f64> {
    let n = d.len();
    let js = [n - 3, n - 2, n - 1];
    let sign = |j: usize| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    // Solve the 3x3 system by Cramer's rule.
    let m: Vec<[f64; 3]> = js.iter().map(|&j| [1.0, j as f64, sign(j)]).collect();
    let rhs: Vec<f64> = js.iter().map(|&j| d[j]).collect();
    let det = |a: &[[f64; 3]]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let base = det(&m);
    let coef: Vec<f64> = (0..3)
        .map(|col| {
            let mut a = m.clone();
            for row in 0..3 {
                a[row][col] = rhs[row];
            }
            det(&a) / base
        })
        .collect();
    (n..n + h)
        .map(|j| coef[0] + coef[1] * j as f64 + coef[2] * sign(j))
        .collect()
}

#[test]
fn linear_recurrence_forecasts_match_closed_form() {
    let law = Antibody::parse("_+_-_a_a_-_+_a_b_c", &[]).unwrap();
    let model = FittedModel::from_antibody(law, 0.0, 0).unwrap();
    let history = [120.0, 131.0, 127.0, 139.0, 134.0, 146.0, 142.0, 155.0];
    let norm = SeriesNormalization {
        id: "x".into(),
        orientation: Orientation::Corrected,
        h_s: 1.7,
        h_t: 4.4,
        s_bar: 88.0,
        t_bar: 136.75,
    };
    let f = forecast_series(&history, &model, 0.0, &norm, 3).unwrap();
    let want = closed_form_continuation(&history, 3);
    for (got, want) in f.values.iter().zip(&want) {
        let got = got.unwrap();
        assert!((got - want).abs() <= 1e-9 * want.abs(), "{got} vs {want}");
    }
}

#[test]
fn identity_law_repeats_the_last_value() {
    let ab = Antibody::parse("_+_-_a_a_+_-_a_a_a", &[]).unwrap();
    let model = FittedModel::from_antibody(ab, 0.0, 0).unwrap();
    let norm = SeriesNormalization {
        id: "x".into(),
        orientation: Orientation::Paper,
        h_s: 0.2,
        h_t: 3.0,
        s_bar: 5.0,
        t_bar: 30.0,
    };
    let f = forecast_series(&[25.0, 31.0, 37.5], &model, 0.0, &norm, 4).unwrap();
    for v in f.values {
        assert!((v.unwrap() - 37.5).abs() < 1e-9);
    }
}

#[test]
fn report_is_complete_and_consistent() {
    let ds = three_law_group(16, 0.005, 1).unwrap().dataset;
    let cfg = quick_config();
    let (general, report) = run_pipeline(&ds, &cfg).unwrap();
    assert_eq!(report.models.len(), 3);
    assert_eq!(general.models.len(), 3);
    let ids: Vec<&str> = report.series.iter().map(|s| s.id.as_str()).collect();
    let expected: Vec<&str> = ds.series().iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, expected);
    for r in 0..3 {
        assert!(report.series.iter().any(|s| s.cluster == r));
    }
    for s in &report.series {
        assert_eq!(s.forecasts.len(), cfg.horizon);
        assert_eq!(s.forecast_epochs, vec![2013, 2014, 2015]);
        match s.model_source {
            ModelSource::General { cluster } => assert_eq!(cluster, s.cluster),
            ModelSource::Refined => {
                let refit = s.refit.as_ref().unwrap();
                assert!(refit.accepted);
                assert!(s.train_afer.unwrap() < s.general_afer.unwrap_or(f64::INFINITY));
            }
        }
        if let Some(refit) = &s.refit {
            let general = s.general_afer.unwrap_or(f64::INFINITY);
            assert!(general > cfg.refine_threshold);
            // warm start contains the general antibody, so the refit never scores worse
            assert!(refit.train_afer.unwrap_or(f64::INFINITY) <= general);
        } else {
            assert!(s.general_afer.unwrap() <= cfg.refine_threshold);
        }
    }
    let refits = report.series.iter().filter(|s| s.refit.is_some()).count();
    assert_eq!(count_model_fits(&report), 3 + refits);
}

#[test]
fn pipeline_is_deterministic() {
    let ds = three_law_group(16, 0.005, 2).unwrap().dataset;
    let cfg = quick_config();
    let a = run_pipeline(&ds, &cfg).unwrap().1.to_json_pretty();
    let b = run_pipeline(&ds, &cfg).unwrap().1.to_json_pretty();
    assert_eq!(a, b);
}

#[test]
fn infinite_threshold_means_no_refinement() {
    let ds = three_law_group(16, 0.005, 1).unwrap().dataset;
    let mut cfg = quick_config();
    cfg.refine_threshold = f64::INFINITY;
    let general = fit_general_models(&ds, &cfg).unwrap();
    let report = refine(&ds, &general, &cfg).unwrap();
    assert_eq!(report.refined_count(), 0);
    assert_eq!(count_model_fits(&report), 3);
    for s in &report.series {
        assert!(s.refit.is_none());
        assert_eq!(s.train_afer, s.general_afer);
    }
}

#[test]
fn members_of_one_cluster_get_their_own_forecasts() {
    let ds = three_law_group(16, 0.005, 3).unwrap().dataset;
    let mut cfg = quick_config();
    cfg.refine_threshold = f64::INFINITY;
    let (general, report) = run_pipeline(&ds, &cfg).unwrap();
    let k = general
        .models
        .iter()
        .map(|m| m.model.order_k)
        .max()
        .unwrap();
    for (i, a) in report.series.iter().enumerate() {
        for b in &report.series[i + 1..] {
            if a.cluster != b.cluster {
                continue;
            }
            let wa = &general.prepared.normalized.get(&a.id).unwrap().values;
            let wb = &general.prepared.normalized.get(&b.id).unwrap().values;
            if wa[wa.len() - k..] != wb[wb.len() - k..] && a.forecasts[0].is_some() {
                assert_ne!(a.forecasts, b.forecasts, "{} and {}", a.id, b.id);
            }
        }
    }
}

#[test]
fn planted_clusters_are_recovered_and_fit_near_the_noise_floor() {
    let group = three_law_group(16, 0.005, 1).unwrap();
    let general = fit_general_models(&group.dataset, &planted_config()).unwrap();
    // the partition matches the generating clusters up to relabeling
    let mut label_of = [None; 3];
    for (i, &truth) in group.truth.iter().enumerate() {
        let r = general.partition.cluster_of(i);
        assert_eq!(*label_of[truth].get_or_insert(r), r);
    }
    let laws = [
        "_+_-_a_a_-_+_a_b_c",
        "_+_-_a_a_+_-_a_b_c",
        "_+_-_a_a_-_+_a_c_d",
    ];
    for (truth, law) in laws.iter().enumerate() {
        let r = label_of[truth].unwrap();
        // these laws commute with positive affine maps, so they hold in normalized space too
        let floor = antibody_afer(
            &Antibody::parse(law, &[]).unwrap(),
            &general.clusters.centroids[r],
        )
        .unwrap();
        let fitted = general.models[r].model.train_afer;
        assert!(
            fitted <= 2.0 * floor,
            "cluster {r}: fitted {fitted} vs generating law {floor}"
        );
    }
}

#[test]
fn configuration_is_validated() {
    let ds = three_law_group(16, 0.0, 1).unwrap().dataset;
    let mut cfg = quick_config();
    cfg.train_cutoff = Some(2005);
    assert!(fit_general_models(&ds, &cfg).unwrap_err().is_usage());
    cfg.train_cutoff = Some(1990);
    assert!(fit_general_models(&ds, &cfg).is_err());
    let mut cfg = quick_config();
    cfg.horizon = 0;
    assert!(fit_general_models(&ds, &cfg).is_err());
    let mut cfg = quick_config();
    cfg.refine_threshold = 0.0;
    assert!(fit_general_models(&ds, &cfg).is_err());
}

#[test]
fn zero_in_a_centroid_needs_the_shift() {
    let centroid = vec![
        -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0,
    ];
    let mut cfg = PipelineConfig::default();
    cfg.mcsa.iterations = 20;
    cfg.mcsa.template = SbtTemplate::new(1).unwrap();
    let err = fit_cluster_models(std::slice::from_ref(&centroid), &cfg).unwrap_err();
    assert!(err.to_string().contains("cluster 0"), "{err}");

    cfg.epsilon_shift = Some(100.0);
    let models = fit_cluster_models(std::slice::from_ref(&centroid), &cfg).unwrap();
    assert_eq!(models[0].shift, 100.0);
    let shifted: Vec<f64> = centroid.iter().map(|v| v + 100.0).collect();
    let rescored = antibody_afer(&models[0].model.antibody, &shifted).unwrap();
    assert!(common::rel_close(
        rescored,
        models[0].model.train_afer,
        1e-12
    ));
}
