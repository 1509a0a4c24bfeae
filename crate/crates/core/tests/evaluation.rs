use mrf_inn::dictionary::{build_dictionary, expand_grid, GridSpec, Segment};
use mrf_inn::evaluation::{heatmap_from_estimates, metrics, snr_sweep, HeatParam};
use mrf_inn::inn::{InnModel, ModelKind, Network};
use mrf_inn::sim::{SequenceSchedule, TissueParams};
use mrf_inn::training::{ParamScaler, TrainedModel};
use ndarray::Array2;

fn small_test_dict() -> mrf_inn::dictionary::Dictionary {
    let spec = GridSpec {
        ff: vec![Segment(0.1, 0.4, 0.9)],
        t1_h2o: vec![Segment(700.0, 500.0, 1700.0)],
        t1_fat: vec![Segment(250.0, 100.0, 350.0)],
        delta_f: vec![Segment(-30.0, 60.0, 30.0)],
        b1: vec![Segment(0.7, 0.3, 1.0)],
    };
    build_dictionary(&spec, &SequenceSchedule::reference(12), -420.0, 0).unwrap()
}

fn toy_model(seed: u64) -> TrainedModel {
    TrainedModel {
        kind: ModelKind::Inn,
        network: Network::Inn(InnModel::new(24, 16, 2, seed).unwrap()),
        scaler: ParamScaler::new([0.0, 500.0, 200.0, -50.0, 0.5], [1.0, 2000.0, 400.0, 50.0, 1.2]).unwrap(),
        seed,
    }
}

#[test]
fn degenerate_sweep_equals_noise_free_metrics() {
    let test = small_test_dict();
    let model = toy_model(1);
    let sweep = snr_sweep(&[("a", &model)], &test, &[f64::INFINITY], 1, 0.1, 7).unwrap();
    let level = &sweep[0].levels[0];
    assert_eq!(level.noise_sd, 0.0);
    let est = model.estimate(test.feature_matrix().view()).unwrap();
    let clean = metrics(test.param_matrix().view(), est.view()).unwrap();
    for j in 0..5 {
        assert!((level.mre_mean[j] - clean.params[j].mre).abs() < 1e-12);
        assert_eq!(level.mre_sd[j], 0.0);
    }
}

#[test]
fn sweep_is_seeded_and_shares_noise_across_models() {
    let test = small_test_dict();
    let (a, b) = (toy_model(1), toy_model(2));
    let levels = [15.0, 30.0];
    let first = snr_sweep(&[("a", &a), ("b", &b)], &test, &levels, 3, 0.1, 11).unwrap();
    let again = snr_sweep(&[("a", &a), ("b", &b)], &test, &levels, 3, 0.1, 11).unwrap();
    assert_eq!(first, again);
    let other_seed = snr_sweep(&[("a", &a)], &test, &levels, 3, 0.1, 12).unwrap();
    assert_ne!(first[0].levels, other_seed[0].levels);
    // A copy of model a listed second sees the same noise as the first entry.
    let twin = snr_sweep(&[("b", &b), ("a", &a)], &test, &levels, 3, 0.1, 11).unwrap();
    assert_eq!(twin[1].levels, first[0].levels);
    assert_eq!(twin[0].levels, first[1].levels);
}

#[test]
fn sweep_rejects_bad_levels() {
    let test = small_test_dict();
    let m = toy_model(1);
    assert!(snr_sweep(&[("a", &m)], &test, &[], 1, 0.1, 0).is_err());
    assert!(snr_sweep(&[("a", &m)], &test, &[20.0, 10.0], 1, 0.1, 0).is_err());
    assert!(snr_sweep(&[("a", &m)], &test, &[10.0], 0, 0.1, 0).is_err());
}

#[test]
fn standard_test_grid_heatmap_cells() {
    let params: Vec<TissueParams> = expand_grid(&GridSpec::standard_testing()).unwrap();
    let truth = Array2::from_shape_fn((params.len(), 5), |(i, j)| params[i].to_array()[j]);
    let map = heatmap_from_estimates(truth.view(), truth.view(), truth.view(), HeatParam::T1Fat).unwrap();
    assert_eq!(map.ff_values.len(), 10);
    assert_eq!(map.t1_h2o_values.len(), 10);
    assert!(map.counts.iter().flatten().all(|&c| c == 336));
    assert!(map.cells.iter().flatten().all(|&c| c == 0.0));
}

#[test]
fn dimension_mismatch_is_reported() {
    let test = small_test_dict();
    let wrong = TrainedModel {
        network: Network::Inn(InnModel::new(30, 8, 2, 0).unwrap()),
        ..toy_model(0)
    };
    assert!(matches!(
        mrf_inn::evaluation::estimate_dictionary(&wrong, &test),
        Err(mrf_inn::Error::Shape(_))
    ));
}
