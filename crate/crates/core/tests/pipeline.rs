use tallmh::data::{generate, read_dataset, write_dataset, SyntheticKind, SyntheticSpec};
use tallmh::diagnostics::{compare_posteriors, eval_summary, gelman_rubin};
use tallmh::models::{Family, Model, Prior};
use tallmh::proxy::{build_proxy, ProxyPolicy};
use tallmh::samplers::{
    confidence_run, find_map, mh_run, read_trace, write_trace, ConfidenceConfig, DeltaSchedule, ProxySetup, RandomWalk,
};

#[test]
fn stored_dataset_reproduces_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(&SyntheticSpec::new(SyntheticKind::Gaussian1d, 2000, 5)).unwrap();
    let path = dir.path().join("g.bin");
    write_dataset(&data, &path).unwrap();
    let back = read_dataset(&path).unwrap();
    assert_eq!(data, back);

    let model = Model::new(Family::GaussianLocationScale, Prior::Flat);
    let map = find_map(&model, &back, &model.default_start(&back), 1e-10)
        .unwrap()
        .theta;
    let run = |d| {
        let setup = ProxySetup {
            proxy: build_proxy(&model, d, &map).unwrap(),
            policy: ProxyPolicy::SingleAtMap,
        };
        confidence_run(
            &model,
            d,
            &ConfidenceConfig::default(),
            Some(setup),
            &mut RandomWalk::for_data_size(2000),
            &map,
            300,
            8,
        )
        .unwrap()
        .0
    };
    let a = run(&data);
    assert_eq!(a, run(&back));

    let tpath = dir.path().join("chain.csv");
    write_trace(&a, &tpath, serde_json::json!({ "seed": 8 })).unwrap();
    let (t, meta) = read_trace(&tpath).unwrap();
    assert_eq!(t, a);
    assert_eq!(meta.run["seed"], 8);
}

#[test]
fn unreachable_bound_matches_mh_and_diagnostics_agree() {
    let data = generate(&SyntheticSpec::new(SyntheticKind::GammaFromCovariates, 400, 2)).unwrap();
    let model = Model::new(Family::Gamma { kappa: 2.0 }, Prior::Flat);
    let map = find_map(&model, &data, &model.default_start(&data), 1e-10)
        .unwrap()
        .theta;
    let cfg = ConfidenceConfig {
        schedule: DeltaSchedule::Unreachable,
        ..Default::default()
    };
    let mh = mh_run(&model, &data, &mut RandomWalk::for_data_size(400), &map, 200, 4).unwrap();
    let (cs, _) = confidence_run(
        &model,
        &data,
        &cfg,
        None,
        &mut RandomWalk::for_data_size(400),
        &map,
        200,
        4,
    )
    .unwrap();
    assert_eq!(mh.accepted, cs.accepted);
    assert_eq!(mh.states, cs.states);

    let cmp = compare_posteriors(&mh, &cs).unwrap();
    assert!(cmp.iter().all(|c| c.mean_diff == 0.0 && c.wasserstein == 0.0));
    assert_eq!(eval_summary(&mh).unwrap().median_fraction, 1.0);
    let cols: Vec<Vec<f64>> = [&mh, &cs].iter().map(|t| t.coordinate(0)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    assert!(gelman_rubin(&refs).unwrap() < 1.0 + 1e-12);
}
