use toa_lift::bench::{rows_csv, run_campaign, saddle_loop_check, trials_csv};
use toa_lift::objectives::ObjectiveKind;
use toa_lift::optimizer::SolverSettings;
use toa_lift::scenario::GeneratorConfig;

fn row(c: &toa_lift::bench::Campaign, kind: ObjectiveKind) -> &toa_lift::bench::BenchmarkRow {
    c.rows.iter().find(|r| r.kind == kind).unwrap()
}

#[test]
fn squared_pair_desk_scale() {
    let cfg = GeneratorConfig::new(2, 4, 0);
    let c = run_campaign(
        &cfg,
        &[ObjectiveKind::F2, ObjectiveKind::FL2],
        1000,
        &SolverSettings::default(),
    )
    .unwrap();
    assert_eq!(row(&c, ObjectiveKind::FL2).failure_count, 0);
    assert!(
        row(&c, ObjectiveKind::F2).failure_count > 10,
        "{:?}",
        row(&c, ObjectiveKind::F2)
    );
}

#[test]
fn range_pair_desk_scale() {
    let cfg = GeneratorConfig::new(2, 4, 0);
    let c = run_campaign(
        &cfg,
        &[ObjectiveKind::F1, ObjectiveKind::FL1],
        1000,
        &SolverSettings::default(),
    )
    .unwrap();
    assert_eq!(row(&c, ObjectiveKind::FL1).failure_count, 0);
    assert!(row(&c, ObjectiveKind::F1).failure_count > 10);
}

#[test]
fn squared_failures_at_minima_lift_to_saddles() {
    for (dim, n) in [(2, 4), (2, 5), (3, 4)] {
        let cfg = GeneratorConfig::new(dim, n, 77);
        let c = run_campaign(&cfg, &[ObjectiveKind::F2], 600, &SolverSettings::default()).unwrap();
        let summary = saddle_loop_check(&cfg, &c.trials).unwrap();
        assert_eq!(
            summary.verified_minima, summary.lifted_saddles,
            "{summary:?}"
        );
        assert!(summary.counterexamples.is_empty());
    }
}

#[test]
fn kind_subsets_share_scenarios_and_starts() {
    let cfg = GeneratorConfig::new(3, 6, 4);
    let settings = SolverSettings::default();
    let all = run_campaign(&cfg, &ObjectiveKind::ALL, 50, &settings).unwrap();
    let one = run_campaign(&cfg, &[ObjectiveKind::F2], 50, &settings).unwrap();
    let from_all: Vec<_> = all
        .trials
        .iter()
        .filter(|t| t.kind == ObjectiveKind::F2)
        .collect();
    for (a, b) in from_all.iter().zip(&one.trials) {
        assert_eq!(a.error, b.error);
        assert_eq!(a.iterations, b.iterations);
    }
}

#[test]
fn seeds_change_the_campaign_and_reruns_do_not() {
    let settings = SolverSettings::default();
    let a = run_campaign(
        &GeneratorConfig::new(2, 5, 1),
        &ObjectiveKind::ALL,
        100,
        &settings,
    )
    .unwrap();
    let b = run_campaign(
        &GeneratorConfig::new(2, 5, 1),
        &ObjectiveKind::ALL,
        100,
        &settings,
    )
    .unwrap();
    let c = run_campaign(
        &GeneratorConfig::new(2, 5, 2),
        &ObjectiveKind::ALL,
        100,
        &settings,
    )
    .unwrap();
    assert_eq!(trials_csv(&a.trials), trials_csv(&b.trials));
    assert_eq!(rows_csv(&a.rows), rows_csv(&b.rows));
    assert_ne!(trials_csv(&a.trials), trials_csv(&c.trials));
}
