//! Scenario file -> training -> Q-table file -> evaluation -> report file.

use qbid::harness::{
    evaluate, generate_scenario, sweep_lambda, sweep_seeds, train, write_curve_csv,
    write_sweep_csv, ExperimentConfig, GeneratorSpec, RunReport, Scenario,
};
use qbid::qlearning::QTable;
use qbid::simulator::MINUTES_PER_DAY;

fn day_scenario(seed: u64) -> Scenario {
    generate_scenario(
        &GeneratorSpec {
            horizon_minutes: MINUTES_PER_DAY,
            ..GeneratorSpec::desk()
        },
        seed,
    )
    .unwrap()
}

fn quick() -> ExperimentConfig {
    ExperimentConfig {
        episodes: 3,
        ..ExperimentConfig::default()
    }
}

#[test]
fn files_round_trip_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = day_scenario(1);
    let path = dir.path().join("scenario.json");
    scenario
        .write_json(std::fs::File::create(&path).unwrap())
        .unwrap();
    let scenario = Scenario::read_json(std::fs::File::open(&path).unwrap()).unwrap();

    let cfg = quick();
    let table = train(&scenario, 0.4, cfg.episodes, &cfg).unwrap();
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let reloaded = QTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(reloaded, table);

    let a = evaluate(
        &scenario,
        &table.extract_policy(),
        &cfg,
        scenario.sim.seed,
        Some(0.4),
    )
    .unwrap();
    let b = evaluate(
        &scenario,
        &reloaded.extract_policy(),
        &cfg,
        scenario.sim.seed,
        Some(0.4),
    )
    .unwrap();
    assert_eq!(a, b);

    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    assert_eq!(RunReport::read_csv(buf.as_slice()).unwrap(), a);
}

#[test]
fn evaluation_leaves_the_table_alone() {
    let scenario = day_scenario(2);
    let cfg = quick();
    let table = train(&scenario, 0.0, cfg.episodes, &cfg).unwrap();
    let before = table.clone();
    evaluate(&scenario, &table.extract_policy(), &cfg, 5, None).unwrap();
    assert_eq!(table, before);
}

#[test]
fn lifts_are_recomputable_from_the_totals() {
    let scenario = day_scenario(3);
    let cfg = quick();
    let table = train(&scenario, 1.0, cfg.episodes, &cfg).unwrap();
    let r = evaluate(
        &scenario,
        &table.extract_policy(),
        &cfg,
        scenario.sim.seed,
        Some(1.0),
    )
    .unwrap();
    let lift = |p: f64, b: f64| 100.0 * (p - b) / b.abs();
    assert_eq!(r.deltas.spend, Some(lift(r.policy.spend, r.baseline.spend)));
    assert_eq!(
        r.deltas.margin,
        Some(lift(r.policy.margin, r.baseline.margin))
    );
    assert_eq!(
        r.deltas.budget_util,
        Some(lift(r.policy.budget_util, r.baseline.budget_util))
    );
    assert_eq!(r.deltas.happy, Some(lift(r.policy.happy, r.baseline.happy)));
    assert_eq!(r.policy.spend, r.policy_epochs.last().unwrap().spend);
    assert_eq!(r.policy_epochs.len(), 24);
}

#[test]
fn sweep_has_one_row_per_lambda() {
    let scenario = day_scenario(4);
    let sweep = sweep_lambda(&scenario, &[0.0, 0.5, 1.0], &quick()).unwrap();
    assert_eq!(sweep.rows.len(), 3);
    assert_eq!(sweep.runs.len(), 3);
    assert!(sweep.rows.iter().all(|r| r.runs == 1 && r.version == 1));
    assert_eq!(
        sweep.rows.iter().map(|r| r.lambda).collect::<Vec<_>>(),
        [0.0, 0.5, 1.0]
    );
    assert!(sweep_lambda(&scenario, &[], &quick()).is_err());
}

#[test]
fn sweep_rows_average_their_runs() {
    let scenarios = [day_scenario(5), day_scenario(6)];
    let sweep = sweep_seeds(&scenarios, &[0.0, 1.0], &quick()).unwrap();
    assert_eq!(sweep.runs.len(), 4);
    for (row, runs) in sweep.rows.iter().zip(sweep.runs.chunks(2)) {
        assert!(runs.iter().all(|r| r.lambda == Some(row.lambda)));
        let (x, y) = (
            runs[0].deltas.margin.unwrap(),
            runs[1].deltas.margin.unwrap(),
        );
        assert!((row.d_margin.unwrap() - (x + y) / 2.0).abs() < 1e-9);
        // two samples: the standard error is half their distance
        assert!((row.d_margin_se.unwrap() - (x - y).abs() / 2.0).abs() < 1e-9);
    }
}

#[test]
fn sweeps_are_reproducible_to_the_byte() {
    let scenarios = [day_scenario(7), day_scenario(8)];
    let csv = || {
        let sweep = sweep_seeds(&scenarios, &[0.0, 0.5, 1.0], &quick()).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        write_sweep_csv(&sweep, &mut a).unwrap();
        write_curve_csv(&sweep, &mut b).unwrap();
        (a, b)
    };
    let first = csv();
    assert_eq!(first, csv());
    assert!(String::from_utf8(first.0)
        .unwrap()
        .starts_with("version,lambda,runs,"));
}
