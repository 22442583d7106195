use std::path::Path;

use ffcbf::barriers::BarrierKind;
use ffcbf::report::{
    config_to_toml, load_config, load_trajectory, save_trajectory, write_replay, RunManifest,
    SummaryDoc, SummaryRow, TrialRecord,
};
use ffcbf::scenario::{run_batch, run_batch_with, LogPolicy, ScenarioConfig};
use ffcbf::Error;

fn small() -> ScenarioConfig {
    ScenarioConfig {
        seed: 9,
        ..ScenarioConfig::default()
    }
}

#[test]
fn shipped_default_config_loads_to_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(load_config(&path).unwrap(), ScenarioConfig::default());
}

#[test]
fn config_round_trips_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let mut c = small();
    c.controller.cbf_kind = BarrierKind::Zero;
    c.reference_from_initial = true;
    std::fs::write(&path, config_to_toml(&c).unwrap()).unwrap();
    assert_eq!(load_config(&path).unwrap(), c);
}

#[test]
fn partial_config_fills_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "seed = 4\n[controller]\ncbf_kind = \"ff\"\n").unwrap();
    let c = load_config(&path).unwrap();
    assert_eq!(c.seed, 4);
    assert_eq!(c.controller.cbf_kind, BarrierKind::Ff);
    assert_eq!(c.controller.alpha_gain, 10.0);
}

#[test]
fn config_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown.toml", "sed = 4\n"),
        ("type.toml", "seed = \"four\"\n"),
        ("invalid.toml", "dt = -0.01\n"),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let err = load_config(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{name}: {err:?}");
        assert!(err.to_string().contains(name), "{err}");
    }
    let missing = dir.path().join("missing.toml");
    let err = load_config(&missing).unwrap_err();
    assert!(err.to_string().contains("missing.toml"));
}

#[test]
fn summary_round_trip_is_byte_identical() {
    let c = small();
    let rows = BarrierKind::ALL
        .iter()
        .map(|&cbf| {
            let mut k = c.clone();
            k.controller.cbf_kind = cbf;
            SummaryRow {
                cbf,
                summary: run_batch(&k, 6).unwrap().summary,
            }
        })
        .collect();
    let doc = SummaryDoc {
        scenario: c.scenario,
        mode: c.controller.mode,
        seed: c.seed,
        rows,
    };
    let text = doc.to_toml().unwrap();
    let back = SummaryDoc::from_toml(&text).unwrap();
    assert_eq!(back, doc);
    assert_eq!(back.to_toml().unwrap(), text);
    assert!(doc.table().lines().count() == 5);
    assert!(doc.row(BarrierKind::Ff).is_some());
}

#[test]
fn trajectory_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_batch_with(&small(), 2, LogPolicy::All, |_| Ok(())).unwrap();
    let log = out.results[0].log.as_ref().unwrap();
    let path = dir.path().join("t.csv");
    save_trajectory(&path, log).unwrap();
    let back = load_trajectory(&path).unwrap();
    assert_eq!(back.rows.len(), log.rows.len());
    assert_eq!(back.num_vehicles, log.num_vehicles);
    for (a, b) in back.rows.iter().zip(&log.rows) {
        assert!((a.t - b.t).abs() < 1e-12);
        for (x, y) in a.h0.iter().zip(&b.h0) {
            assert!((x - y).abs() <= 1e-7 * y.abs().max(1.0));
        }
    }

    let mut replay = Vec::new();
    write_replay(&mut replay, &back).unwrap();
    let text = String::from_utf8(replay).unwrap();
    let n = log.num_vehicles;
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 1 + 6 * n + n * (n - 1));
    assert_eq!(text.lines().count(), log.rows.len() + 1);
}

#[test]
fn foreign_csv_is_rejected_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("other.csv");
    std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
    let err = load_trajectory(&path).unwrap_err();
    assert!(err.to_string().contains("other.csv"));
}

#[test]
fn manifest_replays_to_the_same_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let c = small();
    let out = run_batch(&c, 5).unwrap();
    let manifest = RunManifest {
        version: "test".into(),
        config: c,
        n_trials: 5,
        started_at: 0.0,
        finished_at: 0.0,
        outputs: vec![],
        trials: out
            .results
            .iter()
            .map(|r| TrialRecord::new(r, None))
            .collect(),
    };
    let path = dir.path().join("manifest.json");
    manifest.write(&path).unwrap();
    let back = RunManifest::read(&path).unwrap();
    assert_eq!(back, manifest);

    let again = run_batch(&back.config, back.n_trials).unwrap();
    for (rec, r) in back.trials.iter().zip(&again.results) {
        assert!(rec.same_flags(&TrialRecord::new(r, None)));
        assert_eq!(rec.completion_time, r.completion_time);
    }
}
