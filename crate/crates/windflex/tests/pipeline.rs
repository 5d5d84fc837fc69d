use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use windflex::pipeline::{cell_dir, Artifacts, INCOMPLETE};
use windflex::{run_sweep, EvaluationReport, RunConfig};
use windflex_core::reserve::MethodKind;
use windflex_sched::GridCase;

fn toy_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/toy")
}

/// Copy of the toy study in `dir`, without the sweep.
fn copy_toy(dir: &Path) -> PathBuf {
    for f in ["history_forecast.csv", "history_actual.csv", "forecast_day.csv", "realized_day.csv", "case.toml"] {
        std::fs::copy(toy_dir().join(f), dir.join(f)).unwrap();
    }
    let text = std::fs::read_to_string(toy_dir().join("config.toml")).unwrap();
    let text = &text[..text.find("[sweep]").unwrap()];
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, text).unwrap();
    cfg
}

fn windflex(args: &[&str], cfg: &Path, out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_windflex"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .env_remove("WINDFLEX_SOLVER")
        .env_remove("WINDFLEX_THREADS")
        .output()
        .unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn report(dir: &Path) -> EvaluationReport {
    Artifacts::new(dir).load_report().unwrap().without_timestamp()
}

#[test]
fn stage_by_stage_matches_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = copy_toy(tmp.path());
    let staged = tmp.path().join("staged");
    let full = tmp.path().join("full");
    for stage in ["ingest", "fit", "stress", "size", "scuc", "rt", "evaluate"] {
        let o = windflex(&[stage], &cfg, &staged);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = windflex(&["pipeline"], &cfg, &full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("RT total"));

    assert_eq!(report(&staged), report(&full));
    let (mut a, mut b) = (files(&staged), files(&full));
    a.remove("report.json");
    b.remove("report.json");
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{k} differs");
    }
    assert!(!staged.join(INCOMPLETE).exists());
}

#[test]
fn seed_override_changes_scenarios_only_through_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = copy_toy(tmp.path());
    for (dir, seed) in [("s1", "11"), ("s2", "11"), ("s3", "12")] {
        let o = windflex(&["stress", "--seed", seed], &cfg, &tmp.path().join(dir));
        // stress needs the upstream artifacts first
        assert!(!o.status.success());
        for stage in ["ingest", "fit", "stress"] {
            let o = windflex(&[stage, "--seed", seed], &cfg, &tmp.path().join(dir));
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
    }
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("stress/speeds.csv")).unwrap();
    assert_eq!(read("s1"), read("s2"));
    assert_ne!(read("s1"), read("s3"));
}

#[test]
fn sweep_writes_one_report_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&toy_dir().join("config.toml")).unwrap();
    cfg.sweep = None;
    let cells = run_sweep(&cfg, tmp.path(), &MethodKind::ALL, &[1, 2, 3, 4, 5]).unwrap();
    assert_eq!(cells.len(), 15);
    for c in &cells {
        let dir = tmp.path().join(cell_dir(c.method, c.level));
        let r = report(&dir);
        assert_eq!(r, c.report.without_timestamp());
        assert_eq!((r.metadata.method, r.metadata.level), (c.method, c.level));
        r.validate().unwrap();
    }
    let summary = std::fs::read_to_string(tmp.path().join("sweep/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 16);
    assert!(!tmp.path().join(INCOMPLETE).exists());

    // extent reserve grows with the level, so its SCUC cost cannot fall
    let extent: Vec<f64> = cells
        .iter()
        .filter(|c| c.method == MethodKind::Extent)
        .map(|c| c.report.aggregate.scuc_generation + c.report.aggregate.reserve_penalty)
        .collect();
    for w in extent.windows(2) {
        assert!(w[0] <= w[1] + 1e-6 * w[1].abs(), "{extent:?}");
    }
}

#[test]
fn malformed_input_exits_2_and_marks_incomplete() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = copy_toy(tmp.path());
    std::fs::write(tmp.path().join("history_actual.csv"), "timestamp,nonsense\n1,2\n").unwrap();
    let out = tmp.path().join("out");
    let o = windflex(&["pipeline"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let marker = std::fs::read_to_string(out.join(INCOMPLETE)).unwrap();
    assert!(marker.contains("stage: ingest"), "{marker}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("[ingest]"));
}

#[test]
fn stage_without_upstream_artifacts_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = copy_toy(tmp.path());
    let out = tmp.path().join("out");
    let o = windflex(&["scuc"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let marker = std::fs::read_to_string(out.join(INCOMPLETE)).unwrap();
    assert!(marker.contains("stressed.json"), "{marker}");
}

#[test]
fn infeasible_case_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = copy_toy(tmp.path());
    let path = tmp.path().join("case.toml");
    let mut case = GridCase::load(&path).unwrap();
    for d in &mut case.loads {
        d.da.iter_mut().chain(d.rt.iter_mut()).for_each(|x| *x *= 5.0);
    }
    std::fs::write(&path, case.to_toml_string().unwrap()).unwrap();
    let out = tmp.path().join("out");
    let o = windflex(&["pipeline"], &cfg, &out);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(out.join(INCOMPLETE)).unwrap().contains("stage: scuc"));
}

#[test]
fn unknown_backend_and_bad_config_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = copy_toy(tmp.path());
    let o = Command::new(env!("CARGO_BIN_EXE_windflex"))
        .args(["pipeline", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .env("WINDFLEX_SOLVER", "no-such-solver")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let text = std::fs::read_to_string(&cfg).unwrap().replace("[stressor]", "[stressor]\nscenarioz = 5");
    std::fs::write(&cfg, text).unwrap();
    let o = windflex(&["pipeline"], &cfg, &tmp.path().join("out2"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[config]"));
}
