use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use robustune::harness::{CommandTarget, FailureStage, Target, TrialContext, TrialResult};
use robustune::model::{CommandSpec, CommandTemplate, LevelTag};
use robustune::{Combination, Factor, LevelValue};

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&p, fs::Permissions::from_mode(0o755)).unwrap();
    p
}

fn template(p: &Path, args: &[&str]) -> CommandTemplate {
    CommandTemplate {
        program: p.to_string_lossy().into_owned(),
        args: args.iter().map(|a| a.to_string()).collect(),
    }
}

fn target(run: CommandTemplate) -> CommandTarget {
    CommandTarget {
        run,
        recover: None,
        validate: None,
        metrics: vec!["Fetch".into(), "Rcpt".into()],
    }
}

fn combo() -> Combination {
    Combination {
        configuration: vec![("threads".into(), LevelValue::Int(4)), ("mode".into(), LevelValue::Text("fast".into()))],
        condition: vec![],
    }
}

fn trial(t: &mut CommandTarget, secs: f64) -> TrialResult {
    t.run_trial(&combo(), TrialContext { sequence: 0, attempt: 0 }, Duration::from_secs_f64(secs))
}

fn failure_stage(r: &TrialResult) -> (FailureStage, String) {
    match r {
        TrialResult::Failure(f) => (f.stage, f.detail.clone()),
        TrialResult::Success { .. } => panic!("expected a failure"),
    }
}

#[test]
fn metrics_are_read_from_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let p = script(dir.path(), "run.sh", "printf 'Rcpt\\t2.5\\nFetch\\t10\\n'");
    let r = trial(&mut target(template(&p, &[])), 10.0);
    let TrialResult::Success { metrics, wall_time } = r else { panic!("{r:?}") };
    assert_eq!(metrics, vec![("Fetch".to_string(), 10.0), ("Rcpt".to_string(), 2.5)]);
    assert!(wall_time < 10.0);
}

#[test]
fn protocol_violations_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    for (body, detail) in [
        ("printf 'Fetch\\t1\\n'", "missing metric Rcpt"),
        ("printf 'Fetch 1\\nRcpt\\t2\\n'", "malformed line"),
        ("printf 'Fetch\\tNaN\\nRcpt\\t2\\n'", "bad value"),
        ("printf 'Fetch\\t1\\nRcpt\\t2\\nLatency\\t3\\n'", "unexpected metric"),
    ] {
        let p = script(dir.path(), "run.sh", body);
        let (stage, d) = failure_stage(&trial(&mut target(template(&p, &[])), 10.0));
        assert_eq!(stage, FailureStage::Protocol);
        assert!(d.contains(detail), "{d}");
    }
}

#[test]
fn nonzero_exit_is_a_run_failure_with_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let p = script(dir.path(), "run.sh", "echo 'disk full' >&2\nexit 3");
    let (stage, d) = failure_stage(&trial(&mut target(template(&p, &[])), 10.0));
    assert_eq!(stage, FailureStage::Run);
    assert_eq!(d, "exit 3: disk full");
    let missing = template(&dir.path().join("absent"), &[]);
    assert_eq!(failure_stage(&trial(&mut target(missing), 10.0)).0, FailureStage::Run);
}

#[test]
fn timeout_kills_the_whole_process_tree() {
    let dir = tempfile::tempdir().unwrap();
    let marker = dir.path().join("survived");
    // The child outlives the deadline and would leave a marker if not killed.
    let body = format!("(sleep 2; touch {}) &\nsleep 30", marker.display());
    let p = script(dir.path(), "run.sh", &body);
    let start = Instant::now();
    let (stage, d) = failure_stage(&trial(&mut target(template(&p, &[])), 0.3));
    assert_eq!(stage, FailureStage::Timeout);
    assert!(d.starts_with("exceeded 0.300"));
    assert!(start.elapsed() < Duration::from_secs(2));
    std::thread::sleep(Duration::from_millis(2500));
    assert!(!marker.exists());
}

#[test]
fn adaptation_substitutes_factor_and_level() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log");
    let p = script(dir.path(), "set.sh", &format!("echo \"$@\" >> {}", log.display()));
    let mut f = Factor::range("threads", LevelTag::Int, 1.0, 8.0, 1.0, 1.0);
    f.adaptation = Some(CommandSpec::Command(template(&p, &["--{factor}", "{level}"])));
    let mut t = target(template(&p, &[]));
    t.apply_level(&f, &LevelValue::Int(6)).unwrap();
    // A library/function pair becomes `dll func level`.
    f.adaptation = Some(CommandSpec::FuncLocation {
        dll: p.to_string_lossy().into_owned(),
        func: "setThreads".into(),
    });
    t.apply_level(&f, &LevelValue::Int(2)).unwrap();
    assert_eq!(fs::read_to_string(&log).unwrap(), "--threads 6\nsetThreads 2\n");

    f.adaptation = None;
    assert_eq!(t.apply_level(&f, &LevelValue::Int(2)).unwrap_err().stage, FailureStage::Adapt);
    let bad = script(dir.path(), "bad.sh", "exit 1");
    f.adaptation = Some(CommandSpec::Command(template(&bad, &[])));
    assert_eq!(t.apply_level(&f, &LevelValue::Int(2)).unwrap_err().stage, FailureStage::Adapt);
}

#[test]
fn validation_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Legal unless threads=4 is combined with mode=fast.
    let p = script(
        dir.path(),
        "valid.sh",
        "case \"$*\" in *'threads=4 mode=fast'*) exit 1;; *'threads=9'*) exit 7;; esac\nexit 0",
    );
    let mut t = target(template(&p, &[]));
    t.validate = Some(template(&p, &[]));
    assert!(!t.validate(&combo()).unwrap());
    let mut c = combo();
    c.configuration[0].1 = LevelValue::Int(2);
    assert!(t.validate(&c).unwrap());
    c.configuration[0].1 = LevelValue::Int(9);
    assert_eq!(t.validate(&c).unwrap_err().stage, FailureStage::Validate);
}

#[test]
fn recovery_command_failures_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ok = script(dir.path(), "ok.sh", "exit 0");
    let bad = script(dir.path(), "bad.sh", "echo stuck >&2; exit 2");
    let mut t = target(template(&ok, &[]));
    assert!(t.recover().is_ok());
    t.recover = Some(template(&ok, &[]));
    assert!(t.recover().is_ok());
    t.recover = Some(template(&bad, &[]));
    let e = t.recover().unwrap_err();
    assert_eq!(e.detail, "recovery failed: exit 2: stuck");
}
