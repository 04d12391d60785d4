use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn samples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

fn sample(name: &str) -> PathBuf {
    samples().join(name)
}

fn robustune(args: &[&Path]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robustune"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(s: &str) -> &Path {
    Path::new(s)
}

/// Every file under `dir`, by relative path.
fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn run(out: &Path, extra: &[&str]) -> Output {
    let desc = sample("synthetic-taguchi.xml");
    let env = sample("env.txt");
    let mut args: Vec<&Path> = vec![p("run"), &desc, &env, out];
    args.extend(extra.iter().map(|a| p(a)));
    robustune(&args)
}

#[test]
fn validate_reports_valid_and_broken_descriptions() {
    for name in ["synthetic-taguchi.xml", "directory-server.xml"] {
        let o = robustune(&[p("validate"), &sample(name)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("valid"));
    }
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.xml");
    let text = fs::read_to_string(sample("synthetic-taguchi.xml")).unwrap();
    fs::write(&broken, text.replacen("<end>100</end>", "<end>lots</end>", 1)).unwrap();
    let o = robustune(&[p("validate"), &broken]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("targFactor[1]/levels/range/end"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(robustune(&[p("bogus")]).status.code(), Some(2));
    assert_eq!(robustune(&[p("run")]).status.code(), Some(2));
}

#[test]
fn design_prints_the_crossed_array() {
    let o = robustune(&[p("design"), &sample("directory-server.xml")]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "TNE\tMaxLDAP\tLDAPnum\tDispNum");
    assert_eq!(lines.len(), 1 + 27);
    assert!(text.starts_with("# array L27"));
}

#[test]
fn run_writes_store_results_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["experimentDescription.xml", "envDescription.txt", "results.xml", "results.tsv", "report/snr.tsv", "report/final_optimum.tsv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    // A second run into the same directory is refused rather than overwriting.
    assert_eq!(run(&out, &[]).status.code(), Some(1));

    let a = robustune(&[p("analyze"), &out]);
    let b = robustune(&[p("analyze"), &out]);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("finished\ttrue"));
    let rec = stdout(&a).lines().find(|l| l.starts_with("recommendation")).unwrap().to_string();
    assert!(rec.contains("c=4") || rec.contains("c=5"), "{rec}");
}

#[test]
fn interrupted_run_resumes_to_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let whole = dir.path().join("whole");
    assert!(run(&whole, &[]).status.success());

    let parts = dir.path().join("parts");
    let o = run(&parts, &["--max-trials", "50"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("robustune resume"));
    assert!(!parts.join("report").exists());
    let o = robustune(&[p("resume"), &parts, p("--max-trials"), p("100")]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(robustune(&[p("resume"), &parts]).status.success());
    assert_eq!(tree(&whole), tree(&parts));
}

#[test]
fn stop_after_phase1_then_resume() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&out, &["--stop-after-phase1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = stdout(&robustune(&[p("analyze"), &out]));
    // 27 rows crossed with 2 noise levels, 4 replications each.
    assert!(a.contains("trials\t216"), "{a}");
    assert!(a.contains("finished\tfalse"));
    assert!(robustune(&[p("resume"), &out]).status.success());
    assert!(stdout(&robustune(&[p("analyze"), &out])).contains("finished\ttrue"));

    let grid = dir.path().join("grid.xml");
    let text = fs::read_to_string(sample("synthetic-taguchi.xml")).unwrap();
    let start = text.find("<searchStrategy").unwrap();
    let end = text.find("</searchStrategy>").unwrap() + "</searchStrategy>".len();
    fs::write(&grid, format!("{}<searchStrategy NAME=\"random\"><budget>20</budget></searchStrategy>{}", &text[..start], &text[end..])).unwrap();
    let env = sample("env.txt");
    let o = robustune(&[p("run"), &grid, &env, &dir.path().join("g"), p("--stop-after-phase1")]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(robustune(&[p("design"), &grid]).status.code(), Some(1));
}

#[test]
fn report_to_another_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(run(&out, &[]).status.success());
    let elsewhere = dir.path().join("tables");
    let o = robustune(&[p("report"), &out, p("--out"), &elsewhere]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(elsewhere.join("snr.tsv")).unwrap(), fs::read(out.join("report/snr.tsv")).unwrap());
    assert_eq!(robustune(&[p("report"), &dir.path().join("missing")]).status.code(), Some(1));
}
