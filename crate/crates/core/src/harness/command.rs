//! External-command target: every wrapper function is a command line.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::process::{Command, ExitStatus, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::{parse_metric_lines, Failure, FailureStage, Target, TrialContext, TrialResult};
use crate::model::{CommandTemplate, Combination, Factor, LevelValue};

/// Extra time allowed for output pipes to drain after the process has gone.
const GRACE: Duration = Duration::from_millis(1500);
const POLL: Duration = Duration::from_millis(5);

#[derive(Debug)]
pub(crate) struct Finished {
    pub status: ExitStatus,
    pub stdout: String,
    pub stderr: String,
    pub elapsed: Duration,
}

#[derive(Debug)]
pub(crate) enum ExecError {
    Spawn(String),
    TimedOut,
}

fn substitute(arg: &str, factor: Option<&Factor>, level: Option<&LevelValue>) -> String {
    let mut s = arg.to_string();
    if let Some(l) = level {
        s = s.replace("{level}", &l.to_string());
    }
    if let Some(f) = factor {
        s = s.replace("{factor}", &f.name);
    }
    s
}

fn drain<R: Read + Send + 'static>(mut r: R) -> mpsc::Receiver<String> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        let _ = tx.send(String::from_utf8_lossy(&buf).into_owned());
    });
    rx
}

/// Runs `program args` in its own process group. When `deadline` passes the
/// whole group is killed.
pub(crate) fn execute(program: &str, args: &[String], deadline: Option<Duration>) -> Result<Finished, ExecError> {
    let start = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()
        .map_err(|e| ExecError::Spawn(format!("{program}: {e}")))?;
    let out = drain(child.stdout.take().expect("piped stdout"));
    let err = drain(child.stderr.take().expect("piped stderr"));
    let pgid = child.id() as libc::pid_t;

    let status = loop {
        match child.try_wait() {
            Ok(Some(s)) => break s,
            Ok(None) => {}
            Err(e) => return Err(ExecError::Spawn(e.to_string())),
        }
        if deadline.is_some_and(|d| start.elapsed() >= d) {
            // SAFETY: plain syscall on a process group we created.
            unsafe {
                libc::kill(-pgid, libc::SIGKILL);
            }
            let _ = child.wait();
            return Err(ExecError::TimedOut);
        }
        thread::sleep(POLL);
    };
    let elapsed = start.elapsed();
    let wait = match deadline {
        Some(d) => d.saturating_sub(elapsed) + GRACE,
        None => GRACE,
    };
    let stdout = out.recv_timeout(wait).unwrap_or_default();
    let stderr = err.recv_timeout(GRACE).unwrap_or_default();
    Ok(Finished {
        status,
        stdout,
        stderr,
        elapsed,
    })
}

fn exit_text(s: &ExitStatus) -> String {
    match s.code() {
        Some(c) => format!("exit {c}"),
        None => "killed by signal".into(),
    }
}

fn with_stderr(head: String, stderr: &str) -> String {
    let tail = stderr.trim();
    if tail.is_empty() {
        head
    } else {
        format!("{head}: {}", tail.lines().last().unwrap_or(tail))
    }
}

/// Target driven by external commands.
#[derive(Debug, Clone)]
pub struct CommandTarget {
    pub run: CommandTemplate,
    pub recover: Option<CommandTemplate>,
    pub validate: Option<CommandTemplate>,
    pub metrics: Vec<String>,
}

impl Target for CommandTarget {
    fn apply_level(&mut self, factor: &Factor, level: &LevelValue) -> Result<(), Failure> {
        let spec = factor
            .adaptation
            .as_ref()
            .ok_or_else(|| Failure::new(FailureStage::Adapt, format!("no adaptation command for {}", factor.name)))?;
        let t = spec.template(true);
        let args: Vec<String> = t.args.iter().map(|a| substitute(a, Some(factor), Some(level))).collect();
        match execute(&t.program, &args, None) {
            Ok(f) if f.status.success() => Ok(()),
            Ok(f) => Err(Failure::new(FailureStage::Adapt, with_stderr(exit_text(&f.status), &f.stderr))),
            Err(ExecError::Spawn(e)) => Err(Failure::new(FailureStage::Adapt, e)),
            Err(ExecError::TimedOut) => Err(Failure::new(FailureStage::Adapt, "timed out")),
        }
    }

    /// Passes one `name=value` argument per control factor.
    fn validate(&mut self, configuration: &Combination) -> Result<bool, Failure> {
        let Some(t) = &self.validate else { return Ok(true) };
        let mut args = t.args.clone();
        args.extend(configuration.configuration.iter().map(|(n, v)| format!("{n}={v}")));
        match execute(&t.program, &args, None) {
            Ok(f) => match f.status.code() {
                Some(0) => Ok(true),
                Some(1) => Ok(false),
                _ => Err(Failure::new(FailureStage::Validate, with_stderr(exit_text(&f.status), &f.stderr))),
            },
            Err(ExecError::Spawn(e)) => Err(Failure::new(FailureStage::Validate, e)),
            Err(ExecError::TimedOut) => Err(Failure::new(FailureStage::Validate, "timed out")),
        }
    }

    fn run_trial(&mut self, _combination: &Combination, _ctx: TrialContext, deadline: Duration) -> TrialResult {
        match execute(&self.run.program, &self.run.args, Some(deadline)) {
            Ok(f) if f.status.success() => match parse_metric_lines(&f.stdout, &self.metrics) {
                Ok(metrics) => TrialResult::Success {
                    metrics,
                    wall_time: f.elapsed.as_secs_f64(),
                },
                Err(e) => TrialResult::Failure(e),
            },
            Ok(f) => TrialResult::Failure(Failure::new(
                FailureStage::Run,
                with_stderr(exit_text(&f.status), &f.stderr),
            )),
            Err(ExecError::Spawn(e)) => TrialResult::Failure(Failure::new(FailureStage::Run, e)),
            Err(ExecError::TimedOut) => TrialResult::Failure(Failure::new(
                FailureStage::Timeout,
                format!("exceeded {:.3} s", deadline.as_secs_f64()),
            )),
        }
    }

    fn recover(&mut self) -> Result<(), Failure> {
        let Some(t) = &self.recover else { return Ok(()) };
        match execute(&t.program, &t.args, None) {
            Ok(f) if f.status.success() => Ok(()),
            Ok(f) => Err(Failure::new(
                FailureStage::Run,
                with_stderr(format!("recovery failed: {}", exit_text(&f.status)), &f.stderr),
            )),
            Err(ExecError::Spawn(e)) => Err(Failure::new(FailureStage::Run, format!("recovery failed: {e}"))),
            Err(ExecError::TimedOut) => Err(Failure::new(FailureStage::Run, "recovery timed out")),
        }
    }
}
