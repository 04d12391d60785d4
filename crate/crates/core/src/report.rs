//! Tables and plot series computed from stored trial records.

use std::fs;
use std::path::Path;

use crate::coordinator::{replay, CoordinatorError, TrialRecord};
use crate::harness::{FailureStage, TrialResult};
use crate::model::{ExperimentDescription, LevelValue, StrategySpec};
use crate::stats::{control_by_noise, interaction_table, kendall_tau, main_effects, snr_larger_better, StatsError};
use crate::strategy::{build_strategy, StrategyError, TaguchiStrategy};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("the store holds no trials")]
    Empty,
    #[error("interaction {0}×{1} names a factor that is not a varied control factor")]
    UnknownInteraction(String, String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Replay(#[from] CoordinatorError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Named tab-separated files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportBundle {
    pub files: Vec<(String, String)>,
}

impl ReportBundle {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), ReportError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| ReportError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, text) in &self.files {
            let p = dir.join(name);
            fs::write(&p, text).map_err(io(&p))?;
        }
        Ok(())
    }
}

/// Successful responses grouped by control configuration, in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrRow {
    pub configuration: Vec<(String, LevelValue)>,
    pub responses: Vec<f64>,
    pub failures: usize,
    /// `None` with no successful trial.
    pub snr: Option<f64>,
}

pub fn snr_table(records: &[TrialRecord]) -> Result<Vec<SnrRow>, StatsError> {
    let mut rows: Vec<SnrRow> = Vec::new();
    for r in records {
        let cfg = &r.combination.configuration;
        let i = match rows.iter().position(|x| x.configuration == *cfg) {
            Some(i) => i,
            None => {
                rows.push(SnrRow {
                    configuration: cfg.clone(),
                    responses: Vec::new(),
                    failures: 0,
                    snr: None,
                });
                rows.len() - 1
            }
        };
        match r.response {
            Some(y) => rows[i].responses.push(y),
            None => rows[i].failures += 1,
        }
    }
    for row in &mut rows {
        if !row.responses.is_empty() {
            row.snr = Some(snr_larger_better(&row.responses)?);
        }
    }
    Ok(rows)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("NA".into(), |x| x.to_string())
}

fn snr_tsv(desc: &ExperimentDescription, rows: &[SnrRow]) -> String {
    let names: Vec<String> = desc.control_factors().map(|f| f.name.clone()).collect();
    let mut t = names.join("\t");
    t.push_str("\tn\tfailures\tmean\tsnr\tnote\n");
    for r in rows {
        let mut cells: Vec<String> = names
            .iter()
            .map(|n| r.configuration.iter().find(|(m, _)| m == n).map_or(String::new(), |(_, l)| l.to_string()))
            .collect();
        let n = r.responses.len();
        cells.push(n.to_string());
        cells.push(r.failures.to_string());
        cells.push(if n == 0 { "NA".into() } else { (r.responses.iter().sum::<f64>() / n as f64).to_string() });
        cells.push(fmt_opt(r.snr));
        cells.push(if n < 2 { "insufficient replication".into() } else { String::new() });
        t.push_str(&cells.join("\t"));
        t.push('\n');
    }
    t
}

fn level_of(row: &SnrRow, name: &str) -> Option<LevelValue> {
    row.configuration.iter().find(|(n, _)| n == name).map(|(_, l)| l.clone())
}

fn run_log(records: &[TrialRecord]) -> String {
    let mut t = String::from("outcome\tcount\n");
    let ok = records.iter().filter(|r| r.result.is_success()).count();
    t.push_str(&format!("success\t{ok}\n"));
    for stage in [
        FailureStage::Adapt,
        FailureStage::Validate,
        FailureStage::Run,
        FailureStage::Timeout,
        FailureStage::Protocol,
    ] {
        let n = records
            .iter()
            .filter(|r| matches!(&r.result, TrialResult::Failure(f) if f.stage == stage))
            .count();
        t.push_str(&format!("{stage}\t{n}\n"));
    }
    let retries: u32 = records.iter().map(|r| r.attempts.saturating_sub(1)).sum();
    t.push_str(&format!("retries\t{retries}\n"));
    t.push_str(&format!("total\t{}\n", records.len()));
    t
}

/// Builds every report table from the description and stored records alone.
pub fn generate_report(desc: &ExperimentDescription, records: &[TrialRecord]) -> Result<ReportBundle, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut files = Vec::new();
    let rows = snr_table(records)?;
    files.push(("snr.tsv".to_string(), snr_tsv(desc, &rows)));
    let rated: Vec<&SnrRow> = rows.iter().filter(|r| r.snr.is_some()).collect();

    let interactions = match &desc.strategy {
        StrategySpec::Taguchi(t) => t.interactions.clone(),
        _ => Vec::new(),
    };
    let varied: Vec<String> = desc
        .control_factors()
        .filter(|f| {
            let first = rows.first().and_then(|r| level_of(r, &f.name));
            rows.iter().any(|r| level_of(r, &f.name) != first)
        })
        .map(|f| f.name.clone())
        .collect();
    for (a, b) in &interactions {
        if !varied.contains(a) || !varied.contains(b) {
            return Err(ReportError::UnknownInteraction(a.clone(), b.clone()));
        }
    }

    if rated.len() > 1 {
        let ys: Vec<f64> = rated.iter().map(|r| r.snr.expect("rated")).collect();
        let mut t = String::from("x\tseries\ty\n");
        for name in &varied {
            let levels: Vec<LevelValue> = rated.iter().map(|r| level_of(r, name).expect("control level")).collect();
            for (l, m) in main_effects(&levels, &ys) {
                t.push_str(&format!("{l}\t{name}\t{m}\n"));
            }
        }
        files.push(("main_effects.tsv".into(), t));

        if !interactions.is_empty() {
            let mut t = String::from("x\tseries\ty\n");
            for (a, b) in &interactions {
                let la: Vec<LevelValue> = rated.iter().map(|r| level_of(r, a).expect("control level")).collect();
                let lb: Vec<LevelValue> = rated.iter().map(|r| level_of(r, b).expect("control level")).collect();
                for ((x, s), m) in interaction_table(&la, &lb, &ys) {
                    t.push_str(&format!("{x}\t{a}x{b} at {b}={s}\t{m}\n"));
                }
            }
            files.push(("interactions.tsv".into(), t));
        }
    }

    let noise: Vec<String> = desc.noise_factors().map(|f| f.name.clone()).collect();
    if !noise.is_empty() {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.response.is_some()).collect();
        let ys: Vec<f64> = ok.iter().map(|r| r.response.expect("successful")).collect();
        let mut series = String::from("x\tseries\ty\n");
        let mut flat = String::from("control\tlevel\tnoise\tflatness\n");
        for c in &varied {
            let cl: Vec<LevelValue> = ok.iter().map(|r| r.combination.get(c).cloned().expect("level")).collect();
            for n in &noise {
                let nl: Vec<LevelValue> = ok.iter().map(|r| r.combination.get(n).cloned().expect("level")).collect();
                for row in control_by_noise(&cl, &nl, &ys) {
                    for (x, m) in &row.means {
                        series.push_str(&format!("{x}\t{c}={} vs {n}\t{m}\n", row.control));
                    }
                    flat.push_str(&format!("{c}\t{}\t{n}\t{}\n", row.control, row.flatness));
                }
            }
        }
        files.push(("control_by_noise.tsv".into(), series));
        files.push(("control_by_noise_flatness.tsv".into(), flat));
    }

    files.push(("run_log.tsv".into(), run_log(records)));

    // Strategy tables come from replaying the records into a fresh strategy.
    if let StrategySpec::Taguchi(settings) = &desc.strategy {
        let mut s = TaguchiStrategy::new(&desc.factors, settings.clone(), desc.seed)?;
        replay(&mut s, records)?;
        files.extend(crate::strategy::Strategy::report(&s));
        if let Some(validation) = phase1_rank_check(&s) {
            files.push(("rank_validation.tsv".into(), validation));
        }
    } else {
        let mut s = build_strategy(desc)?;
        replay(s.as_mut(), records)?;
        files.extend(s.report());
    }
    Ok(ReportBundle { files })
}

/// Kendall agreement between the reduced phase-1 model and the observed ratios.
fn phase1_rank_check(s: &TaguchiStrategy) -> Option<String> {
    let a = s.phase1.as_ref()?;
    let model = a.reduced.as_ref()?;
    let mut observed = Vec::new();
    let mut predicted = Vec::new();
    for (i, row) in a.design.rows.iter().enumerate() {
        let Some(snr) = a.snr[i] else { continue };
        let x: Option<Vec<f64>> = model
            .factors
            .iter()
            .map(|n| a.design.factor_index(n).and_then(|k| row.levels[k].as_f64()))
            .collect();
        observed.push(snr);
        predicted.push(model.predict(&x?));
    }
    let r = kendall_tau(&observed, &predicted).ok()?;
    Some(format!(
        "statistic\tvalue\ntau\t{}\nconcordance\t{}\nconcordant\t{}\ndiscordant\t{}\n",
        r.tau, r.concordance, r.concordant, r.discordant
    ))
}
