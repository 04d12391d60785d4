mod common;

use common::*;
use robustune::coordinator::{run_experiment, RunOptions, SimulatedClock, TrialRecord};
use robustune::harness::SyntheticTarget;
use robustune::model::{LevelTag, StrategySpec, TaguchiSettings};
use robustune::report::{generate_report, snr_table, ReportError};
use robustune::strategy::build_strategy;
use robustune::{ExperimentDescription, Factor, LevelValue};

const NAMES: [&str; 4] = ["TNE", "MaxLDAP", "LDAPnum", "DispNum"];

fn phase1_settings() -> TaguchiSettings {
    let maps = [TNE_LEVELS, MAXLDAP_LEVELS, LDAPNUM_LEVELS, DISPNUM_LEVELS];
    TaguchiSettings {
        replications: 4,
        array: Some("L27".into()),
        allocation: NAMES.iter().map(|n| n.to_string()).zip([1, 2, 5, 6]).collect(),
        level_maps: NAMES
            .iter()
            .zip(maps)
            .map(|(n, m)| (n.to_string(), m.iter().map(|&v| int(v)).collect()))
            .collect(),
        scaling: NAMES.iter().map(|n| n.to_string()).zip(PHASE1_SCALING).collect(),
        interactions: vec![
            ("TNE".into(), "MaxLDAP".into()),
            ("MaxLDAP".into(), "LDAPnum".into()),
            ("MaxLDAP".into(), "DispNum".into()),
        ],
        stop_after_phase1: true,
        ..TaguchiSettings::default()
    }
}

fn phase1_run() -> (ExperimentDescription, Vec<TrialRecord>) {
    let d = description(directory_factors(), synthetic(metric(1.0), 0.0, 1), StrategySpec::Taguchi(phase1_settings()), 8);
    let mut s = build_strategy(&d).unwrap();
    let mut out = Vec::new();
    let mut target = ReplayTarget::phase1();
    run_experiment(&d, s.as_mut(), &mut target, &mut out, &mut SimulatedClock::new(1.0), 0, &RunOptions::default())
        .unwrap();
    (d, out)
}

/// Data rows, without the header and `#` summary lines.
fn rows(tsv: &str) -> Vec<Vec<&str>> {
    tsv.lines().skip(1).filter(|l| !l.starts_with('#')).map(|l| l.split('\t').collect()).collect()
}

#[test]
fn phase1_replay_report() {
    let (d, records) = phase1_run();
    assert_eq!(records.len(), 27 * 4);
    assert!(records.iter().all(|r| r.result.is_success()));
    let bundle = generate_report(&d, &records).unwrap();

    let snr = snr_table(&records).unwrap();
    assert_eq!(snr.len(), 27);
    for row in &snr {
        let cfg: Vec<i64> = row.configuration.iter().map(|(_, v)| v.as_f64().unwrap() as i64).collect();
        let printed = PHASE1_ROWS.iter().find(|(c, _, _)| phase1_levels(*c).to_vec() == cfg).unwrap().2;
        assert!((row.snr.unwrap() - printed).abs() < 0.005, "{cfg:?}");
    }

    // Main effects are level means of the configuration ratios.
    let effects = rows(bundle.get("main_effects.tsv").unwrap());
    assert_eq!(effects.len(), 12);
    for e in &effects {
        let k = NAMES.iter().position(|n| *n == e[1]).unwrap();
        let level: i64 = e[0].parse().unwrap();
        let group: Vec<f64> = PHASE1_ROWS
            .iter()
            .filter(|(c, _, _)| phase1_levels(*c)[k] == level)
            .map(|(_, _, s)| *s)
            .collect();
        assert_eq!(group.len(), 9);
        let mean = group.iter().sum::<f64>() / 9.0;
        assert!((e[2].parse::<f64>().unwrap() - mean).abs() < 0.005, "{e:?}");
    }

    assert_eq!(rows(bundle.get("interactions.tsv").unwrap()).len(), 3 * 9);
    let reduced = bundle.get("phase1_model_reduced.tsv").unwrap();
    for term in ["TNE", "MaxLDAP", "DispNum", "TNE^2", "DispNum^2", "MaxLDAP*LDAPnum", "MaxLDAP*DispNum"] {
        assert!(rows(reduced).iter().any(|r| r[0] == term), "{term} missing from\n{reduced}");
    }
    assert_eq!(rows(reduced).len(), 8);

    let fin = rows(bundle.get("final_optimum.tsv").unwrap());
    let level = |n: &str| fin.iter().find(|r| r[0] == n).unwrap()[1].parse::<f64>().unwrap();
    assert!((level("TNE") - 32_930.0).abs() <= 300.0);
    assert_eq!([level("MaxLDAP"), level("LDAPnum"), level("DispNum")], [100.0, 1.0, 5.0]);

    let tau = rows(bundle.get("rank_validation.tsv").unwrap());
    assert_eq!(tau[0][0], "tau");
    assert!(tau[0][1].parse::<f64>().unwrap() > 0.5);
    assert!(bundle.get("run_log.tsv").unwrap().contains("total\t108"));
}

#[test]
fn reports_are_deterministic() {
    let (d, records) = phase1_run();
    assert_eq!(generate_report(&d, &records).unwrap(), generate_report(&d, &records).unwrap());
    let (_, again) = phase1_run();
    assert_eq!(records, again);
}

#[test]
fn interaction_with_an_unvaried_factor_is_refused() {
    let (mut d, records) = phase1_run();
    if let StrategySpec::Taguchi(t) = &mut d.strategy {
        t.interactions.push(("TNE".into(), "Colour".into()));
    }
    assert!(matches!(generate_report(&d, &records), Err(ReportError::UnknownInteraction(_, b)) if b == "Colour"));
}

#[test]
fn single_combination_and_empty_stores() {
    let f = vec![Factor::enumeration("only", vec![LevelValue::Int(7)]), Factor::range("x", LevelTag::Int, 1.0, 1.0, 1.0, 1.0)];
    let d = description(f, synthetic(metric(50.0), 0.0, 2), StrategySpec::Grid { replications: 3 }, 1);
    let mut s = build_strategy(&d).unwrap();
    let mut out = Vec::new();
    let spec = match &d.target {
        robustune::model::TargetSpec::Synthetic(s) => s.clone(),
        _ => unreachable!(),
    };
    run_experiment(&d, s.as_mut(), &mut SyntheticTarget::new(spec), &mut out, &mut SimulatedClock::new(1.0), 0, &RunOptions::default())
        .unwrap();
    let bundle = generate_report(&d, &out).unwrap();
    let snr = rows(bundle.get("snr.tsv").unwrap());
    assert_eq!(snr.len(), 1);
    assert!(bundle.get("main_effects.tsv").is_none());
    assert!(matches!(generate_report(&d, &[]), Err(ReportError::Empty)));
}
