//! Main effects, two-factor interaction cells and control-by-noise tables.

use std::cmp::Ordering;

use crate::model::LevelValue;

fn sort_levels(v: &mut [LevelValue]) {
    v.sort_by(|a, b| a.compare(b).unwrap_or(Ordering::Equal));
}

fn distinct(levels: &[LevelValue]) -> Vec<LevelValue> {
    let mut out: Vec<LevelValue> = Vec::new();
    for l in levels {
        if !out.contains(l) {
            out.push(l.clone());
        }
    }
    sort_levels(&mut out);
    out
}

/// Mean response per level of one factor, levels ascending.
pub fn main_effects(levels: &[LevelValue], responses: &[f64]) -> Vec<(LevelValue, f64)> {
    distinct(levels)
        .into_iter()
        .map(|l| {
            let (s, n) = levels
                .iter()
                .zip(responses)
                .filter(|(x, _)| **x == l)
                .fold((0.0, 0usize), |(s, n), (_, y)| (s + y, n + 1));
            (l, s / n as f64)
        })
        .collect()
}

/// Mean response per `(level_f, level_g)` cell, present cells only.
pub fn interaction_table(
    f: &[LevelValue],
    g: &[LevelValue],
    responses: &[f64],
) -> Vec<((LevelValue, LevelValue), f64)> {
    let mut out = Vec::new();
    for a in distinct(f) {
        for b in distinct(g) {
            let ys: Vec<f64> = f
                .iter()
                .zip(g)
                .zip(responses)
                .filter(|((x, y), _)| **x == a && **y == b)
                .map(|(_, r)| *r)
                .collect();
            if !ys.is_empty() {
                out.push(((a.clone(), b.clone()), ys.iter().sum::<f64>() / ys.len() as f64));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlByNoiseRow {
    pub control: LevelValue,
    pub means: Vec<(LevelValue, f64)>,
    /// Range of the means across noise levels; smaller is more robust.
    pub flatness: f64,
}

/// Per control level, the mean at each noise level and its flatness; rows are
/// ordered most robust first.
pub fn control_by_noise(control: &[LevelValue], noise: &[LevelValue], responses: &[f64]) -> Vec<ControlByNoiseRow> {
    let cells = interaction_table(control, noise, responses);
    let mut rows: Vec<ControlByNoiseRow> = Vec::new();
    for ((c, n), m) in cells {
        match rows.iter_mut().find(|r| r.control == c) {
            Some(r) => r.means.push((n, m)),
            None => rows.push(ControlByNoiseRow {
                control: c,
                means: vec![(n, m)],
                flatness: 0.0,
            }),
        }
    }
    for r in &mut rows {
        let max = r.means.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        let min = r.means.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        r.flatness = max - min;
    }
    // Stable sort keeps ascending control order among equally flat rows.
    rows.sort_by(|a, b| a.flatness.total_cmp(&b.flatness));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<LevelValue> {
        v.iter().map(|&x| LevelValue::Int(x)).collect()
    }

    #[test]
    fn group_means() {
        let e = main_effects(&ints(&[0, 0, 1, 1]), &[10.0, 12.0, 20.0, 22.0]);
        assert_eq!(e, vec![(LevelValue::Int(0), 11.0), (LevelValue::Int(1), 21.0)]);
        let c = main_effects(&ints(&[3, 1, 2]), &[7.0; 3]);
        assert!(c.iter().all(|(_, m)| *m == 7.0));
    }

    #[test]
    fn product_surface_flatness() {
        let xc = ints(&[0, 0, 1, 1]);
        let xn = ints(&[0, 1, 0, 1]);
        let y = [0.0, 0.0, 0.0, 1.0];
        let t = control_by_noise(&xc, &xn, &y);
        assert_eq!(t[0].control, LevelValue::Int(0));
        assert_eq!(t[0].flatness, 0.0);
        assert_eq!(t[1].flatness, 1.0);
    }

    #[test]
    fn single_observation_cells() {
        let t = interaction_table(&ints(&[0, 1]), &ints(&[5, 6]), &[1.5, 2.5]);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].1, 1.5);
    }
}
