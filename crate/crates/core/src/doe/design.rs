//! Design matrices: array-based, full factorial, and randomized run orders.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::allocate::Allocation;
use super::catalog::OrthogonalArray;
use super::DesignError;
use crate::model::{enumerate_levels, Combination, Factor, LevelValue};

pub const DEFAULT_FACTORIAL_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum DesignKind {
    OrthogonalArray(&'static str),
    FullFactorial,
    CentralComposite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowKind {
    /// 0-based row of the generating array or factorial.
    Row(usize),
    Centre,
    /// Axial point on the given factor index, sign ±1.
    Star { factor: usize, sign: i8 },
    Corner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRow {
    pub levels: Vec<LevelValue>,
    /// Coded coordinates: 1-based array levels, or CCD units.
    pub coded: Vec<f64>,
    pub kind: RowKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub factors: Vec<Factor>,
    pub rows: Vec<DesignRow>,
    pub kind: DesignKind,
    pub replications: usize,
}

impl DesignMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    /// Row `i` as a combination over `order`; factors outside the design take their
    /// level from `fixed`.
    pub fn combination(&self, i: usize, order: &[Factor], fixed: &Combination) -> Option<Combination> {
        let levels: Option<Vec<LevelValue>> = order
            .iter()
            .map(|f| match self.factor_index(&f.name) {
                Some(k) => Some(self.rows[i].levels[k].clone()),
                None => fixed.get(&f.name).cloned(),
            })
            .collect();
        levels.map(|l| Combination::from_levels(order, &l))
    }

    /// Tab-separated text: header of factor names, one row per combination.
    pub fn to_tsv(&self) -> String {
        let mut out = self
            .factors
            .iter()
            .map(|f| f.name.as_str())
            .collect::<Vec<_>>()
            .join("\t");
        out.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.levels.iter().map(|l| l.to_string()).collect();
            out.push_str(&line.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// One row per array row; each allocated factor's coded level is mapped through
/// its level map (`maps[k][coded - 1]`).
pub fn build_design_matrix(
    oa: &OrthogonalArray,
    allocation: &Allocation,
    factors: &[Factor],
    maps: &[(String, Vec<LevelValue>)],
) -> Result<DesignMatrix, DesignError> {
    let mut cols = Vec::new();
    let mut level_maps = Vec::new();
    for f in factors {
        let c = allocation
            .column_of(&f.name)
            .ok_or_else(|| DesignError::InvalidAllocation(format!("{} is not allocated", f.name)))?;
        let map = maps
            .iter()
            .find(|(n, _)| *n == f.name)
            .map(|(_, m)| m.as_slice())
            .unwrap_or(&[]);
        for coded in 1..=oa.levels {
            if map.len() < coded as usize {
                return Err(DesignError::MissingLevel {
                    factor: f.name.clone(),
                    coded,
                });
            }
        }
        cols.push(c);
        level_maps.push(map);
    }
    let rows = (0..oa.rows)
        .map(|r| {
            let coded: Vec<u8> = cols.iter().map(|&c| oa.level(r, c)).collect();
            DesignRow {
                levels: coded
                    .iter()
                    .zip(&level_maps)
                    .map(|(&c, m)| m[c as usize - 1].clone())
                    .collect(),
                coded: coded.iter().map(|&c| c as f64).collect(),
                kind: RowKind::Row(r),
            }
        })
        .collect();
    Ok(DesignMatrix {
        factors: factors.to_vec(),
        rows,
        kind: DesignKind::OrthogonalArray(oa.name),
        replications: 1,
    })
}

/// Cartesian product of each factor's sampled levels, last factor varying fastest.
pub fn full_factorial(factors: &[Factor], cap: usize) -> Result<DesignMatrix, DesignError> {
    let levels: Vec<Vec<LevelValue>> = factors.iter().map(enumerate_levels).collect();
    let count = levels.iter().map(|l| l.len() as u128).product::<u128>();
    if count > cap as u128 {
        return Err(DesignError::TooLarge { count, cap });
    }
    let mut rows = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; factors.len()];
    for r in 0..count as usize {
        rows.push(DesignRow {
            levels: idx.iter().zip(&levels).map(|(&i, l)| l[i].clone()).collect(),
            coded: idx.iter().map(|&i| (i + 1) as f64).collect(),
            kind: RowKind::Row(r),
        });
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < levels[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(DesignMatrix {
        factors: factors.to_vec(),
        rows,
        kind: DesignKind::FullFactorial,
        replications: 1,
    })
}

/// `r` blocks, each an independently seeded permutation of all row indexes.
pub fn randomized_run_order(design: &DesignMatrix, r: usize, seed: u64) -> Vec<usize> {
    let mut order = Vec::with_capacity(design.len() * r);
    for block in 0..r {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block as u64);
        let mut perm: Vec<usize> = (0..design.len()).collect();
        perm.shuffle(&mut rng);
        order.extend(perm);
    }
    order
}
