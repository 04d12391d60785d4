//! Catalog of orthogonal arrays and their interaction structure.
//!
//! Arrays are stored as literal 1-based matrices. Columns of the regular arrays
//! (L4, L8, L16, L9, L27) are linear forms over GF(2) or GF(3) in the row's base
//! digits; the interaction of two columns is read off those forms. L12 and the
//! three-level part of L18 have no usable interaction structure.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::DesignError;

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalArray {
    pub name: &'static str,
    pub rows: usize,
    pub columns: usize,
    pub levels: u8,
    /// Coded levels, `matrix[row][column]`, both 0-based indexes; values 1-based.
    pub matrix: Vec<Vec<u8>>,
    generators: Option<Vec<Vec<u8>>>,
    interaction_table: Option<BTreeMap<(usize, usize), Vec<usize>>>,
}

impl OrthogonalArray {
    fn new(name: &'static str, levels: u8, table: &[&[u8]], generators: Option<Vec<Vec<u8>>>) -> Self {
        let matrix: Vec<Vec<u8>> = table.iter().map(|r| r.to_vec()).collect();
        let mut oa = OrthogonalArray {
            name,
            rows: matrix.len(),
            columns: matrix[0].len(),
            levels,
            matrix,
            generators,
            interaction_table: None,
        };
        if let Some(g) = &oa.generators {
            debug_assert_eq!(g.len(), oa.columns);
            let mut table = BTreeMap::new();
            for i in 1..=oa.columns {
                for j in (i + 1)..=oa.columns {
                    table.insert((i, j), oa.compute_interaction(i, j));
                }
            }
            oa.interaction_table = Some(table);
        }
        oa
    }

    /// Coded level at 1-based `column` of 0-based `row`.
    pub fn level(&self, row: usize, column: usize) -> u8 {
        self.matrix[row][column - 1]
    }

    pub fn column(&self, column: usize) -> Vec<u8> {
        self.matrix.iter().map(|r| r[column - 1]).collect()
    }

    pub fn has_interaction_table(&self) -> bool {
        self.interaction_table.is_some()
    }

    fn normalise(&self, v: &[u8]) -> Vec<u8> {
        let q = self.levels;
        match v.iter().find(|&&x| x != 0) {
            Some(&lead) if q == 3 && lead == 2 => v.iter().map(|x| (x * 2) % 3).collect(),
            _ => v.to_vec(),
        }
    }

    fn compute_interaction(&self, i: usize, j: usize) -> Vec<usize> {
        let g = self.generators.as_ref().expect("regular array");
        let q = self.levels;
        let (u, v) = (&g[i - 1], &g[j - 1]);
        let mut targets = Vec::new();
        let multipliers: &[u8] = if q == 2 { &[1] } else { &[1, 2] };
        for &m in multipliers {
            let w: Vec<u8> = u.iter().zip(v).map(|(a, b)| (a + m * b) % q).collect();
            targets.push(self.normalise(&w));
        }
        let mut cols: Vec<usize> = (1..=self.columns)
            .filter(|&c| targets.contains(&self.normalise(&g[c - 1])))
            .collect();
        cols.sort_unstable();
        cols
    }

    /// Columns carrying the interaction of 1-based columns `i` and `j`.
    pub fn interaction_columns(&self, i: usize, j: usize) -> Result<Vec<usize>, DesignError> {
        if i == j || i == 0 || j == 0 || i > self.columns || j > self.columns {
            return Err(DesignError::BadColumns { array: self.name, i, j });
        }
        let table = self
            .interaction_table
            .as_ref()
            .ok_or(DesignError::NoInteractionTable(self.name))?;
        Ok(table[&(i.min(j), i.max(j))].clone())
    }
}

fn binary_generators(bits: u32) -> Vec<Vec<u8>> {
    (1usize..(1 << bits))
        .map(|j| (0..bits).map(|k| ((j >> k) & 1) as u8).collect())
        .collect()
}

fn gf3(vs: &[&[u8]]) -> Vec<Vec<u8>> {
    vs.iter().map(|v| v.to_vec()).collect()
}

/// All catalog arrays, ordered by level count then row count.
pub fn catalog() -> &'static [OrthogonalArray] {
    static CATALOG: OnceLock<Vec<OrthogonalArray>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        vec![
            OrthogonalArray::new("L4", 2, L4, Some(binary_generators(2))),
            OrthogonalArray::new("L8", 2, L8, Some(binary_generators(3))),
            OrthogonalArray::new("L12", 2, L12, None),
            OrthogonalArray::new("L16", 2, L16, Some(binary_generators(4))),
            OrthogonalArray::new("L9", 3, L9, Some(gf3(&[&[1, 0], &[0, 1], &[1, 1], &[2, 1]]))),
            OrthogonalArray::new("L18", 3, L18, None),
            OrthogonalArray::new(
                "L27",
                3,
                L27,
                Some(gf3(&[
                    &[1, 0, 0],
                    &[0, 1, 0],
                    &[1, 1, 0],
                    &[2, 1, 0],
                    &[0, 0, 1],
                    &[1, 0, 1],
                    &[2, 0, 1],
                    &[0, 1, 1],
                    &[1, 1, 1],
                    &[2, 1, 1],
                    &[0, 2, 1],
                    &[1, 2, 1],
                    &[2, 2, 1],
                ])),
            ),
        ]
    })
}

pub fn by_name(name: &str) -> Option<&'static OrthogonalArray> {
    catalog().iter().find(|a| a.name.eq_ignore_ascii_case(name))
}

/// Smallest catalog array with `levels` levels and at least `needed_columns` columns.
pub fn catalog_lookup(levels: u8, needed_columns: usize) -> Result<&'static OrthogonalArray, DesignError> {
    if !(levels == 2 || levels == 3) || needed_columns == 0 {
        return Err(DesignError::NoArray { levels, needed_columns });
    }
    catalog()
        .iter()
        .filter(|a| a.levels == levels && a.columns >= needed_columns)
        .min_by_key(|a| a.rows)
        .ok_or(DesignError::NoArray { levels, needed_columns })
}

/// Catalog arrays with `levels` levels and at least `needed_columns` columns, smallest first.
pub fn candidates(levels: u8, needed_columns: usize) -> Vec<&'static OrthogonalArray> {
    let mut v: Vec<_> = catalog()
        .iter()
        .filter(|a| a.levels == levels && a.columns >= needed_columns)
        .collect();
    v.sort_by_key(|a| a.rows);
    v
}

#[rustfmt::skip]
const L4: &[&[u8]] = &[
    &[1, 1, 1],
    &[1, 2, 2],
    &[2, 1, 2],
    &[2, 2, 1],
];

#[rustfmt::skip]
const L8: &[&[u8]] = &[
    &[1, 1, 1, 1, 1, 1, 1],
    &[1, 1, 1, 2, 2, 2, 2],
    &[1, 2, 2, 1, 1, 2, 2],
    &[1, 2, 2, 2, 2, 1, 1],
    &[2, 1, 2, 1, 2, 1, 2],
    &[2, 1, 2, 2, 1, 2, 1],
    &[2, 2, 1, 1, 2, 2, 1],
    &[2, 2, 1, 2, 1, 1, 2],
];

#[rustfmt::skip]
const L16: &[&[u8]] = &[
    &[1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    &[1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2],
    &[1, 1, 1, 2, 2, 2, 2, 1, 1, 1, 1, 2, 2, 2, 2],
    &[1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 1, 1, 1, 1],
    &[1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2],
    &[1, 2, 2, 1, 1, 2, 2, 2, 2, 1, 1, 2, 2, 1, 1],
    &[1, 2, 2, 2, 2, 1, 1, 1, 1, 2, 2, 2, 2, 1, 1],
    &[1, 2, 2, 2, 2, 1, 1, 2, 2, 1, 1, 1, 1, 2, 2],
    &[2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2],
    &[2, 1, 2, 1, 2, 1, 2, 2, 1, 2, 1, 2, 1, 2, 1],
    &[2, 1, 2, 2, 1, 2, 1, 1, 2, 1, 2, 2, 1, 2, 1],
    &[2, 1, 2, 2, 1, 2, 1, 2, 1, 2, 1, 1, 2, 1, 2],
    &[2, 2, 1, 1, 2, 2, 1, 1, 2, 2, 1, 1, 2, 2, 1],
    &[2, 2, 1, 1, 2, 2, 1, 2, 1, 1, 2, 2, 1, 1, 2],
    &[2, 2, 1, 2, 1, 1, 2, 1, 2, 2, 1, 2, 1, 1, 2],
    &[2, 2, 1, 2, 1, 1, 2, 2, 1, 1, 2, 1, 2, 2, 1],
];

#[rustfmt::skip]
const L9: &[&[u8]] = &[
    &[1, 1, 1, 1],
    &[1, 2, 2, 2],
    &[1, 3, 3, 3],
    &[2, 1, 2, 3],
    &[2, 2, 3, 1],
    &[2, 3, 1, 2],
    &[3, 1, 3, 2],
    &[3, 2, 1, 3],
    &[3, 3, 2, 1],
];

#[rustfmt::skip]
const L27: &[&[u8]] = &[
    &[1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    &[1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2, 2],
    &[1, 1, 1, 1, 3, 3, 3, 3, 3, 3, 3, 3, 3],
    &[1, 2, 2, 2, 1, 1, 1, 2, 2, 2, 3, 3, 3],
    &[1, 2, 2, 2, 2, 2, 2, 3, 3, 3, 1, 1, 1],
    &[1, 2, 2, 2, 3, 3, 3, 1, 1, 1, 2, 2, 2],
    &[1, 3, 3, 3, 1, 1, 1, 3, 3, 3, 2, 2, 2],
    &[1, 3, 3, 3, 2, 2, 2, 1, 1, 1, 3, 3, 3],
    &[1, 3, 3, 3, 3, 3, 3, 2, 2, 2, 1, 1, 1],
    &[2, 1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3],
    &[2, 1, 2, 3, 2, 3, 1, 2, 3, 1, 2, 3, 1],
    &[2, 1, 2, 3, 3, 1, 2, 3, 1, 2, 3, 1, 2],
    &[2, 2, 3, 1, 1, 2, 3, 2, 3, 1, 3, 1, 2],
    &[2, 2, 3, 1, 2, 3, 1, 3, 1, 2, 1, 2, 3],
    &[2, 2, 3, 1, 3, 1, 2, 1, 2, 3, 2, 3, 1],
    &[2, 3, 1, 2, 1, 2, 3, 3, 1, 2, 2, 3, 1],
    &[2, 3, 1, 2, 2, 3, 1, 1, 2, 3, 3, 1, 2],
    &[2, 3, 1, 2, 3, 1, 2, 2, 3, 1, 1, 2, 3],
    &[3, 1, 3, 2, 1, 3, 2, 1, 3, 2, 1, 3, 2],
    &[3, 1, 3, 2, 2, 1, 3, 2, 1, 3, 2, 1, 3],
    &[3, 1, 3, 2, 3, 2, 1, 3, 2, 1, 3, 2, 1],
    &[3, 2, 1, 3, 1, 3, 2, 2, 1, 3, 3, 2, 1],
    &[3, 2, 1, 3, 2, 1, 3, 3, 2, 1, 1, 3, 2],
    &[3, 2, 1, 3, 3, 2, 1, 1, 3, 2, 2, 1, 3],
    &[3, 3, 2, 1, 1, 3, 2, 3, 2, 1, 2, 1, 3],
    &[3, 3, 2, 1, 2, 1, 3, 1, 3, 2, 3, 2, 1],
    &[3, 3, 2, 1, 3, 2, 1, 2, 1, 3, 1, 3, 2],
];

#[rustfmt::skip]
const L12: &[&[u8]] = &[
    &[1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    &[1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2],
    &[1, 1, 2, 2, 2, 1, 1, 1, 2, 2, 2],
    &[1, 2, 1, 2, 2, 1, 2, 2, 1, 1, 2],
    &[1, 2, 2, 1, 2, 2, 1, 2, 1, 2, 1],
    &[1, 2, 2, 2, 1, 2, 2, 1, 2, 1, 1],
    &[2, 1, 2, 2, 1, 1, 2, 2, 1, 2, 1],
    &[2, 1, 2, 1, 2, 2, 2, 1, 1, 1, 2],
    &[2, 1, 1, 2, 2, 2, 1, 2, 2, 1, 1],
    &[2, 2, 2, 1, 1, 1, 1, 2, 2, 1, 2],
    &[2, 2, 1, 2, 1, 2, 1, 1, 1, 2, 2],
    &[2, 2, 1, 1, 2, 1, 2, 1, 2, 2, 1],
];

#[rustfmt::skip]
const L18: &[&[u8]] = &[
    &[1, 1, 1, 1, 1, 1, 1],
    &[1, 2, 2, 2, 2, 2, 2],
    &[1, 3, 3, 3, 3, 3, 3],
    &[2, 1, 1, 2, 2, 3, 3],
    &[2, 2, 2, 3, 3, 1, 1],
    &[2, 3, 3, 1, 1, 2, 2],
    &[3, 1, 2, 1, 3, 2, 3],
    &[3, 2, 3, 2, 1, 3, 1],
    &[3, 3, 1, 3, 2, 1, 2],
    &[1, 1, 3, 3, 2, 2, 1],
    &[1, 2, 1, 1, 3, 3, 2],
    &[1, 3, 2, 2, 1, 1, 3],
    &[2, 1, 2, 3, 1, 3, 2],
    &[2, 2, 3, 1, 2, 1, 3],
    &[2, 3, 1, 2, 3, 2, 1],
    &[3, 1, 3, 2, 3, 1, 2],
    &[3, 2, 1, 3, 1, 2, 3],
    &[3, 3, 2, 1, 2, 3, 1],
];
