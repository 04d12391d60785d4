//! Assigning factors to array columns so that requested interactions stay clear.

use super::catalog::OrthogonalArray;
use super::DesignError;

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Factor name and its 1-based column.
    pub columns: Vec<(String, usize)>,
    /// Interaction of interest and the columns carrying it.
    pub interactions: Vec<((String, String), Vec<usize>)>,
}

impl Allocation {
    pub fn column_of(&self, factor: &str) -> Option<usize> {
        self.columns.iter().find(|(f, _)| f == factor).map(|&(_, c)| c)
    }
}

struct Search<'a> {
    oa: &'a OrthogonalArray,
    factors: &'a [String],
    pairs: Vec<(usize, usize)>,
    assigned: Vec<usize>,
}

impl Search<'_> {
    /// Columns claimed by interactions whose two factors are both assigned.
    fn claimed(&self) -> Option<Vec<usize>> {
        let mut claimed = Vec::new();
        for &(a, b) in &self.pairs {
            if a < self.assigned.len() && b < self.assigned.len() {
                let cols = self
                    .oa
                    .interaction_columns(self.assigned[a], self.assigned[b])
                    .ok()?;
                for c in cols {
                    if self.assigned.contains(&c) || claimed.contains(&c) {
                        return None;
                    }
                    claimed.push(c);
                }
            }
        }
        Some(claimed)
    }

    fn run(&mut self) -> bool {
        if self.assigned.len() == self.factors.len() {
            return true;
        }
        let claimed = match self.claimed() {
            Some(c) => c,
            None => return false,
        };
        for col in 1..=self.oa.columns {
            if self.assigned.contains(&col) || claimed.contains(&col) {
                continue;
            }
            self.assigned.push(col);
            if self.claimed().is_some() && self.run() {
                return true;
            }
            self.assigned.pop();
        }
        false
    }
}

fn pair_indexes(factors: &[String], interactions: &[(String, String)]) -> Result<Vec<(usize, usize)>, DesignError> {
    interactions
        .iter()
        .map(|(a, b)| {
            let ia = factors.iter().position(|f| f == a);
            let ib = factors.iter().position(|f| f == b);
            match (ia, ib) {
                (Some(x), Some(y)) if x != y => Ok((x, y)),
                _ => Err(DesignError::InvalidAllocation(format!("interaction {a}x{b} names unknown factors"))),
            }
        })
        .collect()
}

fn finish(
    oa: &OrthogonalArray,
    factors: &[String],
    interactions: &[(String, String)],
    cols: &[usize],
) -> Result<Allocation, DesignError> {
    let mut out = Allocation {
        columns: factors.iter().cloned().zip(cols.iter().copied()).collect(),
        interactions: Vec::new(),
    };
    for (a, b) in interactions {
        let ca = out.column_of(a).unwrap_or(0);
        let cb = out.column_of(b).unwrap_or(0);
        out.interactions
            .push(((a.clone(), b.clone()), oa.interaction_columns(ca, cb)?));
    }
    Ok(out)
}

/// Deterministic backtracking: factors in the given order, columns ascending; the
/// first assignment leaving every interaction of interest clear is returned.
pub fn allocate_factors(
    oa: &OrthogonalArray,
    factors: &[String],
    interactions: &[(String, String)],
) -> Result<Allocation, DesignError> {
    if !interactions.is_empty() && !oa.has_interaction_table() {
        return Err(DesignError::NoInteractionTable(oa.name));
    }
    let pairs = pair_indexes(factors, interactions)?;
    if factors.len() > oa.columns {
        return Err(DesignError::NoAllocation(oa.name));
    }
    let mut s = Search {
        oa,
        factors,
        pairs,
        assigned: Vec::new(),
    };
    if !s.run() {
        return Err(DesignError::NoAllocation(oa.name));
    }
    finish(oa, factors, interactions, &s.assigned)
}

/// Validates a user-supplied allocation against the clearness rules.
pub fn check_allocation(
    oa: &OrthogonalArray,
    columns: &[(String, usize)],
    interactions: &[(String, String)],
) -> Result<Allocation, DesignError> {
    if !interactions.is_empty() && !oa.has_interaction_table() {
        return Err(DesignError::NoInteractionTable(oa.name));
    }
    let factors: Vec<String> = columns.iter().map(|(f, _)| f.clone()).collect();
    let cols: Vec<usize> = columns.iter().map(|&(_, c)| c).collect();
    for (i, &c) in cols.iter().enumerate() {
        if c == 0 || c > oa.columns {
            return Err(DesignError::InvalidAllocation(format!("{} has no column {c}", oa.name)));
        }
        if cols[..i].contains(&c) {
            return Err(DesignError::InvalidAllocation(format!("column {c} used twice")));
        }
    }
    let pairs = pair_indexes(&factors, interactions)?;
    let s = Search {
        oa,
        factors: &factors,
        pairs,
        assigned: cols.clone(),
    };
    if s.claimed().is_none() {
        return Err(DesignError::InvalidAllocation(
            "an interaction of interest is not clear".into(),
        ));
    }
    finish(oa, &factors, interactions, &cols)
}
