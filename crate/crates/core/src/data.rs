use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `n × p` design matrix. The first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl Design {
    pub fn from_row_major(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: values.len(),
            });
        }
        Ok(Self { n, p, values })
    }

    /// Build a design from covariate rows, prepending a column of ones.
    pub fn with_intercept<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(n * (k + 1));
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != k {
                return Err(Error::InvalidData(format!(
                    "covariate row {i} has {} values, expected {k}",
                    row.len()
                )));
            }
            values.push(1.0);
            values.extend_from_slice(row);
        }
        Self::from_row_major(n, k + 1, values)
    }

    /// Intercept-only design with `n` rows.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            n,
            p: 1,
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.p.max(1)).take(self.n)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    /// Keep only the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.p) {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: bad + 1,
            });
        }
        let values = self
            .rows()
            .flat_map(|r| cols.iter().map(move |&c| r[c]))
            .collect();
        Self::from_row_major(self.n, cols.len(), values)
    }

    /// Gather rows (with repetition allowed) into a new design.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n: idx.len(),
            p: self.p,
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Binary,
    Continuous,
}

/// Observed units: design matrix, treatment indicator and outcome.
#[derive(Debug, Clone)]
pub struct Dataset {
    ids: Vec<String>,
    x: Design,
    z: Vec<bool>,
    y: Vec<f64>,
    outcome: OutcomeKind,
}

impl Dataset {
    pub fn new(
        ids: Vec<String>,
        x: Design,
        z: Vec<bool>,
        y: Vec<f64>,
        outcome: OutcomeKind,
    ) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 units, got {n}"
            )));
        }
        for (what, len) in [("ids", ids.len()), ("z", z.len()), ("y", y.len())] {
            if len != n {
                return Err(Error::InvalidData(format!(
                    "{what} has length {len}, design has {n} rows"
                )));
            }
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidData("design has no columns".into()));
        }
        for (i, row) in x.rows().enumerate() {
            if row[0] != 1.0 {
                return Err(Error::InvalidData(format!(
                    "row {i}: first design column must be the intercept (1), got {}",
                    row[0]
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "row {i}, column {j}: non-finite covariate"
                )));
            }
        }
        if !z.iter().any(|&t| t) {
            return Err(Error::NoTreatedUnits);
        }
        if z.iter().all(|&t| t) {
            return Err(Error::InvalidData("no control units (z = 0)".into()));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("row {i}: non-finite outcome")));
        }
        if outcome == OutcomeKind::Binary {
            if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidData(format!(
                    "row {i}: binary outcome must be 0 or 1, got {}",
                    y[i]
                )));
            }
        }
        Ok(Self {
            ids,
            x,
            z,
            y,
            outcome,
        })
    }

    /// Convenience constructor with ids `0..n`.
    pub fn from_parts(x: Design, z: Vec<bool>, y: Vec<f64>, outcome: OutcomeKind) -> Result<Self> {
        let ids = (0..x.nrows()).map(|i| i.to_string()).collect();
        Self::new(ids, x, z, y, outcome)
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn design(&self) -> &Design {
        &self.x
    }

    pub fn treatment(&self) -> &[bool] {
        &self.z
    }

    pub fn outcome(&self) -> &[f64] {
        &self.y
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome
    }

    pub fn n_treated(&self) -> usize {
        self.z.iter().filter(|&&t| t).count()
    }

    /// Same units with the outcome re-tagged as continuous.
    pub fn as_continuous(&self) -> Self {
        Self {
            outcome: OutcomeKind::Continuous,
            ..self.clone()
        }
    }

    /// Same units, same outcome, different design (e.g. a reduced propensity specification).
    pub fn with_design(&self, x: Design) -> Result<Self> {
        Self::new(
            self.ids.clone(),
            x,
            self.z.clone(),
            self.y.clone(),
            self.outcome,
        )
    }

    /// Resample rows by index (used by the bootstrap).
    pub fn resample(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            idx.iter().map(|&i| self.ids[i].clone()).collect(),
            self.x.select_rows(idx),
            idx.iter().map(|&i| self.z[i]).collect(),
            idx.iter().map(|&i| self.y[i]).collect(),
            self.outcome,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(rows: &[[f64; 1]]) -> Design {
        Design::with_intercept(rows).unwrap()
    }

    #[test]
    fn rejects_missing_controls() {
        let x = design(&[[0.0], [1.0]]);
        let err = Dataset::from_parts(x, vec![true, true], vec![0.0, 1.0], OutcomeKind::Binary)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidData(m) if m.contains("control")));
    }

    #[test]
    fn rejects_missing_treated() {
        let x = design(&[[0.0], [1.0]]);
        let err = Dataset::from_parts(x, vec![false, false], vec![0.0, 1.0], OutcomeKind::Binary)
            .unwrap_err();
        assert_eq!(err, Error::NoTreatedUnits);
    }

    #[test]
    fn rejects_non_binary_outcome() {
        let x = design(&[[0.0], [1.0]]);
        assert!(Dataset::from_parts(
            x.clone(),
            vec![true, false],
            vec![0.5, 1.0],
            OutcomeKind::Binary
        )
        .is_err());
        assert!(Dataset::from_parts(
            x,
            vec![true, false],
            vec![0.5, 1.0],
            OutcomeKind::Continuous
        )
        .is_ok());
    }

    #[test]
    fn rejects_bad_intercept_and_nan() {
        let x = Design::from_row_major(2, 2, vec![1.0, 0.0, 2.0, 1.0]).unwrap();
        assert!(
            Dataset::from_parts(x, vec![true, false], vec![0.0, 1.0], OutcomeKind::Binary).is_err()
        );
        let x = Design::from_row_major(2, 2, vec![1.0, f64::NAN, 1.0, 1.0]).unwrap();
        assert!(
            Dataset::from_parts(x, vec![true, false], vec![0.0, 1.0], OutcomeKind::Binary).is_err()
        );
    }

    #[test]
    fn column_and_row_selection() {
        let x = Design::with_intercept(&[[2.0, 3.0], [4.0, 5.0]]).unwrap();
        let s = x.select_columns(&[0, 2]).unwrap();
        assert_eq!(s.row(1), &[1.0, 5.0]);
        let r = x.select_rows(&[1, 1, 0]);
        assert_eq!(r.nrows(), 3);
        assert_eq!(r.row(0), &[1.0, 4.0, 5.0]);
        assert!(x.select_columns(&[3]).is_err());
    }
}
