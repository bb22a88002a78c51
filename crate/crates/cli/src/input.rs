//! CSV ingestion: header `id,z,y,<covariates...>`, one row per unit.

use std::path::Path;

use bpsm::{Dataset, Design, OutcomeKind};

use crate::CliError;

fn bad(path: &str, msg: String) -> CliError {
    CliError::Input(format!("{path}: {msg}"))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| bad(&shown, format!("cannot open: {e}")))?;
    parse(file, &shown)
}

pub fn parse<R: std::io::Read>(reader: R, path: &str) -> Result<Dataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| bad(path, format!("cannot read header: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[..3] != ["id", "z", "y"] {
        return Err(bad(
            path,
            format!(
                "header must start with columns id,z,y (covariates follow); found {}",
                names.join(",")
            ),
        ));
    }
    for (j, name) in names.iter().enumerate().skip(3) {
        if name.is_empty() {
            return Err(bad(
                path,
                format!("covariate column {} has an empty name", j + 1),
            ));
        }
        if names[..j].contains(name) {
            return Err(bad(path, format!("duplicate column `{name}`")));
        }
    }

    let mut ids = Vec::new();
    let mut z = Vec::new();
    let mut y = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| bad(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let number = |col: usize| -> Result<f64, CliError> {
            let raw = &record[col];
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(
                    path,
                    format!(
                        "line {line}, column `{}`: expected a finite number, got {raw:?}",
                        names[col]
                    ),
                )),
            }
        };
        ids.push(record[0].to_string());
        z.push(match &record[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(bad(
                    path,
                    format!("line {line}, column `z`: expected 0 or 1, got {other:?}"),
                ));
            }
        });
        y.push(number(2)?);
        rows.push((3..names.len()).map(number).collect::<Result<_, _>>()?);
    }

    if ids.is_empty() {
        return Err(bad(path, "no data rows".to_string()));
    }
    if z.iter().all(|&t| t) {
        return Err(bad(
            path,
            "column `z`: no control units (every row has z = 1)".to_string(),
        ));
    }
    if z.iter().all(|&t| !t) {
        return Err(bad(
            path,
            "column `z`: no treated units (every row has z = 0)".to_string(),
        ));
    }
    let outcome = if y.iter().all(|&v| v == 0.0 || v == 1.0) {
        OutcomeKind::Binary
    } else {
        OutcomeKind::Continuous
    };
    let x = Design::with_intercept(&rows).map_err(|e| bad(path, e.to_string()))?;
    Dataset::new(ids, x, z, y, outcome).map_err(|e| bad(path, e.to_string()))
}
