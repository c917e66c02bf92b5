use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::losses::{DataPoint, Dataset};
use crate::numkit::{ExactSum, ParamVector};

/// Column names of the California Housing table: eight features and the
/// median house value target.
pub const HOUSING_COLUMNS: [&str; 9] = [
    "MedInc",
    "HouseAge",
    "AveRooms",
    "AveBedrms",
    "Population",
    "AveOccup",
    "Latitude",
    "Longitude",
    "MedHouseVal",
];

pub fn load_housing_csv(path: impl AsRef<Path>, standardize: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_housing_csv(&text, standardize)
}

/// Parses a header line followed by rows of 8 features and 1 target.
pub fn parse_housing_csv(text: &str, standardize: bool) -> Result<Dataset> {
    let width = HOUSING_COLUMNS.len();
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let Some((_, header)) = lines.next() else {
        return Err(Error::Parse {
            line: 1,
            message: "missing header row".into(),
        });
    };
    let found = header.split(',').count();
    if found != width {
        return Err(Error::Schema {
            line: 1,
            expected: width,
            found,
        });
    }

    let mut rows: Vec<[f64; 9]> = Vec::new();
    let mut pending_blank: Option<usize> = None;
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            pending_blank.get_or_insert(line);
            continue;
        }
        if let Some(blank) = pending_blank {
            return Err(Error::Parse {
                line: blank,
                message: "empty row".into(),
            });
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != width {
            return Err(Error::Schema {
                line,
                expected: width,
                found: fields.len(),
            });
        }
        let mut row = [0.0; 9];
        for (slot, field) in row.iter_mut().zip(&fields) {
            let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value: {field:?}"),
                });
            }
            *slot = value;
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return invalid("no data rows");
    }
    if standardize {
        standardize_columns(&mut rows)?;
    }
    let points = rows
        .into_iter()
        .map(|r| {
            Ok(DataPoint::Regression {
                x: ParamVector::new(r[..8].to_vec())?,
                y: r[8],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(points)
}

/// Shifts and scales every column to zero mean and unit (population)
/// variance.
fn standardize_columns(rows: &mut [[f64; 9]]) -> Result<()> {
    let n = rows.len() as f64;
    let mut acc = ExactSum::new();
    for k in 0..9 {
        acc.clear();
        rows.iter().for_each(|r| acc.add(r[k]));
        let mean = acc.value() / n;
        acc.clear();
        rows.iter().for_each(|r| acc.add((r[k] - mean) * (r[k] - mean)));
        let std = (acc.value() / n).sqrt();
        if !(std > 0.0) {
            return invalid(format!(
                "column {} is constant and cannot be standardized",
                HOUSING_COLUMNS[k]
            ));
        }
        for r in rows.iter_mut() {
            r[k] = (r[k] - mean) / std;
        }
    }
    Ok(())
}

/// Writes a regression dataset with 8 features in the same layout, using
/// shortest round-trip number formatting.
pub fn write_housing_csv(dataset: &Dataset, mut out: impl Write) -> Result<()> {
    if dataset.dim() != 8 {
        return invalid(format!("housing rows have 8 features, dataset has {}", dataset.dim()));
    }
    writeln!(out, "{}", HOUSING_COLUMNS.join(","))?;
    for p in dataset.points() {
        let DataPoint::Regression { x, y } = p else {
            return invalid("housing rows are regression points");
        };
        let mut line = String::new();
        for v in x.as_slice() {
            line.push_str(&format!("{v:?},"));
        }
        line.push_str(&format!("{y:?}"));
        writeln!(out, "{line}")?;
    }
    Ok(())
}
