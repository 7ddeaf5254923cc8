use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureSequence;

fn split_row(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else if line.contains(';') {
        line.split(';').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses headerless numeric rows (comma, tab, semicolon or whitespace separated),
/// one frame per row. The result has no frame hop.
pub fn parse_feature_table(text: &str, expected_dim: usize) -> Result<FeatureSequence> {
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells = split_row(line);
        if cells.len() != expected_dim {
            return Err(Error::Table {
                row,
                message: format!("{} columns, expected {expected_dim}", cells.len()),
            });
        }
        for cell in cells {
            let v: f32 = cell.parse().map_err(|_| Error::Table {
                row,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Table {
                    row,
                    message: format!("non-finite value `{cell}`"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Table {
            row: 0,
            message: "no data rows".into(),
        });
    }
    FeatureSequence::new(String::new(), expected_dim, values, 0.0)
}

pub fn read_feature_table(path: &Path, expected_dim: usize) -> Result<FeatureSequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_feature_table(&text, expected_dim)
}
