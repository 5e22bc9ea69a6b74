//! File formats: table files (CSV with a header row, or JSON lines with a
//! meta header), model files, and structure/move files.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConfigurationMatrix, ModelSpec, SufficientStatistics};
use crate::presets::{preset, ExperimentPreset};

/// First line of a JSON-lines table file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TableFileMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub count: u64,
    pub cells: Vec<String>,
}

/// One table row in a JSON-lines file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRecord {
    pub table: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retries: Option<u32>,
    /// Largest scaling iteration count along the path, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ips_iterations: Option<u32>,
}

/// Writes tables as CSV: a header row of cell labels, one row per table.
pub fn write_tables_csv<'a, W: Write>(
    out: &mut W,
    labels: &[String],
    tables: impl Iterator<Item = &'a [u64]>,
) -> Result<()> {
    writeln!(out, "{}", labels.join(","))?;
    for table in tables {
        let row: Vec<String> = table.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes tables as JSON lines: one meta object, then one record per table.
pub fn write_tables_jsonl<W: Write>(
    out: &mut W,
    meta: &TableFileMeta,
    records: impl Iterator<Item = TableRecord>,
) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string(meta)?)?;
    for record in records {
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}

/// Reads a table file in either format, sniffing JSON lines by the
/// leading brace.
pub fn read_tables<R: BufRead>(reader: R) -> Result<(Option<TableFileMeta>, Vec<Vec<u64>>)> {
    let mut meta = None;
    let mut tables = Vec::new();
    let mut header_seen = false;
    let mut width = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('{') {
            if !header_seen && meta.is_none() {
                meta = Some(serde_json::from_str::<TableFileMeta>(trimmed)?);
                width = meta.as_ref().map(|m| m.cells.len());
            } else {
                let record: TableRecord = serde_json::from_str(trimmed)?;
                check_width(&mut width, record.table.len(), lineno)?;
                tables.push(record.table);
            }
            header_seen = true;
            continue;
        }
        if !header_seen {
            // CSV header row of labels.
            header_seen = true;
            width = Some(trimmed.split(',').count());
            continue;
        }
        let row: Vec<u64> = trimmed
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        check_width(&mut width, row.len(), lineno)?;
        tables.push(row);
    }
    Ok((meta, tables))
}

fn check_width(width: &mut Option<usize>, got: usize, lineno: usize) -> Result<()> {
    match width {
        Some(w) if *w != got => Err(Error::ModelMismatch(format!(
            "line {}: row has {got} cells, expected {w}",
            lineno + 1
        ))),
        Some(_) => Ok(()),
        None => {
            *width = Some(got);
            Ok(())
        }
    }
}

/// A model description file: either a preset reference or an explicit
/// matrix with odds and target statistics.
#[derive(Clone, Debug, Deserialize)]
pub struct ModelFile {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub s: Option<u64>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    pub odds: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<i64>>,
    #[serde(default)]
    pub initial: Option<Vec<u64>>,
}

/// A loaded model: a full preset, or a custom model with optional target
/// statistics and chain start.
pub enum LoadedModel {
    Preset(Box<ExperimentPreset>),
    Custom {
        model: ModelSpec,
        b: Option<SufficientStatistics>,
        initial: Option<Vec<u64>>,
    },
}

pub fn load_model(text: &str) -> Result<LoadedModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    if let Some(name) = file.preset {
        let s = file.s.unwrap_or(1);
        return Ok(LoadedModel::Preset(Box::new(preset(&name, s)?)));
    }
    let Some(rows) = file.matrix else {
        return Err(Error::Parse(
            "model file needs either a preset name or a matrix".into(),
        ));
    };
    let matrix = ConfigurationMatrix::new(rows)?;
    let model = match file.odds {
        Some(odds) => ModelSpec::with_float_odds(matrix, &odds)?,
        None => ModelSpec::log_linear(matrix),
    };
    Ok(LoadedModel::Custom {
        model,
        b: file.b.map(SufficientStatistics::new),
        initial: file.initial,
    })
}

/// Parses a matrix from CSV text, one row per line.
pub fn parse_matrix_csv(text: &str) -> Result<Vec<Vec<i64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Vec<i64> = trimmed
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Parses a JSON move file: a list of integer vectors.
pub fn parse_moves(text: &str) -> Result<Vec<Vec<i64>>> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let labels = vec!["u11".to_string(), "u12".to_string()];
        let tables = [vec![1u64, 2], vec![0u64, 3]];
        let mut buf = Vec::new();
        write_tables_csv(&mut buf, &labels, tables.iter().map(|t| t.as_slice())).unwrap();
        let (meta, read) = read_tables(buf.as_slice()).unwrap();
        assert!(meta.is_none());
        assert_eq!(read, tables.to_vec());
    }

    #[test]
    fn jsonl_round_trip() {
        let meta = TableFileMeta {
            preset: Some("indep-2x2".into()),
            s: Some(1),
            estimator: Some("exact".into()),
            seed: Some(7),
            count: 1,
            cells: vec!["u11".into(), "u12".into(), "u21".into(), "u22".into()],
        };
        let records = vec![TableRecord {
            table: vec![1, 0, 1, 1],
            chi_square: Some(1.0),
            retries: Some(0),
            ips_iterations: None,
        }];
        let mut buf = Vec::new();
        write_tables_jsonl(&mut buf, &meta, records.into_iter()).unwrap();
        let (meta_read, tables) = read_tables(buf.as_slice()).unwrap();
        assert_eq!(meta_read.unwrap().preset.as_deref(), Some("indep-2x2"));
        assert_eq!(tables, vec![vec![1, 0, 1, 1]]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let text = "u1,u2\n1,2\n1,2,3\n";
        assert!(matches!(
            read_tables(text.as_bytes()),
            Err(Error::ModelMismatch(_))
        ));
    }

    #[test]
    fn model_file_with_preset() {
        let text = r#"{"preset": "indep-2x2", "s": 2}"#;
        match load_model(text).unwrap() {
            LoadedModel::Preset(p) => {
                assert_eq!(p.name, "indep-2x2");
                assert_eq!(p.s, 2);
            }
            _ => panic!("expected preset"),
        }
    }

    #[test]
    fn model_file_with_matrix() {
        let text = r#"{
            "matrix": [[1,1,0,0],[0,0,1,1],[1,0,1,0],[0,1,0,1]],
            "odds": [1.0, 1.0, 1.0, 1.0],
            "b": [1, 2, 2, 1]
        }"#;
        match load_model(text).unwrap() {
            LoadedModel::Custom { model, b, .. } => {
                assert_eq!(model.matrix().cols(), 4);
                assert_eq!(b.unwrap().values(), &[1, 2, 2, 1]);
            }
            _ => panic!("expected custom model"),
        }
    }

    #[test]
    fn matrix_csv_parses() {
        let rows = parse_matrix_csv("1,1,0,0\n0,0,1,1\n1,0,1,0\n0,1,0,1\n").unwrap();
        assert_eq!(rows.len(), 4);
        assert!(ConfigurationMatrix::new(rows).is_ok());
    }
}
