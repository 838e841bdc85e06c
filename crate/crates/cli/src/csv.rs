// Copyright 2026 The qfilter Authors
// SPDX-License-Identifier: Apache-2.0

//! CSV tables with round-trip number formatting.

use std::fs::File;
use std::path::Path;

use crate::error::CliError;

/// 17 significant digits, enough to recover every `f64` bit for bit.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

pub enum Field<'a> {
    Num(f64),
    Text(&'a str),
    Empty,
}

pub struct CsvWriter {
    out: csv::Writer<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[String]) -> Result<Self, CliError> {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record(header)?;
        Ok(Self { out })
    }

    pub fn numbers(&mut self, row: &[f64]) -> Result<(), CliError> {
        self.out.write_record(row.iter().map(|x| number(*x)))?;
        Ok(())
    }

    pub fn fields(&mut self, row: &[Field]) -> Result<(), CliError> {
        self.out.write_record(row.iter().map(|f| match f {
            Field::Num(x) => number(*x),
            Field::Text(s) => s.to_string(),
            Field::Empty => String::new(),
        }))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush()?;
        Ok(())
    }
}

/// Reads a record CSV (header, then `t` and the increments per row) and
/// returns the increments only.
pub fn read_record(path: &Path) -> Result<(usize, Vec<f64>), CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let width = reader.headers()?.len().saturating_sub(1);
    let mut data = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        for s in row.iter().skip(1) {
            let x = s
                .trim()
                .parse::<f64>()
                .map_err(|e| CliError::Record(format!("{}: data row {}: {e}", path.display(), i + 1)))?;
            data.push(x);
        }
    }
    Ok((width, data))
}
