use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, DatasetSchema, LabeledRecord, DEFAULT_LABEL_COLUMN};
use crate::error::{Error, Result};
use crate::iforest::FeatureVector;

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub label_column: String,
    /// Project onto these columns, by name. Inferred from the header when `None`.
    pub feature_names: Option<Vec<String>>,
    /// Reject labels outside this set.
    pub allowed_labels: Option<BTreeSet<String>>,
    /// Skip rows with missing or non-numeric cells instead of failing.
    pub drop_invalid_rows: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: DEFAULT_LABEL_COLUMN.to_owned(),
            feature_names: None,
            allowed_labels: None,
            drop_invalid_rows: false,
        }
    }
}

impl CsvOptions {
    pub fn with_features(mut self, names: Vec<String>) -> Self {
        self.feature_names = Some(names);
        self
    }
}

/// A feature row whose label column may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub features: FeatureVector,
    pub label: Option<String>,
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, opts)
}

pub fn load_feature_rows(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<(Vec<String>, Vec<FeatureRow>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_feature_rows(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let (feature_names, rows) = parse(reader, opts, true)?;
    let schema = DatasetSchema::new(feature_names, opts.label_column.clone())?;
    let mut classes = BTreeSet::new();
    let records = rows
        .into_iter()
        .enumerate()
        .map(|(id, row)| {
            let label = row.label.expect("label required");
            classes.insert(label.clone());
            LabeledRecord { id, features: row.features, label }
        })
        .collect();
    let schema = schema.with_classes(match &opts.allowed_labels {
        Some(allowed) => allowed.clone(),
        None => classes,
    });
    Ok(Dataset { schema, records })
}

pub fn read_feature_rows<R: Read>(reader: R, opts: &CsvOptions) -> Result<(Vec<String>, Vec<FeatureRow>)> {
    parse(reader, opts, false)
}

fn parse<R: Read>(reader: R, opts: &CsvOptions, label_required: bool) -> Result<(Vec<String>, Vec<FeatureRow>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let position = |name: &str| header.iter().position(|h| h == name);

    let label_idx = position(&opts.label_column);
    if label_required && label_idx.is_none() {
        return Err(Error::MissingColumn(opts.label_column.clone()));
    }
    let feature_names: Vec<String> = match &opts.feature_names {
        Some(names) => names.clone(),
        None => header.iter().filter(|h| **h != opts.label_column).cloned().collect(),
    };
    let feature_idx = feature_names
        .iter()
        .map(|n| position(n).ok_or_else(|| Error::MissingColumn(n.clone())))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let parsed = parse_row(&record, row, &feature_names, &feature_idx, label_idx);
        let row_value = match parsed {
            Ok(v) => v,
            Err(e @ (Error::NonNumericValue { .. } | Error::MissingValue { .. })) => {
                if opts.drop_invalid_rows {
                    continue;
                }
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        if let (Some(allowed), Some(label)) = (&opts.allowed_labels, &row_value.label) {
            if !allowed.contains(label) {
                return Err(Error::UnknownLabel { row, label: label.clone() });
            }
        }
        rows.push(row_value);
    }
    Ok((feature_names, rows))
}

fn parse_row(
    record: &csv::StringRecord,
    row: usize,
    names: &[String],
    idx: &[usize],
    label_idx: Option<usize>,
) -> Result<FeatureRow> {
    let mut values = Vec::with_capacity(idx.len());
    for (name, &i) in names.iter().zip(idx) {
        let cell = record.get(i).unwrap_or("");
        if cell.is_empty() {
            return Err(Error::MissingValue { row, column: name.clone() });
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => {
                return Err(Error::NonNumericValue { row, column: name.clone(), value: cell.to_owned() });
            }
        }
    }
    let label = match label_idx {
        Some(i) => {
            let cell = record.get(i).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::MissingValue { row, column: "label".into() });
            }
            Some(cell.to_owned())
        }
        None => None,
    };
    Ok(FeatureRow { features: FeatureVector::new(values)?, label })
}

/// Writes records with a trailing label column. Reals use shortest round-trip formatting.
pub fn write_csv<W: Write>(writer: W, schema: &DatasetSchema, records: &[LabeledRecord]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let mut header: Vec<&str> = schema.feature_names.iter().map(String::as_str).collect();
    header.push(&schema.label_column);
    wtr.write_record(&header)?;
    for r in records {
        let mut cells: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        cells.push(r.label.clone());
        wtr.write_record(&cells)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
