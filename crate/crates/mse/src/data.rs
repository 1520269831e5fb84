//! Reading and writing capture-history tables.
//!
//! The CSV layout has one 0/1 column per list followed by a `count` column,
//! one row per capture history. Rows for the same history are summed and
//! zero-count rows are dropped.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use mse_core::capture_data::{MAX_LISTS, MIN_LISTS};
use mse_core::{BuiltinDataset, CaptureDataset, CaptureHistory};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("the last column must be named `count`, found {0:?}")]
    MissingCount(String),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("expected between {MIN_LISTS} and {MAX_LISTS} list columns, found {0}")]
    ListCount(usize),
    #[error("row {row}: indicator {value:?} in column {column:?} is not 0 or 1")]
    Indicator {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: count {value:?} is not a nonnegative integer")]
    Count { row: usize, value: String },
    #[error("row {row}: {count} individuals recorded on no list")]
    NullHistory { row: usize, count: u64 },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Width {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{0:?} is neither a builtin dataset nor a readable file")]
    UnknownSource(String),
    #[error(transparent)]
    Core(#[from] mse_core::Error),
}

/// Parses the CSV layout from any reader.
pub fn parse_csv<R: Read>(reader: R) -> Result<CaptureDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let Some((last, labels)) = header.split_last() else {
        return Err(DataError::MissingCount(String::new()));
    };
    if last != "count" {
        return Err(DataError::MissingCount(last.clone()));
    }
    for (k, l) in header.iter().enumerate() {
        if header[..k].contains(l) {
            return Err(DataError::DuplicateColumn(l.clone()));
        }
    }
    let t = labels.len();
    if !(MIN_LISTS..=MAX_LISTS).contains(&t) {
        return Err(DataError::ListCount(t));
    }

    let mut entries = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = k + 2;
        if record.len() != t + 1 {
            return Err(DataError::Width {
                row,
                expected: t + 1,
                found: record.len(),
            });
        }
        let mut bits = 0u32;
        for (i, field) in record.iter().take(t).enumerate() {
            match field {
                "0" => {}
                "1" => bits |= 1 << i,
                other => {
                    return Err(DataError::Indicator {
                        row,
                        column: labels[i].clone(),
                        value: other.to_string(),
                    })
                }
            }
        }
        let raw = &record[t];
        let count: u64 = raw.parse().map_err(|_| DataError::Count {
            row,
            value: raw.to_string(),
        })?;
        if bits == 0 {
            if count > 0 {
                return Err(DataError::NullHistory { row, count });
            }
            continue;
        }
        entries.push((CaptureHistory::from_bits(bits), count));
    }
    Ok(CaptureDataset::from_entries(labels, entries)?)
}

/// Writes the canonical CSV form: observed histories only, canonical order.
pub fn write_csv<W: Write>(d: &CaptureDataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.labels().iter().map(String::as_str).collect();
    header.push("count");
    w.write_record(&header)?;
    for (h, n) in d.observed() {
        let mut row: Vec<String> = (0..d.t())
            .map(|i| if h.contains_list(i) { "1" } else { "0" }.to_string())
            .collect();
        row.push(n.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// A builtin name, or else a CSV path.
pub fn load(source: &str) -> Result<CaptureDataset, DataError> {
    if let Ok(which) = source.parse::<BuiltinDataset>() {
        return Ok(which.load());
    }
    let path = Path::new(source);
    if !path.is_file() {
        return Err(DataError::UnknownSource(source.to_string()));
    }
    let file = File::open(path).map_err(|source| DataError::Open {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellJson {
    pub history: Vec<String>,
    pub count: u64,
}

/// JSON echo of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetJson {
    pub labels: Vec<String>,
    pub cells: Vec<CellJson>,
}

impl From<&CaptureDataset> for DatasetJson {
    fn from(d: &CaptureDataset) -> Self {
        DatasetJson {
            labels: d.labels().to_vec(),
            cells: d
                .observed()
                .into_iter()
                .map(|(h, count)| CellJson {
                    history: h.lists().map(|i| d.labels()[i].clone()).collect(),
                    count,
                })
                .collect(),
        }
    }
}

impl TryFrom<&DatasetJson> for CaptureDataset {
    type Error = mse_core::Error;

    fn try_from(j: &DatasetJson) -> Result<Self, Self::Error> {
        let mut entries = Vec::with_capacity(j.cells.len());
        for c in &j.cells {
            let mut h = CaptureHistory::EMPTY;
            for l in &c.history {
                let i = j
                    .labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| mse_core::Error::UnknownLabel(l.clone()))?;
                h = h.union(CaptureHistory::singleton(i));
            }
            if h.is_empty() && c.count > 0 {
                return Err(mse_core::Error::NullHistoryCount(c.count));
            }
            entries.push((h, c.count));
        }
        CaptureDataset::from_entries(&j.labels, entries.into_iter().filter(|(h, _)| !h.is_empty()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARTIFICIAL: &str = "A,B,C,count\n1,0,0,40\n0,1,0,30\n0,0,1,20\n1,1,0,6\n";

    #[test]
    fn parses_artificial_table() {
        let d = parse_csv(ARTIFICIAL.as_bytes()).unwrap();
        assert_eq!(d, BuiltinDataset::Artificial3.load());
    }

    #[test]
    fn split_rows_are_summed() {
        let text = "A,B,C,count\n1,0,0,40\n0,1,0,30\n0,0,1,20\n1,1,0,4\n1,1,0,2\n0,1,1,0\n";
        assert_eq!(
            parse_csv(text.as_bytes()).unwrap(),
            parse_csv(ARTIFICIAL.as_bytes()).unwrap()
        );
    }

    #[test]
    fn rejects_bad_input() {
        let cases = [
            "A,B,C,count\n0,0,0,5\n",
            "A,B,C,count\n2,0,0,5\n",
            "A,B,C,count\n1,0,0,-5\n",
            "A,B,count\n1,0,5\n",
            "A,B,A,count\n1,0,0,5\n",
            "A,B,C,n\n1,0,0,5\n",
            "A,B,C,count\n1,0,5\n",
        ];
        for text in cases {
            assert!(parse_csv(text.as_bytes()).is_err(), "{text}");
        }
        assert!(matches!(
            parse_csv(cases[0].as_bytes()),
            Err(DataError::NullHistory { row: 2, count: 5 })
        ));
    }

    #[test]
    fn csv_and_json_roundtrip() {
        for which in BuiltinDataset::ALL {
            let d = which.load();
            let mut buf = Vec::new();
            write_csv(&d, &mut buf).unwrap();
            assert_eq!(parse_csv(buf.as_slice()).unwrap(), d);
            let j = DatasetJson::from(&d);
            let text = serde_json::to_string(&j).unwrap();
            let back: DatasetJson = serde_json::from_str(&text).unwrap();
            assert_eq!(CaptureDataset::try_from(&back).unwrap(), d);
        }
    }
}
