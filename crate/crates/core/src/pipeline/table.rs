use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// `true` for the cell spellings treated as missing: empty, `nan`, `null`
/// (case-insensitive, surrounding whitespace ignored).
pub fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("null")
}

pub(crate) fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Sorted distinct non-missing values; empty for numeric columns.
    pub categories: Vec<String>,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Text(Vec<Option<String>>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn missing(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.iter().filter(|c| c.is_none()).count(),
            ColumnData::Text(v) => v.iter().filter(|c| c.is_none()).count(),
        }
    }

    fn select(&self, idx: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Text(v) => ColumnData::Text(idx.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// A typed, column-major view of a labelled CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTable {
    names: Vec<String>,
    columns: Vec<ColumnData>,
    label_index: usize,
    labels: Vec<String>,
}

impl FlowTable {
    /// Reads a labelled table from any CSV source.
    pub fn from_reader<R: Read>(reader: R, label_column: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let label_index = names
            .iter()
            .position(|n| n == label_column)
            .ok_or_else(|| Error::Data(format!("label column {label_column:?} not found in header")))?;

        let width = names.len();
        let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); width];
        let mut record = csv::StringRecord::new();
        let mut row = 0usize;
        while rdr.read_record(&mut record)? {
            row += 1;
            if record.len() != width {
                let line = record.position().map_or(0, |p| p.line());
                return Err(Error::Data(format!(
                    "row {row} (line {line}) has {} fields, expected {width}",
                    record.len()
                )));
            }
            for (col, cell) in raw.iter_mut().zip(record.iter()) {
                col.push((!is_missing(cell)).then(|| cell.trim().to_string()));
            }
        }

        let mut labels = Vec::with_capacity(row);
        for (i, l) in raw[label_index].iter().enumerate() {
            match l {
                Some(l) => labels.push(l.clone()),
                None => return Err(Error::Data(format!("row {} has a missing label", i + 1))),
            }
        }

        let columns = raw
            .into_iter()
            .enumerate()
            .map(|(c, cells)| {
                if c == label_index {
                    return ColumnData::Text(Vec::new());
                }
                let parsed: Option<Vec<Option<f64>>> = cells
                    .iter()
                    .map(|cell| match cell {
                        None => Some(None),
                        Some(s) => parse_number(s).map(Some),
                    })
                    .collect();
                match parsed {
                    Some(values) => ColumnData::Numeric(values),
                    None => ColumnData::Text(cells),
                }
            })
            .collect();

        Ok(Self {
            names,
            columns,
            label_index,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn label_column(&self) -> &str {
        &self.names[self.label_index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Feature columns in header order, label excluded.
    pub fn features(&self) -> impl Iterator<Item = (&str, &ColumnData)> {
        self.names
            .iter()
            .zip(&self.columns)
            .enumerate()
            .filter(move |(i, _)| *i != self.label_index)
            .map(|(_, (n, c))| (n.as_str(), c))
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        let i = self.names.iter().position(|n| n == name)?;
        (i != self.label_index).then(|| &self.columns[i])
    }

    pub fn schema(&self) -> Vec<ColumnSchema> {
        self.names
            .iter()
            .zip(&self.columns)
            .enumerate()
            .map(|(i, (name, data))| {
                if i == self.label_index {
                    let categories: BTreeSet<&String> = self.labels.iter().collect();
                    return ColumnSchema {
                        name: name.clone(),
                        kind: ColumnKind::Label,
                        categories: categories.into_iter().cloned().collect(),
                        missing: 0,
                    };
                }
                let (kind, categories) = match data {
                    ColumnData::Numeric(_) => (ColumnKind::Numeric, Vec::new()),
                    ColumnData::Text(v) => {
                        let set: BTreeSet<&String> = v.iter().flatten().collect();
                        (ColumnKind::Categorical, set.into_iter().cloned().collect())
                    }
                };
                ColumnSchema {
                    name: name.clone(),
                    kind,
                    categories,
                    missing: data.missing(),
                }
            })
            .collect()
    }

    /// The rows at `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> FlowTable {
        FlowTable {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == self.label_index {
                        c.clone()
                    } else {
                        c.select(idx)
                    }
                })
                .collect(),
            label_index: self.label_index,
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

impl FlowTable {
    /// Writes the table back as CSV. Numbers use the shortest text that
    /// parses back to the same value; missing cells are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names)?;
        let mut record: Vec<String> = Vec::with_capacity(self.names.len());
        for r in 0..self.n_rows() {
            record.clear();
            for (c, col) in self.columns.iter().enumerate() {
                record.push(if c == self.label_index {
                    self.labels[r].clone()
                } else {
                    match col {
                        ColumnData::Numeric(v) => v[r].map(|x| x.to_string()).unwrap_or_default(),
                        ColumnData::Text(v) => v[r].clone().unwrap_or_default(),
                    }
                });
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::Data(format!("writing CSV: {e}")))
    }
}

/// Reads a labelled CSV file.
pub fn read_csv(path: impl AsRef<Path>, label_column: &str) -> Result<FlowTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    FlowTable::from_reader(std::io::BufReader::new(file), label_column)
}
