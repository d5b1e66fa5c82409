use std::collections::{BTreeMap, HashMap};

use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, FormatError, Result};
use crate::numcore::Matrix;
use crate::pipeline::table::{is_missing, parse_number, ColumnData, FlowTable};

/// Lower bound applied to fitted standard deviations.
pub const STD_FLOOR: f64 = 1e-12;
pub const BENIGN_CLASS: &str = "Benign";
pub const ANOMALY_CLASS: &str = "Anomaly";

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureStats {
    Numeric {
        median: f64,
        mean: f64,
        std: f64,
    },
    /// `categories` is sorted; a value's code is its index, and values not
    /// seen during fitting get `categories.len()`.
    Categorical {
        mode: String,
        categories: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub stats: FeatureStats,
}

impl FeatureSpec {
    fn encode_numeric(&self, v: Option<f64>) -> f64 {
        match &self.stats {
            FeatureStats::Numeric { median, mean, std } => (v.unwrap_or(*median) - mean) / std,
            FeatureStats::Categorical { .. } => unreachable!("numeric encoding of a categorical feature"),
        }
    }

    fn encode_category(&self, v: Option<&str>) -> f64 {
        match &self.stats {
            FeatureStats::Categorical { mode, categories } => {
                let v = v.unwrap_or(mode);
                categories
                    .binary_search_by(|c| c.as_str().cmp(v))
                    .unwrap_or(categories.len()) as f64
            }
            FeatureStats::Numeric { .. } => unreachable!("categorical encoding of a numeric feature"),
        }
    }

    fn is_numeric(&self) -> bool {
        matches!(self.stats, FeatureStats::Numeric { .. })
    }
}

/// Statistics frozen at fit time and replayed by [`transform`].
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessState {
    label_column: String,
    features: Vec<FeatureSpec>,
    class_names: Vec<String>,
    label_map: BTreeMap<String, usize>,
}

/// Encoded features plus integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub class_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &c in &self.y {
            counts[c] += 1;
        }
        counts
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn numeric_stats(name: &str, values: impl Iterator<Item = f64>) -> Result<FeatureStats> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return Err(Error::Data(format!("column {name:?} has no non-missing values")));
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(FeatureStats::Numeric {
        median: median(&v),
        mean,
        std: var.sqrt().max(STD_FLOOR),
    })
}

fn categorical_stats<'a>(name: &str, values: impl Iterator<Item = &'a str>) -> Result<FeatureStats> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    // BTreeMap iterates in lexicographic order, so the first maximum wins ties.
    let mode = counts
        .iter()
        .fold(None::<(&str, usize)>, |best, (&k, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((k, c)),
        })
        .ok_or_else(|| Error::Data(format!("column {name:?} has no non-missing values")))?
        .0
        .to_string();
    Ok(FeatureStats::Categorical {
        mode,
        categories: counts.keys().map(|k| k.to_string()).collect(),
    })
}

/// Renders a number the way it would most plausibly have been written in
/// a categorical column that happens to look numeric in another file.
fn numeric_as_text(v: f64) -> String {
    format!("{v}")
}

/// Fits imputation, standardization and encoding statistics on `table`.
pub fn fit_preprocessor(table: &FlowTable) -> Result<PreprocessState> {
    if table.n_rows() == 0 {
        return Err(Error::EmptyInput("fit_preprocessor"));
    }
    let features = table
        .features()
        .map(|(name, data)| {
            let stats = match data {
                ColumnData::Numeric(v) => numeric_stats(name, v.iter().flatten().copied())?,
                ColumnData::Text(v) => categorical_stats(name, v.iter().flatten().map(String::as_str))?,
            };
            Ok(FeatureSpec {
                name: name.to_string(),
                stats,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut class_names: Vec<String> = table.labels().to_vec();
    class_names.sort();
    class_names.dedup();
    let label_map = class_names.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    Ok(PreprocessState {
        label_column: table.label_column().to_string(),
        features,
        class_names,
        label_map,
    })
}

/// Applies fitted statistics to `table`. Never reads statistics from
/// `table` itself.
pub fn transform(state: &PreprocessState, table: &FlowTable) -> Result<FeatureMatrix> {
    let missing: Vec<&str> = state
        .features
        .iter()
        .filter(|f| table.column(&f.name).is_none())
        .map(|f| f.name.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("missing feature columns: {}", missing.join(", "))));
    }
    let n = table.n_rows();
    let d = state.features.len();
    let mut x = Matrix::zeros(n, d);
    for (j, spec) in state.features.iter().enumerate() {
        let column = table.column(&spec.name).expect("presence checked above");
        for i in 0..n {
            let value = match (column, spec.is_numeric()) {
                (ColumnData::Numeric(v), true) => spec.encode_numeric(v[i]),
                (ColumnData::Text(v), true) => {
                    let parsed = match &v[i] {
                        None => None,
                        Some(s) => Some(parse_number(s).ok_or_else(|| {
                            Error::Data(format!(
                                "row {}: column {:?} value {s:?} is not numeric",
                                i + 1,
                                spec.name
                            ))
                        })?),
                    };
                    spec.encode_numeric(parsed)
                }
                (ColumnData::Text(v), false) => spec.encode_category(v[i].as_deref()),
                (ColumnData::Numeric(v), false) => spec.encode_category(v[i].map(numeric_as_text).as_deref()),
            };
            x.set(i, j, value);
        }
    }
    let y = table
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            state
                .label_map
                .get(l)
                .copied()
                .ok_or_else(|| Error::Data(format!("row {}: label {l:?} was not seen during fitting", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        x,
        y,
        class_names: state.class_names.clone(),
    })
}

/// Collapses a multiclass matrix to `Benign` (0) vs `Anomaly` (1).
pub fn to_binary_labels(fm: &FeatureMatrix, benign: &str) -> Result<FeatureMatrix> {
    let b = fm
        .class_names
        .iter()
        .position(|c| c == benign)
        .ok_or_else(|| Error::Data(format!("benign class {benign:?} is not one of the labels")))?;
    let y: Vec<usize> = fm.y.iter().map(|&c| usize::from(c != b)).collect();
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::Data("binary relabelling leaves a single class".into()));
    }
    Ok(FeatureMatrix {
        x: fm.x.clone(),
        y,
        class_names: vec![BENIGN_CLASS.to_string(), ANOMALY_CLASS.to_string()],
    })
}

/// Maps one CSV layout onto the fitted feature order, for streaming
/// inference without building a [`FlowTable`].
#[derive(Debug, Clone)]
pub struct RowEncoder<'a> {
    state: &'a PreprocessState,
    positions: Vec<usize>,
}

impl RowEncoder<'_> {
    /// Writes the encoded features of one record into `out`; `row` is used
    /// only in error messages.
    pub fn encode(&self, record: &csv::StringRecord, row: usize, out: &mut [f64]) -> Result<()> {
        for ((spec, &p), slot) in self.state.features.iter().zip(&self.positions).zip(out.iter_mut()) {
            let cell = record
                .get(p)
                .ok_or_else(|| Error::Data(format!("row {row} has {} fields", record.len())))?;
            let cell = (!is_missing(cell)).then(|| cell.trim());
            *slot = if spec.is_numeric() {
                let v = match cell {
                    None => None,
                    Some(s) => Some(parse_number(s).ok_or_else(|| {
                        Error::Data(format!("row {row}: column {:?} value {s:?} is not numeric", spec.name))
                    })?),
                };
                spec.encode_numeric(v)
            } else {
                spec.encode_category(cell)
            };
        }
        Ok(())
    }
}

impl PreprocessState {
    /// A state with an identity label map (`class_names[i]` → `i`).
    pub fn new(label_column: impl Into<String>, features: Vec<FeatureSpec>, class_names: Vec<String>) -> Result<Self> {
        let label_map: BTreeMap<String, usize> = class_names.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        if label_map.len() != class_names.len() {
            return Err(Error::InvalidArgument("class names must be distinct".into()));
        }
        let state = PreprocessState {
            label_column: label_column.into(),
            features,
            class_names,
            label_map,
        };
        state.validate().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(state)
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.features.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Raw label value → class index.
    pub fn label_map(&self) -> &BTreeMap<String, usize> {
        &self.label_map
    }

    /// The same statistics with labels collapsed to `Benign`/`Anomaly`.
    pub fn to_binary(&self, benign: &str) -> Result<PreprocessState> {
        if !self.label_map.contains_key(benign) {
            return Err(Error::Data(format!("benign class {benign:?} is not one of the labels")));
        }
        if self.label_map.len() < 2 {
            return Err(Error::Data("binary relabelling leaves a single class".into()));
        }
        Ok(PreprocessState {
            label_column: self.label_column.clone(),
            features: self.features.clone(),
            class_names: vec![BENIGN_CLASS.to_string(), ANOMALY_CLASS.to_string()],
            label_map: self
                .label_map
                .keys()
                .map(|k| (k.clone(), usize::from(k != benign)))
                .collect(),
        })
    }

    pub fn encoder_for(&self, headers: &[String]) -> Result<RowEncoder<'_>> {
        let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
        let mut missing = Vec::new();
        let positions = self
            .features
            .iter()
            .filter_map(|f| {
                let p = index.get(f.name.as_str()).copied();
                if p.is_none() {
                    missing.push(f.name.as_str());
                }
                p
            })
            .collect();
        if !missing.is_empty() {
            return Err(Error::Data(format!("missing feature columns: {}", missing.join(", "))));
        }
        Ok(RowEncoder { state: self, positions })
    }

    /// Serialized form without class names, which the bundle stores in its
    /// own header.
    pub(crate) fn encode(&self, w: &mut ByteWriter) {
        w.str(&self.label_column);
        w.len_u32(self.features.len());
        for f in &self.features {
            w.str(&f.name);
            match &f.stats {
                FeatureStats::Numeric { median, mean, std } => {
                    w.u8(0);
                    w.f64(*median);
                    w.f64(*mean);
                    w.f64(*std);
                }
                FeatureStats::Categorical { mode, categories } => {
                    w.u8(1);
                    w.str(mode);
                    w.len_u32(categories.len());
                    for c in categories {
                        w.str(c);
                    }
                }
            }
        }
        w.len_u32(self.label_map.len());
        for (k, v) in &self.label_map {
            w.str(k);
            w.len_u32(*v);
        }
    }

    pub(crate) fn decode(r: &mut ByteReader<'_>, class_names: Vec<String>) -> Result<Self, FormatError> {
        let label_column = r.str()?;
        let n = r.count(5)?;
        let mut features = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.str()?;
            let stats = match r.u8()? {
                0 => FeatureStats::Numeric {
                    median: r.f64()?,
                    mean: r.f64()?,
                    std: r.f64()?,
                },
                1 => {
                    let mode = r.str()?;
                    let k = r.count(4)?;
                    let categories = (0..k).map(|_| r.str()).collect::<Result<Vec<_>, _>>()?;
                    FeatureStats::Categorical { mode, categories }
                }
                t => return Err(FormatError::Malformed(format!("unknown feature kind {t}"))),
            };
            features.push(FeatureSpec { name, stats });
        }
        let m = r.count(8)?;
        let mut label_map = BTreeMap::new();
        for _ in 0..m {
            let k = r.str()?;
            let v = r.u32()? as usize;
            label_map.insert(k, v);
        }
        Ok(PreprocessState {
            label_column,
            features,
            class_names,
            label_map,
        })
    }

    /// Structural checks run after a bundle's checksum has been verified.
    pub(crate) fn validate(&self) -> Result<(), FormatError> {
        if let Some((k, v)) = self.label_map.iter().find(|(_, &v)| v >= self.class_names.len()) {
            return Err(FormatError::Malformed(format!(
                "label {k:?} maps to class {v} out of range"
            )));
        }
        for f in &self.features {
            if let FeatureStats::Numeric { std, .. } = f.stats {
                if !(std >= STD_FLOOR) || !std.is_finite() {
                    return Err(FormatError::Malformed(format!("feature {:?} has std {std}", f.name)));
                }
            }
        }
        Ok(())
    }
}
