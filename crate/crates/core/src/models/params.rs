use std::fmt;

use serde::Serialize;

use crate::models::Classifier;

/// One row of a layer-wise parameter table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerRow {
    pub name: &'static str,
    pub kind: &'static str,
    pub output_shape: Vec<usize>,
    pub activation: &'static str,
    pub params: usize,
    /// Closed-form parameter formula, where the architecture defines one.
    pub formula: Option<&'static str>,
    /// Published reference count for this row, where one is stated as a
    /// fixed number. Rows whose stored count differs are flagged by
    /// [`LayerRow::reference_delta`].
    pub reference: Option<usize>,
}

impl LayerRow {
    pub(crate) fn new(
        name: &'static str,
        kind: &'static str,
        output_shape: Vec<usize>,
        activation: &'static str,
    ) -> Self {
        Self {
            name,
            kind,
            output_shape,
            activation,
            params: 0,
            formula: None,
            reference: None,
        }
    }

    pub(crate) fn with_formula(mut self, formula: &'static str) -> Self {
        self.formula = Some(formula);
        self
    }

    pub(crate) fn with_reference(mut self, count: usize) -> Self {
        self.reference = Some(count);
        self
    }

    /// `stored − reference`, when the two disagree.
    pub fn reference_delta(&self) -> Option<i64> {
        self.reference
            .filter(|&r| r != self.params)
            .map(|r| self.params as i64 - r as i64)
    }

    pub fn shape_string(&self) -> String {
        match self.output_shape.as_slice() {
            [n] => format!("({n},)"),
            dims => format!(
                "({})",
                dims.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamTable {
    pub rows: Vec<LayerRow>,
    pub total: usize,
}

/// Per-layer trainable parameter counts, obtained by enumerating the
/// tensors the model actually stores.
pub fn count_params<C: Classifier + ?Sized>(model: &C) -> ParamTable {
    let state = model.state();
    let mut rows = model.layout();
    for row in &mut rows {
        row.params = state
            .iter()
            .filter(|(info, _)| info.trainable && info.layer == row.name)
            .map(|(_, t)| t.len())
            .sum();
    }
    let total = state.iter().filter(|(i, _)| i.trainable).map(|(_, t)| t.len()).sum();
    debug_assert_eq!(total, rows.iter().map(|r| r.params).sum::<usize>());
    ParamTable { rows, total }
}

impl fmt::Display for ParamTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:<38} {:<10} {:<10} {:>10}  {}",
            "Layer", "Type", "Output", "Activation", "Params", "Note"
        )?;
        for row in &self.rows {
            let mut note = String::new();
            if let Some(formula) = row.formula {
                note.push_str(formula);
            }
            if let (Some(reference), Some(delta)) = (row.reference, row.reference_delta()) {
                if !note.is_empty() {
                    note.push_str("; ");
                }
                note.push_str(&format!("reference table lists {reference} (delta {delta:+})"));
            }
            writeln!(
                f,
                "{:<24} {:<38} {:<10} {:<10} {:>10}  {}",
                row.name,
                row.kind,
                row.shape_string(),
                row.activation,
                row.params,
                note
            )?;
        }
        write!(f, "{:<24} {:<38} {:<10} {:<10} {:>10}", "Total", "", "", "", self.total)
    }
}
