//! Count-table ingestion, filtering and the compositional transforms.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use log::warn;
use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    SamplesInRows,
    TaxaInRows,
}

/// Samples × taxa matrix of nonnegative abundances.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    values: Array2<f64>,
    taxa: Vec<String>,
    samples: Vec<String>,
}

impl CountTable {
    pub fn new(values: Array2<f64>, taxa: Vec<String>, samples: Vec<String>) -> Result<Self> {
        if values.ncols() != taxa.len() || values.nrows() != samples.len() {
            return Err(Error::Load(format!(
                "shape {}x{} does not match {} sample and {} taxon labels",
                values.nrows(),
                values.ncols(),
                samples.len(),
                taxa.len()
            )));
        }
        check_unique(&taxa, "taxon")?;
        check_unique(&samples, "sample")?;
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Load(format!(
                    "invalid value {v} at sample {} ({}), taxon {}",
                    i + 1,
                    samples[i],
                    taxa[j]
                )));
            }
        }
        Ok(Self {
            values,
            taxa,
            samples,
        })
    }

    /// Table with generated labels `T1..Tp` and `S1..Sn`.
    pub fn from_matrix(values: Array2<f64>) -> Result<Self> {
        let taxa = (1..=values.ncols()).map(|j| format!("T{j}")).collect();
        let samples = (1..=values.nrows()).map(|i| format!("S{i}")).collect();
        Self::new(values, taxa, samples)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn taxa(&self) -> &[String] {
        &self.taxa
    }

    pub fn samples(&self) -> &[String] {
        &self.samples
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_taxa(&self) -> usize {
        self.values.ncols()
    }

    pub fn has_zeros(&self) -> bool {
        self.values.iter().any(|&v| v == 0.0)
    }

    /// Same taxa, restricted to the given sample rows (used for subsampling and bootstrap).
    /// Repeated rows get suffixed labels so the label set stays unique.
    pub fn select_samples(&self, rows: &[usize]) -> CountTable {
        let mut seen = HashSet::new();
        let samples = rows
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                if seen.insert(r) {
                    self.samples[r].clone()
                } else {
                    format!("{}#{k}", self.samples[r])
                }
            })
            .collect();
        CountTable {
            values: self.values.select(Axis(0), rows),
            taxa: self.taxa.clone(),
            samples,
        }
    }

    pub fn select_taxa(&self, cols: &[usize]) -> CountTable {
        CountTable {
            values: self.values.select(Axis(1), cols),
            taxa: cols.iter().map(|&c| self.taxa[c].clone()).collect(),
            samples: self.samples.clone(),
        }
    }

    /// Drops taxa whose abundance is identical in every sample. Returns the
    /// reduced table and the dropped labels.
    pub fn drop_constant_taxa(&self) -> (CountTable, Vec<String>) {
        let mut keep = Vec::new();
        let mut dropped = Vec::new();
        for (j, col) in self.values.axis_iter(Axis(1)).enumerate() {
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                dropped.push(self.taxa[j].clone());
            } else {
                keep.push(j);
            }
        }
        for t in &dropped {
            warn!("dropping taxon {t}: constant abundance across samples");
        }
        (self.select_taxa(&keep), dropped)
    }
}

fn check_unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Load(format!("duplicate {what} label {l:?}")));
        }
    }
    Ok(())
}

fn detect_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Reads a delimited table with one header row and one leading label column.
pub fn load_count_table(path: impl AsRef<Path>, orientation: Orientation) -> Result<CountTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_count_table(&text, orientation)
}

pub fn parse_count_table(text: &str, orientation: Orientation) -> Result<CountTable> {
    let header_line = text
        .lines()
        .next()
        .ok_or_else(|| Error::Load("empty input".into()))?;
    let delimiter = detect_delimiter(header_line);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Load("empty input".into()))?
        .map_err(|e| Error::Load(e.to_string()))?;
    let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if col_labels.is_empty() {
        return Err(Error::Load("header has no data columns".into()));
    }

    let mut row_labels = Vec::new();
    let mut cells = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(|e| Error::Load(e.to_string()))?;
        let row = r + 1;
        if rec.len() == 1 && rec.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if rec.len() != col_labels.len() + 1 {
            return Err(Error::Load(format!(
                "row {row} has {} fields, header has {}",
                rec.len(),
                col_labels.len() + 1
            )));
        }
        let label = rec.get(0).unwrap_or_default().to_string();
        for (c, field) in rec.iter().skip(1).enumerate() {
            let col = &col_labels[c];
            if field.is_empty() {
                return Err(Error::Load(format!(
                    "missing value at row {row} ({label}), column {col}"
                )));
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::Load(format!(
                    "non-numeric value {field:?} at row {row} ({label}), column {col}"
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Load(format!(
                    "non-finite value at row {row} ({label}), column {col}"
                )));
            }
            if v < 0.0 {
                return Err(Error::Load(format!(
                    "negative value {v} at row {row} ({label}), column {col}"
                )));
            }
            cells.push(v);
        }
        row_labels.push(label);
    }
    if row_labels.is_empty() {
        return Err(Error::Load("no data rows".into()));
    }
    let m = Array2::from_shape_vec((row_labels.len(), col_labels.len()), cells)
        .map_err(|e| Error::Load(e.to_string()))?;
    match orientation {
        Orientation::SamplesInRows => CountTable::new(m, col_labels, row_labels),
        Orientation::TaxaInRows => {
            CountTable::new(m.t().as_standard_layout().to_owned(), row_labels, col_labels)
        }
    }
}

/// Writes the table samples-in-rows; values use the shortest exact decimal form.
pub fn write_count_table(t: &CountTable, path: impl AsRef<Path>, delimiter: char) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_count_table(t, delimiter)).map_err(|e| Error::io(path, e))
}

pub fn format_count_table(t: &CountTable, delimiter: char) -> String {
    let d = delimiter.to_string();
    let mut out = String::from("sample");
    for taxon in &t.taxa {
        out.push_str(&d);
        out.push_str(taxon);
    }
    out.push('\n');
    for (i, row) in t.values.axis_iter(Axis(0)).enumerate() {
        out.push_str(&t.samples[i]);
        for v in row {
            out.push_str(&d);
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Keeps taxa present in at least `min_prevalence * n` samples with total
/// abundance at least `min_total`.
pub fn filter_taxa(t: &CountTable, min_prevalence: f64, min_total: f64) -> Result<CountTable> {
    if !(0.0..=1.0).contains(&min_prevalence) || min_total < 0.0 {
        return Err(Error::Filter(format!(
            "invalid thresholds: min_prevalence={min_prevalence}, min_total={min_total}"
        )));
    }
    let n = t.n_samples() as f64;
    let keep: Vec<usize> = t
        .values
        .axis_iter(Axis(1))
        .enumerate()
        .filter(|(_, col)| {
            let present = col.iter().filter(|&&v| v > 0.0).count() as f64;
            present >= min_prevalence * n && col.sum() >= min_total
        })
        .map(|(j, _)| j)
        .collect();
    if keep.is_empty() {
        return Err(Error::Filter("every taxon was removed".into()));
    }
    Ok(t.select_taxa(&keep))
}

/// Row-normalized proportions with strictly positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionTable {
    pub values: Array2<f64>,
    pub taxa: Vec<String>,
    pub samples: Vec<String>,
    pub pseudo: f64,
}

pub fn to_composition(t: &CountTable, pseudo: f64) -> Result<CompositionTable> {
    if pseudo < 0.0 || !pseudo.is_finite() {
        return Err(Error::Transform(format!("invalid pseudo-count {pseudo}")));
    }
    if pseudo == 0.0 && t.has_zeros() {
        return Err(Error::Transform(
            "zeros present and pseudo-count is 0".into(),
        ));
    }
    let mut values = t.values.mapv(|v| v + pseudo);
    for mut row in values.axis_iter_mut(Axis(0)) {
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    Ok(CompositionTable {
        values,
        taxa: t.taxa.clone(),
        samples: t.samples.clone(),
        pseudo,
    })
}

/// Composition for methods carrying a `counts` flag: with `counts` the
/// pseudo-count is always added; without it the table is taken as relative
/// abundances and the pseudo-count is only used as zero replacement.
pub fn composition_for(t: &CountTable, counts: bool, pseudo: f64) -> Result<CompositionTable> {
    if counts || t.has_zeros() {
        to_composition(t, pseudo)
    } else {
        to_composition(t, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Clr,
    Mclr,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedTable {
    pub values: Array2<f64>,
    pub transform: Transform,
    pub taxa: Vec<String>,
    pub samples: Vec<String>,
}

/// Centered log-ratio: `ln x_ij - mean_k ln x_ik`.
pub fn clr_transform(c: &CompositionTable) -> Result<TransformedTable> {
    if let Some(((i, j), _)) = c.values.indexed_iter().find(|(_, &v)| v <= 0.0) {
        return Err(Error::Transform(format!(
            "nonpositive entry at sample {}, taxon {}",
            c.samples[i], c.taxa[j]
        )));
    }
    Ok(TransformedTable {
        values: clr_rows(c.values.view()),
        transform: Transform::Clr,
        taxa: c.taxa.clone(),
        samples: c.samples.clone(),
    })
}

pub(crate) fn clr_rows(x: ArrayView2<f64>) -> Array2<f64> {
    let mut out = x.mapv(f64::ln);
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.sum() / row.len() as f64;
        row.mapv_inplace(|v| v - m);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    #[default]
    Auto,
    Fixed(f64),
}

/// Modified CLR: log-ratio centering over each row's nonzero entries, zeros kept at 0,
/// followed by a global shift of the nonzero entries.
pub fn mclr_transform(t: &CountTable, shift: ShiftPolicy) -> Result<TransformedTable> {
    let mut out = Array2::zeros(t.values.raw_dim());
    let mut min_nonzero = f64::INFINITY;
    for (i, row) in t.values.axis_iter(Axis(0)).enumerate() {
        let logs: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(j, &v)| (j, v.ln()))
            .collect();
        if logs.is_empty() {
            return Err(Error::Transform(format!(
                "sample {} has no nonzero entries",
                t.samples[i]
            )));
        }
        let m = logs.iter().map(|(_, l)| l).sum::<f64>() / logs.len() as f64;
        for (j, l) in logs {
            let v = l - m;
            out[[i, j]] = v;
            min_nonzero = min_nonzero.min(v);
        }
    }
    let offset = match shift {
        ShiftPolicy::Auto => 1.0 - min_nonzero,
        ShiftPolicy::Fixed(c) => c,
    };
    for (o, &raw) in out.iter_mut().zip(t.values.iter()) {
        if raw > 0.0 {
            *o += offset;
        }
    }
    Ok(TransformedTable {
        values: out,
        transform: Transform::Mclr,
        taxa: t.taxa.clone(),
        samples: t.samples.clone(),
    })
}
