//! CSV ingestion: a static per-patient table plus an optional long-format
//! time-series file whose variables are aggregated into windowed
//! statistics. Rows with any missing feature are dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::data::aggregate::aggregate_series;
use crate::data::dataset::{Dataset, SplitColumn};
use crate::data::schema::{FeatureDescriptor, Schema, Statistic, Window};
use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// How to read one tabular source.
#[derive(Debug, Clone)]
pub struct TabularSource {
    pub static_csv: std::path::PathBuf,
    /// Long format: patient id, variable, time offset, value.
    pub timeseries_csv: Option<std::path::PathBuf>,
    pub id_column: String,
    pub label_column: String,
    /// Static columns to treat as categorical features.
    pub categorical: Vec<String>,
    /// Static columns retained for split predicates only (not features).
    pub split_only: Vec<String>,
    /// Keep observations with time offset <= cutoff (e.g. first 48 hours).
    pub time_cutoff: Option<f64>,
}

fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Error::invalid(format!("bad header in {}: {e}", path.display())))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::invalid(format!("bad row in {}: {e}", path.display())))?;
        rows.push(rec.iter().map(|s| s.trim().to_string()).collect());
    }
    Ok((header, rows))
}

fn parse_num(s: &str) -> Option<f64> {
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Load and assemble a dataset. Time-series variables are aggregated into
/// 42 features each (sorted variable order); static feature columns follow
/// in header order.
pub fn load_tabular(source: &TabularSource) -> Result<Dataset> {
    let (header, rows) = read_csv_rows(&source.static_csv)?;
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("static csv has no column {name}")))
    };
    let id_idx = col(&source.id_column)?;
    let label_idx = col(&source.label_column)?;
    let split_idx: Vec<(String, usize)> = source
        .split_only
        .iter()
        .map(|n| col(n).map(|i| (n.clone(), i)))
        .collect::<Result<_>>()?;
    let feature_cols: Vec<(String, usize)> = header
        .iter()
        .enumerate()
        .filter(|(i, h)| {
            *i != id_idx
                && *i != label_idx
                && !source.split_only.iter().any(|s| s == *h)
        })
        .map(|(i, h)| (h.clone(), i))
        .collect();

    // time series: patient -> variable -> (time, value)
    let mut series: BTreeMap<String, BTreeMap<String, Vec<(f64, f64)>>> = BTreeMap::new();
    let mut variables: BTreeSet<String> = BTreeSet::new();
    if let Some(ts_path) = &source.timeseries_csv {
        let (ts_header, ts_rows) = read_csv_rows(ts_path)?;
        if ts_header.len() < 4 {
            return Err(Error::invalid(
                "time-series csv needs columns: patient id, variable, time, value",
            ));
        }
        for row in ts_rows {
            let (pid, var) = (&row[0], &row[1]);
            let (Some(time), Some(value)) = (parse_num(&row[2]), parse_num(&row[3])) else {
                continue;
            };
            if let Some(cutoff) = source.time_cutoff {
                if time > cutoff {
                    continue;
                }
            }
            variables.insert(var.clone());
            series
                .entry(pid.clone())
                .or_default()
                .entry(var.clone())
                .or_default()
                .push((time, value));
        }
    }

    // category vocabularies from the full file, sorted for determinism
    let mut vocab: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for name in &source.categorical {
        let idx = col(name)?;
        let mut cats: BTreeSet<String> = BTreeSet::new();
        for row in &rows {
            if !row[idx].is_empty() {
                cats.insert(row[idx].clone());
            }
        }
        vocab.insert(name.clone(), cats.into_iter().collect());
    }

    let mut descriptors: Vec<FeatureDescriptor> = Vec::new();
    for var in &variables {
        for window in Window::ALL {
            for stat in Statistic::ALL {
                descriptors.push(FeatureDescriptor::aggregate(var, window, stat));
            }
        }
    }
    for (name, _) in &feature_cols {
        if let Some(cats) = vocab.get(name) {
            descriptors.push(FeatureDescriptor::categorical(name, cats.clone()));
        } else {
            descriptors.push(FeatureDescriptor::numeric(name));
        }
    }
    let schema = Schema::new(descriptors)?;
    let d = schema.width();

    let mut data: Vec<f64> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut split_vals: BTreeMap<String, Vec<String>> =
        split_idx.iter().map(|(n, _)| (n.clone(), vec![])).collect();

    'rows: for row in &rows {
        let pid = &row[id_idx];
        let label = match parse_num(&row[label_idx]) {
            Some(v) if v == 0.0 || v == 1.0 => v as u8,
            _ => continue,
        };
        let mut feat_row: Vec<f64> = Vec::with_capacity(d);
        // aggregates first
        for var in &variables {
            let Some(obs) = series.get(pid).and_then(|m| m.get(var)) else {
                continue 'rows; // variable never recorded: drop patient
            };
            let mut obs = obs.clone();
            obs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let values: Vec<f64> = obs.iter().map(|(_, v)| *v).collect();
            match aggregate_series(&values) {
                Some(feats) => feat_row.extend(feats),
                None => continue 'rows,
            }
        }
        // static features
        for (name, idx) in &feature_cols {
            if let Some(cats) = vocab.get(name) {
                match cats.iter().position(|c| c == &row[*idx]) {
                    Some(code) => feat_row.push(code as f64),
                    None => continue 'rows,
                }
            } else {
                match parse_num(&row[*idx]) {
                    Some(v) => feat_row.push(v),
                    None => continue 'rows,
                }
            }
        }
        debug_assert_eq!(feat_row.len(), d);
        data.extend_from_slice(&feat_row);
        labels.push(label);
        for (name, idx) in &split_idx {
            split_vals.get_mut(name).unwrap().push(row[*idx].clone());
        }
    }

    let n = labels.len();
    if n == 0 {
        return Err(Error::invalid(
            "no usable rows after dropping missing values",
        ));
    }
    let mut ds = Dataset::new(schema, Tensor::new(vec![n, d], data), labels)?;
    for (name, vals) in split_vals {
        let numeric: Option<Vec<f64>> = vals.iter().map(|s| parse_num(s)).collect();
        let colv = match numeric {
            Some(v) => SplitColumn::Numeric(v),
            None => SplitColumn::Categorical(vals),
        };
        ds = ds.with_split_column(&name, colv)?;
    }
    Ok(ds)
}
