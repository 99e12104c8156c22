//! ID/OOD split construction: near (predicate on a retained variable),
//! far (cross-dataset on shared features), and synthesized (single-feature
//! scaling).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::dataset::{Dataset, SplitColumn};
use crate::data::schema::{FeatureKind, Provenance, Schema};
use crate::error::{Error, Result};

/// Predicate over one split variable; rows satisfying it become ID.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    /// Numeric column strictly greater than a threshold (e.g. age > 70).
    GreaterThan { column: String, threshold: f64 },
    /// Categorical column equal to one of the listed values
    /// (e.g. ethnicity in {Caucasian, African American}).
    In { column: String, values: Vec<String> },
}

impl Predicate {
    pub fn column(&self) -> &str {
        match self {
            Predicate::GreaterThan { column, .. } => column,
            Predicate::In { column, .. } => column,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Predicate::GreaterThan { column, threshold } => format!("{column}>{threshold}"),
            Predicate::In { column, values } => format!("{column}in[{}]", values.join("|")),
        }
    }

    fn eval(&self, ds: &Dataset, row: usize) -> Result<bool> {
        match self {
            Predicate::GreaterThan { column, threshold } => {
                if let Some(SplitColumn::Numeric(v)) = ds.split_columns.get(column) {
                    return Ok(v[row] > *threshold);
                }
                if let Some(j) = ds.schema.index_of(column) {
                    if ds.schema.features[j].kind.is_numeric() {
                        return Ok(ds.features.get2(row, j) > *threshold);
                    }
                    return Err(Error::invalid(format!(
                        "predicate column {column} is categorical, expected numeric"
                    )));
                }
                Err(Error::invalid(format!("no column named {column}")))
            }
            Predicate::In { column, values } => {
                if let Some(SplitColumn::Categorical(v)) = ds.split_columns.get(column) {
                    return Ok(values.iter().any(|c| c == &v[row]));
                }
                if let Some(j) = ds.schema.index_of(column) {
                    if let Some(cat) = ds.category_of(row, j) {
                        return Ok(values.iter().any(|c| c == cat));
                    }
                    return Err(Error::invalid(format!(
                        "predicate column {column} is numeric, expected categorical"
                    )));
                }
                Err(Error::invalid(format!("no column named {column}")))
            }
        }
    }
}

/// Partition into (ID, OOD) by predicate. The split variable is removed
/// from the feature matrix of both sides when it was a feature.
pub fn near_ood_split(ds: &Dataset, predicate: &Predicate) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    let mut id_rows = Vec::new();
    let mut ood_rows = Vec::new();
    for i in 0..n {
        if predicate.eval(ds, i)? {
            id_rows.push(i);
        } else {
            ood_rows.push(i);
        }
    }
    if id_rows.is_empty() || ood_rows.is_empty() {
        return Err(Error::DegenerateSplit(format!(
            "predicate {} leaves an empty side ({} ID, {} OOD)",
            predicate.describe(),
            id_rows.len(),
            ood_rows.len()
        )));
    }
    let base = if ds.schema.index_of(predicate.column()).is_some() {
        ds.drop_feature(predicate.column())?
    } else {
        ds.clone()
    };
    Ok((base.select_rows(&id_rows), base.select_rows(&ood_rows)))
}

/// Built-in variable-name correspondence between dataset vocabularies
/// (clinical variables recorded under different names). Extend per run
/// with [`far_ood_align_with`].
pub fn builtin_aliases() -> Vec<(String, String)> {
    [
        ("Temperature (c)", "Temperature"),
        ("Respiratory Rate", "Respiratory rate"),
        ("O2 Saturation", "Oxygen saturation"),
        ("MAP (mmHg)", "Mean blood pressure"),
        ("glucose", "Glucose"),
        ("Invasive BP Diastolic", "Diastolic blood pressure"),
        ("Invasive BP Systolic", "Systolic blood pressure"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Canonical key of a variable name under an alias table: aliased pairs
/// share a key; otherwise the normalized name is the key.
fn canonical(name: &str, aliases: &[(String, String)]) -> String {
    let norm = normalize(name);
    for (a, b) in aliases {
        if normalize(a) == norm || normalize(b) == norm {
            return normalize(a);
        }
    }
    norm
}

fn feature_key(f: &crate::data::schema::FeatureDescriptor, aliases: &[(String, String)]) -> String {
    match &f.provenance {
        Provenance::Static => canonical(&f.name, aliases),
        Provenance::TimeAggregate {
            variable,
            window,
            statistic,
        } => format!(
            "{}|{}|{}",
            canonical(variable, aliases),
            window.label(),
            statistic.label()
        ),
    }
}

/// Restrict two datasets to their shared features (by canonical variable
/// mapping), identically ordered; categorical category sets are unioned.
pub fn far_ood_align(a: &Dataset, b: &Dataset) -> Result<(Dataset, Dataset)> {
    far_ood_align_with(a, b, &builtin_aliases())
}

pub fn far_ood_align_with(
    a: &Dataset,
    b: &Dataset,
    aliases: &[(String, String)],
) -> Result<(Dataset, Dataset)> {
    let b_by_key: BTreeMap<String, usize> = b
        .schema
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| (feature_key(f, aliases), i))
        .collect();

    let mut a_idx = Vec::new();
    let mut b_idx = Vec::new();
    let mut shared = Vec::new();
    for (i, fa) in a.schema.features.iter().enumerate() {
        let key = feature_key(fa, aliases);
        if let Some(&j) = b_by_key.get(&key) {
            let fb = &b.schema.features[j];
            if fa.kind.is_numeric() != fb.kind.is_numeric() {
                continue;
            }
            a_idx.push(i);
            b_idx.push(j);
            shared.push(fa.clone());
        }
    }
    if shared.is_empty() {
        return Err(Error::invalid(
            "datasets share no features under the alias mapping",
        ));
    }

    let mut a_out = a.project(&a_idx, Schema::new(shared.clone())?);
    let mut b_out = b.project(&b_idx, Schema::new(shared)?);

    // union category vocabularies and remap codes on both sides
    for (pos, (&ai, &bi)) in a_idx.iter().zip(&b_idx).enumerate() {
        let (a_cats, b_cats) = match (
            &a.schema.features[ai].kind,
            &b.schema.features[bi].kind,
        ) {
            (
                FeatureKind::Categorical { categories: ca },
                FeatureKind::Categorical { categories: cb },
            ) => (ca.clone(), cb.clone()),
            _ => continue,
        };
        let mut union = a_cats.clone();
        for c in &b_cats {
            if !union.contains(c) {
                union.push(c.clone());
            }
        }
        let remap = |codes_from: &[String], ds: &mut Dataset| {
            let n = ds.n_rows();
            for r in 0..n {
                let old = ds.features.get2(r, pos) as usize;
                let cat = &codes_from[old];
                let new = union.iter().position(|c| c == cat).unwrap();
                ds.features.set2(r, pos, new as f64);
            }
        };
        remap(&a_cats, &mut a_out);
        remap(&b_cats, &mut b_out);
        let kind = FeatureKind::Categorical {
            categories: union.clone(),
        };
        a_out.schema.features[pos].kind = kind.clone();
        b_out.schema.features[pos].kind = kind;
    }
    Ok((a_out, b_out))
}

/// Copy of `id_test` with one numeric feature column scaled by `factor`.
pub fn synthesize_ood(id_test: &Dataset, feature_index: usize, factor: f64) -> Result<Dataset> {
    if feature_index >= id_test.n_features() {
        return Err(Error::invalid(format!(
            "feature index {feature_index} out of range"
        )));
    }
    if !id_test.schema.features[feature_index].kind.is_numeric() {
        return Err(Error::invalid(format!(
            "feature {} is categorical; synthesized corruption needs a numeric feature",
            id_test.schema.features[feature_index].name
        )));
    }
    if !(factor > 0.0) {
        return Err(Error::invalid(format!(
            "scaling factor must be positive, got {factor}"
        )));
    }
    let mut out = id_test.clone();
    let n = out.n_rows();
    for i in 0..n {
        let v = out.features.get2(i, feature_index) * factor;
        out.features.set2(i, feature_index, v);
    }
    Ok(out)
}

/// Deterministic feature sample for the synthesized protocol: `count`
/// numeric features drawn without replacement when possible, cycling
/// through the numeric features otherwise.
pub fn sample_corruption_features(
    ds: &Dataset,
    count: usize,
    rng: &mut crate::rng::SeededRng,
) -> Vec<usize> {
    let numeric = ds.schema.numeric_indices();
    if numeric.is_empty() || count == 0 {
        return vec![];
    }
    if numeric.len() >= count {
        let order = crate::rng::shuffled_indices(rng, numeric.len());
        order[..count].iter().map(|&i| numeric[i]).collect()
    } else {
        (0..count).map(|i| numeric[i % numeric.len()]).collect()
    }
}
