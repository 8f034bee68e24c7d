use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{AttributeTable, Column, ColumnMeta, ColumnValues, FeatureError};

/// Category standing in for missing categorical values.
pub const ABSENT: &str = "<absent>";

/// Fitted transform of one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnEncoding {
    pub meta: ColumnMeta,
    /// Ordinal code order for categorical columns (first appearance in training rows).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    pub min: f64,
    pub max: f64,
}

impl ColumnEncoding {
    /// Ordinal code of a category; unseen categories share the code one past
    /// the last training code.
    pub fn code(&self, category: Option<&str>) -> usize {
        let c = category.unwrap_or(ABSENT);
        self.categories
            .iter()
            .position(|x| x == c)
            .unwrap_or(self.categories.len())
    }

    fn scale(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    /// Inverse of the min/max scaling.
    pub fn decode(&self, encoded: f64) -> f64 {
        self.min + encoded * (self.max - self.min)
    }
}

/// Encoder fitted on the training partition only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderState {
    pub columns: Vec<ColumnEncoding>,
}

impl EncoderState {
    pub fn column(&self, name: &str) -> Option<&ColumnEncoding> {
        self.columns.iter().find(|c| c.meta.name == name)
    }
}

/// Fits ordinal codes and min/max ranges on the rows whose id is in `train_ids`.
///
/// Constant columns get `max = min + 1` so they encode to 0.
pub fn fit_encoder(
    table: &AttributeTable,
    train_ids: &[String],
) -> Result<EncoderState, FeatureError> {
    if table.is_encoded() {
        return Err(FeatureError::AlreadyEncoded);
    }
    let train: HashSet<&str> = train_ids.iter().map(String::as_str).collect();
    let known: HashSet<&str> = table.ids().iter().map(String::as_str).collect();
    if let Some(id) = train_ids.iter().find(|id| !known.contains(id.as_str())) {
        return Err(FeatureError::UnknownId(id.clone()));
    }
    let rows: Vec<usize> = (0..table.n_rows())
        .filter(|&i| train.contains(table.ids()[i].as_str()))
        .collect();

    let columns = table
        .columns()
        .iter()
        .map(|col| {
            let (categories, min, max) = match &col.values {
                ColumnValues::Numeric(v) => {
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for x in rows.iter().filter_map(|&i| v[i]) {
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                    if lo > hi {
                        (Vec::new(), 0.0, 1.0)
                    } else {
                        (Vec::new(), lo, hi)
                    }
                }
                ColumnValues::Categorical(v) => {
                    let mut cats: Vec<String> = Vec::new();
                    for &i in &rows {
                        let c = v[i].as_deref().unwrap_or(ABSENT);
                        if !cats.iter().any(|x| x == c) {
                            cats.push(c.to_string());
                        }
                    }
                    let hi = cats.len().saturating_sub(1) as f64;
                    (cats, 0.0, hi)
                }
            };
            let max = if max <= min { min + 1.0 } else { max };
            ColumnEncoding {
                meta: col.meta.clone(),
                categories,
                min,
                max,
            }
        })
        .collect();
    Ok(EncoderState { columns })
}

/// Applies a fitted encoder. Missing numeric values become 0 after scaling,
/// missing categories are encoded as [`ABSENT`]. Values outside the training
/// range scale outside `[0, 1]`.
pub fn apply_encoder(
    table: &AttributeTable,
    state: &EncoderState,
) -> Result<AttributeTable, FeatureError> {
    if table.is_encoded() {
        return Err(FeatureError::AlreadyEncoded);
    }
    if table.columns().len() != state.columns.len() {
        return Err(FeatureError::SchemaMismatch(format!(
            "table has {} columns, encoder expects {}",
            table.columns().len(),
            state.columns.len()
        )));
    }
    let mut out = AttributeTable::new(table.ids().to_vec());
    for (col, enc) in table.columns().iter().zip(&state.columns) {
        if col.meta != enc.meta {
            return Err(FeatureError::SchemaMismatch(format!(
                "column {} does not match encoder column {}",
                col.meta.name, enc.meta.name
            )));
        }
        let values = match &col.values {
            ColumnValues::Numeric(v) => v
                .iter()
                .map(|x| Some(x.map_or(0.0, |x| enc.scale(x))))
                .collect(),
            ColumnValues::Categorical(v) => v
                .iter()
                .map(|c| Some(enc.scale(enc.code(c.as_deref()) as f64)))
                .collect(),
        };
        out.push(Column {
            meta: col.meta.clone(),
            values: ColumnValues::Numeric(values),
        })?;
    }
    out.encoded = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnKind;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    fn numeric_of(t: &AttributeTable, name: &str) -> Vec<f64> {
        match &t.column(name).unwrap().values {
            ColumnValues::Numeric(v) => v.iter().map(|x| x.unwrap()).collect(),
            _ => panic!(),
        }
    }

    #[test]
    fn minmax_from_train_rows_only() {
        let mut t = AttributeTable::new(ids(3));
        t.push(Column::numeric(
            "x",
            "s",
            vec![Some(2.0), Some(4.0), Some(6.0)],
        ))
        .unwrap();
        t.push(Column::numeric(
            "k",
            "s",
            vec![Some(5.0), Some(5.0), Some(9.0)],
        ))
        .unwrap();
        t.push(Column::numeric("m", "s", vec![Some(1.0), None, None]))
            .unwrap();
        let state = fit_encoder(&t, &ids(2)).unwrap();
        let e = apply_encoder(&t, &state).unwrap();
        assert_eq!(numeric_of(&e, "x"), vec![0.0, 1.0, 2.0]);
        assert_eq!(numeric_of(&e, "k"), vec![0.0, 0.0, 4.0]);
        assert_eq!(numeric_of(&e, "m"), vec![0.0, 0.0, 0.0]);
        assert!(e.is_encoded());
    }

    #[test]
    fn categories_by_first_appearance_with_reserved_unseen_code() {
        let mut t = AttributeTable::new(ids(5));
        t.push(Column::categorical(
            "c",
            "s",
            ["B", "A", "B", "C"]
                .iter()
                .map(|s| Some(s.to_string()))
                .chain([None])
                .collect(),
        ))
        .unwrap();
        let state = fit_encoder(&t, &ids(3)).unwrap();
        let enc = state.column("c").unwrap();
        assert_eq!(enc.categories, vec!["B", "A"]);
        assert_eq!(enc.code(Some("C")), 2);
        assert_eq!(enc.code(None), 2);
        let e = apply_encoder(&t, &state).unwrap();
        assert_eq!(numeric_of(&e, "c"), vec![0.0, 1.0, 0.0, 2.0, 2.0]);
        assert_eq!(e.column("c").unwrap().meta.kind, ColumnKind::Categorical);
        assert!(e.to_matrix().is_ok());
    }

    #[test]
    fn absent_is_a_category_when_seen_in_training() {
        let mut t = AttributeTable::new(ids(3));
        t.push(Column::categorical(
            "c",
            "s",
            vec![None, Some("A".into()), Some("Z".into())],
        ))
        .unwrap();
        let state = fit_encoder(&t, &ids(2)).unwrap();
        assert_eq!(state.column("c").unwrap().categories, vec![ABSENT, "A"]);
    }

    #[test]
    fn guards() {
        let mut t = AttributeTable::new(ids(2));
        t.push(Column::numeric("x", "s", vec![Some(1.0), Some(2.0)]))
            .unwrap();
        let state = fit_encoder(&t, &ids(2)).unwrap();
        let e = apply_encoder(&t, &state).unwrap();
        assert_eq!(apply_encoder(&e, &state), Err(FeatureError::AlreadyEncoded));
        assert_eq!(
            fit_encoder(&t, &["nope".to_string()]),
            Err(FeatureError::UnknownId("nope".into()))
        );
        let mut other = AttributeTable::new(ids(2));
        other
            .push(Column::numeric("y", "s", vec![Some(1.0), Some(2.0)]))
            .unwrap();
        assert!(matches!(
            apply_encoder(&other, &state),
            Err(FeatureError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn decode_inverts_scaling() {
        let mut t = AttributeTable::new(ids(3));
        t.push(Column::numeric(
            "x",
            "s",
            vec![Some(-3.5), Some(12.25), Some(1e3)],
        ))
        .unwrap();
        let state = fit_encoder(&t, &ids(3)).unwrap();
        let e = apply_encoder(&t, &state).unwrap();
        let enc = state.column("x").unwrap();
        for (raw, coded) in [-3.5, 12.25, 1e3].iter().zip(numeric_of(&e, "x")) {
            assert!((enc.decode(coded) - raw).abs() <= 1e-9 * raw.abs());
        }
    }
}
