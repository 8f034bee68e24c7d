use std::collections::BTreeMap;

use super::{AttributeTable, Column, ColumnOrigin, ColumnValues, FeatureError};
use crate::geometry::Adjacency;

/// Prefix of neighbor column names.
pub const NEIGHBOR_PREFIX: &str = "nb_";

/// Perimeter-weighted neighbor version of every intrinsic column.
///
/// Numeric columns get the weighted mean over neighbors holding a value;
/// categorical columns get the category with the largest total shared length,
/// ties going to the smallest category name. Polygons without (valued)
/// neighbors get missing values.
pub fn neighbor_attributes(
    table: &AttributeTable,
    adjacency: &Adjacency,
) -> Result<Vec<Column>, FeatureError> {
    if table.is_encoded() {
        return Err(FeatureError::AlreadyEncoded);
    }
    if adjacency.ids.as_slice() != table.ids() {
        return Err(FeatureError::SchemaMismatch(
            "adjacency was computed on a different polygon list".into(),
        ));
    }
    let mut out = Vec::new();
    for col in table
        .columns()
        .iter()
        .filter(|c| c.meta.origin == ColumnOrigin::Intrinsic)
    {
        let values = match &col.values {
            ColumnValues::Numeric(v) => ColumnValues::Numeric(
                adjacency
                    .neighbors
                    .iter()
                    .map(|nbrs| {
                        let (mut num, mut den) = (0.0, 0.0);
                        for n in nbrs {
                            if let Some(x) = v[n.index] {
                                num += n.shared_length * x;
                                den += n.shared_length;
                            }
                        }
                        (den > 0.0).then(|| num / den)
                    })
                    .collect(),
            ),
            ColumnValues::Categorical(v) => ColumnValues::Categorical(
                adjacency
                    .neighbors
                    .iter()
                    .map(|nbrs| {
                        let mut weight: BTreeMap<&str, f64> = BTreeMap::new();
                        for n in nbrs {
                            if let Some(c) = v[n.index].as_deref() {
                                *weight.entry(c).or_default() += n.shared_length;
                            }
                        }
                        let mut best: Option<(&str, f64)> = None;
                        for (c, w) in weight {
                            if best.is_none_or(|(_, bw)| w > bw) {
                                best = Some((c, w));
                            }
                        }
                        best.map(|(c, _)| c.to_string())
                    })
                    .collect(),
            ),
        };
        let mut meta = col.meta.clone();
        meta.name = format!("{NEIGHBOR_PREFIX}{}", meta.name);
        meta.origin = ColumnOrigin::Neighbor;
        out.push(Column { meta, values });
    }
    Ok(out)
}
