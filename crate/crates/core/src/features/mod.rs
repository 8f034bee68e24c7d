//! Per-polygon attribute tables built from heterogeneous source layers.
//!
//! Every column is owned by exactly one *source*; the source manifest is what
//! single-source ablations, leave-one-source-out runs and per-source models
//! slice on. Intrinsic columns come straight from a layer, neighbor columns
//! are their perimeter-weighted averages over adjacent polygons.

mod aggregate;
mod encoding;
mod neighbors;

pub use aggregate::{aggregate_layer, geometry_columns, table_columns, zonal_stats};
pub use encoding::{apply_encoder, fit_encoder, ColumnEncoding, EncoderState, ABSENT};
pub use neighbors::neighbor_attributes;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ColumnKind, Matrix};
use crate::geometry::{GeometryError, Point, Polygon};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("layer {layer}: unknown category {code:?}")]
    UnknownCategory { layer: String, code: String },
    #[error("layer {layer}: expected a {expected} layer")]
    WrongLayerKind {
        layer: String,
        expected: &'static str,
    },
    #[error("layer {layer}: {message}")]
    InvalidLayer { layer: String, message: String },
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("column {name} has {got} values for {expected} rows")]
    ColumnLength {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("table is already encoded")]
    AlreadyEncoded,
    #[error("table is not encoded")]
    NotEncoded,
    #[error("unknown polygon id {0}")]
    UnknownId(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Where a column's values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnOrigin {
    Intrinsic,
    /// Perimeter-weighted average over adjacent polygons.
    Neighbor,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub source: String,
    pub kind: ColumnKind,
    pub origin: ColumnOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnValues {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub meta: ColumnMeta,
    pub values: ColumnValues,
}

impl Column {
    pub fn numeric(
        name: impl Into<String>,
        source: impl Into<String>,
        values: Vec<Option<f64>>,
    ) -> Self {
        Column {
            meta: ColumnMeta {
                name: name.into(),
                source: source.into(),
                kind: ColumnKind::Numeric,
                origin: ColumnOrigin::Intrinsic,
            },
            values: ColumnValues::Numeric(values),
        }
    }

    pub fn categorical(
        name: impl Into<String>,
        source: impl Into<String>,
        values: Vec<Option<String>>,
    ) -> Self {
        Column {
            meta: ColumnMeta {
                name: name.into(),
                source: source.into(),
                kind: ColumnKind::Categorical,
                origin: ColumnOrigin::Intrinsic,
            },
            values: ColumnValues::Categorical(values),
        }
    }
}

/// One row per polygon, one column per attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeTable {
    ids: Vec<String>,
    columns: Vec<Column>,
    encoded: bool,
}

impl AttributeTable {
    pub fn new(ids: Vec<String>) -> Self {
        AttributeTable {
            ids,
            columns: Vec::new(),
            encoded: false,
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn is_encoded(&self) -> bool {
        self.encoded
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.meta.name == name)
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn push(&mut self, column: Column) -> Result<(), FeatureError> {
        if column.values.len() != self.ids.len() {
            return Err(FeatureError::ColumnLength {
                name: column.meta.name,
                expected: self.ids.len(),
                got: column.values.len(),
            });
        }
        if self.column(&column.meta.name).is_some() {
            return Err(FeatureError::DuplicateColumn(column.meta.name));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn extend(
        &mut self,
        columns: impl IntoIterator<Item = Column>,
    ) -> Result<(), FeatureError> {
        columns.into_iter().try_for_each(|c| self.push(c))
    }

    /// Sources in first-appearance order with their column names.
    pub fn manifest(&self) -> Vec<(String, Vec<String>)> {
        let mut out: Vec<(String, Vec<String>)> = Vec::new();
        for c in &self.columns {
            match out.iter_mut().find(|(s, _)| *s == c.meta.source) {
                Some((_, cols)) => cols.push(c.meta.name.clone()),
                None => out.push((c.meta.source.clone(), vec![c.meta.name.clone()])),
            }
        }
        out
    }

    pub fn sources(&self) -> Vec<String> {
        self.manifest().into_iter().map(|(s, _)| s).collect()
    }

    /// Keeps only the columns accepted by `keep`.
    pub fn filter_columns(&self, keep: impl Fn(&ColumnMeta) -> bool) -> AttributeTable {
        AttributeTable {
            ids: self.ids.clone(),
            columns: self
                .columns
                .iter()
                .filter(|c| keep(&c.meta))
                .cloned()
                .collect(),
            encoded: self.encoded,
        }
    }

    /// Dense matrix of an encoded table.
    pub fn to_matrix(&self) -> Result<Matrix, FeatureError> {
        if !self.encoded {
            return Err(FeatureError::NotEncoded);
        }
        let mut rows = vec![Vec::with_capacity(self.columns.len()); self.ids.len()];
        for c in &self.columns {
            let ColumnValues::Numeric(v) = &c.values else {
                return Err(FeatureError::SchemaMismatch(format!(
                    "{} is not encoded",
                    c.meta.name
                )));
            };
            for (row, x) in rows.iter_mut().zip(v) {
                row.push(x.unwrap_or(0.0));
            }
        }
        Ok(Matrix::new(
            self.columns.iter().map(|c| c.meta.name.clone()).collect(),
            self.columns.iter().map(|c| c.meta.kind).collect(),
            rows,
        ))
    }
}

/// Georeferenced raster band. Row 0 is the northernmost row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub ncols: usize,
    pub nrows: usize,
    pub xllcorner: f64,
    pub yllcorner: f64,
    pub cellsize: f64,
    pub nodata: Option<f64>,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[row * self.ncols + col];
        match self.nodata {
            Some(nd) if v == nd => None,
            _ if v.is_nan() => None,
            _ => Some(v),
        }
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point {
        Point::new(
            self.xllcorner + (col as f64 + 0.5) * self.cellsize,
            self.yllcorner + ((self.nrows - row) as f64 - 0.5) * self.cellsize,
        )
    }

    pub fn same_georeference(&self, o: &Grid) -> bool {
        self.ncols == o.ncols
            && self.nrows == o.nrows
            && self.xllcorner == o.xllcorner
            && self.yllcorner == o.yllcorner
            && self.cellsize == o.cellsize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub grid: Grid,
}

/// A categorical polygon object from a source layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorizedPolygon {
    pub geometry: Polygon,
    pub category: String,
}

/// Per-polygon rows keyed by polygon id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableData {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<String>>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerPayload {
    PolygonCategorical {
        categories: Vec<String>,
        objects: Vec<CategorizedPolygon>,
    },
    PointCategorical {
        categories: Vec<String>,
        points: Vec<(Point, String)>,
    },
    RasterGrid {
        bands: Vec<Band>,
    },
    Table(TableData),
}

impl LayerPayload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerPayload::PolygonCategorical { .. } => "polygon-categorical",
            LayerPayload::PointCategorical { .. } => "point-categorical",
            LayerPayload::RasterGrid { .. } => "raster-grid",
            LayerPayload::Table(_) => "table",
        }
    }
}

/// A source layer. `source` names the manifest group its columns belong to;
/// several layers may share one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceLayer {
    pub name: String,
    pub source: String,
    pub payload: LayerPayload,
    /// For tables: column name → source, overriding `source`.
    #[serde(default)]
    pub column_sources: Vec<(String, String)>,
}

impl SourceLayer {
    pub fn new(name: impl Into<String>, source: impl Into<String>, payload: LayerPayload) -> Self {
        SourceLayer {
            name: name.into(),
            source: source.into(),
            payload,
            column_sources: Vec::new(),
        }
    }

    /// Checks that every object carries a declared category.
    pub fn validate(&self) -> Result<(), FeatureError> {
        let check = |cats: &[String], code: &str| {
            if cats.iter().any(|c| c == code) {
                Ok(())
            } else {
                Err(FeatureError::UnknownCategory {
                    layer: self.name.clone(),
                    code: code.to_string(),
                })
            }
        };
        match &self.payload {
            LayerPayload::PolygonCategorical {
                categories,
                objects,
            } => objects
                .iter()
                .try_for_each(|o| check(categories, &o.category)),
            LayerPayload::PointCategorical { categories, points } => {
                points.iter().try_for_each(|(_, c)| check(categories, c))
            }
            LayerPayload::RasterGrid { bands } => {
                let Some(first) = bands.first() else {
                    return Err(FeatureError::InvalidLayer {
                        layer: self.name.clone(),
                        message: "no bands".into(),
                    });
                };
                for b in bands {
                    let g = &b.grid;
                    if g.values.len() != g.ncols * g.nrows || g.cellsize <= 0.0 {
                        return Err(FeatureError::InvalidLayer {
                            layer: self.name.clone(),
                            message: format!("band {} is not a rectangular grid", b.name),
                        });
                    }
                    if !g.same_georeference(&first.grid) {
                        return Err(FeatureError::InvalidLayer {
                            layer: self.name.clone(),
                            message: format!(
                                "band {} is not aligned with band {}",
                                b.name, first.name
                            ),
                        });
                    }
                }
                Ok(())
            }
            LayerPayload::Table(t) => {
                for (id, row) in &t.rows {
                    if row.len() != t.columns.len() {
                        return Err(FeatureError::InvalidLayer {
                            layer: self.name.clone(),
                            message: format!(
                                "row {id} has {} values for {} columns",
                                row.len(),
                                t.columns.len()
                            ),
                        });
                    }
                }
                Ok(())
            }
        }
    }
}

/// Builds intrinsic and neighbor attributes for `polygons` from every layer.
pub fn build_attribute_table(
    polygons: &[Polygon],
    layers: &[SourceLayer],
    geometry_source: Option<&str>,
    with_neighbors: bool,
    tol: &crate::geometry::Tolerance,
) -> Result<AttributeTable, FeatureError> {
    let mut table = AttributeTable::new(polygons.iter().map(|p| p.id().to_string()).collect());
    if let Some(source) = geometry_source {
        table.extend(geometry_columns(polygons, source)?)?;
    }
    for layer in layers {
        layer.validate()?;
        let cols = match &layer.payload {
            LayerPayload::PolygonCategorical { .. } | LayerPayload::PointCategorical { .. } => {
                aggregate_layer(polygons, layer, tol)?
            }
            LayerPayload::RasterGrid { .. } => zonal_stats(polygons, layer)?,
            LayerPayload::Table(_) => table_columns(polygons, layer)?,
        };
        table.extend(cols)?;
    }
    if with_neighbors {
        let adjacency = crate::geometry::adjacency_weights(polygons, tol);
        let nb = neighbor_attributes(&table, &adjacency)?;
        table.extend(nb)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_partitions_columns() {
        let mut t = AttributeTable::new(vec!["a".into(), "b".into()]);
        t.push(Column::numeric("x", "s1", vec![Some(1.0), None]))
            .unwrap();
        t.push(Column::categorical("y", "s2", vec![None, Some("k".into())]))
            .unwrap();
        t.push(Column::numeric("z", "s1", vec![Some(1.0), Some(2.0)]))
            .unwrap();
        assert_eq!(
            t.manifest(),
            vec![
                ("s1".to_string(), vec!["x".to_string(), "z".to_string()]),
                ("s2".to_string(), vec!["y".to_string()])
            ]
        );
        assert!(matches!(
            t.push(Column::numeric("x", "s3", vec![None, None])),
            Err(FeatureError::DuplicateColumn(_))
        ));
        assert!(matches!(
            t.push(Column::numeric("w", "s3", vec![None])),
            Err(FeatureError::ColumnLength { .. })
        ));
        assert_eq!(t.to_matrix(), Err(FeatureError::NotEncoded));
    }

    #[test]
    fn unknown_category_names_layer_and_code() {
        let p = Polygon::from_coords("o", &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]).unwrap();
        let layer = SourceLayer::new(
            "buildings",
            "topo",
            LayerPayload::PolygonCategorical {
                categories: vec!["residential".into()],
                objects: vec![CategorizedPolygon {
                    geometry: p,
                    category: "farm".into(),
                }],
            },
        );
        assert_eq!(
            layer.validate(),
            Err(FeatureError::UnknownCategory {
                layer: "buildings".into(),
                code: "farm".into()
            })
        );
    }
}
