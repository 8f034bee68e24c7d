use rayon::prelude::*;

use super::{Column, FeatureError, LayerPayload, SourceLayer};
use crate::geometry::{
    contains_point_with, intersection_area_with, shape_descriptors, BoundingBox, Polygon,
    ShapeDescriptors, SpatialIndex, Tolerance, SIGNATURE_SAMPLES,
};

/// Category areas, counts and majority for polygon layers; category counts
/// for point layers.
///
/// An object overlapping several polygons is counted once in each, with the
/// locally intersected area.
pub fn aggregate_layer(
    polygons: &[Polygon],
    layer: &SourceLayer,
    tol: &Tolerance,
) -> Result<Vec<Column>, FeatureError> {
    layer.validate()?;
    let prefix = &layer.name;
    match &layer.payload {
        LayerPayload::PolygonCategorical {
            categories,
            objects,
        } => {
            let boxes: Vec<BoundingBox> = objects.iter().map(|o| o.geometry.bbox()).collect();
            let index = SpatialIndex::new(boxes);
            let code: Vec<usize> = objects
                .iter()
                .map(|o| {
                    categories
                        .iter()
                        .position(|c| *c == o.category)
                        .expect("validated")
                })
                .collect();
            let per_polygon: Vec<(Vec<f64>, Vec<f64>)> = polygons
                .par_iter()
                .map(|p| {
                    let mut area = vec![0.0; categories.len()];
                    let mut count = vec![0.0; categories.len()];
                    for j in index.query(&p.bbox(), tol.length) {
                        let a = intersection_area_with(p, &objects[j].geometry, tol);
                        if a > tol.area {
                            area[code[j]] += a;
                            count[code[j]] += 1.0;
                        }
                    }
                    (area, count)
                })
                .collect();
            let mut cols = Vec::with_capacity(2 * categories.len() + 1);
            for (k, cat) in categories.iter().enumerate() {
                cols.push(Column::numeric(
                    format!("{prefix}_{cat}_area"),
                    &layer.source,
                    per_polygon.iter().map(|(a, _)| Some(a[k])).collect(),
                ));
                cols.push(Column::numeric(
                    format!("{prefix}_{cat}_count"),
                    &layer.source,
                    per_polygon.iter().map(|(_, c)| Some(c[k])).collect(),
                ));
            }
            let majority = per_polygon
                .iter()
                .map(|(area, _)| {
                    let mut best: Option<usize> = None;
                    for (k, &a) in area.iter().enumerate() {
                        if a > 0.0 && best.is_none_or(|b| a > area[b]) {
                            best = Some(k);
                        }
                    }
                    best.map(|k| categories[k].clone())
                })
                .collect();
            cols.push(Column::categorical(
                format!("{prefix}_majority"),
                &layer.source,
                majority,
            ));
            Ok(cols)
        }
        LayerPayload::PointCategorical { categories, points } => {
            let boxes: Vec<BoundingBox> = points
                .iter()
                .map(|(p, _)| BoundingBox { min: *p, max: *p })
                .collect();
            let index = SpatialIndex::new(boxes);
            let code: Vec<usize> = points
                .iter()
                .map(|(_, c)| categories.iter().position(|x| x == c).expect("validated"))
                .collect();
            let counts: Vec<Vec<f64>> = polygons
                .par_iter()
                .map(|p| {
                    let mut count = vec![0.0; categories.len()];
                    for j in index.query(&p.bbox(), tol.length) {
                        if contains_point_with(p, points[j].0, tol) {
                            count[code[j]] += 1.0;
                        }
                    }
                    count
                })
                .collect();
            Ok(categories
                .iter()
                .enumerate()
                .map(|(k, cat)| {
                    Column::numeric(
                        format!("{prefix}_{cat}_count"),
                        &layer.source,
                        counts.iter().map(|c| Some(c[k])).collect(),
                    )
                })
                .collect())
        }
        _ => Err(FeatureError::WrongLayerKind {
            layer: layer.name.clone(),
            expected: "polygon or point categorical",
        }),
    }
}

/// Per band mean and population standard deviation over the cells whose
/// centers fall inside each polygon. Polygons covering no valid cell center
/// get missing values.
pub fn zonal_stats(polygons: &[Polygon], layer: &SourceLayer) -> Result<Vec<Column>, FeatureError> {
    layer.validate()?;
    let LayerPayload::RasterGrid { bands } = &layer.payload else {
        return Err(FeatureError::WrongLayerKind {
            layer: layer.name.clone(),
            expected: "raster-grid",
        });
    };
    let grid = &bands[0].grid;
    let tol = Tolerance::default();
    let cells: Vec<Vec<(usize, usize)>> = polygons
        .par_iter()
        .map(|p| {
            let b = p.bbox();
            let col_of = |x: f64| ((x - grid.xllcorner) / grid.cellsize - 0.5).ceil();
            let row_of = |y: f64| grid.nrows as f64 - ((y - grid.yllcorner) / grid.cellsize + 0.5);
            let c0 = col_of(b.min.x).max(0.0) as usize;
            let c1 = (col_of(b.max.x) + 1.0).clamp(0.0, grid.ncols as f64) as usize;
            let r0 = row_of(b.max.y).ceil().max(0.0) as usize;
            let r1 = (row_of(b.min.y).floor() + 1.0).clamp(0.0, grid.nrows as f64) as usize;
            let mut inside = Vec::new();
            for r in r0..r1 {
                for c in c0..c1 {
                    if contains_point_with(p, grid.cell_center(r, c), &tol) {
                        inside.push((r, c));
                    }
                }
            }
            inside
        })
        .collect();
    let empty = cells.iter().filter(|c| c.is_empty()).count();
    if empty > 0 {
        log::warn!(
            "layer {}: {empty} polygons cover no cell center",
            layer.name
        );
    }
    let mut cols = Vec::with_capacity(2 * bands.len());
    for band in bands {
        let (mut means, mut stds) = (
            Vec::with_capacity(polygons.len()),
            Vec::with_capacity(polygons.len()),
        );
        for inside in &cells {
            let vals: Vec<f64> = inside
                .iter()
                .filter_map(|&(r, c)| band.grid.value(r, c))
                .collect();
            if vals.is_empty() {
                means.push(None);
                stds.push(None);
                continue;
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            means.push(Some(mean));
            stds.push(Some(var.sqrt()));
        }
        cols.push(Column::numeric(
            format!("{}_{}_mean", layer.name, band.name),
            &layer.source,
            means,
        ));
        cols.push(Column::numeric(
            format!("{}_{}_std", layer.name, band.name),
            &layer.source,
            stds,
        ));
    }
    Ok(cols)
}

/// Shape descriptors of each polygon: surface, convexity, compactness,
/// elongation, hole count and the 20-sample signature.
pub fn geometry_columns(polygons: &[Polygon], source: &str) -> Result<Vec<Column>, FeatureError> {
    let descriptors: Vec<Vec<f64>> = polygons
        .par_iter()
        .map(|p| shape_descriptors(p).map(|d| d.to_vec()))
        .collect::<Result<_, _>>()?;
    Ok(ShapeDescriptors::attribute_names(SIGNATURE_SAMPLES)
        .into_iter()
        .enumerate()
        .map(|(k, name)| {
            Column::numeric(
                name,
                source,
                descriptors.iter().map(|d| Some(d[k])).collect(),
            )
        })
        .collect())
}

/// Joins a per-polygon table on polygon id. A column whose present values all
/// parse as numbers is numeric, otherwise categorical. Polygons without a row
/// get missing values.
pub fn table_columns(
    polygons: &[Polygon],
    layer: &SourceLayer,
) -> Result<Vec<Column>, FeatureError> {
    layer.validate()?;
    let LayerPayload::Table(t) = &layer.payload else {
        return Err(FeatureError::WrongLayerKind {
            layer: layer.name.clone(),
            expected: "table",
        });
    };
    let mut by_id = std::collections::HashMap::with_capacity(t.rows.len());
    for (i, (id, _)) in t.rows.iter().enumerate() {
        if by_id.insert(id.as_str(), i).is_some() {
            return Err(FeatureError::InvalidLayer {
                layer: layer.name.clone(),
                message: format!("duplicate row {id}"),
            });
        }
    }
    let known: std::collections::HashSet<&str> = polygons.iter().map(Polygon::id).collect();
    if let Some((id, _)) = t.rows.iter().find(|(id, _)| !known.contains(id.as_str())) {
        return Err(FeatureError::UnknownId(id.clone()));
    }
    let mut cols = Vec::with_capacity(t.columns.len());
    for (k, name) in t.columns.iter().enumerate() {
        let raw: Vec<Option<&str>> = polygons
            .iter()
            .map(|p| {
                by_id
                    .get(p.id())
                    .and_then(|&i| t.rows[i].1[k].as_deref())
                    .filter(|s| !s.trim().is_empty())
            })
            .collect();
        let source = layer
            .column_sources
            .iter()
            .find(|(c, _)| c == name)
            .map_or(layer.source.as_str(), |(_, s)| s.as_str());
        let numeric = raw
            .iter()
            .flatten()
            .all(|s| s.trim().parse::<f64>().is_ok());
        cols.push(if numeric {
            Column::numeric(
                name,
                source,
                raw.iter()
                    .map(|v| v.map(|s| s.trim().parse().unwrap()))
                    .collect(),
            )
        } else {
            Column::categorical(
                name,
                source,
                raw.iter().map(|v| v.map(str::to_string)).collect(),
            )
        });
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Band, CategorizedPolygon, ColumnValues, Grid, TableData};

    fn rect(id: &str, x0: f64, y0: f64, w: f64, h: f64) -> Polygon {
        Polygon::from_coords(
            id,
            &[(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)],
        )
        .unwrap()
    }

    fn num<'a>(cols: &'a [Column], name: &str) -> &'a [Option<f64>] {
        match &cols.iter().find(|c| c.meta.name == name).unwrap().values {
            ColumnValues::Numeric(v) => v,
            _ => panic!("{name} not numeric"),
        }
    }

    fn cat<'a>(cols: &'a [Column], name: &str) -> &'a [Option<String>] {
        match &cols.iter().find(|c| c.meta.name == name).unwrap().values {
            ColumnValues::Categorical(v) => v,
            _ => panic!("{name} not categorical"),
        }
    }

    #[test]
    fn straddling_building_counts_in_both() {
        let polys = vec![
            rect("P", 0.0, 0.0, 10.0, 10.0),
            rect("Q", 10.0, 0.0, 10.0, 10.0),
        ];
        let layer = SourceLayer::new(
            "bldg",
            "topo",
            LayerPayload::PolygonCategorical {
                categories: vec!["residential".into(), "industrial".into()],
                objects: vec![
                    CategorizedPolygon {
                        geometry: rect("b1", 2.0, 2.0, 2.0, 1.0),
                        category: "residential".into(),
                    },
                    CategorizedPolygon {
                        geometry: rect("b2", 8.8, 5.0, 2.0, 1.0),
                        category: "industrial".into(),
                    },
                ],
            },
        );
        let cols = aggregate_layer(&polys, &layer, &Tolerance::default()).unwrap();
        assert_eq!(num(&cols, "bldg_residential_area"), &[Some(2.0), Some(0.0)]);
        assert_eq!(
            num(&cols, "bldg_residential_count"),
            &[Some(1.0), Some(0.0)]
        );
        let ind = num(&cols, "bldg_industrial_area");
        assert!((ind[0].unwrap() - 1.2).abs() < 1e-9 && (ind[1].unwrap() - 0.8).abs() < 1e-9);
        assert_eq!(num(&cols, "bldg_industrial_count"), &[Some(1.0), Some(1.0)]);
        assert_eq!(
            cat(&cols, "bldg_majority"),
            &[Some("residential".into()), Some("industrial".into())]
        );
        assert!(cols.iter().all(|c| c.meta.source == "topo"));
    }

    #[test]
    fn majority_land_cover() {
        let polys = vec![rect("P", 0.0, 0.0, 10.0, 10.0)];
        let layer = SourceLayer::new(
            "lc",
            "lc",
            LayerPayload::PolygonCategorical {
                categories: vec!["A".into(), "B".into()],
                objects: vec![
                    CategorizedPolygon {
                        geometry: rect("a", 0.0, 0.0, 6.0, 10.0),
                        category: "A".into(),
                    },
                    CategorizedPolygon {
                        geometry: rect("b", 6.0, 0.0, 4.0, 10.0),
                        category: "B".into(),
                    },
                ],
            },
        );
        let cols = aggregate_layer(&polys, &layer, &Tolerance::default()).unwrap();
        assert_eq!(cat(&cols, "lc_majority"), &[Some("A".into())]);
    }

    #[test]
    fn points_are_counted_per_category() {
        let polys = vec![rect("P", 0.0, 0.0, 1.0, 1.0), rect("Q", 1.0, 0.0, 1.0, 1.0)];
        let layer = SourceLayer::new(
            "poi",
            "other",
            LayerPayload::PointCategorical {
                categories: vec!["shop".into()],
                points: vec![
                    ((0.5, 0.5).into(), "shop".into()),
                    ((1.5, 0.5).into(), "shop".into()),
                    ((0.2, 0.2).into(), "shop".into()),
                ],
            },
        );
        let cols = aggregate_layer(&polys, &layer, &Tolerance::default()).unwrap();
        assert_eq!(num(&cols, "poi_shop_count"), &[Some(2.0), Some(1.0)]);
    }

    fn grid(values: Vec<f64>, ncols: usize, nrows: usize) -> Grid {
        Grid {
            ncols,
            nrows,
            xllcorner: 0.0,
            yllcorner: 0.0,
            cellsize: 1.0,
            nodata: Some(-9999.0),
            values,
        }
    }

    #[test]
    fn zonal_closed_forms() {
        let layer = SourceLayer::new(
            "img",
            "radiometry",
            LayerPayload::RasterGrid {
                bands: vec![
                    Band {
                        name: "const".into(),
                        grid: grid(vec![7.0; 16], 4, 4),
                    },
                    Band {
                        name: "var".into(),
                        grid: grid(
                            (0..16)
                                .map(|i| if i % 4 == 0 { 1.0 } else { 3.0 })
                                .collect(),
                            4,
                            4,
                        ),
                    },
                ],
            },
        );
        // covers the centers of the two top-left cells (row 0, cols 0 and 1)
        let polys = vec![
            rect("P", 0.0, 3.0, 2.0, 1.0),
            rect("out", 10.0, 10.0, 1.0, 1.0),
        ];
        let cols = zonal_stats(&polys, &layer).unwrap();
        assert_eq!(num(&cols, "img_const_mean"), &[Some(7.0), None]);
        assert_eq!(num(&cols, "img_const_std"), &[Some(0.0), None]);
        assert_eq!(num(&cols, "img_var_mean"), &[Some(2.0), None]);
        assert_eq!(num(&cols, "img_var_std"), &[Some(1.0), None]);
    }

    #[test]
    fn table_join_and_typing() {
        let polys = vec![rect("P", 0.0, 0.0, 1.0, 1.0), rect("Q", 1.0, 0.0, 1.0, 1.0)];
        let mut layer = SourceLayer::new(
            "insee",
            "demography",
            LayerPayload::Table(TableData {
                columns: vec!["population".into(), "iris_type".into()],
                rows: vec![("Q".into(), vec![Some("120".into()), Some("housing".into())])],
            }),
        );
        layer
            .column_sources
            .push(("iris_type".into(), "zoning".into()));
        let cols = table_columns(&polys, &layer).unwrap();
        assert_eq!(num(&cols, "population"), &[None, Some(120.0)]);
        assert_eq!(cat(&cols, "iris_type"), &[None, Some("housing".into())]);
        assert_eq!(cols[1].meta.source, "zoning");
    }
}
