//! File formats: GeoJSON polygon and categorical layers, ESRI ASCII grids,
//! CSV attribute tables and the column-to-source manifest.

use std::fs;
use std::path::{Path, PathBuf};

use geojson::{Feature, FeatureCollection, GeoJson, Geometry, JsonObject, JsonValue, Value};

use super::config::{BandFile, LayerConfig, LayerKind};
use super::PipelineError;
use crate::features::{Band, CategorizedPolygon, Grid, LayerPayload, SourceLayer, TableData};
use crate::geometry::{Point, Polygon, Tolerance};

/// Labeled polygons plus every source layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub polygons: Vec<Polygon>,
    pub layers: Vec<SourceLayer>,
}

fn input_err(path: &Path, message: impl Into<String>) -> PipelineError {
    PipelineError::Input {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| input_err(path, e.to_string()))
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|e| input_err(path, e.to_string()))
}

fn features_of(path: &Path) -> Result<Vec<Feature>, PipelineError> {
    let gj: GeoJson = read(path)?
        .parse()
        .map_err(|e: geojson::Error| input_err(path, e.to_string()))?;
    match gj {
        GeoJson::FeatureCollection(fc) => Ok(fc.features),
        _ => Err(input_err(path, "expected a FeatureCollection")),
    }
}

fn property_string(f: &Feature, key: &str) -> Option<String> {
    match f.property(key)? {
        JsonValue::String(s) => Some(s.clone()),
        JsonValue::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn feature_id(f: &Feature, index: usize) -> String {
    property_string(f, "id")
        .or_else(|| {
            f.id.as_ref().map(|id| match id {
                geojson::feature::Id::String(s) => s.clone(),
                geojson::feature::Id::Number(n) => n.to_string(),
            })
        })
        .unwrap_or_else(|| format!("feature-{index}"))
}

fn ring(coords: &[Vec<f64>]) -> Vec<Point> {
    coords.iter().map(|c| Point::new(c[0], c[1])).collect()
}

fn polygon_of(
    path: &Path,
    f: &Feature,
    id: String,
    tol: &Tolerance,
) -> Result<Polygon, PipelineError> {
    let geom = f
        .geometry
        .as_ref()
        .ok_or_else(|| input_err(path, format!("feature {id} has no geometry")))?;
    let rings = match &geom.value {
        Value::Polygon(r) => r,
        Value::MultiPolygon(parts) if parts.len() == 1 => &parts[0],
        other => {
            return Err(input_err(
                path,
                format!(
                    "feature {id}: expected a Polygon, found {}",
                    other.type_name()
                ),
            ));
        }
    };
    let (ext, holes) = rings
        .split_first()
        .ok_or_else(|| input_err(path, format!("feature {id} has no rings")))?;
    if rings.iter().flatten().any(|c| c.len() < 2) {
        return Err(input_err(
            path,
            format!("feature {id}: position with fewer than 2 coordinates"),
        ));
    }
    Polygon::with_tolerance(id, ring(ext), holes.iter().map(|h| ring(h)).collect(), tol)
        .map_err(|e| input_err(path, e.to_string()))
}

/// Labeled polygons from a FeatureCollection with `id` and `label` properties.
pub fn read_polygons(path: &Path, tol: &Tolerance) -> Result<Vec<Polygon>, PipelineError> {
    let feats = features_of(path)?;
    if feats.is_empty() {
        return Err(input_err(path, "no polygons"));
    }
    let mut out = Vec::with_capacity(feats.len());
    for (i, f) in feats.iter().enumerate() {
        let id = feature_id(f, i);
        let mut p = polygon_of(path, f, id, tol)?;
        p.set_label(property_string(f, "label"));
        out.push(p);
    }
    let mut ids: Vec<&str> = out.iter().map(|p| p.id()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(input_err(path, format!("duplicate polygon id {}", w[0])));
    }
    Ok(out)
}

fn closed(points: &[Point]) -> Vec<Vec<f64>> {
    points
        .iter()
        .chain(points.first())
        .map(|p| vec![p.x, p.y])
        .collect()
}

fn polygon_feature(p: &Polygon, props: JsonObject) -> Feature {
    let rings = p.rings().map(closed).collect();
    Feature {
        bbox: None,
        geometry: Some(Geometry::new(Value::Polygon(rings))),
        id: None,
        properties: Some(props),
        foreign_members: None,
    }
}

fn write_features(path: &Path, features: Vec<Feature>) -> Result<(), PipelineError> {
    let fc = FeatureCollection {
        bbox: None,
        features,
        foreign_members: None,
    };
    write(path, &GeoJson::from(fc).to_string())
}

pub fn write_polygons(path: &Path, polygons: &[Polygon]) -> Result<(), PipelineError> {
    let features = polygons
        .iter()
        .map(|p| {
            let mut props = JsonObject::new();
            props.insert("id".into(), p.id().into());
            if let Some(l) = p.label() {
                props.insert("label".into(), l.into());
            }
            polygon_feature(p, props)
        })
        .collect();
    write_features(path, features)
}

fn categories_or_observed(
    declared: &Option<Vec<String>>,
    observed: impl Iterator<Item = String>,
) -> Vec<String> {
    match declared {
        Some(c) => c.clone(),
        None => {
            let mut c: Vec<String> = observed.collect();
            c.sort();
            c.dedup();
            c
        }
    }
}

fn category_of(path: &Path, f: &Feature, id: &str) -> Result<String, PipelineError> {
    property_string(f, "category")
        .ok_or_else(|| input_err(path, format!("feature {id} has no category")))
}

fn read_polygon_layer(
    path: &Path,
    cfg: &LayerConfig,
    tol: &Tolerance,
) -> Result<LayerPayload, PipelineError> {
    let mut objects = Vec::new();
    for (i, f) in features_of(path)?.iter().enumerate() {
        let id = feature_id(f, i);
        let category = category_of(path, f, &id)?;
        objects.push(CategorizedPolygon {
            geometry: polygon_of(path, f, id, tol)?,
            category,
        });
    }
    let categories =
        categories_or_observed(&cfg.categories, objects.iter().map(|o| o.category.clone()));
    Ok(LayerPayload::PolygonCategorical {
        categories,
        objects,
    })
}

fn read_point_layer(path: &Path, cfg: &LayerConfig) -> Result<LayerPayload, PipelineError> {
    let mut points = Vec::new();
    for (i, f) in features_of(path)?.iter().enumerate() {
        let id = feature_id(f, i);
        let category = category_of(path, f, &id)?;
        match f.geometry.as_ref().map(|g| &g.value) {
            Some(Value::Point(c)) if c.len() >= 2 => {
                points.push((Point::new(c[0], c[1]), category))
            }
            _ => return Err(input_err(path, format!("feature {id}: expected a Point"))),
        }
    }
    let categories = categories_or_observed(&cfg.categories, points.iter().map(|(_, c)| c.clone()));
    Ok(LayerPayload::PointCategorical { categories, points })
}

/// One band from an ESRI ASCII grid. `xllcenter`/`yllcenter` headers are
/// shifted to corners.
pub fn read_ascii_grid(path: &Path) -> Result<Grid, PipelineError> {
    let text = read(path)?;
    let mut lines = text.lines().enumerate();
    let (mut ncols, mut nrows, mut cellsize, mut nodata) = (None, None, None, None);
    let (mut xll, mut yll, mut centered) = (None, None, false);
    let mut values = Vec::new();
    for (n, line) in lines.by_ref() {
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else { continue };
        let num = |s: Option<&str>| -> Result<f64, PipelineError> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| input_err(path, format!("line {}: bad value for {key}", n + 1)))
        };
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(num(parts.next())? as usize),
            "nrows" => nrows = Some(num(parts.next())? as usize),
            "xllcorner" => xll = Some(num(parts.next())?),
            "yllcorner" => yll = Some(num(parts.next())?),
            "xllcenter" => (xll, centered) = (Some(num(parts.next())?), true),
            "yllcenter" => (yll, centered) = (Some(num(parts.next())?), true),
            "cellsize" => cellsize = Some(num(parts.next())?),
            "nodata_value" | "nodata" => nodata = Some(num(parts.next())?),
            _ => {
                for tok in line.split_whitespace() {
                    values.push(tok.parse::<f64>().map_err(|_| {
                        input_err(path, format!("line {}: bad cell value {tok:?}", n + 1))
                    })?);
                }
                break;
            }
        }
    }
    for (n, line) in lines {
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>().map_err(|_| {
                    input_err(path, format!("line {}: bad cell value {tok:?}", n + 1))
                })?,
            );
        }
    }
    let missing = |k: &str| input_err(path, format!("missing header {k}"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let (mut xll, mut yll) = (
        xll.ok_or_else(|| missing("xllcorner"))?,
        yll.ok_or_else(|| missing("yllcorner"))?,
    );
    if centered {
        xll -= cellsize / 2.0;
        yll -= cellsize / 2.0;
    }
    if values.len() != ncols * nrows {
        return Err(input_err(
            path,
            format!("{} cell values for a {nrows}x{ncols} grid", values.len()),
        ));
    }
    Ok(Grid {
        ncols,
        nrows,
        xllcorner: xll,
        yllcorner: yll,
        cellsize,
        nodata,
        values,
    })
}

pub fn write_ascii_grid(path: &Path, g: &Grid) -> Result<(), PipelineError> {
    let mut s = format!(
        "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\n",
        g.ncols, g.nrows, g.xllcorner, g.yllcorner, g.cellsize
    );
    if let Some(nd) = g.nodata {
        s.push_str(&format!("NODATA_value {nd}\n"));
    }
    for row in g.values.chunks(g.ncols.max(1)) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    write(path, &s)
}

fn csv_err(path: &Path, e: csv::Error) -> PipelineError {
    let line = e
        .position()
        .map(|p| format!("line {}: ", p.line()))
        .unwrap_or_default();
    input_err(path, format!("{line}{e}"))
}

/// A table whose first column is the polygon id. Empty cells are missing.
pub fn read_table(path: &Path) -> Result<TableData, PipelineError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.is_empty() {
        return Err(input_err(path, "empty header"));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let values = rec
            .iter()
            .skip(1)
            .map(|v| (!v.is_empty()).then(|| v.to_string()))
            .collect();
        rows.push((id, values));
    }
    Ok(TableData { columns, rows })
}

pub fn write_table(path: &Path, t: &TableData) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let header: Vec<&str> = std::iter::once("id")
        .chain(t.columns.iter().map(String::as_str))
        .collect();
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (id, values) in &t.rows {
        let rec: Vec<&str> = std::iter::once(id.as_str())
            .chain(values.iter().map(|v| v.as_deref().unwrap_or("")))
            .collect();
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| input_err(path, e.to_string()))
}

/// `column,source` pairs.
pub fn read_manifest(path: &Path) -> Result<Vec<(String, String)>, PipelineError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        match (rec.get(0), rec.get(1)) {
            (Some(c), Some(s)) => out.push((c.to_string(), s.to_string())),
            _ => return Err(input_err(path, "expected column,source rows")),
        }
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, pairs: &[(String, String)]) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["column", "source"])
        .map_err(|e| csv_err(path, e))?;
    for (c, s) in pairs {
        w.write_record([c, s]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| input_err(path, e.to_string()))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads one configured layer; relative paths resolve against `base`.
pub fn read_layer(
    base: &Path,
    cfg: &LayerConfig,
    tol: &Tolerance,
) -> Result<SourceLayer, PipelineError> {
    let need_path = || {
        cfg.path
            .as_ref()
            .map(|p| resolve(base, p))
            .ok_or_else(|| PipelineError::Config(format!("layer {} needs a path", cfg.name)))
    };
    let mut column_sources = Vec::new();
    let payload = match cfg.kind {
        LayerKind::PolygonCategorical => read_polygon_layer(&need_path()?, cfg, tol)?,
        LayerKind::PointCategorical => read_point_layer(&need_path()?, cfg)?,
        LayerKind::RasterGrid => {
            if cfg.bands.is_empty() {
                return Err(PipelineError::Config(format!(
                    "layer {} needs bands",
                    cfg.name
                )));
            }
            let bands = cfg
                .bands
                .iter()
                .map(|b| {
                    Ok(Band {
                        name: b.name.clone(),
                        grid: read_ascii_grid(&resolve(base, &b.path))?,
                    })
                })
                .collect::<Result<_, PipelineError>>()?;
            LayerPayload::RasterGrid { bands }
        }
        LayerKind::Table => {
            if let Some(m) = &cfg.manifest {
                column_sources = read_manifest(&resolve(base, m))?;
            }
            LayerPayload::Table(read_table(&need_path()?)?)
        }
    };
    let layer = SourceLayer {
        name: cfg.name.clone(),
        source: cfg.source.clone(),
        payload,
        column_sources,
    };
    layer.validate().map_err(|e| PipelineError::Stage {
        stage: "ingest",
        message: e.to_string(),
    })?;
    Ok(layer)
}

/// Writes a layer next to the polygons and returns its config entry, with
/// paths relative to `dir`.
pub fn write_layer(dir: &Path, layer: &SourceLayer) -> Result<LayerConfig, PipelineError> {
    let mut cfg = LayerConfig {
        name: layer.name.clone(),
        source: layer.source.clone(),
        kind: LayerKind::Table,
        path: None,
        categories: None,
        bands: Vec::new(),
        manifest: None,
    };
    match &layer.payload {
        LayerPayload::PolygonCategorical {
            categories,
            objects,
        } => {
            let file = format!("{}.geojson", layer.name);
            let features = objects
                .iter()
                .map(|o| {
                    let mut props = JsonObject::new();
                    props.insert("id".into(), o.geometry.id().into());
                    props.insert("category".into(), o.category.clone().into());
                    polygon_feature(&o.geometry, props)
                })
                .collect();
            write_features(&dir.join(&file), features)?;
            cfg.kind = LayerKind::PolygonCategorical;
            cfg.path = Some(file.into());
            cfg.categories = Some(categories.clone());
        }
        LayerPayload::PointCategorical { categories, points } => {
            let file = format!("{}.geojson", layer.name);
            let features = points
                .iter()
                .enumerate()
                .map(|(i, (p, c))| {
                    let mut props = JsonObject::new();
                    props.insert("id".into(), format!("{}-{i}", layer.name).into());
                    props.insert("category".into(), c.clone().into());
                    Feature {
                        bbox: None,
                        geometry: Some(Geometry::new(Value::Point(vec![p.x, p.y]))),
                        id: None,
                        properties: Some(props),
                        foreign_members: None,
                    }
                })
                .collect();
            write_features(&dir.join(&file), features)?;
            cfg.kind = LayerKind::PointCategorical;
            cfg.path = Some(file.into());
            cfg.categories = Some(categories.clone());
        }
        LayerPayload::RasterGrid { bands } => {
            cfg.kind = LayerKind::RasterGrid;
            for b in bands {
                let file = format!("{}_{}.asc", layer.name, b.name);
                write_ascii_grid(&dir.join(&file), &b.grid)?;
                cfg.bands.push(BandFile {
                    name: b.name.clone(),
                    path: file.into(),
                });
            }
        }
        LayerPayload::Table(t) => {
            let file = format!("{}.csv", layer.name);
            write_table(&dir.join(&file), t)?;
            cfg.path = Some(file.into());
            if !layer.column_sources.is_empty() {
                let m = format!("{}_manifest.csv", layer.name);
                write_manifest(&dir.join(&m), &layer.column_sources)?;
                cfg.manifest = Some(m.into());
            }
        }
    }
    Ok(cfg)
}

/// Writes polygons and layers into `dir`; returns the layer config entries.
pub fn export_bundle(
    dir: &Path,
    bundle: &DatasetBundle,
) -> Result<Vec<LayerConfig>, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| input_err(dir, e.to_string()))?;
    write_polygons(&dir.join("polygons.geojson"), &bundle.polygons)?;
    bundle.layers.iter().map(|l| write_layer(dir, l)).collect()
}
