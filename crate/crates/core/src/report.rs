//! CSV and GeoJSON report emission.
//!
//! Reports are deterministic: features ordered by ascending osm id, fixed
//! float formatting, and a run-metadata block echoing every tunable
//! parameter so runs across cities stay comparable. GeoJSON carries the
//! metadata as a foreign member; CSVs carry it as a leading `#` comment.

use std::io::Write;

use serde::Serialize;
use serde_json::json;

use crate::analysis::ScoredFeature;
use crate::classify::{ClassifierConfig, FeatureClass};
use crate::config::RunConfig;
use crate::coverage::{ClassifiedWay, CoverageReport, YearCoverage};
use crate::element::Timestamp;
use crate::error::Result;
use crate::spatial::{hex_cell_ring, BoundaryPolygon, GeoPoint, HexCell};
use crate::trust::{TrustDistribution, TrustParams, DISTRIBUTION_BINS};

/// Parameters behind a run, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub source: String,
    pub city: String,
    pub snapshot_at: Option<Timestamp>,
    /// Scope rule for ways crossing the boundary.
    pub boundary_rule: &'static str,
    pub hex_cell_m: f64,
    pub classifier: ClassifierConfig,
    pub trust: TrustParams,
}

impl RunMetadata {
    pub fn new(config: &RunConfig, source: &str, snapshot_at: Option<Timestamp>) -> RunMetadata {
        RunMetadata {
            source: source.to_string(),
            city: config.city.clone(),
            snapshot_at,
            boundary_rule: "majority-vertex",
            hex_cell_m: config.hex_cell_m,
            classifier: config.classifier.clone(),
            trust: config.trust.clone(),
        }
    }

    fn comment_line(&self) -> Result<String> {
        Ok(format!("# run_metadata {}\n", serde_json::to_string(self)?))
    }
}

fn fmt_ts(t: Timestamp) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn fmt_opt(value: Option<f64>, decimals: usize) -> String {
    match value {
        Some(v) => format!("{v:.decimals$}"),
        None => String::new(),
    }
}

fn coverage_columns(tracked: &[String]) -> Vec<String> {
    let mut columns = vec![
        "city".to_string(),
        "timestamp".to_string(),
        "n_roads".to_string(),
        "n_roads_with_info".to_string(),
        "n_sidewalks".to_string(),
        "n_footways".to_string(),
        "pct_roads_with_info".to_string(),
        "sidewalk_to_road_ratio".to_string(),
    ];
    columns.extend(tracked.iter().cloned());
    columns.extend(
        [
            "road_length_m",
            "road_with_info_length_m",
            "sidewalk_length_m",
            "pct_roads_with_info_by_length",
            "sidewalk_to_road_ratio_by_length",
        ]
        .map(String::from),
    );
    columns
}

fn coverage_record(report: &CoverageReport, tracked: &[String]) -> Vec<String> {
    let mut record = vec![
        report.city.clone(),
        fmt_ts(report.timestamp),
        report.n_roads.to_string(),
        report.n_roads_with_info.to_string(),
        report.n_sidewalk_geometries.to_string(),
        report.n_footways.to_string(),
        fmt_opt(report.pct_roads_with_info, 2),
        fmt_opt(report.sidewalk_to_road_ratio, 2),
    ];
    for key in tracked {
        record.push(fmt_opt(
            report.attribute_availability.get(key).copied().flatten(),
            4,
        ));
    }
    record.push(format!("{:.1}", report.road_length_m));
    record.push(format!("{:.1}", report.road_with_info_length_m));
    record.push(format!("{:.1}", report.sidewalk_length_m));
    record.push(fmt_opt(report.pct_roads_with_info_by_length, 2));
    record.push(fmt_opt(report.sidewalk_to_road_ratio_by_length, 2));
    record
}

pub fn write_coverage_csv<W: Write>(
    mut w: W,
    reports: &[CoverageReport],
    tracked: &[String],
    meta: &RunMetadata,
) -> Result<()> {
    w.write_all(meta.comment_line()?.as_bytes())?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(coverage_columns(tracked))?;
    for report in reports {
        csv.write_record(coverage_record(report, tracked))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_growth_csv<W: Write>(
    mut w: W,
    series: &[YearCoverage],
    tracked: &[String],
    meta: &RunMetadata,
) -> Result<()> {
    w.write_all(meta.comment_line()?.as_bytes())?;
    let mut csv = csv::Writer::from_writer(w);
    let mut columns = vec!["year".to_string()];
    columns.extend(coverage_columns(tracked));
    csv.write_record(columns)?;
    for row in series {
        let mut record = vec![row.year.to_string()];
        record.extend(coverage_record(&row.report, tracked));
        csv.write_record(record)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_distribution_csv<W: Write>(
    mut w: W,
    distributions: &[(FeatureClass, Option<TrustDistribution>)],
    threshold: f64,
    meta: &RunMetadata,
) -> Result<()> {
    w.write_all(meta.comment_line()?.as_bytes())?;
    let mut csv = csv::Writer::from_writer(w);
    let mut columns = vec![
        "class".to_string(),
        "threshold".to_string(),
        "pct_below".to_string(),
        "pct_at_or_above".to_string(),
    ];
    columns.extend((0..DISTRIBUTION_BINS).map(|i| format!("bin_{i:02}")));
    csv.write_record(columns)?;
    for (class, distribution) in distributions {
        let mut record = vec![class.to_string(), format!("{threshold:.2}")];
        match distribution {
            Some(d) => {
                record.push(format!("{:.2}", d.pct_below));
                record.push(format!("{:.2}", d.pct_at_or_above));
                record.extend(d.bins.iter().map(|b| b.to_string()));
            }
            None => {
                record.push(String::new());
                record.push(String::new());
                record.extend(std::iter::repeat("0".to_string()).take(DISTRIBUTION_BINS));
            }
        }
        csv.write_record(record)?;
    }
    csv.flush()?;
    Ok(())
}

fn geometry_json(vertices: &[GeoPoint]) -> serde_json::Value {
    // GeoJSON positions are [lon, lat].
    if vertices.len() == 1 {
        json!({ "type": "Point", "coordinates": [vertices[0].lon, vertices[0].lat] })
    } else {
        let coordinates: Vec<[f64; 2]> = vertices.iter().map(|p| [p.lon, p.lat]).collect();
        json!({ "type": "LineString", "coordinates": coordinates })
    }
}

/// Streams a FeatureCollection without materializing it.
fn write_feature_collection<W: Write, T, F>(
    mut w: W,
    meta: &RunMetadata,
    items: &[T],
    mut feature: F,
) -> Result<()>
where
    F: FnMut(&T) -> serde_json::Value,
{
    w.write_all(br#"{"type":"FeatureCollection","run_metadata":"#)?;
    serde_json::to_writer(&mut w, meta)?;
    w.write_all(br#","features":["#)?;
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            w.write_all(b",")?;
        }
        serde_json::to_writer(&mut w, &feature(item))?;
    }
    w.write_all(b"]}")?;
    Ok(())
}

/// Per-feature class map (one feature per in-scope way).
pub fn write_class_geojson<W: Write>(
    w: W,
    classified: &[ClassifiedWay],
    meta: &RunMetadata,
) -> Result<()> {
    write_feature_collection(w, meta, classified, |way| {
        json!({
            "type": "Feature",
            "geometry": geometry_json(&way.vertices),
            "properties": { "osm_id": way.id, "class": way.class.as_str() },
        })
    })
}

/// Per-feature trust scores with the component breakdown.
pub fn write_trust_geojson<W: Write>(
    w: W,
    features: &[ScoredFeature],
    meta: &RunMetadata,
) -> Result<()> {
    write_feature_collection(w, meta, features, |f| {
        json!({
            "type": "Feature",
            "geometry": geometry_json(&f.vertices),
            "properties": {
                "osm_id": f.id,
                "class": f.class.as_str(),
                "T_dir": f.score.direct,
                "T_ind": f.score.indirect,
                "T_time": f.score.temporal,
                "T": f.score.combined,
            },
        })
    })
}

/// Hexagonal cells of mean trust as polygon features.
pub fn write_hexbin_geojson<W: Write>(
    w: W,
    cells: &[HexCell],
    cell_size_m: f64,
    boundary: &BoundaryPolygon,
    meta: &RunMetadata,
) -> Result<()> {
    write_feature_collection(w, meta, cells, |cell| {
        let ring: Vec<[f64; 2]> = hex_cell_ring(cell, cell_size_m, boundary)
            .iter()
            .map(|p| [p.lon, p.lat])
            .collect();
        json!({
            "type": "Feature",
            "geometry": { "type": "Polygon", "coordinates": [ring] },
            "properties": {
                "q": cell.q,
                "r": cell.r,
                "count": cell.count,
                "mean_trust": cell.mean_value,
            },
        })
    })
}

/// Ingest summary as pretty JSON, the `ingest` command's output.
pub fn write_ingest_summary<W: Write>(mut w: W, stats: &crate::history::IngestStats) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, stats)?;
    w.write_all(b"\n")?;
    Ok(())
}
