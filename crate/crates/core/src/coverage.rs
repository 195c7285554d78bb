//! Coverage statistics: per-class counts, share of roads carrying sidewalk
//! information, sidewalk-to-road ratio, attribute availability and the
//! yearly growth series.
//!
//! All headline metrics are count-based; length-weighted variants ride
//! along as extra columns.

use std::collections::BTreeMap;

use chrono::TimeZone;
use serde::Serialize;

use crate::classify::{attribute_fractions, classify_way, ClassifierConfig, FeatureClass};
use crate::element::{ElementId, Timestamp, VersionedElement};
use crate::history::HistoryStore;
use crate::snapshot::{ResolvedWay, Snapshot};
use crate::spatial::{haversine_length, way_in_scope, BoundaryPolygon, GeoPoint};

/// One way after scoping, resolution and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedWay {
    pub id: ElementId,
    pub class: FeatureClass,
    pub vertices: Vec<GeoPoint>,
    pub partial: bool,
    pub length_m: f64,
}

impl ClassifiedWay {
    pub fn is_geometric(&self) -> bool {
        self.vertices.len() >= 2
    }

    /// Middle vertex of the resolved polyline.
    pub fn representative(&self) -> Option<GeoPoint> {
        self.vertices.get(self.vertices.len() / 2).copied()
    }
}

/// Ways in the snapshot that fall inside the boundary (majority-vertex
/// rule) and resolve to at least one vertex, ascending id. Without a
/// boundary every resolvable way is in scope.
pub(crate) fn ways_in_scope<'a>(
    snapshot: &Snapshot<'a>,
    boundary: Option<&BoundaryPolygon>,
) -> Vec<(&'a VersionedElement, ResolvedWay)> {
    snapshot
        .ways()
        .filter_map(|way| {
            let resolved = snapshot.resolve_way_geometry(way.id)?;
            if resolved.vertices.is_empty() {
                return None;
            }
            if let Some(b) = boundary {
                if !way_in_scope(&resolved.vertices, b) {
                    return None;
                }
            }
            Some((way, resolved))
        })
        .collect()
}

/// Classifies every in-scope way of a snapshot.
pub fn classify_ways_in_scope(
    snapshot: &Snapshot<'_>,
    boundary: Option<&BoundaryPolygon>,
    cfg: &ClassifierConfig,
) -> Vec<ClassifiedWay> {
    ways_in_scope(snapshot, boundary)
        .into_iter()
        .map(|(way, resolved)| ClassifiedWay {
            id: way.id,
            class: classify_way(&way.tags, cfg),
            length_m: haversine_length(&resolved.vertices).meters,
            partial: resolved.partial,
            vertices: resolved.vertices,
        })
        .collect()
}

/// Count arithmetic behind the two headline columns: percent of roads with
/// sidewalk info and sidewalk-to-road ratio. Both undefined without roads.
pub fn coverage_ratios(
    n_roads: u64,
    n_roads_with_info: u64,
    n_sidewalk_geometries: u64,
) -> (Option<f64>, Option<f64>) {
    if n_roads == 0 {
        return (None, None);
    }
    let pct = 100.0 * n_roads_with_info as f64 / n_roads as f64;
    let ratio = n_sidewalk_geometries as f64 / n_roads as f64;
    (Some(pct), Some(ratio))
}

/// Round to two decimals, the precision of the reported tables.
pub fn round2(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub city: String,
    pub timestamp: Timestamp,
    pub n_roads: u64,
    pub n_roads_with_info: u64,
    pub n_sidewalk_geometries: u64,
    pub n_footways: u64,
    pub n_other: u64,
    pub pct_roads_with_info: Option<f64>,
    pub sidewalk_to_road_ratio: Option<f64>,
    /// Fraction of sidewalk geometries carrying each tracked attribute;
    /// None values when there are no sidewalk geometries.
    pub attribute_availability: BTreeMap<String, Option<f64>>,
    pub road_length_m: f64,
    pub road_with_info_length_m: f64,
    pub sidewalk_length_m: f64,
    pub pct_roads_with_info_by_length: Option<f64>,
    pub sidewalk_to_road_ratio_by_length: Option<f64>,
}

/// Classifies every in-scope way and tallies the coverage report.
/// With zero roads the derived fields are None; counts are still emitted.
pub fn coverage_stats(
    city: &str,
    snapshot: &Snapshot<'_>,
    boundary: Option<&BoundaryPolygon>,
    cfg: &ClassifierConfig,
) -> CoverageReport {
    let scoped = ways_in_scope(snapshot, boundary);

    let mut counts: BTreeMap<FeatureClass, u64> = BTreeMap::new();
    let mut lengths: BTreeMap<FeatureClass, f64> = BTreeMap::new();
    let mut sidewalk_tags = Vec::new();
    for (way, resolved) in &scoped {
        let class = classify_way(&way.tags, cfg);
        *counts.entry(class).or_default() += 1;
        *lengths.entry(class).or_default() += haversine_length(&resolved.vertices).meters;
        if class == FeatureClass::SidewalkGeometry {
            sidewalk_tags.push(&way.tags);
        }
    }
    let count = |class: FeatureClass| counts.get(&class).copied().unwrap_or(0);
    let length = |class: FeatureClass| lengths.get(&class).copied().unwrap_or(0.0);

    let n_roads_with_info = count(FeatureClass::RoadWithSidewalkInfo);
    let n_roads = count(FeatureClass::RoadNoSidewalkInfo) + n_roads_with_info;
    let n_sidewalk_geometries = count(FeatureClass::SidewalkGeometry);
    let (pct_roads_with_info, sidewalk_to_road_ratio) =
        coverage_ratios(n_roads, n_roads_with_info, n_sidewalk_geometries);

    let road_with_info_length_m = length(FeatureClass::RoadWithSidewalkInfo);
    let road_length_m = length(FeatureClass::RoadNoSidewalkInfo) + road_with_info_length_m;
    let sidewalk_length_m = length(FeatureClass::SidewalkGeometry);
    let (pct_by_length, ratio_by_length) = if road_length_m > 0.0 {
        (
            Some(100.0 * road_with_info_length_m / road_length_m),
            Some(sidewalk_length_m / road_length_m),
        )
    } else {
        (None, None)
    };

    CoverageReport {
        city: city.to_string(),
        timestamp: snapshot.timestamp,
        n_roads,
        n_roads_with_info,
        n_sidewalk_geometries,
        n_footways: count(FeatureClass::Footway),
        n_other: count(FeatureClass::Other),
        pct_roads_with_info,
        sidewalk_to_road_ratio,
        attribute_availability: attribute_fractions(sidewalk_tags.into_iter(), cfg),
        road_length_m,
        road_with_info_length_m,
        sidewalk_length_m,
        pct_roads_with_info_by_length: pct_by_length,
        sidewalk_to_road_ratio_by_length: ratio_by_length,
    }
}

/// Availability of each tracked attribute over in-scope sidewalk
/// geometries; all None when there are none.
pub fn attribute_availability(
    snapshot: &Snapshot<'_>,
    boundary: Option<&BoundaryPolygon>,
    cfg: &ClassifierConfig,
) -> BTreeMap<String, Option<f64>> {
    let scoped = ways_in_scope(snapshot, boundary);
    let sidewalk_tags = scoped
        .iter()
        .filter(|(way, _)| classify_way(&way.tags, cfg) == FeatureClass::SidewalkGeometry)
        .map(|(way, _)| &way.tags);
    attribute_fractions(sidewalk_tags, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearCoverage {
    pub year: i32,
    pub report: CoverageReport,
}

/// Jan 1, 00:00:00 UTC of the given year.
pub fn year_start(year: i32) -> Timestamp {
    chrono::Utc
        .with_ymd_and_hms(year, 1, 1, 0, 0, 0)
        .single()
        .expect("valid year")
}

/// Coverage per year, each taken on the Jan 1 00:00:00 UTC snapshot.
/// Years must be ascending.
pub fn growth_series(
    store: &HistoryStore,
    boundary: Option<&BoundaryPolygon>,
    cfg: &ClassifierConfig,
    years: &[i32],
    city: &str,
) -> Vec<YearCoverage> {
    debug_assert!(years.windows(2).all(|w| w[0] <= w[1]), "years must be sorted");
    years
        .iter()
        .map(|year| {
            let snapshot = store.snapshot_at(year_start(*year));
            YearCoverage {
                year: *year,
                report: coverage_stats(city, &snapshot, boundary, cfg),
            }
        })
        .collect()
}
