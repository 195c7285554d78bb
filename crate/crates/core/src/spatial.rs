//! Geographic utilities: boundary membership, great-circle lengths,
//! hexagonal binning and a radius-query neighbor index.
//!
//! Distances are always haversine on a sphere. Hex binning works on a
//! local azimuthal equidistant plane centered on the boundary centroid,
//! which is plenty accurate at city extents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::element::ElementId;
use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint { lat, lon }
    }
}

/// Great-circle distance between two points in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    let c = 2.0 * h.sqrt().atan2((1.0 - h).sqrt());
    EARTH_RADIUS_M * c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineLength {
    pub meters: f64,
    /// Set when the polyline has fewer than 2 vertices.
    pub degenerate: bool,
}

/// Sum of great-circle segment lengths along a polyline.
pub fn haversine_length(polyline: &[GeoPoint]) -> PolylineLength {
    if polyline.len() < 2 {
        return PolylineLength {
            meters: 0.0,
            degenerate: true,
        };
    }
    let meters = polyline.windows(2).map(|w| haversine_m(w[0], w[1])).sum();
    PolylineLength {
        meters,
        degenerate: false,
    }
}

/// Study-area polygon: one or more closed rings (outer rings and holes),
/// membership by even-odd rule across all rings.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPolygon {
    pub name: String,
    rings: Vec<Vec<GeoPoint>>,
}

impl BoundaryPolygon {
    /// Rings must be closed (first vertex equals last) with at least 4 vertices.
    pub fn new(name: impl Into<String>, rings: Vec<Vec<GeoPoint>>) -> Result<BoundaryPolygon> {
        if rings.is_empty() {
            return Err(Error::Boundary("polygon has no rings".into()));
        }
        for (i, ring) in rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(Error::Boundary(format!(
                    "ring {} has {} vertices, need at least 4",
                    i,
                    ring.len()
                )));
            }
            let first = ring.first().unwrap();
            let last = ring.last().unwrap();
            if first != last {
                return Err(Error::Boundary(format!("ring {} is not closed", i)));
            }
        }
        Ok(BoundaryPolygon {
            name: name.into(),
            rings,
        })
    }

    /// Loads every Polygon/MultiPolygon found in a GeoJSON document
    /// (bare geometry, Feature or FeatureCollection), WGS84 [lon, lat].
    pub fn from_geojson_str(name: impl Into<String>, text: &str) -> Result<BoundaryPolygon> {
        let doc: serde_json::Value = serde_json::from_str(text)?;
        let mut rings = Vec::new();
        collect_polygon_rings(&doc, &mut rings)?;
        if rings.is_empty() {
            return Err(Error::Boundary(
                "no Polygon or MultiPolygon geometry found in GeoJSON".into(),
            ));
        }
        BoundaryPolygon::new(name, rings)
    }

    pub fn from_geojson_path(name: impl Into<String>, path: &std::path::Path) -> Result<BoundaryPolygon> {
        let text = std::fs::read_to_string(path)?;
        BoundaryPolygon::from_geojson_str(name, &text)
    }

    pub fn rings(&self) -> &[Vec<GeoPoint>] {
        &self.rings
    }

    /// Arithmetic mean of ring vertices (closing vertices skipped); used as
    /// the center for local projections.
    pub fn centroid(&self) -> GeoPoint {
        let mut lat = 0.0;
        let mut lon = 0.0;
        let mut n = 0usize;
        for ring in &self.rings {
            for p in &ring[..ring.len() - 1] {
                lat += p.lat;
                lon += p.lon;
                n += 1;
            }
        }
        GeoPoint::new(lat / n as f64, lon / n as f64)
    }
}

fn collect_polygon_rings(value: &serde_json::Value, rings: &mut Vec<Vec<GeoPoint>>) -> Result<()> {
    let Some(kind) = value.get("type").and_then(|t| t.as_str()) else {
        return Ok(());
    };
    match kind {
        "FeatureCollection" => {
            if let Some(features) = value.get("features").and_then(|f| f.as_array()) {
                for feature in features {
                    collect_polygon_rings(feature, rings)?;
                }
            }
        }
        "Feature" => {
            if let Some(geometry) = value.get("geometry") {
                collect_polygon_rings(geometry, rings)?;
            }
        }
        "Polygon" => {
            let coords = value
                .get("coordinates")
                .ok_or_else(|| Error::Boundary("Polygon without coordinates".into()))?;
            push_polygon(coords, rings)?;
        }
        "MultiPolygon" => {
            let coords = value
                .get("coordinates")
                .and_then(|c| c.as_array())
                .ok_or_else(|| Error::Boundary("MultiPolygon without coordinates".into()))?;
            for polygon in coords {
                push_polygon(polygon, rings)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn push_polygon(coords: &serde_json::Value, rings: &mut Vec<Vec<GeoPoint>>) -> Result<()> {
    let polygon = coords
        .as_array()
        .ok_or_else(|| Error::Boundary("polygon coordinates are not an array".into()))?;
    for ring in polygon {
        let ring = ring
            .as_array()
            .ok_or_else(|| Error::Boundary("ring is not an array".into()))?;
        let mut out = Vec::with_capacity(ring.len());
        for position in ring {
            let pair = position
                .as_array()
                .ok_or_else(|| Error::Boundary("position is not an array".into()))?;
            if pair.len() < 2 {
                return Err(Error::Boundary("position has fewer than 2 ordinates".into()));
            }
            let lon = pair[0]
                .as_f64()
                .ok_or_else(|| Error::Boundary("non-numeric ordinate".into()))?;
            let lat = pair[1]
                .as_f64()
                .ok_or_else(|| Error::Boundary("non-numeric ordinate".into()))?;
            out.push(GeoPoint::new(lat, lon));
        }
        rings.push(out);
    }
    Ok(())
}

/// Even-odd ray casting across all rings; holes flip parity naturally.
pub fn point_in_boundary(p: GeoPoint, boundary: &BoundaryPolygon) -> bool {
    let mut inside = false;
    for ring in &boundary.rings {
        for edge in ring.windows(2) {
            let (a, b) = (edge[0], edge[1]);
            if (a.lat > p.lat) != (b.lat > p.lat) {
                let cross_lon = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
                if p.lon < cross_lon {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Majority-vertex membership: true when at least half of the vertices
/// fall inside the boundary.
pub fn way_in_scope(polyline: &[GeoPoint], boundary: &BoundaryPolygon) -> bool {
    if polyline.is_empty() {
        return false;
    }
    let inside = polyline
        .iter()
        .filter(|p| point_in_boundary(**p, boundary))
        .count();
    2 * inside >= polyline.len()
}

/// Local azimuthal equidistant projection, meters on a plane tangent at `center`.
#[derive(Debug, Clone, Copy)]
pub struct LocalProjection {
    center: GeoPoint,
}

impl LocalProjection {
    pub fn new(center: GeoPoint) -> LocalProjection {
        LocalProjection { center }
    }

    pub fn project(&self, p: GeoPoint) -> (f64, f64) {
        let lat0 = self.center.lat.to_radians();
        let lat = p.lat.to_radians();
        let dlon = (p.lon - self.center.lon).to_radians();

        let cos_c = lat0.sin() * lat.sin() + lat0.cos() * lat.cos() * dlon.cos();
        let c = cos_c.clamp(-1.0, 1.0).acos();
        let scale = if c.abs() < 1e-12 { 1.0 } else { c / c.sin() };
        let x = EARTH_RADIUS_M * scale * lat.cos() * dlon.sin();
        let y = EARTH_RADIUS_M * scale * (lat0.cos() * lat.sin() - lat0.sin() * lat.cos() * dlon.cos());
        (x, y)
    }

    pub fn unproject(&self, x: f64, y: f64) -> GeoPoint {
        let rho = (x * x + y * y).sqrt();
        if rho < 1e-9 {
            return self.center;
        }
        let c = rho / EARTH_RADIUS_M;
        let lat0 = self.center.lat.to_radians();
        let lat = (c.cos() * lat0.sin() + y * c.sin() * lat0.cos() / rho).asin();
        let lon = self.center.lon.to_radians()
            + (x * c.sin()).atan2(rho * c.cos() * lat0.cos() - y * c.sin() * lat0.sin());
        GeoPoint::new(lat.to_degrees(), lon.to_degrees())
    }
}

/// One cell of a pointy-top hexagonal grid in axial coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct HexCell {
    pub q: i32,
    pub r: i32,
    pub center: GeoPoint,
    pub member_ids: Vec<ElementId>,
    pub mean_value: Option<f64>,
    pub count: usize,
}

/// Bins features onto a pointy-top hexagonal grid with the given
/// flat-to-flat cell size, projected around the boundary centroid.
/// Each feature lands in exactly one cell; `mean_value` is the arithmetic
/// mean of member values.
pub fn hexbin(
    features: &[(ElementId, GeoPoint, f64)],
    cell_size_m: f64,
    boundary: &BoundaryPolygon,
) -> Vec<HexCell> {
    assert!(cell_size_m > 0.0, "hex cell size must be positive");
    let projection = LocalProjection::new(boundary.centroid());
    // Pointy-top: flat-to-flat distance is sqrt(3) times the circumradius.
    let size = cell_size_m / 3f64.sqrt();

    let mut cells: BTreeMap<(i32, i32), (Vec<ElementId>, f64)> = BTreeMap::new();
    for (id, point, value) in features {
        let (x, y) = projection.project(*point);
        let (q, r) = pixel_to_axial(x, y, size);
        let entry = cells.entry((q, r)).or_insert_with(|| (Vec::new(), 0.0));
        entry.0.push(*id);
        entry.1 += value;
    }

    cells
        .into_iter()
        .map(|((q, r), (mut member_ids, sum))| {
            member_ids.sort_unstable();
            let count = member_ids.len();
            let (x, y) = axial_to_pixel(q, r, size);
            HexCell {
                q,
                r,
                center: projection.unproject(x, y),
                mean_value: (count > 0).then(|| sum / count as f64),
                count,
                member_ids,
            }
        })
        .collect()
}

/// Corner positions of a cell, closed ring, for map output.
pub fn hex_cell_ring(cell: &HexCell, cell_size_m: f64, boundary: &BoundaryPolygon) -> Vec<GeoPoint> {
    let projection = LocalProjection::new(boundary.centroid());
    let size = cell_size_m / 3f64.sqrt();
    let (cx, cy) = axial_to_pixel(cell.q, cell.r, size);
    let mut ring = Vec::with_capacity(7);
    for i in 0..6 {
        // Pointy-top corners sit at 30° + 60°·i.
        let angle = std::f64::consts::PI / 6.0 + std::f64::consts::PI / 3.0 * i as f64;
        ring.push(projection.unproject(cx + size * angle.cos(), cy + size * angle.sin()));
    }
    ring.push(ring[0]);
    ring
}

fn axial_to_pixel(q: i32, r: i32, size: f64) -> (f64, f64) {
    let x = size * 3f64.sqrt() * (q as f64 + r as f64 / 2.0);
    let y = size * 1.5 * r as f64;
    (x, y)
}

fn pixel_to_axial(x: f64, y: f64, size: f64) -> (i32, i32) {
    let q = (3f64.sqrt() / 3.0 * x - y / 3.0) / size;
    let r = 2.0 / 3.0 * y / size;
    axial_round(q, r)
}

/// Cube rounding keeps the point in the nearest hexagon.
fn axial_round(q: f64, r: f64) -> (i32, i32) {
    let s = -q - r;
    let mut rq = q.round();
    let mut rr = r.round();
    let rs = s.round();

    let dq = (rq - q).abs();
    let dr = (rr - r).abs();
    let ds = (rs - s).abs();

    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    (rq as i32, rr as i32)
}

/// Immutable radius-query index over feature representative points.
///
/// Points are kept sorted by latitude; a query scans the latitude band
/// that can contain the radius and filters by haversine distance.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    by_lat: Vec<(ElementId, GeoPoint)>,
    positions: BTreeMap<ElementId, GeoPoint>,
}

// Degrees of latitude per meter, slightly undersized so the band never
// clips a true neighbor.
const LAT_DEGREES_PER_METER: f64 = 1.0 / 111_000.0;

impl NeighborIndex {
    pub fn build(features: impl IntoIterator<Item = (ElementId, GeoPoint)>) -> NeighborIndex {
        let positions: BTreeMap<ElementId, GeoPoint> = features.into_iter().collect();
        let mut by_lat: Vec<(ElementId, GeoPoint)> =
            positions.iter().map(|(id, p)| (*id, *p)).collect();
        by_lat.sort_by(|a, b| a.1.lat.total_cmp(&b.1.lat).then(a.0.cmp(&b.0)));
        NeighborIndex { by_lat, positions }
    }

    pub fn len(&self) -> usize {
        self.by_lat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_lat.is_empty()
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.positions.contains_key(&id)
    }

    /// Ids of features within `radius_m` of `p`, excluding `exclude`,
    /// sorted ascending.
    pub fn within_radius(&self, p: GeoPoint, radius_m: f64, exclude: Option<ElementId>) -> Vec<ElementId> {
        let band = radius_m * LAT_DEGREES_PER_METER;
        let lo = self
            .by_lat
            .partition_point(|(_, q)| q.lat < p.lat - band);
        let mut out: Vec<ElementId> = self.by_lat[lo..]
            .iter()
            .take_while(|(_, q)| q.lat <= p.lat + band)
            .filter(|(id, q)| Some(*id) != exclude && haversine_m(p, *q) <= radius_m)
            .map(|(id, _)| *id)
            .collect();
        out.sort_unstable();
        out
    }

    /// Neighbors of an indexed feature within `radius_m`, never including itself.
    pub fn neighbors_of(&self, id: ElementId, radius_m: f64) -> Vec<ElementId> {
        match self.positions.get(&id) {
            Some(p) => self.within_radius(*p, radius_m, Some(id)),
            None => Vec::new(),
        }
    }
}
