//! Streaming ingest of OSM history XML into an indexed versioned-element
//! store.
//!
//! The parse is single-pass: memory grows with the number of retained
//! element versions, never with the raw XML size. Elements may arrive in
//! any order; histories are sorted and de-duplicated once at the end.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use chrono::Utc;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::Serialize;

use crate::element::{
    ElementDetail, ElementId, FeatureHistory, TagMap, Timestamp, VersionedElement,
};
use crate::error::{Error, Result};
use crate::snapshot::Snapshot;
use crate::spatial::GeoPoint;

const REJECT_SAMPLE_CAP: usize = 100;

/// Ingest counters and provenance, echoed into report metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestStats {
    pub source: String,
    pub node_count: u64,
    pub node_version_count: u64,
    pub way_count: u64,
    pub way_version_count: u64,
    pub relations_skipped: u64,
    pub rejected: u64,
    /// First few reject reasons, for the ingest summary.
    pub reject_samples: Vec<String>,
    pub duplicate_versions: u64,
    pub min_timestamp: Option<Timestamp>,
    pub max_timestamp: Option<Timestamp>,
}

/// Immutable after ingest; downstream modules only read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryStore {
    nodes: BTreeMap<ElementId, FeatureHistory>,
    ways: BTreeMap<ElementId, FeatureHistory>,
    /// (way id, node id) pairs whose node never appears in the store.
    unresolved_refs: Vec<(ElementId, ElementId)>,
    stats: IngestStats,
}

impl HistoryStore {
    pub fn from_path(path: &Path) -> Result<HistoryStore> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::with_capacity(1 << 20, file);
        HistoryStore::parse(reader, &path.display().to_string())
    }

    /// Stream-parses OSM history XML. `source` is recorded as provenance.
    pub fn parse<R: BufRead>(reader: R, source: &str) -> Result<HistoryStore> {
        let mut xml = Reader::from_reader(reader);
        let mut buf = Vec::with_capacity(4096);

        let mut store = HistoryStore {
            stats: IngestStats {
                source: source.to_string(),
                ..IngestStats::default()
            },
            ..HistoryStore::default()
        };
        let mut current: Option<Pending> = None;
        let mut in_relation = false;
        let mut saw_any_element = false;

        loop {
            let event = xml.read_event_into(&mut buf).map_err(|e| Error::Xml {
                offset: xml.error_position(),
                message: e.to_string(),
            })?;
            match event {
                Event::Start(ref e) | Event::Empty(ref e) => {
                    saw_any_element = true;
                    let is_empty = matches!(event, Event::Empty(_));
                    match e.name().as_ref() {
                        b"node" | b"way" => {
                            if let Some(pending) = current.take() {
                                store.commit(pending);
                            }
                            let pending = Pending::from_start(e);
                            if is_empty {
                                store.commit(pending);
                            } else {
                                current = Some(pending);
                            }
                        }
                        b"relation" => {
                            if let Some(pending) = current.take() {
                                store.commit(pending);
                            }
                            store.stats.relations_skipped += 1;
                            in_relation = !is_empty;
                        }
                        b"tag" if !in_relation => {
                            if let Some(pending) = current.as_mut() {
                                pending.add_tag(e);
                            }
                        }
                        b"nd" if !in_relation => {
                            if let Some(pending) = current.as_mut() {
                                pending.add_node_ref(e);
                            }
                        }
                        _ => {}
                    }
                }
                Event::End(ref e) => match e.name().as_ref() {
                    b"node" | b"way" => {
                        if let Some(pending) = current.take() {
                            store.commit(pending);
                        }
                    }
                    b"relation" => in_relation = false,
                    _ => {}
                },
                Event::Eof => break,
                _ => {}
            }
            buf.clear();
        }

        if let Some(pending) = current.take() {
            store.commit(pending);
        }
        if !saw_any_element {
            return Err(Error::EmptyInput(source.to_string()));
        }

        store.finalize();
        Ok(store)
    }

    pub fn node(&self, id: ElementId) -> Option<&FeatureHistory> {
        self.nodes.get(&id)
    }

    pub fn way(&self, id: ElementId) -> Option<&FeatureHistory> {
        self.ways.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &FeatureHistory> {
        self.nodes.values()
    }

    pub fn ways(&self) -> impl Iterator<Item = &FeatureHistory> {
        self.ways.values()
    }

    pub fn unresolved_refs(&self) -> &[(ElementId, ElementId)] {
        &self.unresolved_refs
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    /// Reconstructs element state at `t`: for each element, the highest
    /// version with timestamp <= t, included iff visible.
    pub fn snapshot_at(&self, t: Timestamp) -> Snapshot<'_> {
        Snapshot::build(self, t)
    }

    fn commit(&mut self, pending: Pending) {
        let element = match pending.into_element() {
            Ok(element) => element,
            Err(reason) => {
                self.stats.rejected += 1;
                if self.stats.reject_samples.len() < REJECT_SAMPLE_CAP {
                    self.stats.reject_samples.push(reason);
                }
                return;
            }
        };

        let map = match element.detail {
            ElementDetail::Node { .. } => &mut self.nodes,
            ElementDetail::Way { .. } => &mut self.ways,
        };
        map.entry(element.id)
            .or_insert_with(|| FeatureHistory {
                id: element.id,
                versions: Vec::with_capacity(1),
            })
            .versions
            .push(element);
    }

    fn finalize(&mut self) {
        let stats = &mut self.stats;
        for map in [&mut self.nodes, &mut self.ways] {
            for history in map.values_mut() {
                history.versions.sort_by_key(|v| v.version);
                let before = history.versions.len();
                history.versions.dedup_by(|later, first| {
                    let dup = later.version == first.version;
                    if dup {
                        log::warn!(
                            "duplicate version {} for {} {}, keeping first occurrence",
                            later.version,
                            later.kind().as_str(),
                            later.id
                        );
                    }
                    dup
                });
                stats.duplicate_versions += (before - history.versions.len()) as u64;
                history.versions.shrink_to_fit();
                for v in &history.versions {
                    stats.min_timestamp = Some(match stats.min_timestamp {
                        Some(t) => t.min(v.timestamp),
                        None => v.timestamp,
                    });
                    stats.max_timestamp = Some(match stats.max_timestamp {
                        Some(t) => t.max(v.timestamp),
                        None => v.timestamp,
                    });
                }
            }
        }

        stats.node_count = self.nodes.len() as u64;
        stats.node_version_count = self.nodes.values().map(|h| h.versions.len() as u64).sum();
        stats.way_count = self.ways.len() as u64;
        stats.way_version_count = self.ways.values().map(|h| h.versions.len() as u64).sum();

        let mut unresolved: BTreeSet<(ElementId, ElementId)> = BTreeSet::new();
        for way in self.ways.values() {
            for version in &way.versions {
                for node_ref in version.node_refs() {
                    if !self.nodes.contains_key(node_ref) {
                        unresolved.insert((way.id, *node_ref));
                    }
                }
            }
        }
        self.unresolved_refs = unresolved.into_iter().collect();
    }
}

/// A node/way element mid-parse; children may still attach.
struct Pending {
    is_way: bool,
    id: Option<ElementId>,
    version: Option<u32>,
    timestamp: Option<Timestamp>,
    uid: i64,
    username: String,
    changeset: i64,
    visible: bool,
    lat: Option<f64>,
    lon: Option<f64>,
    tags: TagMap,
    node_refs: Vec<ElementId>,
    bad_child: Option<String>,
}

impl Pending {
    fn from_start(e: &BytesStart) -> Pending {
        let mut pending = Pending {
            is_way: e.name().as_ref() == b"way",
            id: None,
            version: None,
            timestamp: None,
            uid: 0,
            username: String::new(),
            changeset: 0,
            visible: true,
            lat: None,
            lon: None,
            tags: TagMap::new(),
            node_refs: Vec::new(),
            bad_child: None,
        };
        for attr in e.attributes().flatten() {
            let value = attr.value.as_ref();
            match attr.key.as_ref() {
                b"id" => pending.id = parse_num::<i64>(value),
                b"version" => pending.version = parse_num::<u32>(value),
                b"timestamp" => pending.timestamp = parse_timestamp(value),
                b"uid" => pending.uid = parse_num::<i64>(value).unwrap_or(0),
                b"user" => pending.username = unescape_to_string(&attr),
                b"changeset" => pending.changeset = parse_num::<i64>(value).unwrap_or(0),
                b"visible" => pending.visible = value != b"false",
                b"lat" => pending.lat = parse_num::<f64>(value),
                b"lon" => pending.lon = parse_num::<f64>(value),
                _ => {}
            }
        }
        pending
    }

    fn add_tag(&mut self, e: &BytesStart) {
        let mut key = None;
        let mut value = None;
        for attr in e.attributes().flatten() {
            match attr.key.as_ref() {
                b"k" => key = Some(unescape_to_string(&attr)),
                b"v" => value = Some(unescape_to_string(&attr)),
                _ => {}
            }
        }
        match (key, value) {
            (Some(k), Some(v)) => {
                self.tags.insert(k, v);
            }
            _ => self.set_bad_child("tag without k/v attributes"),
        }
    }

    fn add_node_ref(&mut self, e: &BytesStart) {
        let node_ref = e
            .attributes()
            .flatten()
            .find(|attr| attr.key.as_ref() == b"ref")
            .and_then(|attr| parse_num::<i64>(attr.value.as_ref()));
        match node_ref {
            Some(r) => self.node_refs.push(r),
            None => self.set_bad_child("nd without parseable ref"),
        }
    }

    fn set_bad_child(&mut self, reason: &str) {
        if self.bad_child.is_none() {
            self.bad_child = Some(reason.to_string());
        }
    }

    fn into_element(self) -> std::result::Result<VersionedElement, String> {
        let kind = if self.is_way { "way" } else { "node" };
        let describe = |what: &str, id: Option<ElementId>| match id {
            Some(id) => format!("{kind} {id}: {what}"),
            None => format!("{kind}: {what}"),
        };

        let Some(id) = self.id else {
            return Err(describe("missing or invalid id", None));
        };
        let Some(version) = self.version.filter(|v| *v >= 1) else {
            return Err(describe("missing or invalid version", Some(id)));
        };
        let Some(timestamp) = self.timestamp else {
            return Err(describe("missing or invalid timestamp", Some(id)));
        };
        if let Some(reason) = self.bad_child {
            return Err(describe(&reason, Some(id)));
        }

        let detail = if self.is_way {
            ElementDetail::Way {
                node_refs: self.node_refs,
            }
        } else if self.visible {
            match (self.lat, self.lon) {
                (Some(lat), Some(lon))
                    if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) =>
                {
                    ElementDetail::Node {
                        position: Some(GeoPoint::new(lat, lon)),
                    }
                }
                _ => return Err(describe("visible node without valid lat/lon", Some(id))),
            }
        } else {
            ElementDetail::Node { position: None }
        };

        Ok(VersionedElement {
            id,
            version,
            timestamp,
            uid: self.uid,
            username: self.username,
            changeset: self.changeset,
            visible: self.visible,
            tags: self.tags,
            detail,
        })
    }
}

fn parse_num<T: std::str::FromStr>(bytes: &[u8]) -> Option<T> {
    std::str::from_utf8(bytes).ok()?.trim().parse().ok()
}

fn parse_timestamp(bytes: &[u8]) -> Option<Timestamp> {
    let text = std::str::from_utf8(bytes).ok()?;
    chrono::DateTime::parse_from_rfc3339(text.trim())
        .ok()
        .map(|t| t.with_timezone(&Utc))
}

fn unescape_to_string(attr: &quick_xml::events::attributes::Attribute) -> String {
    match attr.unescape_value() {
        Ok(cow) => cow.into_owned(),
        Err(_) => String::from_utf8_lossy(attr.value.as_ref()).into_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(xml: &str) -> Result<HistoryStore> {
        HistoryStore::parse(xml.as_bytes(), "test")
    }

    #[test]
    fn single_visible_node() {
        let store = parse_str(
            r#"<osm><node id="1" version="1" timestamp="2019-01-01T00:00:00Z" uid="7" user="a" changeset="3" lat="41.0" lon="-87.0"/></osm>"#,
        )
        .unwrap();
        assert_eq!(store.stats().node_count, 1);
        assert_eq!(store.stats().node_version_count, 1);
        let h = store.node(1).unwrap();
        assert_eq!(h.versions.len(), 1);
        assert!(h.versions[0].visible);
        assert_eq!(h.versions[0].node_position(), Some(GeoPoint::new(41.0, -87.0)));
    }

    #[test]
    fn way_with_absent_node_is_kept_and_recorded() {
        let store = parse_str(
            r#"<osm>
                <node id="1" version="1" timestamp="2019-01-01T00:00:00Z" lat="41.0" lon="-87.0"/>
                <way id="10" version="1" timestamp="2019-01-02T00:00:00Z"><nd ref="1"/><nd ref="2"/></way>
            </osm>"#,
        )
        .unwrap();
        assert_eq!(store.stats().way_count, 1);
        assert_eq!(store.unresolved_refs(), &[(10, 2)]);
    }

    #[test]
    fn fixture_counts_match_hand_count() {
        // 3 nodes x 2 versions + 2 ways x 3 versions.
        let mut xml = String::from("<osm>");
        for id in 1..=3 {
            for version in 1..=2 {
                xml.push_str(&format!(
                    r#"<node id="{id}" version="{version}" timestamp="201{version}-01-01T00:00:00Z" lat="41.{id}" lon="-87.{id}"/>"#
                ));
            }
        }
        for id in [10, 11] {
            for version in 1..=3 {
                xml.push_str(&format!(
                    r#"<way id="{id}" version="{version}" timestamp="201{version}-06-01T00:00:00Z"><nd ref="1"/><nd ref="2"/></way>"#
                ));
            }
        }
        xml.push_str("</osm>");
        let store = parse_str(&xml).unwrap();
        let stats = store.stats();
        assert_eq!(
            (
                stats.node_count,
                stats.node_version_count,
                stats.way_count,
                stats.way_version_count
            ),
            (3, 6, 2, 6)
        );
    }

    #[test]
    fn missing_required_attribute_rejects_element() {
        let store = parse_str(
            r#"<osm>
                <node id="1" version="1" lat="41.0" lon="-87.0"/>
                <node id="2" version="1" timestamp="2019-01-01T00:00:00Z" lat="41.0" lon="-87.0"/>
            </osm>"#,
        )
        .unwrap();
        assert_eq!(store.stats().rejected, 1);
        assert_eq!(store.stats().node_count, 1);
        assert!(store.stats().reject_samples[0].contains("timestamp"));
    }

    #[test]
    fn visible_node_without_position_rejects() {
        let store = parse_str(
            r#"<osm><node id="1" version="1" timestamp="2019-01-01T00:00:00Z"/></osm>"#,
        )
        .unwrap();
        assert_eq!(store.stats().rejected, 1);
        assert_eq!(store.stats().node_count, 0);
    }

    #[test]
    fn deleted_node_needs_no_position() {
        let store = parse_str(
            r#"<osm><node id="1" version="2" timestamp="2019-01-01T00:00:00Z" visible="false"/></osm>"#,
        )
        .unwrap();
        assert_eq!(store.stats().node_version_count, 1);
        assert!(!store.node(1).unwrap().versions[0].visible);
    }

    #[test]
    fn duplicate_version_keeps_first() {
        let store = parse_str(
            r#"<osm>
                <node id="1" version="1" timestamp="2019-01-01T00:00:00Z" uid="1" lat="41.0" lon="-87.0"/>
                <node id="1" version="1" timestamp="2019-01-01T00:00:00Z" uid="2" lat="42.0" lon="-88.0"/>
            </osm>"#,
        )
        .unwrap();
        assert_eq!(store.stats().duplicate_versions, 1);
        let h = store.node(1).unwrap();
        assert_eq!(h.versions.len(), 1);
        assert_eq!(h.versions[0].uid, 1);
    }

    #[test]
    fn relations_are_skipped_and_counted() {
        let store = parse_str(
            r#"<osm>
                <node id="1" version="1" timestamp="2019-01-01T00:00:00Z" lat="41.0" lon="-87.0"/>
                <relation id="5" version="1" timestamp="2019-01-01T00:00:00Z">
                    <member type="way" ref="10" role=""/>
                    <tag k="type" v="multipolygon"/>
                </relation>
            </osm>"#,
        )
        .unwrap();
        assert_eq!(store.stats().relations_skipped, 1);
        assert_eq!(store.stats().node_count, 1);
        // The relation's tag must not leak onto anything.
        assert!(store.node(1).unwrap().versions[0].tags.is_empty());
    }

    #[test]
    fn malformed_xml_is_fatal_with_offset() {
        let err = parse_str(r#"<osm><node id="1" version="1"</osm>"#).unwrap_err();
        match err {
            Error::Xml { offset, .. } => assert!(offset > 0),
            other => panic!("expected Xml error, got {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_fatal() {
        assert!(matches!(parse_str(""), Err(Error::EmptyInput(_))));
        assert!(matches!(parse_str("   \n"), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn absent_visible_means_visible() {
        let store = parse_str(
            r#"<osm><way id="10" version="1" timestamp="2019-01-01T00:00:00Z"><nd ref="1"/></way></osm>"#,
        )
        .unwrap();
        assert!(store.way(10).unwrap().versions[0].visible);
    }

    #[test]
    fn parse_is_deterministic() {
        let xml = r#"<osm>
            <way id="10" version="2" timestamp="2020-01-01T00:00:00Z"><nd ref="2"/><nd ref="1"/><tag k="highway" v="residential"/></way>
            <node id="2" version="1" timestamp="2019-01-01T00:00:00Z" lat="41.1" lon="-87.1"/>
            <node id="1" version="1" timestamp="2019-01-01T00:00:00Z" lat="41.0" lon="-87.0"/>
            <way id="10" version="1" timestamp="2019-06-01T00:00:00Z"><nd ref="1"/></way>
        </osm>"#;
        let a = parse_str(xml).unwrap();
        let b = parse_str(xml).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.way(10).unwrap().versions[0].version, 1);
    }
}
