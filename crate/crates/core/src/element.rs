//! Versioned OSM elements: the unit of everything downstream.

use std::collections::BTreeMap;

use crate::spatial::GeoPoint;

pub type ElementId = i64;
pub type Timestamp = chrono::DateTime<chrono::Utc>;

/// Tag maps are ordered so iteration (and equality) is deterministic.
pub type TagMap = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ElementKind {
    Node,
    Way,
}

impl ElementKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ElementKind::Node => "node",
            ElementKind::Way => "way",
        }
    }
}

/// Kind-specific payload of a version. Deleted nodes carry no position.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementDetail {
    Node { position: Option<GeoPoint> },
    Way { node_refs: Vec<ElementId> },
}

/// One version of an OSM node or way as it appears in a history extract.
#[derive(Debug, Clone, PartialEq)]
pub struct VersionedElement {
    pub id: ElementId,
    pub version: u32,
    pub timestamp: Timestamp,
    pub uid: i64,
    pub username: String,
    pub changeset: i64,
    pub visible: bool,
    pub tags: TagMap,
    pub detail: ElementDetail,
}

impl VersionedElement {
    pub fn kind(&self) -> ElementKind {
        match self.detail {
            ElementDetail::Node { .. } => ElementKind::Node,
            ElementDetail::Way { .. } => ElementKind::Way,
        }
    }

    pub fn node_position(&self) -> Option<GeoPoint> {
        match &self.detail {
            ElementDetail::Node { position } => *position,
            ElementDetail::Way { .. } => None,
        }
    }

    pub fn node_refs(&self) -> &[ElementId] {
        match &self.detail {
            ElementDetail::Way { node_refs } => node_refs,
            ElementDetail::Node { .. } => &[],
        }
    }
}

/// The ordered version chain of one element id.
///
/// Non-empty, sorted by version, no duplicate version numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistory {
    pub id: ElementId,
    pub versions: Vec<VersionedElement>,
}

impl FeatureHistory {
    pub fn kind(&self) -> ElementKind {
        self.versions[0].kind()
    }

    pub fn first(&self) -> &VersionedElement {
        &self.versions[0]
    }

    pub fn last(&self) -> &VersionedElement {
        self.versions.last().expect("history is non-empty")
    }

    /// Effective version at `t`: the highest version with timestamp <= t.
    ///
    /// Versions are authoritative order, so on equal timestamps the higher
    /// version wins. Returns None when the element did not yet exist.
    pub fn effective_at(&self, t: Timestamp) -> Option<&VersionedElement> {
        self.versions.iter().rev().find(|v| v.timestamp <= t)
    }

    /// The prefix of the chain with timestamps <= t, or None if empty.
    pub fn truncated_at(&self, t: Timestamp) -> Option<FeatureHistory> {
        let versions: Vec<VersionedElement> = self
            .versions
            .iter()
            .filter(|v| v.timestamp <= t)
            .cloned()
            .collect();
        if versions.is_empty() {
            None
        } else {
            Some(FeatureHistory {
                id: self.id,
                versions,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ts(y: i32) -> Timestamp {
        chrono::Utc.with_ymd_and_hms(y, 6, 1, 0, 0, 0).unwrap()
    }

    fn node(version: u32, t: Timestamp, visible: bool) -> VersionedElement {
        VersionedElement {
            id: 1,
            version,
            timestamp: t,
            uid: 7,
            username: "a".into(),
            changeset: 1,
            visible,
            tags: TagMap::new(),
            detail: ElementDetail::Node {
                position: visible.then(|| GeoPoint::new(1.0, 2.0)),
            },
        }
    }

    #[test]
    fn effective_version_is_highest_at_or_before() {
        let h = FeatureHistory {
            id: 1,
            versions: vec![node(1, ts(2015), true), node(2, ts(2018), false)],
        };
        assert_eq!(h.effective_at(ts(2016)).unwrap().version, 1);
        assert_eq!(h.effective_at(ts(2019)).unwrap().version, 2);
        assert!(h.effective_at(ts(2014)).is_none());
    }

    #[test]
    fn equal_timestamps_resolve_to_higher_version() {
        let h = FeatureHistory {
            id: 1,
            versions: vec![node(1, ts(2015), true), node(2, ts(2015), true)],
        };
        assert_eq!(h.effective_at(ts(2015)).unwrap().version, 2);
    }

    #[test]
    fn truncation_keeps_prefix() {
        let h = FeatureHistory {
            id: 1,
            versions: vec![node(1, ts(2015), true), node(2, ts(2018), true)],
        };
        assert_eq!(h.truncated_at(ts(2016)).unwrap().versions.len(), 1);
        assert!(h.truncated_at(ts(2014)).is_none());
    }
}
