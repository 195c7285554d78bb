//! Point-in-time reconstruction of element state.

use std::collections::BTreeMap;

use crate::element::{ElementId, Timestamp, VersionedElement};
use crate::history::HistoryStore;
use crate::spatial::GeoPoint;

/// Effective element state at one instant: for every element the highest
/// version with timestamp <= the snapshot instant, present iff visible.
#[derive(Debug)]
pub struct Snapshot<'a> {
    pub timestamp: Timestamp,
    nodes: BTreeMap<ElementId, &'a VersionedElement>,
    ways: BTreeMap<ElementId, &'a VersionedElement>,
}

impl<'a> Snapshot<'a> {
    pub(crate) fn build(store: &'a HistoryStore, t: Timestamp) -> Snapshot<'a> {
        let effective = |histories: &mut dyn Iterator<Item = &'a crate::element::FeatureHistory>| {
            histories
                .filter_map(|h| {
                    h.effective_at(t)
                        .filter(|v| v.visible)
                        .map(|v| (h.id, v))
                })
                .collect::<BTreeMap<_, _>>()
        };
        Snapshot {
            timestamp: t,
            nodes: effective(&mut store.nodes()),
            ways: effective(&mut store.ways()),
        }
    }

    pub fn node(&self, id: ElementId) -> Option<&'a VersionedElement> {
        self.nodes.get(&id).copied()
    }

    pub fn way(&self, id: ElementId) -> Option<&'a VersionedElement> {
        self.ways.get(&id).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &'a VersionedElement> + '_ {
        self.nodes.values().copied()
    }

    /// Visible ways at the snapshot instant, ascending id.
    pub fn ways(&self) -> impl Iterator<Item = &'a VersionedElement> + '_ {
        self.ways.values().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn way_count(&self) -> usize {
        self.ways.len()
    }

    /// Resolves a way's node refs to effective positions, in order.
    /// Returns None when the way is not in the snapshot.
    pub fn resolve_way_geometry(&self, way_id: ElementId) -> Option<ResolvedWay> {
        let way = self.way(way_id)?;
        let refs = way.node_refs();
        let mut vertices = Vec::with_capacity(refs.len());
        let mut partial = false;
        for node_ref in refs {
            match self.node(*node_ref).and_then(|n| n.node_position()) {
                Some(p) => vertices.push(p),
                None => partial = true,
            }
        }
        Some(ResolvedWay { vertices, partial })
    }
}

/// A way's resolved polyline. Fewer than 2 vertices makes the way
/// non-geometric: it stays countable for classification but is excluded
/// from spatial operations.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedWay {
    pub vertices: Vec<GeoPoint>,
    pub partial: bool,
}

impl ResolvedWay {
    pub fn is_geometric(&self) -> bool {
        self.vertices.len() >= 2
    }

    /// Deterministic representative point: the middle vertex.
    pub fn representative(&self) -> Option<GeoPoint> {
        self.vertices.get(self.vertices.len() / 2).copied()
    }
}
