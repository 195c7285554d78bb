//! End-to-end trust scoring over a snapshot.
//!
//! Two phases: direct scores for every in-scope way first (they feed the
//! neighbor averages), then indirect/temporal/combined for the scored
//! classes. Scoring is pure per feature, so both phases run in parallel.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::classify::{classify_way, ClassifierConfig, FeatureClass};
use crate::coverage::ways_in_scope;
use crate::element::{ElementId, Timestamp};
use crate::error::{Error, Result};
use crate::history::HistoryStore;
use crate::spatial::{BoundaryPolygon, GeoPoint, NeighborIndex};
use crate::trust::{
    direct_trust, extract_signals, indirect_trust, temporal_trust, trust_distribution,
    trustworthiness, HistorySignals, TrustDistribution, TrustParams, TrustScore,
};

/// A scored in-scope way.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredFeature {
    pub id: ElementId,
    pub class: FeatureClass,
    pub vertices: Vec<GeoPoint>,
    pub partial: bool,
    pub representative: GeoPoint,
    pub signals: HistorySignals,
    pub score: TrustScore,
}

/// Output of a trust run: scored features ascending by id, plus one
/// distribution per scored class (None when the class is empty).
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRun {
    pub eval_time: Timestamp,
    pub features: Vec<ScoredFeature>,
    pub distributions: Vec<(FeatureClass, Option<TrustDistribution>)>,
}

impl TrustRun {
    /// (id, representative point, combined score) of geometric features,
    /// the hexbin input.
    pub fn hexbin_features(&self) -> Vec<(ElementId, GeoPoint, f64)> {
        self.features
            .iter()
            .filter(|f| f.vertices.len() >= 2)
            .map(|f| (f.id, f.representative, f.score.combined))
            .collect()
    }
}

/// Scores every in-scope way of the scored classes at `at`.
///
/// Signal extraction sees only versions with timestamp <= `at`, so a
/// historical run reproduces what an extract from that date would show.
pub fn score_trust(
    store: &HistoryStore,
    at: Timestamp,
    boundary: Option<&BoundaryPolygon>,
    classifier: &ClassifierConfig,
    params: &TrustParams,
) -> Result<TrustRun> {
    params.validate()?;
    let snapshot = store.snapshot_at(at);
    let scoped = ways_in_scope(&snapshot, boundary);

    struct Prepared {
        id: ElementId,
        class: FeatureClass,
        vertices: Vec<GeoPoint>,
        partial: bool,
        representative: GeoPoint,
        signals: HistorySignals,
        direct: f64,
    }

    // Phase 1: signals and direct scores for every in-scope way.
    let prepared: Vec<Prepared> = scoped
        .into_par_iter()
        .map(|(way, resolved)| {
            let history = store
                .way(way.id)
                .expect("scoped way exists in store")
                .truncated_at(at)
                .expect("scoped way has a version at the snapshot instant");
            let signals = extract_signals(&history, at)?;
            let representative = resolved
                .vertices
                .get(resolved.vertices.len() / 2)
                .copied()
                .expect("scoped way has at least one vertex");
            Ok(Prepared {
                id: way.id,
                class: classify_way(&way.tags, classifier),
                partial: resolved.partial,
                representative,
                signals,
                direct: direct_trust(&signals, params),
                vertices: resolved.vertices,
            })
        })
        .collect::<Result<_>>()?;

    let direct_scores: BTreeMap<ElementId, f64> =
        prepared.iter().map(|p| (p.id, p.direct)).collect();

    // Ways below 2 resolved vertices are non-geometric and stay out of
    // the spatial index; their indirect score falls back to their own.
    let index_input = |class: Option<FeatureClass>| {
        prepared
            .iter()
            .filter(|p| p.vertices.len() >= 2 && class.map_or(true, |c| c == p.class))
            .map(|p| (p.id, p.representative))
            .collect::<Vec<_>>()
    };
    let indexes: BTreeMap<Option<FeatureClass>, NeighborIndex> = if params.same_class_neighbors {
        params
            .scored_classes
            .iter()
            .map(|class| (Some(*class), NeighborIndex::build(index_input(Some(*class)))))
            .collect()
    } else {
        [(None, NeighborIndex::build(index_input(None)))].into()
    };

    // Phase 2: indirect, temporal and combined for the scored classes.
    let mut features: Vec<ScoredFeature> = prepared
        .into_par_iter()
        .filter(|p| params.scored_classes.contains(&p.class))
        .map(|p| {
            let index = if params.same_class_neighbors {
                indexes.get(&Some(p.class)).ok_or_else(|| {
                    Error::Config(format!("no neighbor index for class {}", p.class))
                })?
            } else {
                &indexes[&None]
            };
            let indirect = indirect_trust(p.id, index, &direct_scores, params.neighbor_radius_m)?;
            let temporal = temporal_trust(&p.signals, params);
            let combined = trustworthiness(p.direct, indirect, temporal, &params.weights)?;
            Ok(ScoredFeature {
                id: p.id,
                class: p.class,
                vertices: p.vertices,
                partial: p.partial,
                representative: p.representative,
                signals: p.signals,
                score: TrustScore {
                    id: p.id,
                    direct: p.direct,
                    indirect,
                    temporal,
                    combined,
                    weights: params.weights,
                },
            })
        })
        .collect::<Result<_>>()?;
    features.sort_by_key(|f| f.id);

    let distributions = params
        .scored_classes
        .iter()
        .map(|class| {
            let scores: Vec<f64> = features
                .iter()
                .filter(|f| f.class == *class)
                .map(|f| f.score.combined)
                .collect();
            (*class, trust_distribution(&scores, params.threshold))
        })
        .collect();

    Ok(TrustRun {
        eval_time: at,
        features,
        distributions,
    })
}

/// The newest timestamp in the store, the default evaluation instant.
pub fn default_eval_time(store: &HistoryStore) -> Result<Timestamp> {
    store
        .stats()
        .max_timestamp
        .ok_or_else(|| Error::EmptyInput("store holds no versions".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::haversine_m;
    use chrono::TimeZone;

    fn ts(y: i32, m: u32, d: u32) -> Timestamp {
        chrono::Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap()
    }

    /// Three roads with sidewalk info: two ~40 m apart, one far away.
    /// The middle road has a contested history (change + revert).
    fn store() -> HistoryStore {
        let xml = r#"<osm>
            <node id="1" version="1" timestamp="2015-01-01T00:00:00Z" uid="1" lat="41.8800" lon="-87.6300"/>
            <node id="2" version="1" timestamp="2015-01-01T00:00:00Z" uid="1" lat="41.8803" lon="-87.6300"/>
            <node id="3" version="1" timestamp="2015-01-01T00:00:00Z" uid="1" lat="41.8806" lon="-87.6300"/>
            <node id="4" version="1" timestamp="2015-01-01T00:00:00Z" uid="1" lat="41.9500" lon="-87.6300"/>
            <node id="5" version="1" timestamp="2015-01-01T00:00:00Z" uid="1" lat="41.9503" lon="-87.6300"/>
            <way id="100" version="1" timestamp="2015-02-01T00:00:00Z" uid="1"><nd ref="1"/><nd ref="2"/><tag k="highway" v="residential"/><tag k="sidewalk" v="both"/></way>
            <way id="100" version="2" timestamp="2016-02-01T00:00:00Z" uid="2"><nd ref="1"/><nd ref="2"/><tag k="highway" v="residential"/><tag k="sidewalk" v="both"/></way>
            <way id="101" version="1" timestamp="2015-02-01T00:00:00Z" uid="1"><nd ref="2"/><nd ref="3"/><tag k="highway" v="residential"/><tag k="sidewalk" v="left"/></way>
            <way id="101" version="2" timestamp="2016-02-01T00:00:00Z" uid="3"><nd ref="2"/><nd ref="3"/><tag k="highway" v="residential"/><tag k="sidewalk" v="no"/></way>
            <way id="101" version="3" timestamp="2016-03-01T00:00:00Z" uid="1"><nd ref="2"/><nd ref="3"/><tag k="highway" v="residential"/><tag k="sidewalk" v="left"/></way>
            <way id="102" version="1" timestamp="2015-02-01T00:00:00Z" uid="1"><nd ref="4"/><nd ref="5"/><tag k="highway" v="residential"/><tag k="sidewalk" v="right"/></way>
        </osm>"#;
        HistoryStore::parse(xml.as_bytes(), "test").unwrap()
    }

    #[test]
    fn scores_match_manual_computation() {
        let store = store();
        let params = TrustParams::default();
        let at = ts(2018, 1, 1);
        let run = score_trust(&store, at, None, &ClassifierConfig::default(), &params).unwrap();
        assert_eq!(run.features.len(), 3);
        assert_eq!(
            run.features.iter().map(|f| f.id).collect::<Vec<_>>(),
            vec![100, 101, 102]
        );

        let by_id: BTreeMap<ElementId, &ScoredFeature> =
            run.features.iter().map(|f| (f.id, f)).collect();

        // Way 100: V=2, U=2, C=1 (identical payload, new user) -> S = 1+2+3.
        let f100 = by_id[&100];
        assert_eq!(
            (f100.signals.version_count, f100.signals.editor_count, f100.signals.confirmations, f100.signals.rollbacks),
            (2, 2, 1, 0)
        );
        let d100 = 1.0 - (-0.3f64 * 6.0).exp();
        assert!((f100.score.direct - d100).abs() < 1e-12);

        // Way 101: V=3, U=2, C=0, Rb=1 -> S = 2+2, halved once.
        let f101 = by_id[&101];
        assert_eq!(
            (f101.signals.version_count, f101.signals.editor_count, f101.signals.confirmations, f101.signals.rollbacks),
            (3, 2, 0, 1)
        );
        let d101 = (1.0 - (-0.3f64 * 4.0).exp()) * 0.5;
        assert!((f101.score.direct - d101).abs() < 1e-12);

        // 100 and 101 share rep points ~33 m apart; 102 is ~7.8 km away.
        assert!(haversine_m(f100.representative, f101.representative) < 50.0);
        assert!(haversine_m(f100.representative, f102_rep(&run)) > 1000.0);
        assert!((f100.score.indirect - d101).abs() < 1e-12);
        assert!((f101.score.indirect - d100).abs() < 1e-12);

        // Isolated feature falls back to its own direct score.
        let f102 = by_id[&102];
        assert!((f102.score.indirect - f102.score.direct).abs() < 1e-12);

        // Combined is the weighted sum.
        for f in &run.features {
            let want = 0.5 * f.score.direct + 0.25 * f.score.indirect + 0.25 * f.score.temporal;
            assert!((f.score.combined - want).abs() < 1e-12);
        }
    }

    fn f102_rep(run: &TrustRun) -> GeoPoint {
        run.features.iter().find(|f| f.id == 102).unwrap().representative
    }

    #[test]
    fn distributions_cover_scored_classes() {
        let store = store();
        let params = TrustParams::default();
        let run = score_trust(&store, ts(2018, 1, 1), None, &ClassifierConfig::default(), &params).unwrap();
        assert_eq!(run.distributions.len(), 2);
        let info = run
            .distributions
            .iter()
            .find(|(c, _)| *c == FeatureClass::RoadWithSidewalkInfo)
            .unwrap();
        assert_eq!(info.1.as_ref().unwrap().count, 3);
        // No sidewalk geometries in the fixture: null distribution.
        let sidewalks = run
            .distributions
            .iter()
            .find(|(c, _)| *c == FeatureClass::SidewalkGeometry)
            .unwrap();
        assert!(sidewalks.1.is_none());
    }

    #[test]
    fn historical_run_sees_truncated_histories() {
        let store = store();
        let params = TrustParams::default();
        // Before way 101's contested edits: only v1 exists.
        let run = score_trust(&store, ts(2015, 6, 1), None, &ClassifierConfig::default(), &params).unwrap();
        let f101 = run.features.iter().find(|f| f.id == 101).unwrap();
        assert_eq!(f101.signals.version_count, 1);
        assert_eq!(f101.signals.rollbacks, 0);
        assert_eq!(f101.score.direct, 0.0);
    }

    #[test]
    fn same_class_neighbor_switch_changes_pool() {
        let xml = r#"<osm>
            <node id="1" version="1" timestamp="2015-01-01T00:00:00Z" uid="1" lat="41.8800" lon="-87.6300"/>
            <node id="2" version="1" timestamp="2015-01-01T00:00:00Z" uid="1" lat="41.8801" lon="-87.6300"/>
            <way id="100" version="1" timestamp="2015-02-01T00:00:00Z" uid="1"><nd ref="1"/><nd ref="2"/><tag k="highway" v="residential"/><tag k="sidewalk" v="both"/></way>
            <way id="100" version="2" timestamp="2015-03-01T00:00:00Z" uid="9"><nd ref="1"/><nd ref="2"/><tag k="highway" v="residential"/><tag k="sidewalk" v="both"/></way>
            <way id="200" version="1" timestamp="2015-02-01T00:00:00Z" uid="2"><nd ref="1"/><nd ref="2"/><tag k="highway" v="footway"/><tag k="footway" v="sidewalk"/></way>
            <way id="201" version="2" timestamp="2016-02-01T00:00:00Z" uid="3"><nd ref="1"/><nd ref="2"/><tag k="highway" v="footway"/><tag k="footway" v="sidewalk"/></way>
        </osm>"#;
        let store = HistoryStore::parse(xml.as_bytes(), "test").unwrap();
        let cfg = ClassifierConfig::default();
        let at = ts(2018, 1, 1);

        let mixed = score_trust(&store, at, None, &cfg, &TrustParams::default()).unwrap();
        let same_class = score_trust(
            &store,
            at,
            None,
            &cfg,
            &TrustParams {
                same_class_neighbors: true,
                ..TrustParams::default()
            },
        )
        .unwrap();

        let indirect = |run: &TrustRun, id: ElementId| {
            run.features.iter().find(|f| f.id == id).unwrap().score.indirect
        };
        // Road 100's only neighbors are sidewalks; restricting the pool to
        // roads leaves it isolated (fallback to its own direct score).
        assert_ne!(indirect(&mixed, 100), indirect(&same_class, 100));
        assert_eq!(
            indirect(&same_class, 100),
            mixed.features.iter().find(|f| f.id == 100).unwrap().score.direct
        );
    }
}
