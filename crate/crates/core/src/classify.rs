//! Tag-based classification of ways into sidewalk categories.
//!
//! Two encodings of sidewalks exist side by side: a `sidewalk=*` refinement
//! tag on a road, and a standalone `highway=footway` + `footway=sidewalk`
//! geometry. Road types that cannot carry sidewalks are excluded up front.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::element::TagMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureClass {
    RoadNoSidewalkInfo,
    RoadWithSidewalkInfo,
    SidewalkGeometry,
    Footway,
    Other,
}

impl FeatureClass {
    pub const ALL: [FeatureClass; 5] = [
        FeatureClass::RoadNoSidewalkInfo,
        FeatureClass::RoadWithSidewalkInfo,
        FeatureClass::SidewalkGeometry,
        FeatureClass::Footway,
        FeatureClass::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureClass::RoadNoSidewalkInfo => "road_no_sidewalk_info",
            FeatureClass::RoadWithSidewalkInfo => "road_with_sidewalk_info",
            FeatureClass::SidewalkGeometry => "sidewalk_geometry",
            FeatureClass::Footway => "footway",
            FeatureClass::Other => "other",
        }
    }

    pub fn is_road(&self) -> bool {
        matches!(
            self,
            FeatureClass::RoadNoSidewalkInfo | FeatureClass::RoadWithSidewalkInfo
        )
    }
}

impl std::fmt::Display for FeatureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tag vocabulary driving classification. All comparisons are
/// case-sensitive on the raw tag strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Highway values that cannot have sidewalks along them.
    pub excluded_highways: BTreeSet<String>,
    /// `sidewalk=*` values that count as sidewalk information.
    pub sidewalk_info_values: BTreeSet<String>,
    /// Attribute keys whose availability is reported for sidewalk geometries.
    pub tracked_attributes: Vec<String>,
}

impl Default for ClassifierConfig {
    fn default() -> ClassifierConfig {
        let strings = |items: &[&str]| items.iter().map(|s| s.to_string()).collect();
        ClassifierConfig {
            excluded_highways: strings(&[
                "footway",
                "escape",
                "raceway",
                "busway",
                "bridleway",
                "path",
                "cycleway",
                "construction",
                "corridor",
            ]),
            sidewalk_info_values: strings(&["both", "right", "left", "yes"]),
            tracked_attributes: [
                "surface",
                "width",
                "smoothness",
                "kerb",
                "wheelchair",
                "tactile_paving",
                "incline",
                "lit",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.excluded_highways.is_empty() {
            return Err(Error::Config("excluded_highways must be non-empty".into()));
        }
        if self.sidewalk_info_values.is_empty() {
            return Err(Error::Config("sidewalk_info_values must be non-empty".into()));
        }
        if self.tracked_attributes.is_empty() {
            return Err(Error::Config("tracked_attributes must be non-empty".into()));
        }
        Ok(())
    }
}

/// Total, deterministic mapping from a tag set to its class.
///
/// Decision order: footway sidewalks, plain footways, excluded highway
/// types, roads with sidewalk info, remaining roads, everything else.
pub fn classify_way(tags: &TagMap, cfg: &ClassifierConfig) -> FeatureClass {
    let Some(highway) = tags.get("highway") else {
        return FeatureClass::Other;
    };
    if highway == "footway" {
        return if tags.get("footway").map(String::as_str) == Some("sidewalk") {
            FeatureClass::SidewalkGeometry
        } else {
            FeatureClass::Footway
        };
    }
    if cfg.excluded_highways.contains(highway) {
        return FeatureClass::Other;
    }
    match tags.get("sidewalk") {
        Some(value) if cfg.sidewalk_info_values.contains(value) => {
            FeatureClass::RoadWithSidewalkInfo
        }
        _ => FeatureClass::RoadNoSidewalkInfo,
    }
}

/// The subset of tracked attribute keys present with non-empty values.
pub fn extract_attributes<'a>(tags: &TagMap, cfg: &'a ClassifierConfig) -> BTreeSet<&'a str> {
    cfg.tracked_attributes
        .iter()
        .filter(|key| tags.get(key.as_str()).is_some_and(|v| !v.is_empty()))
        .map(String::as_str)
        .collect()
}

/// Fraction of tag sets carrying each tracked attribute; None values when
/// the input is empty.
pub fn attribute_fractions<'a, I>(tag_sets: I, cfg: &ClassifierConfig) -> BTreeMap<String, Option<f64>>
where
    I: IntoIterator<Item = &'a TagMap>,
{
    let mut counts: BTreeMap<&str, u64> = cfg
        .tracked_attributes
        .iter()
        .map(|k| (k.as_str(), 0))
        .collect();
    let mut total = 0u64;
    for tags in tag_sets {
        total += 1;
        for key in extract_attributes(tags, cfg) {
            *counts.get_mut(key).expect("tracked key") += 1;
        }
    }
    counts
        .into_iter()
        .map(|(key, n)| {
            let fraction = (total > 0).then(|| n as f64 / total as f64);
            (key.to_string(), fraction)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(pairs: &[(&str, &str)]) -> TagMap {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn refinement_tag_marks_road_with_info() {
        let cfg = ClassifierConfig::default();
        assert_eq!(
            classify_way(&tags(&[("highway", "residential"), ("sidewalk", "both")]), &cfg),
            FeatureClass::RoadWithSidewalkInfo
        );
    }

    #[test]
    fn footway_sidewalk_is_sidewalk_geometry() {
        let cfg = ClassifierConfig::default();
        assert_eq!(
            classify_way(&tags(&[("highway", "footway"), ("footway", "sidewalk")]), &cfg),
            FeatureClass::SidewalkGeometry
        );
    }

    #[test]
    fn excluded_highway_beats_sidewalk_tag() {
        let cfg = ClassifierConfig::default();
        assert_eq!(
            classify_way(&tags(&[("highway", "cycleway"), ("sidewalk", "yes")]), &cfg),
            FeatureClass::Other
        );
    }

    #[test]
    fn no_highway_tag_is_other() {
        let cfg = ClassifierConfig::default();
        assert_eq!(classify_way(&TagMap::new(), &cfg), FeatureClass::Other);
    }

    #[test]
    fn plain_road_lacks_info() {
        let cfg = ClassifierConfig::default();
        assert_eq!(
            classify_way(&tags(&[("highway", "primary")]), &cfg),
            FeatureClass::RoadNoSidewalkInfo
        );
    }

    #[test]
    fn negative_sidewalk_values_carry_no_info() {
        let cfg = ClassifierConfig::default();
        for value in ["no", "none", "separate"] {
            assert_eq!(
                classify_way(&tags(&[("highway", "residential"), ("sidewalk", value)]), &cfg),
                FeatureClass::RoadNoSidewalkInfo,
                "sidewalk={value}"
            );
        }
    }

    #[test]
    fn bare_footway_is_footway() {
        let cfg = ClassifierConfig::default();
        assert_eq!(
            classify_way(&tags(&[("highway", "footway")]), &cfg),
            FeatureClass::Footway
        );
        assert_eq!(
            classify_way(&tags(&[("highway", "footway"), ("footway", "crossing")]), &cfg),
            FeatureClass::Footway
        );
    }

    #[test]
    fn matching_is_case_sensitive() {
        let cfg = ClassifierConfig::default();
        assert_eq!(
            classify_way(&tags(&[("highway", "residential"), ("sidewalk", "Both")]), &cfg),
            FeatureClass::RoadNoSidewalkInfo
        );
    }

    #[test]
    fn extracts_present_non_empty_attributes() {
        let cfg = ClassifierConfig::default();
        let present = extract_attributes(
            &tags(&[("highway", "footway"), ("footway", "sidewalk"), ("surface", "concrete")]),
            &cfg,
        );
        assert_eq!(present.into_iter().collect::<Vec<_>>(), vec!["surface"]);

        let empty_value = extract_attributes(&tags(&[("surface", ""), ("width", "1.5")]), &cfg);
        assert_eq!(empty_value.into_iter().collect::<Vec<_>>(), vec!["width"]);

        let several = extract_attributes(
            &tags(&[
                ("highway", "footway"),
                ("footway", "sidewalk"),
                ("surface", "concrete"),
                ("width", "2"),
                ("kerb", "lowered"),
            ]),
            &cfg,
        );
        assert_eq!(
            several.into_iter().collect::<Vec<_>>(),
            vec!["kerb", "surface", "width"]
        );
    }

    #[test]
    fn config_rejects_empty_sets() {
        let mut cfg = ClassifierConfig::default();
        cfg.sidewalk_info_values.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_loads_from_json() {
        let cfg: ClassifierConfig = serde_json::from_str(
            r#"{
                "excluded_highways": ["cycleway"],
                "sidewalk_info_values": ["yes"],
                "tracked_attributes": ["surface"]
            }"#,
        )
        .unwrap();
        assert!(cfg.excluded_highways.contains("cycleway"));
        assert_eq!(
            classify_way(
                &tags(&[("highway", "residential"), ("sidewalk", "both")]),
                &cfg
            ),
            FeatureClass::RoadNoSidewalkInfo
        );
    }
}
