//! Controller parameter presets from the robot's experiment tables,
//! shipped as JSON data files and embedded at build time.

use crate::files::GaitParamsFile;
use crate::gait::GaitParams;
use std::collections::BTreeMap;

const TERRAIN: &str = include_str!("../data/params/terrain.json");
const INCLINE: &str = include_str!("../data/params/incline.json");
const SHAPE_MORPHING: &str = include_str!("../data/params/shape_morphing.json");
const TURNING: &str = include_str!("../data/params/turning.json");
const ROLLING_VARIANTS: &str = include_str!("../data/params/rolling_variants.json");

fn table(json: &str) -> BTreeMap<String, GaitParamsFile> {
    serde_json::from_str(json).expect("embedded preset tables parse")
}

fn from_table(json: &str, key: &str) -> Option<GaitParams> {
    table(json)
        .get(key)
        .map(|p| p.to_params().expect("embedded presets are valid"))
}

/// Quasistatic-gait parameters for a terrain: floor, grass, ice, pebbles,
/// or sand.
pub fn terrain(name: &str) -> Option<GaitParams> {
    from_table(TERRAIN, name)
}

/// Incline-climbing parameters for a tabulated angle in degrees
/// (0, 5, 10, 15, 20, 25, 28).
pub fn incline(degrees: u32) -> Option<GaitParams> {
    from_table(INCLINE, &degrees.to_string())
}

/// Shape-morphing parameters by gait range in mm (90, 120, 150, 180).
pub fn shape_morphing(range_mm: u32) -> Option<GaitParams> {
    from_table(SHAPE_MORPHING, &range_mm.to_string())
}

/// Turning-experiment parameters: turn_in_place, crawling, or gradual.
pub fn turning(name: &str) -> Option<GaitParams> {
    from_table(TURNING, name)
}

/// Rolling-gait variants: dynamic, impact, actions, limbo.
pub fn rolling_variant(name: &str) -> Option<GaitParams> {
    from_table(ROLLING_VARIANTS, name)
}

/// Flat lookup across all preset tables. Incline presets are named
/// `incline_<deg>` and shape-morphing presets `morph_<range>`.
pub fn lookup(name: &str) -> Option<GaitParams> {
    if let Some(deg) = name.strip_prefix("incline_") {
        return deg.parse().ok().and_then(incline);
    }
    if let Some(range) = name.strip_prefix("morph_") {
        return range.parse().ok().and_then(shape_morphing);
    }
    terrain(name)
        .or_else(|| turning(name))
        .or_else(|| rolling_variant(name))
}

/// Every preset name accepted by [`lookup`].
pub fn names() -> Vec<String> {
    let mut out: Vec<String> = table(TERRAIN).into_keys().collect();
    out.extend(table(INCLINE).into_keys().map(|k| format!("incline_{k}")));
    out.extend(table(SHAPE_MORPHING).into_keys().map(|k| format!("morph_{k}")));
    out.extend(table(TURNING).into_keys());
    out.extend(table(ROLLING_VARIANTS).into_keys());
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_table_values() {
        let floor = terrain("floor").unwrap();
        assert_eq!(floor.min_length, 0.100);
        assert_eq!(floor.range_left, 0.090);
        assert_eq!(floor.tolerance_high, 0.12);
        assert_eq!(floor.kp, 8.0);
        assert_eq!(floor.ki, 0.01);
        assert_eq!(floor.kd, 0.5);

        // Incline presets split the tolerance: 20% high / 10% low at 0 deg,
        // range 140 mm everywhere except 180 mm at the steepest angle.
        let incline0 = incline(0).unwrap();
        assert_eq!(incline0.range_left, 0.140);
        assert_eq!(incline0.tolerance_high, 0.20);
        assert_eq!(incline0.tolerance_low, 0.10);
        assert_eq!(incline(28).unwrap().range_left, 0.180);
        assert_eq!(incline(10).unwrap().range_left, 0.140);

        let turn = turning("turn_in_place").unwrap();
        assert_eq!(turn.max_speed, 80.0);
        assert_eq!(turn.range_left, 0.100);

        let gradual = turning("gradual").unwrap();
        assert_eq!(gradual.range_left, 0.080);
        assert_eq!(gradual.range_right, 0.160);

        let dynamic = rolling_variant("dynamic").unwrap();
        assert_eq!(dynamic.tolerance_high, 0.07);
        assert_eq!(dynamic.kp, 10.0);

        assert_eq!(shape_morphing(150).unwrap().tolerance_high, 0.15);
    }

    #[test]
    fn lookup_covers_all_names() {
        for name in names() {
            assert!(lookup(&name).is_some(), "preset {name} must resolve");
        }
        assert!(lookup("no_such_preset").is_none());
    }
}
