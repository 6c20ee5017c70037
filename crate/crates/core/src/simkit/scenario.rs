//! Flat `key = value` scenario files. `#` starts a comment; blank lines are
//! ignored; every key is optional, unknown or repeated keys are errors.
//! See `docs/scenario.md` for the schema.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use nalgebra::{Rotation3, Vector3};

use super::{HeadsetModel, MotionKind, MotionScript, PipelineConfig, ProjectorModel, Scene, Toggles, TrackingCamera};
use crate::geometry::{Frame, RigidTransform};
use crate::optics::EyepieceModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}: key '{k}': {}", self.message),
            (None, Some(k)) => write!(f, "key '{k}': {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, None) => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

const KEYS: &[&str] = &[
    "motion",
    "speed",
    "extent",
    "start_x_m",
    "start_y_m",
    "start_z_m",
    "start_yaw_deg",
    "start_pitch_deg",
    "start_roll_deg",
    "pivot_m",
    "duration_s",
    "seed",
    "noise_px",
    "axial_offset_m",
    "deadband_px",
    "projector_cone_deg",
    "marker_size_m",
    "capture_hz",
    "detect_hz",
    "display_hz",
    "capture_delay_s",
    "detect_delay_s",
    "display_delay_s",
    "capture_phase_s",
    "detect_phase_s",
    "display_phase_s",
    "warp",
    "steer",
    "refocus",
];

/// A complete, validated simulation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scene: Scene,
    pub motion: MotionScript,
    pub pipeline: PipelineConfig,
    pub duration: f64,
    pub toggles: Toggles,
}

struct Entry {
    line: usize,
    value: String,
}

struct Values {
    map: HashMap<String, Entry>,
}

impl Values {
    fn err(&self, key: &str, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            line: self.map.get(key).map(|e| e.line).filter(|&l| l > 0),
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, ScenarioError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(e) => match e.value.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.err(key, format!("'{}' is not a finite number", e.value))),
            },
        }
    }

    fn non_negative(&self, key: &str, default: f64) -> Result<f64, ScenarioError> {
        let v = self.f64(key, default)?;
        if v < 0.0 {
            return Err(self.err(key, "must be non-negative"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ScenarioError> {
        let v = self.f64(key, default)?;
        if !(v > 0.0) {
            return Err(self.err(key, "must be positive"));
        }
        Ok(v)
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, ScenarioError> {
        match self.map.get(key).map(|e| e.value.as_str()) {
            None => Ok(default),
            Some("on" | "true" | "1") => Ok(true),
            Some("off" | "false" | "0") => Ok(false),
            Some(v) => Err(self.err(key, format!("'{v}' is not on/off"))),
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses `text`, then applies `key=value` overrides that replace any
    /// value given in the file.
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, ScenarioError> {
        let mut map = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return Err(ScenarioError {
                    line: Some(line),
                    key: None,
                    message: format!("expected 'key = value', got '{content}'"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            let fail = |message: &str| ScenarioError {
                line: Some(line),
                key: Some(k.to_string()),
                message: message.to_string(),
            };
            if !KEYS.contains(&k) {
                return Err(fail("unknown key"));
            }
            if map.contains_key(k) {
                return Err(fail("repeated key"));
            }
            map.insert(
                k.to_string(),
                Entry {
                    line,
                    value: v.to_string(),
                },
            );
        }
        for (k, v) in overrides {
            if !KEYS.contains(&k.as_str()) {
                return Err(ScenarioError {
                    line: None,
                    key: Some(k.clone()),
                    message: "unknown key".into(),
                });
            }
            map.insert(
                k.clone(),
                Entry {
                    line: 0,
                    value: v.trim().to_string(),
                },
            );
        }
        Self::build(&Values { map })
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
            line: None,
            key: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    fn build(v: &Values) -> Result<Self, ScenarioError> {
        let kind = match v.map.get("motion") {
            None => MotionKind::Static,
            Some(e) => MotionKind::parse(&e.value)
                .ok_or_else(|| v.err("motion", format!("'{}' is not a motion kind", e.value)))?,
        };
        let unit = if kind.is_rotation() { 1f64.to_radians() } else { 1.0 };
        let speed = v.non_negative("speed", 0.0)? * unit;
        let extent = v.non_negative("extent", 0.0)? * unit;

        let t = Vector3::new(
            v.f64("start_x_m", 0.0)?,
            v.f64("start_y_m", 0.0)?,
            v.positive("start_z_m", 1.0)?,
        );
        let yaw = v.f64("start_yaw_deg", 0.0)?.to_radians();
        let pitch = v.f64("start_pitch_deg", 0.0)?.to_radians();
        let roll = v.f64("start_roll_deg", 0.0)?.to_radians();
        // y is vertical (down), so yaw turns about y and pitch about x.
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
        let start = RigidTransform::new(r.into_inner(), t, Frame::Headset, Frame::World);

        let mut motion = MotionScript::new(kind, speed, extent, start).map_err(|e| v.err("motion", e.to_string()))?;
        motion.pivot = Vector3::new(0.0, 0.0, v.non_negative("pivot_m", 0.25)?);

        let mut projector = ProjectorModel::default();
        if v.map.contains_key("projector_cone_deg") {
            projector.cone = v.positive("projector_cone_deg", 0.0)?.to_radians();
        }
        projector
            .validate()
            .map_err(|e| v.err("projector_cone_deg", e.to_string()))?;
        let mut camera =
            TrackingCamera::coaxial_with(&projector).map_err(|e| v.err("projector_cone_deg", e.to_string()))?;
        camera.noise_sigma = v.non_negative("noise_px", 0.0)?;
        camera.axial_offset = v.non_negative("axial_offset_m", camera.axial_offset)?;
        camera.frame_rate = v.positive("capture_hz", 130.0)?;

        let marker = v.positive("marker_size_m", 0.010)?;
        let headset = HeadsetModel::with_corner_markers(EyepieceModel::default(), marker, 0.002, start);
        let scene = Scene::new(projector, camera, headset, v.non_negative("deadband_px", 2.0)?)
            .map_err(|e| v.err("deadband_px", e.to_string()))?;

        let mut pipeline = PipelineConfig::with_rates(
            scene.camera.frame_rate,
            v.positive("detect_hz", 130.0)?,
            v.positive("display_hz", 100.0)?,
        );
        pipeline.capture_delay = v.non_negative("capture_delay_s", pipeline.capture_delay)?;
        pipeline.detect_delay = v.non_negative("detect_delay_s", pipeline.detect_delay)?;
        pipeline.display_delay = v.non_negative("display_delay_s", pipeline.display_delay)?;
        pipeline.capture_phase = v.non_negative("capture_phase_s", 0.0)?;
        pipeline.detect_phase = v.non_negative("detect_phase_s", 0.0)?;
        pipeline.display_phase = v.non_negative("display_phase_s", 0.0)?;
        pipeline.seed = match v.map.get("seed") {
            None => 0,
            Some(e) => e
                .value
                .parse()
                .map_err(|_| v.err("seed", format!("'{}' is not a non-negative integer", e.value)))?,
        };

        Ok(Self {
            scene,
            motion,
            pipeline,
            duration: v.positive("duration_s", 5.0)?,
            toggles: Toggles {
                warp: v.flag("warp", true)?,
                steer: v.flag("steer", true)?,
                refocus: v.flag("refocus", true)?,
            },
        })
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self::parse("").expect("empty scenario")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let s = Scenario::default();
        assert_eq!(s.motion.kind, MotionKind::Static);
        assert_eq!(s.pipeline, PipelineConfig::default());
        assert_eq!(s.duration, 5.0);
        assert_eq!(s.toggles, Toggles::default());
        assert_eq!(s.scene, Scene::default());
    }

    #[test]
    fn parses_keys_and_comments() {
        let s = Scenario::parse(
            "# yaw test\nmotion = yaw   # about y\nspeed = 20\nextent=20\n\nseed = 42\nsteer = off\nnoise_px = 0.5\n",
        )
        .unwrap();
        assert_eq!(s.motion.kind, MotionKind::Yaw);
        assert!((s.motion.speed - 20f64.to_radians()).abs() < 1e-15);
        assert_eq!(s.pipeline.seed, 42);
        assert!(!s.toggles.steer);
        assert_eq!(s.scene.camera.noise_sigma, 0.5);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = Scenario::parse("speed = 1\nwobble = 3\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("wobble"));
        assert_eq!(e.line, Some(2));
        assert!(e.to_string().contains("wobble"));
    }

    #[test]
    fn overrides_replace_file_values() {
        let o = vec![("seed".to_string(), "9".to_string())];
        assert_eq!(Scenario::parse_with_overrides("seed = 1", &o).unwrap().pipeline.seed, 9);
        let bad = vec![("nope".to_string(), "1".to_string())];
        assert!(Scenario::parse_with_overrides("", &bad).is_err());
    }

    #[test]
    fn bad_values_are_rejected() {
        assert_eq!(
            Scenario::parse("speed = fast").unwrap_err().key.as_deref(),
            Some("speed")
        );
        assert_eq!(
            Scenario::parse("capture_hz = 0").unwrap_err().key.as_deref(),
            Some("capture_hz")
        );
        assert_eq!(
            Scenario::parse("motion = spin").unwrap_err().key.as_deref(),
            Some("motion")
        );
        assert_eq!(Scenario::parse("seed = 1\nseed = 2").unwrap_err().line, Some(2));
        assert!(Scenario::parse("just words").is_err());
        assert_eq!(
            Scenario::parse("projector_cone_deg = 50").unwrap_err().key.as_deref(),
            Some("projector_cone_deg")
        );
    }
}
