//! Discrete-event model of the capture → detect → steer/display loop.
//!
//! Each stage ticks periodically and takes the newest finished upstream
//! result (stale ones are dropped). Time is kept in integer nanoseconds so
//! that ties are exact; ties resolve capture, then detect, then display.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::{self, Write};

use nalgebra::{Matrix3, Point2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::observe::{compute_screen_offset, estimate_throw, observe_markers, steer_rotation, MarkerObservation};
use super::{MotionScript, Scene, SimError};
use crate::geometry::{invert, CameraIntrinsics};
use crate::optics::focus_power_for_throw;
use crate::steering::{steer_update, MirrorState};

pub const TRACE_HEADER: &str =
    "t_s,stage,center_x_px,center_y_px,dx_px,dy_px,theta_rad,phi_rad,lens_diopter,markers_visible,latency_s";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub capture_rate: f64,
    pub detect_rate: f64,
    pub display_rate: f64,
    /// Processing delay per stage, seconds.
    pub capture_delay: f64,
    pub detect_delay: f64,
    pub display_delay: f64,
    /// Time of each stage's first tick, seconds.
    pub capture_phase: f64,
    pub detect_phase: f64,
    pub display_phase: f64,
    pub seed: u64,
}

impl PipelineConfig {
    /// Rates in Hz; each delay defaults to one period.
    pub fn with_rates(capture: f64, detect: f64, display: f64) -> Self {
        Self {
            capture_rate: capture,
            detect_rate: detect,
            display_rate: display,
            capture_delay: 1.0 / capture,
            detect_delay: 1.0 / detect,
            display_delay: 1.0 / display,
            capture_phase: 0.0,
            detect_phase: 0.0,
            display_phase: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, r) in [
            ("capture_rate", self.capture_rate),
            ("detect_rate", self.detect_rate),
            ("display_rate", self.display_rate),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return Err(SimError::ConfigInvalid(format!("{name} must be positive")));
            }
        }
        for (name, d) in [
            ("capture_delay", self.capture_delay),
            ("detect_delay", self.detect_delay),
            ("display_delay", self.display_delay),
            ("capture_phase", self.capture_phase),
            ("detect_phase", self.detect_phase),
            ("display_phase", self.display_phase),
        ] {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(SimError::ConfigInvalid(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn delay_sum(&self) -> f64 {
        self.capture_delay + self.detect_delay + self.display_delay
    }

    pub fn period_sum(&self) -> f64 {
        1.0 / self.capture_rate + 1.0 / self.detect_rate + 1.0 / self.display_rate
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::with_rates(130.0, 130.0, 100.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Toggles {
    pub warp: bool,
    pub steer: bool,
    pub refocus: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            warp: true,
            steer: true,
            refocus: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Capture,
    Detect,
    Steer,
    Display,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Capture => "capture",
            Stage::Detect => "detect",
            Stage::Steer => "steer",
            Stage::Display => "display",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub t_ns: u64,
    pub stage: Stage,
    /// Index of the capture this event derives from.
    pub source_capture: Option<usize>,
    pub center: Option<Point2<f64>>,
    pub offset: Option<(f64, f64)>,
    pub mirror: Option<(f64, f64)>,
    pub lens_diopter: Option<f64>,
    pub markers_visible: Option<bool>,
    pub latency_ns: Option<u64>,
}

impl TraceEvent {
    fn new(t_ns: u64, stage: Stage) -> Self {
        Self {
            t_ns,
            stage,
            source_capture: None,
            center: None,
            offset: None,
            mirror: None,
            lens_diopter: None,
            markers_visible: None,
            latency_ns: None,
        }
    }

    pub fn t(&self) -> f64 {
        self.t_ns as f64 * 1e-9
    }
}

/// State at one displayed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplaySample {
    pub t: f64,
    pub capture_t: f64,
    /// Projected image center in the viewpoint camera, pixels.
    pub center: Option<Point2<f64>>,
    /// Screen center minus projection center in the tracking camera, pixels.
    pub offset: Option<(f64, f64)>,
    pub theta: f64,
    pub phi: f64,
    pub lens_diopter: Option<f64>,
    /// Projector-side throw behind the lens command.
    pub estimated_throw: Option<f64>,
    pub markers_visible: bool,
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTrace {
    pub events: Vec<TraceEvent>,
    pub samples: Vec<DisplaySample>,
    /// Viewpoint principal point, the reference for trajectory statistics.
    pub viewpoint_center: Point2<f64>,
    /// Camera-pixel offset that the controller ignores.
    pub deadband: f64,
}

impl PipelineTrace {
    pub fn capture_count(&self) -> usize {
        self.events.iter().filter(|e| e.stage == Stage::Capture).count()
    }
}

struct Capture {
    t_ns: u64,
    ready_ns: u64,
    mirror: MirrorState,
    markers: Vec<MarkerObservation>,
}

struct Detection {
    capture: usize,
    ready_ns: u64,
}

fn ns(s: f64) -> u64 {
    (s * 1e9).round() as u64
}

// Event kinds in tie-break order.
const CAPTURE: u8 = 0;
const DETECT: u8 = 1;
const DISPLAY_OUT: u8 = 2;
const DISPLAY_TICK: u8 = 3;

/// Maps camera pixels seen under mirror state `from` into the camera image
/// under mirror state `to`.
fn rotation_compensation(k: &CameraIntrinsics, r_from: &Matrix3<f64>, r_to: &Matrix3<f64>) -> Matrix3<f64> {
    k.matrix() * r_to.transpose() * r_from * k.inverse_matrix()
}

fn apply(m: &Matrix3<f64>, p: &Point2<f64>) -> Point2<f64> {
    let v = m * Vector3::new(p.x, p.y, 1.0);
    Point2::new(v.x / v.z, v.y / v.z)
}

/// Runs the closed loop for `duration` seconds of simulated time.
pub fn run_scenario(
    scene: &Scene,
    motion: &MotionScript,
    pipeline: &PipelineConfig,
    duration: f64,
    toggles: Toggles,
) -> Result<PipelineTrace, SimError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(SimError::ConfigInvalid("duration must be positive".into()));
    }
    scene.validate()?;
    pipeline.validate()?;

    let end = ns(duration);
    let periods = [
        ns(1.0 / pipeline.capture_rate),
        ns(1.0 / pipeline.detect_rate),
        ns(1.0 / pipeline.display_rate),
    ];
    if periods.contains(&0) {
        return Err(SimError::ConfigInvalid("stage rate above 1 GHz".into()));
    }
    let phases = [
        ns(pipeline.capture_phase),
        ns(pipeline.detect_phase),
        ns(pipeline.display_phase),
    ];
    let (d_cap, d_det, d_disp) = (
        ns(pipeline.capture_delay),
        ns(pipeline.detect_delay),
        ns(pipeline.display_delay),
    );

    let cam = &scene.camera;
    let kc = &cam.intrinsics;
    let kp = scene.projector.intrinsics()?;
    let kp_inv = kp.inverse_matrix();
    let mirror = &scene.projector.mirror;
    let h_cp = *scene.camera_to_projector()?.matrix();
    let principal = kc.principal_point();
    let proj_center = kp.principal_point();
    let proj_max = (
        (scene.projector.resolution.0 - 1) as f64,
        (scene.projector.resolution.1 - 1) as f64,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(pipeline.seed);
    let mut headset = scene.headset.clone();
    let mut state = MirrorState::default();
    let mut lens: Option<f64> = None;
    let mut throw: Option<f64> = None;
    let mut target = proj_center;

    let mut captures: Vec<Capture> = Vec::new();
    let mut detections: Vec<Detection> = Vec::new();
    let mut consumed: Option<usize> = None;
    let mut pending_display: Vec<Option<usize>> = Vec::new();

    let mut events = Vec::new();
    let mut samples = Vec::new();

    let mut heap = BinaryHeap::new();
    for (kind, &phase) in [CAPTURE, DETECT, DISPLAY_TICK].iter().zip(phases.iter()) {
        if phase < end {
            heap.push(Reverse((phase, *kind, 0u64)));
        }
    }

    while let Some(Reverse((t, kind, k))) = heap.pop() {
        let now = t as f64 * 1e-9;
        match kind {
            CAPTURE => {
                headset.pose = motion.pose_at(now);
                let markers = observe_markers(cam, &headset, mirror, &state, &mut rng);
                let mut ev = TraceEvent::new(t, Stage::Capture);
                ev.source_capture = Some(captures.len());
                ev.mirror = Some((state.theta, state.phi));
                ev.markers_visible = Some(!markers.is_empty());
                events.push(ev);
                captures.push(Capture {
                    t_ns: t,
                    ready_ns: t + d_cap,
                    mirror: state,
                    markers,
                });
            }
            DETECT => {
                let newest = captures.iter().rposition(|c| c.ready_ns <= t);
                if let Some(c) = newest.filter(|&c| consumed.is_none_or(|done| c > done)) {
                    consumed = Some(c);
                    detections.push(Detection {
                        capture: c,
                        ready_ns: t + d_det,
                    });
                    let mut ev = TraceEvent::new(t, Stage::Detect);
                    ev.source_capture = Some(c);
                    ev.markers_visible = Some(!captures[c].markers.is_empty());
                    events.push(ev);
                }
            }
            DISPLAY_TICK => {
                let newest = detections.iter().rposition(|d| d.ready_ns <= t);
                if pending_display.len() <= k as usize {
                    pending_display.resize(k as usize + 1, None);
                }
                pending_display[k as usize] = newest;
                if newest.is_some() && t + d_disp < end {
                    heap.push(Reverse((t + d_disp, DISPLAY_OUT, k)));
                }
            }
            DISPLAY_OUT => {
                let det = &detections[pending_display[k as usize].expect("scheduled with a detection")];
                let cap = &captures[det.capture];
                headset.pose = motion.pose_at(now);
                let r_now = steer_rotation(mirror, &state);

                let markers: Vec<MarkerObservation> = if cap.mirror.theta == state.theta && cap.mirror.phi == state.phi
                {
                    cap.markers.clone()
                } else {
                    let m = rotation_compensation(kc, &steer_rotation(mirror, &cap.mirror), &r_now);
                    cap.markers
                        .iter()
                        .map(|o| MarkerObservation {
                            id: o.id,
                            corners: o.corners.map(|p| apply(&m, &p)),
                        })
                        .collect()
                };

                let mut offset = None;
                if !markers.is_empty() {
                    let (dx, dy) = compute_screen_offset(&markers, &headset, principal)?;
                    offset = Some((dx, dy));
                    let mut center_cam = Point2::new(principal.x + dx, principal.y + dy);

                    if toggles.steer {
                        let (next, commanded) = steer_update(&scene.controller, mirror, state, (dx, dy), now);
                        if commanded {
                            let m = rotation_compensation(kc, &r_now, &steer_rotation(mirror, &next));
                            center_cam = apply(&m, &center_cam);
                            state = next;
                            let mut ev = TraceEvent::new(t, Stage::Steer);
                            ev.source_capture = Some(det.capture);
                            ev.offset = offset;
                            ev.mirror = Some((state.theta, state.phi));
                            events.push(ev);
                        }
                    }
                    if toggles.refocus {
                        let est = estimate_throw(&markers, cam, &headset)?;
                        let cmd =
                            focus_power_for_throw(est - cam.axial_offset, cam.axial_offset, &scene.projector.lens)
                                .map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
                        throw = Some(est);
                        lens = Some(cmd.diopters);
                    }
                    if toggles.warp {
                        let q = apply(&h_cp, &center_cam);
                        target = Point2::new(q.x.clamp(0.0, proj_max.0), q.y.clamp(0.0, proj_max.1));
                    }
                }
                if !toggles.warp {
                    target = proj_center;
                }

                let center = projected_center(scene, &headset.pose, &steer_rotation(mirror, &state), &kp_inv, &target);
                let latency_ns = t - cap.t_ns;
                let visible = !cap.markers.is_empty();
                let mut ev = TraceEvent::new(t, Stage::Display);
                ev.source_capture = Some(det.capture);
                ev.center = center;
                ev.offset = offset;
                ev.mirror = Some((state.theta, state.phi));
                ev.lens_diopter = lens;
                ev.markers_visible = Some(visible);
                ev.latency_ns = Some(latency_ns);
                events.push(ev);
                samples.push(DisplaySample {
                    t: now,
                    capture_t: cap.t_ns as f64 * 1e-9,
                    center,
                    offset,
                    theta: state.theta,
                    phi: state.phi,
                    lens_diopter: lens,
                    estimated_throw: throw,
                    markers_visible: visible,
                    latency: latency_ns as f64 * 1e-9,
                });
                continue;
            }
            _ => unreachable!(),
        }
        let stream = kind.min(2) as usize;
        let next = phases[stream] + (k + 1) * periods[stream];
        if next < end {
            heap.push(Reverse((next, kind, k + 1)));
        }
    }

    Ok(PipelineTrace {
        events,
        samples,
        viewpoint_center: scene.viewpoint.principal_point(),
        deadband: scene.controller.deadband,
    })
}

/// Where projector pixel `q` lands on the headset screen, in viewpoint pixels.
fn projected_center(
    scene: &Scene,
    pose: &crate::geometry::RigidTransform,
    r_steer: &Matrix3<f64>,
    kp_inv: &Matrix3<f64>,
    q: &Point2<f64>,
) -> Option<Point2<f64>> {
    let dir = r_steer * kp_inv * Vector3::new(q.x, q.y, 1.0);
    let normal = pose.rotation() * Vector3::z();
    let origin = pose.translation();
    let denom = normal.dot(&dir);
    if denom.abs() < 1e-12 {
        return None;
    }
    let s = normal.dot(origin) / denom;
    if !(s > 0.0) {
        return None;
    }
    let local = invert(pose).transform_point(&(dir * s).into());
    Some(scene.viewpoint.project_screen(local.x, local.y))
}

fn fmt_ns(ns: u64) -> String {
    format!("{}.{:09}", ns / 1_000_000_000, ns % 1_000_000_000)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the event log as CSV, one row per event, empty cells where a
/// stage has no value.
pub fn write_trace_csv<W: Write>(trace: &PipelineTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for e in &trace.events {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_ns(e.t_ns),
            e.stage.name(),
            opt(e.center.map(|c| c.x)),
            opt(e.center.map(|c| c.y)),
            opt(e.offset.map(|o| o.0)),
            opt(e.offset.map(|o| o.1)),
            opt(e.mirror.map(|m| m.0)),
            opt(e.mirror.map(|m| m.1)),
            opt(e.lens_diopter),
            opt(e.markers_visible.map(|v| v as u8)),
            opt(e.latency_ns.map(fmt_ns)),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisStats {
    /// Mean of center minus viewpoint principal point.
    pub mean_offset: f64,
    /// Standard deviation about the mean.
    pub rms_jitter: f64,
    /// Largest |center − principal point|.
    pub max_excursion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStats {
    pub x: AxisStats,
    pub y: AxisStats,
    pub mean_latency: f64,
    pub samples: usize,
}

#[derive(Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
    max_abs: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
        self.max_abs = self.max_abs.max(v.abs());
    }

    fn axis(&self) -> AxisStats {
        AxisStats {
            mean_offset: self.mean,
            rms_jitter: (self.m2 / self.n).sqrt(),
            max_excursion: self.max_abs,
        }
    }
}

/// Summary of the projected-center trajectory over displayed frames that
/// landed on the screen plane.
pub fn trajectory_stats(trace: &PipelineTrace) -> Result<TrajectoryStats, SimError> {
    let (mut x, mut y, mut lat) = (Welford::default(), Welford::default(), Welford::default());
    let c0 = trace.viewpoint_center;
    for s in &trace.samples {
        if let Some(c) = s.center {
            x.push(c.x - c0.x);
            y.push(c.y - c0.y);
            lat.push(s.latency);
        }
    }
    if x.n < 2.0 {
        return Err(SimError::EmptyTrace);
    }
    Ok(TrajectoryStats {
        x: x.axis(),
        y: y.axis(),
        mean_latency: lat.mean,
        samples: x.n as usize,
    })
}
