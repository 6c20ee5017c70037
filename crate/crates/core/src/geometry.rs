//! Coordinate frames, rigid transforms, planar homographies and their
//! estimation from point correspondences.
//!
//! Conventions used throughout the crate: right-handed frames, meters and
//! radians internally, pixels only at camera/projector boundaries. Cameras
//! look down +z with x to the right and y down.

use nalgebra::{DMatrix, Matrix3, Point2, Point3, Rotation3, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("frame mismatch: cannot chain {left:?} -> {right:?}")]
    FrameMismatch { left: Frame, right: Frame },
    #[error("point maps to infinity (w = {0:e})")]
    PointAtInfinity(f64),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("plane lies behind the camera")]
    BehindCamera,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
}

/// Named coordinate frames of the projector/headset rig.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    World,
    Projector,
    Camera,
    Screen,
    Headset,
    Mirror,
}

/// Rigid motion mapping points expressed in `from` into `to`:
/// `p_to = rotation * p_from + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    from: Frame,
    to: Frame,
}

impl RigidTransform {
    /// Builds a transform, projecting `rotation` onto the nearest proper
    /// rotation so the orthonormality invariant always holds.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>, from: Frame, to: Frame) -> Self {
        Self {
            rotation: nearest_rotation(&rotation),
            translation,
            from,
            to,
        }
    }

    pub fn identity(from: Frame, to: Frame) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            from,
            to,
        }
    }

    pub fn from_translation(t: Vector3<f64>, from: Frame, to: Frame) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
            from,
            to,
        }
    }

    /// Rotation given as roll/pitch/yaw about x/y/z (applied z·y·x), plus translation.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64, t: Vector3<f64>, from: Frame, to: Frame) -> Self {
        let r = Rotation3::from_euler_angles(roll, pitch, yaw);
        Self {
            rotation: *r.matrix(),
            translation: t,
            from,
            to,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn from_frame(&self) -> Frame {
        self.from
    }

    pub fn to_frame(&self) -> Frame {
        self.to
    }

    /// Relabels the frames without touching the motion.
    pub fn with_frames(mut self, from: Frame, to: Frame) -> Self {
        self.from = from;
        self.to = to;
        self
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Largest deviation of `self` from `other` as (translation m, rotation rad).
    pub fn distance_to(&self, other: &RigidTransform) -> (f64, f64) {
        let dt = (self.translation - other.translation).norm();
        let rel = self.rotation.transpose() * other.rotation;
        let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        (dt, cos.acos())
    }
}

/// `a` followed by `b`; requires `a.to == b.from`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> Result<RigidTransform, GeometryError> {
    if a.to != b.from {
        return Err(GeometryError::FrameMismatch {
            left: a.to,
            right: b.from,
        });
    }
    Ok(RigidTransform {
        rotation: b.rotation * a.rotation,
        translation: b.rotation * a.translation + b.translation,
        from: a.from,
        to: b.to,
    })
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    let rt = t.rotation.transpose();
    RigidTransform {
        rotation: rt,
        translation: -(rt * t.translation),
        from: t.to,
        to: t.from,
    }
}

/// Nearest proper rotation in the Frobenius sense (polar decomposition via SVD).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Matrix3::identity(),
    };
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// Planar projective map, stored with its largest-magnitude entry equal to +1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
    from: Frame,
    to: Frame,
}

impl Homography {
    pub fn new(h: Matrix3<f64>, from: Frame, to: Frame) -> Result<Self, GeometryError> {
        let h = normalize_scale(&h).ok_or(GeometryError::DegenerateConfiguration("zero matrix"))?;
        let det = h.determinant();
        if !det.is_finite() || det.abs() < 1e-15 {
            return Err(GeometryError::DegenerateConfiguration("singular homography"));
        }
        Ok(Self { h, from, to })
    }

    pub fn identity(from: Frame, to: Frame) -> Self {
        Self {
            h: Matrix3::identity(),
            from,
            to,
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn from_frame(&self) -> Frame {
        self.from
    }

    pub fn to_frame(&self) -> Frame {
        self.to
    }

    pub fn inverse(&self) -> Result<Homography, GeometryError> {
        let inv = self
            .h
            .try_inverse()
            .ok_or(GeometryError::DegenerateConfiguration("singular homography"))?;
        Homography::new(inv, self.to, self.from)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Homography) -> Result<Homography, GeometryError> {
        if self.to != next.from {
            return Err(GeometryError::FrameMismatch {
                left: self.to,
                right: next.from,
            });
        }
        Homography::new(next.h * self.h, self.from, next.to)
    }

    pub fn apply(&self, p: &Point2<f64>) -> Result<Point2<f64>, GeometryError> {
        apply_homography(self, p)
    }

    /// Largest absolute entry difference after both are scale-normalized.
    pub fn max_entry_diff(&self, other: &Homography) -> f64 {
        (self.h - other.h).abs().max()
    }
}

fn normalize_scale(h: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let mut pivot = 0.0_f64;
    for v in h.iter() {
        if v.abs() > pivot.abs() {
            pivot = *v;
        }
    }
    if pivot == 0.0 || !pivot.is_finite() {
        None
    } else {
        Some(h / pivot)
    }
}

pub fn apply_homography(h: &Homography, p: &Point2<f64>) -> Result<Point2<f64>, GeometryError> {
    let v = h.h * Vector3::new(p.x, p.y, 1.0);
    if v.z.abs() < 1e-12 {
        return Err(GeometryError::PointAtInfinity(v.z));
    }
    Ok(Point2::new(v.x / v.z, v.y / v.z))
}

/// Source/target point pairs feeding homography estimation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<(Point2<f64>, Point2<f64>)>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<(Point2<f64>, Point2<f64>)>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn push(&mut self, src: Point2<f64>, dst: Point2<f64>) {
        self.pairs.push((src, dst));
    }

    /// Largest distance between `h(src)` and `dst` over all pairs.
    pub fn max_reprojection_error(&self, h: &Homography) -> f64 {
        self.pairs
            .iter()
            .map(|(s, d)| match h.apply(s) {
                Ok(p) => (p - d).norm(),
                Err(_) => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    pub fn rms_reprojection_error(&self, h: &Homography) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        let sum: f64 = self
            .pairs
            .iter()
            .map(|(s, d)| match h.apply(s) {
                Ok(p) => (p - d).norm_squared(),
                Err(_) => f64::INFINITY,
            })
            .sum();
        (sum / self.pairs.len() as f64).sqrt()
    }
}

// Isotropic normalization: centroid to the origin, mean distance sqrt(2).
fn normalizing_transform(pts: &[Point2<f64>]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(ax, ay), p| (ax + p.x, ay + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = pts
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn collinear(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>, scale: f64) -> bool {
    let cross = (b - a).perp(&(c - a));
    cross.abs() <= 1e-12 * scale * scale
}

/// Normalized DLT: maps `pairs[i].0` onto `pairs[i].1`.
pub fn estimate_homography(c: &CorrespondenceSet) -> Result<Homography, GeometryError> {
    estimate_homography_between(c, Frame::Camera, Frame::Projector)
}

/// As [`estimate_homography`], labelling the result with explicit frames.
pub fn estimate_homography_between(c: &CorrespondenceSet, from: Frame, to: Frame) -> Result<Homography, GeometryError> {
    let n = c.len();
    if n < 4 {
        return Err(GeometryError::DegenerateConfiguration("fewer than 4 correspondences"));
    }
    if c.pairs
        .iter()
        .any(|(s, d)| !(s.x.is_finite() && s.y.is_finite() && d.x.is_finite() && d.y.is_finite()))
    {
        return Err(GeometryError::DegenerateConfiguration("non-finite point"));
    }
    let src: Vec<Point2<f64>> = c.pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Point2<f64>> = c.pairs.iter().map(|p| p.1).collect();

    if n == 4 {
        let extent = src.iter().flat_map(|p| [p.x.abs(), p.y.abs()]).fold(1.0, f64::max);
        for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
            if collinear(&src[i], &src[j], &src[k], extent) {
                return Err(GeometryError::DegenerateConfiguration("three collinear source points"));
            }
        }
    }

    let ts = normalizing_transform(&src);
    let td = normalizing_transform(&dst);

    // Pad to at least 9 rows so the SVD exposes the full right null space.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (s, d)) in src.iter().zip(&dst).enumerate() {
        let s = ts * Vector3::new(s.x, s.y, 1.0);
        let d = td * Vector3::new(d.x, d.y, 1.0);
        let (x, y) = (s.x, s.y);
        let (u, v) = (d.x, d.y);
        let r0 = 2 * k;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        let r1 = r0 + 1;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::DegenerateConfiguration("SVD failed"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = order[0];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if second <= 1e-10 * largest {
        return Err(GeometryError::DegenerateConfiguration("rank-deficient design matrix"));
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td
        .try_inverse()
        .ok_or(GeometryError::DegenerateConfiguration("degenerate target points"))?;
    Homography::new(td_inv * hn * ts, from, to)
}

/// Pinhole intrinsics (no distortion).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(GeometryError::InvalidIntrinsics("principal point outside the image"));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Square pixels, centered principal point, horizontal field of view in radians.
    pub fn from_hfov(hfov: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if !(hfov > 0.0 && hfov < std::f64::consts::PI) {
            return Err(GeometryError::InvalidIntrinsics("field of view out of range"));
        }
        let f = (width as f64 / 2.0) / (hfov / 2.0).tan();
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn principal_point(&self) -> Point2<f64> {
        Point2::new(self.cx, self.cy)
    }

    /// Projects a camera-frame point; `None` when it is not in front of the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<Point2<f64>> {
        if p.z <= 1e-12 {
            return None;
        }
        Some(Point2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Unit-depth ray through a pixel.
    pub fn backproject(&self, px: &Point2<f64>) -> Vector3<f64> {
        Vector3::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, px: &Point2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }
}

/// Camera-from-plane pose from a homography mapping plane coordinates
/// (`plane_scale` meters per unit) to camera pixels.
pub fn planar_pose_from_homography(
    h: &Homography,
    k: &CameraIntrinsics,
    plane_scale: f64,
) -> Result<RigidTransform, GeometryError> {
    if !(plane_scale > 0.0) {
        return Err(GeometryError::DegenerateConfiguration("plane scale must be positive"));
    }
    let unscale = Matrix3::new(1.0 / plane_scale, 0.0, 0.0, 0.0, 1.0 / plane_scale, 0.0, 0.0, 0.0, 1.0);
    let m = k.inverse_matrix() * h.matrix() * unscale;
    let m1 = m.column(0).into_owned();
    let m2 = m.column(1).into_owned();
    let m3 = m.column(2).into_owned();
    let norm = 0.5 * (m1.norm() + m2.norm());
    if norm <= 0.0 || !norm.is_finite() {
        return Err(GeometryError::DegenerateConfiguration(
            "homography has no in-plane scale",
        ));
    }
    let mut lambda = 1.0 / norm;
    if (lambda * m3).z < 0.0 {
        lambda = -lambda;
    }
    let t = lambda * m3;
    if !(t.z > 0.0) {
        return Err(GeometryError::BehindCamera);
    }
    let r1 = lambda * m1;
    let r2 = lambda * m2;
    let r3 = r1.cross(&r2);
    let r = Matrix3::from_columns(&[r1, r2, r3]);
    Ok(RigidTransform::new(r, t, Frame::Screen, Frame::Camera))
}
