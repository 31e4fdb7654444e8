//! Pose representation, quaternion algebra, the pose-regression loss and
//! relocalisation error metrics.
//!
//! Quaternions are stored in `(w, x, y, z)` order everywhere in this crate.
//! Dataset parsers reorder on ingest. A pose is the 7-vector `[x, q]`: the
//! camera position in meters followed by the orientation quaternion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance under which a quaternion counts as unit length.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Default weight of the orientation term of [`posenet_loss`].
pub const DEFAULT_BETA: f64 = 250.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoseError {
    #[error("degenerate quaternion: zero norm")]
    DegenerateQuaternion,
    #[error("rotation matrix is a reflection (det = {det:.6})")]
    Reflection { det: f64 },
    #[error("rotation matrix is not orthonormal (max deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("pose vector must have 7 components, got {0}")]
    LengthMismatch(usize),
    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),
}

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, PoseError> {
        let n = norm3(axis);
        if n == 0.0 {
            return Err(PoseError::DegenerateQuaternion);
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Ok(Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n))
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn normalized(&self) -> Result<Self, PoseError> {
        quat_normalize(*self)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quaternion) -> Self {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotation matrix of a unit quaternion. The input is assumed normalized.
    pub fn to_rotation_matrix(&self) -> Mat3 {
        let Quaternion { w, x, y, z } = *self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        mat_vec(&self.to_rotation_matrix(), v)
    }
}

/// Scales `q` to unit norm.
pub fn quat_normalize(q: Quaternion) -> Result<Quaternion, PoseError> {
    let n = q.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(PoseError::DegenerateQuaternion);
    }
    Ok(Quaternion::new(q.w / n, q.x / n, q.y / n, q.z / n))
}

/// A camera pose: position in meters and a unit orientation quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl Pose {
    /// Builds a pose, normalizing the orientation.
    pub fn new(position: Vec3, orientation: Quaternion) -> Result<Self, PoseError> {
        Ok(Self { position, orientation: quat_normalize(orientation)? })
    }

    pub fn identity() -> Self {
        Self { position: [0.0; 3], orientation: Quaternion::IDENTITY }
    }

    pub fn to_vector(&self) -> PoseVector {
        PoseVector::from_parts(self.position, self.orientation)
    }

    /// Maps a point from the camera frame into the world frame.
    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        let r = self.orientation.rotate(p);
        [r[0] + self.position[0], r[1] + self.position[1], r[2] + self.position[2]]
    }
}

/// The 7-component regression target `[x(3), q(4)]`, quaternion in `(w,x,y,z)` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoseVector(pub [f64; 7]);

impl PoseVector {
    pub const LEN: usize = 7;

    pub fn from_parts(position: Vec3, q: Quaternion) -> Self {
        let [x, y, z] = position;
        PoseVector([x, y, z, q.w, q.x, q.y, q.z])
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, PoseError> {
        let arr: [f64; 7] = values.try_into().map_err(|_| PoseError::LengthMismatch(values.len()))?;
        Ok(PoseVector(arr))
    }

    pub fn position(&self) -> Vec3 {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn quaternion(&self) -> Quaternion {
        Quaternion::new(self.0[3], self.0[4], self.0[5], self.0[6])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Interprets the vector as a pose, normalizing the quaternion part.
    pub fn to_pose(&self) -> Result<Pose, PoseError> {
        Pose::new(self.position(), self.quaternion())
    }
}

/// Euclidean distance between two positions, in meters.
pub fn position_error(x: Vec3, x_hat: Vec3) -> f64 {
    norm3(sub3(x, x_hat))
}

/// Which form of the quaternion angle metric to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleMetric {
    /// `acos(|<q, q̂>|)`: invariant under `q -> -q`, range [0°, 90°].
    #[default]
    Folded,
    /// `acos(<q, q̂>)` as literally written, range [0°, 180°].
    Raw,
}

/// Angle between two orientations in degrees, `acos(|<q, q̂>|)` on normalized inputs.
pub fn angular_error(q: Quaternion, q_hat: Quaternion) -> Result<f64, PoseError> {
    angular_error_with(q, q_hat, AngleMetric::Folded)
}

pub fn angular_error_with(q: Quaternion, q_hat: Quaternion, metric: AngleMetric) -> Result<f64, PoseError> {
    let a = quat_normalize(q)?.to_array();
    let b = quat_normalize(q_hat)?.to_array();
    // acos(<a, b>) == 2 asin(‖a − b‖ / 2) for unit vectors; the chord form keeps
    // precision near zero where acos is ill-conditioned.
    let chord = |s: f64| (0..4).map(|i| (a[i] - s * b[i]).powi(2)).sum::<f64>().sqrt();
    let c = match metric {
        AngleMetric::Folded => chord(1.0).min(chord(-1.0)),
        AngleMetric::Raw => chord(1.0),
    };
    Ok((2.0 * (0.5 * c).min(1.0).asin()).to_degrees())
}

/// Euclidean norm of the 7-component difference, used for cross-architecture comparisons.
pub fn pose_vector_error(p: &PoseVector, p_hat: &PoseVector) -> f64 {
    p.0.iter().zip(p_hat.0.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Slice form of [`pose_vector_error`]; both slices must have 7 components.
pub fn pose_vector_error_slices(p: &[f64], p_hat: &[f64]) -> Result<f64, PoseError> {
    let p = PoseVector::from_slice(p)?;
    let p_hat = PoseVector::from_slice(p_hat)?;
    Ok(pose_vector_error(&p, &p_hat))
}

/// `‖x̂ − x‖₂ + β ‖q̂ − q/‖q‖‖₂`.
pub fn posenet_loss(p_hat: &PoseVector, p_true: &PoseVector, beta: f64) -> Result<f64, PoseError> {
    if !(beta > 0.0) {
        return Err(PoseError::InvalidBeta(beta));
    }
    let qn = quat_normalize(p_true.quaternion())?;
    let pos = position_error(p_hat.position(), p_true.position());
    let q_hat = p_hat.quaternion();
    let ori = norm4(sub4(q_hat.to_array(), qn.to_array()));
    Ok(pos + beta * ori)
}

/// Analytic gradient of [`posenet_loss`] with respect to `p_hat`.
///
/// At a kink of either L2 norm (zero residual) that term contributes the zero subgradient.
pub fn loss_gradient(p_hat: &PoseVector, p_true: &PoseVector, beta: f64) -> Result<[f64; 7], PoseError> {
    if !(beta > 0.0) {
        return Err(PoseError::InvalidBeta(beta));
    }
    let qn = quat_normalize(p_true.quaternion())?;
    let mut g = [0.0; 7];
    let dx = sub3(p_hat.position(), p_true.position());
    let nx = norm3(dx);
    if nx > 0.0 {
        for i in 0..3 {
            g[i] = dx[i] / nx;
        }
    }
    let dq = sub4(p_hat.quaternion().to_array(), qn.to_array());
    let nq = norm4(dq);
    if nq > 0.0 {
        for i in 0..4 {
            g[3 + i] = beta * dq[i] / nq;
        }
    }
    Ok(g)
}

/// Flips the target quaternion sign so it lies in the same hemisphere as the prediction.
pub fn align_hemisphere(target: &PoseVector, prediction: &PoseVector) -> PoseVector {
    if target.quaternion().dot(&prediction.quaternion()) < 0.0 {
        PoseVector::from_parts(target.position(), target.quaternion().neg())
    } else {
        *target
    }
}

/// Maximum allowed deviation of `RᵀR` from identity accepted by [`rotmat_to_quat`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-3;

/// Converts a rotation matrix to a unit quaternion with `w ≥ 0`.
///
/// Branches on the largest of `trace` and the diagonal entries (Shepperd's method).
/// When `w == 0` the first nonzero vector component is made positive.
pub fn rotmat_to_quat(r: &Mat3) -> Result<Quaternion, PoseError> {
    let deviation = orthonormality_deviation(r);
    let det = det3(r);
    if det < 0.0 {
        return Err(PoseError::Reflection { det });
    }
    if deviation > ORTHONORMAL_TOLERANCE || !deviation.is_finite() {
        return Err(PoseError::NotOrthonormal { deviation });
    }
    let trace = r[0][0] + r[1][1] + r[2][2];
    let q = if trace >= r[0][0] && trace >= r[1][1] && trace >= r[2][2] {
        let s = 2.0 * (1.0 + trace).sqrt();
        Quaternion::new(0.25 * s, (r[2][1] - r[1][2]) / s, (r[0][2] - r[2][0]) / s, (r[1][0] - r[0][1]) / s)
    } else if r[0][0] >= r[1][1] && r[0][0] >= r[2][2] {
        let s = 2.0 * (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt();
        Quaternion::new((r[2][1] - r[1][2]) / s, 0.25 * s, (r[0][1] + r[1][0]) / s, (r[0][2] + r[2][0]) / s)
    } else if r[1][1] >= r[2][2] {
        let s = 2.0 * (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt();
        Quaternion::new((r[0][2] - r[2][0]) / s, (r[0][1] + r[1][0]) / s, 0.25 * s, (r[1][2] + r[2][1]) / s)
    } else {
        let s = 2.0 * (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt();
        Quaternion::new((r[1][0] - r[0][1]) / s, (r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s, 0.25 * s)
    };
    Ok(canonical_sign(quat_normalize(q)?))
}

pub fn quat_to_rotmat(q: Quaternion) -> Result<Mat3, PoseError> {
    Ok(quat_normalize(q)?.to_rotation_matrix())
}

fn canonical_sign(q: Quaternion) -> Quaternion {
    let first_nonzero = q.to_array().into_iter().find(|c| *c != 0.0).unwrap_or(0.0);
    if q.w < 0.0 || (q.w == 0.0 && first_nonzero < 0.0) {
        q.neg()
    } else {
        q
    }
}

/// Largest absolute entry of `RᵀR − I`.
pub fn orthonormality_deviation(r: &Mat3) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

pub fn det3(r: &Mat3) -> f64 {
    r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub(crate) fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm3(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn sub4(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

fn norm4(a: [f64; 4]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(quat_normalize(Quaternion::new(2.0, 0.0, 0.0, 0.0)).unwrap(), Quaternion::IDENTITY);
        let q = quat_normalize(Quaternion::new(0.0, 3.0, 4.0, 0.0)).unwrap();
        assert!(close(q.x, 0.6, 1e-15) && close(q.y, 0.8, 1e-15) && q.w == 0.0 && q.z == 0.0);
        assert_eq!(
            quat_normalize(Quaternion::new(0.0, 0.0, 0.0, 0.0)),
            Err(PoseError::DegenerateQuaternion)
        );
    }

    #[test]
    fn position_error_examples() {
        assert_eq!(position_error([0.0; 3], [0.0; 3]), 0.0);
        assert_eq!(position_error([0.0; 3], [3.0, 4.0, 0.0]), 5.0);
        assert!(close(position_error([1.0; 3], [2.0; 3]), 3f64.sqrt(), 1e-15));
    }

    #[test]
    fn angular_error_examples() {
        let id = Quaternion::IDENTITY;
        assert_eq!(angular_error(id, id).unwrap(), 0.0);
        assert!(close(angular_error(id, Quaternion::new(0.0, 1.0, 0.0, 0.0)).unwrap(), 90.0, 1e-12));
        let half = Quaternion::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0);
        assert!(close(angular_error(id, half).unwrap(), 45.0, 1e-9));
        assert!(angular_error(id, Quaternion::new(0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn raw_metric_is_sign_sensitive() {
        let id = Quaternion::IDENTITY;
        assert!(close(angular_error_with(id, id.neg(), AngleMetric::Raw).unwrap(), 180.0, 1e-12));
        assert_eq!(angular_error_with(id, id.neg(), AngleMetric::Folded).unwrap(), 0.0);
    }

    #[test]
    fn pose_vector_error_examples() {
        let p = PoseVector([0.1, 0.2, 0.3, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(pose_vector_error(&p, &p), 0.0);
        let mut a = [0.0; 7];
        a[0] = 3.0;
        a[1] = 4.0;
        assert_eq!(pose_vector_error(&PoseVector(a), &PoseVector([0.0; 7])), 5.0);
        let mut b = [0.0; 7];
        b[3] = 1.0;
        assert_eq!(pose_vector_error(&PoseVector(b), &PoseVector([0.0; 7])), 1.0);
        assert_eq!(pose_vector_error_slices(&[0.0; 6], &[0.0; 7]), Err(PoseError::LengthMismatch(6)));
    }

    #[test]
    fn loss_examples() {
        let truth = PoseVector::from_parts([1.0, 2.0, 3.0], Quaternion::new(2.0, 0.0, 0.0, 0.0));
        let perfect = PoseVector::from_parts([1.0, 2.0, 3.0], Quaternion::IDENTITY);
        assert_eq!(posenet_loss(&perfect, &truth, 250.0).unwrap(), 0.0);

        let shifted = PoseVector::from_parts([4.0, 6.0, 3.0], Quaternion::IDENTITY);
        for beta in [0.5, 1.0, 250.0] {
            assert_eq!(posenet_loss(&shifted, &truth, beta).unwrap(), 5.0);
        }

        let off = PoseVector::from_parts([1.0, 2.0, 3.0], Quaternion::new(1.0, 0.1, 0.0, 0.0));
        assert!(close(posenet_loss(&off, &truth, 2.0).unwrap(), 0.2, 1e-15));

        let zero_q = PoseVector::from_parts([0.0; 3], Quaternion::new(0.0, 0.0, 0.0, 0.0));
        assert_eq!(posenet_loss(&perfect, &zero_q, 1.0), Err(PoseError::DegenerateQuaternion));
        assert!(matches!(posenet_loss(&perfect, &truth, 0.0), Err(PoseError::InvalidBeta(_))));
    }

    #[test]
    fn gradient_examples() {
        let truth = PoseVector::from_parts([1.0, 2.0, 3.0], Quaternion::IDENTITY);
        assert_eq!(loss_gradient(&truth, &truth, 250.0).unwrap(), [0.0; 7]);
        let p = PoseVector::from_parts([2.0, 2.0, 3.0], Quaternion::IDENTITY);
        assert_eq!(loss_gradient(&p, &truth, 250.0).unwrap(), [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rotmat_examples() {
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(rotmat_to_quat(&id).unwrap(), Quaternion::IDENTITY);
        let rz = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(rotmat_to_quat(&rz).unwrap(), Quaternion::new(0.0, 0.0, 0.0, 1.0));
        let reflect = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];
        assert!(matches!(rotmat_to_quat(&reflect), Err(PoseError::Reflection { .. })));
        let skew = [[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(matches!(rotmat_to_quat(&skew), Err(PoseError::NotOrthonormal { .. })));
    }

    fn quat_strategy() -> impl Strategy<Value = Quaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-6)
            .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
    }

    fn vec3_strategy() -> impl Strategy<Value = Vec3> {
        [-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64]
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(q in quat_strategy()) {
            let once = quat_normalize(q).unwrap();
            let twice = quat_normalize(once).unwrap();
            prop_assert!(once.is_unit());
            for (a, b) in once.to_array().iter().zip(twice.to_array()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn angular_error_properties(q in quat_strategy(), r in quat_strategy()) {
            let e = angular_error(q, r).unwrap();
            prop_assert!((0.0..=90.0).contains(&e));
            prop_assert!((e - angular_error(r, q).unwrap()).abs() <= 1e-12);
            prop_assert!(angular_error(q, q).unwrap() < 1e-6);
            prop_assert!(angular_error(q, q.neg()).unwrap() < 1e-6);
        }

        #[test]
        fn triangle_inequality(a in vec3_strategy(), b in vec3_strategy(), c in vec3_strategy()) {
            prop_assert!(position_error(a, c) <= position_error(a, b) + position_error(b, c) + 1e-12);
            prop_assert_eq!(position_error(a, b), position_error(b, a));
        }

        #[test]
        fn loss_nonnegative_and_monotone_in_beta(
            x in vec3_strategy(), xh in vec3_strategy(), q in quat_strategy(), qh in quat_strategy(),
            b1 in 0.01..500.0f64, b2 in 0.01..500.0f64,
        ) {
            let truth = PoseVector::from_parts(x, q);
            let pred = PoseVector::from_parts(xh, qh);
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            let l_lo = posenet_loss(&pred, &truth, lo).unwrap();
            let l_hi = posenet_loss(&pred, &truth, hi).unwrap();
            prop_assert!(l_lo >= 0.0);
            prop_assert!(l_lo <= l_hi);
        }

        #[test]
        fn pose_vector_roundtrip(x in vec3_strategy(), q in quat_strategy()) {
            let v = PoseVector::from_parts(x, q);
            prop_assert_eq!(v.position(), x);
            prop_assert_eq!(v.quaternion(), q);
            prop_assert_eq!(PoseVector::from_slice(v.as_slice()).unwrap(), v);
        }
    }
}
