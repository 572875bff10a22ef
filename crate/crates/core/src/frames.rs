//! Gravity-aligned reference frames, poses, paths and 4-DOF transforms.
//!
//! Every frame in the system shares the gravity vector, so a rigid transform
//! between two frames reduces to a translation plus a rotation about z.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::{Matrix4, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Wraps an angle into the half-open interval `[-pi, pi)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut r = (angle + PI).rem_euclid(TAU);
    if r >= TAU {
        r = 0.0;
    }
    r - PI
}

/// Named gravity-aligned frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameId {
    /// World. Bookkeeping only, no algorithm consumes it.
    World,
    /// Local frame of the primary's self-localization; all planning happens here.
    Local,
    /// Origin of the secondary's visual-inertial odometry.
    Vio,
    /// Body of the primary vehicle.
    Primary,
    /// Body of the secondary vehicle.
    Secondary,
    /// Scenario-defined label.
    Custom(u16),
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameId::World => write!(f, "W"),
            FrameId::Local => write!(f, "L"),
            FrameId::Vio => write!(f, "V"),
            FrameId::Primary => write!(f, "P"),
            FrameId::Secondary => write!(f, "S"),
            FrameId::Custom(n) => write!(f, "F{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("frame mismatch: expected {expected}, found {found}")]
pub struct FrameMismatch {
    pub expected: FrameId,
    pub found: FrameId,
}

fn check_frame(expected: FrameId, found: FrameId) -> Result<(), FrameMismatch> {
    if expected == found {
        Ok(())
    } else {
        Err(FrameMismatch { expected, found })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    /// Radians in `[-pi, pi)`.
    pub heading: f64,
    pub frame: FrameId,
}

impl Pose {
    pub fn new(position: Vec3, heading: f64, frame: FrameId) -> Self {
        debug_assert!(position.iter().all(|c| c.is_finite()));
        Pose {
            position,
            heading: wrap_angle(heading),
            frame,
        }
    }

    pub fn at(x: f64, y: f64, z: f64, frame: FrameId) -> Self {
        Pose::new(Vec3::new(x, y, z), 0.0, frame)
    }
}

/// Ordered sequence of poses sharing one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    frame: FrameId,
    poses: Vec<Pose>,
}

impl Path {
    pub fn empty(frame: FrameId) -> Self {
        Path {
            frame,
            poses: Vec::new(),
        }
    }

    /// Builds a path, rejecting poses expressed in another frame.
    pub fn new(frame: FrameId, poses: Vec<Pose>) -> Result<Self, FrameMismatch> {
        for p in &poses {
            check_frame(frame, p.frame)?;
        }
        Ok(Path { frame, poses })
    }

    pub fn from_positions(frame: FrameId, positions: impl IntoIterator<Item = Vec3>) -> Self {
        Path {
            frame,
            poses: positions
                .into_iter()
                .map(|p| Pose::new(p, 0.0, frame))
                .collect(),
        }
    }

    pub fn frame(&self) -> FrameId {
        self.frame
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn into_poses(self) -> Vec<Pose> {
        self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn first(&self) -> Option<&Pose> {
        self.poses.first()
    }

    pub fn last(&self) -> Option<&Pose> {
        self.poses.last()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.poses.iter().map(|p| p.position)
    }

    /// Sum of Euclidean segment lengths.
    pub fn arc_length(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| (w[1].position - w[0].position).norm())
            .sum()
    }

    /// Drops the first `n` poses.
    pub fn skip(&self, n: usize) -> Path {
        Path {
            frame: self.frame,
            poses: self.poses.iter().skip(n).copied().collect(),
        }
    }

    pub fn push(&mut self, pose: Pose) -> Result<(), FrameMismatch> {
        check_frame(self.frame, pose.frame)?;
        self.poses.push(pose);
        Ok(())
    }
}

/// Translation plus yaw mapping coordinates in `from` into coordinates in `to`:
/// `p_to = Rz(yaw) * p_from + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform4Dof {
    pub translation: Vec3,
    pub yaw: f64,
    pub from: FrameId,
    pub to: FrameId,
}

impl Transform4Dof {
    pub fn new(translation: Vec3, yaw: f64, from: FrameId, to: FrameId) -> Self {
        Transform4Dof {
            translation,
            yaw: wrap_angle(yaw),
            from,
            to,
        }
    }

    pub fn identity(frame: FrameId) -> Self {
        Transform4Dof::new(Vec3::zeros(), 0.0, frame, frame)
    }

    /// The transform whose `from` frame is a body located at `pose`, i.e.
    /// body coordinates to `pose.frame` coordinates.
    pub fn from_pose(pose: &Pose, body: FrameId) -> Self {
        Transform4Dof::new(pose.position, pose.heading, body, pose.frame)
    }

    fn rotate(&self, v: &Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }

    /// Applies the transform to a bare point (no frame check).
    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotate(p) + self.translation
    }

    pub fn apply_pose(&self, pose: &Pose) -> Result<Pose, FrameMismatch> {
        check_frame(self.from, pose.frame)?;
        Ok(Pose::new(
            self.apply_point(&pose.position),
            pose.heading + self.yaw,
            self.to,
        ))
    }

    /// Homogeneous 4x4 matrix, used by tests as an independent route.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw);
        let mut m = rot.to_homogeneous();
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// `a ∘ b`: first `b`, then `a`. Requires `a.from == b.to`.
pub fn compose(a: &Transform4Dof, b: &Transform4Dof) -> Result<Transform4Dof, FrameMismatch> {
    check_frame(a.from, b.to)?;
    Ok(Transform4Dof::new(
        a.rotate(&b.translation) + a.translation,
        a.yaw + b.yaw,
        b.from,
        a.to,
    ))
}

pub fn invert(t: &Transform4Dof) -> Transform4Dof {
    let inv_yaw = -t.yaw;
    let (s, c) = inv_yaw.sin_cos();
    let tr = t.translation;
    let rotated = Vec3::new(c * tr.x - s * tr.y, s * tr.x + c * tr.y, tr.z);
    Transform4Dof::new(-rotated, inv_yaw, t.to, t.from)
}

/// Re-expresses every pose of `path` (which must live in `t.from`) in `t.to`.
pub fn apply_path(t: &Transform4Dof, path: &Path) -> Result<Path, FrameMismatch> {
    check_frame(t.from, path.frame)?;
    let poses = path
        .poses
        .iter()
        .map(|p| Pose::new(t.apply_point(&p.position), p.heading + t.yaw, t.to))
        .collect();
    Ok(Path { frame: t.to, poses })
}
