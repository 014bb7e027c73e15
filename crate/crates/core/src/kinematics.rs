//! Voxel-frame kinematic parameters mapped to the metric world frame, plus
//! forward kinematics over the part tree.
//!
//! Conventions: the rest pose (all joint values zero) is the as-voxelized
//! configuration, so every part's rest transform is the identity. Joint
//! values outside a joint's range are hard errors, not clamped.

use crate::schema::{JointType, PhysicalAssetSpec, SchemaError};
use nalgebra::{Isometry3, Point3, Translation3, Unit, UnitQuaternion, Vector3};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("part {0} has no joint")]
    NoJoint(u32),
    #[error("part {0} has a fixed joint (no motion range)")]
    FixedJoint(u32),
    #[error("missing joint value for part {0}")]
    MissingJointValue(u32),
    #[error("joint value given for part {0}, which has no movable joint")]
    UnexpectedJointValue(u32),
    #[error("joint value {value} for part {part} outside range [{lo}, {hi}]")]
    OutOfRange {
        part: u32,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("sample count {0} must be at least 2")]
    BadSampleCount(usize),
}

/// A joint with all parameters in the metric world frame: axis origin in
/// meters, unit direction, range in radians (revolute) or meters
/// (prismatic).
#[derive(Debug, Clone, PartialEq)]
pub struct WorldJoint {
    pub joint_type: JointType,
    pub parent: u32,
    pub child: u32,
    pub axis_direction: Vector3<f64>,
    pub axis_origin: Point3<f64>,
    pub range: Option<[f64; 2]>,
}

/// Rigid transform per part. The root is always the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSet {
    poses: BTreeMap<u32, Isometry3<f64>>,
}

impl PoseSet {
    pub fn pose(&self, part: u32) -> Option<&Isometry3<f64>> {
        self.poses.get(&part)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Isometry3<f64>)> {
        self.poses.iter().map(|(&id, iso)| (id, iso))
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// Map a voxel-frame point to meters: `world = (p / R) .* absolute_scale`,
/// component-wise. Cell `(i,j,k)` has its center at `(i+0.5, j+0.5, k+0.5)`.
pub fn voxel_to_world(spec: &PhysicalAssetSpec, point: Point3<f64>) -> Point3<f64> {
    let r = spec.resolution as f64;
    let s = spec.scale_vec();
    Point3::new(point.x / r * s.x, point.y / r * s.y, point.z / r * s.z)
}

/// World image of a voxel-frame direction under anisotropic scaling:
/// component-wise scale, then renormalize. This preserves the geometric line
/// of the axis.
pub fn world_direction(spec: &PhysicalAssetSpec, dir: Vector3<f64>) -> Vector3<f64> {
    let s = spec.scale_vec();
    Vector3::new(dir.x * s.x, dir.y * s.y, dir.z * s.z).normalize()
}

/// Convert a part's joint to the world frame. Prismatic ranges scale by the
/// metric length of one voxel step along the axis; revolute ranges are
/// already radians; fixed joints carry no range.
pub fn world_joint(spec: &PhysicalAssetSpec, part_id: u32) -> Result<WorldJoint, KinematicsError> {
    let part = spec.part(part_id)?;
    let joint = part.joint.as_ref().ok_or(KinematicsError::NoJoint(part_id))?;
    let dir_voxel = joint.axis_direction_vec();
    let axis_direction = world_direction(spec, dir_voxel);
    let axis_origin = voxel_to_world(spec, joint.axis_origin_point());
    let range = match (joint.joint_type, joint.range) {
        (JointType::Fixed, _) => None,
        (JointType::Revolute, r) => r,
        (JointType::Prismatic, r) => {
            let s = spec.scale_vec();
            let step = Vector3::new(
                dir_voxel.x * s.x,
                dir_voxel.y * s.y,
                dir_voxel.z * s.z,
            )
            .norm()
                / spec.resolution as f64;
            r.map(|[lo, hi]| [lo * step, hi * step])
        }
    };
    Ok(WorldJoint {
        joint_type: joint.joint_type,
        parent: joint.parent,
        child: part_id,
        axis_direction,
        axis_origin,
        range,
    })
}

/// Rigid motion of a joint at value `q`: rotation about the world axis
/// through its origin, or translation along it. Fixed joints are the
/// identity.
pub fn joint_motion(joint: &WorldJoint, q: f64) -> Isometry3<f64> {
    match joint.joint_type {
        JointType::Fixed => Isometry3::identity(),
        JointType::Revolute => {
            let axis = Unit::new_normalize(joint.axis_direction);
            let rot = UnitQuaternion::from_axis_angle(&axis, q);
            let o = joint.axis_origin.coords;
            Isometry3::from_parts(Translation3::from(o - rot * o), rot)
        }
        JointType::Prismatic => {
            Isometry3::translation(
                joint.axis_direction.x * q,
                joint.axis_direction.y * q,
                joint.axis_direction.z * q,
            )
        }
    }
}

/// Forward kinematics over the part tree. `q` must contain exactly the
/// movable (non-fixed) joints' parts; values outside range are errors.
pub fn forward_kinematics(
    spec: &PhysicalAssetSpec,
    q: &BTreeMap<u32, f64>,
) -> Result<PoseSet, KinematicsError> {
    for &id in q.keys() {
        let part = spec.part(id).map_err(KinematicsError::Schema)?;
        match &part.joint {
            Some(j) if j.joint_type != JointType::Fixed => {}
            _ => return Err(KinematicsError::UnexpectedJointValue(id)),
        }
    }

    let mut poses: BTreeMap<u32, Isometry3<f64>> = BTreeMap::new();
    for id in spec.traversal_order() {
        if id == spec.root_part {
            poses.insert(id, Isometry3::identity());
            continue;
        }
        let wj = world_joint(spec, id)?;
        let motion = match wj.joint_type {
            JointType::Fixed => Isometry3::identity(),
            _ => {
                let value = *q.get(&id).ok_or(KinematicsError::MissingJointValue(id))?;
                let [lo, hi] = wj.range.expect("movable joints carry a range");
                if !(lo..=hi).contains(&value) {
                    return Err(KinematicsError::OutOfRange {
                        part: id,
                        value,
                        lo,
                        hi,
                    });
                }
                joint_motion(&wj, value)
            }
        };
        let parent_pose = poses[&wj.parent];
        poses.insert(id, parent_pose * motion);
    }
    Ok(PoseSet { poses })
}

/// `n` joint values spanning `[lo, hi]` inclusive, uniformly spaced.
pub fn sample_range(
    spec: &PhysicalAssetSpec,
    part_id: u32,
    n: usize,
) -> Result<Vec<f64>, KinematicsError> {
    if n < 2 {
        return Err(KinematicsError::BadSampleCount(n));
    }
    let wj = world_joint(spec, part_id)?;
    let [lo, hi] = wj.range.ok_or(KinematicsError::FixedJoint(part_id))?;
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}
