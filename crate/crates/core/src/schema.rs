//! Tree-structured physical asset description: overall attributes plus
//! per-part geometry, material, affordance and joint, serialized as JSON.
//!
//! The JSON layout is documented field-by-field in `docs/schema.md`. Parsing
//! validates everything eagerly — tree shape, joint parameters, and each
//! part's geometry token string — so downstream consumers never see a
//! half-valid asset.

use crate::codec::{decode, CodecError, TokenString};
use crate::voxel::{VoxelGrid, MAX_RESOLUTION};
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("json error at {path}: {message}")]
    JsonAtPath { path: String, message: String },
    #[error("resolution {0} invalid (must be in 1..={MAX_RESOLUTION})")]
    InvalidResolution(u32),
    #[error("absolute_scale component {0} must be positive and finite")]
    InvalidScale(f64),
    #[error("duplicate part id {0}")]
    DuplicatePartId(u32),
    #[error("part ids must form the contiguous range 0..{expected}, missing {missing}")]
    NonContiguousIds { expected: u32, missing: u32 },
    #[error("parts[{part}].joint.parent {parent} does not exist")]
    UnknownParent { part: u32, parent: u32 },
    #[error("parts[{0}].joint.parent refers to itself")]
    SelfParent(u32),
    #[error("cycle detected in parent links involving part {0}")]
    CycleDetected(u32),
    #[error("root_part {0} does not exist")]
    UnknownRootPart(u32),
    #[error("root part {0} must not carry a joint")]
    RootHasJoint(u32),
    #[error("part {0} is not the root and must carry a joint")]
    MissingJoint(u32),
    #[error("expected exactly one root (joint-less part), found parts {0:?}")]
    MultipleRoots(Vec<u32>),
    #[error("no root: every part carries a joint")]
    NoRoot,
    #[error("part {0} is unreachable from the root")]
    UnreachablePart(u32),
    #[error("part {part}: geometry {source}")]
    Geometry { part: u32, source: CodecError },
    #[error("part {0}: geometry decodes to an empty voxel set")]
    EmptyGeometry(u32),
    #[error("part {part}: density {density} must be positive and finite")]
    InvalidDensity { part: u32, density: f64 },
    #[error("part {part}: joint axis_direction norm {norm} is not 1 (tolerance 1e-6)")]
    InvalidAxis { part: u32, norm: f64 },
    #[error("part {part}: joint axis_origin {coord} outside [0, {resolution}]")]
    AxisOriginOutOfBounds {
        part: u32,
        coord: f64,
        resolution: u32,
    },
    #[error("part {0}: joint range invalid (need lo < hi; revolute within [-2pi, 2pi])")]
    InvalidRange(u32),
    #[error("part {0}: fixed joint must not carry a range")]
    RangeOnFixed(u32),
    #[error("part {0}: {1} joint requires a range")]
    MissingRange(u32, JointType),
    #[error("unknown part id {0}")]
    UnknownPart(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Revolute,
    Prismatic,
    Fixed,
}

impl std::fmt::Display for JointType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            JointType::Revolute => "revolute",
            JointType::Prismatic => "prismatic",
            JointType::Fixed => "fixed",
        })
    }
}

/// Joint attaching a part to its parent, expressed in the voxel frame:
/// axis direction is a unit vector, axis origin lives in `[0,R]^3`, and the
/// motion range is radians (revolute) or voxel units (prismatic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    #[serde(rename = "type")]
    pub joint_type: JointType,
    pub parent: u32,
    pub axis_direction: [f64; 3],
    pub axis_origin: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    /// Accepted on input for revolute ranges given in degrees; parsing
    /// converts to radians and clears the flag.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degrees: bool,
}

impl JointSpec {
    pub fn axis_direction_vec(&self) -> Vector3<f64> {
        Vector3::from(self.axis_direction)
    }

    pub fn axis_origin_point(&self) -> Point3<f64> {
        Point3::from(self.axis_origin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub id: u32,
    pub description: String,
    /// Geometry token text at the asset's resolution.
    pub geometry: String,
    pub material: String,
    pub density: f64,
    pub affordance: Vec<String>,
    /// `None` iff this part is the root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointSpec>,
}

/// The whole asset: overall attributes plus the part tree. Part ids are the
/// contiguous range `0..parts.len()`; array order is preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalAssetSpec {
    pub name: String,
    pub description: String,
    /// Bounding-box dimensions of the whole object, meters.
    pub absolute_scale: [f64; 3],
    pub resolution: u32,
    pub root_part: u32,
    pub parts: Vec<PartSpec>,
}

impl PhysicalAssetSpec {
    pub fn scale_vec(&self) -> Vector3<f64> {
        Vector3::from(self.absolute_scale)
    }

    pub fn part(&self, id: u32) -> Result<&PartSpec, SchemaError> {
        self.parts
            .iter()
            .find(|p| p.id == id)
            .ok_or(SchemaError::UnknownPart(id))
    }

    /// Decode one part's geometry.
    pub fn part_grid(&self, id: u32) -> Result<VoxelGrid, SchemaError> {
        let part = self.part(id)?;
        decode(&TokenString::new(part.geometry.clone(), self.resolution))
            .map_err(|source| SchemaError::Geometry { part: id, source })
    }

    /// Children of each part, sorted by id; index by part id.
    pub fn children(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut map: BTreeMap<u32, Vec<u32>> = self.parts.iter().map(|p| (p.id, Vec::new())).collect();
        for p in &self.parts {
            if let Some(j) = &p.joint {
                map.get_mut(&j.parent).expect("validated parent").push(p.id);
            }
        }
        map
    }

    /// Part ids in depth-first order from the root, children by ascending id.
    pub fn traversal_order(&self) -> Vec<u32> {
        let children = self.children();
        let mut order = Vec::with_capacity(self.parts.len());
        let mut stack = vec![self.root_part];
        while let Some(id) = stack.pop() {
            order.push(id);
            if let Some(kids) = children.get(&id) {
                for &k in kids.iter().rev() {
                    stack.push(k);
                }
            }
        }
        order
    }

    /// Validate every invariant; parsing runs this, and emit re-runs it to
    /// refuse hand-constructed invalid values.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.resolution == 0 || self.resolution > MAX_RESOLUTION {
            return Err(SchemaError::InvalidResolution(self.resolution));
        }
        for &s in &self.absolute_scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(SchemaError::InvalidScale(s));
            }
        }

        let n = self.parts.len() as u32;
        let mut seen = vec![false; n as usize];
        for p in &self.parts {
            if p.id >= n {
                return Err(SchemaError::NonContiguousIds {
                    expected: n,
                    missing: p.id.min(n),
                });
            }
            if seen[p.id as usize] {
                return Err(SchemaError::DuplicatePartId(p.id));
            }
            seen[p.id as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(SchemaError::NonContiguousIds {
                expected: n,
                missing: missing as u32,
            });
        }

        // parent links exist and are acyclic, checked before root counting so
        // a two-part cycle reports as a cycle rather than a missing root
        for p in &self.parts {
            if let Some(j) = &p.joint {
                if j.parent == p.id {
                    return Err(SchemaError::SelfParent(p.id));
                }
                if j.parent >= n {
                    return Err(SchemaError::UnknownParent {
                        part: p.id,
                        parent: j.parent,
                    });
                }
            }
        }
        let parent_of: BTreeMap<u32, u32> = self
            .parts
            .iter()
            .filter_map(|p| p.joint.as_ref().map(|j| (p.id, j.parent)))
            .collect();
        for p in &self.parts {
            let mut slow = p.id;
            let mut hops = 0u32;
            while let Some(&up) = parent_of.get(&slow) {
                slow = up;
                hops += 1;
                if hops > n {
                    return Err(SchemaError::CycleDetected(p.id));
                }
            }
        }

        let roots: Vec<u32> = self
            .parts
            .iter()
            .filter(|p| p.joint.is_none())
            .map(|p| p.id)
            .collect();
        match roots.as_slice() {
            [] => return Err(SchemaError::NoRoot),
            [only] => {
                if *only != self.root_part {
                    if self.part(self.root_part).is_err() {
                        return Err(SchemaError::UnknownRootPart(self.root_part));
                    }
                    return Err(SchemaError::MissingJoint(*only));
                }
            }
            many => return Err(SchemaError::MultipleRoots(many.to_vec())),
        }
        if self.part(self.root_part)?.joint.is_some() {
            return Err(SchemaError::RootHasJoint(self.root_part));
        }

        // acyclic + unique root + every parent exists => all reachable
        let reach = self.traversal_order();
        if reach.len() != self.parts.len() {
            let missing = self
                .parts
                .iter()
                .map(|p| p.id)
                .find(|id| !reach.contains(id))
                .unwrap_or(self.root_part);
            return Err(SchemaError::UnreachablePart(missing));
        }

        for p in &self.parts {
            if !(p.density.is_finite() && p.density > 0.0) {
                return Err(SchemaError::InvalidDensity {
                    part: p.id,
                    density: p.density,
                });
            }
            let grid = self.part_grid(p.id)?;
            if grid.is_empty() {
                return Err(SchemaError::EmptyGeometry(p.id));
            }
            if let Some(j) = &p.joint {
                let norm = j.axis_direction_vec().norm();
                if !(norm.is_finite() && (norm - 1.0).abs() <= 1e-6) {
                    return Err(SchemaError::InvalidAxis { part: p.id, norm });
                }
                let r = self.resolution as f64;
                for &c in &j.axis_origin {
                    if !(c.is_finite() && (0.0..=r).contains(&c)) {
                        return Err(SchemaError::AxisOriginOutOfBounds {
                            part: p.id,
                            coord: c,
                            resolution: self.resolution,
                        });
                    }
                }
                match (j.joint_type, j.range) {
                    (JointType::Fixed, Some(_)) => return Err(SchemaError::RangeOnFixed(p.id)),
                    (JointType::Fixed, None) => {}
                    (t, None) => return Err(SchemaError::MissingRange(p.id, t)),
                    (t, Some([lo, hi])) => {
                        let bounds_ok = lo.is_finite() && hi.is_finite() && lo < hi;
                        let rev_ok = t != JointType::Revolute
                            || (lo >= -2.0 * PI - 1e-9 && hi <= 2.0 * PI + 1e-9);
                        if !bounds_ok || !rev_ok {
                            return Err(SchemaError::InvalidRange(p.id));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parse and fully validate an asset from JSON text. Revolute ranges with
/// `"degrees": true` are converted to radians here. Structural errors
/// (missing field, wrong type) report the JSON path they occurred at.
pub fn parse_spec(text: &str) -> Result<PhysicalAssetSpec, SchemaError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let mut spec: PhysicalAssetSpec =
        serde_path_to_error::deserialize(&mut de).map_err(|e| SchemaError::JsonAtPath {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    for p in &mut spec.parts {
        if let Some(j) = &mut p.joint {
            if j.degrees {
                if let Some(r) = &mut j.range {
                    if j.joint_type == JointType::Revolute {
                        r[0] = r[0].to_radians();
                        r[1] = r[1].to_radians();
                    }
                }
                j.degrees = false;
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Serialize a valid spec to canonical JSON: fixed key order, two-space
/// indentation, trailing newline. Refuses invalid specs.
pub fn emit_spec(spec: &PhysicalAssetSpec) -> Result<String, SchemaError> {
    spec.validate()?;
    let mut text = serde_json::to_string_pretty(spec)?;
    text.push('\n');
    Ok(text)
}

/// Mass in kg: density times occupied voxel count times per-voxel volume,
/// where a voxel measures `(sx/R, sy/R, sz/R)` meters.
pub fn part_mass(spec: &PhysicalAssetSpec, id: u32) -> Result<f64, SchemaError> {
    let part = spec.part(id)?;
    let grid = spec.part_grid(id)?;
    let r = spec.resolution as f64;
    let s = spec.scale_vec();
    let voxel_volume = (s.x / r) * (s.y / r) * (s.z / r);
    Ok(part.density * grid.len() as f64 * voxel_volume)
}
