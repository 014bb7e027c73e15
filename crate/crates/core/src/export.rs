//! Simulation-ready export: URDF and MJCF documents plus per-part meshes
//! and a checksummed manifest, with re-parsers for round-trip validation.
//!
//! Frame conventions: at rest every link is axis-aligned with the world.
//! A non-root link's frame sits at its joint's world axis origin, so joint
//! origins are parent-relative offsets, mesh geometry is shifted by the
//! negated frame position, and no element ever carries a rotation. All
//! lengths are meters, all angles radians, every number printed with six
//! decimals, which makes exports byte-identical across runs.

use crate::kinematics::{joint_motion, world_joint, KinematicsError, WorldJoint};
use crate::mesh::{write_obj, TriMesh};
use crate::schema::{part_mass, JointType, PhysicalAssetSpec, SchemaError};
use crate::segmentation::split_parts;
use crate::voxel::cuboidify;
use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::f64::consts::PI;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Segmentation(#[from] crate::segmentation::SegmentationError),
    #[error("fine mesh carries no part labels")]
    UnlabeledFineMesh,
    #[error("part {0} has no geometry (empty mesh after splitting)")]
    PartWithoutGeometry(u32),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed xml: {0}")]
    MalformedXml(String),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("document structure: {0}")]
    BadDocument(String),
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const URDF_FILE: &str = "model.urdf";
pub const MJCF_FILE: &str = "model.xml";
pub const MANIFEST_FILE: &str = "manifest.json";
/// Fixed actuator limits written to URDF `<limit>` tags; re-parsers ignore
/// them.
const EFFORT: f64 = 1000.0;
const VELOCITY: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub asset: String,
    pub files: Vec<ManifestEntry>,
}

/// Everything the export produces, in memory. [`ExportBundle::write`] puts
/// it on disk byte-for-byte.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportBundle {
    pub asset_name: String,
    pub urdf: String,
    pub mjcf: String,
    /// (part id, file name, mesh in world meters).
    pub part_meshes: Vec<(u32, String, TriMesh)>,
    pub manifest: Manifest,
}

impl ExportBundle {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), ExportError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(URDF_FILE), &self.urdf)?;
        std::fs::write(dir.join(MJCF_FILE), &self.mjcf)?;
        for (_, name, mesh) in &self.part_meshes {
            std::fs::write(dir.join(name), write_obj(mesh))?;
        }
        let mut manifest_text = serde_json::to_string_pretty(&self.manifest)?;
        manifest_text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), manifest_text)?;
        Ok(())
    }

    pub fn link_count(&self) -> usize {
        self.part_meshes.len()
    }
}

fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn fmt_vec(v: &Vector3<f64>) -> String {
    format!("{} {} {}", fmt6(v.x), fmt6(v.y), fmt6(v.z))
}

/// A joint spanning the full `[-2pi, 2pi]` range exports as an unlimited
/// (continuous) revolute joint.
fn is_continuous(joint: &WorldJoint) -> bool {
    joint.joint_type == JointType::Revolute
        && joint
            .range
            .map(|[lo, hi]| (lo + 2.0 * PI).abs() <= 1e-9 && (hi - 2.0 * PI).abs() <= 1e-9)
            .unwrap_or(false)
}

struct PartFrame {
    /// World position of the link frame at rest.
    origin: Vector3<f64>,
    mass: f64,
    /// Diagonal inertia of the solid cuboid spanning the part's voxel
    /// bounding box, about its center.
    inertia: Vector3<f64>,
    /// Bounding-box center in world meters.
    com: Point3<f64>,
}

fn part_frames(spec: &PhysicalAssetSpec) -> Result<BTreeMap<u32, PartFrame>, ExportError> {
    let mut frames = BTreeMap::new();
    for part in &spec.parts {
        let origin = if part.id == spec.root_part {
            Vector3::zeros()
        } else {
            world_joint(spec, part.id)?.axis_origin.coords
        };
        let grid = spec.part_grid(part.id)?;
        let (min, max) = grid.cell_bbox().ok_or(SchemaError::EmptyGeometry(part.id))?;
        let r = spec.resolution as f64;
        let s = spec.scale_vec();
        let lo = Vector3::new(
            min.0 as f64 / r * s.x,
            min.1 as f64 / r * s.y,
            min.2 as f64 / r * s.z,
        );
        let hi = Vector3::new(
            (max.0 + 1) as f64 / r * s.x,
            (max.1 + 1) as f64 / r * s.y,
            (max.2 + 1) as f64 / r * s.z,
        );
        let ext = hi - lo;
        let mass = part_mass(spec, part.id)?;
        let inertia = Vector3::new(
            mass / 12.0 * (ext.y * ext.y + ext.z * ext.z),
            mass / 12.0 * (ext.x * ext.x + ext.z * ext.z),
            mass / 12.0 * (ext.x * ext.x + ext.y * ext.y),
        );
        frames.insert(
            part.id,
            PartFrame {
                origin,
                mass,
                inertia,
                com: Point3::from((lo + hi) / 2.0),
            },
        );
    }
    Ok(frames)
}

/// Per-part mesh in world meters: split from the labeled fine mesh when one
/// is given, otherwise greedy cuboids over the part's voxels.
fn part_meshes(
    spec: &PhysicalAssetSpec,
    fine: Option<&TriMesh>,
) -> Result<Vec<(u32, String, TriMesh)>, ExportError> {
    let s = spec.scale_vec();
    let mut out = Vec::with_capacity(spec.parts.len());
    match fine {
        Some(mesh) => {
            if mesh.face_labels.is_none() {
                return Err(ExportError::UnlabeledFineMesh);
            }
            let split = split_parts(mesh, spec.parts.len() as u32)?;
            for (id, m) in (0u32..).zip(split.meshes) {
                if m.is_empty() {
                    return Err(ExportError::PartWithoutGeometry(id));
                }
                let scaled = TriMesh {
                    vertices: m
                        .vertices
                        .iter()
                        .map(|v| Point3::new(v.x * s.x, v.y * s.y, v.z * s.z))
                        .collect(),
                    faces: m.faces,
                    face_labels: None,
                };
                out.push((id, format!("part_{id}.obj"), scaled));
            }
        }
        None => {
            let r = spec.resolution as f64;
            for part in &spec.parts {
                let grid = spec.part_grid(part.id)?;
                let boxes = cuboidify(&grid);
                let mut pieces = Vec::with_capacity(boxes.len());
                for b in boxes {
                    let lo = Point3::new(
                        b.min.0 as f64 / r * s.x,
                        b.min.1 as f64 / r * s.y,
                        b.min.2 as f64 / r * s.z,
                    );
                    let hi = Vector3::new(
                        (b.max.0 + 1) as f64 / r * s.x,
                        (b.max.1 + 1) as f64 / r * s.y,
                        (b.max.2 + 1) as f64 / r * s.z,
                    );
                    pieces.push(crate::mesh::primitives::box_mesh(hi - lo.coords, lo));
                }
                let merged = crate::mesh::primitives::merge(&pieces);
                if merged.is_empty() {
                    return Err(ExportError::PartWithoutGeometry(part.id));
                }
                out.push((part.id, format!("part_{}.obj", part.id), merged));
            }
        }
    }
    out.sort_by_key(|(id, _, _)| *id);
    Ok(out)
}

fn urdf_document(
    spec: &PhysicalAssetSpec,
    frames: &BTreeMap<u32, PartFrame>,
) -> Result<String, ExportError> {
    let mut x = String::new();
    let _ = writeln!(x, "<?xml version=\"1.0\"?>");
    let _ = writeln!(x, "<robot name=\"{}\">", xml_escape(&spec.name));
    for part in &spec.parts {
        let f = &frames[&part.id];
        let mesh_origin = -f.origin;
        let _ = writeln!(x, "  <link name=\"part_{}\">", part.id);
        for tag in ["visual", "collision"] {
            let _ = writeln!(x, "    <{tag}>");
            let _ = writeln!(
                x,
                "      <origin xyz=\"{}\" rpy=\"0 0 0\"/>",
                fmt_vec(&mesh_origin)
            );
            let _ = writeln!(x, "      <geometry>");
            let _ = writeln!(x, "        <mesh filename=\"part_{}.obj\"/>", part.id);
            let _ = writeln!(x, "      </geometry>");
            let _ = writeln!(x, "    </{tag}>");
        }
        let com_local = f.com.coords - f.origin;
        let _ = writeln!(x, "    <inertial>");
        let _ = writeln!(
            x,
            "      <origin xyz=\"{}\" rpy=\"0 0 0\"/>",
            fmt_vec(&com_local)
        );
        let _ = writeln!(x, "      <mass value=\"{}\"/>", fmt6(f.mass));
        let _ = writeln!(
            x,
            "      <inertia ixx=\"{}\" ixy=\"0\" ixz=\"0\" iyy=\"{}\" iyz=\"0\" izz=\"{}\"/>",
            fmt6(f.inertia.x),
            fmt6(f.inertia.y),
            fmt6(f.inertia.z)
        );
        let _ = writeln!(x, "    </inertial>");
        let _ = writeln!(x, "  </link>");
    }
    let mut child_ids: Vec<u32> = spec
        .parts
        .iter()
        .filter(|p| p.id != spec.root_part)
        .map(|p| p.id)
        .collect();
    child_ids.sort_unstable();
    for id in child_ids {
        let wj = world_joint(spec, id)?;
        let f = &frames[&id];
        let parent_origin = frames[&wj.parent].origin;
        let rel = f.origin - parent_origin;
        let urdf_type = if is_continuous(&wj) {
            "continuous"
        } else {
            match wj.joint_type {
                JointType::Revolute => "revolute",
                JointType::Prismatic => "prismatic",
                JointType::Fixed => "fixed",
            }
        };
        let _ = writeln!(x, "  <joint name=\"joint_{id}\" type=\"{urdf_type}\">");
        let _ = writeln!(x, "    <parent link=\"part_{}\"/>", wj.parent);
        let _ = writeln!(x, "    <child link=\"part_{id}\"/>");
        let _ = writeln!(x, "    <origin xyz=\"{}\" rpy=\"0 0 0\"/>", fmt_vec(&rel));
        if wj.joint_type != JointType::Fixed {
            let _ = writeln!(x, "    <axis xyz=\"{}\"/>", fmt_vec(&wj.axis_direction));
        }
        if let Some([lo, hi]) = wj.range {
            if urdf_type != "continuous" {
                let _ = writeln!(
                    x,
                    "    <limit lower=\"{}\" upper=\"{}\" effort=\"{}\" velocity=\"{}\"/>",
                    fmt6(lo),
                    fmt6(hi),
                    fmt6(EFFORT),
                    fmt6(VELOCITY)
                );
            }
        }
        let _ = writeln!(x, "  </joint>");
    }
    let _ = writeln!(x, "</robot>");
    Ok(x)
}

fn mjcf_document(
    spec: &PhysicalAssetSpec,
    frames: &BTreeMap<u32, PartFrame>,
) -> Result<String, ExportError> {
    let mut x = String::new();
    let _ = writeln!(x, "<mujoco model=\"{}\">", xml_escape(&spec.name));
    let _ = writeln!(x, "  <compiler angle=\"radian\" meshdir=\".\"/>");
    let _ = writeln!(x, "  <asset>");
    for part in &spec.parts {
        let _ = writeln!(
            x,
            "    <mesh name=\"part_{0}\" file=\"part_{0}.obj\"/>",
            part.id
        );
    }
    let _ = writeln!(x, "  </asset>");
    let _ = writeln!(x, "  <worldbody>");
    let children = spec.children();
    write_mjcf_body(spec, frames, &children, spec.root_part, 2, &mut x)?;
    let _ = writeln!(x, "  </worldbody>");
    let _ = writeln!(x, "</mujoco>");
    Ok(x)
}

fn write_mjcf_body(
    spec: &PhysicalAssetSpec,
    frames: &BTreeMap<u32, PartFrame>,
    children: &BTreeMap<u32, Vec<u32>>,
    id: u32,
    depth: usize,
    x: &mut String,
) -> Result<(), ExportError> {
    let pad = "  ".repeat(depth);
    let f = &frames[&id];
    let rel = if id == spec.root_part {
        f.origin
    } else {
        let parent = world_joint(spec, id)?.parent;
        f.origin - frames[&parent].origin
    };
    let _ = writeln!(x, "{pad}<body name=\"part_{id}\" pos=\"{}\">", fmt_vec(&rel));
    if id != spec.root_part {
        let wj = world_joint(spec, id)?;
        if wj.joint_type != JointType::Fixed {
            let mj_type = match wj.joint_type {
                JointType::Revolute => "hinge",
                JointType::Prismatic => "slide",
                JointType::Fixed => unreachable!(),
            };
            let range_attr = match wj.range {
                Some([lo, hi]) if !is_continuous(&wj) => {
                    format!(" range=\"{} {}\" limited=\"true\"", fmt6(lo), fmt6(hi))
                }
                _ => String::from(" limited=\"false\""),
            };
            let _ = writeln!(
                x,
                "{pad}  <joint name=\"joint_{id}\" type=\"{mj_type}\" pos=\"0 0 0\" axis=\"{}\"{range_attr}/>",
                fmt_vec(&wj.axis_direction)
            );
        }
    }
    let com_local = f.com.coords - f.origin;
    let _ = writeln!(
        x,
        "{pad}  <inertial pos=\"{}\" mass=\"{}\" diaginertia=\"{} {} {}\"/>",
        fmt_vec(&com_local),
        fmt6(f.mass),
        fmt6(f.inertia.x),
        fmt6(f.inertia.y),
        fmt6(f.inertia.z)
    );
    let _ = writeln!(
        x,
        "{pad}  <geom type=\"mesh\" mesh=\"part_{id}\" pos=\"{}\"/>",
        fmt_vec(&(-f.origin))
    );
    if let Some(kids) = children.get(&id) {
        for &kid in kids {
            write_mjcf_body(spec, frames, children, kid, depth + 1, x)?;
        }
    }
    let _ = writeln!(x, "{pad}</body>");
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn sha256_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Build the full bundle for a validated spec. When a labeled fine mesh
/// (normalized frame) is given its parts become the link geometry; otherwise
/// each part's voxels are greedily merged into boxes.
pub fn export(spec: &PhysicalAssetSpec, fine: Option<&TriMesh>) -> Result<ExportBundle, ExportError> {
    spec.validate()?;
    let frames = part_frames(spec)?;
    let part_meshes = part_meshes(spec, fine)?;
    let urdf = urdf_document(spec, &frames)?;
    let mjcf = mjcf_document(spec, &frames)?;

    let mut files = vec![
        ManifestEntry {
            path: URDF_FILE.into(),
            sha256: sha256_hex(urdf.as_bytes()),
        },
        ManifestEntry {
            path: MJCF_FILE.into(),
            sha256: sha256_hex(mjcf.as_bytes()),
        },
    ];
    for (_, name, mesh) in &part_meshes {
        files.push(ManifestEntry {
            path: name.clone(),
            sha256: sha256_hex(write_obj(mesh).as_bytes()),
        });
    }
    Ok(ExportBundle {
        asset_name: spec.name.clone(),
        urdf,
        mjcf,
        part_meshes,
        manifest: Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            asset: spec.name.clone(),
            files,
        },
    })
}

// ---------------------------------------------------------------------------
// re-parsing

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSummary {
    pub name: String,
    pub mass: f64,
    pub mesh_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSummary {
    pub name: String,
    pub joint_type: String,
    pub parent: String,
    pub child: String,
    /// Accumulated world-frame position of the joint at rest.
    pub world_origin: Point3<f64>,
    pub axis: Vector3<f64>,
    pub range: Option<[f64; 2]>,
}

/// Kinematic summary recovered from a document, with joint origins already
/// accumulated into the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicSummary {
    pub name: String,
    pub links: Vec<LinkSummary>,
    pub joints: Vec<JointSummary>,
}

fn parse_triple(s: &str) -> Result<Vector3<f64>, ExportError> {
    let parts: Vec<f64> = s
        .split_whitespace()
        .map(|w| w.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| ExportError::BadDocument(format!("bad number triple {s:?}: {e}")))?;
    if parts.len() != 3 {
        return Err(ExportError::BadDocument(format!(
            "expected 3 numbers, got {s:?}"
        )));
    }
    Ok(Vector3::new(parts[0], parts[1], parts[2]))
}

/// Re-parse a URDF document from the exported subset. Joint origins come
/// back accumulated into world frame so they can be compared against
/// [`world_joint`] directly. Features outside the subset (rotated origins,
/// planar/floating joints) are reported, never ignored.
pub fn reparse_urdf(xml: &str) -> Result<KinematicSummary, ExportError> {
    let doc = roxmltree::Document::parse(xml)
        .map_err(|e| ExportError::MalformedXml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ExportError::BadDocument(format!(
            "root element is <{}>, expected <robot>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or_default().to_string();

    let mut links = Vec::new();
    let mut raw_joints = Vec::new();
    for node in robot.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "link" => {
                let link_name = node
                    .attribute("name")
                    .ok_or_else(|| ExportError::BadDocument("link without name".into()))?
                    .to_string();
                let mut mass = 0.0;
                let mut mesh_file = None;
                for sub in node.descendants().filter(|n| n.is_element()) {
                    match sub.tag_name().name() {
                        "mass" => {
                            mass = sub
                                .attribute("value")
                                .unwrap_or("0")
                                .parse()
                                .map_err(|e| {
                                    ExportError::BadDocument(format!("bad mass: {e}"))
                                })?;
                        }
                        "mesh" => {
                            mesh_file = sub.attribute("filename").map(str::to_string);
                        }
                        "origin" => check_rpy_zero(&sub)?,
                        _ => {}
                    }
                }
                links.push(LinkSummary {
                    name: link_name,
                    mass,
                    mesh_file,
                });
            }
            "joint" => {
                let jname = node.attribute("name").unwrap_or_default().to_string();
                let jtype = node.attribute("type").unwrap_or_default().to_string();
                if !matches!(jtype.as_str(), "revolute" | "prismatic" | "fixed" | "continuous") {
                    return Err(ExportError::UnsupportedFeature(format!(
                        "joint type {jtype:?}"
                    )));
                }
                let mut parent = String::new();
                let mut child = String::new();
                let mut origin = Vector3::zeros();
                let mut axis = Vector3::zeros();
                let mut range = None;
                for sub in node.children().filter(|n| n.is_element()) {
                    match sub.tag_name().name() {
                        "parent" => {
                            parent = sub.attribute("link").unwrap_or_default().to_string()
                        }
                        "child" => child = sub.attribute("link").unwrap_or_default().to_string(),
                        "origin" => {
                            check_rpy_zero(&sub)?;
                            if let Some(v) = sub.attribute("xyz") {
                                origin = parse_triple(v)?;
                            }
                        }
                        "axis" => {
                            if let Some(v) = sub.attribute("xyz") {
                                axis = parse_triple(v)?;
                            }
                        }
                        "limit" => {
                            let lo = sub.attribute("lower").unwrap_or("0").parse().map_err(
                                |e| ExportError::BadDocument(format!("bad limit: {e}")),
                            )?;
                            let hi = sub.attribute("upper").unwrap_or("0").parse().map_err(
                                |e| ExportError::BadDocument(format!("bad limit: {e}")),
                            )?;
                            range = Some([lo, hi]);
                        }
                        other => {
                            return Err(ExportError::UnsupportedFeature(format!(
                                "joint child element <{other}>"
                            )))
                        }
                    }
                }
                raw_joints.push((jname, jtype, parent, child, origin, axis, range));
            }
            other => {
                return Err(ExportError::UnsupportedFeature(format!(
                    "robot child element <{other}>"
                )))
            }
        }
    }

    // accumulate parent-relative origins into world frame
    let mut world_of: BTreeMap<String, Vector3<f64>> = BTreeMap::new();
    let children_names: Vec<&String> = raw_joints.iter().map(|j| &j.3).collect();
    for l in &links {
        if !children_names.contains(&&l.name) {
            world_of.insert(l.name.clone(), Vector3::zeros());
        }
    }
    let mut remaining: Vec<_> = raw_joints.iter().collect();
    while !remaining.is_empty() {
        let before = remaining.len();
        remaining.retain(|(_, _, parent, child, origin, _, _)| {
            if let Some(p) = world_of.get(parent).copied() {
                world_of.insert(child.clone(), p + origin);
                false
            } else {
                true
            }
        });
        if remaining.len() == before {
            return Err(ExportError::BadDocument(
                "joint tree does not connect to a root link".into(),
            ));
        }
    }

    let joints = raw_joints
        .into_iter()
        .map(|(name, joint_type, parent, child, _, axis, range)| JointSummary {
            world_origin: Point3::from(world_of[&child]),
            name,
            joint_type,
            parent,
            child,
            axis,
            range,
        })
        .collect();
    Ok(KinematicSummary {
        name,
        links,
        joints,
    })
}

fn check_rpy_zero(node: &roxmltree::Node) -> Result<(), ExportError> {
    if let Some(rpy) = node.attribute("rpy") {
        let v = parse_triple(rpy)?;
        if v.norm() > 1e-12 {
            return Err(ExportError::UnsupportedFeature(format!(
                "rotated origin rpy=\"{rpy}\""
            )));
        }
    }
    Ok(())
}

/// Re-parse the exported MJCF subset; body positions accumulate into world
/// frame just like the URDF side.
pub fn reparse_mjcf(xml: &str) -> Result<KinematicSummary, ExportError> {
    let doc = roxmltree::Document::parse(xml)
        .map_err(|e| ExportError::MalformedXml(e.to_string()))?;
    let mujoco = doc.root_element();
    if mujoco.tag_name().name() != "mujoco" {
        return Err(ExportError::BadDocument(format!(
            "root element is <{}>, expected <mujoco>",
            mujoco.tag_name().name()
        )));
    }
    let name = mujoco.attribute("model").unwrap_or_default().to_string();
    let worldbody = mujoco
        .children()
        .find(|n| n.is_element() && n.tag_name().name() == "worldbody")
        .ok_or_else(|| ExportError::BadDocument("missing <worldbody>".into()))?;

    let mut links = Vec::new();
    let mut joints = Vec::new();
    fn walk(
        node: roxmltree::Node,
        parent_name: &str,
        parent_world: Vector3<f64>,
        links: &mut Vec<LinkSummary>,
        joints: &mut Vec<JointSummary>,
    ) -> Result<(), ExportError> {
        for body in node
            .children()
            .filter(|n| n.is_element() && n.tag_name().name() == "body")
        {
            let body_name = body.attribute("name").unwrap_or_default().to_string();
            let pos = match body.attribute("pos") {
                Some(p) => parse_triple(p)?,
                None => Vector3::zeros(),
            };
            let world = parent_world + pos;
            let mut mass = 0.0;
            let mut mesh_file = None;
            for sub in body.children().filter(|n| n.is_element()) {
                match sub.tag_name().name() {
                    "inertial" => {
                        if let Some(m) = sub.attribute("mass") {
                            mass = m.parse().map_err(|e| {
                                ExportError::BadDocument(format!("bad mass: {e}"))
                            })?;
                        }
                    }
                    "geom" => {
                        mesh_file = sub.attribute("mesh").map(|m| format!("{m}.obj"));
                    }
                    "joint" => {
                        let jtype = sub.attribute("type").unwrap_or_default();
                        let joint_type = match jtype {
                            "hinge" => "revolute",
                            "slide" => "prismatic",
                            other => {
                                return Err(ExportError::UnsupportedFeature(format!(
                                    "mjcf joint type {other:?}"
                                )))
                            }
                        };
                        let jpos = match sub.attribute("pos") {
                            Some(p) => parse_triple(p)?,
                            None => Vector3::zeros(),
                        };
                        let axis = parse_triple(sub.attribute("axis").unwrap_or("0 0 1"))?;
                        let range = match sub.attribute("range") {
                            Some(r) => {
                                let vals: Vec<f64> = r
                                    .split_whitespace()
                                    .map(|w| w.parse::<f64>())
                                    .collect::<Result<_, _>>()
                                    .map_err(|e| {
                                        ExportError::BadDocument(format!("bad range: {e}"))
                                    })?;
                                if vals.len() != 2 {
                                    return Err(ExportError::BadDocument(format!(
                                        "range needs 2 values, got {r:?}"
                                    )));
                                }
                                Some([vals[0], vals[1]])
                            }
                            None => None,
                        };
                        joints.push(JointSummary {
                            name: sub.attribute("name").unwrap_or_default().to_string(),
                            joint_type: joint_type.to_string(),
                            parent: parent_name.to_string(),
                            child: body_name.clone(),
                            world_origin: Point3::from(world + jpos),
                            axis,
                            range,
                        });
                    }
                    "body" => {}
                    other => {
                        return Err(ExportError::UnsupportedFeature(format!(
                            "body child element <{other}>"
                        )))
                    }
                }
            }
            links.push(LinkSummary {
                name: body_name.clone(),
                mass,
                mesh_file,
            });
            walk(body, &body_name, world, links, joints)?;
        }
        Ok(())
    }
    walk(worldbody, "", Vector3::zeros(), &mut links, &mut joints)?;
    Ok(KinematicSummary {
        name,
        links,
        joints,
    })
}

// ---------------------------------------------------------------------------
// bundle validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {}{}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                if c.detail.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", c.detail)
                }
            );
        }
        out
    }
}

/// Pre-flight checks standing in for a simulator load: manifest files exist
/// with matching checksums, both documents parse within the subset, mesh
/// references resolve, limits are ordered, and an FK sweep over each joint's
/// range stays finite.
pub fn validate_bundle(dir: impl AsRef<Path>) -> Result<ValidationReport, ExportError> {
    let dir = dir.as_ref();
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    };

    let mut missing = Vec::new();
    let mut mismatched = Vec::new();
    for entry in &manifest.files {
        match std::fs::read(dir.join(&entry.path)) {
            Ok(bytes) => {
                if sha256_hex(&bytes) != entry.sha256 {
                    mismatched.push(entry.path.clone());
                }
            }
            Err(_) => missing.push(entry.path.clone()),
        }
    }
    push(
        "files_exist",
        missing.is_empty(),
        if missing.is_empty() {
            format!("{} files", manifest.files.len())
        } else {
            format!("missing: {}", missing.join(", "))
        },
    );
    push(
        "checksums_match",
        mismatched.is_empty(),
        if mismatched.is_empty() {
            String::new()
        } else {
            format!("mismatch: {}", mismatched.join(", "))
        },
    );

    let urdf_text = std::fs::read_to_string(dir.join(URDF_FILE)).unwrap_or_default();
    let urdf = reparse_urdf(&urdf_text);
    push(
        "urdf_well_formed",
        urdf.is_ok(),
        urdf.as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
    );
    let mjcf_text = std::fs::read_to_string(dir.join(MJCF_FILE)).unwrap_or_default();
    let mjcf = reparse_mjcf(&mjcf_text);
    push(
        "mjcf_well_formed",
        mjcf.is_ok(),
        mjcf.as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
    );

    if let (Ok(urdf), Ok(mjcf)) = (&urdf, &mjcf) {
        let mut unresolved = Vec::new();
        for link in urdf.links.iter().chain(&mjcf.links) {
            if let Some(f) = &link.mesh_file {
                if !dir.join(f).exists() {
                    unresolved.push(f.clone());
                }
            }
        }
        unresolved.dedup();
        push(
            "mesh_refs_exist",
            unresolved.is_empty(),
            if unresolved.is_empty() {
                String::new()
            } else {
                format!("unresolved: {}", unresolved.join(", "))
            },
        );

        let bad_limits: Vec<String> = urdf
            .joints
            .iter()
            .chain(&mjcf.joints)
            .filter(|j| j.range.map(|[lo, hi]| lo >= hi).unwrap_or(false))
            .map(|j| j.name.clone())
            .collect();
        push(
            "joint_limits_sane",
            bad_limits.is_empty(),
            if bad_limits.is_empty() {
                String::new()
            } else {
                format!("lo >= hi: {}", bad_limits.join(", "))
            },
        );

        let sweep = fk_sweep_is_finite(urdf);
        push(
            "fk_sweep_finite",
            sweep.is_ok(),
            sweep.err().unwrap_or_default(),
        );
    }

    Ok(ValidationReport { checks })
}

/// Drive every movable joint through 5 uniform samples of its range and
/// check the accumulated poses stay finite.
fn fk_sweep_is_finite(summary: &KinematicSummary) -> Result<(), String> {
    for joint in &summary.joints {
        let samples: Vec<f64> = match (joint.joint_type.as_str(), joint.range) {
            ("fixed", _) => vec![0.0],
            ("continuous", _) => (0..5).map(|i| -PI + i as f64 * PI / 2.0).collect(),
            (_, Some([lo, hi])) => (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect(),
            (_, None) => vec![0.0],
        };
        for q in samples {
            let wj = WorldJoint {
                joint_type: match joint.joint_type.as_str() {
                    "prismatic" => JointType::Prismatic,
                    "fixed" => JointType::Fixed,
                    _ => JointType::Revolute,
                },
                parent: 0,
                child: 0,
                axis_direction: if joint.axis.norm() > 0.0 {
                    joint.axis.normalize()
                } else {
                    Vector3::z()
                },
                axis_origin: joint.world_origin,
                range: joint.range,
            };
            let iso: Isometry3<f64> = joint_motion(&wj, q);
            let finite = iso.translation.vector.iter().all(|v| v.is_finite())
                && iso.rotation.quaternion().coords.iter().all(|v| v.is_finite());
            if !finite {
                return Err(format!("joint {} produced a non-finite pose at q={q}", joint.name));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{JointSpec, PartSpec};
    use crate::synth::random_spec;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain_spec(n: u32) -> PhysicalAssetSpec {
        let parts = (0..n)
            .map(|id| PartSpec {
                id,
                description: format!("segment {id}"),
                geometry: format!("{}", id * 2),
                material: "metal".into(),
                density: 1000.0,
                affordance: vec![],
                joint: (id > 0).then(|| JointSpec {
                    joint_type: JointType::Revolute,
                    parent: id - 1,
                    axis_direction: [0.0, 0.0, 1.0],
                    axis_origin: [id as f64, 0.0, 0.0],
                    range: Some([0.0, PI / 2.0]),
                    degrees: false,
                }),
            })
            .collect();
        PhysicalAssetSpec {
            name: "chain".into(),
            description: String::new(),
            absolute_scale: [1.0, 1.0, 1.0],
            resolution: 32,
            root_part: 0,
            parts,
        }
    }

    #[test]
    fn two_part_limit_formatting() {
        let bundle = export(&chain_spec(2), None).unwrap();
        assert!(
            bundle
                .urdf
                .contains("<limit lower=\"0.000000\" upper=\"1.570796\""),
            "urdf:\n{}",
            bundle.urdf
        );
    }

    #[test]
    fn single_part_structure() {
        let bundle = export(&chain_spec(1), None).unwrap();
        let urdf = reparse_urdf(&bundle.urdf).unwrap();
        assert_eq!(urdf.links.len(), 1);
        assert_eq!(urdf.joints.len(), 0);
        let mjcf = reparse_mjcf(&bundle.mjcf).unwrap();
        assert_eq!(mjcf.links.len(), 1);
        assert_eq!(mjcf.joints.len(), 0);
    }

    #[test]
    fn five_part_chain_counts() {
        let bundle = export(&chain_spec(5), None).unwrap();
        let urdf = reparse_urdf(&bundle.urdf).unwrap();
        assert_eq!(urdf.links.len(), 5);
        assert_eq!(urdf.joints.len(), 4);
        assert_eq!(bundle.manifest.files.len(), 2 + 5);
        assert_eq!(bundle.part_meshes.len(), 5);
    }

    #[test]
    fn reparse_recovers_world_joint() {
        let spec = chain_spec(3);
        let bundle = export(&spec, None).unwrap();
        let summary = reparse_urdf(&bundle.urdf).unwrap();
        for joint in &summary.joints {
            let id: u32 = joint.child.strip_prefix("part_").unwrap().parse().unwrap();
            let wj = world_joint(&spec, id).unwrap();
            assert!((joint.world_origin - wj.axis_origin).norm() < 1e-6);
            assert!((joint.axis - wj.axis_direction).norm() < 1e-6);
        }
    }

    #[test]
    fn reparse_mass_matches_part_mass() {
        let mut spec = chain_spec(1);
        spec.parts[0].geometry = "0-32767".into();
        let bundle = export(&spec, None).unwrap();
        let summary = reparse_urdf(&bundle.urdf).unwrap();
        assert!((summary.links[0].mass - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn continuous_joint_has_no_limit() {
        let mut spec = chain_spec(2);
        spec.parts[1].joint.as_mut().unwrap().range = Some([-2.0 * PI, 2.0 * PI]);
        let bundle = export(&spec, None).unwrap();
        assert!(bundle.urdf.contains("type=\"continuous\""));
        assert!(!bundle.urdf.contains("<limit"));
        assert!(bundle.mjcf.contains("limited=\"false\""));
    }

    #[test]
    fn unknown_joint_type_reported() {
        let xml = r#"<?xml version="1.0"?>
<robot name="x">
  <link name="a"/>
  <link name="b"/>
  <joint name="j" type="planar">
    <parent link="a"/>
    <child link="b"/>
  </joint>
</robot>"#;
        match reparse_urdf(xml) {
            Err(ExportError::UnsupportedFeature(msg)) => assert!(msg.contains("planar")),
            other => panic!("expected unsupported feature, got {other:?}"),
        }
    }

    #[test]
    fn rotated_origin_reported() {
        let xml = r#"<?xml version="1.0"?>
<robot name="x">
  <link name="a">
    <visual><origin xyz="0 0 0" rpy="0 0.5 0"/><geometry><mesh filename="a.obj"/></geometry></visual>
  </link>
</robot>"#;
        assert!(matches!(
            reparse_urdf(xml),
            Err(ExportError::UnsupportedFeature(_))
        ));
    }

    #[test]
    fn export_is_byte_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let spec = random_spec(&mut rng, 6);
        let a = export(&spec, None).unwrap();
        let b = export(&spec, None).unwrap();
        assert_eq!(a.urdf, b.urdf);
        assert_eq!(a.mjcf, b.mjcf);
        assert_eq!(a.manifest, b.manifest);
    }

    #[test]
    fn urdf_and_mjcf_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let spec = random_spec(&mut rng, 6);
            let bundle = export(&spec, None).unwrap();
            let u = reparse_urdf(&bundle.urdf).unwrap();
            let m = reparse_mjcf(&bundle.mjcf).unwrap();
            assert_eq!(u.links.len(), m.links.len());
            // fixed joints appear in URDF but not MJCF; compare the movable set
            let movable: Vec<_> = u
                .joints
                .iter()
                .filter(|j| j.joint_type != "fixed")
                .collect();
            assert_eq!(movable.len(), m.joints.len());
            for mj in &m.joints {
                let uj = movable.iter().find(|j| j.name == mj.name).unwrap();
                assert!((uj.axis.normalize() - mj.axis.normalize()).norm() < 1e-6);
                match (uj.range, mj.range) {
                    (Some(a), Some(b)) => {
                        assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6)
                    }
                    (None, None) => {}
                    // continuous revolute: URDF drops the limit tag, MJCF sets limited="false"
                    other => panic!("range mismatch {other:?}"),
                }
            }
        }
    }

    #[test]
    fn write_and_validate_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = export(&chain_spec(3), None).unwrap();
        bundle.write(dir.path()).unwrap();
        let report = validate_bundle(dir.path()).unwrap();
        assert!(report.all_passed(), "{}", report.to_text());
    }

    #[test]
    fn validate_flags_missing_mesh() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = export(&chain_spec(3), None).unwrap();
        bundle.write(dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("part_1.obj")).unwrap();
        let report = validate_bundle(dir.path()).unwrap();
        assert!(!report.all_passed());
        let files_exist = report.checks.iter().find(|c| c.name == "files_exist").unwrap();
        assert!(!files_exist.passed);
        assert!(files_exist.detail.contains("part_1.obj"));
    }

    #[test]
    fn validate_flags_tampered_file() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = export(&chain_spec(2), None).unwrap();
        bundle.write(dir.path()).unwrap();
        let p = dir.path().join(URDF_FILE);
        let mut text = std::fs::read_to_string(&p).unwrap();
        text.push_str("<!-- tampered -->\n");
        std::fs::write(&p, text).unwrap();
        let report = validate_bundle(dir.path()).unwrap();
        let sums = report.checks.iter().find(|c| c.name == "checksums_match").unwrap();
        assert!(!sums.passed);
    }

    #[test]
    fn labeled_fine_mesh_path() {
        use crate::mesh::primitives;
        let mut spec = chain_spec(2);
        // octant boxes so segmentation has sane geometry to bind to
        spec.parts[0].geometry = encodeable_box(32, (0, 0, 0), (15, 31, 31));
        spec.parts[1].geometry = encodeable_box(32, (16, 0, 0), (31, 31, 31));
        let (mesh, _) = crate::mesh::normalize(&primitives::uv_sphere(24, 16)).unwrap();
        let grids = [spec.part_grid(0).unwrap(), spec.part_grid(1).unwrap()];
        let labels = crate::voxel::label_parts(&grids).unwrap();
        let seg = crate::segmentation::segment_mesh(&mesh, &labels).unwrap();
        let bundle = export(&spec, Some(&seg.mesh)).unwrap();
        assert_eq!(bundle.part_meshes.len(), 2);
        let total: usize = bundle.part_meshes.iter().map(|(_, _, m)| m.faces.len()).sum();
        assert_eq!(total, mesh.faces.len());
    }

    fn encodeable_box(r: u32, min: (u32, u32, u32), max: (u32, u32, u32)) -> String {
        let cells = (min.2..=max.2).flat_map(|z| {
            (min.1..=max.1).flat_map(move |y| (min.0..=max.0).map(move |x| (x, y, z)))
        });
        encode(&VoxelGrid::from_cells(r, cells).unwrap()).text
    }

    use crate::codec::encode;
    use crate::voxel::VoxelGrid;
}
