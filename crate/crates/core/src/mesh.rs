//! Triangle mesh loading, saving and normalization.
//!
//! Meshes are carried as indexed triangle lists in a local, unitless frame.
//! The rest of the pipeline assumes the canonical frame produced by
//! [`normalize`]: axis-aligned bounding box inside the unit cube with the
//! longest edge scaled to exactly 1.
//!
//! File format is a minimal OBJ subset: `v` and `f` records, 1-based
//! positive indices, quads and n-gons fan-triangulated on load. Vertices are
//! written with 6 decimal places so that save/load round-trips are stable.

use nalgebra::{Point3, Vector3};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub mod primitives;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("parse error: no geometry")]
    NoGeometry,
    #[error(
        "face {face} references vertex index {index} but only {vertex_count} vertices exist (line {line})"
    )]
    IndexOutOfRange {
        face: usize,
        index: usize,
        vertex_count: usize,
        line: usize,
    },
    #[error("degenerate face {face}: repeated vertex indices {indices:?}")]
    DegenerateFace { face: usize, indices: [u32; 3] },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("face label count {labels} does not match face count {faces}")]
    LabelCountMismatch { labels: usize, faces: usize },
}

/// Indexed triangle mesh. `face_labels`, when present, assigns a part id to
/// every face and has the same length as `faces`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[u32; 3]>,
    pub face_labels: Option<Vec<u32>>,
}

/// Axis-aligned bounding box, kept around after normalization so metric
/// scale can be re-attached later.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extents().norm()
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        let mesh = TriMesh {
            vertices,
            faces,
            face_labels: None,
        };
        mesh.check()?;
        Ok(mesh)
    }

    pub fn with_labels(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[u32; 3]>,
        face_labels: Vec<u32>,
    ) -> Result<Self, MeshError> {
        if face_labels.len() != faces.len() {
            return Err(MeshError::LabelCountMismatch {
                labels: face_labels.len(),
                faces: faces.len(),
            });
        }
        let mut mesh = TriMesh::new(vertices, faces)?;
        mesh.face_labels = Some(face_labels);
        Ok(mesh)
    }

    fn check(&self) -> Result<(), MeshError> {
        for (i, f) in self.faces.iter().enumerate() {
            for &v in f {
                if v as usize >= self.vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        face: i,
                        index: v as usize,
                        vertex_count: self.vertices.len(),
                        line: 0,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFace {
                    face: i,
                    indices: *f,
                });
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() || self.faces.is_empty()
    }

    pub fn bbox(&self) -> Option<Aabb> {
        let first = self.vertices.first()?;
        let mut min = *first;
        let mut max = *first;
        for v in &self.vertices[1..] {
            for k in 0..3 {
                min[k] = min[k].min(v[k]);
                max[k] = max[k].max(v[k]);
            }
        }
        Some(Aabb { min, max })
    }

    /// Area-weighted centroid of a face.
    pub fn face_centroid(&self, face: usize) -> Point3<f64> {
        let [a, b, c] = self.faces[face];
        let (a, b, c) = (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        );
        Point3::new(
            (a.x + b.x + c.x) / 3.0,
            (a.y + b.y + c.y) / 3.0,
            (a.z + b.z + c.z) / 3.0,
        )
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        let (a, b, c) = (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        );
        0.5 * (b - a).cross(&(c - a)).norm()
    }
}

/// Parse the OBJ subset from text. Unknown record types (`vn`, `vt`, `o`,
/// `g`, `s`, `usemtl`, `mtllib`) and comments are skipped; face entries may
/// use the `i`, `i/j`, `i/j/k` or `i//k` forms, of which only the vertex
/// index is kept.
pub fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let keyword = it.next().unwrap();
        match keyword {
            "v" => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = it.next().ok_or_else(|| MeshError::Parse {
                        line,
                        message: "vertex needs 3 coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| MeshError::Parse {
                        line,
                        message: format!("bad coordinate {tok:?}"),
                    })?;
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "f" => {
                let mut idx: Vec<u32> = Vec::with_capacity(4);
                for tok in it {
                    let head = tok.split('/').next().unwrap_or(tok);
                    let i: i64 = head.parse().map_err(|_| MeshError::Parse {
                        line,
                        message: format!("bad face index {tok:?}"),
                    })?;
                    if i < 1 {
                        return Err(MeshError::Parse {
                            line,
                            message: format!("face index {i} must be positive (1-based)"),
                        });
                    }
                    if i as usize > vertices.len() {
                        return Err(MeshError::IndexOutOfRange {
                            face: faces.len(),
                            index: i as usize,
                            vertex_count: vertices.len(),
                            line,
                        });
                    }
                    idx.push((i - 1) as u32);
                }
                if idx.len() < 3 {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("face needs at least 3 vertices, got {}", idx.len()),
                    });
                }
                // fan-triangulate quads and n-gons
                for k in 1..idx.len() - 1 {
                    let tri = [idx[0], idx[k], idx[k + 1]];
                    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                        return Err(MeshError::DegenerateFace {
                            face: faces.len(),
                            indices: tri,
                        });
                    }
                    faces.push(tri);
                }
            }
            "vn" | "vt" | "o" | "g" | "s" | "usemtl" | "mtllib" => {}
            other => {
                return Err(MeshError::Parse {
                    line,
                    message: format!("unsupported record {other:?}"),
                });
            }
        }
    }

    if vertices.is_empty() || faces.is_empty() {
        return Err(MeshError::NoGeometry);
    }
    TriMesh::new(vertices, faces)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text)
}

/// Serialize to the OBJ subset. Vertices carry exactly 6 decimal places,
/// faces are 1-based. Part labels are not part of the format.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 32 + mesh.faces.len() * 16);
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, write_obj(mesh))?;
    Ok(())
}

/// Rescale into the canonical frame: bounding box inside `[0,1]^3`, longest
/// edge exactly 1. The transform is a similarity (uniform scale plus
/// translation), so aspect ratios survive. Returns the original bounding box
/// so the metric scale can be re-attached downstream.
pub fn normalize(mesh: &TriMesh) -> Result<(TriMesh, Aabb), MeshError> {
    if mesh.vertices.is_empty() {
        return Err(MeshError::NoGeometry);
    }
    let bbox = mesh.bbox().expect("non-empty mesh has a bbox");
    let ext = bbox.extents();
    let longest = ext.x.max(ext.y).max(ext.z);
    if longest <= 0.0 {
        return Err(MeshError::DegenerateGeometry(
            "all vertices coincide (zero-extent bounding box)".into(),
        ));
    }
    let scale = 1.0 / longest;
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| Point3::new(
            (v.x - bbox.min.x) * scale,
            (v.y - bbox.min.y) * scale,
            (v.z - bbox.min.z) * scale,
        ))
        .collect();
    let out = TriMesh {
        vertices,
        faces: mesh.faces.clone(),
        face_labels: mesh.face_labels.clone(),
    };
    Ok((out, bbox))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> TriMesh {
        primitives::unit_cube()
    }

    #[test]
    fn load_unit_cube() {
        let text = write_obj(&cube());
        let m = parse_obj(&text).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert_eq!(m.faces.len(), 12);
    }

    #[test]
    fn index_out_of_range_reported() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
        match parse_obj(text) {
            Err(MeshError::IndexOutOfRange {
                index, vertex_count, ..
            }) => {
                assert_eq!(index, 9);
                assert_eq!(vertex_count, 3);
            }
            other => panic!("expected index error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_no_geometry() {
        assert!(matches!(parse_obj(""), Err(MeshError::NoGeometry)));
        assert!(matches!(parse_obj("# nothing\n"), Err(MeshError::NoGeometry)));
    }

    #[test]
    fn degenerate_face_lists_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n";
        match parse_obj(text) {
            Err(MeshError::DegenerateFace { indices, .. }) => assert_eq!(indices, [0, 0, 1]),
            other => panic!("expected degenerate face, got {other:?}"),
        }
    }

    #[test]
    fn quads_fan_triangulate() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn face_slash_forms() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2/2 3//3\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn normalize_centered_cube() {
        let m = primitives::box_mesh(Vector3::new(4.0, 4.0, 4.0), Point3::new(-2.0, -2.0, -2.0));
        let (n, orig) = normalize(&m).unwrap();
        let bb = n.bbox().unwrap();
        assert!((bb.min.coords.norm()) < 1e-12);
        assert!((bb.max - Point3::new(1.0, 1.0, 1.0)).norm() < 1e-12);
        assert_eq!(orig.extents(), Vector3::new(4.0, 4.0, 4.0));
    }

    #[test]
    fn normalize_preserves_aspect_ratio() {
        // extents (2,1,1) -> (1,0.5,0.5), via division by the longest edge
        let m = primitives::box_mesh(Vector3::new(2.0, 1.0, 1.0), Point3::new(0.5, 3.0, -1.0));
        let (n, _) = normalize(&m).unwrap();
        let ext = n.bbox().unwrap().extents();
        assert!((ext - Vector3::new(1.0, 0.5, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let m = primitives::uv_sphere(12, 8);
        let (n1, _) = normalize(&m).unwrap();
        let (n2, _) = normalize(&n1).unwrap();
        for (a, b) in n1.vertices.iter().zip(&n2.vertices) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn normalize_rejects_zero_extent() {
        let m = TriMesh {
            vertices: vec![Point3::origin(); 3],
            faces: vec![[0, 1, 2]],
            face_labels: None,
        };
        assert!(matches!(
            normalize(&m),
            Err(MeshError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn save_load_round_trip_exact_faces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.obj");
        let m = cube();
        save_mesh(&m, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(m.faces, back.faces);
        for (a, b) in m.vertices.iter().zip(&back.vertices) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let m = cube();
        assert!(matches!(
            save_mesh(&m, "/nonexistent-dir/xyz/cube.obj"),
            Err(MeshError::Io(_))
        ));
    }
}
