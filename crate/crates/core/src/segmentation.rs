//! Nearest-neighbor part segmentation: assign fine-mesh faces (or fine
//! voxels) the label of the closest labeled coarse voxel center.
//!
//! Distances are Euclidean from the query point to voxel centers in the
//! normalized `[0,1]^3` frame; ties go to the lower part id. The search over
//! labeled cells expands outward in grid shells and must give results
//! identical to a brute-force scan over every labeled cell, including ties.

use crate::mesh::TriMesh;
use crate::voxel::{PartLabeledGrid, VoxelError, VoxelGrid};
use nalgebra::Point3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("label grid is empty")]
    EmptyLabels,
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("mesh is not normalized to [0,1]^3")]
    NotNormalized,
    #[error("mesh carries no face labels")]
    MissingLabels,
    #[error("face {face} label {label} out of range for part count {part_count}")]
    LabelOutOfRange { face: usize, label: u32, part_count: u32 },
    #[error("fine resolution {fine} is not a multiple of label resolution {coarse}")]
    ResolutionMismatch { fine: u32, coarse: u32 },
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

/// Exact nearest-labeled-cell queries against a [`PartLabeledGrid`].
///
/// Cells are visited shell by shell around the query's grid cell; the search
/// stops once no farther shell can hold a closer center. Comparison is by
/// `(squared distance, part id)`, so equal distances resolve to the lower
/// id, exactly as a full scan would.
pub struct NearestLabel<'a> {
    labels: &'a PartLabeledGrid,
}

impl<'a> NearestLabel<'a> {
    pub fn new(labels: &'a PartLabeledGrid) -> Result<Self, SegmentationError> {
        if labels.is_empty() {
            return Err(SegmentationError::EmptyLabels);
        }
        Ok(NearestLabel { labels })
    }

    /// Part id of the labeled cell whose center is nearest to `p`.
    pub fn query(&self, p: &Point3<f64>) -> u32 {
        let r = self.labels.resolution();
        let rf = r as f64;
        let cell_of = |c: f64| ((c * rf).floor() as i64).clamp(0, r as i64 - 1);
        let (qx, qy, qz) = (cell_of(p.x), cell_of(p.y), cell_of(p.z));

        let mut best: Option<(f64, u32)> = None;
        for shell in 0..=(r as i64) {
            if let Some((bd, _)) = best {
                // any center in shell k is at least (k-1)/R away from a point
                // inside the query cell; the extra slack absorbs rounding
                let lower = ((shell - 1).max(0) as f64) / rf;
                if lower * lower > bd {
                    break;
                }
            }
            self.for_shell((qx, qy, qz), shell, r as i64, &mut |cell| {
                if let Some(id) = self.labels.label_of(cell) {
                    let center = [
                        (cell.0 as f64 + 0.5) / rf,
                        (cell.1 as f64 + 0.5) / rf,
                        (cell.2 as f64 + 0.5) / rf,
                    ];
                    let d2 = (p.x - center[0]).powi(2)
                        + (p.y - center[1]).powi(2)
                        + (p.z - center[2]).powi(2);
                    match best {
                        Some((bd, bid)) if (d2, id) >= (bd, bid) => {}
                        _ => best = Some((d2, id)),
                    }
                }
            });
        }
        best.expect("non-empty label grid").1
    }

    fn for_shell(
        &self,
        center: (i64, i64, i64),
        shell: i64,
        r: i64,
        consider: &mut impl FnMut((u32, u32, u32)),
    ) {
        let (cx, cy, cz) = center;
        let in_range = |v: i64| (0..r).contains(&v);
        let mut visit = |x: i64, y: i64, z: i64| {
            if in_range(x) && in_range(y) && in_range(z) {
                consider((x as u32, y as u32, z as u32));
            }
        };
        if shell == 0 {
            visit(cx, cy, cz);
            return;
        }
        for dz in -shell..=shell {
            for dy in -shell..=shell {
                if dz.abs() == shell || dy.abs() == shell {
                    for dx in -shell..=shell {
                        visit(cx + dx, cy + dy, cz + dz);
                    }
                } else {
                    visit(cx - shell, cy + dy, cz + dz);
                    visit(cx + shell, cy + dy, cz + dz);
                }
            }
        }
    }
}

/// A labeled mesh plus the part ids that ended up with zero faces.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub mesh: TriMesh,
    pub empty_parts: Vec<u32>,
}

/// Label every face with the part of the labeled voxel center nearest to
/// its centroid.
pub fn segment_mesh(mesh: &TriMesh, labels: &PartLabeledGrid) -> Result<Segmented, SegmentationError> {
    if mesh.is_empty() {
        return Err(SegmentationError::EmptyMesh);
    }
    let bbox = mesh.bbox().expect("non-empty");
    let eps = 1e-9;
    if bbox.min.iter().any(|&c| c < -eps) || bbox.max.iter().any(|&c| c > 1.0 + eps) {
        return Err(SegmentationError::NotNormalized);
    }
    let nn = NearestLabel::new(labels)?;
    let face_labels: Vec<u32> = (0..mesh.faces.len())
        .map(|f| nn.query(&mesh.face_centroid(f)))
        .collect();

    let mut used = vec![false; labels.part_count() as usize];
    for &l in &face_labels {
        used[l as usize] = true;
    }
    let empty_parts = (0..labels.part_count()).filter(|&i| !used[i as usize]).collect();

    let mut out = mesh.clone();
    out.face_labels = Some(face_labels);
    Ok(Segmented { mesh: out, empty_parts })
}

/// Per-part meshes split from a labeled mesh, plus the ids of empty parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitParts {
    pub meshes: Vec<TriMesh>,
    pub empty_parts: Vec<u32>,
}

/// Split a labeled mesh into one mesh per part. Vertices are re-indexed
/// compactly per part (shared vertices get duplicated across parts); the
/// face multiset of the outputs equals the input's exactly. Parts with no
/// faces come back as empty meshes and are listed in `empty_parts`.
pub fn split_parts(mesh: &TriMesh, part_count: u32) -> Result<SplitParts, SegmentationError> {
    let labels = mesh.face_labels.as_ref().ok_or(SegmentationError::MissingLabels)?;
    for (face, &label) in labels.iter().enumerate() {
        if label >= part_count {
            return Err(SegmentationError::LabelOutOfRange {
                face,
                label,
                part_count,
            });
        }
    }

    let mut meshes = Vec::with_capacity(part_count as usize);
    let mut empty_parts = Vec::new();
    for part in 0..part_count {
        let mut remap: Vec<Option<u32>> = vec![None; mesh.vertices.len()];
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (f, &label) in labels.iter().enumerate() {
            if label != part {
                continue;
            }
            let mut tri = [0u32; 3];
            for (k, &v) in mesh.faces[f].iter().enumerate() {
                tri[k] = *remap[v as usize].get_or_insert_with(|| {
                    vertices.push(mesh.vertices[v as usize]);
                    (vertices.len() - 1) as u32
                });
            }
            faces.push(tri);
        }
        if faces.is_empty() {
            empty_parts.push(part);
        }
        meshes.push(TriMesh {
            vertices,
            faces,
            face_labels: None,
        });
    }
    Ok(SplitParts { meshes, empty_parts })
}

/// Transfer coarse labels onto a finer occupancy grid: each occupied fine
/// cell takes the label of the nearest labeled coarse cell center (same
/// distance and tie rules as face labeling). The part count carries over;
/// ids can come back unused on sparse fine grids.
pub fn upsample_labels(
    labels: &PartLabeledGrid,
    fine: &VoxelGrid,
) -> Result<PartLabeledGrid, SegmentationError> {
    if fine.resolution() % labels.resolution() != 0 {
        return Err(SegmentationError::ResolutionMismatch {
            fine: fine.resolution(),
            coarse: labels.resolution(),
        });
    }
    if fine.is_empty() {
        return Ok(PartLabeledGrid::new(fine.resolution(), labels.part_count(), [])?);
    }
    let nn = NearestLabel::new(labels)?;
    let entries: Vec<((u32, u32, u32), u32)> = fine
        .cells()
        .map(|cell| {
            let center = fine.cell_center(cell);
            (cell, nn.query(&center))
        })
        .collect();
    Ok(PartLabeledGrid::new(fine.resolution(), labels.part_count(), entries)?)
}
