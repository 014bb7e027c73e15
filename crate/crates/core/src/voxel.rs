//! Binary and part-labeled voxel grids at resolution `R`, mesh voxelization,
//! and the linear index map the token codec builds on.
//!
//! The index ordering is x-fastest: `idx = x + R*y + R^2*z`, covering
//! `[0, R^3)`. Cells are stored as sorted linear indices so iteration order
//! is canonical everywhere.

use crate::mesh::TriMesh;
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Resolutions above this are out of scope; the flood fill and bit masks
/// assume it.
pub const MAX_RESOLUTION: u32 = 128;

#[derive(Debug, Error)]
pub enum VoxelError {
    #[error("resolution {0} invalid (must be in 1..={MAX_RESOLUTION})")]
    InvalidResolution(u32),
    #[error("cell ({0}, {1}, {2}) out of range for resolution {3}")]
    CellOutOfRange(u32, u32, u32, u32),
    #[error("linear index {0} out of range for resolution {1}")]
    IndexOutOfRange(u32, u32),
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("mesh is not normalized to [0,1]^3 (bbox {0:?})")]
    NotNormalized(String),
    #[error("downsample factor {factor} does not divide resolution {resolution}")]
    NonDivisibleFactor { factor: u32, resolution: u32 },
    #[error("downsample factor {0} is not a power of two")]
    NonPowerOfTwoFactor(u32),
    #[error("part list is empty")]
    EmptyPartList,
    #[error("part {0} has no voxels")]
    EmptyPart(usize),
    #[error("part {0} has no voxels after overlap resolution")]
    PartFullyOverlapped(usize),
    #[error("resolution mismatch: expected {expected}, got {got}")]
    ResolutionMismatch { expected: u32, got: u32 },
    #[error("part id {id} out of range for part count {part_count}")]
    LabelOutOfRange { id: u32, part_count: u32 },
}

/// Voxelization rule: `Surface` marks every cell whose closed box intersects
/// a triangle; `Solid` additionally fills the interior via an outside flood
/// fill on the complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoxelizeMode {
    Surface,
    Solid,
}

/// Map a cell coordinate to its linear index (x-fastest ordering).
pub fn linear_index(cell: (u32, u32, u32), resolution: u32) -> Result<u32, VoxelError> {
    let (x, y, z) = cell;
    if x >= resolution || y >= resolution || z >= resolution {
        return Err(VoxelError::CellOutOfRange(x, y, z, resolution));
    }
    Ok(x + resolution * y + resolution * resolution * z)
}

/// Inverse of [`linear_index`].
pub fn delinearize(index: u32, resolution: u32) -> (u32, u32, u32) {
    let r = resolution;
    (index % r, (index / r) % r, index / (r * r))
}

/// Sparse binary occupancy grid. Cells are stored as a sorted, deduplicated
/// vector of linear indices, so iteration is canonical and membership is a
/// binary search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelGrid {
    resolution: u32,
    cells: Vec<u32>,
}

impl VoxelGrid {
    pub fn new(resolution: u32) -> Result<Self, VoxelError> {
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(VoxelError::InvalidResolution(resolution));
        }
        Ok(VoxelGrid {
            resolution,
            cells: Vec::new(),
        })
    }

    fn from_raw(resolution: u32, mut cells: Vec<u32>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        VoxelGrid { resolution, cells }
    }

    pub fn from_cells(
        resolution: u32,
        cells: impl IntoIterator<Item = (u32, u32, u32)>,
    ) -> Result<Self, VoxelError> {
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(VoxelError::InvalidResolution(resolution));
        }
        let indices = cells
            .into_iter()
            .map(|c| linear_index(c, resolution))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(VoxelGrid::from_raw(resolution, indices))
    }

    pub fn from_indices(
        resolution: u32,
        indices: impl IntoIterator<Item = u32>,
    ) -> Result<Self, VoxelError> {
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(VoxelError::InvalidResolution(resolution));
        }
        let max = resolution * resolution * resolution;
        let collected: Vec<u32> = indices.into_iter().collect();
        if let Some(&bad) = collected.iter().find(|&&i| i >= max) {
            return Err(VoxelError::IndexOutOfRange(bad, resolution));
        }
        Ok(VoxelGrid::from_raw(resolution, collected))
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn insert(&mut self, cell: (u32, u32, u32)) -> Result<(), VoxelError> {
        let idx = linear_index(cell, self.resolution)?;
        if let Err(pos) = self.cells.binary_search(&idx) {
            self.cells.insert(pos, idx);
        }
        Ok(())
    }

    pub fn contains(&self, cell: (u32, u32, u32)) -> bool {
        linear_index(cell, self.resolution)
            .map(|i| self.cells.binary_search(&i).is_ok())
            .unwrap_or(false)
    }

    pub fn contains_index(&self, index: u32) -> bool {
        self.cells.binary_search(&index).is_ok()
    }

    /// Occupied linear indices in ascending order.
    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.cells.iter().copied()
    }

    /// Occupied cell coordinates in ascending linear-index order.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        let r = self.resolution;
        self.cells.iter().map(move |&i| delinearize(i, r))
    }

    /// Center of a cell in the normalized `[0,1]^3` frame.
    pub fn cell_center(&self, cell: (u32, u32, u32)) -> Point3<f64> {
        let r = self.resolution as f64;
        Point3::new(
            (cell.0 as f64 + 0.5) / r,
            (cell.1 as f64 + 0.5) / r,
            (cell.2 as f64 + 0.5) / r,
        )
    }

    pub fn is_subset(&self, other: &VoxelGrid) -> bool {
        self.resolution == other.resolution
            && self.cells.iter().all(|i| other.contains_index(*i))
    }

    /// Inclusive cell-coordinate bounding box of the occupied set.
    pub fn cell_bbox(&self) -> Option<((u32, u32, u32), (u32, u32, u32))> {
        let mut it = self.cells();
        let first = it.next()?;
        let (mut min, mut max) = (first, first);
        for c in it {
            min = (min.0.min(c.0), min.1.min(c.1), min.2.min(c.2));
            max = (max.0.max(c.0), max.1.max(c.1), max.2.max(c.2));
        }
        Some((min, max))
    }
}

/// Voxelize a mesh normalized to `[0,1]^3`.
///
/// Surface cells are found by exact closed triangle/box overlap (separating
/// axis test) rather than center sampling, so thin parts survive at coarse
/// resolutions. Touching counts as intersecting.
pub fn voxelize(mesh: &TriMesh, resolution: u32, mode: VoxelizeMode) -> Result<VoxelGrid, VoxelError> {
    if mesh.is_empty() {
        return Err(VoxelError::EmptyMesh);
    }
    let bbox = mesh.bbox().expect("non-empty mesh");
    let eps = 1e-9;
    if bbox.min.iter().any(|&c| c < -eps) || bbox.max.iter().any(|&c| c > 1.0 + eps) {
        return Err(VoxelError::NotNormalized(format!(
            "min {:?} max {:?}",
            bbox.min, bbox.max
        )));
    }

    if resolution == 0 || resolution > MAX_RESOLUTION {
        return Err(VoxelError::InvalidResolution(resolution));
    }
    let mut hits: Vec<u32> = Vec::new();
    let r = resolution as f64;
    let rmax = resolution as i64 - 1;
    for f in &mesh.faces {
        let tri = [
            mesh.vertices[f[0] as usize],
            mesh.vertices[f[1] as usize],
            mesh.vertices[f[2] as usize],
        ];
        let (mut lo, mut hi) = ([i64::MAX; 3], [i64::MIN; 3]);
        for v in &tri {
            for k in 0..3 {
                let c = (v[k] * r).floor() as i64;
                lo[k] = lo[k].min(c - 1).max(0);
                hi[k] = hi[k].max(c + 1).min(rmax);
            }
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let center = Vector3::new(
                        (x as f64 + 0.5) / r,
                        (y as f64 + 0.5) / r,
                        (z as f64 + 0.5) / r,
                    );
                    let half = Vector3::repeat(0.5 / r);
                    if tri_box_overlap(&center, &half, &tri) {
                        hits.push(
                            x as u32 + resolution * y as u32 + resolution * resolution * z as u32,
                        );
                    }
                }
            }
        }
    }

    let mut grid = VoxelGrid::from_raw(resolution, hits);
    if mode == VoxelizeMode::Solid {
        fill_interior(&mut grid);
    }
    Ok(grid)
}

/// Flood from the grid boundary through unoccupied cells; whatever the flood
/// cannot reach is interior and gets filled.
fn fill_interior(grid: &mut VoxelGrid) {
    let r = grid.resolution;
    let n = (r * r * r) as usize;
    let mut occupied = vec![false; n];
    for &i in &grid.cells {
        occupied[i as usize] = true;
    }
    let mut outside = vec![false; n];
    let mut queue = VecDeque::new();
    let idx = |x: u32, y: u32, z: u32| (x + r * y + r * r * z) as usize;

    for a in 0..r {
        for b in 0..r {
            for &(x, y, z) in &[
                (0, a, b),
                (r - 1, a, b),
                (a, 0, b),
                (a, r - 1, b),
                (a, b, 0),
                (a, b, r - 1),
            ] {
                let i = idx(x, y, z);
                if !occupied[i] && !outside[i] {
                    outside[i] = true;
                    queue.push_back((x, y, z));
                }
            }
        }
    }
    while let Some((x, y, z)) = queue.pop_front() {
        let neighbors = [
            (x.wrapping_sub(1), y, z),
            (x + 1, y, z),
            (x, y.wrapping_sub(1), z),
            (x, y + 1, z),
            (x, y, z.wrapping_sub(1)),
            (x, y, z + 1),
        ];
        for (nx, ny, nz) in neighbors {
            if nx < r && ny < r && nz < r {
                let i = idx(nx, ny, nz);
                if !outside[i] && !occupied[i] {
                    outside[i] = true;
                    queue.push_back((nx, ny, nz));
                }
            }
        }
    }
    grid.cells = (0..n as u32).filter(|&i| !outside[i as usize]).collect();
}

/// Closed AABB/triangle overlap via the separating axis test
/// (box axes, triangle plane, and the nine edge cross products).
pub fn tri_box_overlap(center: &Vector3<f64>, half: &Vector3<f64>, tri: &[Point3<f64>; 3]) -> bool {
    let v0 = tri[0].coords - center;
    let v1 = tri[1].coords - center;
    let v2 = tri[2].coords - center;
    let e0 = v1 - v0;
    let e1 = v2 - v1;
    let e2 = v0 - v2;

    // 9 edge cross-product axes: e_i x unit_k
    for e in [e0, e1, e2] {
        for axis in [
            Vector3::new(0.0, -e.z, e.y),
            Vector3::new(e.z, 0.0, -e.x),
            Vector3::new(-e.y, e.x, 0.0),
        ] {
            let p0 = axis.dot(&v0);
            let p1 = axis.dot(&v1);
            let p2 = axis.dot(&v2);
            let rad =
                half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
            if p0.min(p1).min(p2) > rad || p0.max(p1).max(p2) < -rad {
                return false;
            }
        }
    }

    // box axes
    for k in 0..3 {
        let min = v0[k].min(v1[k]).min(v2[k]);
        let max = v0[k].max(v1[k]).max(v2[k]);
        if min > half[k] || max < -half[k] {
            return false;
        }
    }

    // triangle plane
    let normal = e0.cross(&e1);
    let d = -normal.dot(&v0);
    plane_box_overlap(&normal, d, half)
}

fn plane_box_overlap(normal: &Vector3<f64>, d: f64, half: &Vector3<f64>) -> bool {
    let mut vmin = Vector3::zeros();
    let mut vmax = Vector3::zeros();
    for k in 0..3 {
        if normal[k] > 0.0 {
            vmin[k] = -half[k];
            vmax[k] = half[k];
        } else {
            vmin[k] = half[k];
            vmax[k] = -half[k];
        }
    }
    if normal.dot(&vmin) + d > 0.0 {
        return false;
    }
    normal.dot(&vmax) + d >= 0.0
}

/// Coarsen by an integer power-of-two factor; a coarse cell is occupied iff
/// any of its `factor^3` children is occupied.
pub fn downsample(grid: &VoxelGrid, factor: u32) -> Result<VoxelGrid, VoxelError> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(VoxelError::NonPowerOfTwoFactor(factor));
    }
    if grid.resolution % factor != 0 {
        return Err(VoxelError::NonDivisibleFactor {
            factor,
            resolution: grid.resolution,
        });
    }
    let coarse_r = grid.resolution / factor;
    let coarse: Vec<u32> = grid
        .cells()
        .map(|(x, y, z)| x / factor + coarse_r * (y / factor) + coarse_r * coarse_r * (z / factor))
        .collect();
    Ok(VoxelGrid::from_raw(coarse_r, coarse))
}

/// Occupancy grid where every occupied cell carries a part id in
/// `[0, part_count)`.
///
/// [`label_parts`] guarantees every id is used at least once; derived grids
/// (label upsampling, segmentation transfer) keep `part_count` but may leave
/// an id unused, which callers surface as a warning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartLabeledGrid {
    resolution: u32,
    part_count: u32,
    cells: BTreeMap<u32, u32>,
}

impl PartLabeledGrid {
    pub fn new(
        resolution: u32,
        part_count: u32,
        cells: impl IntoIterator<Item = ((u32, u32, u32), u32)>,
    ) -> Result<Self, VoxelError> {
        if resolution == 0 || resolution > MAX_RESOLUTION {
            return Err(VoxelError::InvalidResolution(resolution));
        }
        let mut map = BTreeMap::new();
        for (cell, id) in cells {
            if id >= part_count {
                return Err(VoxelError::LabelOutOfRange { id, part_count });
            }
            map.insert(linear_index(cell, resolution)?, id);
        }
        Ok(PartLabeledGrid {
            resolution,
            part_count,
            cells: map,
        })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn part_count(&self) -> u32 {
        self.part_count
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn label_of(&self, cell: (u32, u32, u32)) -> Option<u32> {
        linear_index(cell, self.resolution)
            .ok()
            .and_then(|i| self.cells.get(&i).copied())
    }

    /// (cell, part id) pairs in ascending linear-index order.
    pub fn entries(&self) -> impl Iterator<Item = ((u32, u32, u32), u32)> + '_ {
        let r = self.resolution;
        self.cells.iter().map(move |(&i, &id)| (delinearize(i, r), id))
    }

    /// All occupied cells regardless of label.
    pub fn occupancy(&self) -> VoxelGrid {
        VoxelGrid {
            resolution: self.resolution,
            cells: self.cells.keys().copied().collect(),
        }
    }

    /// Cells belonging to one part.
    pub fn part_grid(&self, id: u32) -> VoxelGrid {
        VoxelGrid {
            resolution: self.resolution,
            cells: self
                .cells
                .iter()
                .filter(|&(_, &l)| l == id)
                .map(|(&i, _)| i)
                .collect(),
        }
    }

    /// Part ids in `[0, part_count)` that label no cell.
    pub fn unused_parts(&self) -> Vec<u32> {
        let mut used = vec![false; self.part_count as usize];
        for &id in self.cells.values() {
            used[id as usize] = true;
        }
        (0..self.part_count).filter(|&i| !used[i as usize]).collect()
    }
}

/// Assemble per-part grids into one labeled grid. Cells claimed by several
/// parts go to the lowest part id. Every part must keep at least one cell.
pub fn label_parts(parts: &[VoxelGrid]) -> Result<PartLabeledGrid, VoxelError> {
    if parts.is_empty() {
        return Err(VoxelError::EmptyPartList);
    }
    let resolution = parts[0].resolution;
    let mut cells: BTreeMap<u32, u32> = BTreeMap::new();
    for (id, part) in parts.iter().enumerate() {
        if part.resolution != resolution {
            return Err(VoxelError::ResolutionMismatch {
                expected: resolution,
                got: part.resolution,
            });
        }
        if part.is_empty() {
            return Err(VoxelError::EmptyPart(id));
        }
        for i in part.indices() {
            cells.entry(i).or_insert(id as u32);
        }
    }
    let mut used = vec![false; parts.len()];
    for &id in cells.values() {
        used[id as usize] = true;
    }
    if let Some(lost) = used.iter().position(|&u| !u) {
        return Err(VoxelError::PartFullyOverlapped(lost));
    }
    Ok(PartLabeledGrid {
        resolution,
        part_count: parts.len() as u32,
        cells,
    })
}

/// Inclusive cell-coordinate box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellBox {
    pub min: (u32, u32, u32),
    pub max: (u32, u32, u32),
}

/// Greedy merge of a cell set into axis-aligned boxes: take the lowest
/// remaining cell, grow a run along x, widen it along y, then deepen along
/// z. Deterministic, covers every cell exactly once.
pub fn cuboidify(grid: &VoxelGrid) -> Vec<CellBox> {
    let r = grid.resolution;
    let mut remaining: BTreeSet<u32> = grid.cells.iter().copied().collect();
    let mut boxes = Vec::new();
    let idx = |x: u32, y: u32, z: u32| x + r * y + r * r * z;

    while let Some(&first) = remaining.iter().next() {
        let (x0, y0, z0) = delinearize(first, r);
        let mut x1 = x0;
        while x1 + 1 < r && remaining.contains(&idx(x1 + 1, y0, z0)) {
            x1 += 1;
        }
        let mut y1 = y0;
        'grow_y: while y1 + 1 < r {
            for x in x0..=x1 {
                if !remaining.contains(&idx(x, y1 + 1, z0)) {
                    break 'grow_y;
                }
            }
            y1 += 1;
        }
        let mut z1 = z0;
        'grow_z: while z1 + 1 < r {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if !remaining.contains(&idx(x, y, z1 + 1)) {
                        break 'grow_z;
                    }
                }
            }
            z1 += 1;
        }
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    remaining.remove(&idx(x, y, z));
                }
            }
        }
        boxes.push(CellBox {
            min: (x0, y0, z0),
            max: (x1, y1, z1),
        });
    }
    boxes
}
