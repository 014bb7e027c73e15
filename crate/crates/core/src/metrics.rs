//! Geometry and physical-attribute metrics: Chamfer distance, F-score,
//! orthographic-projection PSNR, absolute-scale error and voxel IoU.
//!
//! The point-set metrics run on a uniform grid index but are required to
//! reproduce the plain O(|A||B|) scan bit for bit: nearest distances use the
//! same squared-distance formula, candidates only ever shrink to the true
//! minimum, and per-point results accumulate in input order.
//!
//! Chamfer is not a metric (no triangle inequality), so no such property is
//! asserted anywhere.

use crate::mesh::TriMesh;
use crate::voxel::{VoxelGrid, VoxelizeMode};
use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("tau {0} must be positive")]
    BadTau(f64),
    #[error("resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(u32, u32),
    #[error("geometry is empty")]
    EmptyGeometry,
    #[error("gt extent {0} must be positive")]
    BadExtent(f64),
    #[error(transparent)]
    Voxel(#[from] crate::voxel::VoxelError),
}

/// PSNR values are capped here; identical inputs (zero MSE) report the cap.
pub const PSNR_CAP: f64 = 99.0;
/// Side length in pixels of each orthographic projection.
pub const PROJECTION_SIZE: usize = 256;

/// Uniform grid over a point set for nearest-neighbor pruning.
struct PointGrid<'a> {
    points: &'a [Point3<f64>],
    origin: Point3<f64>,
    cell: f64,
    dims: [i64; 3],
    buckets: Vec<Vec<u32>>,
}

impl<'a> PointGrid<'a> {
    fn new(points: &'a [Point3<f64>]) -> Self {
        let mut min = points[0];
        let mut max = points[0];
        for p in points {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        let extent = (max - min).norm().max(1e-12);
        let per_axis = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell = (extent / per_axis).max(1e-12);
        let dims = std::array::from_fn(|k| ((max[k] - min[k]) / cell).floor() as i64 + 1);
        let mut grid = PointGrid {
            points,
            origin: min,
            cell,
            dims,
            buckets: vec![Vec::new(); (dims[0] * dims[1] * dims[2]) as usize],
        };
        for (i, p) in points.iter().enumerate() {
            let c = grid.cell_of(p);
            let b = grid.bucket_index(c).expect("in-range by construction");
            grid.buckets[b].push(i as u32);
        }
        grid
    }

    fn cell_of(&self, p: &Point3<f64>) -> [i64; 3] {
        std::array::from_fn(|k| ((p[k] - self.origin[k]) / self.cell).floor() as i64)
    }

    fn bucket_index(&self, c: [i64; 3]) -> Option<usize> {
        if (0..3).any(|k| c[k] < 0 || c[k] >= self.dims[k]) {
            return None;
        }
        Some((c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])) as usize)
    }

    /// Exact min squared distance from `p` to the point set.
    fn nearest_d2(&self, p: &Point3<f64>) -> f64 {
        // start from the nearest in-range bucket; `slack` is the distance
        // from p to that bucket's box (zero for queries inside the grid) and
        // widens the shell prune accordingly
        let raw = self.cell_of(p);
        let qc: [i64; 3] = std::array::from_fn(|k| raw[k].clamp(0, self.dims[k] - 1));
        let mut slack2 = 0.0;
        for k in 0..3 {
            let lo = self.origin[k] + qc[k] as f64 * self.cell;
            let hi = lo + self.cell;
            let d = (lo - p[k]).max(p[k] - hi).max(0.0);
            slack2 += d * d;
        }
        let slack = slack2.sqrt();

        let max_shell = (0..3)
            .map(|k| qc[k].max(self.dims[k] - 1 - qc[k]))
            .max()
            .unwrap();
        let mut best = f64::INFINITY;
        for shell in 0..=max_shell {
            if best.is_finite() {
                // any point in a shell-k bucket is at least (k-1)*cell from
                // the start bucket's box, hence at least that minus `slack`
                // from p
                let lower = ((shell - 1).max(0) as f64) * self.cell - slack;
                if lower > 0.0 && lower * lower > best {
                    break;
                }
            }
            self.for_shell(qc, shell, |i| {
                let q = &self.points[i as usize];
                let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
                if d2 < best {
                    best = d2;
                }
            });
        }
        best
    }

    fn for_shell(&self, c: [i64; 3], shell: i64, mut f: impl FnMut(u32)) {
        let mut visit = |x: i64, y: i64, z: i64| {
            if let Some(b) = self.bucket_index([x, y, z]) {
                for &i in &self.buckets[b] {
                    f(i);
                }
            }
        };
        if shell == 0 {
            visit(c[0], c[1], c[2]);
            return;
        }
        for dz in -shell..=shell {
            for dy in -shell..=shell {
                if dz.abs() == shell || dy.abs() == shell {
                    for dx in -shell..=shell {
                        visit(c[0] + dx, c[1] + dy, c[2] + dz);
                    }
                } else {
                    visit(c[0] - shell, c[1] + dy, c[2] + dz);
                    visit(c[0] + shell, c[1] + dy, c[2] + dz);
                }
            }
        }
    }
}

/// Symmetric mean nearest-neighbor distance:
/// `mean_a min_b |a-b| + mean_b min_a |a-b|`.
pub fn chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptyPointSet);
    }
    let ga = PointGrid::new(a);
    let gb = PointGrid::new(b);
    let mut sum_a = 0.0;
    for p in a {
        sum_a += gb.nearest_d2(p).sqrt();
    }
    let mut sum_b = 0.0;
    for p in b {
        sum_b += ga.nearest_d2(p).sqrt();
    }
    Ok(sum_a / a.len() as f64 + sum_b / b.len() as f64)
}

/// F-score at distance `tau`, as a percentage. Precision is the fraction of
/// predicted points within `tau` of the ground truth; recall is symmetric;
/// `F = 200 P R / (P + R)`, zero when both are zero.
pub fn fscore(pred: &[Point3<f64>], gt: &[Point3<f64>], tau: f64) -> Result<f64, MetricError> {
    if pred.is_empty() || gt.is_empty() {
        return Err(MetricError::EmptyPointSet);
    }
    if tau <= 0.0 || tau.is_nan() {
        return Err(MetricError::BadTau(tau));
    }
    let gp = PointGrid::new(pred);
    let gg = PointGrid::new(gt);
    let within = |points: &[Point3<f64>], index: &PointGrid| {
        points
            .iter()
            .filter(|p| index.nearest_d2(p).sqrt() <= tau)
            .count() as f64
    };
    let precision = within(pred, &gg) / pred.len() as f64;
    let recall = within(gt, &gp) / gt.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(200.0 * precision * recall / (precision + recall))
}

/// Default F-score threshold: 5% of the ground truth bounding-box diagonal.
pub fn default_tau(gt: &[Point3<f64>]) -> f64 {
    let mut min = gt[0];
    let mut max = gt[0];
    for p in gt {
        for k in 0..3 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    0.05 * (max - min).norm()
}

/// The six orthographic views: along each signed axis. Opposite views are
/// mirrored in `u` so each is what a camera on that side would see.
const VIEWS: [(usize, usize, usize, bool); 6] = [
    // (dropped axis, u axis, v axis, mirror u)
    (0, 1, 2, false), // +X
    (0, 1, 2, true),  // -X
    (1, 0, 2, true),  // +Y
    (1, 0, 2, false), // -Y
    (2, 0, 1, false), // +Z
    (2, 0, 1, true),  // -Z
];

type Silhouettes = Vec<Vec<bool>>;

fn blank_views() -> Silhouettes {
    vec![vec![false; PROJECTION_SIZE * PROJECTION_SIZE]; 6]
}

fn render_grid(grid: &VoxelGrid) -> Silhouettes {
    let mut views = blank_views();
    let s = PROJECTION_SIZE as f64;
    let r = grid.resolution() as f64;
    for cell in grid.cells() {
        let c = [cell.0 as f64, cell.1 as f64, cell.2 as f64];
        for (view, &(_, ua, va, mirror)) in VIEWS.iter().enumerate() {
            let (lo_u, hi_u) = (c[ua] / r, (c[ua] + 1.0) / r);
            let (lo_v, hi_v) = (c[va] / r, (c[va] + 1.0) / r);
            let iu0 = (lo_u * s).floor().max(0.0) as usize;
            let iu1 = ((hi_u * s).ceil() as usize).min(PROJECTION_SIZE);
            let iv0 = (lo_v * s).floor().max(0.0) as usize;
            let iv1 = ((hi_v * s).ceil() as usize).min(PROJECTION_SIZE);
            for iv in iv0..iv1 {
                let cv = (iv as f64 + 0.5) / s;
                if cv < lo_v || cv >= hi_v {
                    continue;
                }
                for iu in iu0..iu1 {
                    let cu = (iu as f64 + 0.5) / s;
                    if cu < lo_u || cu >= hi_u {
                        continue;
                    }
                    let px = if mirror { PROJECTION_SIZE - 1 - iu } else { iu };
                    views[view][iv * PROJECTION_SIZE + px] = true;
                }
            }
        }
    }
    views
}

fn render_mesh(mesh: &TriMesh) -> Silhouettes {
    let mut views = blank_views();
    let s = PROJECTION_SIZE as f64;
    for f in &mesh.faces {
        let tri = [
            mesh.vertices[f[0] as usize],
            mesh.vertices[f[1] as usize],
            mesh.vertices[f[2] as usize],
        ];
        for (view, &(_, ua, va, mirror)) in VIEWS.iter().enumerate() {
            let p: Vec<(f64, f64)> = tri.iter().map(|v| (v[ua], v[va])).collect();
            let area2 = (p[1].0 - p[0].0) * (p[2].1 - p[0].1)
                - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
            if area2 == 0.0 {
                continue; // edge-on triangles project to a line
            }
            let lo_u = p.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
            let hi_u = p.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max);
            let lo_v = p.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
            let hi_v = p.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
            let iu0 = ((lo_u * s - 0.5).floor().max(0.0)) as usize;
            let iu1 = (((hi_u * s + 0.5).ceil()) as usize).min(PROJECTION_SIZE);
            let iv0 = ((lo_v * s - 0.5).floor().max(0.0)) as usize;
            let iv1 = (((hi_v * s + 0.5).ceil()) as usize).min(PROJECTION_SIZE);
            for iv in iv0..iv1 {
                let cv = (iv as f64 + 0.5) / s;
                for iu in iu0..iu1 {
                    let cu = (iu as f64 + 0.5) / s;
                    let e = |a: (f64, f64), b: (f64, f64)| {
                        (b.0 - a.0) * (cv - a.1) - (cu - a.0) * (b.1 - a.1)
                    };
                    let (e0, e1, e2) = (e(p[0], p[1]), e(p[1], p[2]), e(p[2], p[0]));
                    let inside = if area2 > 0.0 {
                        e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0
                    } else {
                        e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0
                    };
                    if inside {
                        let px = if mirror { PROJECTION_SIZE - 1 - iu } else { iu };
                        views[view][iv * PROJECTION_SIZE + px] = true;
                    }
                }
            }
        }
    }
    views
}

fn psnr_from_views(pred: &Silhouettes, gt: &Silhouettes) -> f64 {
    let total = 6 * PROJECTION_SIZE * PROJECTION_SIZE;
    let mut wrong = 0usize;
    for (pv, gv) in pred.iter().zip(gt) {
        for (a, b) in pv.iter().zip(gv) {
            if a != b {
                wrong += 1;
            }
        }
    }
    if wrong == 0 {
        return PSNR_CAP;
    }
    let mse = wrong as f64 / total as f64;
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
}

/// Mean PSNR over six axis-aligned orthographic occupancy silhouettes
/// rendered at 256^2 (pooled MSE across all views). Identical inputs report
/// the 99 dB cap.
pub fn projection_psnr_grids(pred: &VoxelGrid, gt: &VoxelGrid) -> Result<f64, MetricError> {
    if pred.resolution() != gt.resolution() {
        return Err(MetricError::ResolutionMismatch(
            pred.resolution(),
            gt.resolution(),
        ));
    }
    Ok(psnr_from_views(&render_grid(pred), &render_grid(gt)))
}

/// Same metric with silhouettes rasterized directly from normalized meshes.
pub fn projection_psnr_meshes(pred: &TriMesh, gt: &TriMesh) -> Result<f64, MetricError> {
    if pred.is_empty() || gt.is_empty() {
        return Err(MetricError::EmptyGeometry);
    }
    Ok(psnr_from_views(&render_mesh(pred), &render_mesh(gt)))
}

/// Mean relative L1 error over the three bounding-box extents.
pub fn scale_error(pred: Vector3<f64>, gt: Vector3<f64>) -> Result<f64, MetricError> {
    for k in 0..3 {
        if !(gt[k] > 0.0 && gt[k].is_finite()) {
            return Err(MetricError::BadExtent(gt[k]));
        }
    }
    Ok((0..3).map(|k| ((pred[k] - gt[k]) / gt[k]).abs()).sum::<f64>() / 3.0)
}

/// Intersection over union of two occupancy grids; both empty counts as 1.
pub fn voxel_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64, MetricError> {
    if a.resolution() != b.resolution() {
        return Err(MetricError::ResolutionMismatch(a.resolution(), b.resolution()));
    }
    if a.is_empty() && b.is_empty() {
        return Ok(1.0);
    }
    let inter = a.indices().filter(|&i| b.contains_index(i)).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Area-weighted surface samples with a fixed seed, for mesh-level Chamfer
/// and F-score.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<Point3<f64>>, MetricError> {
    if mesh.is_empty() {
        return Err(MetricError::EmptyGeometry);
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(MetricError::EmptyGeometry);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.gen::<f64>() * total;
        let f = cumulative.partition_point(|&c| c < t).min(mesh.faces.len() - 1);
        let [a, b, c] = mesh.faces[f];
        let (a, b, c) = (
            mesh.vertices[a as usize],
            mesh.vertices[b as usize],
            mesh.vertices[c as usize],
        );
        let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
        let su = r1.sqrt();
        let (wa, wb, wc) = (1.0 - su, su * (1.0 - r2), su * r2);
        out.push(Point3::new(
            wa * a.x + wb * b.x + wc * c.x,
            wa * a.y + wb * b.y + wc * c.y,
            wa * a.z + wb * b.z + wc * c.z,
        ));
    }
    Ok(out)
}

/// Voxelize a normalized mesh for grid-level metrics.
pub fn voxelize_for_metrics(mesh: &TriMesh, resolution: u32) -> Result<VoxelGrid, MetricError> {
    Ok(crate::voxel::voxelize(mesh, resolution, VoxelizeMode::Surface)?)
}

/// One row of metric output; serializes to JSON and CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub cd: f64,
    pub fscore: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "psnr,cd,fscore,scale_error,iou\n{:.6},{:.6},{:.6},{},{}\n",
            self.psnr,
            self.cd,
            self.fscore,
            opt(self.scale_error),
            opt(self.iou)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    fn pts(v: &[(f64, f64, f64)]) -> Vec<Point3<f64>> {
        v.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect()
    }

    #[test]
    fn chamfer_identity_zero() {
        let a = pts(&[(0.0, 0.0, 0.0), (1.0, 2.0, 3.0), (0.5, 0.5, 0.5)]);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_two_singletons() {
        let a = pts(&[(0.0, 0.0, 0.0)]);
        let b = pts(&[(1.0, 0.0, 0.0)]);
        assert_eq!(chamfer(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn chamfer_is_symmetric() {
        let a = pts(&[(0.0, 0.0, 0.0), (0.3, 0.8, 0.1), (2.0, 1.0, 0.0)]);
        let b = pts(&[(1.0, 0.0, 0.5), (0.2, 0.2, 0.2)]);
        assert_eq!(chamfer(&a, &b).unwrap(), chamfer(&b, &a).unwrap());
    }

    #[test]
    fn chamfer_rejects_empty() {
        let a = pts(&[(0.0, 0.0, 0.0)]);
        assert!(matches!(chamfer(&a, &[]), Err(MetricError::EmptyPointSet)));
    }

    #[test]
    fn fscore_identity_is_100() {
        let a = pts(&[(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)]);
        for tau in [1e-9, 0.5, 100.0] {
            assert_eq!(fscore(&a, &a, tau).unwrap(), 100.0);
        }
    }

    #[test]
    fn fscore_disjoint_far_is_zero() {
        let a = pts(&[(0.0, 0.0, 0.0)]);
        let b = pts(&[(100.0, 0.0, 0.0)]);
        assert_eq!(fscore(&a, &b, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn fscore_harmonic_mean() {
        // pred: one point on gt, one far; gt fully covered.
        // P = 0.5, R = 1.0 -> F = 200*0.5/1.5 = 66.67
        let pred = pts(&[(0.0, 0.0, 0.0), (50.0, 0.0, 0.0)]);
        let gt = pts(&[(0.0, 0.0, 0.0)]);
        let f = fscore(&pred, &gt, 0.1).unwrap();
        assert!((f - 200.0 / 3.0).abs() < 1e-12);
        assert!((f - 66.67).abs() < 0.01);
    }

    #[test]
    fn fscore_rejects_bad_tau() {
        let a = pts(&[(0.0, 0.0, 0.0)]);
        assert!(matches!(fscore(&a, &a, 0.0), Err(MetricError::BadTau(_))));
        assert!(matches!(fscore(&a, &a, -1.0), Err(MetricError::BadTau(_))));
    }

    #[test]
    fn psnr_identical_grids_capped() {
        let g = crate::voxel::voxelize(&primitives::unit_cube(), 8, VoxelizeMode::Surface).unwrap();
        assert_eq!(projection_psnr_grids(&g, &g).unwrap(), PSNR_CAP);
    }

    #[test]
    fn psnr_empty_vs_full_is_zero() {
        let empty = VoxelGrid::new(8).unwrap();
        let full = VoxelGrid::from_indices(8, 0..512).unwrap();
        let p = projection_psnr_grids(&empty, &full).unwrap();
        assert_eq!(p, 0.0); // every pixel differs -> MSE 1
    }

    #[test]
    fn psnr_single_pixel_flip() {
        // flipping one pixel out of 6 * 256^2 gives
        // 10*log10(393216) ~ 55.947 dB
        let mut a = blank_views();
        let b = blank_views();
        a[0][123] = true;
        let p = psnr_from_views(&a, &b);
        assert!((p - 10.0 * (393216.0f64).log10()).abs() < 1e-12);
        assert!((p - 55.9466).abs() < 1e-3);
    }

    #[test]
    fn mesh_and_grid_silhouettes_agree_for_cube() {
        // the unit cube fills every view completely in both renderers
        let mesh = primitives::unit_cube();
        let grid = crate::voxel::voxelize(&mesh, 8, VoxelizeMode::Solid).unwrap();
        let p = psnr_from_views(&render_mesh(&mesh), &render_grid(&grid));
        assert_eq!(p, PSNR_CAP);
    }

    #[test]
    fn scale_error_cases() {
        let gt = Vector3::new(1.0, 1.0, 1.0);
        assert_eq!(scale_error(gt, gt).unwrap(), 0.0);
        assert_eq!(scale_error(gt * 2.0, gt).unwrap(), 1.0);
        let e = scale_error(Vector3::new(1.1, 0.9, 1.0), gt).unwrap();
        assert!((e - 0.2 / 3.0).abs() < 1e-12);
        assert!((e - 0.0667).abs() < 1e-4);
        assert!(matches!(
            scale_error(gt, Vector3::new(1.0, 0.0, 1.0)),
            Err(MetricError::BadExtent(_))
        ));
    }

    #[test]
    fn iou_cases() {
        let a = VoxelGrid::from_indices(8, [0, 1, 2, 3]).unwrap();
        let b = VoxelGrid::from_indices(8, [0, 1, 2, 7]).unwrap();
        assert_eq!(voxel_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(voxel_iou(&a, &b).unwrap(), 0.6); // 3 / 5
        let empty = VoxelGrid::new(8).unwrap();
        assert_eq!(voxel_iou(&empty, &empty).unwrap(), 1.0);
        let c = VoxelGrid::from_indices(8, [10]).unwrap();
        assert_eq!(voxel_iou(&c, &b).unwrap(), 0.0);
    }

    #[test]
    fn iou_three_quarters() {
        let a = VoxelGrid::from_indices(8, [0, 1, 2]).unwrap();
        let b = VoxelGrid::from_indices(8, [0, 1, 2, 3]).unwrap();
        assert_eq!(voxel_iou(&a, &b).unwrap(), 0.75);
    }

    #[test]
    fn surface_sampling_is_deterministic_and_on_surface() {
        let mesh = primitives::unit_cube();
        let a = sample_surface(&mesh, 500, 7).unwrap();
        let b = sample_surface(&mesh, 500, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_surface(&mesh, 500, 8).unwrap();
        assert_ne!(a, c);
        // cube surface points have at least one coordinate on a face plane
        for p in &a {
            let on_face = p
                .iter()
                .any(|&v| v.abs() < 1e-12 || (v - 1.0).abs() < 1e-12);
            assert!(on_face, "{p:?} not on cube surface");
        }
    }
}
