//! Seeded generation of random valid assets, for stress tests and demos.

use crate::codec::encode;
use crate::schema::{JointSpec, JointType, PartSpec, PhysicalAssetSpec};
use crate::voxel::VoxelGrid;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Seeded random occupancy grid with i.i.d. cell density; the seed fixes
/// the exact cell set.
pub fn random_grid(seed: u64, resolution: u32, density: f64) -> VoxelGrid {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = resolution * resolution * resolution;
    if density >= 1.0 {
        return VoxelGrid::from_indices(resolution, 0..n).unwrap();
    }
    let threshold = (density.max(0.0) * 2f64.powi(64)) as u64;
    VoxelGrid::from_indices(resolution, (0..n).filter(|_| rng.next_u64() < threshold)).unwrap()
}

const MATERIALS: &[&str] = &["wood", "metal", "plastic", "glass", "ceramic", "fabric"];
const AFFORDANCES: &[&str] = &[
    "pull", "push", "press", "grasp", "rotate", "slide", "support", "open",
];

/// A random valid spec with up to `max_parts` parts (at least one). Part
/// geometries are boxes confined to disjoint octant-derived regions so
/// overlap never swallows a part; the joint tree is random with part 0 as
/// root.
pub fn random_spec(rng: &mut impl Rng, max_parts: usize) -> PhysicalAssetSpec {
    let part_count = rng.gen_range(1..=max_parts.clamp(1, 8));
    let resolution: u32 = if rng.gen_bool(0.5) { 16 } else { 32 };
    let half = resolution / 2;

    let mut parts = Vec::with_capacity(part_count);
    for id in 0..part_count as u32 {
        let octant = (
            (id & 1) * half,
            ((id >> 1) & 1) * half,
            ((id >> 2) & 1) * half,
        );
        let extent = |rng: &mut dyn rand::RngCore| -> (u32, u32) {
            let lo = rand::Rng::gen_range(rng, 0..half - 2);
            let hi = rand::Rng::gen_range(rng, lo + 1..half);
            (lo, hi)
        };
        let (x0, x1) = extent(rng);
        let (y0, y1) = extent(rng);
        let (z0, z1) = extent(rng);
        let cells = (z0..=z1).flat_map(|z| {
            (y0..=y1).flat_map(move |y| {
                (x0..=x1).map(move |x| (octant.0 + x, octant.1 + y, octant.2 + z))
            })
        });
        let grid = VoxelGrid::from_cells(resolution, cells).expect("cells in range");

        let joint = if id == 0 {
            None
        } else {
            let parent = rng.gen_range(0..id);
            let joint_type = match rng.gen_range(0..3) {
                0 => JointType::Revolute,
                1 => JointType::Prismatic,
                _ => JointType::Fixed,
            };
            let dir = random_unit(rng);
            let origin = [
                rng.gen_range(0.0..=resolution as f64),
                rng.gen_range(0.0..=resolution as f64),
                rng.gen_range(0.0..=resolution as f64),
            ];
            let range = match joint_type {
                JointType::Fixed => None,
                JointType::Revolute => {
                    let lo = -PI * rng.gen_range(0.05..1.0);
                    let hi = PI * rng.gen_range(0.05..1.0);
                    Some([lo, hi])
                }
                JointType::Prismatic => {
                    let span = rng.gen_range(0.5..resolution as f64 / 4.0);
                    let lo = -span * rng.gen_range(0.0..1.0);
                    Some([lo, lo + span])
                }
            };
            Some(JointSpec {
                joint_type,
                parent,
                axis_direction: [dir.0, dir.1, dir.2],
                axis_origin: origin,
                range,
                degrees: false,
            })
        };

        let affordance = AFFORDANCES
            .iter()
            .filter(|_| rng.gen_bool(0.3))
            .map(|s| s.to_string())
            .collect();
        parts.push(PartSpec {
            id,
            description: format!("part {id}"),
            geometry: encode(&grid).text,
            material: MATERIALS[rng.gen_range(0..MATERIALS.len())].into(),
            density: rng.gen_range(50.0..5000.0),
            affordance,
            joint,
        });
    }

    PhysicalAssetSpec {
        name: format!("asset_{}", rng.gen_range(0..100_000)),
        description: "generated test asset".into(),
        absolute_scale: [
            rng.gen_range(0.05..3.0),
            rng.gen_range(0.05..3.0),
            rng.gen_range(0.05..3.0),
        ],
        resolution,
        root_part: 0,
        parts,
    }
}

fn random_unit(rng: &mut impl Rng) -> (f64, f64, f64) {
    loop {
        let v = (
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
        );
        let n = (v.0 * v.0 + v.1 * v.1 + v.2 * v.2).sqrt();
        if n > 0.1 {
            return (v.0 / n, v.1 / n, v.2 / n);
        }
    }
}
