//! Property tests for the token codec: exact round-trips, canonical-form
//! stability, and run maximality.

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simvox_core::codec::{decode, encode, TokenString};
use simvox_core::voxel::VoxelGrid;

fn random_grid(resolution: u32, density: f64, seed: u64) -> VoxelGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = resolution * resolution * resolution;
    VoxelGrid::from_indices(
        resolution,
        (0..n).filter(|_| rng.gen_bool(density)),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn round_trip_random_grids(
        r_idx in 0usize..3,
        d_idx in 0usize..4,
        seed in any::<u64>(),
    ) {
        let resolution = [8u32, 16, 32][r_idx];
        let density = [0.01, 0.1, 0.5, 1.0][d_idx];
        let grid = random_grid(resolution, density, seed);
        let tokens = encode(&grid);
        let back = decode(&tokens).unwrap();
        prop_assert_eq!(back, grid);
    }

    #[test]
    fn canonical_strings_are_fixed_points(
        runs in prop::collection::vec((2u32..50, 1u32..20), 0..40),
    ) {
        // build a canonical string: gaps >= 2 between runs, a < b in ranges
        let mut text = String::new();
        let mut next = 0u32;
        for (gap, len) in runs {
            let start = next + gap;
            let end = start + len - 1;
            if end >= 32 * 32 * 32 {
                break;
            }
            if !text.is_empty() {
                text.push(',');
            }
            if start == end {
                text.push_str(&start.to_string());
            } else {
                text.push_str(&format!("{start}-{end}"));
            }
            next = end;
        }
        let tokens = TokenString::new(text.clone(), 32);
        let grid = decode(&tokens).unwrap();
        prop_assert_eq!(encode(&grid).text, text);
    }

    #[test]
    fn encoded_runs_are_maximal(seed in any::<u64>(), density in 0.05f64..0.95) {
        let grid = random_grid(16, density, seed);
        let text = encode(&grid).text;
        // re-parse and check no two pieces are mergeable (gap >= 2) and every
        // range is ascending
        let mut prev_end: Option<i64> = None;
        for piece in text.split(',').filter(|p| !p.is_empty()) {
            let (a, b) = match piece.split_once('-') {
                Some((a, b)) => (a.parse::<i64>().unwrap(), b.parse::<i64>().unwrap()),
                None => {
                    let v = piece.parse::<i64>().unwrap();
                    (v, v)
                }
            };
            prop_assert!(a <= b);
            if let Some(pe) = prev_end {
                prop_assert!(a >= pe + 2, "mergeable adjacency in {text}");
            }
            prev_end = Some(b);
        }
    }
}
