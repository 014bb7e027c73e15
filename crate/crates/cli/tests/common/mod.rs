//! Shared helpers for the CLI test suites: the deterministic mesh corpus
//! and the brute-force metric oracles. Not every test target touches every
//! helper.
#![allow(dead_code)]

use nalgebra::{Point3, Vector3};
use simvox_core::mesh::{normalize, primitives, TriMesh};
use std::f64::consts::PI;
use std::path::PathBuf;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// The checked-in corpus: name and deterministic builder. Every mesh has at
/// least 5k faces; most are thin structures that voxelize sparsely.
pub fn corpus_shapes() -> Vec<(&'static str, fn() -> TriMesh)> {
    vec![
        ("knot_2_3", knot_2_3 as fn() -> TriMesh),
        ("knot_3_5", knot_3_5),
        ("spring", spring),
        ("torus_thin", torus_thin),
        ("torus_fat", torus_fat),
        ("wheel", wheel),
        ("glasses", glasses),
        ("lamp", lamp),
        ("chair", chair),
        ("table", table),
        ("fan", fan),
        ("sphere_dense", sphere_dense),
    ]
}

pub fn normalized(mesh: &TriMesh) -> TriMesh {
    normalize(mesh).unwrap().0
}

fn knot_2_3() -> TriMesh {
    primitives::torus_knot(2, 3, 1.0, 0.45, 0.055, 640, 8)
}

fn knot_3_5() -> TriMesh {
    primitives::torus_knot(3, 5, 1.0, 0.35, 0.045, 720, 8)
}

fn spring() -> TriMesh {
    let coils = 6.5;
    let path: Vec<Point3<f64>> = (0..640)
        .map(|i| {
            let t = i as f64 / 639.0;
            let a = 2.0 * PI * coils * t;
            Point3::new(a.cos(), a.sin(), 2.4 * t)
        })
        .collect();
    primitives::tube(&path, &|_| 0.09, 8, false)
}

fn torus_thin() -> TriMesh {
    primitives::torus(Point3::new(0.0, 0.0, 0.0), 1.0, 0.05, 500, 10)
}

fn torus_fat() -> TriMesh {
    primitives::torus(Point3::new(0.0, 0.0, 0.0), 0.8, 0.3, 80, 32)
}

fn wheel() -> TriMesh {
    let mut pieces = vec![primitives::torus(Point3::new(0.0, 0.0, 0.0), 1.0, 0.07, 360, 8)];
    for k in 0..6 {
        let a = 2.0 * PI * k as f64 / 6.0;
        let dir = Vector3::new(a.cos(), a.sin(), 0.0);
        let path: Vec<Point3<f64>> = (0..60)
            .map(|i| Point3::origin() + dir * (0.08 + 0.86 * i as f64 / 59.0))
            .collect();
        pieces.push(primitives::tube(&path, &|_| 0.035, 6, false));
    }
    let hub: Vec<Point3<f64>> = (0..24)
        .map(|i| Point3::new(0.0, 0.0, -0.12 + 0.24 * i as f64 / 23.0))
        .collect();
    pieces.push(primitives::tube(&hub, &|_| 0.1, 12, false));
    primitives::merge(&pieces)
}

fn glasses() -> TriMesh {
    let mut pieces = vec![
        primitives::torus(Point3::new(-0.62, 0.0, 0.0), 0.5, 0.045, 280, 8),
        primitives::torus(Point3::new(0.62, 0.0, 0.0), 0.5, 0.045, 280, 8),
    ];
    let bridge: Vec<Point3<f64>> = (0..24)
        .map(|i| {
            let t = i as f64 / 23.0;
            Point3::new(-0.12 + 0.24 * t, 0.28 - 0.1 * (PI * t).sin(), 0.0)
        })
        .collect();
    pieces.push(primitives::tube(&bridge, &|_| 0.035, 8, false));
    for side in [-1.0, 1.0] {
        let arm: Vec<Point3<f64>> = (0..80)
            .map(|i| {
                let t = i as f64 / 79.0;
                Point3::new(side * (1.1 + 0.03 * t), 0.1 + 0.1 * t, -1.5 * t)
            })
            .collect();
        pieces.push(primitives::tube(&arm, &|_| 0.035, 8, false));
    }
    primitives::merge(&pieces)
}

fn lamp() -> TriMesh {
    let pole: Vec<Point3<f64>> = (0..120)
        .map(|i| Point3::new(0.0, 0.0, 2.0 * i as f64 / 119.0))
        .collect();
    let shade: Vec<Point3<f64>> = (0..60)
        .map(|i| Point3::new(0.0, 0.0, 2.0 + 0.5 * i as f64 / 59.0))
        .collect();
    let base: Vec<Point3<f64>> = (0..16)
        .map(|i| Point3::new(0.0, 0.0, -0.1 + 0.1 * i as f64 / 15.0))
        .collect();
    primitives::merge(&[
        primitives::tube(&pole, &|_| 0.05, 10, false),
        primitives::tube(&shade, &|s| 0.62 - 0.45 * s, 48, false),
        primitives::tube(&base, &|_| 0.55, 48, false),
    ])
}

fn chair() -> TriMesh {
    let mut pieces = Vec::new();
    for (x, y) in [(-0.45, -0.45), (0.45, -0.45), (-0.45, 0.45), (0.45, 0.45)] {
        let leg: Vec<Point3<f64>> = (0..50)
            .map(|i| Point3::new(x, y, i as f64 / 49.0))
            .collect();
        pieces.push(primitives::tube(&leg, &|_| 0.05, 8, false));
    }
    pieces.push(primitives::plate(
        Point3::new(-0.55, -0.55, 1.0),
        Vector3::new(1.1, 0.0, 0.0),
        Vector3::new(0.0, 1.1, 0.0),
        0.07,
        24,
        24,
    ));
    pieces.push(primitives::plate(
        Point3::new(-0.55, 0.48, 1.07),
        Vector3::new(1.1, 0.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
        0.07,
        24,
        24,
    ));
    primitives::merge(&pieces)
}

fn table() -> TriMesh {
    let mut pieces = Vec::new();
    for (x, y) in [(-0.8, -0.5), (0.8, -0.5), (-0.8, 0.5), (0.8, 0.5)] {
        let leg: Vec<Point3<f64>> = (0..60)
            .map(|i| Point3::new(x, y, i as f64 / 59.0))
            .collect();
        pieces.push(primitives::tube(&leg, &|_| 0.06, 8, false));
    }
    pieces.push(primitives::plate(
        Point3::new(-0.95, -0.65, 1.0),
        Vector3::new(1.9, 0.0, 0.0),
        Vector3::new(0.0, 1.3, 0.0),
        0.08,
        32,
        22,
    ));
    primitives::merge(&pieces)
}

fn fan() -> TriMesh {
    let hub: Vec<Point3<f64>> = (0..20)
        .map(|i| Point3::new(0.0, 0.0, -0.15 + 0.3 * i as f64 / 19.0))
        .collect();
    let mut pieces = vec![primitives::tube(&hub, &|_| 0.16, 24, false)];
    for k in 0..4 {
        let a = 2.0 * PI * k as f64 / 4.0;
        let u = Vector3::new(a.cos(), a.sin(), 0.0);
        let v = Vector3::new(-a.sin() * 0.32, a.cos() * 0.32, 0.12);
        pieces.push(primitives::plate(
            Point3::origin() + u * 0.14 - v * 0.5,
            u * 0.9,
            v,
            0.03,
            30,
            12,
        ));
    }
    primitives::merge(&pieces)
}

fn sphere_dense() -> TriMesh {
    primitives::uv_sphere(84, 52)
}

// ---------------------------------------------------------------------------
// independent metric oracles

/// O(|A||B|) Chamfer distance, written independently of the library path.
pub fn brute_chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    let nearest = |p: &Point3<f64>, set: &[Point3<f64>]| -> f64 {
        let mut best = f64::INFINITY;
        for q in set {
            let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
            if d2 < best {
                best = d2;
            }
        }
        best
    };
    let mut sum_a = 0.0;
    for p in a {
        sum_a += nearest(p, b).sqrt();
    }
    let mut sum_b = 0.0;
    for q in b {
        sum_b += nearest(q, a).sqrt();
    }
    sum_a / a.len() as f64 + sum_b / b.len() as f64
}

/// O(|A||B|) F-score oracle.
pub fn brute_fscore(pred: &[Point3<f64>], gt: &[Point3<f64>], tau: f64) -> f64 {
    let nearest = |p: &Point3<f64>, set: &[Point3<f64>]| -> f64 {
        let mut best = f64::INFINITY;
        for q in set {
            let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
            if d2 < best {
                best = d2;
            }
        }
        best.sqrt()
    };
    let precision =
        pred.iter().filter(|p| nearest(p, gt) <= tau).count() as f64 / pred.len() as f64;
    let recall =
        gt.iter().filter(|q| nearest(q, pred) <= tau).count() as f64 / gt.len() as f64;
    if precision + recall == 0.0 {
        return 0.0;
    }
    200.0 * precision * recall / (precision + recall)
}
