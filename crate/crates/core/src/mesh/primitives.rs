//! Procedural test geometry: cubes, spheres, tori, swept tubes and
//! subdivided plates. Everything here is deterministic, so meshes built from
//! these generators can serve as fixed corpora.

use super::TriMesh;
use nalgebra::{Point3, Vector3};
use std::f64::consts::PI;

/// Axis-aligned unit cube spanning `[0,1]^3`: 8 vertices, 12 triangles.
pub fn unit_cube() -> TriMesh {
    box_mesh(Vector3::new(1.0, 1.0, 1.0), Point3::origin())
}

/// Axis-aligned box with the given extents and minimum corner.
pub fn box_mesh(extents: Vector3<f64>, min: Point3<f64>) -> TriMesh {
    let e = extents;
    let vertices = vec![
        min,
        min + Vector3::new(e.x, 0.0, 0.0),
        min + Vector3::new(e.x, e.y, 0.0),
        min + Vector3::new(0.0, e.y, 0.0),
        min + Vector3::new(0.0, 0.0, e.z),
        min + Vector3::new(e.x, 0.0, e.z),
        min + Vector3::new(e.x, e.y, e.z),
        min + Vector3::new(0.0, e.y, e.z),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2], // z = 0
        [4, 5, 6],
        [4, 6, 7], // z = max
        [0, 1, 5],
        [0, 5, 4], // y = 0
        [3, 6, 2],
        [3, 7, 6], // y = max
        [0, 7, 3],
        [0, 4, 7], // x = 0
        [1, 2, 6],
        [1, 6, 5], // x = max
    ];
    TriMesh {
        vertices,
        faces,
        face_labels: None,
    }
}

/// Latitude/longitude sphere with `nu` segments around and `nv` rings,
/// radius 0.5, centered at (0.5, 0.5, 0.5).
pub fn uv_sphere(nu: usize, nv: usize) -> TriMesh {
    assert!(nu >= 3 && nv >= 2);
    let c = Vector3::new(0.5, 0.5, 0.5);
    let r = 0.5;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    // rings of vertices; poles handled as dedicated vertices
    vertices.push(Point3::from(c + Vector3::new(0.0, 0.0, r)));
    for j in 1..nv {
        let phi = PI * j as f64 / nv as f64;
        for i in 0..nu {
            let theta = 2.0 * PI * i as f64 / nu as f64;
            vertices.push(Point3::from(
                c + Vector3::new(
                    r * phi.sin() * theta.cos(),
                    r * phi.sin() * theta.sin(),
                    r * phi.cos(),
                ),
            ));
        }
    }
    vertices.push(Point3::from(c + Vector3::new(0.0, 0.0, -r)));
    let ring = |j: usize, i: usize| (1 + (j - 1) * nu + i % nu) as u32;
    let south = (vertices.len() - 1) as u32;
    for i in 0..nu {
        faces.push([0, ring(1, i), ring(1, i + 1)]);
    }
    for j in 1..nv - 1 {
        for i in 0..nu {
            let (a, b) = (ring(j, i), ring(j, i + 1));
            let (c2, d) = (ring(j + 1, i), ring(j + 1, i + 1));
            faces.push([a, c2, d]);
            faces.push([a, d, b]);
        }
    }
    for i in 0..nu {
        faces.push([south, ring(nv - 1, i + 1), ring(nv - 1, i)]);
    }
    TriMesh {
        vertices,
        faces,
        face_labels: None,
    }
}

/// Torus in the z = center.z plane. `major` is the ring radius, `minor` the
/// tube radius.
pub fn torus(center: Point3<f64>, major: f64, minor: f64, nu: usize, nv: usize) -> TriMesh {
    let path: Vec<Point3<f64>> = (0..nu)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / nu as f64;
            center + Vector3::new(major * t.cos(), major * t.sin(), 0.0)
        })
        .collect();
    tube(&path, &|_| minor, nv, true)
}

/// (p, q) torus knot swept with a thin tube; a long, space-filling curve
/// that voxelizes sparsely.
pub fn torus_knot(p: u32, q: u32, major: f64, minor: f64, tube_r: f64, nu: usize, nv: usize) -> TriMesh {
    let path: Vec<Point3<f64>> = (0..nu)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / nu as f64;
            let r = major + minor * (q as f64 * t).cos();
            Point3::new(
                r * (p as f64 * t).cos(),
                r * (p as f64 * t).sin(),
                minor * (q as f64 * t).sin(),
            )
        })
        .collect();
    tube(&path, &|_| tube_r, nv, true)
}

/// Sweep a circular cross-section of radius `radius(s)` along a polyline,
/// `s` in `[0,1]` along the path. Open paths get capped ends.
pub fn tube(path: &[Point3<f64>], radius: &dyn Fn(f64) -> f64, nv: usize, closed: bool) -> TriMesh {
    assert!(path.len() >= 2 && nv >= 3);
    let n = path.len();
    let mut vertices = Vec::with_capacity(n * nv + 2);
    let mut faces = Vec::new();

    // parallel-transported frames along the path keep rings from twisting
    let tangent = |i: usize| -> Vector3<f64> {
        let next = if i + 1 < n {
            path[i + 1]
        } else if closed {
            path[0]
        } else {
            path[i]
        };
        let prev = if i > 0 {
            path[i - 1]
        } else if closed {
            path[n - 1]
        } else {
            path[i]
        };
        let d = next - prev;
        if d.norm() > 1e-12 { d.normalize() } else { Vector3::x() }
    };
    let t0 = tangent(0);
    let mut normal = if t0.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    normal = (normal - t0 * normal.dot(&t0)).normalize();

    for i in 0..n {
        let t = tangent(i);
        normal = (normal - t * normal.dot(&t)).normalize();
        let binormal = t.cross(&normal);
        let s = i as f64 / if closed { n as f64 } else { (n - 1) as f64 };
        let r = radius(s);
        for k in 0..nv {
            let a = 2.0 * PI * k as f64 / nv as f64;
            vertices.push(path[i] + normal * (r * a.cos()) + binormal * (r * a.sin()));
        }
    }

    let ring = |i: usize, k: usize| (i * nv + k % nv) as u32;
    let segs = if closed { n } else { n - 1 };
    for i in 0..segs {
        let j = (i + 1) % n;
        for k in 0..nv {
            let (a, b) = (ring(i, k), ring(i, k + 1));
            let (c, d) = (ring(j, k), ring(j, k + 1));
            faces.push([a, c, d]);
            faces.push([a, d, b]);
        }
    }
    if !closed {
        let start = vertices.len() as u32;
        vertices.push(path[0]);
        vertices.push(path[n - 1]);
        for k in 0..nv {
            faces.push([start, ring(0, k + 1), ring(0, k)]);
            faces.push([start + 1, ring(n - 1, k), ring(n - 1, k + 1)]);
        }
    }
    TriMesh {
        vertices,
        faces,
        face_labels: None,
    }
}

/// Thin rectangular slab subdivided into `nu × nv` quads per side. `u` and
/// `v` span the plate, `thickness` extrudes along `u × v`.
pub fn plate(
    origin: Point3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
    thickness: f64,
    nu: usize,
    nv: usize,
) -> TriMesh {
    assert!(nu >= 1 && nv >= 1);
    let w = u.cross(&v).normalize() * thickness;
    let mut vertices = Vec::with_capacity((nu + 1) * (nv + 1) * 2);
    for layer in 0..2 {
        for j in 0..=nv {
            for i in 0..=nu {
                let p = origin
                    + u * (i as f64 / nu as f64)
                    + v * (j as f64 / nv as f64)
                    + w * layer as f64;
                vertices.push(p);
            }
        }
    }
    let idx = |layer: usize, i: usize, j: usize| {
        (layer * (nu + 1) * (nv + 1) + j * (nu + 1) + i) as u32
    };
    let mut faces = Vec::new();
    for j in 0..nv {
        for i in 0..nu {
            let (a, b, c, d) = (idx(0, i, j), idx(0, i + 1, j), idx(0, i + 1, j + 1), idx(0, i, j + 1));
            faces.push([a, c, b]);
            faces.push([a, d, c]);
            let (a, b, c, d) = (idx(1, i, j), idx(1, i + 1, j), idx(1, i + 1, j + 1), idx(1, i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    // side walls
    for i in 0..nu {
        faces.push([idx(0, i, 0), idx(0, i + 1, 0), idx(1, i + 1, 0)]);
        faces.push([idx(0, i, 0), idx(1, i + 1, 0), idx(1, i, 0)]);
        faces.push([idx(0, i, nv), idx(1, i + 1, nv), idx(0, i + 1, nv)]);
        faces.push([idx(0, i, nv), idx(1, i, nv), idx(1, i + 1, nv)]);
    }
    for j in 0..nv {
        faces.push([idx(0, 0, j), idx(1, 0, j + 1), idx(0, 0, j + 1)]);
        faces.push([idx(0, 0, j), idx(1, 0, j), idx(1, 0, j + 1)]);
        faces.push([idx(0, nu, j), idx(0, nu, j + 1), idx(1, nu, j + 1)]);
        faces.push([idx(0, nu, j), idx(1, nu, j + 1), idx(1, nu, j)]);
    }
    TriMesh {
        vertices,
        faces,
        face_labels: None,
    }
}

/// Concatenate meshes into one, re-offsetting face indices. Labels are
/// dropped.
pub fn merge(meshes: &[TriMesh]) -> TriMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for m in meshes {
        let base = vertices.len() as u32;
        vertices.extend_from_slice(&m.vertices);
        faces.extend(m.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }
    TriMesh {
        vertices,
        faces,
        face_labels: None,
    }
}
