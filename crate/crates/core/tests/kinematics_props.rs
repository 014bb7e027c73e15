//! Cross-frame consistency: computing joints in world frame then running FK
//! must agree with running FK in voxel coordinates and mapping the result
//! through the voxel-to-world transform, for isotropic scale.

use nalgebra::{Point3, Unit, UnitQuaternion};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simvox_core::kinematics::{forward_kinematics, voxel_to_world, world_joint};
use simvox_core::schema::JointType;
use simvox_core::synth::random_spec;
use std::collections::BTreeMap;

#[test]
fn world_fk_commutes_with_voxel_fk_under_isotropic_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let mut spec = random_spec(&mut rng, 5);
        let s = rng.gen_range(0.1..2.5);
        spec.absolute_scale = [s, s, s];

        let mut q = BTreeMap::new();
        for p in &spec.parts {
            if let Some(j) = &p.joint {
                if j.joint_type != JointType::Fixed {
                    let [lo, hi] = world_joint(&spec, p.id).unwrap().range.unwrap();
                    q.insert(p.id, lo + (hi - lo) * rng.gen::<f64>());
                }
            }
        }
        let poses = forward_kinematics(&spec, &q).unwrap();

        // voxel-frame reference: same chain composed with voxel-frame axes
        // and origins, prismatic values divided back into voxel units
        let r = spec.resolution as f64;
        for part in &spec.parts {
            let test_points = [
                Point3::new(1.0, 2.0, 3.0),
                Point3::new(r / 2.0, r / 2.0, r / 2.0),
            ];
            let mut chain = Vec::new();
            let mut walk = part.id;
            while walk != spec.root_part {
                chain.push(walk);
                walk = spec.part(walk).unwrap().joint.as_ref().unwrap().parent;
            }
            chain.reverse();

            for p_voxel in test_points {
                // voxel-frame FK applied manually along the chain
                let mut x = p_voxel;
                for &id in chain.iter().rev() {
                    let j = spec.part(id).unwrap().joint.as_ref().unwrap();
                    match j.joint_type {
                        JointType::Fixed => {}
                        JointType::Revolute => {
                            let axis = Unit::new_normalize(j.axis_direction_vec());
                            let rot = UnitQuaternion::from_axis_angle(&axis, q[&id]);
                            let o = j.axis_origin_point();
                            x = o + rot * (x - o);
                        }
                        JointType::Prismatic => {
                            // world joint value in meters -> voxel units
                            let step = s / r;
                            x += j.axis_direction_vec() * (q[&id] / step);
                        }
                    }
                }
                let via_voxel = voxel_to_world(&spec, x);
                let via_world = poses
                    .pose(part.id)
                    .unwrap()
                    .transform_point(&voxel_to_world(&spec, p_voxel));
                assert!(
                    (via_voxel - via_world).norm() < 1e-9,
                    "part {} mismatch: {via_voxel:?} vs {via_world:?}",
                    part.id
                );
            }
        }
    }
}

#[test]
fn rigidity_over_100_random_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    while checked < 100 {
        let spec = random_spec(&mut rng, 6);
        let mut q = BTreeMap::new();
        for p in &spec.parts {
            if let Some(j) = &p.joint {
                if j.joint_type != JointType::Fixed {
                    let [lo, hi] = world_joint(&spec, p.id).unwrap().range.unwrap();
                    q.insert(p.id, lo + (hi - lo) * rng.gen::<f64>());
                }
            }
        }
        let poses = forward_kinematics(&spec, &q).unwrap();
        let pts = [
            Point3::new(0.1, 0.2, 0.3),
            Point3::new(0.9, 0.1, 0.5),
            Point3::new(0.4, 0.8, 0.2),
        ];
        for (_, iso) in poses.iter() {
            let det = iso.rotation.to_rotation_matrix().matrix().determinant();
            assert!((det - 1.0).abs() < 1e-9);
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    let before = (pts[i] - pts[j]).norm();
                    let after =
                        (iso.transform_point(&pts[i]) - iso.transform_point(&pts[j])).norm();
                    assert!((before - after).abs() < 1e-9);
                }
            }
        }
        checked += 1;
    }
}
