//! Round-trip identity and the cross-module contract: anything the parser
//! accepts must export cleanly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simvox_core::export::{export, reparse_urdf};
use simvox_core::schema::{emit_spec, parse_spec, part_mass};
use simvox_core::synth::random_spec;

#[test]
fn parse_emit_identity_on_random_specs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..60 {
        let spec = random_spec(&mut rng, 8);
        let text = emit_spec(&spec).unwrap();
        let back = parse_spec(&text).unwrap();
        assert_eq!(back, spec);
    }
}

#[test]
fn emit_parse_emit_is_stable_text() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let spec = random_spec(&mut rng, 5);
        let text = emit_spec(&spec).unwrap();
        let again = emit_spec(&parse_spec(&text).unwrap()).unwrap();
        assert_eq!(text, again);
    }
}

#[test]
fn accepted_specs_export_without_late_failures() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..40 {
        let spec = random_spec(&mut rng, 8);
        let text = emit_spec(&spec).unwrap();
        let parsed = parse_spec(&text).unwrap();
        let bundle = export(&parsed, None).unwrap();
        let summary = reparse_urdf(&bundle.urdf).unwrap();
        assert_eq!(summary.links.len(), parsed.parts.len());
        assert_eq!(summary.joints.len(), parsed.parts.len() - 1);
    }
}

#[test]
fn masses_are_positive_and_additive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let spec = random_spec(&mut rng, 8);
        let total: f64 = spec
            .parts
            .iter()
            .map(|p| part_mass(&spec, p.id).unwrap())
            .sum();
        assert!(total > 0.0);
        for p in &spec.parts {
            assert!(part_mass(&spec, p.id).unwrap() > 0.0);
        }
    }
}
