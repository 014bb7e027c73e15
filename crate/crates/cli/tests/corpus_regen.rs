//! Regenerates the checked-in mesh corpus. Run explicitly after changing
//! the shape builders:
//!
//! ```text
//! cargo test -p simvox-cli --test corpus_regen -- --ignored
//! ```

mod common;

use simvox_core::mesh::save_mesh;

#[test]
#[ignore = "writes into the repository; run manually to regenerate corpus/"]
fn regenerate_corpus() {
    let dir = common::corpus_dir();
    std::fs::create_dir_all(&dir).unwrap();
    for (name, build) in common::corpus_shapes() {
        let mesh = common::normalized(&build());
        assert!(
            mesh.faces.len() >= 5000,
            "{name} has only {} faces",
            mesh.faces.len()
        );
        let path = dir.join(format!("{name}.obj"));
        save_mesh(&mesh, &path).unwrap();
        println!(
            "{name}: {} vertices, {} faces -> {}",
            mesh.vertices.len(),
            mesh.faces.len(),
            path.display()
        );
    }
}

#[test]
fn corpus_matches_generators() {
    // the checked-in files must be exactly what the builders produce
    let dir = common::corpus_dir();
    for (name, build) in common::corpus_shapes() {
        let path = dir.join(format!("{name}.obj"));
        let text = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{} missing ({e}); run the regen test", path.display()));
        let expected = simvox_core::mesh::write_obj(&common::normalized(&build()));
        assert_eq!(text, expected, "{name} is stale; rerun the regen test");
    }
}
