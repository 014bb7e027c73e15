pub mod codec;
pub mod export;
pub mod kinematics;
pub mod mesh;
pub mod metrics;
pub mod schema;
pub mod segmentation;
pub mod synth;
pub mod voxel;
