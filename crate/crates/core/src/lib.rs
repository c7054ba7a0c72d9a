//! Space-time cube engine: projects time-varying segmented surface meshes
//! through a cutting plane into an object-ID volume whose depth axis is time,
//! and renders and queries that volume.

pub mod dataset;
pub mod geometry;
pub mod image;
pub mod math;
pub mod render;
pub mod session;
pub mod stc;
pub mod synth;
