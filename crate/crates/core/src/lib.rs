//! Building blocks for simplified-mesh fidelity experiments: mesh I/O,
//! simplification, stimulus rendering, automatic geometric and image
//! measures, the human-subject protocol and its statistics.

pub mod corpus;
pub mod geom;
pub mod image_fidelity;
pub mod mesh;
pub mod pipeline;
pub mod predict;
pub mod protocol;
pub mod render;
pub mod simplify;
pub mod simulate;
pub mod stats;
pub mod synth;
