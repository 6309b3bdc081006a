//! Synthetic river scenes with analytic widths, and the width-error sweep built on them.

mod rng;
mod scene;
mod sweep;

pub use rng::SplitMix64;
pub use scene::{gen_scene, Radiometry, RiverKind, RiverSpec, SynthScene, SynthSpec, NODE_SPACING_M};
pub use sweep::{sweep, uniform_orientations, SweepRow, SweepSpec, SWEEP_HEADER};
