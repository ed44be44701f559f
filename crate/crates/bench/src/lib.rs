//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use imcf_core::{build_atlas, embed, AtlasKind, RadialProfile, StarSurface};

/// Ellipsoid `(1.5, 1, 1)` on an icosphere of the given level.
pub fn ellipsoid(level: usize) -> StarSurface {
    let atlas = Arc::new(build_atlas(AtlasKind::Icosphere, level).expect("atlas"));
    let shape: RadialProfile = "ellipsoid(1.5,1,1)".parse().expect("shape");
    embed(atlas, &shape).expect("embed")
}
