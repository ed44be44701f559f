//! Direction atlases, radial embeddings and discrete curvature.

mod atlas;
pub mod io;
mod surface;
mod tensors;

pub use atlas::{build_atlas, AtlasKind, Connectivity, DirectionAtlas, RadialStencil};
pub use surface::{embed, RadialProfile, StarSurface};
pub(crate) use tensors::triangle_areas;
pub use tensors::{compute_tensors, star_margin, total_area, GeometryTensors, DEGENERATE_AREA_RATIO};
