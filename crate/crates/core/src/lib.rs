//! Inverse mean curvature flow of closed star-shaped hypersurfaces, with the
//! first nonzero Laplace and p-Laplace eigenvalues tracked along the flow.
//!
//! The crate is split into four layers:
//!
//! - [`geometry`]: direction atlases (circle, icosphere), radial embeddings and
//!   the discrete curvature kernel.
//! - [`flow`]: explicit time stepping of `dX/dt = f ν` as a radial update, plus
//!   the exponential rescaling used to study convergence to a round sphere.
//! - [`spectral`]: cotangent / linear-element discretization, the first nonzero
//!   Laplace eigenpair and a constrained p-Rayleigh minimizer.
//! - [`verify`]: tolerance-bearing checks of the monotonicity, pinching, decay
//!   and isoperimetric statements along a flow.
//!
//! Mean curvature is the *sum* of the principal curvatures, so a round sphere
//! of radius `R` in `R^{n+1}` has `H = n / R`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod geometry;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use flow::{run, run_partial, DtPolicy, FlowConfig, FlowTrace, Observer, SpeedFunction, TraceSample};
pub use geometry::{
    build_atlas, compute_tensors, embed, star_margin, total_area, AtlasKind, DirectionAtlas, GeometryTensors,
    RadialProfile, StarSurface,
};
pub use spectral::{lambda1_laplace, lambda1_plaplace, DiscreteOperator, EigenResult, PLaplaceConfig};
pub use verify::{CheckReport, CheckStatus, PinchSchedule, Tolerances};
