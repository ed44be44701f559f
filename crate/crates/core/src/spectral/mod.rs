//! First nonzero eigenvalues of the Laplace and p-Laplace operators.

mod laplace;
mod operator;
mod oracle;
mod plaplace;
pub mod sparse;

pub use laplace::{
    eigen_residual, lambda1_laplace, smallest_eigenpairs, EigenMethod, EigenPairs, EigenResult, CLUSTER_REL,
};
pub(crate) use operator::Elements;
pub use operator::{assemble, DiscreteOperator};
pub use oracle::{circle_plaplace_exact, circle_plaplace_oracle, circle_plaplace_oracle_seeded, OracleResult};
pub use plaplace::{lambda1_plaplace, lambda1_plaplace_warm, rayleigh_p, PLaplaceConfig};
