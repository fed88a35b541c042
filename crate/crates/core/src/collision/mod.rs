//! Mixture collision kernels, the hierarchy collision operators and a Picard
//! solver for the Boltzmann system for mixtures.
//!
//! Operators act pointwise on continuous sampled functions. The velocity
//! truncation ball B_R is the extent of the velocity grid.

pub mod field;
pub mod kernel;
pub mod ops;
pub mod pde;
pub mod quadrature;

pub use field::{interpolate, GridFunction, VelocityField};
pub use kernel::{q_kernel, q_kernel_many, q_kernel_split, KernelSplit};
pub use ops::{apply_bbgky_hierarchy_op, apply_boltzmann_hierarchy_op, weighted_sup_norm, CollisionTerm, HierarchyQuadrature, PhaseFunction};
pub use pde::{
    collision_rhs, homogeneous_taylor, read_snapshot_binary, solve_mixture_pde, write_snapshot_binary, write_snapshot_csv, GridDensityPair, PdeConfig, PdeSolution,
    SolverWeights,
};
pub use quadrature::{gauss_legendre, maxwellian_tail_radius, Lattice, SphereQuadrature, VelocityGrid};
