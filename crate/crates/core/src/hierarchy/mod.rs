//! Duhamel expansion of the two-species hierarchies: collision histories,
//! separated time simplices, Boltzmann and BBGKY pseudo-trajectories and
//! Monte Carlo estimates of the truncated iterates.

pub mod duhamel;
pub mod history;
pub mod pseudo;
pub mod series;

pub use duhamel::{
    duhamel_iterate, series_terms, DuhamelConfig, DuhamelEstimate, HistoryClass, TensorMarginals, TruncatedGaussian,
    UniformBall, VelocityProposal,
};
pub use series::{homogeneous_series_terms, truncate_to_ball, TestFactor};
pub use history::{sample_history, sample_time_simplex, sample_time_simplex_with, simplex_volume, AdjunctionRecord, CollisionHistory};
pub use pseudo::{
    adjunction_rules, build_bbgky_pseudo, build_boltzmann_pseudo, compare_pseudo, recollision_filter, AdjunctionRule,
    BbgkyRule, BoltzmannRule, Flavor, PseudoTrajectory, RecollisionStatus, StageDeviation,
};
