//! Ensemble statistics for propagation-of-chaos experiments: symmetrized
//! marginal histograms, observables on separated positions, good
//! configurations, conditioned initial data and the chaos gap against a
//! tensorized reference.

mod good;
mod marginal;
mod metric;
mod observable;

pub use good::{conditioned_ensemble, conditioned_initial_sampler, good_config_check, partition_at, ConditionedEnsemble, GoodVerdict};
pub use marginal::{estimate_marginal, HistogramSpec, MarginalEstimate, Symmetrization};
pub use metric::{
    ab_covariance, chaos_metric, latin_hypercube_probes, ChaosPoint, ChaosReport, ChaosRow, CovarianceRow, ProbeConfig, TensorReference,
    DEFAULT_PROBES,
};
pub use observable::{
    observable_ensemble, observable_tensor, windowed_value, EnsembleObservable, Monomial, ObservableSpec, TestFunction, MAX_POLY_DEGREE,
};
