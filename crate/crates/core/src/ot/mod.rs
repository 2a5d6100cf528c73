//! Exact optimal transport between small discrete distributions and the
//! finite-support worst-case loss used to check the robust relaxations.

mod dro;
pub mod simplex;
mod wasserstein;

pub use dro::{classification_metric, dro_worstcase, regression_metric, relaxation_bound};
pub use wasserstein::{mixture_ratio, w1_discrete, DiscreteDistribution, GroundMetric, TransportPlan};
