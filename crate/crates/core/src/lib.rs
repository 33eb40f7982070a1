//! Structural causal models and causal-discovery tools.
//!
//! - [`graph`]: DAGs, d-separation, summary graphs from ODE dependency masks
//! - [`scm`]: structural causal models, sampling, interventions, exact enumeration
//! - [`stats`]: kernel ridge regression and the HSIC independence test
//! - [`cause_effect`]: bivariate direction inference (additive noise, slope-based)
//! - [`half_sibling`]: confounder removal on simulated instrument panels
//! - [`algo_icm`]: compression-based complexity proxies and reversible dynamics
//! - [`ssl_bench`]: self-training on causal versus anticausal tasks
//!
//! Data-parallel loops run on rayon when the `parallel` feature is on (the
//! default); see [`exec`].

pub mod exec;
pub mod graph;
pub mod scm;
pub mod stats;
pub mod cause_effect;
pub mod half_sibling;
pub mod algo_icm;
pub mod ssl_bench;
