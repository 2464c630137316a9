//! Bayesian change point detection for Normal sequences with separate
//! partitions for the mean and the variance.
//!
//! The main entry point is [`run_chain`], a partially collapsed Gibbs sampler
//! whose output ([`PosteriorSamples`]) feeds the summaries in [`summary`].
//! [`baselines`] holds two single-partition comparison models and [`sim`] a
//! Monte Carlo harness over synthetic scenarios.

pub mod baselines;
pub mod error;
pub mod fit;
pub mod geweke;
pub mod gibbs;
pub mod io;
pub mod normal;
pub mod partition;
pub mod rng;
pub mod samples;
pub mod sim;
pub mod summary;

pub use baselines::{
    log_marginal_nig_cluster, run_bh93, run_lcia05, sample_p_truncated, sample_shared_variance,
    Bh93Hyper, NigHyper, SharedVariance,
};
pub use error::{Error, Result};
pub use fit::{Bh93Settings, FitModel};
pub use geweke::{geweke_joint_check, geweke_joint_check_with, GewekeStat};
pub use gibbs::{
    gibbs_iteration, indicator_log_ratio, initial_state, prior_state, redraw_cluster_params,
    run_chain, update_indicators_scan, GibbsSampler, InitMode, McmcConfig, ModelState,
};
pub use normal::{
    log_marginal_mean_cluster, log_marginal_var_cluster, loglik_full, sample_mu_star, sample_p,
    sample_sigma2_star, NormalHyper, ThetaState,
};
pub use partition::{
    beta_binomial_pmf, elicit_beta, indicators_from_partition, induced_changes_moments,
    induced_partition, log_beta_binomial_pmf, log_cohesion_yao, log_partition_prior_given_p,
    partition_from_indicators, prior_n_moments, ChangeIndicators, Partition, YaoPrior,
};
pub use samples::{Draw, ModelKind, Param, PosteriorSamples};
pub use sim::{
    generate_series, run_replications, scenario, scenario_presets, windowed_variance, McReport,
    ScenarioSpec, SimulatedSeries,
};
pub use summary::{
    change_probabilities, hpd_interval, most_likely_partition, n_changes_posterior, pmf_mode,
    product_estimates, SummaryOptions, SummaryReport,
};
