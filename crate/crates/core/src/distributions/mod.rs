//! Distribution families used throughout: Exponential, Pareto, Weibull, and
//! Normal sampling, maximum-likelihood fitting, the Pareto-to-Exponential
//! log transform, and goodness-of-fit utilities.

mod families;
mod fit;
mod gof;

pub use families::{
    empirical_ccdf, pareto_to_exp, sample, ExponentialParams, FamilyParams, NormalParams,
    ParetoParams, WeibullParams,
};
pub use fit::{
    exponential_loglik, fit_layered_pareto, mle_exponential, mle_pareto, mle_weibull,
    pareto_loglik, weibull_loglik, LayeredParetoFit,
};
pub use gof::{
    chi_square_survival, kolmogorov_survival, ks_test_cdf, ks_test_exponential,
    ks_test_two_sample, likelihood_ratio_test, weibull_vs_exponential_lrt, KsResult,
};
