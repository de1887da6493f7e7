//! Monte Carlo: SDE simulation of the conditioned diffusion, end-to-end
//! experiments, and the statistics toolkit.

pub mod experiments;
pub mod sim;
pub mod stats;

pub use experiments::{
    run_bessel_sup, run_cond_laplace, run_dihedral, run_main_theorem, run_verma_consistency,
    run_xi_limit, ExperimentConfig,
};
pub use sim::{bessel3_sup_sample, simulate_z};
pub use stats::{empirical_laplace, ks_statistic, ks_two_sample, mean_and_se};
