//! Tomography estimators and moment verifiers for uniform-POVM outcomes.
//!
//! The plain estimator inverts `Sigma_rho = (I + rho)/(d + 1)` on the empirical
//! covariance. The robust estimators replace the empirical covariance with a
//! filtered one ([`filter_robust_covariance`]) or, at tiny sample sizes, with
//! the best subset found by exhaustive search ([`subset_oracle`]).
//! [`check_constraints`] evaluates the polynomial constraint system a robust
//! covariance is required to satisfy on a finite probe set.

mod constraints;
mod filter;
mod moments;
mod subset;

pub use constraints::{check_constraints, ConstraintReport, ProbeMargin};
pub use filter::{filter_robust_covariance, FilterOutcome};
pub use moments::{hypercontractivity_margin, second_moment_closed_form, swap_operator};
pub use subset::{subset_oracle, SubsetOutcome, SUBSET_ORACLE_MAX_SAMPLES};

use crate::error::{Error, Result};
use crate::linalg::{truncate_rank, HermitianMatrix};
use crate::measure::{accumulate_covariance, UniformPovmSample};

/// Knobs for the robust covariance estimators and the constraint checker.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustConfig {
    /// Corruption fraction, in `[0, 0.5)`.
    pub gamma: f64,
    /// Moment half-order; hypercontractivity is checked at order `2t`.
    pub t: u32,
    /// Hypercontractivity and second-moment constant.
    pub c_const: f64,
    /// Multiplier on the certified variance bound `3/((d+1)(d+2))` used as the
    /// filter's stopping threshold.
    pub filter_threshold_slack: f64,
    /// Largest fraction of samples the filter may remove.
    pub max_removed_fraction: f64,
}

impl RobustConfig {
    /// Defaults: `t = 2`, `C = 2`, slack 1, removal cap `2 gamma`.
    pub fn new(gamma: f64) -> Result<Self> {
        let cfg = RobustConfig {
            gamma,
            t: 2,
            c_const: 2.0,
            filter_threshold_slack: 1.0,
            max_removed_fraction: 2.0 * gamma,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma {} must lie in [0, 0.5)",
                self.gamma
            )));
        }
        if self.t < 1 {
            return Err(Error::InvalidArgument("t must be at least 1".into()));
        }
        if self.c_const <= 0.0 || !self.c_const.is_finite() {
            return Err(Error::InvalidArgument("C must be positive".into()));
        }
        if self.filter_threshold_slack <= 0.0 {
            return Err(Error::InvalidArgument(
                "filter slack must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.max_removed_fraction) {
            return Err(Error::InvalidArgument(
                "max_removed_fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// `eta = C sqrt(C) t (2 gamma)^(1 - 1/(2t))`, the error scale of the
    /// constraint-based estimator; its HS error is of order `eta / (d + 1)`
    /// in covariance units.
    pub fn eta(&self) -> f64 {
        let t = self.t as f64;
        self.c_const * self.c_const.sqrt() * t * (2.0 * self.gamma).powf(1.0 - 1.0 / (2.0 * t))
    }
}

/// `rho_hat = (d + 1) (1/n) sum_i |v_i><v_i| - I`. Hermitian with unit trace,
/// not necessarily PSD.
pub fn naive_tomography(samples: &[UniformPovmSample]) -> Result<HermitianMatrix> {
    Ok(accumulate_covariance(samples)?.to_state_estimate())
}

/// [`naive_tomography`] followed by the best rank-`r` truncation.
pub fn rank_truncated_tomography(
    samples: &[UniformPovmSample],
    r: usize,
) -> Result<HermitianMatrix> {
    truncate_rank(&naive_tomography(samples)?, r)
}
