//! Robust quantum state testing: Haar basis measurement, a calibrated robust
//! identity tester on the outcome labels, and exact outcome-distance
//! diagnostics.

use rand::Rng;
use rayon::prelude::*;

use crate::adversary::{coupling_attack, replace_attack, CouplingPlan, OutcomeRecord};
use crate::error::{Error, Result};
use crate::haar::{sample_haar_unitary, symmetric_moment_scale, UnitaryMatrix};
use crate::linalg::{hs_norm, DensityMatrix, HermitianMatrix};
use crate::measure::{basis_distribution, sample_counts, sample_outcomes, OutcomeDistribution};
use crate::rng::child_rng;
use crate::stats::conformal_quantile;

/// Accept/reject output of a test.
#[derive(Clone, Debug, PartialEq)]
pub struct TestVerdict {
    pub accept: bool,
    /// Empirical l1 distance to the reference minus `2 gamma`.
    pub statistic: f64,
    pub threshold: f64,
    pub corrupted_budget: f64,
    /// Entries the adversary hook actually changed (0 for direct calls).
    pub budget_used: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TesterConfig {
    pub gamma: f64,
    pub epsilon_target: f64,
    /// Clean simulations used to estimate the null threshold.
    pub calibration_trials: usize,
    pub null_quantile: f64,
}

impl TesterConfig {
    pub fn new(gamma: f64, epsilon_target: f64) -> Result<Self> {
        let cfg = TesterConfig {
            gamma,
            epsilon_target,
            calibration_trials: 200,
            null_quantile: 0.95,
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
        if self.calibration_trials < 100 {
            return Err(Error::InvalidArgument(format!(
                "calibration_trials {} must be at least 100",
                self.calibration_trials
            )));
        }
        if !(self.null_quantile > 0.0 && self.null_quantile < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "null_quantile {} must lie in (0, 1)",
                self.null_quantile
            )));
        }
        if self.epsilon_target.is_nan() || self.epsilon_target < 0.0 {
            return Err(Error::InvalidArgument(
                "epsilon_target must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

fn l1_counts(counts: &[u64], q: &OutcomeDistribution, n: f64) -> f64 {
    counts
        .iter()
        .zip(q.probs())
        .map(|(&c, &p)| (c as f64 / n - p).abs())
        .sum()
}

/// Null `q`-quantile of the clean empirical l1 distance at sample size `n`,
/// from `trials` multinomial simulations.
pub fn calibrate_threshold<R: Rng + ?Sized>(
    q: &OutcomeDistribution,
    n: usize,
    trials: usize,
    quantile: f64,
    rng: &mut R,
) -> f64 {
    let seed: u64 = rng.random();
    let nf = n as f64;
    let stats: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = child_rng(seed, t as u64);
            l1_counts(&sample_counts(q, n as u64, &mut r), q, nf)
        })
        .collect();
    conformal_quantile(&stats, quantile)
}

/// Robust identity test of labelled outcomes against `q`.
///
/// The statistic is the empirical l1 distance minus `2 gamma`, the most an
/// adversary changing `gamma n` labels can move it. The threshold is the
/// `null_quantile` of the clean l1 distance under `q`, estimated by
/// simulation.
pub fn robust_identity_test<R: Rng + ?Sized>(
    outcomes: &[usize],
    q: &OutcomeDistribution,
    cfg: &TesterConfig,
    rng: &mut R,
) -> Result<TestVerdict> {
    cfg.validate()?;
    if outcomes.is_empty() {
        return Err(Error::Empty("outcomes"));
    }
    let k = q.len();
    let mut counts = vec![0u64; k];
    for &x in outcomes {
        if x >= k {
            return Err(Error::LabelOutOfRange { label: x, size: k });
        }
        counts[x] += 1;
    }
    let n = outcomes.len();
    let statistic = l1_counts(&counts, q, n as f64) - 2.0 * cfg.gamma;
    let threshold = calibrate_threshold(q, n, cfg.calibration_trials, cfg.null_quantile, rng);
    let accept = statistic <= threshold;
    Ok(TestVerdict {
        accept,
        statistic,
        threshold,
        corrupted_budget: cfg.gamma,
        budget_used: 0,
    })
}

/// What the adversary hook sees in [`quantum_identity_test`].
#[derive(Clone, Copy, Debug)]
pub struct AttackContext<'a> {
    pub unitary: &'a UnitaryMatrix,
    /// Outcome law of the measured state.
    pub source: &'a OutcomeDistribution,
    /// Outcome law of the hypothesis state.
    pub reference: &'a OutcomeDistribution,
    pub gamma: f64,
}

/// Leaves the record untouched.
pub fn no_attack<R: Rng + ?Sized>(
    rec: &OutcomeRecord<usize>,
    _ctx: &AttackContext<'_>,
    _rng: &mut R,
) -> Result<OutcomeRecord<usize>> {
    Ok(rec.clone())
}

/// Couples every outcome towards the law of `target` in the same basis.
pub fn coupling_toward<R: Rng + ?Sized>(
    target: DensityMatrix,
) -> impl FnMut(&OutcomeRecord<usize>, &AttackContext<'_>, &mut R) -> Result<OutcomeRecord<usize>> {
    move |rec, ctx, rng| {
        let t = basis_distribution(&target, ctx.unitary)?;
        let plan = CouplingPlan::repeated(ctx.source, &t, rec.len())?;
        coupling_attack(rec, &plan, ctx.gamma, rng)
    }
}

/// Replaces outcomes by the label the reference law finds least likely.
pub fn replace_with_rarest<R: Rng + ?Sized>(
    rec: &OutcomeRecord<usize>,
    ctx: &AttackContext<'_>,
    rng: &mut R,
) -> Result<OutcomeRecord<usize>> {
    let rare = ctx
        .reference
        .probs()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or(Error::Empty("reference law"))?;
    replace_attack(rec, ctx.gamma, &rare, rng)
}

/// Haar basis identity test of `n` copies of `rho` against `sigma`.
///
/// Draws `U ~ Haar`, simulates outcomes of measuring `rho` in that basis,
/// lets `hook` corrupt them (audited against `floor(gamma n)`), then runs
/// [`robust_identity_test`] against the law of `sigma` in the same basis.
pub fn quantum_identity_test<R, H>(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    n: usize,
    cfg: &TesterConfig,
    mut hook: H,
    rng: &mut R,
) -> Result<TestVerdict>
where
    R: Rng + ?Sized,
    H: FnMut(&OutcomeRecord<usize>, &AttackContext<'_>, &mut R) -> Result<OutcomeRecord<usize>>,
{
    cfg.validate()?;
    let d = sigma.dim();
    if rho.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rho.dim(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("copies"));
    }
    let u = sample_haar_unitary(d, rng);
    let p_sigma = basis_distribution(sigma, &u)?;
    let p_rho = basis_distribution(rho, &u)?;
    let clean = OutcomeRecord::new(sample_outcomes(&p_rho, n, rng));
    let ctx = AttackContext {
        unitary: &u,
        source: &p_rho,
        reference: &p_sigma,
        gamma: cfg.gamma,
    };
    let corrupted = hook(&clean, &ctx, rng)?;
    corrupted.audit(&clean, cfg.gamma)?;
    let mut v = robust_identity_test(corrupted.entries(), &p_sigma, cfg, rng)?;
    v.budget_used = corrupted.budget_used();
    Ok(v)
}

/// Exact distances between outcome laws for one basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutcomeDistances {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl OutcomeDistances {
    fn from_diffs(diffs: &[f64]) -> Self {
        let l1 = diffs.iter().map(|x| x.abs()).sum();
        let l2 = diffs.iter().map(|x| x * x).sum::<f64>().sqrt();
        let linf = diffs.iter().map(|x| x.abs()).fold(0.0, f64::max);
        OutcomeDistances { l1, l2, linf }
    }

    pub fn l2_squared(&self) -> f64 {
        self.l2 * self.l2
    }
}

/// Per-draw `(l1, l2, linf)` of `p_rho^U - p_sigma^U` over `trials` Haar bases.
pub fn outcome_distance_diagnostics<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<OutcomeDistances>> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: rho.dim(),
        });
    }
    delta_distance_diagnostics(&(rho.as_hermitian() - sigma.as_hermitian()), trials, rng)
}

/// As [`outcome_distance_diagnostics`] for a given difference `Delta`; the
/// outcome-law difference in basis `U` is `<u_x|Delta|u_x>`.
pub fn delta_distance_diagnostics<R: Rng + ?Sized>(
    delta: &HermitianMatrix,
    trials: usize,
    rng: &mut R,
) -> Result<Vec<OutcomeDistances>> {
    let d = delta.dim();
    let seed: u64 = rng.random();
    Ok((0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = child_rng(seed, t as u64);
            let u = sample_haar_unitary(d, &mut r);
            OutcomeDistances::from_diffs(&u.diagonal_in_basis(delta))
        })
        .collect())
}

/// Monte Carlo estimate of `E_U ||p_rho^U - p_sigma^U||_p^p` with its
/// standard error.
pub fn lp_moment_monte_carlo<R: Rng + ?Sized>(
    delta: &HermitianMatrix,
    p: u32,
    draws: usize,
    rng: &mut R,
) -> (f64, f64) {
    let d = delta.dim();
    let seed: u64 = rng.random();
    let vals: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|t| {
            let mut r = child_rng(seed, t as u64);
            let u = sample_haar_unitary(d, &mut r);
            u.diagonal_in_basis(delta)
                .iter()
                .map(|x| x.abs().powi(p as i32))
                .sum()
        })
        .collect();
    crate::stats::mean_and_std_error(&vals)
}

/// Upper bound `(d/2) binom(d+p-1, p)^{-1} ||Delta||_HS^p` on
/// `E_U ||p_rho^U - p_sigma^U||_p^p` for traceless `Delta` and even `p`.
pub fn expected_lp_bound(delta: &HermitianMatrix, p: u32) -> Result<f64> {
    if p < 2 || p % 2 == 1 || p as usize > crate::haar::MAX_MOMENT_ORDER {
        return Err(Error::InvalidArgument(format!(
            "p = {p} must be even in 2..=6"
        )));
    }
    let tr = delta.trace();
    if tr.abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "Delta has trace {tr}, expected 0"
        )));
    }
    let d = delta.dim();
    Ok(d as f64 / 2.0 * symmetric_moment_scale(d, p as usize) * hs_norm(delta).powi(p as i32))
}
