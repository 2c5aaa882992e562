use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::RobustConfig;
use crate::adversary::corruption_budget;
use crate::error::{Error, Result};
use crate::linalg::{from_real_coords, projector_real_coords};
use crate::measure::{check_dims, CovarianceEstimate, UniformPovmSample};

const CHUNK: usize = 2048;

/// Result of [`filter_robust_covariance`].
#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub covariance: CovarianceEstimate,
    /// `true` for samples kept in the returned estimate.
    pub active: Vec<bool>,
    pub removed: usize,
    /// Top deviation eigenvalue at the start of each iteration.
    pub top_eigenvalues: Vec<f64>,
    pub threshold: f64,
    /// `false` when the removal cap was hit before the threshold was met; the
    /// returned covariance is then the iterate with the smallest top eigenvalue.
    pub converged: bool,
}

impl FilterOutcome {
    pub fn iterations(&self) -> usize {
        self.top_eigenvalues.len()
    }
}

struct Moments {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
}

fn chunk_moments(
    samples: &[UniformPovmSample],
    active: &[bool],
    dd: usize,
) -> (Vec<f64>, Vec<f64>, usize) {
    let mut sum = vec![0.0; dd];
    let mut outer = vec![0.0; dd * dd];
    let mut r = vec![0.0; dd];
    let mut count = 0;
    for (s, &on) in samples.iter().zip(active) {
        if !on {
            continue;
        }
        count += 1;
        projector_real_coords(s.vector(), &mut r);
        for a in 0..dd {
            let ra = r[a];
            sum[a] += ra;
            let row = &mut outer[a * dd..(a + 1) * dd];
            for b in a..dd {
                row[b] += ra * r[b];
            }
        }
    }
    (sum, outer, count)
}

fn moments(samples: &[UniformPovmSample], active: &[bool], dd: usize) -> Moments {
    let partials: Vec<(Vec<f64>, Vec<f64>, usize)> = samples
        .par_chunks(CHUNK)
        .zip(active.par_chunks(CHUNK))
        .map(|(s, a)| chunk_moments(s, a, dd))
        .collect();
    let mut sum = vec![0.0; dd];
    let mut outer = vec![0.0; dd * dd];
    let mut count = 0usize;
    for (s, o, c) in partials {
        for (x, y) in sum.iter_mut().zip(&s) {
            *x += y;
        }
        for (x, y) in outer.iter_mut().zip(&o) {
            *x += y;
        }
        count += c;
    }
    let m = count as f64;
    let mean: Vec<f64> = sum.iter().map(|x| x / m).collect();
    let mut cov = DMatrix::zeros(dd, dd);
    for a in 0..dd {
        for b in a..dd {
            let v = outer[a * dd + b] / m - mean[a] * mean[b];
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Moments { mean, cov }
}

fn top_eigenpair(cov: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = cov.clone().symmetric_eigen();
    let (idx, &lam) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    (lam, eig.eigenvectors.column(idx).iter().copied().collect())
}

/// Robust covariance by iterative spectral filtering.
///
/// Each round computes the covariance operator of the deviations
/// `|v_i><v_i| - Sigma` over the active samples, takes its top eigenpair
/// `(lambda, Q)`, and stops once `lambda <= slack * 3/((d+1)(d+2))`, the
/// certified variance bound of `<v|Q|v>` for unit-HS `Q`. Otherwise every
/// active sample is removed independently with probability `s_i / max s`,
/// `s_i = <Q, |v_i><v_i| - Sigma>^2`. At most `floor(max_removed_fraction n)`
/// samples are removed in total; when a round would exceed that, only the
/// highest-scoring candidates are dropped.
pub fn filter_robust_covariance<R: Rng + ?Sized>(
    samples: &[UniformPovmSample],
    cfg: &RobustConfig,
    rng: &mut R,
) -> Result<FilterOutcome> {
    cfg.validate()?;
    let d = check_dims(samples)?;
    let n = samples.len();
    if cfg.gamma > 0.0 {
        let needed = (10.0 / (cfg.gamma * cfg.gamma)).ceil() as usize;
        if n < needed {
            return Err(Error::InvalidArgument(format!(
                "filter needs n >= 10/gamma^2 = {needed} samples, got {n}"
            )));
        }
    }
    let dd = d * d;
    let df = d as f64;
    let threshold = cfg.filter_threshold_slack * 3.0 / ((df + 1.0) * (df + 2.0));
    let cap = corruption_budget(cfg.max_removed_fraction, n);

    let mut active = vec![true; n];
    let mut removed = 0usize;
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Vec<bool>)> = None;
    let mut r = vec![0.0; dd];

    let (final_mean, final_active, converged) = loop {
        let m = moments(samples, &active, dd);
        let (lam, q) = top_eigenpair(&m.cov);
        history.push(lam);
        if lam <= threshold {
            break (m.mean, active, true);
        }
        if best.as_ref().is_none_or(|b| lam < b.0) {
            best = Some((lam, m.mean.clone(), active.clone()));
        }
        let budget_left = cap - removed;
        if budget_left == 0 {
            let (_, mean, act) = best.take().expect("recorded above");
            break (mean, act, false);
        }
        let mut scores = vec![0.0; n];
        let mut s_max = 0.0f64;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            projector_real_coords(samples[i].vector(), &mut r);
            let proj: f64 = r
                .iter()
                .zip(&m.mean)
                .zip(&q)
                .map(|((x, mu), qq)| (x - mu) * qq)
                .sum();
            scores[i] = proj * proj;
            s_max = s_max.max(scores[i]);
        }
        if s_max <= 0.0 {
            let (_, mean, act) = best.take().expect("recorded above");
            break (mean, act, false);
        }
        let mut candidates: Vec<usize> = Vec::new();
        for i in 0..n {
            if active[i] && rng.random::<f64>() * s_max < scores[i] {
                candidates.push(i);
            }
        }
        if candidates.len() > budget_left {
            candidates.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            candidates.truncate(budget_left);
        }
        for &i in &candidates {
            active[i] = false;
        }
        removed += candidates.len();
    };

    let kept = final_active.iter().filter(|&&a| a).count();
    let sigma = from_real_coords(d, &final_mean)?;
    Ok(FilterOutcome {
        covariance: CovarianceEstimate::from_parts(sigma, kept),
        removed: n - kept,
        active: final_active,
        top_eigenvalues: history,
        threshold,
        converged,
    })
}
