use itertools::Itertools;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{from_real_coords, projector_real_coords, to_real_coords};
use crate::lowerbound::gell_mann_basis;
use crate::measure::{check_dims, CovarianceEstimate, UniformPovmSample};

/// Largest sample count [`subset_oracle`] will enumerate.
pub const SUBSET_ORACLE_MAX_SAMPLES: usize = 20;

/// Result of [`subset_oracle`].
#[derive(Clone, Debug)]
pub struct SubsetOutcome {
    pub covariance: CovarianceEstimate,
    pub selected: Vec<bool>,
    /// Largest per-sample deviation score of the chosen subset.
    pub score: f64,
}

/// Exhaustive robust covariance for tiny samples.
///
/// Enumerates every subset `S` of size `ceil((1 - gamma) n)` and keeps the one
/// with the smallest top deviation score
/// `max_{Q, i in S} <Q, |v_i><v_i| - Sigma_S>^2`. The probes `Q` are the `d^2`
/// Gell-Mann directions plus the top eigendirection of the subset's own
/// deviation covariance. Ties go to the lexicographically first subset.
pub fn subset_oracle(samples: &[UniformPovmSample], gamma: f64) -> Result<SubsetOutcome> {
    let d = check_dims(samples)?;
    let n = samples.len();
    if n > SUBSET_ORACLE_MAX_SAMPLES {
        return Err(Error::TooManySamples {
            what: "subset oracle",
            got: n,
            max: SUBSET_ORACLE_MAX_SAMPLES,
        });
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} must lie in [0, 1)"
        )));
    }
    let m = (((1.0 - gamma) * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let dd = d * d;
    let coords: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let mut r = vec![0.0; dd];
            projector_real_coords(s.vector(), &mut r);
            r
        })
        .collect();
    let probes: Vec<Vec<f64>> = if d >= 2 {
        gell_mann_basis(d)?
            .elements()
            .iter()
            .map(to_real_coords)
            .collect()
    } else {
        vec![vec![1.0]]
    };

    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for subset in (0..n).combinations(m) {
        let mf = m as f64;
        let mut mean = vec![0.0; dd];
        for &i in &subset {
            for (x, y) in mean.iter_mut().zip(&coords[i]) {
                *x += y / mf;
            }
        }
        let mut cov = DMatrix::<f64>::zeros(dd, dd);
        for &i in &subset {
            let dev: Vec<f64> = coords[i].iter().zip(&mean).map(|(x, mu)| x - mu).collect();
            for a in 0..dd {
                for b in a..dd {
                    cov[(a, b)] += dev[a] * dev[b] / mf;
                }
            }
        }
        for a in 0..dd {
            for b in 0..a {
                cov[(a, b)] = cov[(b, a)];
            }
        }
        let eig = cov.symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let own: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        let mut score = 0.0f64;
        for &i in &subset {
            for q in probes.iter().chain(std::iter::once(&own)) {
                let s: f64 = q
                    .iter()
                    .zip(&coords[i])
                    .zip(&mean)
                    .map(|((a, x), mu)| a * (x - mu))
                    .sum();
                score = score.max(s * s);
            }
        }
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, subset, mean));
        }
    }
    let (score, subset, mean) = best.expect("at least one subset");
    let mut selected = vec![false; n];
    for i in subset {
        selected[i] = true;
    }
    Ok(SubsetOutcome {
        covariance: CovarianceEstimate::from_parts(from_real_coords(d, &mean)?, m),
        selected,
        score,
    })
}
