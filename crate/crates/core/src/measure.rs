//! POVMs, Born-rule outcome simulation and the continuous uniform POVM.
//!
//! Outcome labels are `0..k`. The uniform POVM `{d |v><v| dv}` is simulated
//! exactly: its outcome law `D(rho)` with density `d <v|rho|v>` is the
//! eigenvalue-weighted mixture of the size-biased laws for each eigenvector,
//! and for a single eigenvector `|psi>` the overlap `|<psi|v>|^2` is
//! `Beta(2, d-1)` while the orthogonal part is Haar on the complement.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::haar::UnitaryMatrix;
use crate::linalg::{
    complex_gaussian, CMatrix, CVector, DensityMatrix, HermitianMatrix, PureState, C64, PSD_TOL,
};

const COMPLETENESS_TOL: f64 = 1e-8;
const PROB_SUM_TOL: f64 = 1e-9;
const ACCUMULATE_CHUNK: usize = 4096;

/// A finite POVM `{M_x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    dim: usize,
    effects: Vec<HermitianMatrix>,
}

impl Povm {
    /// Checks every effect is PSD and that they sum to the identity.
    pub fn new(effects: Vec<HermitianMatrix>) -> Result<Self> {
        let first = effects.first().ok_or(Error::Empty("POVM effects"))?;
        let dim = first.dim();
        let mut sum = CMatrix::zeros(dim, dim);
        for e in &effects {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.dim(),
                });
            }
            let min = e.min_eigenvalue();
            if min < -PSD_TOL {
                return Err(Error::NotPsd(min));
            }
            sum += e.matrix();
        }
        let dev = (sum - CMatrix::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > COMPLETENESS_TOL {
            return Err(Error::IncompletePovm(dev));
        }
        Ok(Povm { dim, effects })
    }

    /// Measurement in the computational basis.
    pub fn computational(d: usize) -> Self {
        basis_povm(&UnitaryMatrix::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[HermitianMatrix] {
        &self.effects
    }
}

/// Basis measurement `{|u_i><u_i|}` given by the columns of `u`.
pub fn basis_povm(u: &UnitaryMatrix) -> Povm {
    Povm {
        dim: u.dim(),
        effects: u.columns().map(|c| c.projector()).collect(),
    }
}

/// A probability vector over labels `0..k`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    /// Validates nonnegativity and unit sum. Entries in `[-1e-9, 0)` are
    /// rounding noise from Born-rule traces and are set to zero.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("outcome distribution"));
        }
        let mut probs = probs;
        for p in probs.iter_mut() {
            if !p.is_finite() || *p < -PSD_TOL {
                return Err(Error::InvalidDistribution(format!("entry {p} is negative")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
        }
        Ok(OutcomeDistribution { probs })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Empty("outcome distribution"));
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn point_mass(k: usize, label: usize) -> Result<Self> {
        if label >= k {
            return Err(Error::LabelOutOfRange { label, size: k });
        }
        let mut p = vec![0.0; k];
        p[label] = 1.0;
        Self::new(p)
    }

    /// Empirical frequencies of `labels` over `0..k`.
    pub fn empirical(labels: &[usize], k: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("outcome list"));
        }
        let mut counts = vec![0.0; k];
        for &l in labels {
            if l >= k {
                return Err(Error::LabelOutOfRange { label: l, size: k });
            }
            counts[l] += 1.0;
        }
        let n = labels.len() as f64;
        Self::new(counts.into_iter().map(|c| c / n).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, label: usize) -> f64 {
        self.probs[label]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn check_labels(&self, other: &OutcomeDistribution) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                what: "outcome distribution",
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }

    pub fn l1_distance(&self, other: &OutcomeDistribution) -> Result<f64> {
        self.check_labels(other)?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    /// `0.5 * ||p - q||_1`.
    pub fn tv_distance(&self, other: &OutcomeDistribution) -> Result<f64> {
        Ok(0.5 * self.l1_distance(other)?)
    }

    pub fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(&self.probs).expect("validated distribution has positive mass")
    }
}

/// Born rule: `p(x) = Tr[rho M_x]`.
pub fn born_distribution(rho: &DensityMatrix, m: &Povm) -> Result<OutcomeDistribution> {
    if rho.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: rho.dim(),
        });
    }
    let probs = m
        .effects()
        .iter()
        .map(|e| e.hs_inner(rho.as_hermitian()))
        .collect();
    OutcomeDistribution::new(probs)
}

/// Born distribution of a basis measurement, `p(x) = <u_x|rho|u_x>`, without
/// materializing the effects.
pub fn basis_distribution(rho: &DensityMatrix, u: &UnitaryMatrix) -> Result<OutcomeDistribution> {
    if rho.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: rho.dim(),
        });
    }
    OutcomeDistribution::new(u.diagonal_in_basis(rho.as_hermitian()))
}

/// `n` i.i.d. labels drawn by inverse-CDF lookup.
pub fn sample_outcomes<R: Rng + ?Sized>(
    dist: &OutcomeDistribution,
    n: usize,
    rng: &mut R,
) -> Vec<usize> {
    let w = dist.sampler();
    (0..n).map(|_| w.sample(rng)).collect()
}

/// Multinomial label counts for `n` draws, via sequential conditional binomials.
pub fn sample_counts<R: Rng + ?Sized>(dist: &OutcomeDistribution, n: u64, rng: &mut R) -> Vec<u64> {
    let k = dist.len();
    let mut counts = vec![0u64; k];
    let mut remaining = n;
    let mut mass_left = 1.0f64;
    for (x, &p) in dist.probs().iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if x + 1 == k || mass_left <= 0.0 {
            counts[x] = remaining;
            break;
        }
        let frac = (p / mass_left).clamp(0.0, 1.0);
        let c = Binomial::new(remaining, frac)
            .expect("probability in [0,1]")
            .sample(rng);
        counts[x] = c;
        remaining -= c;
        mass_left -= p;
    }
    counts
}

/// One outcome `|v>` of the uniform POVM.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformPovmSample(PureState);

impl UniformPovmSample {
    pub fn new(v: PureState) -> Self {
        UniformPovmSample(v)
    }

    pub fn vector(&self) -> &PureState {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn projector(&self) -> HermitianMatrix {
        self.0.projector()
    }
}

/// Exact sampler for the uniform-POVM outcome law `D(rho)`.
///
/// Holds the eigendecomposition of `rho`, so each draw costs `O(d)`.
#[derive(Clone, Debug)]
pub struct UniformPovmSampler {
    dim: usize,
    eigvecs: CMatrix,
    index: WeightedIndex<f64>,
    overlap: Option<Beta<f64>>,
}

impl UniformPovmSampler {
    pub fn new(rho: &DensityMatrix) -> Self {
        let spec = rho.as_hermitian().spectrum();
        let weights: Vec<f64> = spec.values.iter().map(|&l| l.max(0.0)).collect();
        let d = rho.dim();
        UniformPovmSampler {
            dim: d,
            eigvecs: spec.vectors,
            index: WeightedIndex::new(&weights).expect("trace-one state has positive weight"),
            overlap: (d > 1).then(|| Beta::new(2.0, (d - 1) as f64).expect("valid shape")),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UniformPovmSample {
        let i = self.index.sample(rng);
        let psi = self.eigvecs.column(i);
        let phase = C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
        let Some(beta) = &self.overlap else {
            return UniformPovmSample(PureState::from_unit_unchecked(psi * phase));
        };
        let w = beta.sample(rng);
        let perp = loop {
            let g = CVector::from_fn(self.dim, |_, _| complex_gaussian(rng));
            let g = &g - psi * psi.dotc(&g);
            let n = g.norm();
            if n > 1e-12 {
                break g / C64::from(n);
            }
        };
        let v = psi * (phase * w.sqrt()) + perp * C64::from((1.0 - w).sqrt());
        // Renormalize to absorb rounding in the orthogonal projection.
        let n = v.norm();
        UniformPovmSample(PureState::from_unit_unchecked(v / C64::from(n)))
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<UniformPovmSample> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// One draw from `D(rho)`. Builds a fresh [`UniformPovmSampler`]; reuse a
/// sampler when drawing many outcomes.
pub fn sample_uniform_povm<R: Rng + ?Sized>(rho: &DensityMatrix, rng: &mut R) -> UniformPovmSample {
    UniformPovmSampler::new(rho).sample(rng)
}

/// Empirical second moment `(1/n) sum_i |v_i><v_i|` of uniform-POVM outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    matrix: HermitianMatrix,
    count: usize,
}

impl CovarianceEstimate {
    pub(crate) fn from_parts(matrix: HermitianMatrix, count: usize) -> Self {
        CovarianceEstimate { matrix, count }
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `(d + 1) Sigma - I`, the state estimate implied by this covariance.
    pub fn to_state_estimate(&self) -> HermitianMatrix {
        let d = self.dim();
        &(&self.matrix * (d as f64 + 1.0)) - &HermitianMatrix::identity(d)
    }
}

fn outer_sum<'a>(vs: impl Iterator<Item = &'a PureState>, d: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(d, d);
    for v in vs {
        let a = v.amplitudes();
        acc.ger(C64::from(1.0), a, &a.conjugate(), C64::from(1.0));
    }
    acc
}

/// Sum of `|v><v|` over `samples`, in fixed-size chunks combined in order.
pub(crate) fn projector_sum(samples: &[&PureState], d: usize) -> CMatrix {
    let partials: Vec<CMatrix> = samples
        .par_chunks(ACCUMULATE_CHUNK)
        .map(|chunk| outer_sum(chunk.iter().copied(), d))
        .collect();
    partials
        .into_iter()
        .fold(CMatrix::zeros(d, d), |acc, p| acc + p)
}

pub(crate) fn check_dims(samples: &[UniformPovmSample]) -> Result<usize> {
    let first = samples.first().ok_or(Error::Empty("sample list"))?;
    let d = first.dim();
    if let Some(bad) = samples.iter().find(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    Ok(d)
}

/// Averages the outcome projectors. Deterministic for any thread count.
pub fn accumulate_covariance(samples: &[UniformPovmSample]) -> Result<CovarianceEstimate> {
    let d = check_dims(samples)?;
    let refs: Vec<&PureState> = samples.iter().map(|s| s.vector()).collect();
    let sum = projector_sum(&refs, d);
    let n = samples.len();
    Ok(CovarianceEstimate {
        matrix: HermitianMatrix::symmetrized(sum / C64::from(n as f64)),
        count: n,
    })
}

/// `Sigma_rho = (I + rho)/(d + 1)`, the mean of `|v><v|` under `D(rho)`.
pub fn expected_covariance(rho: &DensityMatrix) -> HermitianMatrix {
    let d = rho.dim();
    &(&HermitianMatrix::identity(d) + rho.as_hermitian()) * (1.0 / (d as f64 + 1.0))
}
