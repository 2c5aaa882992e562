//! Lower-bound laboratory: Hermitian bases, the sign-vector perturbation
//! ensemble around `I/d`, the measurement information channel, and the
//! chi-square, earth-mover and critical-epsilon calculators.

use rand::Rng;
use rayon::prelude::*;

use crate::adversary::{
    corruption_budget, coupling_attack_detailed, CapMode, CouplingPlan, OutcomeRecord,
};
use crate::error::{Error, Result};
use crate::haar::sample_haar_unitary;
use crate::linalg::{op_norm, CMatrix, DensityMatrix, HermitianMatrix, C64};
use crate::measure::{
    basis_distribution, born_distribution, sample_outcomes, OutcomeDistribution, Povm,
};
use crate::rng::child_rng;

const ORTHO_TOL: f64 = 1e-9;
const ZERO_EFFECT_TOL: f64 = 1e-12;

/// Default perturbation constant `c = 10 sqrt(2)`.
pub const DEFAULT_C_CONST: f64 = 14.142135623730951;

/// Orthonormal basis `V_1..V_{d^2}` of `d x d` Hermitian matrices with
/// `V_{d^2} = I/sqrt(d)` and every other element traceless.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianBasis {
    dim: usize,
    elements: Vec<HermitianMatrix>,
}

impl HermitianBasis {
    /// Checks orthonormality, tracelessness and the `I/sqrt(d)` last element.
    pub fn new(elements: Vec<HermitianMatrix>) -> Result<Self> {
        let first = elements.first().ok_or(Error::Empty("basis"))?;
        let d = first.dim();
        if elements.len() != d * d {
            return Err(Error::LengthMismatch {
                what: "basis elements",
                expected: d * d,
                got: elements.len(),
            });
        }
        for (i, a) in elements.iter().enumerate() {
            if a.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.dim(),
                });
            }
            for (j, b) in elements.iter().enumerate().skip(i) {
                let want = if i == j { 1.0 } else { 0.0 };
                let got = a.hs_inner(b);
                if (got - want).abs() > ORTHO_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "basis Gram entry ({i}, {j}) is {got}"
                    )));
                }
            }
        }
        let id = &HermitianMatrix::identity(d) * (1.0 / (d as f64).sqrt());
        if elements[d * d - 1].max_abs_diff(&id) > ORTHO_TOL {
            return Err(Error::InvalidArgument(
                "last basis element is not I/sqrt(d)".into(),
            ));
        }
        Ok(HermitianBasis { dim: d, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    /// The `d^2 - 1` traceless elements.
    pub fn traceless(&self) -> &[HermitianMatrix] {
        &self.elements[..self.elements.len() - 1]
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { min: 2, got: d });
    }
    Ok(())
}

/// Generalized Gell-Mann basis.
///
/// Order: symmetric `(E_jk + E_kj)/sqrt(2)` for `j < k` in row-major order,
/// then antisymmetric `-i(E_jk - E_kj)/sqrt(2)` in the same order, then the
/// diagonal ladder `diag(1, .., 1, -l, 0, ..)/sqrt(l(l+1))` for `l = 1..d-1`,
/// then `I/sqrt(d)`. At `d = 2` this is `X, Y, Z, I` over `sqrt(2)`.
pub fn gell_mann_basis(d: usize) -> Result<HermitianBasis> {
    check_dim(d)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
        .collect();
    for &(j, k) in &pairs {
        let mut m = CMatrix::zeros(d, d);
        m[(j, k)] = C64::new(s, 0.0);
        m[(k, j)] = C64::new(s, 0.0);
        out.push(HermitianMatrix::symmetrized(m));
    }
    for &(j, k) in &pairs {
        let mut m = CMatrix::zeros(d, d);
        m[(j, k)] = C64::new(0.0, -s);
        m[(k, j)] = C64::new(0.0, s);
        out.push(HermitianMatrix::symmetrized(m));
    }
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut diag = vec![0.0; d];
        diag[..l].iter_mut().for_each(|x| *x = 1.0 / norm);
        diag[l] = -(l as f64) / norm;
        out.push(HermitianMatrix::from_real_diagonal(&diag));
    }
    out.push(&HermitianMatrix::identity(d) * (1.0 / (d as f64).sqrt()));
    Ok(HermitianBasis {
        dim: d,
        elements: out,
    })
}

/// Normalized Pauli strings for `d = 2^N`, ordered by base-4 index with the
/// digits `I, X, Y, Z` and the identity string moved last.
pub fn pauli_basis(d: usize) -> Result<HermitianBasis> {
    check_dim(d)?;
    if !d.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "pauli basis needs d = 2^N, got {d}"
        )));
    }
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let single = [
        CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ];
    let qubits = d.trailing_zeros() as usize;
    let scale = C64::from(1.0 / (d as f64).sqrt());
    let mut out = Vec::with_capacity(d * d);
    for idx in 1..d * d {
        let mut m = CMatrix::identity(1, 1);
        let mut rest = idx;
        let mut digits = vec![0usize; qubits];
        for q in (0..qubits).rev() {
            digits[q] = rest % 4;
            rest /= 4;
        }
        for &dg in &digits {
            m = m.kronecker(&single[dg]);
        }
        out.push(HermitianMatrix::symmetrized(m * scale));
    }
    out.push(&HermitianMatrix::identity(d) * (1.0 / (d as f64).sqrt()));
    Ok(HermitianBasis {
        dim: d,
        elements: out,
    })
}

/// One draw `sigma_z = I/d + clip * Delta_z` from the perturbation ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedState {
    pub z: Vec<i8>,
    pub ell: usize,
    pub epsilon: f64,
    pub c_const: f64,
    /// Unclipped `Delta_z = (c eps / sqrt(d ell)) sum_i z_i V_i`.
    pub delta: HermitianMatrix,
    /// `min{1, 1/(2d ||Delta_z||_op)}`.
    pub clip: f64,
    pub state: DensityMatrix,
}

impl PerturbedState {
    /// Builds the state for a given sign vector, using the first `ell`
    /// elements of `basis`.
    pub fn with_signs(
        basis: &HermitianBasis,
        z: Vec<i8>,
        epsilon: f64,
        c_const: f64,
    ) -> Result<Self> {
        let d = basis.dim();
        let ell = z.len();
        check_ell(d, ell)?;
        if z.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(
                "sign vector entries must be +1 or -1".into(),
            ));
        }
        if !(epsilon >= 0.0 && c_const > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need epsilon >= 0 and c > 0, got {epsilon} and {c_const}"
            )));
        }
        let amp = c_const * epsilon / ((d * ell) as f64).sqrt();
        let mut acc = CMatrix::zeros(d, d);
        for (s, v) in z.iter().zip(basis.traceless()) {
            acc += v.matrix() * C64::from(*s as f64);
        }
        let delta = HermitianMatrix::symmetrized(acc * C64::from(amp));
        let op = op_norm(&delta);
        let clip = if op > 0.0 {
            (1.0 / (2.0 * d as f64 * op)).min(1.0)
        } else {
            1.0
        };
        let mm = &HermitianMatrix::identity(d) * (1.0 / d as f64);
        let state = DensityMatrix::new(&mm + &(&delta * clip))?;
        Ok(PerturbedState {
            z,
            ell,
            epsilon,
            c_const,
            delta,
            clip,
            state,
        })
    }

    /// The clipped perturbation `sigma_z - I/d`.
    pub fn clipped_delta(&self) -> HermitianMatrix {
        &self.delta * self.clip
    }
}

fn check_ell(d: usize, ell: usize) -> Result<()> {
    let lo = (d * d).div_ceil(2);
    if ell < lo || ell > d * d - 1 {
        return Err(Error::InvalidArgument(format!(
            "ell = {ell} must lie in [{lo}, {}]",
            d * d - 1
        )));
    }
    Ok(())
}

/// Uniform random signs of length `ell`.
pub fn random_signs<R: Rng + ?Sized>(ell: usize, rng: &mut R) -> Vec<i8> {
    (0..ell)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect()
}

/// Draws `sigma_z` with uniform `z` over the first `ell` Gell-Mann elements.
pub fn sample_perturbed_state<R: Rng + ?Sized>(
    d: usize,
    ell: usize,
    epsilon: f64,
    c_const: f64,
    rng: &mut R,
) -> Result<PerturbedState> {
    let basis = gell_mann_basis(d)?;
    check_ell(d, ell)?;
    PerturbedState::with_signs(&basis, random_signs(ell, rng), epsilon, c_const)
}

/// The perturbation ensemble for fixed `(d, ell, eps, c)` with a cached basis.
#[derive(Clone, Debug)]
pub struct PerturbationEnsemble {
    basis: HermitianBasis,
    pub ell: usize,
    pub epsilon: f64,
    pub c_const: f64,
}

impl PerturbationEnsemble {
    pub fn new(basis: HermitianBasis, ell: usize, epsilon: f64, c_const: f64) -> Result<Self> {
        check_ell(basis.dim(), ell)?;
        Ok(PerturbationEnsemble {
            basis,
            ell,
            epsilon,
            c_const,
        })
    }

    pub fn basis(&self) -> &HermitianBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PerturbedState> {
        PerturbedState::with_signs(
            &self.basis,
            random_signs(self.ell, rng),
            self.epsilon,
            self.c_const,
        )
    }
}

/// Measurement information channel `H(A) = sum_x M_x Tr[M_x A] / Tr[M_x]`
/// and its matrix `C_M = sum_x vec(M_x) vec(M_x)^dag / Tr[M_x]`.
#[derive(Clone, Debug)]
pub struct InfoChannel {
    dim: usize,
    effects: Vec<HermitianMatrix>,
    matrix: HermitianMatrix,
}

impl InfoChannel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `d^2 x d^2` matrix `C_M` on column-stacked vectors.
    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    /// `Tr[C_M] = sum_x Tr[M_x^2] / Tr[M_x]`.
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Effects kept after dropping zero ones.
    pub fn effects(&self) -> &[HermitianMatrix] {
        &self.effects
    }

    pub fn apply(&self, a: &HermitianMatrix) -> HermitianMatrix {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for m in &self.effects {
            acc += m.matrix() * C64::from(m.hs_inner(a) / m.trace());
        }
        HermitianMatrix::symmetrized(acc)
    }

    /// `<A, H(A)> = sum_x Tr[M_x A]^2 / Tr[M_x]`.
    pub fn form(&self, a: &HermitianMatrix) -> f64 {
        self.effects
            .iter()
            .map(|m| m.hs_inner(a).powi(2) / m.trace())
            .sum()
    }
}

pub fn info_channel(povm: &Povm) -> Result<InfoChannel> {
    let d = povm.dim();
    let dd = d * d;
    let mut c = CMatrix::zeros(dd, dd);
    let mut kept = Vec::new();
    for m in povm.effects() {
        let tr = m.trace();
        let size = m.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if tr <= ZERO_EFFECT_TOL {
            if size > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "effect has trace {tr} but entries up to {size}"
                )));
            }
            continue;
        }
        let v = m.matrix().as_slice();
        for a in 0..dd {
            let va = v[a] / tr;
            for b in 0..dd {
                c[(a, b)] += va * v[b].conj();
            }
        }
        kept.push(m.clone());
    }
    Ok(InfoChannel {
        dim: d,
        effects: kept,
        matrix: HermitianMatrix::symmetrized(c),
    })
}

/// `sum_x (p(x) - q(x))^2 / q(x)` over outcomes with `q(x) > 0`; errors if `p`
/// puts mass where `q` has none.
pub fn chi_square(p: &OutcomeDistribution, q: &OutcomeDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            what: "distributions",
            expected: q.len(),
            got: p.len(),
        });
    }
    let mut s = 0.0;
    for (x, (&a, &b)) in p.probs().iter().zip(q.probs()).enumerate() {
        if b > 0.0 {
            s += (a - b).powi(2) / b;
        } else if a > 1e-12 {
            return Err(Error::InconsistentOutcome { label: x });
        }
    }
    Ok(s)
}

/// Output of [`chi_square_bound_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareCheck {
    pub empirical_mean: f64,
    pub std_error: f64,
    /// `(c^2 eps^2 / ell) sum_{i <= ell} <V_i, H(V_i)>`.
    pub bound: f64,
    /// `(c^2 eps^2 / ell) Tr[C_M]`.
    pub loose_bound: f64,
}

impl ChiSquareCheck {
    /// Empirical mean within `k` standard errors of the bound (or below it).
    pub fn holds(&self, k: f64) -> bool {
        self.empirical_mean <= self.bound + k * self.std_error + 1e-15
    }
}

/// Monte Carlo mean of `chi^2(p_{sigma_z} || p_{I/d})` over `n_z` sign vectors
/// against the closed-form bound.
///
/// Without clipping the expectation equals `bound`, so the check is
/// `mean <= bound` up to Monte Carlo error.
#[allow(clippy::too_many_arguments)]
pub fn chi_square_bound_check<R: Rng + ?Sized>(
    povm: &Povm,
    basis: &HermitianBasis,
    ell: usize,
    epsilon: f64,
    c_const: f64,
    n_z: usize,
    rng: &mut R,
) -> Result<ChiSquareCheck> {
    let d = basis.dim();
    if povm.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: povm.dim(),
        });
    }
    check_ell(d, ell)?;
    if n_z == 0 {
        return Err(Error::Empty("sign vectors"));
    }
    let chan = info_channel(povm)?;
    let mm = DensityMatrix::maximally_mixed(d)?;
    let p0 = born_distribution(&mm, povm)?;
    let seed: u64 = rng.random();
    let values: Vec<f64> = (0..n_z)
        .into_par_iter()
        .map(|i| {
            let mut r = child_rng(seed, i as u64);
            let st =
                PerturbedState::with_signs(basis, random_signs(ell, &mut r), epsilon, c_const)?;
            chi_square(&born_distribution(&st.state, povm)?, &p0)
        })
        .collect::<Result<_>>()?;
    let (mean, se) = crate::stats::mean_and_std_error(&values);
    let scale = c_const * c_const * epsilon * epsilon / ell as f64;
    let partial: f64 = basis.traceless()[..ell].iter().map(|v| chan.form(v)).sum();
    Ok(ChiSquareCheck {
        empirical_mean: mean,
        std_error: se,
        bound: scale * partial,
        loose_bound: scale * chan.trace(),
    })
}

/// `gamma d / (4 sqrt(trace_h_sup))`.
pub fn critical_epsilon(gamma: f64, d: usize, trace_h_sup: f64) -> Result<f64> {
    if gamma < 0.0 || d == 0 || trace_h_sup <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "critical_epsilon needs gamma >= 0, d >= 1, trace > 0; got {gamma}, {d}, {trace_h_sup}"
        )));
    }
    Ok(gamma * d as f64 / (4.0 * trace_h_sup.sqrt()))
}

/// `2 n eps sqrt(max_m Tr[C_m]) / d`.
pub fn emd_upper_bound(povms: &[Povm], n: usize, epsilon: f64) -> Result<f64> {
    let first = povms.first().ok_or(Error::Empty("POVM list"))?;
    let d = first.dim();
    let mut best = 0.0f64;
    for p in povms {
        if p.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.dim(),
            });
        }
        best = best.max(info_channel(p)?.trace());
    }
    Ok(2.0 * n as f64 * epsilon * best.sqrt() / d as f64)
}

/// Result of [`coupling_budget_diagnostic`].
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingDiagnostic {
    pub epsilon: f64,
    /// Mean over copies of `TV(p_{I/d}^{U_i}, p_{sigma_z}^{U_i})`.
    pub mean_tv: f64,
    pub proposed_changes: usize,
    pub budget_used: usize,
    pub budget: usize,
    pub capped: bool,
}

/// Simulates the lower-bound adversary against Haar-random basis measurements.
///
/// Copies of `I/d` are measured in fresh Haar bases; the adversary
/// maximally couples each outcome to the law under one draw `sigma_z`, with
/// `eps = critical_epsilon(gamma, d, d) / c` so that the perturbation
/// amplitude `c eps` matches the critical scale.
pub fn coupling_budget_diagnostic<R: Rng + ?Sized>(
    d: usize,
    n: usize,
    gamma: f64,
    ell: usize,
    c_const: f64,
    rng: &mut R,
) -> Result<CouplingDiagnostic> {
    check_dim(d)?;
    if n == 0 {
        return Err(Error::Empty("copies"));
    }
    let epsilon = critical_epsilon(gamma, d, d as f64)? / c_const;
    let sigma = sample_perturbed_state(d, ell, epsilon, c_const, rng)?;
    let mm = DensityMatrix::maximally_mixed(d)?;
    let mut sources = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let u = sample_haar_unitary(d, rng);
        let p = basis_distribution(&mm, &u)?;
        outcomes.push(sample_outcomes(&p, 1, rng)[0]);
        targets.push(basis_distribution(&sigma.state, &u)?);
        sources.push(p);
    }
    let plan = CouplingPlan::new(sources, targets)?;
    let rec = OutcomeRecord::new(outcomes);
    let out = coupling_attack_detailed(&rec, &plan, gamma, CapMode::Prefix, rng)?;
    out.record.audit(&rec, gamma)?;
    Ok(CouplingDiagnostic {
        epsilon,
        mean_tv: plan.mean_tv(),
        proposed_changes: out.proposed_changes,
        budget_used: out.record.budget_used(),
        budget: corruption_budget(gamma, n),
        capped: out.capped,
    })
}
