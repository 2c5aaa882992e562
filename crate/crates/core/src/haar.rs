//! Haar-random unitaries and states, and exact Haar moments via
//! permutation-cycle sums.

use itertools::Itertools;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{ginibre, CMatrix, CVector, HermitianMatrix, PureState, C64};

/// Largest moment order handled by [`haar_trace_moment`] (`6! = 720` permutations).
pub const MAX_MOMENT_ORDER: usize = 6;

const UNITARY_TOL: f64 = 1e-8;

/// A `d x d` unitary matrix; column `i` is the basis vector `|u_i>`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    m: CMatrix,
}

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let (r, c) = m.shape();
        if r != c {
            return Err(Error::NotSquare(r, c));
        }
        if r == 0 {
            return Err(Error::DimensionTooSmall { min: 1, got: 0 });
        }
        let gram = m.adjoint() * &m;
        let id = CMatrix::identity(r, r);
        let dev = (gram - id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(UnitaryMatrix { m })
    }

    pub fn identity(d: usize) -> Self {
        UnitaryMatrix {
            m: CMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Column `i` as a state vector.
    pub fn column(&self, i: usize) -> PureState {
        PureState::from_unit_unchecked(self.m.column(i).into_owned())
    }

    pub fn columns(&self) -> impl Iterator<Item = PureState> + '_ {
        (0..self.dim()).map(|i| self.column(i))
    }

    pub fn adjoint(&self) -> Self {
        UnitaryMatrix {
            m: self.m.adjoint(),
        }
    }

    /// `<u_x|A|u_x>` for every column `x`.
    pub fn diagonal_in_basis(&self, a: &HermitianMatrix) -> Vec<f64> {
        let au = a.matrix() * &self.m;
        (0..self.dim())
            .map(|x| self.m.column(x).dotc(&au.column(x)).re)
            .collect()
    }
}

/// Haar-random unitary: QR of a Ginibre matrix with the phases of `R`'s
/// diagonal moved into `Q`.
pub fn sample_haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitaryMatrix {
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { C64::from(1.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix { m: q }
}

/// Haar-random state vector.
///
/// This is the first column of the phase-corrected QR factor, which for a
/// Ginibre matrix equals its normalized first column; only that column is
/// drawn.
pub fn sample_haar_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> PureState {
    loop {
        let g: CVector = ginibre(d, 1, rng).column(0).into_owned();
        if let Ok(v) = PureState::normalized(g) {
            return v;
        }
    }
}

/// A permutation of `{0..k-1}` with its cycle decomposition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationSpec {
    mapping: Vec<usize>,
    cycles: Vec<Vec<usize>>,
}

impl PermutationSpec {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let k = mapping.len();
        let mut seen = vec![false; k];
        for &m in &mapping {
            if m >= k || seen[m] {
                return Err(Error::InvalidArgument(format!(
                    "mapping {mapping:?} is not a bijection"
                )));
            }
            seen[m] = true;
        }
        let mut visited = vec![false; k];
        let mut cycles = Vec::new();
        for start in 0..k {
            if visited[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                cycle.push(i);
                i = mapping[i];
            }
            cycles.push(cycle);
        }
        Ok(PermutationSpec { mapping, cycles })
    }

    /// All `k!` permutations in lexicographic order.
    pub fn all(k: usize) -> Vec<PermutationSpec> {
        (0..k)
            .permutations(k)
            .map(|m| PermutationSpec::new(m).expect("permutations are bijections"))
            .collect()
    }

    pub fn size(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }

    pub fn cycle_lengths(&self) -> Vec<usize> {
        self.cycles.iter().map(Vec::len).collect()
    }

    pub fn num_cycles(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_derangement(&self) -> bool {
        self.cycles.iter().all(|c| c.len() > 1)
    }
}

/// `binom(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `binom(d + k - 1, k)^{-1}`, the prefactor of `E[|u><u|^{(x)k}]` in front of
/// the symmetric-subspace projector.
pub fn symmetric_moment_scale(d: usize, k: usize) -> f64 {
    1.0 / binomial(d + k - 1, k)
}

/// `E_{u ~ Haar}[<u|M|u>^k]`, computed by summing `prod_c Tr[M^{|c|}]` over all
/// permutations of `k` elements.
pub fn haar_trace_moment(m: &HermitianMatrix, k: usize) -> Result<f64> {
    if k > MAX_MOMENT_ORDER {
        return Err(Error::UnsupportedOrder(k));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let traces: Vec<f64> = (0..=k).map(|j| m.power_trace(j)).collect();
    let perms = PermutationSpec::all(k);
    let total: f64 = perms
        .iter()
        .map(|p| {
            p.cycle_lengths()
                .iter()
                .map(|&l| traces[l])
                .product::<f64>()
        })
        .sum();
    // binom(d+k-1, k) k! = d (d+1) ... (d+k-1); dividing by the rising
    // factorial keeps M = I exact.
    let rising: f64 = (0..k).map(|i| (m.dim() + i) as f64).product();
    Ok(total / rising)
}
