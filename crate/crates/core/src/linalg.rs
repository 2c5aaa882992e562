//! Complex Hermitian matrix numerics.
//!
//! [`HermitianMatrix`], [`DensityMatrix`] and [`PureState`] are validated at
//! construction and immutable afterwards. Norms, rank truncation and the
//! projection onto the state space all go through a sorted spectral
//! decomposition ([`Spectrum`]).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Entrywise tolerance for `A = A^dag` at construction.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues above `-PSD_TOL` count as nonnegative.
pub const PSD_TOL: f64 = 1e-9;
/// Allowed deviation of a state's trace from one.
pub const TRACE_TOL: f64 = 1e-9;
/// Allowed deviation of a pure state's squared norm from one.
pub const NORM_TOL: f64 = 1e-10;

/// Standard complex Gaussian with `E|z|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `d x d` matrix of i.i.d. standard complex Gaussians.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    // Column-major fill keeps the draw order stable across nalgebra versions.
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = complex_gaussian(rng);
        }
    }
    m
}

/// Eigenvalues sorted in descending order together with matching eigenvectors
/// (as columns).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    fn of(m: &CMatrix) -> Self {
        let eig = m.clone().symmetric_eigen();
        let d = m.nrows();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMatrix::zeros(d, d);
        for (k, &i) in order.iter().enumerate() {
            vectors.set_column(k, &eig.eigenvectors.column(i));
        }
        Spectrum { values, vectors }
    }

    /// Rebuilds `sum_i f(lambda_i) |v_i><v_i|`, skipping exact zeros.
    fn rebuild(&self, values: &[f64]) -> CMatrix {
        let d = self.vectors.nrows();
        let mut out = CMatrix::zeros(d, d);
        for (k, &lam) in values.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            out += v * v.adjoint() * C64::from(lam);
        }
        out
    }
}

/// A `d x d` complex Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    /// Validates `m` (square, `d >= 1`, Hermitian to [`HERMITIAN_TOL`]) and
    /// stores its exact Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        let (r, c) = m.shape();
        if r != c {
            return Err(Error::NotSquare(r, c));
        }
        if r == 0 {
            return Err(Error::DimensionTooSmall { min: 1, got: 0 });
        }
        let mut dev = 0.0f64;
        for i in 0..r {
            for j in i..r {
                dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::symmetrized(m))
    }

    /// Hermitian part `(m + m^dag)/2` without validation.
    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        HermitianMatrix {
            m: (m + adj) * C64::from(0.5),
        }
    }

    pub fn zeros(d: usize) -> Self {
        HermitianMatrix {
            m: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        HermitianMatrix {
            m: CMatrix::identity(d, d),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::from(x)));
        HermitianMatrix {
            m: CMatrix::from_diagonal(&v),
        }
    }

    /// `|v><v|`.
    pub fn projector(v: &PureState) -> Self {
        let a = v.amplitudes();
        HermitianMatrix { m: a * a.adjoint() }
    }

    /// `(A + A^dag) / 2` for an arbitrary square matrix.
    pub fn hermitian_part(m: &CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare(m.nrows(), m.ncols()));
        }
        Ok(Self::symmetrized(m.clone()))
    }

    /// Random GUE-like matrix with i.i.d. Gaussian entries.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self::symmetrized(ginibre(d, d, rng))
    }

    /// Random traceless Hermitian matrix scaled to the given HS norm.
    pub fn random_traceless<R: Rng + ?Sized>(d: usize, hs: f64, rng: &mut R) -> Self {
        let a = Self::random(d, rng);
        let shifted = &a - &(&Self::identity(d) * (a.trace() / d as f64));
        let norm = hs_norm(&shifted);
        if norm == 0.0 {
            return shifted;
        }
        &shifted * (hs / norm)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    /// `Tr[A B]` (real for Hermitian `A`, `B`).
    pub fn hs_inner(&self, other: &HermitianMatrix) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    /// `<v|A|v>`.
    pub fn quadratic_form(&self, v: &PureState) -> f64 {
        let a = v.amplitudes();
        a.dotc(&(&self.m * a)).re
    }

    /// `Tr[A^k]`.
    pub fn power_trace(&self, k: usize) -> f64 {
        let d = self.dim();
        let mut p = CMatrix::identity(d, d);
        for _ in 0..k {
            p = &p * &self.m;
        }
        p.trace().re
    }

    /// `U A U^dag`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        Ok(Self::symmetrized(u * &self.m * u.adjoint()))
    }

    /// `A (x) B`.
    pub fn kron(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix {
            m: self.m.kronecker(&other.m),
        }
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::of(&self.m)
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum().values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }

    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn check_same_dim(&self, other: &HermitianMatrix) {
        assert_eq!(self.dim(), other.dim(), "Hermitian dimension mismatch");
    }
}

impl std::ops::Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        self.check_same_dim(rhs);
        HermitianMatrix {
            m: &self.m + &rhs.m,
        }
    }
}

impl std::ops::Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        self.check_same_dim(rhs);
        HermitianMatrix {
            m: &self.m - &rhs.m,
        }
    }
}

impl std::ops::Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, s: f64) -> HermitianMatrix {
        HermitianMatrix {
            m: &self.m * C64::from(s),
        }
    }
}

impl std::ops::Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix { m: -&self.m }
    }
}

/// A unit-norm state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amps: CVector,
}

impl PureState {
    pub fn new(amps: CVector) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::DimensionTooSmall { min: 1, got: 0 });
        }
        let n2 = amps.norm_squared();
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(PureState { amps })
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(amps: CVector) -> Result<Self> {
        let n = amps.norm();
        if amps.is_empty() || n == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(PureState {
            amps: amps / C64::from(n),
        })
    }

    pub(crate) fn from_unit_unchecked(amps: CVector) -> Self {
        PureState { amps }
    }

    /// Computational basis vector `|i>`.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::InvalidArgument(format!(
                "basis index {i} out of range for dimension {d}"
            )));
        }
        let mut v = CVector::zeros(d);
        v[i] = C64::from(1.0);
        Ok(PureState { amps: v })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn projector(&self) -> HermitianMatrix {
        HermitianMatrix::projector(self)
    }
}

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    h: HermitianMatrix,
    eigenvalues: Vec<f64>,
}

impl DensityMatrix {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        let eigenvalues = h.eigenvalues();
        let min = *eigenvalues.last().expect("dim >= 1");
        if min < -PSD_TOL {
            return Err(Error::NotPsd(min));
        }
        Ok(DensityMatrix { h, eigenvalues })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(m)?)
    }

    /// `I/d`.
    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::DimensionTooSmall { min: 1, got: 0 });
        }
        Self::new(&HermitianMatrix::identity(d) * (1.0 / d as f64))
    }

    pub fn pure(v: &PureState) -> Self {
        let mut eigenvalues = vec![0.0; v.dim()];
        eigenvalues[0] = 1.0;
        DensityMatrix {
            h: v.projector(),
            eigenvalues,
        }
    }

    /// Random rank-`r` state `G G^dag / Tr[G G^dag]` with `G` a `d x r` Ginibre matrix.
    pub fn random<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> Result<Self> {
        if d == 0 || rank == 0 || rank > d {
            return Err(Error::InvalidArgument(format!(
                "rank {rank} must lie in 1..={d}"
            )));
        }
        let g = ginibre(d, rank, rng);
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        Self::new(HermitianMatrix::symmetrized(m / C64::from(tr)))
    }

    /// `(1 - a) I/d + a |psi><psi|`.
    pub fn mixed_with_pure(v: &PureState, a: f64) -> Result<Self> {
        let d = v.dim();
        let mm = &HermitianMatrix::identity(d) * ((1.0 - a) / d as f64);
        Self::new(&mm + &(&v.projector() * a))
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.h
    }

    pub fn matrix(&self) -> &CMatrix {
        self.h.matrix()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > tol).count()
    }
}

/// Sum of absolute eigenvalues.
pub fn trace_norm(a: &HermitianMatrix) -> f64 {
    a.eigenvalues().iter().map(|l| l.abs()).sum()
}

/// `sqrt(Tr[A^2])`, computed entrywise.
pub fn hs_norm(a: &HermitianMatrix) -> f64 {
    a.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest absolute eigenvalue.
pub fn op_norm(a: &HermitianMatrix) -> f64 {
    a.eigenvalues().iter().fold(0.0, |m, l| m.max(l.abs()))
}

/// Trace distance `||rho - sigma||_1` (no factor 1/2).
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    trace_norm(&(rho.as_hermitian() - sigma.as_hermitian()))
}

/// Best rank-`r` approximation of `A` in Hilbert-Schmidt norm.
///
/// Keeps the `r` eigenvalues of largest magnitude. Ties in `|lambda|` keep the
/// eigenvalue that comes first in descending order. `r = d` returns `A` as is.
pub fn truncate_rank(a: &HermitianMatrix, r: usize) -> Result<HermitianMatrix> {
    let d = a.dim();
    if r == 0 || r > d {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must lie in 1..={d}"
        )));
    }
    if r == d {
        return Ok(a.clone());
    }
    let spec = a.spectrum();
    let mut order: Vec<usize> = (0..d).collect();
    // Stable sort preserves the descending-eigenvalue order among ties.
    order.sort_by(|&i, &j| spec.values[j].abs().total_cmp(&spec.values[i].abs()));
    let mut kept = vec![0.0; d];
    for &i in order.iter().take(r) {
        kept[i] = spec.values[i];
    }
    Ok(HermitianMatrix::symmetrized(spec.rebuild(&kept)))
}

/// Euclidean projection of a real vector onto the probability simplex.
pub fn project_to_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Closest density matrix in HS norm: eigenvalues projected onto the
/// simplex, eigenvectors kept. Valid states are returned unchanged.
pub fn project_to_state(a: &HermitianMatrix) -> DensityMatrix {
    if let Ok(rho) = DensityMatrix::new(a.clone()) {
        return rho;
    }
    let spec = a.spectrum();
    let projected = project_to_simplex(&spec.values);
    let h = HermitianMatrix::symmetrized(spec.rebuild(&projected));
    let eigenvalues = projected;
    DensityMatrix { h, eigenvalues }
}

/// Writes a Hermitian matrix as `d^2` real coordinates in an orthonormal
/// basis: diagonal entries first, then `sqrt(2) Re A_ij`, `sqrt(2) Im A_ij`
/// for `i < j` in row-major order. The map is an isometry from the HS inner
/// product to the Euclidean one.
pub fn to_real_coords(a: &HermitianMatrix) -> Vec<f64> {
    let d = a.dim();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        out.push(a.get(i, i).re);
    }
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = a.get(i, j);
            out.push(s * z.re);
            out.push(s * z.im);
        }
    }
    out
}

/// Real coordinates of `|v><v|` (see [`to_real_coords`]), written into `out`.
pub fn projector_real_coords(v: &PureState, out: &mut [f64]) {
    let a = v.amplitudes();
    let d = a.len();
    debug_assert_eq!(out.len(), d * d);
    for i in 0..d {
        out[i] = a[i].norm_sqr();
    }
    let s = std::f64::consts::SQRT_2;
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = a[i] * a[j].conj();
            out[k] = s * z.re;
            out[k + 1] = s * z.im;
            k += 2;
        }
    }
}

/// Inverse of [`to_real_coords`].
pub fn from_real_coords(d: usize, coords: &[f64]) -> Result<HermitianMatrix> {
    if coords.len() != d * d {
        return Err(Error::LengthMismatch {
            what: "real coordinates",
            expected: d * d,
            got: coords.len(),
        });
    }
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::from(coords[i]);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut k = d;
    for i in 0..d {
        for j in (i + 1)..d {
            let z = C64::new(coords[k] * s, coords[k + 1] * s);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    Ok(HermitianMatrix { m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;

    fn pauli_z_like() -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn trace_norm_examples() {
        assert_eq!(trace_norm(&HermitianMatrix::zeros(3)), 0.0);
        assert_abs_diff_eq!(trace_norm(&pauli_z_like()), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn hs_norm_examples() {
        assert_abs_diff_eq!(hs_norm(&HermitianMatrix::identity(4)), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hs_norm(&pauli_z_like()), 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = C64::new(0.0, 1e-6);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(Error::NotHermitian(_))
        ));
        assert!(matches!(
            HermitianMatrix::new(CMatrix::zeros(2, 3)),
            Err(Error::NotSquare(2, 3))
        ));
    }

    #[test]
    fn density_validation() {
        let bad_trace = HermitianMatrix::from_real_diagonal(&[0.5, 0.4]);
        assert!(matches!(
            DensityMatrix::new(bad_trace),
            Err(Error::InvalidTrace(_))
        ));
        let not_psd = HermitianMatrix::from_real_diagonal(&[1.2, -0.2]);
        assert!(matches!(DensityMatrix::new(not_psd), Err(Error::NotPsd(_))));
        assert!(PureState::new(CVector::from_element(2, C64::from(1.0))).is_err());
    }

    #[test]
    fn truncate_examples() {
        let a = HermitianMatrix::from_real_diagonal(&[0.5, 0.3, 0.2]);
        assert_eq!(truncate_rank(&a, 3).unwrap(), a);
        let b = HermitianMatrix::from_real_diagonal(&[0.9, 0.1]);
        let t = truncate_rank(&b, 1).unwrap();
        assert!(t.max_abs_diff(&HermitianMatrix::from_real_diagonal(&[0.9, 0.0])) < 1e-12);
        assert!(truncate_rank(&b, 0).is_err());
        assert!(truncate_rank(&b, 3).is_err());
    }

    #[test]
    fn truncate_keeps_largest_magnitude() {
        let a = HermitianMatrix::from_real_diagonal(&[0.3, -0.9, 0.1]);
        let t = truncate_rank(&a, 1).unwrap();
        assert!(t.max_abs_diff(&HermitianMatrix::from_real_diagonal(&[0.0, -0.9, 0.0])) < 1e-12);
    }

    #[test]
    fn truncate_ties_keep_earlier_descending_entry() {
        // Eigenvalues 0.5 and -0.5 tie in magnitude; the positive one comes
        // first in descending order and is kept.
        let a = HermitianMatrix::from_real_diagonal(&[-0.5, 0.5]);
        let t = truncate_rank(&a, 1).unwrap();
        assert!(t.max_abs_diff(&HermitianMatrix::from_real_diagonal(&[0.0, 0.5])) < 1e-12);
    }

    #[test]
    fn projection_examples() {
        let rho = DensityMatrix::random(3, 2, &mut seeded(1)).unwrap();
        assert_eq!(project_to_state(rho.as_hermitian()), rho);
        let p = project_to_state(&HermitianMatrix::from_real_diagonal(&[1.2, -0.2]));
        assert!(
            p.as_hermitian()
                .max_abs_diff(&HermitianMatrix::from_real_diagonal(&[1.0, 0.0]))
                < 1e-12
        );
        let q = project_to_state(&HermitianMatrix::from_real_diagonal(&[0.6, 0.6]));
        assert!(
            q.as_hermitian()
                .max_abs_diff(&HermitianMatrix::from_real_diagonal(&[0.5, 0.5]))
                < 1e-12
        );
    }

    #[test]
    fn real_coords_round_trip_and_isometry() {
        let mut rng = seeded(5);
        let a = HermitianMatrix::random(4, &mut rng);
        let b = HermitianMatrix::random(4, &mut rng);
        let ca = to_real_coords(&a);
        let cb = to_real_coords(&b);
        let dot: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
        assert_abs_diff_eq!(dot, a.hs_inner(&b), epsilon = 1e-10);
        assert!(from_real_coords(4, &ca).unwrap().max_abs_diff(&a) < 1e-12);

        let v = PureState::normalized(ginibre(4, 1, &mut rng).column(0).into()).unwrap();
        let mut pc = vec![0.0; 16];
        projector_real_coords(&v, &mut pc);
        let direct = to_real_coords(&v.projector());
        for (x, y) in pc.iter().zip(&direct) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }
}
