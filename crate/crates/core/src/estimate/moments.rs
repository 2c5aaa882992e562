use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, DensityMatrix, HermitianMatrix, C64};
use crate::measure::UniformPovmSampler;

/// Swap operator `F |i>|j> = |j>|i>` on `C^d (x) C^d`, with `|i>|j>` at index `i d + j`.
pub fn swap_operator(d: usize) -> HermitianMatrix {
    let mut m = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(j * d + i, i * d + j)] = C64::from(1.0);
        }
    }
    HermitianMatrix::symmetrized(m)
}

/// `E_{v ~ D(rho)}[|v><v|^{(x)2}] = (I(x)I + F)(I(x)I + I(x)rho + rho(x)I) / ((d+1)(d+2))`.
pub fn second_moment_closed_form(rho: &DensityMatrix) -> HermitianMatrix {
    let d = rho.dim();
    let id = HermitianMatrix::identity(d);
    let id2 = HermitianMatrix::identity(d * d);
    let sym = &id2 + &swap_operator(d);
    let shift = &(&id2 + &id.kron(rho.as_hermitian())) + &rho.as_hermitian().kron(&id);
    let df = d as f64;
    let prod = sym.matrix() * shift.matrix() / C64::from((df + 1.0) * (df + 2.0));
    HermitianMatrix::symmetrized(prod)
}

/// Monte Carlo check of the hypercontractivity bound for the uniform POVM.
///
/// Returns `(lhs, rhs)` with `lhs = (d+1)^h (mean_{v ~ D(rho)} <v|M|v>^h)^2`
/// over `n_mc` draws and `rhs = ((h+1)!)^2 (Tr[M^2] + Tr[M]^2)^h`.
pub fn hypercontractivity_margin<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    m: &HermitianMatrix,
    h: u32,
    n_mc: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if h == 0 || h % 2 == 1 || h > 6 {
        return Err(Error::InvalidArgument(format!(
            "order h = {h} must be even and at most 6"
        )));
    }
    if m.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: m.dim(),
        });
    }
    if n_mc == 0 {
        return Err(Error::Empty("Monte Carlo draws"));
    }
    let sampler = UniformPovmSampler::new(rho);
    let mut acc = 0.0;
    for _ in 0..n_mc {
        let v = sampler.sample(rng);
        acc += m.quadratic_form(v.vector()).powi(h as i32);
    }
    let moment = acc / n_mc as f64;
    let d = rho.dim() as f64;
    let lhs = (d + 1.0).powi(h as i32) * moment * moment;
    let fact: f64 = (1..=(h + 1)).map(f64::from).product();
    let rhs = fact * fact * (m.power_trace(2) + m.trace().powi(2)).powi(h as i32);
    Ok((lhs, rhs))
}
