use super::RobustConfig;
use crate::error::{Error, Result};
use crate::linalg::{hs_norm, HermitianMatrix};
use crate::measure::{check_dims, CovarianceEstimate, UniformPovmSample};

const SIGMA_TOL: f64 = 1e-9;

/// Constraint values for one probe `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeMargin {
    /// `mean <x|Q|x>^{2t}`.
    pub hyper_lhs: f64,
    /// `(C t)^{2t} (mean <x|Q|x>^2)^t`.
    pub hyper_rhs: f64,
    /// `mean <x|Q|x>^2`.
    pub second_lhs: f64,
    /// `C (||Q||_HS^2 + Tr[Q]^2) / (d + 1)^2`.
    pub second_rhs: f64,
}

impl ProbeMargin {
    pub fn hyper_ok(&self) -> bool {
        self.hyper_lhs <= self.hyper_rhs * (1.0 + 1e-12)
    }

    pub fn second_ok(&self) -> bool {
        self.second_lhs <= self.second_rhs * (1.0 + 1e-12)
    }
}

/// Outcome of [`check_constraints`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintReport {
    pub weights: Vec<bool>,
    pub selected: usize,
    /// `ceil((1 - gamma) n)`.
    pub required: usize,
    pub count_ok: bool,
    /// Max entrywise gap between the supplied `Sigma` and the selected average.
    pub sigma_gap: f64,
    pub sigma_ok: bool,
    pub probes: Vec<ProbeMargin>,
    pub pass: bool,
}

impl ConstraintReport {
    pub fn hyper_ok(&self) -> bool {
        self.probes.iter().all(ProbeMargin::hyper_ok)
    }

    pub fn second_ok(&self) -> bool {
        self.probes.iter().all(ProbeMargin::second_ok)
    }
}

/// Evaluates the robust-covariance constraint system on a selection `w`.
///
/// With `x_i = v_i` on the selected samples and averages taken over the
/// selection, checks for every probe `Q`:
/// (a) the selection has `ceil((1 - gamma) n)` elements;
/// (b) `Sigma` equals the selected average of `|x_i><x_i|`;
/// (c) `mean <x|Q|x>^{2t} <= (C t)^{2t} (mean <x|Q|x>^2)^t`;
/// (d) `mean <x|Q|x>^2 <= C (||Q||_HS^2 + Tr[Q]^2) / (d + 1)^2`.
///
/// The probe set makes this a sound but incomplete check of the "for all
/// Hermitian `Q`" constraints.
pub fn check_constraints(
    samples: &[UniformPovmSample],
    w: &[bool],
    sigma: &CovarianceEstimate,
    probes: &[HermitianMatrix],
    cfg: &RobustConfig,
) -> Result<ConstraintReport> {
    cfg.validate()?;
    let d = check_dims(samples)?;
    let n = samples.len();
    if w.len() != n {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: n,
            got: w.len(),
        });
    }
    if probes.is_empty() {
        return Err(Error::Empty("probe set"));
    }
    if let Some(p) = probes.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.dim(),
        });
    }
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: sigma.dim(),
        });
    }
    let required = (((1.0 - cfg.gamma) * n as f64) - 1e-9).ceil() as usize;
    let chosen: Vec<&UniformPovmSample> = samples
        .iter()
        .zip(w)
        .filter_map(|(s, &on)| on.then_some(s))
        .collect();
    let selected = chosen.len();
    let count_ok = selected == required;

    let (sigma_gap, probe_margins) = if selected == 0 {
        (f64::INFINITY, Vec::new())
    } else {
        let m = selected as f64;
        let refs: Vec<_> = chosen.iter().map(|s| s.vector()).collect();
        let avg = HermitianMatrix::symmetrized(
            crate::measure::projector_sum(&refs, d) / crate::linalg::C64::from(m),
        );
        let gap = avg.max_abs_diff(sigma.matrix());
        let t = cfg.t as i32;
        let c = cfg.c_const;
        let df = d as f64;
        let margins = probes
            .iter()
            .map(|q| {
                let (mut s2, mut s2t) = (0.0, 0.0);
                for s in &chosen {
                    let x = q.quadratic_form(s.vector());
                    let x2 = x * x;
                    s2 += x2;
                    s2t += x2.powi(t);
                }
                let mean2 = s2 / m;
                let hs = hs_norm(q);
                ProbeMargin {
                    hyper_lhs: s2t / m,
                    hyper_rhs: (c * cfg.t as f64).powi(2 * t) * mean2.powi(t),
                    second_lhs: mean2,
                    second_rhs: c * (hs * hs + q.trace().powi(2)) / ((df + 1.0) * (df + 1.0)),
                }
            })
            .collect();
        (gap, margins)
    };
    let sigma_ok = sigma_gap <= SIGMA_TOL;
    let pass = count_ok
        && sigma_ok
        && !probe_margins.is_empty()
        && probe_margins.iter().all(|p| p.hyper_ok() && p.second_ok());
    Ok(ConstraintReport {
        weights: w.to_vec(),
        selected,
        required,
        count_ok,
        sigma_gap,
        sigma_ok,
        probes: probe_margins,
        pass,
    })
}
