//! Per-user MMSE matrices, system MMSE and the interference covariance term,
//! estimated by Monte Carlo over the channel output with exact inner
//! posterior sums.
//!
//! Definitions estimated here:
//!
//! * `E_i = E_y[(x_i - x̂_i)(x_i - x̂_i)^H]` over sampled `(x1, x2, y)`,
//!   Hermitian-symmetrized;
//! * `mmse_i = Tr{A_i E_i A_i^H}` with `A_i = H_i P_i`, and
//!   `total = mmse_1 + mmse_2` by construction;
//! * the covariance combination
//!   `psi = Tr{A1 E[x̂1 x̂2^H] A2^H} - Tr{A2 E[x̂2 x̂1^H] A1^H}`.
//!
//! The two traces inside `psi` are complex conjugates of one another (the
//! second estimate is the adjoint of the first, taken from the same joint
//! posterior), so `psi` is purely imaginary; for real-valued models it is
//! identically zero. Reports therefore carry both `psi` and its real part,
//! and additionally the symmetric combination
//! `-2 Re Tr{A1 E[x̂1 x̂2^H] A2^H}`, which is the interference correction
//! that closes the snr-derivative identity measured by
//! [`crate::gradients::verify_snr_identity`].

use crate::model::{MacModel, McConfig};
use crate::pass::run_joint_pass;
use crate::{CMat, Result, C64};
use serde::Serialize;

/// Per-user MMSE matrices and scalar traces from one estimator pass.
#[derive(Debug, Clone, Serialize)]
pub struct MmseReport {
    #[serde(with = "crate::ser::cmat")]
    pub e1: CMat,
    #[serde(with = "crate::ser::cmat")]
    pub e2: CMat,
    pub mmse1: f64,
    pub mmse2: f64,
    /// `mmse1 + mmse2` exactly.
    pub total: f64,
    /// Difference-form covariance combination (purely imaginary).
    #[serde(with = "crate::ser::c64")]
    pub psi: C64,
    /// `Re(psi)`; identically zero, kept explicit for identity reports.
    pub re_psi: f64,
    /// `-2 Re Tr{A1 E[x̂1 x̂2^H] A2^H}` (symmetric interference correction).
    pub cross_correction: f64,
    /// Monte Carlo standard error of `total`.
    pub stderr: f64,
    pub samples: usize,
}

/// The two covariance traces of the difference form, individually.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PsiEstimate {
    #[serde(with = "crate::ser::c64")]
    pub trace_12: C64,
    #[serde(with = "crate::ser::c64")]
    pub trace_21: C64,
    /// `trace_12 - trace_21 = 2i Im(trace_12)`.
    #[serde(with = "crate::ser::c64")]
    pub value: C64,
    /// Standard errors of the real and imaginary parts of `trace_12`.
    pub stderr_re: f64,
    pub stderr_im: f64,
}

/// Per-user MMSE matrices `(E1, E2)`.
pub fn mmse_matrices(model: &MacModel, mc: &McConfig) -> Result<(CMat, CMat)> {
    mc.validate()?;
    let pass = run_joint_pass(model, mc);
    Ok((pass.e1(), pass.e2()))
}

/// Full MMSE report: matrices, traces, covariance term and standard error.
pub fn mmse_total(model: &MacModel, mc: &McConfig) -> Result<MmseReport> {
    mc.validate()?;
    let pass = run_joint_pass(model, mc);
    let (_, _, psi) = pass.psi();
    Ok(MmseReport {
        e1: pass.e1(),
        e2: pass.e2(),
        mmse1: pass.mmse1.mean(),
        mmse2: pass.mmse2.mean(),
        total: pass.total.mean(),
        psi,
        re_psi: psi.re,
        cross_correction: pass.cross_correction(),
        stderr: pass.total.stderr(),
        samples: pass.n as usize,
    })
}

/// The covariance combination `psi` with both traces reported individually.
pub fn covariance_psi(model: &MacModel, mc: &McConfig) -> Result<PsiEstimate> {
    mc.validate()?;
    let pass = run_joint_pass(model, mc);
    let (t12, t21, value) = pass.psi();
    Ok(PsiEstimate {
        trace_12: t12,
        trace_21: t21,
        value,
        stderr_re: pass.t12_re.stderr(),
        stderr_im: pass.t12_im.stderr(),
    })
}

/// Raw cross-correlation matrix `E_y[x̂1 x̂2^H]` (n_t1 x n_t2).
pub fn cross_covariance(model: &MacModel, mc: &McConfig) -> Result<CMat> {
    mc.validate()?;
    Ok(run_joint_pass(model, mc).c12())
}

/// Helper for invariant checks: eigenvalues of the Hermitian part.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()) * C64::from(0.5);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut v: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    v
}
