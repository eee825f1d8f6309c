//! Analytic gradients of mutual information with respect to channel and
//! precoder matrices, the snr-derivative identity checks, and the
//! finite-difference machinery that verifies all of them.
//!
//! ## Gradient convention
//!
//! All analytic gradients are returned in the snr-normalized form: the raw
//! gradient of the rate divided by `snr`. In this form the joint-rate
//! expressions are snr-free assemblies of the estimated statistics,
//!
//! ```text
//!   (1/snr) grad_{H1} I = (A1 E1 - A2 C21) P1^H,      A_i = H_i P_i,
//!   (1/snr) grad_{P1} I = H1^H (A1 E1 - A2 C21),      C21 = E[x̂2 x̂1^H],
//! ```
//!
//! and symmetrically for user 2. Complex entries follow the conjugate
//! (Wirtinger) convention calibrated against the single-user case: the
//! finite differences of the real-valued rate against the real and imaginary
//! parts of an entry equal `2 snr Re(g)` and `2 snr Im(g)` for the reported
//! entry `g`. The verifier applies exactly this scaling, so a reported
//! `fd_grad` is directly comparable to `grad`.
//!
//! The decode-first (interference-as-noise) rate under the Gaussian
//! surrogate has the normalized interferer-precoder gradient
//!
//! ```text
//!   (1/snr) grad_{P1} I(x2; y) =
//!       - snr H1^H S^{-1} A2 E2' A2^H S^{-1} H1 P1,   S = I + snr A1 A1^H,
//! ```
//!
//! with `E2'` the decode-first user's MMSE matrix under the surrogate; it is
//! negative semidefinite in the scalar case (more interferer power, less
//! rate) and vanishes at snr = 0 and for a silent interferer.
//!
//! ## Identity checks
//!
//! [`verify_snr_identity`] measures `dI/dsnr` by common-random-number
//! central differences and compares against `mmse_total + Re psi` (the
//! difference-form covariance combination, whose real part is identically
//! zero). The report also carries the symmetric cross-covariance correction
//! `-2 Re Tr{A1 C12 A2^H}`, which is what actually closes the identity on
//! interfering models; see the acceptance suite for the measured gap.

use crate::information::surrogate_pass;
use crate::mc::{self, RunningSum};
use crate::model::{MacModel, McConfig};
use crate::pass::{run_joint_pass, ContribTables, Functional};
use crate::posterior::EvalScratch;
use crate::{CMat, Error, Result, C64};
use serde::Serialize;

/// Which user's matrix a gradient differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum User {
    U1,
    U2,
}

impl User {
    pub fn other(self) -> Self {
        match self {
            User::U1 => User::U2,
            User::U2 => User::U1,
        }
    }
}

/// Gradient target: which rate, with respect to which matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GradientTarget {
    /// Joint rate w.r.t. `H_user`.
    JointWrtChannel(User),
    /// Joint rate w.r.t. `P_user`.
    JointWrtPrecoder(User),
    /// Decode-first rate of the *other* user w.r.t. `P_user` (surrogate).
    NcWrtOtherPrecoder(User),
    /// Conditional rate of `user` w.r.t. `P_user` (joint minus surrogate).
    CondWrtPrecoder(User),
}

/// An analytic gradient with optional finite-difference verification.
#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub target: GradientTarget,
    pub snr: f64,
    /// snr-normalized analytic gradient.
    #[serde(with = "crate::ser::cmat")]
    pub grad: CMat,
    /// snr-normalized central-difference estimate, if verification ran.
    #[serde(serialize_with = "crate::ser::opt_cmat")]
    pub fd_grad: Option<CMat>,
    /// Per-entry standard errors of `fd_grad`.
    #[serde(skip)]
    pub fd_stderr: Option<nalgebra::DMatrix<f64>>,
    pub max_abs_dev: Option<f64>,
    pub max_rel_dev: Option<f64>,
}

impl GradientReport {
    /// Entry-wise check: `|a - f| <= tol_scale * max(5 se, 0.02 |scale|)`.
    /// Returns `None` when no finite-difference data is attached.
    pub fn fd_check_passes(&self, tol_scale: f64) -> Option<bool> {
        let fd = self.fd_grad.as_ref()?;
        let se = self.fd_stderr.as_ref()?;
        let floor = entry_floor(&self.grad, fd);
        for r in 0..fd.nrows() {
            for c in 0..fd.ncols() {
                let a = self.grad[(r, c)];
                let f = fd[(r, c)];
                let dev = (a - f).norm();
                let scale = a.norm().max(f.norm()).max(floor);
                let tol = tol_scale * (5.0 * se[(r, c)]).max(0.02 * scale);
                if dev > tol {
                    return Some(false);
                }
            }
        }
        Some(true)
    }
}

/// Relative-deviation floor: entries far below the matrix scale are compared
/// in absolute terms against this fraction of the largest magnitude.
fn entry_floor(a: &CMat, b: &CMat) -> f64 {
    let m = a
        .iter()
        .chain(b.iter())
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    1e-3 * m.max(1e-12)
}

/// Max absolute and max floored-relative entry deviations between matrices.
pub fn deviation_stats(a: &CMat, b: &CMat) -> (f64, f64) {
    let floor = entry_floor(a, b);
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for (za, zb) in a.iter().zip(b.iter()) {
        let dev = (za - zb).norm();
        max_abs = max_abs.max(dev);
        max_rel = max_rel.max(dev / za.norm().max(zb.norm()).max(floor));
    }
    (max_abs, max_rel)
}

struct JointStats {
    e1: CMat,
    e2: CMat,
    c12: CMat,
    mmse1: f64,
    mmse2: f64,
    total: RunningSum,
    t12_re_mean: f64,
    psi: C64,
}

fn joint_stats(model: &MacModel, mc: &McConfig) -> JointStats {
    let pass = run_joint_pass(model, mc);
    let (_, _, psi) = pass.psi();
    JointStats {
        e1: pass.e1(),
        e2: pass.e2(),
        c12: pass.c12(),
        mmse1: pass.mmse1.mean(),
        mmse2: pass.mmse2.mean(),
        total: pass.total,
        t12_re_mean: pass.t12_re.mean(),
        psi,
    }
}

fn assemble_joint_channel(model: &MacModel, user: User, st: &JointStats) -> CMat {
    let a1 = model.link1.effective();
    let a2 = model.link2.effective();
    match user {
        User::U1 => (&a1 * &st.e1 - &a2 * st.c12.adjoint()) * model.link1.p().adjoint(),
        User::U2 => (&a2 * &st.e2 - &a1 * &st.c12) * model.link2.p().adjoint(),
    }
}

fn assemble_joint_precoder(model: &MacModel, user: User, st: &JointStats) -> CMat {
    let a1 = model.link1.effective();
    let a2 = model.link2.effective();
    match user {
        User::U1 => model.link1.h().adjoint() * (&a1 * &st.e1 - &a2 * st.c12.adjoint()),
        User::U2 => model.link2.h().adjoint() * (&a2 * &st.e2 - &a1 * &st.c12),
    }
}

/// `- snr H_u^H S^{-1} A_v E_v' A_v^H S^{-1} H_u P_u` (normalized form).
fn assemble_nc_other_precoder(model: &MacModel, user: User, e_other: &CMat) -> Result<CMat> {
    let snr = model.snr();
    let (link_u, link_v) = match user {
        User::U1 => (&model.link1, &model.link2),
        User::U2 => (&model.link2, &model.link1),
    };
    let a_u = link_u.effective();
    let a_v = link_v.effective();
    let n_r = model.n_r();
    let sigma = CMat::identity(n_r, n_r) + (&a_u * a_u.adjoint()) * C64::from(snr);
    let chol = nalgebra::Cholesky::new(sigma)
        .ok_or_else(|| Error::Dimension("interference covariance not positive definite".into()))?;
    let sinv_au = chol.solve(&a_u); // S^{-1} H_u P_u x-images
    let sinv_av = chol.solve(&a_v);
    let core = &sinv_av * e_other * a_v.adjoint() * &sinv_au;
    Ok(link_u.h().adjoint() * core * C64::from(-snr))
}

/// Joint-rate gradient w.r.t. the channel matrix of `user` (normalized).
pub fn grad_info_wrt_channel(
    model: &MacModel,
    user: User,
    mc: &McConfig,
) -> Result<GradientReport> {
    mc.validate()?;
    let st = joint_stats(model, mc);
    Ok(GradientReport {
        target: GradientTarget::JointWrtChannel(user),
        snr: model.snr(),
        grad: assemble_joint_channel(model, user, &st),
        fd_grad: None,
        fd_stderr: None,
        max_abs_dev: None,
        max_rel_dev: None,
    })
}

/// Joint-rate gradient w.r.t. the precoder of `user` (normalized).
pub fn grad_info_wrt_precoder(
    model: &MacModel,
    user: User,
    mc: &McConfig,
) -> Result<GradientReport> {
    mc.validate()?;
    let st = joint_stats(model, mc);
    Ok(GradientReport {
        target: GradientTarget::JointWrtPrecoder(user),
        snr: model.snr(),
        grad: assemble_joint_precoder(model, user, &st),
        fd_grad: None,
        fd_stderr: None,
        max_abs_dev: None,
        max_rel_dev: None,
    })
}

/// Gradient of the decode-first rate of the *other* user w.r.t. `P_user`,
/// under the Gaussian-interference surrogate.
pub fn grad_nc_info_wrt_other_precoder(
    model: &MacModel,
    user: User,
    mc: &McConfig,
) -> Result<GradientReport> {
    mc.validate()?;
    let (_, e_other) = surrogate_pass(model, user.other(), mc)?;
    Ok(GradientReport {
        target: GradientTarget::NcWrtOtherPrecoder(user),
        snr: model.snr(),
        grad: assemble_nc_other_precoder(model, user, &e_other)?,
        fd_grad: None,
        fd_stderr: None,
        max_abs_dev: None,
        max_rel_dev: None,
    })
}

/// Gradient of the conditional rate of `user` w.r.t. its own precoder:
/// joint-rate gradient minus the decode-first gradient of the other user.
pub fn grad_cond_info_wrt_precoder(
    model: &MacModel,
    user: User,
    mc: &McConfig,
) -> Result<GradientReport> {
    mc.validate()?;
    let st = joint_stats(model, mc);
    let (_, e_other) = surrogate_pass(model, user.other(), mc)?;
    let grad = assemble_joint_precoder(model, user, &st)
        - assemble_nc_other_precoder(model, user, &e_other)?;
    Ok(GradientReport {
        target: GradientTarget::CondWrtPrecoder(user),
        snr: model.snr(),
        grad,
        fd_grad: None,
        fd_stderr: None,
        max_abs_dev: None,
        max_rel_dev: None,
    })
}

/// Residual of the scaled-gradient identity
/// `grad_P I . P^H - H^H grad_H I` assembled from one shared pass.
pub fn scaled_gradient_residual(model: &MacModel, user: User, mc: &McConfig) -> Result<f64> {
    mc.validate()?;
    let st = joint_stats(model, mc);
    let (gh, gp, link) = match user {
        User::U1 => (
            assemble_joint_channel(model, user, &st),
            assemble_joint_precoder(model, user, &st),
            &model.link1,
        ),
        User::U2 => (
            assemble_joint_channel(model, user, &st),
            assemble_joint_precoder(model, user, &st),
            &model.link2,
        ),
    };
    let lhs = &gp * link.p().adjoint();
    let rhs = link.h().adjoint() * &gh;
    Ok((lhs - rhs).norm())
}

/// Which matrix the finite difference perturbs.
fn perturbed_model(model: &MacModel, target: GradientTarget, m: CMat) -> MacModel {
    match target {
        GradientTarget::JointWrtChannel(u) => model.with_h_unchecked(u, m),
        GradientTarget::JointWrtPrecoder(u)
        | GradientTarget::NcWrtOtherPrecoder(u)
        | GradientTarget::CondWrtPrecoder(u) => model.with_p_unchecked(u, m),
    }
}

fn base_matrix(model: &MacModel, target: GradientTarget) -> CMat {
    match target {
        GradientTarget::JointWrtChannel(User::U1) => model.link1.h().clone(),
        GradientTarget::JointWrtChannel(User::U2) => model.link2.h().clone(),
        GradientTarget::JointWrtPrecoder(User::U1)
        | GradientTarget::NcWrtOtherPrecoder(User::U1)
        | GradientTarget::CondWrtPrecoder(User::U1) => model.link1.p().clone(),
        GradientTarget::JointWrtPrecoder(User::U2)
        | GradientTarget::NcWrtOtherPrecoder(User::U2)
        | GradientTarget::CondWrtPrecoder(User::U2) => model.link2.p().clone(),
    }
}

/// Per-draw functional difference between two perturbed models (shared
/// draws: common random numbers).
fn fd_pair(
    base: &MacModel,
    plus: &MacModel,
    minus: &MacModel,
    target: GradientTarget,
    mc_cfg: &McConfig,
) -> Result<RunningSum> {
    enum Pair {
        Joint(Box<(ContribTables, ContribTables)>),
        Surrogate(
            Box<(
                crate::information::SurrogateTable,
                crate::information::SurrogateTable,
            )>,
        ),
        Combo(
            Box<(
                ContribTables,
                ContribTables,
                crate::information::SurrogateTable,
                crate::information::SurrogateTable,
            )>,
        ),
    }
    let pair = match target {
        GradientTarget::JointWrtChannel(_) | GradientTarget::JointWrtPrecoder(_) => Pair::Joint(
            Box::new((ContribTables::new(plus), ContribTables::new(minus))),
        ),
        GradientTarget::NcWrtOtherPrecoder(u) => Pair::Surrogate(Box::new((
            crate::information::SurrogateTable::new(plus, u.other())?,
            crate::information::SurrogateTable::new(minus, u.other())?,
        ))),
        GradientTarget::CondWrtPrecoder(u) => Pair::Combo(Box::new((
            ContribTables::new(plus),
            ContribTables::new(minus),
            crate::information::SurrogateTable::new(plus, u.other())?,
            crate::information::SurrogateTable::new(minus, u.other())?,
        ))),
    };
    Ok(mc::accumulate(
        base,
        mc_cfg,
        || (RunningSum::default(), EvalScratch::default()),
        |(acc, scratch), draw| {
            let d = match &pair {
                Pair::Joint(p) => {
                    p.0.eval(Functional::Joint, draw, scratch)
                        - p.1.eval(Functional::Joint, draw, scratch)
                }
                Pair::Surrogate(p) => p.0.contrib(draw) - p.1.contrib(draw),
                Pair::Combo(p) => {
                    (p.0.eval(Functional::Joint, draw, scratch) - p.2.contrib(draw))
                        - (p.1.eval(Functional::Joint, draw, scratch) - p.3.contrib(draw))
                }
            };
            acc.push(d);
        },
        |(mut a, sa), (b, _)| {
            a.merge(&b);
            (a, sa)
        },
    )
    .0)
}

/// Computes the analytic gradient and verifies it entrywise by central
/// finite differences of the matching rate with common random numbers.
/// `step` is the relative perturbation (1e-4 is the house default).
pub fn verify_gradient(
    model: &MacModel,
    target: GradientTarget,
    mc_cfg: &McConfig,
    step: f64,
) -> Result<GradientReport> {
    if step <= 0.0 || step.is_nan() {
        return Err(Error::NonFinite(format!("fd step = {step}")));
    }
    let mut report = match target {
        GradientTarget::JointWrtChannel(u) => grad_info_wrt_channel(model, u, mc_cfg)?,
        GradientTarget::JointWrtPrecoder(u) => grad_info_wrt_precoder(model, u, mc_cfg)?,
        GradientTarget::NcWrtOtherPrecoder(u) => grad_nc_info_wrt_other_precoder(model, u, mc_cfg)?,
        GradientTarget::CondWrtPrecoder(u) => grad_cond_info_wrt_precoder(model, u, mc_cfg)?,
    };
    let base = base_matrix(model, target);
    let snr = model.snr();
    if snr == 0.0 {
        return Err(Error::NonFinite(
            "finite-difference verification needs snr > 0 (raw gradients vanish at snr = 0)".into(),
        ));
    }
    let mut fd = CMat::zeros(base.nrows(), base.ncols());
    let mut se = nalgebra::DMatrix::<f64>::zeros(base.nrows(), base.ncols());
    for r in 0..base.nrows() {
        for c in 0..base.ncols() {
            let h = step * base[(r, c)].norm().max(1.0);
            let mut partials = [0.0f64; 2];
            let mut errs = [0.0f64; 2];
            for (axis, unit) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].iter().enumerate() {
                let mut mp = base.clone();
                mp[(r, c)] += unit * C64::from(h);
                let mut mm = base.clone();
                mm[(r, c)] -= unit * C64::from(h);
                let rs = fd_pair(
                    model,
                    &perturbed_model(model, target, mp),
                    &perturbed_model(model, target, mm),
                    target,
                    mc_cfg,
                )?;
                partials[axis] = rs.mean() / (2.0 * h);
                errs[axis] = rs.stderr() / (2.0 * h);
            }
            // conjugate-gradient convention: g = (d/dRe + i d/dIm) / 2,
            // then normalize by snr to match the analytic form
            fd[(r, c)] = C64::new(partials[0], partials[1]) / C64::from(2.0 * snr);
            se[(r, c)] = (errs[0].powi(2) + errs[1].powi(2)).sqrt() / (2.0 * snr);
        }
    }
    let (max_abs, max_rel) = deviation_stats(&report.grad, &fd);
    report.fd_grad = Some(fd);
    report.fd_stderr = Some(se);
    report.max_abs_dev = Some(max_abs);
    report.max_rel_dev = Some(max_rel);
    Ok(report)
}

/// snr-derivative identity report at one snr.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub snr: f64,
    pub delta: f64,
    /// Central difference of the joint rate with common random numbers.
    pub d_info_fd: f64,
    /// Same at half the step (truncation diagnostic).
    pub d_info_fd_half: f64,
    /// `mmse_total + Re psi` (the stated right-hand side).
    pub mmse_plus_psi: f64,
    pub residual: f64,
    /// Combined standard error of the residual.
    pub stderr: f64,
    #[serde(with = "crate::ser::c64")]
    pub psi: C64,
    pub re_psi: f64,
    /// `-2 Re Tr{A1 C12 A2^H}`: the symmetric interference correction.
    pub cross_correction: f64,
    /// `d_info_fd - (mmse_total + cross_correction)` (diagnostic).
    pub residual_with_cross: f64,
    /// Set when the two step sizes disagree beyond noise: delta too large.
    pub delta_flag: bool,
}

fn d_joint_fd(model: &MacModel, mc_cfg: &McConfig, delta: f64) -> Result<(f64, f64)> {
    let snr = model.snr();
    let (plus, minus, span) = if snr >= delta {
        (snr + delta, snr - delta, 2.0 * delta)
    } else {
        // one-sided at the low edge (snr = 0 included)
        (snr + delta, snr, delta)
    };
    let rs = fd_pair(
        model,
        &model.with_snr(plus)?,
        &model.with_snr(minus)?,
        GradientTarget::JointWrtChannel(User::U1), // joint functional
        mc_cfg,
    )?;
    Ok((rs.mean() / span, rs.stderr() / span))
}

/// Central-difference check of `dI/dsnr` against `mmse_total + Re psi`.
///
/// The report carries the diagnostic `residual_with_cross` alongside: the
/// same derivative against `mmse_total - 2 Re Tr{A1 C12 A2^H}`.
pub fn verify_snr_identity(
    model: &MacModel,
    mc_cfg: &McConfig,
    delta: f64,
) -> Result<IdentityReport> {
    mc_cfg.validate()?;
    if delta <= 0.0 || delta.is_nan() {
        return Err(Error::NonFinite(format!("delta = {delta}")));
    }
    let (d_full, se_full) = d_joint_fd(model, mc_cfg, delta)?;
    let (d_half, _) = d_joint_fd(model, mc_cfg, delta / 2.0)?;
    let st = joint_stats(model, mc_cfg);
    let total = st.total.mean();
    let se_total = st.total.stderr();
    let mmse_plus_psi = total + st.psi.re;
    let cross_correction = -2.0 * st.t12_re_mean;
    let residual = d_full - mmse_plus_psi;
    let stderr = (se_full.powi(2) + se_total.powi(2)).sqrt();
    let delta_flag = (d_full - d_half).abs() > (3.0 * stderr).max(0.01 * d_full.abs() + 1e-12);
    Ok(IdentityReport {
        snr: model.snr(),
        delta,
        d_info_fd: d_full,
        d_info_fd_half: d_half,
        mmse_plus_psi,
        residual,
        stderr,
        psi: st.psi,
        re_psi: st.psi.re,
        cross_correction,
        residual_with_cross: d_full - (total + cross_correction),
        delta_flag,
    })
}

/// One candidate right-hand side for a conditional/non-conditional branch.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateRhs {
    pub name: String,
    pub value: f64,
    pub residual: f64,
}

/// Finite-difference derivative of one rate with candidate right-hand sides.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalBranch {
    pub derivative_fd: f64,
    pub stderr: f64,
    pub candidates: Vec<CandidateRhs>,
}

/// Derivatives of the conditional (user 2) and non-conditional (user 1)
/// rates, with the candidate right-hand sides reported rather than asserted.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalIdentityReport {
    pub snr: f64,
    pub delta: f64,
    pub cond_user2: ConditionalBranch,
    pub nc_user1: ConditionalBranch,
    /// `d joint - (d nc1 + d cond2)`: differentiated chain rule.
    pub chain_residual: f64,
    pub chain_stderr: f64,
}

fn d_functional_fd(
    model: &MacModel,
    mc_cfg: &McConfig,
    delta: f64,
    f: Functional,
) -> Result<(f64, f64)> {
    let snr = model.snr();
    let (plus, minus, span) = if snr >= delta {
        (snr + delta, snr - delta, 2.0 * delta)
    } else {
        (snr + delta, snr, delta)
    };
    let tp = ContribTables::new(&model.with_snr(plus)?);
    let tm = ContribTables::new(&model.with_snr(minus)?);
    let rs = mc::accumulate(
        model,
        mc_cfg,
        || (RunningSum::default(), EvalScratch::default()),
        |(acc, scratch), draw| {
            let d = tp.eval(f, draw, scratch) - tm.eval(f, draw, scratch);
            acc.push(d);
        },
        |(mut a, sa), (b, _)| {
            a.merge(&b);
            (a, sa)
        },
    )
    .0;
    Ok((rs.mean() / span, rs.stderr() / span))
}

/// User 2's channel after exact cancellation of user 1 (for the conditional
/// mmse candidate): user 1 silenced and collapsed to the single zero point.
fn cancelled_model_user2(model: &MacModel) -> Result<MacModel> {
    let n_t1 = model.link1.n_t();
    let link1 = crate::model::UserLink::with_power_budget(
        model.link1.h().clone(),
        CMat::zeros(n_t1, n_t1),
        n_t1 as f64,
    )?;
    MacModel::new(
        link1,
        model.link2.clone(),
        crate::model::Constellation::single_zero(n_t1),
        model.c2.clone(),
        model.snr(),
    )
}

/// Finite-difference derivatives of `I(x2; y | x1)` and `I(x1; y)` with the
/// stated right-hand sides attached as reported candidates.
pub fn verify_conditional_identity(
    model: &MacModel,
    mc_cfg: &McConfig,
    delta: f64,
) -> Result<ConditionalIdentityReport> {
    mc_cfg.validate()?;
    if delta <= 0.0 || delta.is_nan() {
        return Err(Error::NonFinite(format!("delta = {delta}")));
    }
    let (d_cond2, se_cond2) = d_functional_fd(model, mc_cfg, delta, Functional::CondUser2)?;
    let (d_nc1, se_nc1) = d_functional_fd(model, mc_cfg, delta, Functional::NcUser1)?;
    let (d_joint, se_joint) = d_functional_fd(model, mc_cfg, delta, Functional::Joint)?;
    let st = joint_stats(model, mc_cfg);

    // conditional branch candidates
    let cancelled = cancelled_model_user2(model)?;
    let cond_pass = run_joint_pass(&cancelled, mc_cfg);
    let mmse2_conditional = cond_pass.mmse2.mean();
    let cond_candidates = vec![
        CandidateRhs {
            name: "mmse2_joint_plus_re_psi".into(),
            value: st.mmse2 + st.psi.re,
            residual: d_cond2 - (st.mmse2 + st.psi.re),
        },
        CandidateRhs {
            name: "mmse2_conditional".into(),
            value: mmse2_conditional,
            residual: d_cond2 - mmse2_conditional,
        },
    ];

    // non-conditional branch: scaling factor left open; report candidates
    let gamma = 1.0 / (1.0 + model.snr());
    let scaled = joint_stats(&model.with_snr(gamma * model.snr())?, mc_cfg);
    let nc_candidates = vec![
        CandidateRhs {
            name: "mmse1_joint".into(),
            value: st.mmse1,
            residual: d_nc1 - st.mmse1,
        },
        CandidateRhs {
            name: "mmse1_joint_at_gamma_snr".into(),
            value: scaled.mmse1,
            residual: d_nc1 - scaled.mmse1,
        },
    ];

    Ok(ConditionalIdentityReport {
        snr: model.snr(),
        delta,
        cond_user2: ConditionalBranch {
            derivative_fd: d_cond2,
            stderr: se_cond2,
            candidates: cond_candidates,
        },
        nc_user1: ConditionalBranch {
            derivative_fd: d_nc1,
            stderr: se_nc1,
            candidates: nc_candidates,
        },
        chain_residual: d_joint - (d_nc1 + d_cond2),
        chain_stderr: (se_joint.powi(2) + se_nc1.powi(2) + se_cond2.powi(2)).sqrt(),
    })
}
