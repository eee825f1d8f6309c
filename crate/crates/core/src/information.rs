//! Joint, non-conditional and conditional mutual information estimators,
//! plus the Gaussian-interference surrogate rate of the decode-first user.
//!
//! Per sampled `(x1, x2, y)`:
//!
//! * joint: `log p(y|x1,x2) - log p_y(y)`;
//! * non-conditional (other user as noise): `log p(y|x_i) - log p_y(y)` with
//!   exact inner marginalization over the other alphabet;
//! * conditional: by exact interference cancellation, the single-user
//!   contribution at `y - sqrt(snr) A_j x_j` (default route), with the
//!   density-ratio route `log p(y|x1,x2) - log p(y|x_j)` kept alongside —
//!   the two agree pointwise up to rounding.
//!
//! All five estimates come from one pass over one sample stream. Internal
//! unit is nats; every estimate carries bits alongside.
//!
//! The surrogate rate replaces the interferer by Gaussian noise of matched
//! covariance: `y = sqrt(snr) A_u x_u + w`, `w ~ CN(0, I + snr A_v A_v^H)`,
//! sampled from the surrogate model itself.

use crate::gradients::User;
use crate::mc::{self, RunningSum};
use crate::model::{MacModel, McConfig};
use crate::pass::run_joint_pass;
use crate::posterior::logsumexp;
use crate::{CMat, CVec, Error, Result, C64, NATS_TO_BITS};
use serde::Serialize;

/// One mutual-information estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MiEstimate {
    pub nats: f64,
    pub bits: f64,
    /// Standard error in nats.
    pub stderr: f64,
}

impl MiEstimate {
    pub(crate) fn from_running(rs: &RunningSum) -> Self {
        let nats = rs.mean();
        Self {
            nats,
            bits: nats * NATS_TO_BITS,
            stderr: rs.stderr(),
        }
    }
}

/// All mutual-information quantities of one model at one snr.
#[derive(Debug, Clone, Serialize)]
pub struct InfoReport {
    pub joint: MiEstimate,
    pub i1_nc: MiEstimate,
    pub i2_nc: MiEstimate,
    pub i1_cond: MiEstimate,
    pub i2_cond: MiEstimate,
    /// Decode-first rate of user 2 under the Gaussian-interference surrogate
    /// (filled on request; drawn from the surrogate model).
    pub gaussian_approx_i2_nc: Option<MiEstimate>,
    pub samples: usize,
}

impl InfoReport {
    /// Residuals of the two chain-rule decompositions (nats).
    pub fn chain_residuals(&self) -> (f64, f64) {
        (
            self.joint.nats - (self.i1_nc.nats + self.i2_cond.nats),
            self.joint.nats - (self.i2_nc.nats + self.i1_cond.nats),
        )
    }
}

/// Joint mutual information `I(x1, x2; y)` in nats.
pub fn joint_info(model: &MacModel, mc: &McConfig) -> Result<MiEstimate> {
    mc.validate()?;
    Ok(MiEstimate::from_running(&run_joint_pass(model, mc).joint))
}

/// `I(x1; y)` with user 2 treated as channel noise (exact marginalization).
pub fn nc_info_user1(model: &MacModel, mc: &McConfig) -> Result<MiEstimate> {
    mc.validate()?;
    Ok(MiEstimate::from_running(&run_joint_pass(model, mc).i1_nc))
}

/// `I(x2; y)` with user 1 treated as channel noise.
pub fn nc_info_user2(model: &MacModel, mc: &McConfig) -> Result<MiEstimate> {
    mc.validate()?;
    Ok(MiEstimate::from_running(&run_joint_pass(model, mc).i2_nc))
}

/// `I(x2; y | x1)` by exact cancellation of user 1 (default route).
pub fn cond_info_user2(model: &MacModel, mc: &McConfig) -> Result<MiEstimate> {
    mc.validate()?;
    Ok(MiEstimate::from_running(
        &run_joint_pass(model, mc).i2_cond_cancel,
    ))
}

/// `I(x1; y | x2)` by exact cancellation of user 2.
pub fn cond_info_user1(model: &MacModel, mc: &McConfig) -> Result<MiEstimate> {
    mc.validate()?;
    Ok(MiEstimate::from_running(
        &run_joint_pass(model, mc).i1_cond_cancel,
    ))
}

/// Density-ratio route for the conditional rates; agrees with the
/// cancellation route pointwise and is kept for cross-checking.
pub fn cond_info_density_ratio(model: &MacModel, mc: &McConfig, user: User) -> Result<MiEstimate> {
    mc.validate()?;
    let pass = run_joint_pass(model, mc);
    Ok(MiEstimate::from_running(match user {
        User::U1 => &pass.i1_cond,
        User::U2 => &pass.i2_cond,
    }))
}

/// Everything at once from one shared sample stream.
pub fn info_report(model: &MacModel, mc: &McConfig, with_gaussian: bool) -> Result<InfoReport> {
    mc.validate()?;
    let pass = run_joint_pass(model, mc);
    let gaussian = if with_gaussian {
        Some(nc_info_gaussian_interference(model, User::U2, mc)?)
    } else {
        None
    };
    Ok(InfoReport {
        joint: MiEstimate::from_running(&pass.joint),
        i1_nc: MiEstimate::from_running(&pass.i1_nc),
        i2_nc: MiEstimate::from_running(&pass.i2_nc),
        i1_cond: MiEstimate::from_running(&pass.i1_cond_cancel),
        i2_cond: MiEstimate::from_running(&pass.i2_cond_cancel),
        gaussian_approx_i2_nc: gaussian,
        samples: pass.n as usize,
    })
}

/// Precomputed surrogate-channel tables: decode-first user `u` with the
/// other user's signal replaced by Gaussian noise of matched covariance.
pub(crate) struct SurrogateTable {
    user: User,
    /// Scaled signal images `sqrt(snr) A_u x_k`.
    means: Vec<CVec>,
    points: Vec<CVec>,
    logp: Vec<f64>,
    /// Cholesky factor of `Sigma = I + snr A_v A_v^H`.
    chol: nalgebra::Cholesky<C64, nalgebra::Dyn>,
}

impl SurrogateTable {
    pub fn new(model: &MacModel, user: User) -> Result<Self> {
        let (link_u, link_v, cons) = match user {
            User::U1 => (&model.link1, &model.link2, &model.c1),
            User::U2 => (&model.link2, &model.link1, &model.c2),
        };
        let a_u = link_u.effective();
        let a_v = link_v.effective();
        let n_r = model.n_r();
        let sigma = CMat::identity(n_r, n_r) + (&a_v * a_v.adjoint()) * C64::from(model.snr());
        let chol = nalgebra::Cholesky::new(sigma).ok_or_else(|| {
            Error::Dimension("interference covariance not positive definite".into())
        })?;
        let sqrt_s = C64::from(model.snr().sqrt());
        Ok(Self {
            user,
            means: cons.points().iter().map(|x| (&a_u * x) * sqrt_s).collect(),
            points: cons.points().to_vec(),
            logp: (0..cons.len()).map(|k| cons.log_prior(k)).collect(),
            chol,
        })
    }

    /// Whitened quadratic form `(y - mean_k)^H Sigma^{-1} (y - mean_k)`.
    fn qform(&self, y: &CVec, k: usize) -> f64 {
        let d = y - &self.means[k];
        let solved = self.chol.solve(&d);
        d.dotc(&solved).re
    }

    fn sampled_index(&self, draw: &mc::Draw) -> usize {
        match self.user {
            User::U1 => draw.x1,
            User::U2 => draw.x2,
        }
    }

    fn output(&self, draw: &mc::Draw) -> CVec {
        // surrogate sampling: noise pushed through this table's own factor
        &self.means[self.sampled_index(draw)] + self.chol.l() * &draw.noise
    }

    /// Per-draw MI contribution under the surrogate densities.
    pub fn contrib(&self, draw: &mc::Draw) -> f64 {
        let k = self.sampled_index(draw);
        let y = self.output(draw);
        let lls: Vec<f64> = (0..self.means.len())
            .map(|j| -self.qform(&y, j) + self.logp[j])
            .collect();
        -self.qform(&y, k) - logsumexp(&lls)
    }

    /// Per-draw MI contribution plus the sampled error outer product of the
    /// decode-first user under the surrogate posterior.
    pub fn contrib_and_error(&self, draw: &mc::Draw) -> (f64, CMat) {
        let k = self.sampled_index(draw);
        let y = self.output(draw);
        let logw: Vec<f64> = (0..self.means.len())
            .map(|j| -self.qform(&y, j) + self.logp[j])
            .collect();
        let lse = logsumexp(&logw);
        let mi = -self.qform(&y, k) - lse;
        let dim = self.points[0].len();
        let mut xhat = CVec::zeros(dim);
        for (j, lw) in logw.iter().enumerate() {
            xhat += &self.points[j] * C64::from((lw - lse).exp());
        }
        let err = &self.points[k] - xhat;
        (mi, &err * err.adjoint())
    }
}

/// Surrogate-model pass: MI running sum plus the decode-first user's MMSE
/// matrix under the surrogate posterior (used by the precoder gradients).
pub(crate) fn surrogate_pass(
    model: &MacModel,
    decode_first: User,
    mc_cfg: &McConfig,
) -> Result<(RunningSum, CMat)> {
    let table = SurrogateTable::new(model, decode_first)?;
    let dim = match decode_first {
        User::U1 => model.c1.dim(),
        User::U2 => model.c2.dim(),
    };
    let (rs, e_sum, n) = mc::accumulate(
        model,
        mc_cfg,
        || (RunningSum::default(), CMat::zeros(dim, dim), 0u64),
        |(rs, e_sum, n), draw| {
            let (mi, outer) = table.contrib_and_error(draw);
            rs.push(mi);
            *e_sum += outer;
            *n += 1;
        },
        |(mut a, ea, na), (b, eb, nb)| {
            a.merge(&b);
            (a, ea + eb, na + nb)
        },
    );
    let e = &e_sum / C64::from(n as f64);
    let e = (&e + e.adjoint()) * C64::from(0.5);
    Ok((rs, e))
}

/// Mutual information of the decode-first user under the
/// Gaussian-interference surrogate, by Monte Carlo on the surrogate model.
pub fn nc_info_gaussian_interference(
    model: &MacModel,
    decode_first: User,
    mc_cfg: &McConfig,
) -> Result<MiEstimate> {
    mc_cfg.validate()?;
    let table = SurrogateTable::new(model, decode_first)?;
    let rs = mc::accumulate(
        model,
        mc_cfg,
        RunningSum::default,
        |acc, draw| acc.push(table.contrib(draw)),
        |mut a, b| {
            a.merge(&b);
            a
        },
    );
    Ok(MiEstimate::from_running(&rs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bpsk_scalar_mac, Constellation, MacModel, UserLink};
    use approx::assert_relative_eq;

    fn mc(samples: usize, seed: u64) -> McConfig {
        McConfig {
            seed,
            samples,
            batch: 4096,
        }
    }

    fn link_zero() -> UserLink {
        UserLink::with_power_budget(CMat::identity(1, 1), CMat::zeros(1, 1), 1.0).unwrap()
    }

    fn single_user_bpsk(snr: f64) -> MacModel {
        MacModel::new(
            UserLink::identity(1, 1),
            link_zero(),
            Constellation::bpsk(),
            Constellation::bpsk(),
            snr,
        )
        .unwrap()
    }

    #[test]
    fn all_rates_vanish_at_snr_zero() {
        let m = bpsk_scalar_mac(0.0).unwrap();
        let r = info_report(&m, &mc(5_000, 21), true).unwrap();
        for v in [
            r.joint.nats,
            r.i1_nc.nats,
            r.i2_nc.nats,
            r.i1_cond.nats,
            r.i2_cond.nats,
            r.gaussian_approx_i2_nc.unwrap().nats,
        ] {
            assert!(v.abs() < 1e-12, "rate {v} at snr 0");
        }
    }

    #[test]
    fn joint_rate_saturates_at_one_and_half_bits() {
        let m = bpsk_scalar_mac(100.0).unwrap();
        let r = joint_info(&m, &mc(60_000, 22)).unwrap();
        assert!((r.bits - 1.5).abs() < 0.02, "joint = {} bits", r.bits);
    }

    #[test]
    fn single_user_rate_saturates_at_one_bit() {
        let m = single_user_bpsk(100.0);
        let r = joint_info(&m, &mc(60_000, 23)).unwrap();
        assert!((r.nats - std::f64::consts::LN_2).abs() < 0.01);
    }

    #[test]
    fn nc_rate_saturates_at_half_bit() {
        let m = bpsk_scalar_mac(100.0).unwrap();
        let r = info_report(&m, &mc(60_000, 24), false).unwrap();
        assert!(
            (r.i1_nc.bits - 0.5).abs() < 0.02,
            "i1_nc = {} bits",
            r.i1_nc.bits
        );
        // decode-first plus decode-second recovers the sum rate
        assert!(
            (r.i1_nc.bits + r.i2_cond.bits - 1.5).abs() < 0.02,
            "sum = {}",
            r.i1_nc.bits + r.i2_cond.bits
        );
    }

    #[test]
    fn no_second_user_makes_nc_equal_joint() {
        let m = single_user_bpsk(2.0);
        let r = info_report(&m, &mc(20_000, 25), false).unwrap();
        // p(y|x1) == p(y|x1,x2) pointwise when A2 = 0
        assert_relative_eq!(r.i1_nc.nats, r.joint.nats, epsilon = 1e-12);
    }

    #[test]
    fn chain_rules_hold_to_rounding() {
        // per-sample telescoping makes both decompositions exact up to
        // floating-point ordering when routes share the stream
        let m = bpsk_scalar_mac(2.0).unwrap();
        let r = info_report(&m, &mc(30_000, 26), false).unwrap();
        let (r1, r2) = r.chain_residuals();
        assert!(r1.abs() < 1e-9, "chain residual 1 = {r1}");
        assert!(r2.abs() < 1e-9, "chain residual 2 = {r2}");
    }

    #[test]
    fn cancellation_and_ratio_routes_agree() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        let cfg = mc(20_000, 27);
        let a = cond_info_user2(&m, &cfg).unwrap();
        let b = cond_info_density_ratio(&m, &cfg, User::U2).unwrap();
        assert_relative_eq!(a.nats, b.nats, epsilon = 1e-9);
    }

    #[test]
    fn conditioning_on_interferer_cannot_reduce_rate() {
        let m = bpsk_scalar_mac(1.5).unwrap();
        let r = info_report(&m, &mc(40_000, 28), false).unwrap();
        let combined = (r.i1_nc.stderr.powi(2) + r.i1_cond.stderr.powi(2)).sqrt();
        assert!(r.i1_nc.nats <= r.i1_cond.nats + 3.0 * combined);
    }

    #[test]
    fn bits_are_nats_over_ln2_exactly() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        let r = joint_info(&m, &mc(2_000, 29)).unwrap();
        assert_eq!(r.bits, r.nats * crate::NATS_TO_BITS);
    }

    #[test]
    fn nc_rate_matches_quadrature_reference() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        let cfg = mc(100_000, 30);
        let r = nc_info_user1(&m, &cfg).unwrap();
        let oracle = crate::oracle::scalar_reference(&m, 80).unwrap();
        assert!(
            (r.nats - oracle.i1_nc).abs() < 4.0 * r.stderr,
            "{} vs {}",
            r.nats,
            oracle.i1_nc
        );
    }

    #[test]
    fn cond_rate_matches_closed_form_curve() {
        let cfg = mc(150_000, 31);
        for snr in [0.25, 1.0, 4.0] {
            let m = bpsk_scalar_mac(snr).unwrap();
            let r = cond_info_user2(&m, &cfg).unwrap();
            let cf = crate::closed_form::info2_cond(snr).unwrap();
            let tol = (3.0 * r.stderr).max(1e-3);
            assert!((r.nats - cf).abs() < tol, "snr {snr}: {} vs {cf}", r.nats);
        }
    }

    #[test]
    fn surrogate_equals_exact_when_interferer_silent() {
        let m = single_user_bpsk(1.5);
        let cfg = mc(20_000, 32);
        let s = nc_info_gaussian_interference(&m, User::U1, &cfg).unwrap();
        let e = joint_info(&m, &cfg).unwrap();
        // Sigma = I makes the surrogate channel the true channel, and the
        // estimators then see identical samples
        assert_relative_eq!(s.nats, e.nats, epsilon = 1e-12);
    }

    #[test]
    fn surrogate_matches_quadrature_of_surrogate_densities() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        let cfg = mc(100_000, 33);
        let s = nc_info_gaussian_interference(&m, User::U1, &cfg).unwrap();
        let oracle = crate::oracle::scalar_surrogate_info(&m, User::U1, 80).unwrap();
        assert!(
            (s.nats - oracle).abs() < 4.0 * s.stderr,
            "{} vs {oracle}",
            s.nats
        );
    }

    #[test]
    fn report_entries_respect_entropy_bounds() {
        let cfg = mc(30_000, 35);
        for snr in [0.2, 2.0, 50.0] {
            let m = bpsk_scalar_mac(snr).unwrap();
            let r = info_report(&m, &cfg, false).unwrap();
            let cap_joint = (m.c1.len() as f64 * m.c2.len() as f64).ln();
            let cap_user = (m.c1.len() as f64).ln();
            for (e, cap) in [
                (&r.joint, cap_joint),
                (&r.i1_nc, cap_user),
                (&r.i2_nc, cap_user),
                (&r.i1_cond, cap_user),
                (&r.i2_cond, cap_user),
            ] {
                assert!(
                    e.nats >= -3.0 * e.stderr - 1e-12,
                    "negative rate {}",
                    e.nats
                );
                // 1e-12 absolute slack: at saturation the per-sample values
                // all equal the cap and the stderr collapses to rounding dust
                assert!(
                    e.nats <= cap + 3.0 * e.stderr + 1e-12,
                    "rate {} above cap {cap}",
                    e.nats
                );
            }
        }
    }

    #[test]
    fn surrogate_zero_at_snr_zero() {
        let m = bpsk_scalar_mac(0.0).unwrap();
        let s = nc_info_gaussian_interference(&m, User::U2, &mc(5_000, 34)).unwrap();
        assert!(s.nats.abs() < 1e-12);
    }
}
