//! Exact conditional densities and posterior-mean input estimates.
//!
//! The conditional output density is
//! `p(y|x1,x2) = pi^{-n_r} exp(-|y - sqrt(snr) H1P1x1 - sqrt(snr) H2P2x2|^2)`,
//! the output density is the prior-weighted sum over the joint alphabet, and
//! the per-user input estimates are the posterior means
//! `x̂_i = E[x_i | y]` computed from the full joint sum.
//!
//! All sums run in the log domain with log-sum-exp; exponents grow like
//! `snr * |HPx|^2` and overflow linear-domain arithmetic already for
//! moderately large SNR.
//!
//! Everything here is a pure function of `(model, y)` and safe to evaluate
//! concurrently.

use crate::model::MacModel;
use crate::{CVec, Error, Result, C64};

pub(crate) const LN_PI: f64 = 1.144729885849400174143427351353058711647_f64;

/// Posterior means of both users and the output density at `y`.
#[derive(Debug, Clone)]
pub struct PosteriorPair {
    pub xhat1: CVec,
    pub xhat2: CVec,
    /// Output density value `p_y(y)` (linear domain).
    pub py: f64,
}

/// Numerically stable `log(sum exp(x_k))`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Precomputed per-(model, snr) tables for repeated posterior evaluation.
///
/// Stores the scaled noiseless points `sqrt(snr) (A1 x1_i + A2 x2_j)` for the
/// whole joint alphabet, flattened row-major with stride `n_r`.
#[derive(Debug, Clone)]
pub(crate) struct JointTable {
    pub n_r: usize,
    pub m1: usize,
    pub m2: usize,
    /// `sqrt(snr) * A_i x_k`, per user (used for mmse traces).
    pub s1: Vec<CVec>,
    pub s2: Vec<CVec>,
    /// Unscaled `A_i x_k` images.
    pub u1: Vec<CVec>,
    pub u2: Vec<CVec>,
    /// Flattened scaled joint means.
    means: Vec<C64>,
    /// Joint log prior, same layout.
    logp_joint: Vec<f64>,
    pub logp1: Vec<f64>,
    pub logp2: Vec<f64>,
}

impl JointTable {
    pub fn new(model: &MacModel) -> Self {
        let sqrt_s = C64::from(model.snr().sqrt());
        let a1 = model.link1.effective();
        let a2 = model.link2.effective();
        let u1: Vec<CVec> = model.c1.points().iter().map(|x| &a1 * x).collect();
        let u2: Vec<CVec> = model.c2.points().iter().map(|x| &a2 * x).collect();
        let s1: Vec<CVec> = u1.iter().map(|v| v * sqrt_s).collect();
        let s2: Vec<CVec> = u2.iter().map(|v| v * sqrt_s).collect();
        let (m1, m2, n_r) = (s1.len(), s2.len(), model.n_r());
        let mut means = Vec::with_capacity(m1 * m2 * n_r);
        let mut logp_joint = Vec::with_capacity(m1 * m2);
        for (i, si) in s1.iter().enumerate() {
            for (j, sj) in s2.iter().enumerate() {
                for r in 0..n_r {
                    means.push(si[r] + sj[r]);
                }
                logp_joint.push(model.c1.log_prior(i) + model.c2.log_prior(j));
            }
        }
        Self {
            n_r,
            m1,
            m2,
            s1,
            s2,
            u1,
            u2,
            means,
            logp_joint,
            logp1: (0..m1).map(|i| model.c1.log_prior(i)).collect(),
            logp2: (0..m2).map(|j| model.c2.log_prior(j)).collect(),
        }
    }

    /// `-|y - mean_k|^2` for every joint point, written into `out`.
    pub fn log_conditionals(&self, y: &CVec, out: &mut Vec<f64>) {
        out.clear();
        let k_total = self.m1 * self.m2;
        for k in 0..k_total {
            let base = k * self.n_r;
            let mut d2 = 0.0;
            for r in 0..self.n_r {
                d2 += (y[r] - self.means[base + r]).norm_sqr();
            }
            out.push(-d2);
        }
    }

    /// Full posterior evaluation at `y`. Returns the joint-weight vector in
    /// `scratch.w` (normalized, layout `i * m2 + j`) plus marginal weights.
    pub fn eval(&self, y: &CVec, scratch: &mut EvalScratch) -> PointEval {
        self.log_conditionals(y, &mut scratch.logcond);
        scratch.logw.clear();
        for (lc, lp) in scratch.logcond.iter().zip(&self.logp_joint) {
            scratch.logw.push(lc + lp);
        }
        let lse = logsumexp(&scratch.logw);
        scratch.w.clear();
        scratch
            .w
            .extend(scratch.logw.iter().map(|lw| (lw - lse).exp()));

        scratch.w1.clear();
        scratch.w1.resize(self.m1, 0.0);
        scratch.w2.clear();
        scratch.w2.resize(self.m2, 0.0);
        for i in 0..self.m1 {
            for j in 0..self.m2 {
                let w = scratch.w[i * self.m2 + j];
                scratch.w1[i] += w;
                scratch.w2[j] += w;
            }
        }
        PointEval {
            log_py: lse - self.n_r as f64 * LN_PI,
        }
    }
}

/// Reusable buffers for [`JointTable::eval`].
#[derive(Debug, Default, Clone)]
pub(crate) struct EvalScratch {
    pub logcond: Vec<f64>,
    pub logw: Vec<f64>,
    pub w: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PointEval {
    pub log_py: f64,
}

fn check_finite(y: &CVec) -> Result<()> {
    if y.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("y has non-finite components".into()));
    }
    Ok(())
}

/// `p(y | x1, x2)` by joint alphabet index.
pub fn likelihood(model: &MacModel, y: &CVec, x1: usize, x2: usize) -> Result<f64> {
    log_likelihood(model, y, x1, x2).map(f64::exp)
}

/// `log p(y | x1, x2)`; stable for any SNR.
pub fn log_likelihood(model: &MacModel, y: &CVec, x1: usize, x2: usize) -> Result<f64> {
    check_finite(y)?;
    if x1 >= model.c1.len() || x2 >= model.c2.len() {
        return Err(Error::Dimension(format!(
            "joint index ({x1},{x2}) out of range ({}x{})",
            model.c1.len(),
            model.c2.len()
        )));
    }
    let sqrt_s = C64::from(model.snr().sqrt());
    let mean = (model.link1.effective() * model.c1.point(x1)
        + model.link2.effective() * model.c2.point(x2))
        * sqrt_s;
    Ok(-(y - mean).norm_squared() - model.n_r() as f64 * LN_PI)
}

/// Output density `p_y(y)`: prior-weighted sum of likelihoods.
pub fn output_density(model: &MacModel, y: &CVec) -> Result<f64> {
    log_output_density(model, y).map(f64::exp)
}

/// `log p_y(y)` via log-sum-exp over the joint alphabet.
pub fn log_output_density(model: &MacModel, y: &CVec) -> Result<f64> {
    check_finite(y)?;
    let table = JointTable::new(model);
    let mut scratch = EvalScratch::default();
    Ok(table.eval(y, &mut scratch).log_py)
}

/// Posterior means of both users at `y` (exact joint sum, log domain).
pub fn posterior_means(model: &MacModel, y: &CVec) -> Result<PosteriorPair> {
    check_finite(y)?;
    let table = JointTable::new(model);
    let mut scratch = EvalScratch::default();
    let pe = table.eval(y, &mut scratch);
    let mut xhat1 = CVec::zeros(model.c1.dim());
    for (i, &w) in scratch.w1.iter().enumerate() {
        xhat1 += model.c1.point(i) * C64::from(w);
    }
    let mut xhat2 = CVec::zeros(model.c2.dim());
    for (j, &w) in scratch.w2.iter().enumerate() {
        xhat2 += model.c2.point(j) * C64::from(w);
    }
    Ok(PosteriorPair {
        xhat1,
        xhat2,
        py: pe.log_py.exp(),
    })
}

/// Posterior mean of user 2 after exact cancellation of a known `x1`:
/// `E[x2 | y - sqrt(snr) H1P1 x1]` in the single-user channel of user 2.
pub fn posterior_mean_sic_user2(model: &MacModel, y: &CVec, x1: usize) -> Result<CVec> {
    check_finite(y)?;
    if x1 >= model.c1.len() {
        return Err(Error::Dimension(format!("x1 index {x1} out of range")));
    }
    let sqrt_s = C64::from(model.snr().sqrt());
    let residual = y - model.link1.effective() * model.c1.point(x1) * sqrt_s;
    let logw: Vec<f64> = (0..model.c2.len())
        .map(|j| {
            let mean = model.link2.effective() * model.c2.point(j) * sqrt_s;
            -(&residual - mean).norm_squared() + model.c2.log_prior(j)
        })
        .collect();
    let lse = logsumexp(&logw);
    let mut xhat = CVec::zeros(model.c2.dim());
    for (j, lw) in logw.iter().enumerate() {
        xhat += model.c2.point(j) * C64::from((lw - lse).exp());
    }
    Ok(xhat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bpsk_scalar_mac, Constellation, MacModel, UserLink};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn y1(re: f64, im: f64) -> CVec {
        CVec::from_element(1, C64::new(re, im))
    }

    /// Brute-force reference: direct 4-term sums in the linear domain,
    /// independent of the log-sum-exp implementation path.
    fn brute_force_bpsk(snr: f64, y: f64) -> (f64, f64, f64) {
        let pts = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
        let mut py = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (x1, x2) in pts {
            let mean = snr.sqrt() * (x1 + x2);
            let lik = (-(y - mean) * (y - mean)).exp() / std::f64::consts::PI;
            py += 0.25 * lik;
            m1 += 0.25 * lik * x1;
            m2 += 0.25 * lik * x2;
        }
        (py, m1 / py, m2 / py)
    }

    #[test]
    fn likelihood_at_noiseless_point_is_pi_powers() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        // y exactly at the (+1,+1) noiseless point 2*sqrt(1)
        let lik = likelihood(&m, &y1(2.0, 0.0), 0, 0).unwrap();
        assert_relative_eq!(lik, 1.0 / std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn likelihood_scalar_snr0_origin() {
        let m = bpsk_scalar_mac(0.0).unwrap();
        let lik = likelihood(&m, &y1(0.0, 0.0), 1, 0).unwrap();
        assert_relative_eq!(lik, 1.0 / std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn likelihood_rejects_non_finite_y() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        assert!(likelihood(&m, &y1(f64::NAN, 0.0), 0, 0).is_err());
        assert!(likelihood(&m, &y1(f64::INFINITY, 0.0), 0, 0).is_err());
    }

    #[test]
    fn output_density_snr0_is_pure_noise_density() {
        let m = bpsk_scalar_mac(0.0).unwrap();
        for re in [-2.0, 0.0, 0.7, 3.1] {
            let y = y1(re, 0.4);
            let expect = (-(y.norm_squared())).exp() / std::f64::consts::PI;
            assert_relative_eq!(output_density(&m, &y).unwrap(), expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn output_density_matches_brute_force_four_term_sum() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        for yv in [0.0, 0.5, 1.0, -2.3] {
            let (py, _, _) = brute_force_bpsk(1.0, yv);
            assert_relative_eq!(
                output_density(&m, &y1(yv, 0.0)).unwrap(),
                py,
                max_relative = 1e-12
            );
        }
        // frozen value at y = 0 from the same four-term sum, done by hand
        assert_relative_eq!(
            output_density(&m, &y1(0.0, 0.0)).unwrap(),
            0.162069967557,
            epsilon = 1e-10
        );
    }

    #[test]
    fn posterior_means_symmetric_at_origin() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        let pp = posterior_means(&m, &y1(0.0, 0.0)).unwrap();
        assert!(pp.xhat1[0].norm() < 1e-15);
        assert!(pp.xhat2[0].norm() < 1e-15);
        assert!(pp.py > 0.0);
    }

    #[test]
    fn posterior_means_saturate_for_large_y() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        let pp = posterior_means(&m, &y1(40.0, 0.0)).unwrap();
        assert_relative_eq!(pp.xhat1[0].re, 1.0, epsilon = 1e-9);
        assert_relative_eq!(pp.xhat2[0].re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn posterior_means_match_brute_force() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        let (_, m1, m2) = brute_force_bpsk(1.0, 1.0);
        let pp = posterior_means(&m, &y1(1.0, 0.0)).unwrap();
        assert_relative_eq!(pp.xhat1[0].re, m1, epsilon = 1e-12);
        assert_relative_eq!(pp.xhat2[0].re, m2, epsilon = 1e-12);
        // frozen from the brute-force oracle
        assert_relative_eq!(pp.xhat1[0].re, 0.333184255502, epsilon = 1e-10);
    }

    #[test]
    fn sic_mean_is_zero_at_zero_residual() {
        let m = bpsk_scalar_mac(4.0).unwrap();
        // y = sqrt(snr) * x1 makes the residual exactly zero
        let y = y1(2.0, 0.0);
        let xh = posterior_mean_sic_user2(&m, &y, 0).unwrap();
        assert!(xh[0].norm() < 1e-15);
    }

    #[test]
    fn sic_mean_is_single_user_tanh() {
        // residual r: E[x2 | r] = tanh(2 sqrt(snr) Re r) under CN(0,1) noise
        let m = bpsk_scalar_mac(4.0).unwrap();
        let y = y1(2.0 + 2.0, 0.0); // residual 2 after cancelling x1 = +1
        let xh = posterior_mean_sic_user2(&m, &y, 0).unwrap();
        assert_relative_eq!(xh[0].re, (2.0f64 * 2.0 * 2.0).tanh(), epsilon = 1e-12);
    }

    #[test]
    fn sic_matches_posterior_means_on_degenerate_user1() {
        // user 1 sends the single point {0}: cancellation is a no-op and the
        // joint posterior reduces to the single-user posterior of user 2
        let m = MacModel::new(
            UserLink::identity(1, 1),
            UserLink::identity(1, 1),
            Constellation::single_zero(1),
            Constellation::bpsk(),
            2.0,
        )
        .unwrap();
        for yv in [-1.5, 0.3, 2.0] {
            let y = y1(yv, 0.2);
            let a = posterior_mean_sic_user2(&m, &y, 0).unwrap();
            let b = posterior_means(&m, &y).unwrap().xhat2;
            assert_relative_eq!(a[0].re, b[0].re, epsilon = 1e-13);
            assert_relative_eq!(a[0].im, b[0].im, epsilon = 1e-13);
        }
    }

    #[test]
    fn log_and_linear_densities_agree_where_representable() {
        let m = bpsk_scalar_mac(2.0).unwrap();
        for yv in [-3.0, -0.5, 0.0, 1.2, 4.0] {
            let y = y1(yv, -0.3);
            let lin = output_density(&m, &y).unwrap();
            let log = log_output_density(&m, &y).unwrap();
            assert_relative_eq!(lin.ln(), log, max_relative = 1e-10);
        }
    }

    #[test]
    fn high_snr_densities_stay_finite_in_log_domain() {
        let m = bpsk_scalar_mac(1e6).unwrap();
        let y = y1(3.0, 0.0);
        let log = log_output_density(&m, &y).unwrap();
        assert!(log.is_finite());
    }

    #[test]
    fn output_density_self_normalizes() {
        // draw y from the model; E[q(y)/p_y(y)] = int q = 1 for any density q
        let m = bpsk_scalar_mac(1.0).unwrap();
        let mc = crate::model::McConfig {
            seed: 12,
            samples: 50_000,
            batch: 4096,
        };
        let mut acc = 0.0;
        for (_, _, y) in crate::model::sample_outputs(&m, &mc).unwrap() {
            let log_q = -y.norm_squared() - std::f64::consts::PI.ln(); // CN(0,1) reference
            acc += (log_q - log_output_density(&m, &y).unwrap()).exp();
        }
        acc /= mc.samples as f64;
        assert!((acc - 1.0).abs() < 0.02, "normalization estimate {acc}");
    }

    #[test]
    fn mmse_orthogonality_property() {
        // E[(x1 - x̂1) x̂1^H] ~ 0 over the output distribution
        let m = bpsk_scalar_mac(1.0).unwrap();
        let mc = crate::model::McConfig {
            seed: 9,
            samples: 20_000,
            batch: 4096,
        };
        let mut acc = C64::new(0.0, 0.0);
        for (i, _, y) in crate::model::sample_outputs(&m, &mc).unwrap() {
            let pp = posterior_means(&m, &y).unwrap();
            let err = m.c1.point(i)[0] - pp.xhat1[0];
            acc += err * pp.xhat1[0].conj();
        }
        acc /= C64::from(mc.samples as f64);
        assert!(
            acc.norm() < 5.0 / (mc.samples as f64).sqrt(),
            "corr = {acc}"
        );
    }

    proptest! {
        #[test]
        fn posterior_weights_form_probability_vector(
            yre in -6.0f64..6.0,
            yim in -6.0f64..6.0,
            snr in 0.0f64..50.0,
        ) {
            let m = bpsk_scalar_mac(snr).unwrap();
            let table = JointTable::new(&m);
            let mut scratch = EvalScratch::default();
            table.eval(&y1(yre, yim), &mut scratch);
            let sum: f64 = scratch.w.iter().sum();
            prop_assert!(scratch.w.iter().all(|&w| w >= 0.0));
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn posterior_mean_stays_in_hull(yre in -20.0f64..20.0, snr in 0.0f64..100.0) {
            let m = bpsk_scalar_mac(snr).unwrap();
            let pp = posterior_means(&m, &y1(yre, 0.0)).unwrap();
            prop_assert!(pp.xhat1.norm() <= m.c1.max_norm() + 1e-12);
            prop_assert!(pp.py > 0.0);
        }
    }
}
