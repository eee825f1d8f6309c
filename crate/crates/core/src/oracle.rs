//! Deterministic quadrature references for scalar (n_r = n_t = 1) models.
//!
//! The Monte Carlo estimators in [`crate::mmse`] and [`crate::information`]
//! are cross-checked against these: the output distribution of a scalar model
//! is a small Gaussian mixture, so every expectation over `y` is an exact
//! finite sum of Gaussian expectations, evaluated here by per-component
//! Gauss-Hermite rules. Real-valued models integrate over the informative
//! real component only; complex models tensor the rule over both components.
//!
//! Precision is set by the rule order; 80 nodes resolves the smooth
//! tanh / log-cosh style integrands to ~1e-12.

use crate::model::MacModel;
use crate::posterior::{EvalScratch, JointTable};
use crate::quadrature::GaussHermite;
use crate::{CVec, Error, Result, C64};

/// Exact (quadrature) values of the Monte Carlo estimands for a scalar model.
#[derive(Debug, Clone, Copy)]
pub struct ScalarReference {
    pub joint_info: f64,
    pub i1_nc: f64,
    pub i2_nc: f64,
    pub i1_cond: f64,
    pub i2_cond: f64,
    /// Scalar per-user error variances `E_i = E[|x_i - x̂_i|^2]`.
    pub e1: f64,
    pub e2: f64,
    /// `E_y[x̂1 x̂2^*]`.
    pub cross: C64,
    /// Effective-channel-weighted mmse terms and their sum.
    pub mmse1: f64,
    pub mmse2: f64,
    pub total: f64,
    /// The two-trace covariance combination (difference form).
    pub psi: C64,
    /// The symmetric interference correction `-2 Re{a1 cross conj(a2)}`
    /// (reported for identity diagnostics).
    pub cross_correction: f64,
}

fn require_scalar(model: &MacModel) -> Result<()> {
    if model.n_r() != 1 || model.c1.dim() != 1 || model.c2.dim() != 1 {
        return Err(Error::Dimension(
            "quadrature reference requires a scalar model (n_r = n_t = 1)".into(),
        ));
    }
    Ok(())
}

fn model_is_real(model: &MacModel) -> bool {
    let links_real = [
        model.link1.h(),
        model.link1.p(),
        model.link2.h(),
        model.link2.p(),
    ]
    .iter()
    .all(|m| m.iter().all(|c| c.im == 0.0));
    let points_real = model
        .c1
        .points()
        .iter()
        .chain(model.c2.points())
        .all(|v| v.iter().all(|c| c.im == 0.0));
    links_real && points_real
}

/// Integrates the joint-posterior estimands of a scalar model exactly.
pub fn scalar_reference(model: &MacModel, order: usize) -> Result<ScalarReference> {
    require_scalar(model)?;
    let table = JointTable::new(model);
    let gh = GaussHermite::new(order)?;
    let real = model_is_real(model);
    let sqrt_pi = std::f64::consts::PI.sqrt();

    let m1 = model.c1.len();
    let m2 = model.c2.len();
    let x1: Vec<C64> = model.c1.points().iter().map(|v| v[0]).collect();
    let x2: Vec<C64> = model.c2.points().iter().map(|v| v[0]).collect();
    let sqrt_s = C64::from(model.snr().sqrt());
    let a1 = model.link1.effective()[(0, 0)];
    let a2 = model.link2.effective()[(0, 0)];

    let mut scratch = EvalScratch::default();
    let mut acc = [0.0f64; 7]; // joint, i1nc, i2nc, i1cond, i2cond, e1, e2
    let mut cross = C64::new(0.0, 0.0);

    // noise per complex component: re/im each N(0, 1/2); GH substitution
    // y = mean + t (real) or mean + t_r + i t_i, weights / sqrt(pi) each dim
    let mut visit = |i: usize, j: usize, w_noise: f64, y: &CVec| {
        let pk = model.c1.prior(i) * model.c2.prior(j);
        let w = pk * w_noise;
        table.eval(y, &mut scratch);
        // the -n_r ln(pi) density constant cancels in every ratio below
        let lse_all = crate::posterior::logsumexp(&scratch.logw);
        let ll = scratch.logcond[i * m2 + j];
        let row = crate::posterior::logsumexp(
            &scratch.logcond[i * m2..(i + 1) * m2]
                .iter()
                .zip(&table.logp2)
                .map(|(lc, lp)| lc + lp)
                .collect::<Vec<_>>(),
        );
        let col = crate::posterior::logsumexp(
            &(0..m1)
                .map(|r| scratch.logcond[r * m2 + j] + table.logp1[r])
                .collect::<Vec<_>>(),
        );
        acc[0] += w * (ll - lse_all);
        acc[1] += w * (row - lse_all);
        acc[2] += w * (col - lse_all);
        acc[3] += w * (ll - col);
        acc[4] += w * (ll - row);
        let mut xh1 = C64::new(0.0, 0.0);
        for (r, &wr) in scratch.w1.iter().enumerate() {
            xh1 += x1[r] * C64::from(wr);
        }
        let mut xh2 = C64::new(0.0, 0.0);
        for (c, &wc) in scratch.w2.iter().enumerate() {
            xh2 += x2[c] * C64::from(wc);
        }
        // conditional error variances (equal in expectation to the sampled
        // outer products the Monte Carlo path averages)
        let mut v1 = 0.0;
        for (r, &wr) in scratch.w1.iter().enumerate() {
            v1 += wr * (x1[r] - xh1).norm_sqr();
        }
        let mut v2 = 0.0;
        for (c, &wc) in scratch.w2.iter().enumerate() {
            v2 += wc * (x2[c] - xh2).norm_sqr();
        }
        acc[5] += w * v1;
        acc[6] += w * v2;
        cross += C64::from(w) * xh1 * xh2.conj();
    };

    for (i, &x1i) in x1.iter().enumerate() {
        for (j, &x2j) in x2.iter().enumerate() {
            let mean = sqrt_s * (a1 * x1i + a2 * x2j);
            if real {
                for (&t, &wt) in gh.nodes.iter().zip(&gh.weights) {
                    let y = CVec::from_element(1, mean + C64::from(t));
                    visit(i, j, wt / sqrt_pi, &y);
                }
            } else {
                for (&tr, &wr) in gh.nodes.iter().zip(&gh.weights) {
                    for (&ti, &wi) in gh.nodes.iter().zip(&gh.weights) {
                        let y = CVec::from_element(1, mean + C64::new(tr, ti));
                        visit(i, j, wr * wi / (sqrt_pi * sqrt_pi), &y);
                    }
                }
            }
        }
    }

    let g1 = a1.norm_sqr();
    let g2 = a2.norm_sqr();
    let t12 = a1 * cross * a2.conj();
    Ok(ScalarReference {
        joint_info: acc[0],
        i1_nc: acc[1],
        i2_nc: acc[2],
        i1_cond: acc[3],
        i2_cond: acc[4],
        e1: acc[5],
        e2: acc[6],
        cross,
        mmse1: g1 * acc[5],
        mmse2: g2 * acc[6],
        total: g1 * acc[5] + g2 * acc[6],
        psi: t12 - t12.conj(),
        cross_correction: -2.0 * t12.re,
    })
}

/// Exact rate of the decode-first user under the Gaussian-interference
/// surrogate: the other user's signal is replaced by CN(0, snr |a_int|^2)
/// noise, so total noise variance is `1 + snr |a_int|^2` per complex
/// dimension. `user` selects who is decoded first.
pub fn scalar_surrogate_info(
    model: &MacModel,
    user: crate::gradients::User,
    order: usize,
) -> Result<f64> {
    require_scalar(model)?;
    let gh = GaussHermite::new(order)?;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let s = model.snr();
    let (a_use, a_int, cons) = match user {
        crate::gradients::User::U1 => (
            model.link1.effective()[(0, 0)],
            model.link2.effective()[(0, 0)],
            &model.c1,
        ),
        crate::gradients::User::U2 => (
            model.link2.effective()[(0, 0)],
            model.link1.effective()[(0, 0)],
            &model.c2,
        ),
    };
    let sigma = 1.0 + s * a_int.norm_sqr(); // per-complex-dim variance
    let means: Vec<C64> = cons
        .points()
        .iter()
        .map(|x| C64::from(s.sqrt()) * a_use * x[0])
        .collect();
    let logp: Vec<f64> = (0..cons.len()).map(|k| cons.log_prior(k)).collect();
    let real = model_is_real(model);
    // GH substitution step: sqrt(2 * per-real-dim variance) = sqrt(sigma)
    let scale = sigma.sqrt();

    let mut info = 0.0;
    let mut visit = |k: usize, w_noise: f64, y: C64| {
        let lls: Vec<f64> = means
            .iter()
            .zip(&logp)
            .map(|(m, lp)| -(y - m).norm_sqr() / sigma + lp)
            .collect();
        let lse = crate::posterior::logsumexp(&lls);
        let ll_k = -(y - means[k]).norm_sqr() / sigma;
        info += cons.prior(k) * w_noise * (ll_k - lse);
    };
    for (k, &mean_k) in means.iter().enumerate() {
        if real {
            for (&t, &wt) in gh.nodes.iter().zip(&gh.weights) {
                visit(k, wt / sqrt_pi, mean_k + C64::from(scale * t));
            }
        } else {
            for (&tr, &wr) in gh.nodes.iter().zip(&gh.weights) {
                for (&ti, &wi) in gh.nodes.iter().zip(&gh.weights) {
                    visit(
                        k,
                        wr * wi / (sqrt_pi * sqrt_pi),
                        mean_k + C64::new(scale * tr, scale * ti),
                    );
                }
            }
        }
    }
    Ok(info)
}
