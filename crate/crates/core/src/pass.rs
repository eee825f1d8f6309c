//! Shared Monte Carlo estimator pass.
//!
//! One pass over the sample stream evaluates the exact joint posterior per
//! draw and accumulates every estimand at once: MMSE matrices and traces,
//! the posterior-mean cross-correlation, and all five mutual-information
//! quantities. The mmse and information modules project fields out of the
//! same pass, which also guarantees they share a sample stream.

use crate::mc::{self, RunningSum};
use crate::model::{MacModel, McConfig};
use crate::posterior::{logsumexp, EvalScratch, JointTable};
use crate::{CMat, CVec, C64};

/// Accumulated sums from one estimator pass.
#[derive(Debug, Clone)]
pub(crate) struct JointPass {
    pub n: u64,
    /// Sums of sampled error outer products, per user.
    pub e1_sum: CMat,
    pub e2_sum: CMat,
    /// Sum of posterior-mean outer products `x̂1 x̂2^H`.
    pub c12_sum: CMat,
    /// Effective-channel weighted per-sample error norms.
    pub mmse1: RunningSum,
    pub mmse2: RunningSum,
    pub total: RunningSum,
    /// Per-sample trace `<A2 x̂2, A1 x̂1>` (the covariance scalar).
    pub t12_re: RunningSum,
    pub t12_im: RunningSum,
    /// Mutual-information contributions (nats).
    pub joint: RunningSum,
    pub i1_nc: RunningSum,
    pub i2_nc: RunningSum,
    /// Ratio-of-densities route.
    pub i1_cond: RunningSum,
    pub i2_cond: RunningSum,
    /// Exact-cancellation route (default for conditional rates).
    pub i1_cond_cancel: RunningSum,
    pub i2_cond_cancel: RunningSum,
}

impl JointPass {
    fn zero(n_t1: usize, n_t2: usize) -> Self {
        Self {
            n: 0,
            e1_sum: CMat::zeros(n_t1, n_t1),
            e2_sum: CMat::zeros(n_t2, n_t2),
            c12_sum: CMat::zeros(n_t1, n_t2),
            mmse1: RunningSum::default(),
            mmse2: RunningSum::default(),
            total: RunningSum::default(),
            t12_re: RunningSum::default(),
            t12_im: RunningSum::default(),
            joint: RunningSum::default(),
            i1_nc: RunningSum::default(),
            i2_nc: RunningSum::default(),
            i1_cond: RunningSum::default(),
            i2_cond: RunningSum::default(),
            i1_cond_cancel: RunningSum::default(),
            i2_cond_cancel: RunningSum::default(),
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.n += o.n;
        self.e1_sum += o.e1_sum;
        self.e2_sum += o.e2_sum;
        self.c12_sum += o.c12_sum;
        self.mmse1.merge(&o.mmse1);
        self.mmse2.merge(&o.mmse2);
        self.total.merge(&o.total);
        self.t12_re.merge(&o.t12_re);
        self.t12_im.merge(&o.t12_im);
        self.joint.merge(&o.joint);
        self.i1_nc.merge(&o.i1_nc);
        self.i2_nc.merge(&o.i2_nc);
        self.i1_cond.merge(&o.i1_cond);
        self.i2_cond.merge(&o.i2_cond);
        self.i1_cond_cancel.merge(&o.i1_cond_cancel);
        self.i2_cond_cancel.merge(&o.i2_cond_cancel);
        self
    }

    /// Hermitian-symmetrized mean of the user-1 error outer products.
    pub fn e1(&self) -> CMat {
        symmetrized_mean(&self.e1_sum, self.n)
    }

    pub fn e2(&self) -> CMat {
        symmetrized_mean(&self.e2_sum, self.n)
    }

    pub fn c12(&self) -> CMat {
        &self.c12_sum / C64::from(self.n as f64)
    }

    /// The two covariance traces and the difference-form combination.
    pub fn psi(&self) -> (C64, C64, C64) {
        let t12 = C64::new(self.t12_re.mean(), self.t12_im.mean());
        let t21 = t12.conj();
        (t12, t21, t12 - t21)
    }

    /// Symmetric interference correction `-2 Re Tr{A1 C12 A2^H}`; the
    /// quantity that actually closes the snr-derivative identity.
    pub fn cross_correction(&self) -> f64 {
        -2.0 * self.t12_re.mean()
    }
}

fn symmetrized_mean(sum: &CMat, n: u64) -> CMat {
    let m = sum / C64::from(n as f64);
    (&m + m.adjoint()) * C64::from(0.5)
}

/// Runs the full estimator pass at the model's own SNR.
pub(crate) fn run_joint_pass(model: &MacModel, mc: &McConfig) -> JointPass {
    let table = JointTable::new(model);
    let x1: Vec<CVec> = model.c1.points().to_vec();
    let x2: Vec<CVec> = model.c2.points().to_vec();
    let (m1, m2) = (table.m1, table.m2);
    let n_t1 = model.c1.dim();
    let n_t2 = model.c2.dim();

    mc::accumulate(
        model,
        mc,
        || (JointPass::zero(n_t1, n_t2), EvalScratch::default()),
        |(acc, scratch), draw| {
            let y = &table.s1[draw.x1] + &table.s2[draw.x2] + &draw.noise;
            table.eval(&y, scratch);
            let lse_all = logsumexp(&scratch.logw);
            let ll = scratch.logcond[draw.x1 * m2 + draw.x2];
            let row = logsumexp(
                &scratch.logcond[draw.x1 * m2..(draw.x1 + 1) * m2]
                    .iter()
                    .zip(&table.logp2)
                    .map(|(lc, lp)| lc + lp)
                    .collect::<Vec<_>>(),
            );
            let col = logsumexp(
                &(0..m1)
                    .map(|r| scratch.logcond[r * m2 + draw.x2] + table.logp1[r])
                    .collect::<Vec<_>>(),
            );
            acc.joint.push(ll - lse_all);
            acc.i1_nc.push(row - lse_all);
            acc.i2_nc.push(col - lse_all);
            acc.i2_cond.push(ll - row);
            acc.i1_cond.push(ll - col);

            // exact-cancellation route: user 2 sees y - sqrt(s) A1 x1 in its
            // single-user channel (and symmetrically for user 1)
            let resid2 = &y - &table.s1[draw.x1];
            let lw2: Vec<f64> = (0..m2)
                .map(|j| -(&resid2 - &table.s2[j]).norm_squared() + table.logp2[j])
                .collect();
            acc.i2_cond_cancel
                .push(-(&resid2 - &table.s2[draw.x2]).norm_squared() - logsumexp(&lw2));
            let resid1 = &y - &table.s2[draw.x2];
            let lw1: Vec<f64> = (0..m1)
                .map(|i| -(&resid1 - &table.s1[i]).norm_squared() + table.logp1[i])
                .collect();
            acc.i1_cond_cancel
                .push(-(&resid1 - &table.s1[draw.x1]).norm_squared() - logsumexp(&lw1));

            // posterior means and error statistics
            let mut xh1 = CVec::zeros(n_t1);
            let mut u1h = CVec::zeros(table.u1[0].len());
            for (i, &w) in scratch.w1.iter().enumerate() {
                let wc = C64::from(w);
                xh1 += &x1[i] * wc;
                u1h += &table.u1[i] * wc;
            }
            let mut xh2 = CVec::zeros(n_t2);
            let mut u2h = CVec::zeros(table.u2[0].len());
            for (j, &w) in scratch.w2.iter().enumerate() {
                let wc = C64::from(w);
                xh2 += &x2[j] * wc;
                u2h += &table.u2[j] * wc;
            }
            let err1 = &x1[draw.x1] - &xh1;
            let err2 = &x2[draw.x2] - &xh2;
            acc.e1_sum += &err1 * err1.adjoint();
            acc.e2_sum += &err2 * err2.adjoint();
            acc.c12_sum += &xh1 * xh2.adjoint();
            let q1 = (&table.u1[draw.x1] - &u1h).norm_squared();
            let q2 = (&table.u2[draw.x2] - &u2h).norm_squared();
            acc.mmse1.push(q1);
            acc.mmse2.push(q2);
            acc.total.push(q1 + q2);
            let t = u2h.dotc(&u1h); // Tr{A1 x̂1 x̂2^H A2^H}
            acc.t12_re.push(t.re);
            acc.t12_im.push(t.im);
            acc.n += 1;
        },
        |(a, sa), (b, _)| (a.merge(b), sa),
    )
    .0
}

/// Per-draw contribution evaluator under an arbitrary (possibly perturbed)
/// model, for common-random-number finite differences. A draw's `(x1, x2,
/// noise)` is reused across perturbed tables.
pub(crate) struct ContribTables {
    table: JointTable,
}

/// Which per-draw functional a finite difference tracks.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Functional {
    Joint,
    NcUser1,
    CondUser2,
}

impl ContribTables {
    pub fn new(model: &MacModel) -> Self {
        Self {
            table: JointTable::new(model),
        }
    }

    fn prepare(&self, draw: &crate::mc::Draw, scratch: &mut EvalScratch) {
        let y = &self.table.s1[draw.x1] + &self.table.s2[draw.x2] + &draw.noise;
        self.table.log_conditionals(&y, &mut scratch.logcond);
    }

    pub fn eval(&self, f: Functional, draw: &crate::mc::Draw, scratch: &mut EvalScratch) -> f64 {
        self.prepare(draw, scratch);
        let t = &self.table;
        let ll = scratch.logcond[draw.x1 * t.m2 + draw.x2];
        match f {
            Functional::Joint => {
                scratch.logw.clear();
                for (k, lc) in scratch.logcond.iter().enumerate() {
                    let (i, j) = (k / t.m2, k % t.m2);
                    scratch.logw.push(lc + t.logp1[i] + t.logp2[j]);
                }
                ll - logsumexp(&scratch.logw)
            }
            Functional::NcUser1 => {
                scratch.logw.clear();
                for (k, lc) in scratch.logcond.iter().enumerate() {
                    let (i, j) = (k / t.m2, k % t.m2);
                    scratch.logw.push(lc + t.logp1[i] + t.logp2[j]);
                }
                let lse_all = logsumexp(&scratch.logw);
                let row = logsumexp(
                    &scratch.logcond[draw.x1 * t.m2..(draw.x1 + 1) * t.m2]
                        .iter()
                        .zip(&t.logp2)
                        .map(|(lc, lp)| lc + lp)
                        .collect::<Vec<_>>(),
                );
                row - lse_all
            }
            Functional::CondUser2 => {
                let row = logsumexp(
                    &scratch.logcond[draw.x1 * t.m2..(draw.x1 + 1) * t.m2]
                        .iter()
                        .zip(&t.logp2)
                        .map(|(lc, lp)| lc + lp)
                        .collect::<Vec<_>>(),
                );
                ll - row
            }
        }
    }
}
