//! Seeded, reproducible Monte Carlo plumbing.
//!
//! A run of `samples` draws is split into batches; batch `b` reads from
//! ChaCha stream `b` of the configured seed, so the multiset of draws does
//! not depend on how batches are scheduled across threads. Per-batch partial
//! results are collected in batch order and merged by pairwise reduction,
//! which fixes the floating-point summation order regardless of thread count.
//!
//! A [`Draw`] carries `(x1 index, x2 index, noise)` and is independent of the
//! SNR; evaluating the same draws under perturbed SNR, channel or precoder
//! gives common random numbers for finite differences.

use crate::model::{MacModel, McConfig};
use crate::{CVec, C64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// One Monte Carlo draw: input indices and the additive noise vector.
#[derive(Debug, Clone)]
pub struct Draw {
    pub x1: usize,
    pub x2: usize,
    pub noise: CVec,
}

/// Scalar mean/variance accumulator with deterministic merge.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningSum {
    pub n: u64,
    pub sum: f64,
    pub sumsq: f64,
}

impl RunningSum {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    pub fn merge(&mut self, o: &Self) {
        self.n += o.n;
        self.sum += o.sum;
        self.sumsq += o.sumsq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.sum / self.n as f64
    }

    /// Standard error of the mean (unbiased sample variance over n).
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Batch layout: `(stream id, draw count)` per batch, covering `samples`.
pub(crate) fn batch_layout(mc: &McConfig) -> Vec<(u64, usize)> {
    let full = mc.samples / mc.batch;
    let rem = mc.samples % mc.batch;
    let mut v: Vec<(u64, usize)> = (0..full as u64).map(|b| (b, mc.batch)).collect();
    if rem > 0 {
        v.push((full as u64, rem));
    }
    v
}

fn batch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one sample. Call order (x1, x2, then noise re/im pairs) is part of
/// the reproducibility contract.
fn draw_one(rng: &mut ChaCha8Rng, model: &MacModel) -> Draw {
    let x1 = categorical(rng, model.c1.priors());
    let x2 = categorical(rng, model.c2.priors());
    let half = std::f64::consts::FRAC_1_SQRT_2; // per-component std of re/im parts
    let noise = CVec::from_fn(model.n_r(), |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * half, im * half)
    });
    Draw { x1, x2, noise }
}

fn categorical(rng: &mut ChaCha8Rng, priors: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in priors.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    priors.len() - 1
}

/// All draws in deterministic (batch, in-batch) order, serially.
pub fn serial_draws(model: &MacModel, mc: McConfig) -> impl Iterator<Item = Draw> + '_ {
    batch_layout(&mc)
        .into_iter()
        .flat_map(move |(stream, count)| {
            let mut rng = batch_rng(mc.seed, stream);
            (0..count)
                .map(move |_| draw_one(&mut rng, model))
                .collect::<Vec<_>>()
        })
}

/// Accumulates over all draws in parallel. `fold` must be deterministic per
/// draw; partial accumulators are merged in a fixed pairwise order, so the
/// result is identical for any thread count (including 1).
pub fn accumulate<A, Init, Fold, Merge>(
    model: &MacModel,
    mc: &McConfig,
    init: Init,
    fold: Fold,
    merge: Merge,
) -> A
where
    A: Send,
    Init: Fn() -> A + Sync,
    Fold: Fn(&mut A, &Draw) + Sync,
    Merge: Fn(A, A) -> A + Sync,
{
    let parts: Vec<A> = batch_layout(mc)
        .into_par_iter()
        .map(|(stream, count)| {
            let mut rng = batch_rng(mc.seed, stream);
            let mut acc = init();
            for _ in 0..count {
                let d = draw_one(&mut rng, model);
                fold(&mut acc, &d);
            }
            acc
        })
        .collect();
    pairwise_merge(parts, &merge)
}

/// Reduces batch results two-at-a-time, preserving batch order at each level.
pub(crate) fn pairwise_merge<A>(mut parts: Vec<A>, merge: &impl Fn(A, A) -> A) -> A {
    assert!(!parts.is_empty(), "no batches to merge");
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.into_iter().next().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bpsk_scalar_mac, sample_outputs};

    fn mc(samples: usize) -> McConfig {
        McConfig {
            seed: 42,
            samples,
            batch: 1000,
        }
    }

    #[test]
    fn identical_seed_identical_stream() {
        let m = bpsk_scalar_mac(4.0).unwrap();
        let a: Vec<_> = sample_outputs(&m, &mc(5000)).unwrap().collect();
        let b: Vec<_> = sample_outputs(&m, &mc(5000)).unwrap().collect();
        assert_eq!(a.len(), 5000);
        for ((i1, j1, y1), (i2, j2, y2)) in a.iter().zip(&b) {
            assert_eq!(i1, i2);
            assert_eq!(j1, j2);
            assert_eq!(y1, y2); // bit identical
        }
    }

    #[test]
    fn draws_are_snr_independent() {
        // common-random-numbers contract: same (x1, x2, n) under different snr
        let m1 = bpsk_scalar_mac(1.0).unwrap();
        let m2 = bpsk_scalar_mac(2.5).unwrap();
        let d1: Vec<_> = serial_draws(&m1, mc(2000)).collect();
        let d2: Vec<_> = serial_draws(&m2, mc(2000)).collect();
        for (a, b) in d1.iter().zip(&d2) {
            assert_eq!(a.x1, b.x1);
            assert_eq!(a.x2, b.x2);
            assert_eq!(a.noise, b.noise);
        }
    }

    #[test]
    fn parallel_accumulate_matches_serial_order() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        let cfg = mc(10_123); // exercises a partial tail batch
        let par = accumulate(
            &m,
            &cfg,
            RunningSum::default,
            |acc, d| acc.push(d.noise[0].re),
            |mut a, b| {
                a.merge(&b);
                a
            },
        );
        // serial reference with the same pairwise reduction
        let mut parts = Vec::new();
        for (stream, count) in batch_layout(&cfg) {
            let mut rng = batch_rng(cfg.seed, stream);
            let mut acc = RunningSum::default();
            for _ in 0..count {
                acc.push(draw_one(&mut rng, &m).noise[0].re);
            }
            parts.push(acc);
        }
        let ser = pairwise_merge(parts, &|mut a: RunningSum, b| {
            a.merge(&b);
            a
        });
        assert_eq!(par.n, ser.n);
        assert_eq!(par.sum.to_bits(), ser.sum.to_bits());
        assert_eq!(par.sumsq.to_bits(), ser.sumsq.to_bits());
    }

    #[test]
    fn results_identical_across_thread_counts() {
        let m = bpsk_scalar_mac(1.0).unwrap();
        let cfg = mc(20_000);
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| crate::mmse::mmse_total(&m, &cfg).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        assert_eq!(a.total.to_bits(), b.total.to_bits());
        assert_eq!(a.mmse1.to_bits(), b.mmse1.to_bits());
        assert_eq!(a.e1[(0, 0)].re.to_bits(), b.e1[(0, 0)].re.to_bits());
    }

    #[test]
    fn snr_zero_output_moments() {
        // y is pure CN(0,1) noise: zero mean, unit per-component power
        let m = bpsk_scalar_mac(0.0).unwrap();
        let cfg = McConfig {
            seed: 7,
            samples: 100_000,
            batch: 4096,
        };
        let mut mean = C64::new(0.0, 0.0);
        let mut pow = 0.0;
        for (_, _, y) in sample_outputs(&m, &cfg).unwrap() {
            mean += y[0];
            pow += y[0].norm_sqr();
        }
        mean /= C64::from(cfg.samples as f64);
        pow /= cfg.samples as f64;
        assert!(mean.norm() < 0.02, "|mean| = {}", mean.norm());
        assert!((pow - 1.0).abs() < 0.02, "E|y|^2 = {pow}");
    }

    #[test]
    fn second_moment_bookkeeping_at_snr_4() {
        // E|y|^2 = snr*1 + snr*1 + 1 = 9 for the unit BPSK MAC at snr = 4
        let m = bpsk_scalar_mac(4.0).unwrap();
        let cfg = McConfig {
            seed: 3,
            samples: 100_000,
            batch: 4096,
        };
        let mut pow = 0.0;
        for (_, _, y) in sample_outputs(&m, &cfg).unwrap() {
            pow += y[0].norm_sqr();
        }
        pow /= cfg.samples as f64;
        assert!((pow - 9.0).abs() / 9.0 < 0.02, "E|y|^2 = {pow}");
    }

    #[test]
    fn empirical_input_covariance_converges() {
        let m = crate::model::qpsk_scalar_mac(1.0).unwrap();
        let cfg = McConfig {
            seed: 11,
            samples: 40_000,
            batch: 4096,
        };
        let mut cov = C64::new(0.0, 0.0);
        for d in serial_draws(&m, cfg) {
            let x = m.c1.point(d.x1)[0];
            cov += x * x.conj();
        }
        cov /= C64::from(cfg.samples as f64);
        let dev = (cov - C64::new(1.0, 0.0)).norm();
        assert!(dev < 3.0 / (cfg.samples as f64).sqrt(), "dev = {dev}");
    }
}
