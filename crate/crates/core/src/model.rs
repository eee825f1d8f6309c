//! Channel model: input constellations, per-user links and the two-user MAC.
//!
//! The channel is `y = sqrt(snr) H1 P1 x1 + sqrt(snr) H2 P2 x2 + n` with
//! `n ~ CN(0, I)`: circularly symmetric, `E[n n^H] = I`, so the real and
//! imaginary parts of each component carry variance 1/2. This matches the
//! conditional density `pi^{-n_r} exp(-|y - mean|^2)` used by [`crate::posterior`].
//!
//! Constellations are finite and explicit. Exact posterior sums run over the
//! joint alphabet, so its size is capped (default 4096); exceeding the cap is
//! a hard error, never silent subsampling.

use crate::{CMat, CVec, Error, Result, C64};

/// Tolerance for prior normalization and the zero-mean check.
const MEAN_TOL: f64 = 1e-12;
/// Tolerance for the unit-covariance check of `normalized` constellations.
const COV_TOL: f64 = 1e-10;
/// Default cap on `|c1| * |c2|`.
pub const DEFAULT_ALPHABET_CAP: usize = 4096;

/// A finite set of complex input vectors with prior probabilities.
///
/// Invariants enforced on construction: priors strictly positive and summing
/// to one, zero mean, and (when `normalized`) unit covariance
/// `sum_k p_k x_k x_k^H = I`.
#[derive(Debug, Clone)]
pub struct Constellation {
    points: Vec<CVec>,
    priors: Vec<f64>,
    log_priors: Vec<f64>,
    normalized: bool,
}

impl Constellation {
    pub fn new(points: Vec<CVec>, priors: Vec<f64>, normalized: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Constellation("no points".into()));
        }
        if points.len() != priors.len() {
            return Err(Error::Constellation(format!(
                "{} points but {} priors",
                points.len(),
                priors.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::Constellation("inconsistent point dimensions".into()));
        }
        if priors.iter().any(|&p| p <= 0.0 || !p.is_finite()) {
            return Err(Error::Constellation("priors must be positive".into()));
        }
        let sum: f64 = priors.iter().sum();
        if (sum - 1.0).abs() > MEAN_TOL {
            return Err(Error::Constellation(format!(
                "priors sum to {sum:.15}, expected 1"
            )));
        }
        let mut mean = CVec::zeros(dim);
        for (x, &p) in points.iter().zip(&priors) {
            mean += x * C64::from(p);
        }
        if mean.norm() > MEAN_TOL {
            return Err(Error::Constellation(format!(
                "mean norm {:.3e} exceeds {MEAN_TOL:.0e}; inputs must be zero-mean",
                mean.norm()
            )));
        }
        let c = Self {
            log_priors: priors.iter().map(|p| p.ln()).collect(),
            points,
            priors,
            normalized,
        };
        if normalized {
            let dev = (c.covariance() - CMat::identity(dim, dim)).norm();
            if dev > COV_TOL {
                return Err(Error::Constellation(format!(
                    "covariance deviates from identity by {dev:.3e} (> {COV_TOL:.0e})"
                )));
            }
        }
        Ok(c)
    }

    /// Equiprobable BPSK on one dimension: `{+1, -1}`.
    pub fn bpsk() -> Self {
        let p = |re: f64| CVec::from_element(1, C64::new(re, 0.0));
        Self::new(vec![p(1.0), p(-1.0)], vec![0.5, 0.5], true).expect("bpsk is valid")
    }

    /// Equiprobable QPSK on one dimension: `{(+-1 +-i)/sqrt(2)}`.
    pub fn qpsk() -> Self {
        let v = std::f64::consts::FRAC_1_SQRT_2;
        let pts = [(v, v), (v, -v), (-v, v), (-v, -v)]
            .iter()
            .map(|&(re, im)| CVec::from_element(1, C64::new(re, im)))
            .collect();
        Self::new(pts, vec![0.25; 4], true).expect("qpsk is valid")
    }

    /// The degenerate single-point alphabet `{0}` in `dim` dimensions.
    pub fn single_zero(dim: usize) -> Self {
        Self::new(vec![CVec::zeros(dim)], vec![1.0], false).expect("zero point is valid")
    }

    /// Cartesian product: independent use of `base` on each of `n` dimensions.
    ///
    /// The result has `len^n` points of dimension `dim * n` and preserves the
    /// `normalized` flag (a product of unit-covariance factors has unit
    /// covariance).
    pub fn product_power(base: &Self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Constellation("empty product".into()));
        }
        let dim = base.dim();
        let mut points: Vec<CVec> = vec![CVec::zeros(0)];
        let mut priors = vec![1.0];
        for _ in 0..n {
            let mut np = Vec::with_capacity(points.len() * base.len());
            let mut nq = Vec::with_capacity(priors.len() * base.len());
            for (head, &hp) in points.iter().zip(&priors) {
                for (tail, &tp) in base.points.iter().zip(&base.priors) {
                    let mut v = CVec::zeros(head.len() + dim);
                    v.rows_mut(0, head.len()).copy_from(head);
                    v.rows_mut(head.len(), dim).copy_from(tail);
                    np.push(v);
                    nq.push(hp * tp);
                }
            }
            points = np;
            priors = nq;
        }
        Self::new(points, priors, base.normalized)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, k: usize) -> &CVec {
        &self.points[k]
    }

    pub fn points(&self) -> &[CVec] {
        &self.points
    }

    pub fn prior(&self, k: usize) -> f64 {
        self.priors[k]
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn log_prior(&self, k: usize) -> f64 {
        self.log_priors[k]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// `sum_k p_k x_k x_k^H`.
    pub fn covariance(&self) -> CMat {
        let d = self.dim();
        let mut cov = CMat::zeros(d, d);
        for (x, &p) in self.points.iter().zip(&self.priors) {
            cov += (x * x.adjoint()) * C64::from(p);
        }
        cov
    }

    /// Largest point norm; posterior means always lie within this radius.
    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// One user's channel matrix `H` (n_r x n_t) and precoder `P` (n_t x n_t).
///
/// The precoder must not increase transmitted power: `trace(P P^H)` is checked
/// against the budget (default `n_t`) on construction.
#[derive(Debug, Clone)]
pub struct UserLink {
    h: CMat,
    p: CMat,
}

impl UserLink {
    pub fn new(h: CMat, p: CMat) -> Result<Self> {
        let budget = h.ncols() as f64;
        Self::with_power_budget(h, p, budget)
    }

    pub fn with_power_budget(h: CMat, p: CMat, budget: f64) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::Dimension(format!(
                "precoder must be square, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        if h.ncols() != p.nrows() {
            return Err(Error::Dimension(format!(
                "H is {}x{} but P is {}x{}",
                h.nrows(),
                h.ncols(),
                p.nrows(),
                p.ncols()
            )));
        }
        let got = (&p * p.adjoint()).trace().re;
        // Small slack for round-off in externally computed precoders.
        if got > budget * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::Power { got, budget });
        }
        Ok(Self { h, p })
    }

    /// Bypasses the power check; used by finite-difference perturbation.
    pub(crate) fn new_unchecked(h: CMat, p: CMat) -> Self {
        Self { h, p }
    }

    pub fn h(&self) -> &CMat {
        &self.h
    }

    pub fn p(&self) -> &CMat {
        &self.p
    }

    pub fn n_r(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.h.ncols()
    }

    /// The recurring product `H P`.
    pub fn effective(&self) -> CMat {
        &self.h * &self.p
    }

    /// Identity channel and precoder of the given size.
    pub fn identity(n_r: usize, n_t: usize) -> Self {
        Self {
            h: CMat::identity(n_r, n_t),
            p: CMat::identity(n_t, n_t),
        }
    }
}

/// `H P` for a link (exact product, no scaling by snr).
pub fn effective_matrix(link: &UserLink) -> CMat {
    link.effective()
}

/// The two-user MAC: two links, two constellations, an SNR and the output
/// dimension. Immutable after construction and cheap to clone.
#[derive(Debug, Clone)]
pub struct MacModel {
    pub link1: UserLink,
    pub link2: UserLink,
    pub c1: Constellation,
    pub c2: Constellation,
    snr: f64,
    n_r: usize,
    cap: usize,
}

impl MacModel {
    pub fn new(
        link1: UserLink,
        link2: UserLink,
        c1: Constellation,
        c2: Constellation,
        snr: f64,
    ) -> Result<Self> {
        Self::with_alphabet_cap(link1, link2, c1, c2, snr, DEFAULT_ALPHABET_CAP)
    }

    pub fn with_alphabet_cap(
        link1: UserLink,
        link2: UserLink,
        c1: Constellation,
        c2: Constellation,
        snr: f64,
        cap: usize,
    ) -> Result<Self> {
        if link1.n_r() != link2.n_r() {
            return Err(Error::Dimension(format!(
                "links disagree on n_r: {} vs {}",
                link1.n_r(),
                link2.n_r()
            )));
        }
        if c1.dim() != link1.n_t() {
            return Err(Error::Dimension(format!(
                "constellation 1 dimension {} != link 1 n_t {}",
                c1.dim(),
                link1.n_t()
            )));
        }
        if c2.dim() != link2.n_t() {
            return Err(Error::Dimension(format!(
                "constellation 2 dimension {} != link 2 n_t {}",
                c2.dim(),
                link2.n_t()
            )));
        }
        if !snr.is_finite() || snr < 0.0 {
            return Err(Error::NonFinite(format!("snr = {snr}")));
        }
        let joint = c1.len() * c2.len();
        if joint > cap {
            return Err(Error::AlphabetCap { got: joint, cap });
        }
        let n_r = link1.n_r();
        Ok(Self {
            link1,
            link2,
            c1,
            c2,
            snr,
            n_r,
            cap,
        })
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn joint_len(&self) -> usize {
        self.c1.len() * self.c2.len()
    }

    pub fn alphabet_cap(&self) -> usize {
        self.cap
    }

    /// Same model at a different SNR (validation is unaffected).
    pub fn with_snr(&self, snr: f64) -> Result<Self> {
        if !snr.is_finite() || snr < 0.0 {
            return Err(Error::NonFinite(format!("snr = {snr}")));
        }
        let mut m = self.clone();
        m.snr = snr;
        Ok(m)
    }

    /// Replaces one user's channel matrix without re-checking power (used by
    /// finite-difference perturbation, which must step freely).
    pub(crate) fn with_h_unchecked(&self, user: crate::gradients::User, h: CMat) -> Self {
        let mut m = self.clone();
        match user {
            crate::gradients::User::U1 => m.link1 = UserLink::new_unchecked(h, m.link1.p.clone()),
            crate::gradients::User::U2 => m.link2 = UserLink::new_unchecked(h, m.link2.p.clone()),
        }
        m
    }

    pub(crate) fn with_p_unchecked(&self, user: crate::gradients::User, p: CMat) -> Self {
        let mut m = self.clone();
        match user {
            crate::gradients::User::U1 => m.link1 = UserLink::new_unchecked(m.link1.h.clone(), p),
            crate::gradients::User::U2 => m.link2 = UserLink::new_unchecked(m.link2.h.clone(), p),
        }
        m
    }
}

/// The scalar equal-power BPSK MAC `y = sqrt(snr) x1 + sqrt(snr) x2 + n` with
/// `x_i` equiprobable on `{+1, -1}`.
pub fn bpsk_scalar_mac(snr: f64) -> Result<MacModel> {
    MacModel::new(
        UserLink::identity(1, 1),
        UserLink::identity(1, 1),
        Constellation::bpsk(),
        Constellation::bpsk(),
        snr,
    )
}

/// The scalar equal-power QPSK MAC (proper complex unit-variance inputs).
pub fn qpsk_scalar_mac(snr: f64) -> Result<MacModel> {
    MacModel::new(
        UserLink::identity(1, 1),
        UserLink::identity(1, 1),
        Constellation::qpsk(),
        Constellation::qpsk(),
        snr,
    )
}

/// Monte Carlo settings: seed, total sample count and batch size.
///
/// Work is split into `ceil(samples / batch)` batches; batch `b` draws from
/// ChaCha stream `b` of the seed, so the multiset of samples is independent
/// of thread count.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub samples: usize,
    pub batch: usize,
}

impl McConfig {
    pub fn new(seed: u64, samples: usize, batch: usize) -> Result<Self> {
        let c = Self {
            seed,
            samples,
            batch,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::McConfig("samples must be >= 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::McConfig("batch must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            samples: 200_000,
            batch: 4096,
        }
    }
}

/// Draws `(x1 index, x2 index, y)` at the model's SNR, in the deterministic
/// stream order. See [`crate::mc`] for the underlying snr-independent draws.
pub fn sample_outputs<'a>(
    model: &'a MacModel,
    mc: &McConfig,
) -> Result<impl Iterator<Item = (usize, usize, CVec)> + 'a> {
    mc.validate()?;
    let sqrt_s = model.snr.sqrt();
    let s1: Vec<CVec> = model
        .c1
        .points()
        .iter()
        .map(|x| model.link1.effective() * x)
        .collect();
    let s2: Vec<CVec> = model
        .c2
        .points()
        .iter()
        .map(|x| model.link2.effective() * x)
        .collect();
    let draws = crate::mc::serial_draws(model, *mc);
    Ok(draws.map(move |d| {
        let y = (&s1[d.x1] + &s2[d.x2]) * C64::from(sqrt_s) + &d.noise;
        (d.x1, d.x2, y)
    }))
}
