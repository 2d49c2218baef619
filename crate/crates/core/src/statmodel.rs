//! Priors, likelihood maps, posteriors and the adaptive weighting function.
//!
//! Densities are handled in the log domain with `-inf` for zeros. The
//! Gaussian likelihood is kept in its unnormalized form with peak value one,
//! i.e. the u-independent factor of exp(-d'S d / 2) is dropped. Node
//! selection is invariant to that constant, and it keeps P' on the scale of
//! the likelihood's width instead of underflowing for long data vectors.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Normal as NormalDist};
use serde::{Deserialize, Serialize};

use crate::domain::{halton_in_box, BoundingBox, Interval};
use crate::error::{Error, Result};
use crate::nodes::WeightFn;
use crate::surrogate::MultiSurrogate;

/// Univariate prior marginal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Marginal {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
    /// Beta(alpha, beta) mapped affinely from [0, 1] onto [lo, hi].
    Beta {
        alpha: f64,
        beta: f64,
        lo: f64,
        hi: f64,
    },
}

/// Density cut (in log units below the mode) bounding the search region of
/// unbounded marginals.
const LOG_CUT: f64 = 40.0;

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Marginal::Normal { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
            Marginal::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => alpha > 0.0 && beta > 0.0 && lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid prior marginal {self:?}"
            )))
        }
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::Normal { mean, std } => {
                let z = (x - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            Marginal::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => {
                if x < lo || x > hi {
                    return f64::NEG_INFINITY;
                }
                let w = hi - lo;
                let t = (x - lo) / w;
                let norm = statrs::function::beta::ln_beta(alpha, beta) + w.ln();
                let a = if alpha == 1.0 {
                    0.0
                } else {
                    (alpha - 1.0) * t.ln()
                };
                let b = if beta == 1.0 {
                    0.0
                } else {
                    (beta - 1.0) * (1.0 - t).ln()
                };
                let v = a + b - norm;
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            }
        }
    }

    /// First and second derivative of the log density inside the support.
    pub fn ln_derivs(&self, x: f64) -> (f64, f64) {
        match *self {
            Marginal::Uniform { .. } => (0.0, 0.0),
            Marginal::Normal { mean, std } => (-(x - mean) / (std * std), -1.0 / (std * std)),
            Marginal::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => {
                let w = hi - lo;
                let t = (x - lo) / w;
                let (a, b) = (alpha - 1.0, beta - 1.0);
                (
                    (a / t - b / (1.0 - t)) / w,
                    (-a / (t * t) - b / ((1.0 - t) * (1.0 - t))) / (w * w),
                )
            }
        }
    }

    pub fn support(&self) -> Interval {
        match *self {
            Marginal::Uniform { lo, hi } | Marginal::Beta { lo, hi, .. } => Interval::new(lo, hi),
            Marginal::Normal { .. } => Interval::new(f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Finite region holding everything within `e^-40` of the peak density.
    pub fn search_interval(&self) -> Interval {
        match *self {
            Marginal::Normal { mean, std } => {
                let r = std * (2.0 * LOG_CUT).sqrt();
                Interval::new(mean - r, mean + r)
            }
            _ => self.support(),
        }
    }

    /// Smallest global maximizer, if it exists in closed form.
    pub fn mode(&self) -> Option<f64> {
        match *self {
            Marginal::Uniform { lo, .. } => Some(lo),
            Marginal::Normal { mean, .. } => Some(mean),
            Marginal::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => {
                if alpha >= 1.0 && beta >= 1.0 && alpha + beta > 2.0 {
                    Some(lo + (hi - lo) * (alpha - 1.0) / (alpha + beta - 2.0))
                } else if alpha == 1.0 && beta == 1.0 {
                    Some(lo)
                } else {
                    None
                }
            }
        }
    }

    pub fn log_concave(&self) -> bool {
        match *self {
            Marginal::Beta { alpha, beta, .. } => alpha >= 1.0 && beta >= 1.0,
            _ => true,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::Normal { mean, .. } => mean,
            Marginal::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => lo + (hi - lo) * alpha / (alpha + beta),
        }
    }

    pub fn std(&self) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            Marginal::Normal { std, .. } => std,
            Marginal::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => {
                let s = alpha + beta;
                (hi - lo) * (alpha * beta / (s * s * (s + 1.0))).sqrt()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Marginal::Normal { mean, std } => {
                NormalDist::new(mean, std).expect("validated").sample(rng)
            }
            Marginal::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => lo + (hi - lo) * BetaDist::new(alpha, beta).expect("validated").sample(rng),
        }
    }
}

/// Product prior over independent marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub marginals: Vec<Marginal>,
}

impl Prior {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidInput(
                "prior needs at least one marginal".into(),
            ));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Prior { marginals })
    }

    /// Uniform prior on a box.
    pub fn uniform(bx: &[Interval]) -> Result<Self> {
        Prior::new(
            bx.iter()
                .map(|iv| Marginal::Uniform {
                    lo: iv.lo,
                    hi: iv.hi,
                })
                .collect(),
        )
    }

    pub fn ln_density(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (m, &xi) in self.marginals.iter().zip(x) {
            s += m.ln_density(xi);
            if s == f64::NEG_INFINITY {
                break;
            }
        }
        s
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.ln_density(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.marginals.iter().map(|m| m.sample(rng)).collect()
    }

    pub fn is_bounded(&self) -> bool {
        self.marginals.iter().all(|m| m.support().is_bounded())
    }

    /// Box used for quadrature and grids: the support, with unbounded axes
    /// cut where the density drops by `e^-40`.
    pub fn quadrature_box(&self) -> BoundingBox {
        self.marginals
            .iter()
            .map(Marginal::search_interval)
            .collect()
    }

    /// sup of the density; requires a closed-form mode.
    pub fn sup_density(&self) -> Option<f64> {
        self.mode().map(|m| self.density(&m))
    }
}

impl WeightFn for Prior {
    fn dim(&self) -> usize {
        self.marginals.len()
    }
    fn ln_weight(&self, x: &[f64]) -> f64 {
        self.ln_density(x)
    }
    fn support(&self) -> BoundingBox {
        self.marginals.iter().map(Marginal::support).collect()
    }
    fn search_box(&self) -> BoundingBox {
        self.quadrature_box()
    }
    fn ln_weight_derivs(&self, x: f64) -> Option<(f64, f64)> {
        (self.marginals.len() == 1).then(|| self.marginals[0].ln_derivs(x))
    }
    fn mode(&self) -> Option<Vec<f64>> {
        self.marginals.iter().map(Marginal::mode).collect()
    }
    fn log_concave(&self) -> bool {
        self.marginals.iter().all(Marginal::log_concave)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// Every datum observes the same scalar output. `a = 1'S1`, `m = 1'Sz / a`.
    GaussianScalar {
        a: f64,
        m: f64,
    },
    /// Datum k observes output k.
    GaussianVector {
        precision: DMatrix<f64>,
    },
    Beta {
        zbar: f64,
    },
}

/// The map u -> P(u) with P(u) proportional to p(z | theta), plus P'.
#[derive(Clone, Debug, PartialEq)]
pub struct Likelihood {
    data: Vec<f64>,
    kind: Kind,
}

fn precision_of(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n || n == 0 {
        return Err(Error::InvalidInput(
            "covariance must be square and nonempty".into(),
        ));
    }
    let scale = cov.amax().max(f64::MIN_POSITIVE);
    if (cov - cov.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.inverse())
}

impl Likelihood {
    /// Gaussian with iid noise of standard deviation `sigma`.
    pub fn gaussian(z: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let n = z.len();
        Likelihood::gaussian_cov(z, DMatrix::from_diagonal_element(n, n, sigma * sigma))
    }

    /// Gaussian with covariance `cov`, all data observing one scalar output.
    pub fn gaussian_cov(z: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if z.len() != cov.nrows() {
            return Err(Error::InvalidInput(
                "data and covariance sizes differ".into(),
            ));
        }
        let s = precision_of(&cov)?;
        let a = s.sum();
        let b: f64 = (0..z.len())
            .map(|i| (0..z.len()).map(|j| s[(i, j)] * z[j]).sum::<f64>())
            .sum();
        Ok(Likelihood {
            data: z,
            kind: Kind::GaussianScalar { a, m: b / a },
        })
    }

    /// Gaussian where datum k is compared with model output k.
    pub fn gaussian_vector(z: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if z.len() != cov.nrows() {
            return Err(Error::InvalidInput(
                "data and covariance sizes differ".into(),
            ));
        }
        let precision = precision_of(&cov)?;
        Ok(Likelihood {
            data: z,
            kind: Kind::GaussianVector { precision },
        })
    }

    /// P(u) = (1 - e^2)^2 for |e| < 1, e = (zbar - u) / zbar.
    pub fn beta(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::InvalidInput("no data".into()));
        }
        let zbar = z.iter().sum::<f64>() / z.len() as f64;
        if zbar == 0.0 {
            return Err(Error::ZeroMeanData);
        }
        Ok(Likelihood {
            data: z,
            kind: Kind::Beta { zbar },
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Number of model outputs expected by [`ln_p`](Self::ln_p).
    pub fn output_len(&self) -> usize {
        match self.kind {
            Kind::GaussianVector { .. } => self.data.len(),
            _ => 1,
        }
    }

    /// Likelihood peak location for scalar models.
    pub fn center(&self) -> Option<f64> {
        match self.kind {
            Kind::GaussianScalar { m, .. } => Some(m),
            Kind::Beta { zbar } => Some(zbar),
            Kind::GaussianVector { .. } => None,
        }
    }

    fn vector_quad(p: &DMatrix<f64>, d: &[f64]) -> (f64, f64) {
        let n = d.len();
        let mut q = 0.0;
        let mut g = 0.0;
        for i in 0..n {
            let mut sd = 0.0;
            for j in 0..n {
                sd += p[(i, j)] * d[j];
            }
            q += d[i] * sd;
            g += sd;
        }
        (q, g)
    }

    pub fn ln_p(&self, u: &[f64]) -> f64 {
        match &self.kind {
            Kind::GaussianScalar { a, m } => {
                let r = u[0] - m;
                -0.5 * a * r * r
            }
            Kind::GaussianVector { precision } => {
                let d: Vec<f64> = self.data.iter().zip(u).map(|(z, u)| z - u).collect();
                -0.5 * Self::vector_quad(precision, &d).0
            }
            Kind::Beta { zbar } => {
                let e = (zbar - u[0]) / zbar;
                if e.abs() < 1.0 {
                    2.0 * (-e * e).ln_1p()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn p(&self, u: &[f64]) -> f64 {
        self.ln_p(u).exp()
    }

    /// dP/du, contracted with the ones vector for vector outputs.
    pub fn p_prime(&self, u: &[f64]) -> f64 {
        match &self.kind {
            Kind::GaussianScalar { a, m } => {
                let r = u[0] - m;
                -a * r * (-0.5 * a * r * r).exp()
            }
            Kind::GaussianVector { precision } => {
                let d: Vec<f64> = self.data.iter().zip(u).map(|(z, u)| z - u).collect();
                let (q, g) = Self::vector_quad(precision, &d);
                g * (-0.5 * q).exp()
            }
            Kind::Beta { zbar } => {
                let e = (zbar - u[0]) / zbar;
                if e.abs() < 1.0 {
                    4.0 * e * (1.0 - e * e) / zbar
                } else {
                    0.0
                }
            }
        }
    }

    /// ln P(u1) - ln P(u2), evaluated without cancellation when the two are
    /// close.
    pub fn ln_ratio(&self, u1: &[f64], u2: &[f64]) -> f64 {
        match &self.kind {
            Kind::GaussianScalar { a, m } => -0.5 * a * (u1[0] - u2[0]) * (u1[0] + u2[0] - 2.0 * m),
            Kind::GaussianVector { precision } => {
                let n = self.data.len();
                let diff: Vec<f64> = u2.iter().zip(u1).map(|(b, a)| b - a).collect();
                let sum: Vec<f64> = (0..n).map(|k| 2.0 * self.data[k] - u1[k] - u2[k]).collect();
                let mut q = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        q += diff[i] * precision[(i, j)] * sum[j];
                    }
                }
                -0.5 * q
            }
            Kind::Beta { zbar } => {
                let e1 = (zbar - u1[0]) / zbar;
                let e2 = (zbar - u2[0]) / zbar;
                match (e1.abs() < 1.0, e2.abs() < 1.0) {
                    (true, true) => {
                        let num = (u1[0] - u2[0]) / zbar * (e1 + e2);
                        2.0 * (num / (1.0 - e2 * e2)).ln_1p()
                    }
                    (false, false) => f64::NAN,
                    (true, false) => f64::INFINITY,
                    (false, true) => f64::NEG_INFINITY,
                }
            }
        }
    }

    /// Estimated Lipschitz constant: max |P'| over 10^4 points spanning
    /// `[lo, hi]` (scalar outputs) or the offsets `t * 1` of the data
    /// (vector outputs).
    pub fn lipschitz(&self, lo: f64, hi: f64) -> f64 {
        let n = 10_000;
        (0..n)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let u: Vec<f64> = match self.kind {
                    Kind::GaussianVector { .. } => self.data.iter().map(|z| z + t).collect(),
                    _ => vec![t],
                };
                self.p_prime(&u).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// q_N(theta) = (|P'(u_N(theta))| + zeta) p(theta).
pub struct AdaptiveWeight<'a> {
    pub prior: &'a Prior,
    pub lik: &'a Likelihood,
    pub surrogate: &'a MultiSurrogate,
    pub zeta: f64,
}

impl<'a> AdaptiveWeight<'a> {
    pub fn new(
        prior: &'a Prior,
        lik: &'a Likelihood,
        surrogate: &'a MultiSurrogate,
        zeta: f64,
    ) -> Result<Self> {
        if !(zeta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "zeta must be positive, got {zeta}"
            )));
        }
        Ok(AdaptiveWeight {
            prior,
            lik,
            surrogate,
            zeta,
        })
    }

    /// ln(|P'(u_N(x))| + zeta), defined everywhere the surrogate is.
    pub fn ln_factor(&self, x: &[f64]) -> f64 {
        (self.lik.p_prime(&self.surrogate.evaluate(x)).abs() + self.zeta).ln()
    }
}

impl WeightFn for AdaptiveWeight<'_> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }
    fn ln_weight(&self, x: &[f64]) -> f64 {
        let lp = self.prior.ln_density(x);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            lp + self.ln_factor(x)
        }
    }
    fn support(&self) -> BoundingBox {
        self.prior.support()
    }
    fn search_box(&self) -> BoundingBox {
        self.prior.search_box()
    }
    fn ln_weight_derivs(&self, x: f64) -> Option<(f64, f64)> {
        let (p1, p2) = self.prior.ln_weight_derivs(x)?;
        let width = self.prior.search_box()[0].width();
        let h1 = 6e-6 * width;
        let h2 = 1e-4 * width;
        let g = |t: f64| self.ln_factor(&[t]);
        let d1 = (g(x + h1) - g(x - h1)) / (2.0 * h1);
        let d2 = (g(x + h2) - 2.0 * g(x) + g(x - h2)) / (h2 * h2);
        Some((p1 + d1, p2 + d2))
    }
}

/// Tensor or quasi-random quadrature rule over a box.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

impl Quadrature {
    /// Tensor Gauss-Legendre with `n` points per panel and `panels` equal
    /// panels per axis.
    pub fn gauss_legendre(bx: &[Interval], n: usize, panels: usize) -> Self {
        let (gx, gw) = gauss_legendre(n);
        let axes: Vec<(Vec<f64>, Vec<f64>)> = bx
            .iter()
            .map(|iv| {
                let h = iv.width() / panels as f64;
                let mut xs = Vec::with_capacity(n * panels);
                let mut ws = Vec::with_capacity(n * panels);
                for p in 0..panels {
                    let a = iv.lo + h * p as f64;
                    for (t, wt) in gx.iter().zip(&gw) {
                        xs.push(a + 0.5 * h * (t + 1.0));
                        ws.push(0.5 * h * wt);
                    }
                }
                (xs, ws)
            })
            .collect();
        let per = n * panels;
        let total = per.pow(bx.len() as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; bx.len()];
        for _ in 0..total {
            points.push(idx.iter().zip(&axes).map(|(&i, a)| a.0[i]).collect());
            weights.push(idx.iter().zip(&axes).map(|(&i, a)| a.1[i]).product());
            for k in 0..idx.len() {
                idx[k] += 1;
                if idx[k] < per {
                    break;
                }
                idx[k] = 0;
            }
        }
        Quadrature { points, weights }
    }

    /// Equal-weight Halton rule with `n` points.
    pub fn quasi_monte_carlo(bx: &[Interval], n: usize) -> Self {
        let vol: f64 = bx.iter().map(Interval::width).product();
        Quadrature {
            points: halton_in_box(bx, 1, n),
            weights: vec![vol / n as f64; n],
        }
    }

    /// The documented default: 200-point Gauss-Legendre per axis for d <= 2,
    /// 10^6 Halton points for d >= 3.
    pub fn default_for(bx: &[Interval]) -> Self {
        if bx.len() <= 2 {
            Quadrature::gauss_legendre(bx, 200, 1)
        } else {
            Quadrature::quasi_monte_carlo(bx, 1_000_000)
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

/// Where a posterior's model outputs come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    TrueModel,
    Surrogate(usize),
}

/// Unnormalized posterior theta -> P(u(theta)) p(theta).
pub struct PosteriorEval<'a> {
    pub prior: &'a Prior,
    pub lik: &'a Likelihood,
    outputs: Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>,
    pub source: Source,
    pub ln_gamma: Option<f64>,
}

/// Posterior values tabulated on a quadrature rule.
#[derive(Clone, Debug)]
pub struct PosteriorTable {
    pub outputs: Vec<Vec<f64>>,
    pub ln_prior: Vec<f64>,
    pub ln_density: Vec<f64>,
    pub ln_gamma: f64,
}

/// log-sum-exp of `ln w_i + l_i`.
pub(crate) fn ln_weighted_sum(weights: &[f64], logs: &[f64]) -> f64 {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = weights
        .iter()
        .zip(logs)
        .map(|(w, l)| w * (l - m).exp())
        .sum();
    m + s.ln()
}

impl<'a> PosteriorEval<'a> {
    pub fn new(
        prior: &'a Prior,
        lik: &'a Likelihood,
        model: impl Fn(&[f64]) -> Vec<f64> + 'a,
        source: Source,
    ) -> Self {
        PosteriorEval {
            prior,
            lik,
            outputs: Box::new(model),
            source,
            ln_gamma: None,
        }
    }

    /// Posterior of a surrogate.
    pub fn of_surrogate(prior: &'a Prior, lik: &'a Likelihood, s: &'a MultiSurrogate) -> Self {
        let n = s.components.first().map_or(0, |c| c.len());
        PosteriorEval::new(prior, lik, move |x| s.evaluate(x), Source::Surrogate(n))
    }

    pub fn outputs(&self, x: &[f64]) -> Vec<f64> {
        (self.outputs)(x)
    }

    pub fn ln_density(&self, x: &[f64]) -> f64 {
        let lp = self.prior.ln_density(x);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.lik.ln_p(&self.outputs(x))
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.ln_density(x).exp()
    }

    /// Normalized density, if [`normalize`](Self::normalize) has run.
    pub fn normalized_density(&self, x: &[f64]) -> Option<f64> {
        self.ln_gamma.map(|g| (self.ln_density(x) - g).exp())
    }

    pub fn tabulate(&self, quad: &Quadrature) -> Result<PosteriorTable> {
        let mut outputs = Vec::with_capacity(quad.len());
        let mut ln_prior = Vec::with_capacity(quad.len());
        let mut ln_density = Vec::with_capacity(quad.len());
        for x in &quad.points {
            let lp = self.prior.ln_density(x);
            let u = if lp == f64::NEG_INFINITY {
                Vec::new()
            } else {
                self.outputs(x)
            };
            let ld = if u.is_empty() {
                f64::NEG_INFINITY
            } else {
                lp + self.lik.ln_p(&u)
            };
            outputs.push(u);
            ln_prior.push(lp);
            ln_density.push(ld);
        }
        let ln_gamma = ln_weighted_sum(&quad.weights, &ln_density);
        if !(ln_gamma >= 1e-300f64.ln()) {
            return Err(Error::QuadratureUnderflow(ln_gamma));
        }
        Ok(PosteriorTable {
            outputs,
            ln_prior,
            ln_density,
            ln_gamma,
        })
    }

    /// Computes and stores gamma, the integral of the unnormalized density.
    pub fn normalize(&mut self, quad: &Quadrature) -> Result<f64> {
        let t = self.tabulate(quad)?;
        self.ln_gamma = Some(t.ln_gamma);
        Ok(t.ln_gamma.exp())
    }
}

/// Measured data: values with optional observation locations.
#[derive(Clone, Debug, PartialEq)]
pub struct Data {
    pub values: Vec<f64>,
    pub locations: Option<Vec<f64>>,
}

/// Reads data from CSV: one value per line, or `location,value` pairs.
/// Lines starting with `#` and a non-numeric header are skipped.
pub fn load_data(path: &Path) -> Result<Data> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut locations = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        let nums = match parsed {
            Ok(n) => n,
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Format(format!(
                    "{}: line {}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        };
        if nums.len() > 2 || width.is_some_and(|w| w != nums.len()) {
            return Err(Error::Format(format!(
                "{}: line {} has {} columns",
                path.display(),
                i + 1,
                nums.len()
            )));
        }
        width = Some(nums.len());
        if nums.len() == 2 {
            locations.push(nums[0]);
            values.push(nums[1]);
        } else {
            values.push(nums[0]);
        }
    }
    if values.is_empty() {
        return Err(Error::Format(format!("{}: no data", path.display())));
    }
    Ok(Data {
        values,
        locations: (width == Some(2)).then_some(locations),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::linspace;
    use crate::polybasis::Family1d;
    use statrs::function::erf::erf;

    fn unit_prior() -> Prior {
        Prior::uniform(&[Interval::new(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn gaussian_examples() {
        let l = Likelihood::gaussian(vec![1.0], 0.1).unwrap();
        assert_eq!(l.p(&[1.0]), 1.0);
        assert_eq!(l.p_prime(&[1.0]), 0.0);
        assert!((l.p(&[0.9]) - (-0.5f64).exp()).abs() < 1e-15);
        let h = 1e-6;
        let fd = (l.p(&[0.7 + h]) - l.p(&[0.7 - h])) / (2.0 * h);
        assert!((fd - l.p_prime(&[0.7])).abs() <= 1e-6 * fd.abs().max(1e-300));
        let z = vec![0.4, 0.6, 0.5];
        let l = Likelihood::gaussian(z, 0.2).unwrap();
        assert_eq!(l.center(), Some(0.5));
    }

    #[test]
    fn bad_covariance_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            Likelihood::gaussian_cov(vec![0.0, 0.0], cov),
            Err(Error::NotPositiveDefinite)
        ));
        assert!(matches!(
            Likelihood::gaussian(vec![0.0], 0.0),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn beta_examples() {
        let l = Likelihood::beta(vec![1.0, 3.0]).unwrap();
        assert_eq!(l.p(&[2.0]), 1.0);
        assert_eq!(l.p(&[0.0]), 0.0);
        assert_eq!(l.p(&[4.5]), 0.0);
        assert!((l.p(&[1.0]) - 0.5625).abs() < 1e-15);
        assert!(matches!(
            Likelihood::beta(vec![1.0, -1.0]),
            Err(Error::ZeroMeanData)
        ));
        let h = 1e-6;
        for u in [0.3, 1.1, 2.9, 3.7] {
            let fd = (l.p(&[u + h]) - l.p(&[u - h])) / (2.0 * h);
            assert!((fd - l.p_prime(&[u])).abs() <= 1e-6f64.max(1e-4 * fd.abs()));
        }
    }

    #[test]
    fn ln_ratio_matches_difference() {
        let l = Likelihood::gaussian(vec![0.9, 1.1, 1.0], 0.1).unwrap();
        let r = l.ln_ratio(&[0.8], &[1.2]);
        assert!((r - (l.ln_p(&[0.8]) - l.ln_p(&[1.2]))).abs() < 1e-12);
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let l = Likelihood::gaussian_vector(vec![1.0, 2.0], cov).unwrap();
        let (a, b) = ([0.8, 2.3], [1.1, 1.7]);
        assert!((l.ln_ratio(&a, &b) - (l.ln_p(&a) - l.ln_p(&b))).abs() < 1e-12);
        let l = Likelihood::beta(vec![2.0]).unwrap();
        assert!((l.ln_ratio(&[1.5], &[2.6]) - (l.ln_p(&[1.5]) - l.ln_p(&[2.6]))).abs() < 1e-12);
    }

    #[test]
    fn vector_p_prime_is_directional_derivative() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.09]);
        let l = Likelihood::gaussian_vector(vec![1.0, 2.0], cov).unwrap();
        let u = [0.9, 2.1];
        let h = 1e-6;
        let fd = (l.p(&[u[0] + h, u[1] + h]) - l.p(&[u[0] - h, u[1] - h])) / (2.0 * h);
        assert!((fd - l.p_prime(&u)).abs() < 1e-6);
    }

    #[test]
    fn priors() {
        let p = Prior::new(vec![Marginal::Beta {
            alpha: 4.0,
            beta: 4.0,
            lo: 0.0,
            hi: 1.0,
        }])
        .unwrap();
        assert_eq!(p.mode(), Some(vec![0.5]));
        let q = Quadrature::gauss_legendre(&p.quadrature_box(), 200, 1);
        assert!((q.integrate(|x| p.density(x)) - 1.0).abs() < 1e-12);
        let n = Prior::new(vec![Marginal::Normal {
            mean: 1.0,
            std: 2.0,
        }])
        .unwrap();
        let q = Quadrature::gauss_legendre(&n.quadrature_box(), 200, 1);
        assert!((q.integrate(|x| n.density(x)) - 1.0).abs() < 1e-8);
        let u = Prior::uniform(&[Interval::new(-1.0, 1.0), Interval::new(0.0, 2.0)]).unwrap();
        assert_eq!(u.mode(), Some(vec![-1.0, 0.0]));
        let q = Quadrature::gauss_legendre(&u.quadrature_box(), 20, 1);
        assert!((q.integrate(|x| u.density(x)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_derivatives_match_differences() {
        let m = Marginal::Beta {
            alpha: 4.0,
            beta: 2.5,
            lo: -1.0,
            hi: 1.0,
        };
        let h = 1e-5;
        for x in [-0.7, 0.1, 0.8] {
            let fd1 = (m.ln_density(x + h) - m.ln_density(x - h)) / (2.0 * h);
            let fd2 = (m.ln_density(x + h) - 2.0 * m.ln_density(x) + m.ln_density(x - h)) / (h * h);
            let (d1, d2) = m.ln_derivs(x);
            assert!((fd1 - d1).abs() < 1e-6);
            assert!((fd2 - d2).abs() < 1e-3);
        }
    }

    #[test]
    fn gauss_legendre_rule() {
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i8 - 2.0 / 9.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(400);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn posterior_of_identity_model() {
        let prior = unit_prior();
        let (z, sigma) = (0.37, 0.1);
        let lik = Likelihood::gaussian(vec![z], sigma).unwrap();
        let mut pe = PosteriorEval::new(&prior, &lik, |x| vec![x[0]], Source::TrueModel);
        let grid = linspace(0.0, 1.0, 1_000_001);
        let mode = grid
            .iter()
            .copied()
            .max_by(|a, b| pe.ln_density(&[*a]).total_cmp(&pe.ln_density(&[*b])))
            .unwrap();
        assert!((mode - z).abs() < 1e-6);
        let gamma = pe
            .normalize(&Quadrature::gauss_legendre(
                &[Interval::new(0.0, 1.0)],
                200,
                1,
            ))
            .unwrap();
        let s = sigma * 2f64.sqrt();
        let exact =
            sigma * (std::f64::consts::PI / 2.0).sqrt() * (erf((1.0 - z) / s) - erf(-z / s));
        assert!((gamma - exact).abs() < 1e-8 * exact, "{gamma} vs {exact}");
    }

    #[test]
    fn flat_likelihood_normalizes_to_one() {
        let prior = Prior::new(vec![Marginal::Beta {
            alpha: 2.0,
            beta: 3.0,
            lo: 0.0,
            hi: 1.0,
        }])
        .unwrap();
        let lik = Likelihood::gaussian(vec![1.0], 0.1).unwrap();
        let mut pe = PosteriorEval::new(&prior, &lik, |_| vec![1.0], Source::TrueModel);
        let g = pe
            .normalize(&Quadrature::gauss_legendre(&prior.quadrature_box(), 200, 1))
            .unwrap();
        assert!((g - 1.0).abs() < 1e-8);
    }

    #[test]
    fn adaptive_weight_bounds() {
        let prior = Prior::uniform(&[Interval::new(-2.0, 2.0)]).unwrap();
        let lik = Likelihood::gaussian(vec![1.0], 0.1).unwrap();
        let fam = [Family1d::Legendre { lo: -2.0, hi: 2.0 }];
        let nodes: Vec<Vec<f64>> = [-2.0, 0.0, 2.0].iter().map(|&x| vec![x]).collect();
        let vals: Vec<Vec<f64>> = nodes
            .iter()
            .map(|x| vec![1.0 - 0.2 * x[0] * x[0]])
            .collect();
        let s = MultiSurrogate::build(&nodes, &vals, &fam, &prior.support()).unwrap();
        let zeta = 1e-3;
        let q = AdaptiveWeight::new(&prior, &lik, &s, zeta).unwrap();
        let pmax = lik.lipschitz(0.0, 2.0);
        for x in linspace(-2.0, 2.0, 101) {
            let (qx, px) = (q.weight(&[x]), prior.density(&[x]));
            assert!(qx >= zeta * px * (1.0 - 1e-12));
            assert!(qx <= (pmax + zeta) * px * (1.0 + 1e-12));
        }
        assert!((q.weight(&[0.0]) - zeta * prior.density(&[0.0])).abs() < 1e-15);
        assert_eq!(q.weight(&[2.5]), 0.0);
        assert!(AdaptiveWeight::new(&prior, &lik, &s, 0.0).is_err());
    }

    #[test]
    fn data_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.csv");
        std::fs::write(&p, "# comment\nz\n0.5\n0.75\n").unwrap();
        assert_eq!(
            load_data(&p).unwrap(),
            Data {
                values: vec![0.5, 0.75],
                locations: None
            }
        );
        std::fs::write(&p, "0.1,0.5\n0.2,0.75\n").unwrap();
        let d = load_data(&p).unwrap();
        assert_eq!(d.locations, Some(vec![0.1, 0.2]));
        std::fs::write(&p, "0.1,0.5\n0.2\n").unwrap();
        assert!(load_data(&p).is_err());
    }
}
