//! Weighted Lebesgue constants, Kullback-Leibler divergence by quadrature,
//! and convergence-rate fits.

use serde::{Deserialize, Serialize};

use crate::domain::{halton_in_box, BoundingBox};
use crate::error::{Error, Result};
use crate::nodes::WeightFn;
use crate::polybasis::{assemble_vandermonde, Basis, Family1d};
use crate::statmodel::{Likelihood, PosteriorEval, PosteriorTable, Quadrature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LebesgueMethod {
    /// Per-interval sampling with golden-section refinement (1D).
    IntervalSearch,
    /// Maximum over quasi-random points; a lower bound (d >= 2).
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LebesgueEstimate {
    pub nodes: usize,
    pub value: f64,
    pub method: LebesgueMethod,
    pub resolution: usize,
}

/// Evaluates the weighted Lebesgue function
/// `w(x) sum_k |l_k(x)| / w(x_k)` for fixed univariate nodes.
///
/// Uses the first barycentric form `l_k(x) = l(x) lam_k / (x - x_k)` with
/// `l(x) = prod_j (x - x_j)`. The second form cancels catastrophically
/// outside the node hull, which is where unbounded weights put their tails.
struct LebesgueFn1d<'a> {
    w: &'a dyn WeightFn,
    x: Vec<f64>,
    /// `|lam_k| / w(x_k)` scaled by `exp(-shift)`.
    c: Vec<f64>,
    shift: f64,
}

const RESCALE: f64 = 1e150;

impl<'a> LebesgueFn1d<'a> {
    fn new(w: &'a dyn WeightFn, x: &[f64]) -> Self {
        let logs: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(k, &xk)| {
                let ln_lam: f64 = -x
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, &xj)| (xk - xj).abs().ln())
                    .sum::<f64>();
                ln_lam - w.ln_weight(&[xk])
            })
            .collect();
        let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let c = logs.iter().map(|l| (l - shift).exp()).collect();
        LebesgueFn1d {
            w,
            x: x.to_vec(),
            c,
            shift,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let lw = self.w.ln_weight(&[t]);
        if lw == f64::NEG_INFINITY {
            return 0.0;
        }
        let mut prod = 1.0f64;
        let mut ln_scale = 0.0f64;
        let mut sum = 0.0;
        for (k, (xk, c)) in self.x.iter().zip(&self.c).enumerate() {
            let d = (t - xk).abs();
            if d == 0.0 {
                // At a node the function equals w(x_k) / w(x_k) = 1.
                return 1.0;
            }
            prod *= d;
            sum += c / d;
            if k % 16 == 15 {
                if prod > RESCALE {
                    prod /= RESCALE;
                    ln_scale += RESCALE.ln();
                } else if prod < 1.0 / RESCALE {
                    prod *= RESCALE;
                    ln_scale -= RESCALE.ln();
                }
            }
        }
        (lw + self.shift + ln_scale + prod.ln()).exp() * sum
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Weighted Lebesgue constant of univariate nodes.
///
/// Every inter-node interval (and the tails out to the support ends, or
/// far enough into the decay of an unbounded weight) is sampled at
/// `per_interval` points, raised as needed so that at least 1000 points are
/// used in total; the best intervals are then refined by golden-section
/// search.
pub fn lebesgue_constant_1d(
    nodes: &[f64],
    w: &dyn WeightFn,
    per_interval: usize,
) -> LebesgueEstimate {
    let n = nodes.len();
    if n == 1 {
        return LebesgueEstimate {
            nodes: 1,
            value: 1.0,
            method: LebesgueMethod::IntervalSearch,
            resolution: 1,
        };
    }
    let lf = LebesgueFn1d::new(w, nodes);
    let mut s: Vec<f64> = nodes.to_vec();
    s.sort_by(f64::total_cmp);
    let support = w.support()[0];
    let mut edges = Vec::with_capacity(n + 8);
    // Lower tail.
    if support.lo.is_finite() {
        if support.lo < s[0] {
            edges.push(support.lo);
        }
    } else {
        let span = s[n - 1] - s[0];
        let mut t = span.max(1.0) / 8.0;
        let mut pts = Vec::new();
        while w.ln_weight(&[s[0] - t]) > w.ln_weight(&[s[0]]) - 60.0 && t < 1e6 {
            pts.push(s[0] - t);
            t *= 1.5;
        }
        pts.push(s[0] - t);
        pts.reverse();
        edges.extend(pts);
    }
    edges.extend_from_slice(&s);
    if support.hi.is_finite() {
        if support.hi > s[n - 1] {
            edges.push(support.hi);
        }
    } else {
        let span = s[n - 1] - s[0];
        let mut t = span.max(1.0) / 8.0;
        while w.ln_weight(&[s[n - 1] + t]) > w.ln_weight(&[s[n - 1]]) - 60.0 && t < 1e6 {
            edges.push(s[n - 1] + t);
            t *= 1.5;
        }
        edges.push(s[n - 1] + t);
    }
    let m = per_interval.max(1000usize.div_ceil(edges.len() - 1)).max(2);
    let mut best = 1.0f64;
    let mut tops: Vec<(f64, f64, f64)> = Vec::new();
    let mut total = 0;
    for win in edges.windows(2) {
        let (a, b) = (win[0], win[1]);
        let h = (b - a) / m as f64;
        let mut local = (f64::NEG_INFINITY, a);
        for i in 0..=m {
            let t = a + h * i as f64;
            let v = lf.eval(t);
            if v > local.0 {
                local = (v, t);
            }
        }
        total += m + 1;
        best = best.max(local.0);
        tops.push((local.0, (local.1 - h).max(a), (local.1 + h).min(b)));
    }
    tops.sort_by(|p, q| q.0.total_cmp(&p.0));
    for &(_, a, b) in tops.iter().take(8) {
        let (_, v) = golden_max(&|t| lf.eval(t), a, b, 60);
        best = best.max(v);
    }
    LebesgueEstimate {
        nodes: n,
        value: best,
        method: LebesgueMethod::IntervalSearch,
        resolution: total,
    }
}

/// Weighted Lebesgue constant in any dimension as a maximum over
/// `resolution` Halton points (a lower bound for d >= 2).
pub fn lebesgue_constant_grid(
    nodes: &[Vec<f64>],
    w: &dyn WeightFn,
    families: &[Family1d],
    bx: &BoundingBox,
    resolution: usize,
) -> Result<LebesgueEstimate> {
    let n = nodes.len();
    let basis = Basis::new(families.to_vec(), n);
    let v = assemble_vandermonde(&basis, nodes);
    let inv = v
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("Vandermonde matrix is singular".into()))?;
    let ln_wk: Vec<f64> = nodes.iter().map(|x| w.ln_weight(x)).collect();
    let mut best = 1.0f64;
    let mut phi = vec![0.0; n];
    let mut table = Vec::new();
    for x in halton_in_box(bx, 1, resolution) {
        let lw = w.ln_weight(&x);
        if lw == f64::NEG_INFINITY {
            continue;
        }
        basis.eval_into(&x, &mut phi, &mut table);
        let mut s = 0.0;
        for k in 0..n {
            let lk: f64 = (0..n).map(|j| phi[j] * inv[(j, k)]).sum();
            s += lk.abs() * (lw - ln_wk[k]).exp();
        }
        best = best.max(s);
    }
    Ok(LebesgueEstimate {
        nodes: n,
        value: best,
        method: LebesgueMethod::Grid,
        resolution,
    })
}

/// Series-safe `r + expm1(-r)`, which is non-negative for all r.
fn kl_term(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        let r2 = r * r;
        r2 * (0.5 - r / 6.0 + r2 / 24.0 - r2 * r / 120.0)
    } else {
        r + (-r).exp_m1()
    }
}

/// D_KL(p || q) from two posteriors tabulated on the same quadrature.
///
/// When `shared` supplies the common likelihood (and both tables use the
/// same prior), log-density differences are formed through
/// [`Likelihood::ln_ratio`] to avoid cancellation.
pub fn kl_from_tables(
    p: &PosteriorTable,
    q: &PosteriorTable,
    quad: &Quadrature,
    shared: Option<&Likelihood>,
) -> Result<f64> {
    let n = quad.len();
    let mut delta = vec![0.0; n];
    let mut pw = vec![0.0; n];
    for i in 0..n {
        let lp = p.ln_density[i];
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let pi = (lp - p.ln_gamma).exp();
        let lq = q.ln_density[i];
        if lq == f64::NEG_INFINITY {
            if pi > 1e-300 {
                return Err(Error::UnboundedDivergence(pi));
            }
            continue;
        }
        pw[i] = quad.weights[i] * pi;
        delta[i] = match shared {
            Some(lik) if p.ln_prior[i] == q.ln_prior[i] => {
                lik.ln_ratio(&p.outputs[i], &q.outputs[i])
            }
            _ => lp - lq,
        };
    }
    let mass: f64 = pw.iter().sum();
    let live = || pw.iter().zip(&delta).filter(|(w, _)| **w > 0.0);
    let spread = live().map(|(_, d)| d.abs()).fold(0.0, f64::max);
    // c = ln(gamma_q / gamma_p); the expm1 form keeps full precision when
    // the posteriors nearly agree.
    let c = if spread < 0.5 {
        // q's mass where p vanishes, relative to gamma_p.
        let outside: f64 = (0..n)
            .filter(|&i| p.ln_density[i] == f64::NEG_INFINITY)
            .map(|i| quad.weights[i] * (q.ln_density[i] - p.ln_gamma).exp())
            .sum();
        let s: f64 = live().map(|(w, d)| w * (-d).exp_m1()).sum();
        ((s + outside) / mass).ln_1p()
    } else {
        q.ln_gamma - p.ln_gamma
    };
    let d: f64 = live()
        .map(|(w, d)| {
            let r = d + c;
            if r > -1.0 {
                w * kl_term(r)
            } else {
                // w e^-r is q's share of the mass and stays finite.
                w * (r - 1.0) + (w.ln() - r).exp()
            }
        })
        .sum::<f64>()
        / mass;
    Ok(d)
}

/// D_KL(p || q) by quadrature.
pub fn kl_divergence(p: &PosteriorEval, q: &PosteriorEval, quad: &Quadrature) -> Result<f64> {
    let tp = p.tabulate(quad)?;
    let tq = q.tabulate(quad)?;
    let shared = (std::ptr::eq(p.lik, q.lik) && std::ptr::eq(p.prior, q.prior)).then_some(p.lik);
    kl_from_tables(&tp, &tq, quad, shared)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateModel {
    /// error ~ A^-N; rate is ln A.
    Exponential,
    /// error ~ N^-alpha; rate is alpha.
    Algebraic,
}

/// Error versus number of nodes, with an optional fitted rate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub points: Vec<(usize, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    /// Root-mean-square residual on the log axis.
    pub residual: f64,
}

impl ConvergenceCurve {
    pub fn new(mut points: Vec<(usize, f64)>) -> Self {
        points.sort_by_key(|p| p.0);
        ConvergenceCurve { points }
    }

    /// Points with `lo <= N <= hi`.
    pub fn window(&self, lo: usize, hi: usize) -> Self {
        ConvergenceCurve {
            points: self
                .points
                .iter()
                .copied()
                .filter(|p| p.0 >= lo && p.0 <= hi)
                .collect(),
        }
    }
}

/// Least-squares slope of ln(error) against N or ln N, negated.
pub fn fit_rate(curve: &ConvergenceCurve, model: RateModel) -> Result<RateFit> {
    if curve.points.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "{} points, need at least 4",
            curve.points.len()
        )));
    }
    if let Some(p) = curve
        .points
        .iter()
        .find(|p| !(p.1 > 0.0) || !p.1.is_finite())
    {
        return Err(Error::DegenerateFit(format!(
            "non-positive error {} at N = {}",
            p.1, p.0
        )));
    }
    let xs: Vec<f64> = curve
        .points
        .iter()
        .map(|p| match model {
            RateModel::Exponential => p.0 as f64,
            RateModel::Algebraic => (p.0 as f64).ln(),
        })
        .collect();
    let ys: Vec<f64> = curve.points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("abscissa has zero variance".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        rate: -slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// max over the grid of |f(x) - g(x)|.
pub fn sup_difference(
    grid: &[Vec<f64>],
    f: impl Fn(&[f64]) -> f64,
    g: impl Fn(&[f64]) -> f64,
) -> f64 {
    grid.iter().map(|x| (f(x) - g(x)).abs()).fold(0.0, f64::max)
}
