//! Forward models: the Gauss, Runge and sinc test functions, the steady
//! Burgers zero-crossing, and synthetic data recipes.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{BoundingBox, Interval};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cost {
    Explicit,
    ImplicitPde,
    External,
}

/// A model u: R^d -> R^m. Every call to [`evaluate`](Self::evaluate)
/// increments the evaluation counter exactly once.
pub trait ForwardModel {
    fn dim(&self) -> usize;

    fn n_outputs(&self) -> usize {
        1
    }

    fn domain(&self) -> BoundingBox;

    fn cost(&self) -> Cost;

    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>>;

    /// Number of calls to `evaluate` so far.
    fn evaluations(&self) -> usize;
}

#[derive(Debug, Default)]
struct Counter(AtomicUsize);

impl Counter {
    fn tick(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }
    fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
}

/// exp(-sum (theta_k - 1/2)^2) on [0, 1]^d.
pub fn gauss(theta: &[f64]) -> f64 {
    (-theta.iter().map(|t| (t - 0.5) * (t - 0.5)).sum::<f64>()).exp()
}

/// 5 / (2 + 50 sum (x_k - 1/2)^2) on [0, 1]^d.
pub fn runge(x: &[f64]) -> f64 {
    5.0 / (2.0 + 50.0 * x.iter().map(|t| (t - 0.5) * (t - 0.5)).sum::<f64>())
}

/// sin(t) / t with the removable singularity filled in.
pub fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Analytic {
    Gauss,
    Runge,
    Sinc,
}

/// One of the closed-form test functions.
#[derive(Debug)]
pub struct AnalyticModel {
    kind: Analytic,
    d: usize,
    counter: Counter,
}

pub fn gauss_model(d: usize) -> AnalyticModel {
    assert!(d >= 1);
    AnalyticModel {
        kind: Analytic::Gauss,
        d,
        counter: Counter::default(),
    }
}

pub fn runge_model(d: usize) -> AnalyticModel {
    assert!(d >= 1);
    AnalyticModel {
        kind: Analytic::Runge,
        d,
        counter: Counter::default(),
    }
}

/// sinc on [-2, 2].
pub fn sinc_model() -> AnalyticModel {
    AnalyticModel {
        kind: Analytic::Sinc,
        d: 1,
        counter: Counter::default(),
    }
}

impl AnalyticModel {
    /// Evaluates without touching the counter (for reference computations).
    pub fn value(&self, theta: &[f64]) -> f64 {
        match self.kind {
            Analytic::Gauss => gauss(theta),
            Analytic::Runge => runge(theta),
            Analytic::Sinc => sinc(theta[0]),
        }
    }
}

impl ForwardModel for AnalyticModel {
    fn dim(&self) -> usize {
        self.d
    }
    fn domain(&self) -> BoundingBox {
        match self.kind {
            Analytic::Sinc => vec![Interval::new(-2.0, 2.0)],
            _ => vec![Interval::new(0.0, 1.0); self.d],
        }
    }
    fn cost(&self) -> Cost {
        Cost::Explicit
    }
    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.counter.tick();
        Ok(vec![self.value(theta)])
    }
    fn evaluations(&self) -> usize {
        self.counter.get()
    }
}

/// Wraps a closure (or a call into an external solver) as a model.
pub struct FnModel<F> {
    bx: BoundingBox,
    n_outputs: usize,
    cost: Cost,
    f: F,
    counter: Counter,
}

impl<F: Fn(&[f64]) -> Result<Vec<f64>>> FnModel<F> {
    pub fn new(bx: BoundingBox, n_outputs: usize, cost: Cost, f: F) -> Self {
        FnModel {
            bx,
            n_outputs,
            cost,
            f,
            counter: Counter::default(),
        }
    }
}

impl<F: Fn(&[f64]) -> Result<Vec<f64>>> ForwardModel for FnModel<F> {
    fn dim(&self) -> usize {
        self.bx.len()
    }
    fn n_outputs(&self) -> usize {
        self.n_outputs
    }
    fn domain(&self) -> BoundingBox {
        self.bx.clone()
    }
    fn cost(&self) -> Cost {
        self.cost
    }
    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.counter.tick();
        (self.f)(theta)
    }
    fn evaluations(&self) -> usize {
        self.counter.get()
    }
}

/// Steady viscous Burgers problem `nu y'' - y y' = 0` on [-1, 1] with
/// `y(-1) = 1 + delta`, `y(1) = -1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurgersConfig {
    pub nu: f64,
    pub cells: usize,
    /// Max-norm tolerance on the discrete flux balance.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        BurgersConfig {
            nu: 0.1,
            cells: 10_000,
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

impl BurgersConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || self.cells < 100 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!(
                "invalid Burgers config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Solves the Thomas system `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i`.
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut m = b[0];
    cp[0] = c[0] / m;
    d[0] /= m;
    for i in 1..n {
        m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

struct BurgersFv {
    nu: f64,
    h: f64,
    yl: f64,
    yr: f64,
}

impl BurgersFv {
    /// Flux balance per cell and its tridiagonal Jacobian.
    fn residual(&self, y: &[f64], jac: Option<(&mut [f64], &mut [f64], &mut [f64])>) -> Vec<f64> {
        let n = y.len();
        let (nu, h) = (self.nu, self.h);
        // Face fluxes F = y^2/2 - nu y'.
        let mut flux = vec![0.0; n + 1];
        flux[0] = 0.5 * self.yl * self.yl - nu * (y[0] - self.yl) / (0.5 * h);
        for i in 0..n - 1 {
            flux[i + 1] = 0.25 * (y[i] * y[i] + y[i + 1] * y[i + 1]) - nu * (y[i + 1] - y[i]) / h;
        }
        flux[n] = 0.5 * self.yr * self.yr - nu * (self.yr - y[n - 1]) / (0.5 * h);
        let r: Vec<f64> = (0..n).map(|i| flux[i + 1] - flux[i]).collect();
        if let Some((lo, di, up)) = jac {
            for i in 0..n {
                // d F_{i+1/2} / d y_i and d y_{i+1}
                let (dr_self_right, dr_next) = if i + 1 < n {
                    (0.5 * y[i] + nu / h, 0.5 * y[i + 1] - nu / h)
                } else {
                    (2.0 * nu / h, 0.0)
                };
                // d F_{i-1/2} / d y_{i-1} and d y_i
                let (dl_prev, dl_self) = if i > 0 {
                    (0.5 * y[i - 1] + nu / h, 0.5 * y[i] - nu / h)
                } else {
                    (0.0, -2.0 * nu / h)
                };
                lo[i] = -dl_prev;
                di[i] = dr_self_right - dl_self;
                up[i] = dr_next;
            }
        }
        r
    }
}

/// Cell centers and converged cell values of the Burgers problem.
pub fn burgers_profile(cfg: &BurgersConfig, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    cfg.validate()?;
    let n = cfg.cells;
    let h = 2.0 / n as f64;
    let fv = BurgersFv {
        nu: cfg.nu,
        h,
        yl: 1.0 + delta,
        yr: -1.0,
    };
    let x: Vec<f64> = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
    // The layer position is a nearly singular mode of the Jacobian, so the
    // iteration starts from the exact continuous solution.
    let (a, c) = burgers_tanh_parameters(cfg.nu, delta);
    let mut y: Vec<f64> = x
        .iter()
        .map(|&xi| -a * (a * (xi - c) / (2.0 * cfg.nu)).tanh())
        .collect();
    let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut r = fv.residual(&y, Some((&mut lo, &mut di, &mut up)));
    let mut rnorm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Pseudo-time continuation: (h / dtau) I + J, dtau grows as the
    // residual falls (switched evolution relaxation).
    let mut dtau = 1.0f64;
    for it in 0..cfg.max_iterations {
        if rnorm <= cfg.tolerance {
            return Ok((x, y));
        }
        let shift = if dtau.is_finite() { h / dtau } else { 0.0 };
        let diag: Vec<f64> = di.iter().map(|d| d + shift).collect();
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        thomas(&lo, &diag, &up, &mut step);
        let trial: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + b).collect();
        let r_new = fv.residual(&trial, Some((&mut lo, &mut di, &mut up)));
        let new_norm = r_new.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if new_norm.is_finite() && (new_norm < rnorm || shift == 0.0 && new_norm < 10.0 * rnorm) {
            dtau = if new_norm < 1e-3 {
                f64::INFINITY
            } else {
                dtau * (rnorm / new_norm).clamp(1.0, 1e3) * 2.0
            };
            y = trial;
            r = r_new;
            rnorm = new_norm;
        } else {
            dtau = if dtau.is_finite() { dtau * 0.1 } else { 10.0 };
            r = fv.residual(&y, Some((&mut lo, &mut di, &mut up)));
        }
        if it + 1 == cfg.max_iterations {
            break;
        }
    }
    if rnorm <= cfg.tolerance {
        Ok((x, y))
    } else {
        Err(Error::NonlinearSolveFailure {
            residual: rnorm,
            iterations: cfg.max_iterations,
        })
    }
}

/// Linear interpolation root between the cell centers where y changes sign.
pub fn zero_crossing(x: &[f64], y: &[f64]) -> Result<f64> {
    for i in 0..y.len() - 1 {
        if y[i] > 0.0 && y[i + 1] <= 0.0 {
            return Ok(x[i] + (x[i + 1] - x[i]) * y[i] / (y[i] - y[i + 1]));
        }
    }
    Err(Error::NoSignChange)
}

/// x_0(delta): zero crossing of the finite-volume Burgers solution.
pub fn burgers_zero_crossing(cfg: &BurgersConfig, delta: f64) -> Result<f64> {
    let (x, y) = burgers_profile(cfg, delta)?;
    zero_crossing(&x, &y)
}

/// Zero crossing of the exact steady solution matching both boundary
/// values.
pub fn burgers_tanh_crossing(nu: f64, delta: f64) -> f64 {
    burgers_tanh_parameters(nu, delta).1
}

/// `(a, c)` of the exact steady solution `y = -a tanh(a (x - c) / (2 nu))`.
pub fn burgers_tanh_parameters(nu: f64, delta: f64) -> (f64, f64) {
    // With s = a - 1 > 0, the right boundary gives
    // c = 1 - 2 nu atanh(1/a) / a, atanh(1/a) = ln((2 + s) / s) / 2.
    let c_of = |s: f64| {
        let a = 1.0 + s;
        1.0 - nu * ((2.0 + s) / s).ln() / a
    };
    let g = |s: f64| {
        let a = 1.0 + s;
        a * (a * (1.0 + c_of(s)) / (2.0 * nu)).tanh() - (1.0 + delta)
    };
    let (mut lo, mut hi) = (1e-300f64, 1.0f64);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    // Geometric bisection first (s spans many decades), then arithmetic.
    for _ in 0..200 {
        let mid = if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 * hi {
            break;
        }
    }
    let s = 0.5 * (lo + hi);
    (1.0 + s, c_of(s))
}

/// The Burgers zero-crossing as a forward model on delta in `[lo, hi]`.
#[derive(Debug)]
pub struct BurgersModel {
    pub cfg: BurgersConfig,
    pub prior_box: Interval,
    counter: Counter,
}

impl BurgersModel {
    pub fn new(cfg: BurgersConfig, prior_box: Interval) -> Result<Self> {
        cfg.validate()?;
        if prior_box.lo < -0.5 || prior_box.hi > 0.5 {
            return Err(Error::InvalidInput(
                "Burgers delta must lie in [-0.5, 0.5]".into(),
            ));
        }
        Ok(BurgersModel {
            cfg,
            prior_box,
            counter: Counter::default(),
        })
    }
}

impl ForwardModel for BurgersModel {
    fn dim(&self) -> usize {
        1
    }
    fn domain(&self) -> BoundingBox {
        vec![self.prior_box]
    }
    fn cost(&self) -> Cost {
        Cost::ImplicitPde
    }
    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.counter.tick();
        burgers_zero_crossing(&self.cfg, theta[0])
            .map(|x| vec![x])
            .map_err(|e| Error::ForwardModelFailure {
                node: theta.to_vec(),
                message: e.to_string(),
            })
    }
    fn evaluations(&self) -> usize {
        self.counter.get()
    }
}

/// Writes a solution profile as `x,y` CSV.
pub fn write_profile<W: Write>(out: &mut W, x: &[f64], y: &[f64]) -> Result<()> {
    writeln!(out, "x,y")?;
    for (a, b) in x.iter().zip(y) {
        writeln!(out, "{a:.16e},{b:.16e}")?;
    }
    Ok(())
}

/// Output noise: `z_k = u(theta*) + eps_k`, `eps_k ~ N(0, sigma^2)`.
pub fn generate_data(
    model: &dyn ForwardModel,
    truth: &[f64],
    sigma: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let u = model.evaluate(truth)?[0];
    if sigma == 0.0 {
        return Ok(vec![u; n]);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| u + normal.sample(&mut rng)).collect())
}

/// Parameter noise: draw `theta_k ~ N(mean, sigma^2)` (redrawn until inside
/// `bx`) and record `u(theta_k)`.
pub fn generate_parameter_data(
    model: &dyn ForwardModel,
    mean: f64,
    sigma: f64,
    bx: Interval,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let normal = Normal::new(mean, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut t = normal.sample(&mut rng);
        let mut tries = 0;
        while !bx.contains(t) {
            t = normal.sample(&mut rng);
            tries += 1;
            if tries > 1_000_000 {
                return Err(Error::InvalidInput(
                    "truncation box has negligible mass".into(),
                ));
            }
        }
        out.push(model.evaluate(&[t])?[0]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        assert_eq!(gauss(&[0.5, 0.5]), 1.0);
        assert!((gauss(&[0.0]) - (-0.25f64).exp()).abs() < 1e-16);
        assert!((gauss(&[0.25; 3]) - (-3.0f64 / 16.0).exp()).abs() < 1e-16);
        assert_eq!(runge(&[0.5]), 2.5);
        assert!((runge(&[0.0]) - 5.0 / 14.5).abs() < 1e-16);
        assert!((runge(&[0.0, 1.0]) - 5.0 / 27.0).abs() < 1e-16);
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(std::f64::consts::PI).abs() < 1e-15);
        for t in [0.1, 1.3, 1e-9, 1.9] {
            assert_eq!(sinc(t), sinc(-t));
        }
    }

    #[test]
    fn counters_count_calls() {
        let m = runge_model(2);
        for _ in 0..7 {
            m.evaluate(&[0.1, 0.2]).unwrap();
        }
        assert_eq!(m.evaluations(), 7);
        m.value(&[0.3, 0.3]);
        assert_eq!(m.evaluations(), 7);
    }

    #[test]
    fn tanh_oracle_satisfies_boundary_conditions() {
        let nu = 0.1;
        for delta in [0.0, 0.02, 0.05, 0.1, -0.3] {
            let c = burgers_tanh_crossing(nu, delta);
            // Recover a from the right boundary and check the left.
            let mut lo = 1.0 + 1e-15;
            let mut hi = 10.0;
            for _ in 0..200 {
                let a = 0.5 * (lo + hi);
                if a * (a * (1.0 - c) / (2.0 * nu)).tanh() < 1.0 {
                    lo = a;
                } else {
                    hi = a;
                }
            }
            let a = 0.5 * (lo + hi);
            let left = a * (a * (1.0 + c) / (2.0 * nu)).tanh();
            assert!((left - (1.0 + delta)).abs() < 1e-9, "delta {delta}: {left}");
        }
        assert!(burgers_tanh_crossing(nu, 0.0).abs() < 1e-12);
        assert!(burgers_tanh_crossing(nu, 0.08) > burgers_tanh_crossing(nu, 0.02));
    }

    #[test]
    fn finite_volume_matches_oracle() {
        let cfg = BurgersConfig::default();
        let x0 = burgers_zero_crossing(&cfg, 0.0).unwrap();
        assert!(x0.abs() <= 2.0 / cfg.cells as f64);
        let a = burgers_zero_crossing(&cfg, 0.05).unwrap();
        let b = burgers_tanh_crossing(cfg.nu, 0.05);
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn burgers_is_second_order() {
        for delta in [0.02, 0.05, 0.08] {
            let x: Vec<f64> = [500, 2000, 8000]
                .iter()
                .map(|&cells| {
                    let cfg = BurgersConfig {
                        cells,
                        ..BurgersConfig::default()
                    };
                    burgers_zero_crossing(&cfg, delta).unwrap()
                })
                .collect();
            let (e1, e2) = ((x[0] - x[1]).abs(), (x[1] - x[2]).abs());
            assert!(e1 >= 3.0 * e2, "delta {delta}: {e1:e} then {e2:e}");
        }
    }

    #[test]
    fn burgers_matches_oracle_across_deltas() {
        let cfg = BurgersConfig::default();
        for k in 0..10 {
            let delta = 0.01 * k as f64 + 0.005;
            let a = burgers_zero_crossing(&cfg, delta).unwrap();
            let b = burgers_tanh_crossing(cfg.nu, delta);
            assert!((a - b).abs() < 1e-3, "delta {delta}: {a} vs {b}");
        }
    }

    #[test]
    fn data_recipes() {
        let m = gauss_model(1);
        let z = generate_data(&m, &[0.25], 0.0, 5, 1).unwrap();
        assert!(z.iter().all(|&v| v == gauss(&[0.25])));
        let a = generate_data(&m, &[0.25], 0.1, 20, 7).unwrap();
        let b = generate_data(&m, &[0.25], 0.1, 20, 7).unwrap();
        assert_eq!(a, b);
        let big = generate_data(&m, &[0.25], 0.1, 10_000, 3).unwrap();
        let mean = big.iter().sum::<f64>() / big.len() as f64;
        assert!((mean - gauss(&[0.25])).abs() < 3.0 * 0.1 / 100.0);
        let id = FnModel::new(
            vec![Interval::new(0.0, 0.1)],
            1,
            Cost::Explicit,
            |t: &[f64]| Ok(vec![t[0]]),
        );
        let p = generate_parameter_data(&id, 0.05, 0.05, Interval::new(0.0, 0.1), 500, 2).unwrap();
        assert!(p.iter().all(|&v| (0.0..=0.1).contains(&v)));
        assert_eq!(id.evaluations(), 500);
    }
}
