//! Nodal sequences: weighted Leja (univariate and multivariate) and
//! Clenshaw-Curtis reference nodes.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{better, halton, lex_cmp, linspace, scores_tie, BoundingBox, Interval};
use crate::error::{Error, Result};
use crate::polybasis::{Family1d, VandermondeQR};

/// A non-negative weighting function on R^d, evaluated in the log domain.
pub trait WeightFn {
    fn dim(&self) -> usize;

    /// ln w(x); `-inf` where w vanishes.
    fn ln_weight(&self, x: &[f64]) -> f64;

    /// Support of w. Unbounded axes have infinite ends.
    fn support(&self) -> BoundingBox;

    /// Finite box in which maximizers are sought. Defaults to the support,
    /// which then must be bounded.
    fn search_box(&self) -> BoundingBox {
        self.support()
    }

    /// First and second derivative of ln w (univariate only). `None` makes
    /// callers fall back to finite differences.
    fn ln_weight_derivs(&self, _x: f64) -> Option<(f64, f64)> {
        None
    }

    /// Global maximizer, smallest among ties, when known in closed form.
    fn mode(&self) -> Option<Vec<f64>> {
        None
    }

    /// Whether ln w is concave on the support.
    fn log_concave(&self) -> bool {
        false
    }

    fn weight(&self, x: &[f64]) -> f64 {
        self.ln_weight(x).exp()
    }
}

impl<W: WeightFn + ?Sized> WeightFn for &W {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn ln_weight(&self, x: &[f64]) -> f64 {
        (**self).ln_weight(x)
    }
    fn support(&self) -> BoundingBox {
        (**self).support()
    }
    fn search_box(&self) -> BoundingBox {
        (**self).search_box()
    }
    fn ln_weight_derivs(&self, x: f64) -> Option<(f64, f64)> {
        (**self).ln_weight_derivs(x)
    }
    fn mode(&self) -> Option<Vec<f64>> {
        (**self).mode()
    }
    fn log_concave(&self) -> bool {
        (**self).log_concave()
    }
}

/// `c * w` for a constant `c > 0`.
pub struct Scaled<W> {
    pub factor: f64,
    pub inner: W,
}

impl<W: WeightFn> WeightFn for Scaled<W> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn ln_weight(&self, x: &[f64]) -> f64 {
        self.inner.ln_weight(x) + self.factor.ln()
    }
    fn support(&self) -> BoundingBox {
        self.inner.support()
    }
    fn search_box(&self) -> BoundingBox {
        self.inner.search_box()
    }
    fn ln_weight_derivs(&self, x: f64) -> Option<(f64, f64)> {
        self.inner.ln_weight_derivs(x)
    }
    fn mode(&self) -> Option<Vec<f64>> {
        self.inner.mode()
    }
    fn log_concave(&self) -> bool {
        self.inner.log_concave()
    }
}

/// Weight given by a closure over a bounded box.
pub struct FnWeight<F> {
    pub bx: BoundingBox,
    pub ln_w: F,
}

impl<F: Fn(&[f64]) -> f64> WeightFn for FnWeight<F> {
    fn dim(&self) -> usize {
        self.bx.len()
    }
    fn ln_weight(&self, x: &[f64]) -> f64 {
        if crate::domain::box_contains(&self.bx, x) {
            (self.ln_w)(x)
        } else {
            f64::NEG_INFINITY
        }
    }
    fn support(&self) -> BoundingBox {
        self.bx.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    UnivariateLeja,
    MultivariateLeja,
    AdaptiveLeja,
    ClenshawCurtis,
}

/// Ordered nodes plus, for multivariate sequences, the Vandermonde state.
#[derive(Clone, Debug)]
pub struct NodalSequence {
    pub nodes: Vec<Vec<f64>>,
    pub kind: SequenceKind,
    pub seed: u64,
    pub qr: Option<VandermondeQR>,
}

impl NodalSequence {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.first().map_or(0, Vec::len)
    }

    /// Univariate node values.
    pub fn points_1d(&self) -> Vec<f64> {
        self.nodes.iter().map(|x| x[0]).collect()
    }

    /// CSV with one row per node, columns `x_1..x_d`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let d = self.dim().max(1);
        let header: Vec<String> = (1..=d).map(|k| format!("x_{k}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for x in &self.nodes {
            let row: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Knobs for sequence generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LejaSettings {
    /// Candidates per step in d >= 2.
    pub n_candidates: usize,
    /// Seed of the pseudo-random half of the candidates.
    pub seed: u64,
    /// Sign-change scan points per interval for weights that are not
    /// log-concave.
    pub subdivisions: usize,
    /// Best candidates refined by pattern search in d >= 2.
    pub polish: usize,
}

impl Default for LejaSettings {
    fn default() -> Self {
        LejaSettings {
            n_candidates: 20_000,
            seed: 0,
            subdivisions: 8,
            polish: 4,
        }
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    sum + c
}

fn numeric_ln_derivs(w: &dyn WeightFn, x: f64) -> (f64, f64) {
    let scale = x.abs().max(1.0);
    let h1 = 6e-6 * scale;
    let h2 = 1e-4 * scale;
    let f = |t: f64| w.ln_weight(&[t]);
    let (fp, fm) = (f(x + h1), f(x - h1));
    let d1 = if fp.is_finite() && fm.is_finite() {
        (fp - fm) / (2.0 * h1)
    } else {
        let f0 = f(x);
        if fp.is_finite() && f0.is_finite() {
            (fp - f0) / h1
        } else if fm.is_finite() && f0.is_finite() {
            (f0 - fm) / h1
        } else {
            0.0
        }
    };
    let (gp, g0, gm) = (f(x + h2), f(x), f(x - h2));
    let d2 = if gp.is_finite() && gm.is_finite() && g0.is_finite() {
        (gp - 2.0 * g0 + gm) / (h2 * h2)
    } else {
        0.0
    };
    (d1, d2)
}

/// ln w(x) + sum_k ln|x - x_k| and its derivatives.
struct Objective1d<'a> {
    w: &'a dyn WeightFn,
    nodes: &'a [f64],
}

impl Objective1d<'_> {
    fn value(&self, x: f64) -> f64 {
        let lw = self.w.ln_weight(&[x]);
        if lw == f64::NEG_INFINITY || self.nodes.contains(&x) {
            return f64::NEG_INFINITY;
        }
        lw + compensated_sum(self.nodes.iter().map(|&xk| (x - xk).abs().ln()))
    }

    fn ln_w_derivs(&self, x: f64) -> (f64, f64) {
        self.w
            .ln_weight_derivs(x)
            .unwrap_or_else(|| numeric_ln_derivs(self.w, x))
    }

    fn d1(&self, x: f64) -> f64 {
        self.d1d2(x).0
    }

    fn d1d2(&self, x: f64) -> (f64, f64) {
        let (mut g, mut h) = self.ln_w_derivs(x);
        for &xk in self.nodes {
            let r = 1.0 / (x - xk);
            g += r;
            h -= r * r;
        }
        (g, h)
    }
}

/// Safeguarded Newton for the zero of `f'` in (a, b), where f' > 0 at a and
/// f' < 0 at b.
fn rtsafe(obj: &Objective1d, mut a: f64, mut b: f64) -> Result<f64> {
    let (lo0, hi0) = (a, b);
    let mut x = 0.5 * (a + b);
    let mut dx_old = b - a;
    let mut dx = dx_old;
    let (mut g, mut h) = obj.d1d2(x);
    for _ in 0..200 {
        if !g.is_finite() {
            return Err(Error::ConvergenceFailure { lo: lo0, hi: hi0 });
        }
        if g.abs() < 1e-13 {
            return Ok(x);
        }
        if g > 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton_ok = h < 0.0 && {
            let xn = x - g / h;
            xn > a && xn < b && (2.0 * g).abs() <= (dx_old * h).abs()
        };
        dx_old = dx;
        if newton_ok {
            dx = -g / h;
            x += dx;
        } else {
            dx = 0.5 * (b - a);
            x = a + dx;
        }
        if dx.abs() < 1e-15 * x.abs().max(1e-300)
            || b - a <= 4.0 * f64::EPSILON * x.abs().max(1e-300)
        {
            return Ok(x);
        }
        (g, h) = obj.d1d2(x);
    }
    if b - a < 1e-10 * (hi0 - lo0) {
        Ok(x)
    } else {
        Err(Error::ConvergenceFailure { lo: lo0, hi: hi0 })
    }
}

/// Local maximizers of the objective inside [a, b]. `a_node`/`b_node` mark
/// ends that coincide with existing nodes (where f' is infinite).
fn interval_maxima(
    obj: &Objective1d,
    a: f64,
    b: f64,
    a_node: bool,
    b_node: bool,
    subdivisions: usize,
    out: &mut Vec<f64>,
) -> Result<()> {
    let slope_at = |x: f64, is_node: bool, left: bool| -> f64 {
        if is_node || obj.w.ln_weight(&[x]) == f64::NEG_INFINITY {
            if left {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        } else {
            obj.d1(x)
        }
    };
    let s = subdivisions.max(1);
    let mut xs = Vec::with_capacity(s + 1);
    let mut gs = Vec::with_capacity(s + 1);
    xs.push(a);
    gs.push(slope_at(a, a_node, true));
    for i in 1..s {
        let x = a + (b - a) * i as f64 / s as f64;
        xs.push(x);
        gs.push(obj.d1(x));
    }
    xs.push(b);
    gs.push(slope_at(b, b_node, false));
    for i in 0..s {
        if gs[i] > 0.0 && gs[i + 1] < 0.0 {
            out.push(rtsafe(obj, xs[i], xs[i + 1])?);
        } else if gs[i + 1] == 0.0 && i + 1 < s {
            out.push(xs[i + 1]);
        }
    }
    Ok(())
}

/// Expands from `anchor` in direction `dir` until the objective slopes back
/// towards the nodes.
fn tail_end(obj: &Objective1d, anchor: f64, start: f64, dir: f64) -> Result<f64> {
    let mut len = (start - anchor).abs().max(1.0);
    for _ in 0..80 {
        let x = anchor + dir * len;
        let g = obj.d1(x);
        if g * dir < 0.0 || obj.w.ln_weight(&[x]) == f64::NEG_INFINITY {
            return Ok(x);
        }
        len *= 2.0;
    }
    Err(Error::UnboundedSearch(format!(
        "objective still increasing at distance {len:e} from node {anchor}"
    )))
}

/// Next univariate weighted Leja node: the global maximizer of
/// `ln w(x) + sum_k ln|x - x_k|`, smallest x among ties.
pub fn next_node_1d(nodes: &[f64], w: &dyn WeightFn, subdivisions: usize) -> Result<f64> {
    assert_eq!(w.dim(), 1, "next_node_1d needs a univariate weight");
    assert!(!nodes.is_empty(), "next_node_1d needs at least one node");
    let obj = Objective1d { w, nodes };
    let support = w.support()[0];
    let search = w.search_box()[0];
    let s = if w.log_concave() { 1 } else { subdivisions };
    let mut sorted = nodes.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    let mut cands = Vec::new();
    let first = sorted[0];
    let last = *sorted.last().unwrap();

    // Lower tail.
    if support.lo < first {
        let a = if support.lo.is_finite() {
            cands.push(support.lo);
            support.lo
        } else {
            tail_end(&obj, first, search.lo.min(first - 1.0), -1.0)?
        };
        interval_maxima(&obj, a, first, false, true, s, &mut cands)?;
    }
    for pair in sorted.windows(2) {
        interval_maxima(&obj, pair[0], pair[1], true, true, s, &mut cands)?;
    }
    if support.hi > last {
        let b = if support.hi.is_finite() {
            cands.push(support.hi);
            support.hi
        } else {
            tail_end(&obj, last, search.hi.max(last + 1.0), 1.0)?
        };
        interval_maxima(&obj, last, b, true, false, s, &mut cands)?;
    }

    cands.sort_by(f64::total_cmp);
    let mut best_x = f64::NAN;
    let mut best_s = f64::NEG_INFINITY;
    for &x in &cands {
        let v = obj.value(x);
        if v > f64::NEG_INFINITY && (best_x.is_nan() || better(v, &[x], best_s, &[best_x])) {
            best_s = v;
            best_x = x;
        }
    }
    if best_x.is_nan() {
        return Err(Error::AllCandidatesSingular);
    }
    Ok(best_x)
}

/// Golden-section maximization of `f` on [a, b].
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 * (a.abs() + b.abs()).max(1e-300) {
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
        if b - a < 1e-300 {
            break;
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// First node of a sequence: the smallest global maximizer of w.
pub fn initial_node(w: &dyn WeightFn) -> Result<Vec<f64>> {
    if let Some(m) = w.mode() {
        return Ok(m);
    }
    let bx = w.search_box();
    if bx.iter().any(|iv| !iv.is_bounded()) {
        return Err(Error::UnboundedSearch("search box is not finite".into()));
    }
    if w.dim() == 1 {
        let iv = bx[0];
        let grid = linspace(iv.lo, iv.hi, 10_001);
        let mut best_i = usize::MAX;
        let mut best_s = f64::NEG_INFINITY;
        for (i, &x) in grid.iter().enumerate() {
            let s = w.ln_weight(&[x]);
            if s > f64::NEG_INFINITY
                && (best_i == usize::MAX || better(s, &[x], best_s, &[grid[best_i]]))
            {
                best_s = s;
                best_i = i;
            }
        }
        if best_i == usize::MAX {
            return Err(Error::UnboundedSearch(
                "weight vanishes on the search grid".into(),
            ));
        }
        let a = grid[best_i.saturating_sub(1)];
        let b = grid[(best_i + 1).min(grid.len() - 1)];
        let x = golden_max(|t| w.ln_weight(&[t]), a, b);
        let x = if w.ln_weight(&[x]) > best_s {
            x
        } else {
            grid[best_i]
        };
        return Ok(vec![x]);
    }
    let cands = candidates(&bx, 20_000, 0, 0);
    let scored: Vec<f64> = cands.iter().map(|x| w.ln_weight(x)).collect();
    let score = |x: &[f64]| w.ln_weight(x);
    select_polished(&bx, &cands, &scored, 4, &score)
        .ok_or_else(|| Error::UnboundedSearch("weight vanishes on every candidate".into()))
}

/// Candidate points for step `step`: box corners, then Halton and
/// pseudo-random points in equal shares.
fn candidates(bx: &[Interval], n: usize, seed: u64, step: u64) -> Vec<Vec<f64>> {
    let d = bx.len();
    let mut out = Vec::with_capacity(n + (1 << d.min(10)));
    if d <= 10 {
        for mask in 0..(1usize << d) {
            out.push(
                bx.iter()
                    .enumerate()
                    .map(|(k, iv)| if mask >> k & 1 == 1 { iv.hi } else { iv.lo })
                    .collect(),
            );
        }
    }
    let n_halton = n.div_ceil(2);
    let start = 1 + step * n_halton as u64;
    for i in 0..n_halton as u64 {
        let h = halton(start + i, d);
        out.push(h.iter().zip(bx).map(|(&t, iv)| iv.from_unit(t)).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for _ in 0..n - n_halton {
        out.push(
            bx.iter()
                .map(|iv| iv.from_unit(rng.random::<f64>()))
                .collect(),
        );
    }
    out
}

/// Compass search from `x0` maximizing `score` within the box.
fn polish(bx: &[Interval], x0: &[f64], s0: f64, score: &dyn Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut s = s0;
    let mut steps: Vec<f64> = bx.iter().map(|iv| 0.02 * iv.width()).collect();
    let floor: Vec<f64> = bx.iter().map(|iv| 1e-10 * iv.width()).collect();
    for _ in 0..2000 {
        let mut moved = false;
        for k in 0..x.len() {
            for dir in [-1.0, 1.0] {
                let mut y = x.clone();
                y[k] = bx[k].clamp(x[k] + dir * steps[k]);
                if y[k] == x[k] {
                    continue;
                }
                let sy = score(&y);
                // Gains inside the tie resolution are rounding noise and
                // would make the path depend on the weight's scale.
                if sy > s && !scores_tie(sy, s) {
                    x = y;
                    s = sy;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            let mut done = true;
            for (st, fl) in steps.iter_mut().zip(&floor) {
                *st *= 0.5;
                done &= *st < *fl;
            }
            if done {
                break;
            }
        }
    }
    (x, s)
}

/// Picks the best candidate after polishing the top `k` well-separated ones.
fn select_polished(
    bx: &[Interval],
    cands: &[Vec<f64>],
    scores: &[f64],
    k: usize,
    score: &dyn Fn(&[f64]) -> f64,
) -> Option<Vec<f64>> {
    let mut order: Vec<usize> = (0..cands.len())
        .filter(|&i| scores[i] > f64::NEG_INFINITY)
        .collect();
    if order.is_empty() {
        return None;
    }
    order.sort_by(|&i, &j| {
        scores[j]
            .total_cmp(&scores[i])
            .then_with(|| lex_cmp(&cands[i], &cands[j]))
    });
    // Among scores tied with the top one, the lexicographically smallest
    // point leads.
    let mut lead = 0;
    for (pos, &i) in order.iter().enumerate().skip(1) {
        if !scores_tie(scores[i], scores[order[0]]) {
            break;
        }
        if lex_cmp(&cands[i], &cands[order[lead]]) == std::cmp::Ordering::Less {
            lead = pos;
        }
    }
    order[..=lead].rotate_right(1);
    let sep: Vec<f64> = bx.iter().map(|iv| 0.05 * iv.width()).collect();
    let mut starts: Vec<usize> = Vec::new();
    for &i in &order {
        if starts.len() >= k.max(1) {
            break;
        }
        let far = starts.iter().all(|&j| {
            cands[i]
                .iter()
                .zip(&cands[j])
                .zip(&sep)
                .any(|((a, b), s)| (a - b).abs() > *s)
        });
        if far {
            starts.push(i);
        }
    }
    let (mut best_x, mut best_s) = (cands[order[0]].clone(), scores[order[0]]);
    for &i in &starts {
        let (x, s) = if k == 0 {
            (cands[i].clone(), scores[i])
        } else {
            polish(bx, &cands[i], scores[i], score)
        };
        if better(s, &x, best_s, &best_x) {
            best_x = x;
            best_s = s;
        }
    }
    Some(best_x)
}

/// Next multivariate weighted Leja node, maximizing
/// `ln w(x) + ln|det V(x_0, .., x_N, x)|` over sampled candidates.
pub fn next_node_nd(
    qr: &VandermondeQR,
    w: &dyn WeightFn,
    settings: &LejaSettings,
    step: u64,
) -> Result<Vec<f64>> {
    let bx = w.search_box();
    let cands = candidates(&bx, settings.n_candidates.max(1), settings.seed, step);
    next_node_from_candidates(qr, w, &bx, &cands, settings.polish)
}

/// Like [`next_node_nd`] with an explicit candidate set.
pub fn next_node_from_candidates(
    qr: &VandermondeQR,
    w: &dyn WeightFn,
    bx: &[Interval],
    cands: &[Vec<f64>],
    polish_count: usize,
) -> Result<Vec<f64>> {
    let mut a = vec![0.0; qr.extended_basis().len()];
    let mut table = Vec::new();
    let mut scores = Vec::with_capacity(cands.len());
    for x in cands {
        let lw = w.ln_weight(x);
        scores.push(if lw == f64::NEG_INFINITY {
            lw
        } else {
            lw + qr.candidate_logdet_with(x, &mut a, &mut table)
        });
    }
    let score = |x: &[f64]| {
        let lw = w.ln_weight(x);
        if lw == f64::NEG_INFINITY {
            lw
        } else {
            lw + qr.candidate_logdet(x)
        }
    };
    select_polished(bx, cands, &scores, polish_count, &score).ok_or(Error::AllCandidatesSingular)
}

/// Default polynomial families for a weight: Legendre on bounded axes,
/// Hermite scaled to the search box on unbounded ones.
pub fn families_for(w: &dyn WeightFn) -> Vec<Family1d> {
    w.support()
        .iter()
        .zip(w.search_box())
        .map(|(iv, sb)| Family1d::for_interval(*iv, 0.5 * (sb.lo + sb.hi), 0.5 * sb.width() / 4.0))
        .collect()
}

/// Weighted Leja sequence of `count` nodes.
pub fn generate_sequence(
    w: &dyn WeightFn,
    count: usize,
    settings: &LejaSettings,
) -> Result<NodalSequence> {
    assert!(count >= 1, "generate_sequence needs count >= 1");
    let x0 = initial_node(w)?;
    if w.dim() == 1 {
        let mut pts = vec![x0[0]];
        while pts.len() < count {
            let n = pts.len();
            let x = next_node_1d(&pts, w, settings.subdivisions).map_err(|e| {
                Error::NodeSelectionFailure {
                    n,
                    source: Box::new(e),
                }
            })?;
            pts.push(x);
        }
        return Ok(NodalSequence {
            nodes: pts.into_iter().map(|x| vec![x]).collect(),
            kind: SequenceKind::UnivariateLeja,
            seed: settings.seed,
            qr: None,
        });
    }
    let mut qr = VandermondeQR::new(families_for(w));
    qr.push(&x0)?;
    while qr.len() < count {
        let n = qr.len();
        next_node_nd(&qr, w, settings, n as u64)
            .and_then(|x| qr.push(&x))
            .map_err(|e| Error::NodeSelectionFailure {
                n,
                source: Box::new(e),
            })?;
    }
    Ok(NodalSequence {
        nodes: qr.nodes().to_vec(),
        kind: SequenceKind::MultivariateLeja,
        seed: settings.seed,
        qr: Some(qr),
    })
}

/// Clenshaw-Curtis (Chebyshev extrema) nodes on `iv`, ascending.
pub fn clenshaw_curtis(count: usize, iv: Interval) -> NodalSequence {
    assert!(count >= 1, "clenshaw_curtis needs count >= 1");
    let pts: Vec<f64> = if count == 1 {
        vec![0.5 * (iv.lo + iv.hi)]
    } else {
        let m = (count - 1) as f64;
        (0..count)
            .map(|k| {
                let t = (std::f64::consts::PI * (2.0 * k as f64 - m) / (2.0 * m)).sin();
                match k {
                    0 => iv.lo,
                    _ if k == count - 1 => iv.hi,
                    _ => 0.5 * (iv.lo + iv.hi) + 0.5 * (iv.hi - iv.lo) * t,
                }
            })
            .collect()
    };
    NodalSequence {
        nodes: pts.into_iter().map(|x| vec![x]).collect(),
        kind: SequenceKind::ClenshawCurtis,
        seed: 0,
        qr: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Uniform(f64, f64);
    impl WeightFn for Uniform {
        fn dim(&self) -> usize {
            1
        }
        fn ln_weight(&self, x: &[f64]) -> f64 {
            if x[0] >= self.0 && x[0] <= self.1 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        fn support(&self) -> BoundingBox {
            vec![Interval::new(self.0, self.1)]
        }
    }

    struct StdNormal;
    impl WeightFn for StdNormal {
        fn dim(&self) -> usize {
            1
        }
        fn ln_weight(&self, x: &[f64]) -> f64 {
            -0.5 * x[0] * x[0]
        }
        fn support(&self) -> BoundingBox {
            vec![Interval::new(f64::NEG_INFINITY, f64::INFINITY)]
        }
        fn search_box(&self) -> BoundingBox {
            vec![Interval::new(-9.0, 9.0)]
        }
    }

    // Brute-force maximization of the Leja objective on a fine grid.
    fn grid_argmax(nodes: &[f64], ln_w: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let mut best = (f64::NEG_INFINITY, lo);
        for i in 0..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let v = ln_w(x) + nodes.iter().map(|&k| (x - k).abs().ln()).sum::<f64>();
            if v > best.0 + 1e-12 {
                best = (v, x);
            }
        }
        best.1
    }

    #[test]
    fn uniform_first_nodes() {
        let w = Uniform(-1.0, 1.0);
        assert_eq!(initial_node(&w).unwrap(), vec![-1.0]);
        assert_eq!(next_node_1d(&[-1.0], &w, 8).unwrap(), 1.0);
        assert!(next_node_1d(&[-1.0, 1.0], &w, 8).unwrap().abs() < 1e-12);
        let x = next_node_1d(&[-1.0, 1.0, 0.0], &w, 8).unwrap();
        assert!((x + 1.0 / 3f64.sqrt()).abs() < 1e-10, "{x}");
    }

    #[test]
    fn uniform_matches_grid_oracle() {
        let w = Uniform(-1.0, 1.0);
        let mut nodes = vec![-1.0];
        for _ in 0..6 {
            let x = next_node_1d(&nodes, &w, 8).unwrap();
            let g = grid_argmax(&nodes, |_| 0.0, -1.0, 1.0, 200_001);
            assert!((x - g).abs() < 2e-5, "{x} vs {g}");
            nodes.push(x);
        }
    }

    #[test]
    fn normal_second_node_is_minus_one() {
        let w = StdNormal;
        let x = next_node_1d(&[0.0], &w, 8).unwrap();
        assert!((x + 1.0).abs() < 1e-9, "{x}");
    }

    #[test]
    fn normal_tails_expand_past_search_box() {
        struct Narrow;
        impl WeightFn for Narrow {
            fn dim(&self) -> usize {
                1
            }
            fn ln_weight(&self, x: &[f64]) -> f64 {
                -0.5 * x[0] * x[0]
            }
            fn support(&self) -> BoundingBox {
                vec![Interval::new(f64::NEG_INFINITY, f64::INFINITY)]
            }
            fn search_box(&self) -> BoundingBox {
                vec![Interval::new(-0.5, 0.5)]
            }
            fn mode(&self) -> Option<Vec<f64>> {
                Some(vec![0.0])
            }
        }
        let seq = generate_sequence(&Narrow, 3, &LejaSettings::default()).unwrap();
        assert_eq!(seq.nodes[0], vec![0.0]);
        assert!((seq.nodes[1][0] + 1.0).abs() < 1e-9);
        assert!(seq.nodes[2][0] > 1.0);
    }

    #[test]
    fn clenshaw_curtis_nodes() {
        let s = clenshaw_curtis(3, Interval::new(-1.0, 1.0)).points_1d();
        assert_eq!(s, vec![-1.0, 0.0, 1.0]);
        let s = clenshaw_curtis(2, Interval::new(0.0, 0.1)).points_1d();
        assert_eq!(s, vec![0.0, 0.1]);
        let s = clenshaw_curtis(5, Interval::new(-1.0, 1.0)).points_1d();
        let h = 0.5f64.sqrt();
        for (a, b) in s.iter().zip([-1.0, -h, 0.0, h, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(
            clenshaw_curtis(1, Interval::new(0.0, 1.0)).points_1d(),
            vec![0.5]
        );
    }

    #[test]
    fn nd_path_agrees_with_newton_in_1d() {
        let w = Uniform(-1.0, 1.0);
        let settings = LejaSettings {
            n_candidates: 2000,
            ..Default::default()
        };
        let mut qr = VandermondeQR::new(vec![Family1d::Legendre { lo: -1.0, hi: 1.0 }]);
        let mut pts = vec![-1.0];
        qr.push(&[-1.0]).unwrap();
        for step in 1..10 {
            let a = next_node_1d(&pts, &w, 8).unwrap();
            let b = next_node_nd(&qr, &w, &settings, step).unwrap()[0];
            assert!((a - b).abs() < 1e-3, "step {step}: {a} vs {b}");
            pts.push(a);
            qr.push(&[a]).unwrap();
        }
    }

    #[test]
    fn duplicate_candidates_are_singular() {
        let w = Uniform(-1.0, 1.0);
        let mut qr = VandermondeQR::new(vec![Family1d::Legendre { lo: -1.0, hi: 1.0 }]);
        qr.push(&[-1.0]).unwrap();
        qr.push(&[1.0]).unwrap();
        let cands = vec![vec![-1.0], vec![1.0], vec![-1.0]];
        let r = next_node_from_candidates(&qr, &w, &w.support(), &cands, 0);
        assert!(matches!(r, Err(Error::AllCandidatesSingular)));
    }

    #[test]
    fn csv_has_full_precision() {
        let s = clenshaw_curtis(3, Interval::new(0.0, 1.0));
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("x_1"));
        assert_eq!(text.lines().nth(2), Some("5.0000000000000000e-1"));
    }
}
