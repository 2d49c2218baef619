//! Parameter-space boxes, low-discrepancy points and audit grids.

use serde::{Deserialize, Serialize};

/// Closed interval; either end may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Maps `t` in [0, 1] affinely onto the interval.
    pub fn from_unit(&self, t: f64) -> f64 {
        self.lo + t * (self.hi - self.lo)
    }
}

/// Axis-aligned box in R^d.
pub type BoundingBox = Vec<Interval>;

pub fn box_contains(bx: &[Interval], x: &[f64]) -> bool {
    bx.iter().zip(x).all(|(iv, &xi)| iv.contains(xi))
}

pub fn box_volume(bx: &[Interval]) -> f64 {
    bx.iter().map(Interval::width).product()
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in the given base.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Point `index` of the Halton sequence in [0, 1)^d.
///
/// Panics for `d > 16`.
pub fn halton(index: u64, d: usize) -> Vec<f64> {
    assert!(d <= PRIMES.len(), "halton supports at most 16 dimensions");
    PRIMES[..d]
        .iter()
        .map(|&b| radical_inverse(index, b))
        .collect()
}

/// Halton points `start..start+count` mapped onto a finite box.
pub fn halton_in_box(bx: &[Interval], start: u64, count: usize) -> Vec<Vec<f64>> {
    (0..count as u64)
        .map(|i| {
            halton(start + i, bx.len())
                .into_iter()
                .zip(bx)
                .map(|(t, iv)| iv.from_unit(t))
                .collect()
        })
        .collect()
}

/// Uniform grid of `n` points including both ends.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
            v[n - 1] = hi;
            v
        }
    }
}

/// Tensor grid with `per_dim` points per axis.
pub fn tensor_grid(bx: &[Interval], per_dim: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = bx
        .iter()
        .map(|iv| linspace(iv.lo, iv.hi, per_dim))
        .collect();
    let total = per_dim.pow(bx.len() as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; bx.len()];
    for _ in 0..total {
        out.push(idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect());
        for k in 0..idx.len() {
            idx[k] += 1;
            if idx[k] < per_dim {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// Audit grid for sup-norm estimates: 10^3 points per axis for d <= 2,
/// 10^5 Halton points otherwise.
pub fn audit_grid(bx: &[Interval]) -> Vec<Vec<f64>> {
    if bx.len() <= 2 {
        tensor_grid(bx, 1000)
    } else {
        halton_in_box(bx, 1, 100_000)
    }
}

/// Lexicographic comparison of two points.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// True when two log-scores are equal at the tie resolution. The window is
/// absolute in the log domain, i.e. relative in the weighted determinant,
/// so a constant factor on the weight does not move it.
pub(crate) fn scores_tie(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    (a - b).abs() <= 1e-12
}

/// Is candidate (score `s`, point `x`) better than the incumbent? Ties go
/// to the lexicographically smaller point.
pub(crate) fn better(s: f64, x: &[f64], best_s: f64, best_x: &[f64]) -> bool {
    if scores_tie(s, best_s) {
        lex_cmp(x, best_x) == std::cmp::Ordering::Less
    } else {
        s > best_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base_two_starts_at_half() {
        assert_eq!(halton(1, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn tensor_grid_covers_corners() {
        let bx = vec![Interval::new(0.0, 1.0), Interval::new(-1.0, 1.0)];
        let g = tensor_grid(&bx, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, -1.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
    }

    #[test]
    fn ties_prefer_smaller_point() {
        assert!(better(1.0, &[-0.5], 1.0 + 1e-15, &[0.5]));
        assert!(!better(1.0, &[0.5], 1.0, &[-0.5]));
        assert!(better(2.0, &[0.5], 1.0, &[-0.5]));
    }
}
