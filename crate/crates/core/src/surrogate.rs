//! Interpolating polynomial surrogates.
//!
//! Univariate surrogates use the barycentric form; multivariate ones solve
//! the Vandermonde system for coefficients in the tensor Legendre/Hermite
//! basis. Either can be written to and reloaded from a JSON file.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::BoundingBox;
use crate::error::{Error, Result};
use crate::nodes::WeightFn;
use crate::polybasis::{assemble_vandermonde, Basis, Family1d};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Representation {
    /// Barycentric weights, normalized to unit maximum modulus; the true
    /// weights are `weights * exp(ln_scale)`.
    Barycentric {
        weights: Vec<f64>,
        #[serde(default)]
        ln_scale: f64,
    },
    /// Coefficients with respect to the grevlex-ordered basis.
    Coefficients {
        basis: Basis,
        coefficients: Vec<f64>,
    },
}

/// Interpolant u_N of a scalar model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    format_version: u32,
    dimension: usize,
    #[serde(rename = "box")]
    bx: BoundingBox,
    ordering: String,
    nodes: Vec<Vec<f64>>,
    values: Vec<f64>,
    representation: Representation,
}

/// Barycentric weights computed in the log domain, scaled so that the
/// largest has modulus one.
pub fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    scaled_barycentric_weights(x).0
}

/// Normalized barycentric weights and the log of the removed scale.
pub fn scaled_barycentric_weights(x: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len();
    let mut logs = vec![0.0; n];
    let mut signs = vec![1.0; n];
    for k in 0..n {
        let mut l = 0.0;
        let mut s = 1.0;
        for j in 0..n {
            if j != k {
                let d = x[k] - x[j];
                l -= d.abs().ln();
                if d < 0.0 {
                    s = -s;
                }
            }
        }
        logs[k] = l;
        signs[k] = s;
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = logs
        .iter()
        .zip(&signs)
        .map(|(l, s)| s * (l - m).exp())
        .collect();
    (w, m)
}

fn check_nodes(nodes: &[Vec<f64>], values: &[f64]) -> Result<usize> {
    if nodes.is_empty() {
        return Err(Error::InvalidInput(
            "surrogate needs at least one node".into(),
        ));
    }
    if nodes.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} nodes but {} values",
            nodes.len(),
            values.len()
        )));
    }
    let d = nodes[0].len();
    if nodes.iter().any(|x| x.len() != d) {
        return Err(Error::InvalidInput("nodes have mixed dimensions".into()));
    }
    Ok(d)
}

fn solve_coefficients(basis: &Basis, nodes: &[Vec<f64>], values: &[f64]) -> Result<Vec<f64>> {
    let v = assemble_vandermonde(basis, nodes);
    let qr = v.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows()).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * max) {
        return Err(Error::SingularMatrix(format!(
            "Vandermonde system is rank deficient (|R_ii| ratio {:e})",
            min / max
        )));
    }
    let rhs = DVector::from_column_slice(values);
    let c = qr
        .solve(&rhs)
        .ok_or_else(|| Error::SingularMatrix("QR solve failed".into()))?;
    Ok(c.iter().copied().collect())
}

impl Surrogate {
    /// Builds the interpolant; barycentric in 1D, coefficients otherwise.
    pub fn build(
        nodes: &[Vec<f64>],
        values: &[f64],
        families: &[Family1d],
        bx: &BoundingBox,
    ) -> Result<Self> {
        let d = check_nodes(nodes, values)?;
        if d == 1 {
            let x: Vec<f64> = nodes.iter().map(|p| p[0]).collect();
            let mut sorted = x.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::SingularMatrix("repeated univariate node".into()));
            }
            let (weights, ln_scale) = scaled_barycentric_weights(&x);
            Ok(Surrogate::assemble(
                d,
                bx,
                nodes,
                values,
                Representation::Barycentric { weights, ln_scale },
            ))
        } else {
            Surrogate::build_coefficients(nodes, values, families, bx)
        }
    }

    /// Coefficient form in any dimension (used in 1D as a cross-check).
    pub fn build_coefficients(
        nodes: &[Vec<f64>],
        values: &[f64],
        families: &[Family1d],
        bx: &BoundingBox,
    ) -> Result<Self> {
        let d = check_nodes(nodes, values)?;
        assert_eq!(families.len(), d, "one family per dimension");
        let basis = Basis::new(families.to_vec(), nodes.len());
        let coefficients = solve_coefficients(&basis, nodes, values)?;
        Ok(Surrogate::assemble(
            d,
            bx,
            nodes,
            values,
            Representation::Coefficients {
                basis,
                coefficients,
            },
        ))
    }

    fn assemble(
        d: usize,
        bx: &BoundingBox,
        nodes: &[Vec<f64>],
        values: &[f64],
        representation: Representation,
    ) -> Self {
        Surrogate {
            format_version: FORMAT_VERSION,
            dimension: d,
            bx: bx.clone(),
            ordering: "grevlex".into(),
            nodes: nodes.to_vec(),
            values: values.to_vec(),
            representation,
        }
    }

    pub fn dim(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounding_box(&self) -> &BoundingBox {
        &self.bx
    }

    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    /// u_N(x). Points outside the box are extrapolated.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match &self.representation {
            Representation::Barycentric { weights, ln_scale } => {
                let t = x[0];
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for node in &self.nodes {
                    lo = lo.min(node[0]);
                    hi = hi.max(node[0]);
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for (k, (node, lam)) in self.nodes.iter().zip(weights).enumerate() {
                    let diff = t - node[0];
                    if diff.abs() <= 1e-14 * node[0].abs().max(1.0) {
                        return self.values[k];
                    }
                    let c = lam / diff;
                    num += c * self.values[k];
                    den += c;
                }
                if t >= lo && t <= hi {
                    return num / den;
                }
                // Outside the hull the denominator cancels; use the first
                // form l(t) * sum lam_k f_k / (t - x_k) instead.
                let ln_l: f64 = self.nodes.iter().map(|node| (t - node[0]).abs().ln()).sum();
                let sign = if t < lo && self.nodes.len() % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                sign * (ln_l + ln_scale).exp() * num
            }
            Representation::Coefficients {
                basis,
                coefficients,
            } => {
                let phi = basis.eval(x);
                phi.iter().zip(coefficients).map(|(p, c)| p * c).sum()
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: Surrogate = serde_json::from_str(&text)?;
        if s.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "surrogate format version {} (expected {FORMAT_VERSION})",
                s.format_version
            )));
        }
        if s.nodes.len() != s.values.len() || s.nodes.iter().any(|x| x.len() != s.dimension) {
            return Err(Error::Format("surrogate nodes and values disagree".into()));
        }
        Ok(s)
    }
}

/// One surrogate per model output, all on the same nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiSurrogate {
    pub components: Vec<Surrogate>,
}

impl MultiSurrogate {
    /// `values[k]` holds every model output at node `k`.
    pub fn build(
        nodes: &[Vec<f64>],
        values: &[Vec<f64>],
        families: &[Family1d],
        bx: &BoundingBox,
    ) -> Result<Self> {
        let m = values.first().map_or(0, Vec::len);
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidInput(
                "model outputs have mixed lengths".into(),
            ));
        }
        let components = (0..m)
            .map(|j| {
                let col: Vec<f64> = values.iter().map(|v| v[j]).collect();
                Surrogate::build(nodes, &col, families, bx)
            })
            .collect::<Result<_>>()?;
        Ok(MultiSurrogate { components })
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|s| s.evaluate(x)).collect()
    }

    pub fn n_outputs(&self) -> usize {
        self.components.len()
    }
}

/// max over the grid of w(x) |u_N(x) - u(x)|.
pub fn sup_error(
    s: &Surrogate,
    truth: impl Fn(&[f64]) -> f64,
    weight: &dyn WeightFn,
    grid: &[Vec<f64>],
) -> f64 {
    grid.iter()
        .map(|x| {
            let w = weight.weight(x);
            if w == 0.0 {
                0.0
            } else {
                w * (s.evaluate(x) - truth(x)).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Dense Vandermonde of the surrogate's own basis, handy for diagnostics.
pub fn vandermonde_of(s: &Surrogate) -> Option<DMatrix<f64>> {
    match &s.representation {
        Representation::Coefficients { basis, .. } => Some(assemble_vandermonde(basis, &s.nodes)),
        Representation::Barycentric { .. } => None,
    }
}
