//! The adaptive calibration loop: interpolate, form the approximate
//! posterior, derive the adaptive weight, pick the next Leja node, evaluate
//! the forward model, repeat.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::kl_from_tables;
use crate::domain::{audit_grid, halton_in_box, tensor_grid, BoundingBox};
use crate::error::{Error, Result};
use crate::nodes::{
    clenshaw_curtis, families_for, generate_sequence, initial_node, next_node_1d, next_node_nd,
    LejaSettings, WeightFn,
};
use crate::polybasis::{Family1d, VandermondeQR};
use crate::statmodel::{
    AdaptiveWeight, Likelihood, PosteriorEval, PosteriorTable, Prior, Quadrature, Source,
};
use crate::surrogate::MultiSurrogate;
use crate::testmodels::ForwardModel;

pub const ZETA_MIN: f64 = 1e-8;
pub const ZETA_MAX: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChangeMetric {
    SupNormPosteriorChange,
    KlBetweenConsecutive,
}

/// Stop once `window` consecutive changes are below `tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceCriterion {
    pub metric: ChangeMetric,
    pub tolerance: f64,
    pub window: usize,
    /// Nodes required before convergence may be declared. Defaults to the
    /// size of the total-degree-2 space, (d+1)(d+2)/2: symmetric starting
    /// nodes can return equal values and leave the surrogate constant, which
    /// reads as zero change.
    pub min_nodes: Option<usize>,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        ConvergenceCriterion {
            metric: ChangeMetric::SupNormPosteriorChange,
            tolerance: 1e-6,
            window: 2,
            min_nodes: None,
        }
    }
}

impl ConvergenceCriterion {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.window < 1 {
            return Err(Error::InvalidInput(format!(
                "criterion needs tolerance > 0 and window >= 1, got {} and {}",
                self.tolerance, self.window
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub zeta0: f64,
    /// Adapt zeta between iterations by the factor `k`.
    pub schedule: bool,
    pub k: f64,
    /// Maximum number of model evaluations.
    pub budget: usize,
    pub criterion: ConvergenceCriterion,
    /// Run to the budget even after the criterion is met.
    pub exhaust_budget: bool,
    pub seed: u64,
    pub leja: LejaSettings,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            zeta0: 1e-3,
            schedule: false,
            k: 2.0,
            budget: 30,
            criterion: ConvergenceCriterion::default(),
            exhaust_budget: false,
            seed: 0,
            leja: LejaSettings::default(),
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget < 2 {
            return Err(Error::InvalidInput(format!(
                "budget must be at least 2, got {}",
                self.budget
            )));
        }
        if !(self.zeta0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "zeta must be positive, got {}",
                self.zeta0
            )));
        }
        if self.schedule && !(self.k > 1.0) {
            return Err(Error::InvalidInput(format!(
                "schedule factor k must exceed 1, got {}",
                self.k
            )));
        }
        self.criterion.validate()
    }
}

/// One iteration: the node added, its model value and the resulting change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub node: Vec<f64>,
    pub value: Vec<f64>,
    /// Change between the posteriors with n - 1 and n nodes.
    pub change: Option<f64>,
    /// zeta used to select this node.
    pub zeta: f64,
    pub wall_time: f64,
}

impl IterationRecord {
    /// Equality ignoring wall time.
    pub fn same_as(&self, other: &Self) -> bool {
        self.n == other.n
            && self.node == other.node
            && self.value == other.value
            && self.change.map(f64::to_bits) == other.change.map(f64::to_bits)
            && self.zeta.to_bits() == other.zeta.to_bits()
    }
}

pub struct CalibrationState {
    pub surrogate: MultiSurrogate,
    pub zeta: f64,
    pub history: Vec<IterationRecord>,
    pub budget: usize,
    pub converged: bool,
    pub families: Vec<Family1d>,
    pub cache: EvaluationCache,
}

impl CalibrationState {
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        self.history.iter().map(|r| r.node.clone()).collect()
    }

    pub fn values(&self) -> Vec<Vec<f64>> {
        self.history.iter().map(|r| r.value.clone()).collect()
    }

    /// Posterior of the final surrogate.
    pub fn posterior<'a>(&'a self, prior: &'a Prior, lik: &'a Likelihood) -> PosteriorEval<'a> {
        PosteriorEval::of_surrogate(prior, lik, &self.surrogate)
    }
}

/// Forward-model results keyed by the exact bits of the node.
#[derive(Clone, Debug, Default)]
pub struct EvaluationCache {
    map: HashMap<Vec<u64>, Vec<f64>>,
    pub hits: usize,
    pub misses: usize,
}

impl EvaluationCache {
    pub fn get_or_eval(&mut self, model: &dyn ForwardModel, x: &[f64]) -> Result<Vec<f64>> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(v) = self.map.get(&key) {
            self.hits += 1;
            return Ok(v.clone());
        }
        self.misses += 1;
        let v = model.evaluate(x).map_err(|e| match e {
            Error::ForwardModelFailure { .. } => e,
            other => Error::ForwardModelFailure {
                node: x.to_vec(),
                message: other.to_string(),
            },
        })?;
        self.map.insert(key, v.clone());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Multiply zeta by k if the error increased, divide otherwise, clamped.
pub fn zeta_schedule_step(zeta: f64, error_increased: bool, k: f64) -> f64 {
    assert!(k > 1.0, "zeta schedule needs k > 1");
    let z = if error_increased { zeta * k } else { zeta / k };
    z.clamp(ZETA_MIN, ZETA_MAX)
}

/// Grid on which consecutive posteriors are compared: 1000 points for
/// d = 1, 100 per axis for d = 2, 10^4 Halton points beyond.
pub fn change_grid(bx: &[crate::domain::Interval]) -> Vec<Vec<f64>> {
    match bx.len() {
        1 => audit_grid(bx),
        2 => tensor_grid(bx, 100),
        _ => halton_in_box(bx, 1, 10_000),
    }
}

/// Posterior values on a grid, each normalized by its own grid sum.
fn grid_normalized(pe: &PosteriorEval, grid: &[Vec<f64>]) -> Vec<f64> {
    let logs: Vec<f64> = grid.iter().map(|x| pe.ln_density(x)).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![0.0; grid.len()];
    }
    let v: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// sup over the grid of |prev - curr| after normalizing each by its grid sum.
pub fn posterior_change(prev: &PosteriorEval, curr: &PosteriorEval, grid: &[Vec<f64>]) -> f64 {
    let a = grid_normalized(prev, grid);
    let b = grid_normalized(curr, grid);
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn evaluate_node(
    cache: &mut EvaluationCache,
    model: &dyn ForwardModel,
    x: &[f64],
) -> Result<Vec<f64>> {
    cache.get_or_eval(model, x)
}

/// Runs the adaptive loop until the criterion holds or the budget is spent.
pub fn run_calibration(
    model: &dyn ForwardModel,
    prior: &Prior,
    lik: &Likelihood,
    cfg: &CalibrationConfig,
) -> Result<CalibrationState> {
    run_calibration_with(model, prior, lik, cfg, |_| {})
}

/// [`run_calibration`] with a callback invoked after every iteration.
pub fn run_calibration_with(
    model: &dyn ForwardModel,
    prior: &Prior,
    lik: &Likelihood,
    cfg: &CalibrationConfig,
    mut on_iteration: impl FnMut(&IterationRecord),
) -> Result<CalibrationState> {
    cfg.validate()?;
    let d = prior.dim();
    if model.dim() != d {
        return Err(Error::InvalidInput(format!(
            "model dimension {} but prior dimension {d}",
            model.dim()
        )));
    }
    let bx: BoundingBox = prior.search_box();
    let families = families_for(prior);
    let grid = change_grid(&prior.quadrature_box());
    let quad = match cfg.criterion.metric {
        ChangeMetric::KlBetweenConsecutive => {
            Some(Quadrature::default_for(&prior.quadrature_box()))
        }
        ChangeMetric::SupNormPosteriorChange => None,
    };
    let mut leja = cfg.leja.clone();
    leja.seed = cfg.seed;
    let mut cache = EvaluationCache::default();
    let mut qr = (d > 1).then(|| VandermondeQR::new(families.clone()));
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut zeta = cfg.zeta0;
    let mut converged = false;
    let mut below = 0usize;
    let min_nodes = cfg.criterion.min_nodes.unwrap_or((d + 1) * (d + 2) / 2);
    let mut prev: Option<(MultiSurrogate, Option<PosteriorTable>)> = None;

    let mut node = initial_node(prior).map_err(|e| Error::NodeSelectionFailure {
        n: 0,
        source: Box::new(e),
    })?;
    loop {
        let start = Instant::now();
        let value = evaluate_node(&mut cache, model, &node)?;
        if let Some(q) = qr.as_mut() {
            q.push(&node).map_err(|e| Error::NodeSelectionFailure {
                n: history.len(),
                source: Box::new(e),
            })?;
        }
        let mut nodes: Vec<Vec<f64>> = history.iter().map(|r| r.node.clone()).collect();
        let mut values: Vec<Vec<f64>> = history.iter().map(|r| r.value.clone()).collect();
        nodes.push(node.clone());
        values.push(value.clone());
        let surrogate = MultiSurrogate::build(&nodes, &values, &families, &bx)?;
        let (table, change) = {
            let pe = PosteriorEval::of_surrogate(prior, lik, &surrogate);
            let table = match &quad {
                Some(q) => Some(pe.tabulate(q)?),
                None => None,
            };
            let change = match &prev {
                None => None,
                Some((ps, pt)) => Some(match cfg.criterion.metric {
                    ChangeMetric::SupNormPosteriorChange => {
                        posterior_change(&PosteriorEval::of_surrogate(prior, lik, ps), &pe, &grid)
                    }
                    ChangeMetric::KlBetweenConsecutive => {
                        let (a, b) = (pt.as_ref().unwrap(), table.as_ref().unwrap());
                        match kl_from_tables(b, a, quad.as_ref().unwrap(), Some(lik)) {
                            Ok(v) => v.max(0.0),
                            Err(Error::UnboundedDivergence(_)) => f64::INFINITY,
                            Err(e) => return Err(e),
                        }
                    }
                }),
            };
            (table, change)
        };
        let record = IterationRecord {
            n: nodes.len(),
            node: node.clone(),
            value,
            change,
            zeta,
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_iteration(&record);
        // The schedule compares this change with the previous one.
        if cfg.schedule {
            if let (Some(c), Some(pc)) = (change, history.last().and_then(|r| r.change)) {
                zeta = zeta_schedule_step(zeta, c > pc, cfg.k);
            }
        }
        history.push(record);
        if let Some(c) = change {
            below = if c < cfg.criterion.tolerance {
                below + 1
            } else {
                0
            };
            if below >= cfg.criterion.window && nodes.len() >= min_nodes {
                converged = true;
            }
        }
        if (converged && !cfg.exhaust_budget) || history.len() >= cfg.budget {
            return Ok(CalibrationState {
                surrogate,
                zeta,
                history,
                budget: cfg.budget,
                converged,
                families,
                cache,
            });
        }
        let n = history.len();
        let weight = AdaptiveWeight::new(prior, lik, &surrogate, zeta)?;
        node = match &qr {
            None => {
                let pts: Vec<f64> = nodes.iter().map(|x| x[0]).collect();
                next_node_1d(&pts, &weight, leja.subdivisions).map(|x| vec![x])
            }
            Some(q) => next_node_nd(q, &weight, &leja, n as u64),
        }
        .map_err(|e| Error::NodeSelectionFailure {
            n,
            source: Box::new(e),
        })?;
        prev = Some((surrogate, table));
    }
}

/// Nodal families compared in convergence studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodalFamily {
    WeightedLeja,
    Leja,
    ClenshawCurtis,
}

impl NodalFamily {
    pub fn name(self) -> &'static str {
        match self {
            NodalFamily::WeightedLeja => "weighted-leja",
            NodalFamily::Leja => "leja",
            NodalFamily::ClenshawCurtis => "clenshaw-curtis",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "weighted-leja" => Ok(NodalFamily::WeightedLeja),
            "leja" => Ok(NodalFamily::Leja),
            "clenshaw-curtis" => Ok(NodalFamily::ClenshawCurtis),
            _ => Err(Error::InvalidInput(format!(
                "unknown nodal family {s:?}; expected weighted-leja, leja or clenshaw-curtis"
            ))),
        }
    }
}

/// What a surrogate is measured against.
pub struct Reference<'a> {
    /// The true (or reference) model.
    pub truth: &'a dyn Fn(&[f64]) -> Vec<f64>,
    /// Grid for sup-norm errors.
    pub grid: Vec<Vec<f64>>,
    /// Quadrature for the Kullback-Leibler divergence.
    pub quad: Quadrature,
}

impl<'a> Reference<'a> {
    /// Audit grid and default quadrature over the prior's box.
    pub fn new(truth: &'a dyn Fn(&[f64]) -> Vec<f64>, prior: &Prior) -> Self {
        let bx = prior.quadrature_box();
        Reference {
            truth,
            grid: audit_grid(&bx),
            quad: Quadrature::default_for(&bx),
        }
    }
}

/// Errors of the surrogate built on the first `n` nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub n: usize,
    pub sup_model_error: f64,
    /// sup |P(u_N) p - P(u) p| of the unnormalized posteriors.
    pub sup_posterior_error: f64,
    /// D_KL(true || surrogate); infinite when unbounded.
    pub kl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyStudy {
    pub family: NodalFamily,
    pub zeta: Option<f64>,
    pub records: Vec<StudyRecord>,
    pub evaluations: usize,
}

impl FamilyStudy {
    pub fn at(&self, n: usize) -> Option<&StudyRecord> {
        self.records.iter().find(|r| r.n == n)
    }

    /// Smallest N whose KL is below `tol`.
    pub fn nodes_to_kl(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.kl < tol).map(|r| r.n)
    }
}

/// Settings of a family study.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub family: NodalFamily,
    pub zeta: f64,
    pub n_max: usize,
    pub seed: u64,
    pub leja: LejaSettings,
}

struct Truth {
    grid_u: Vec<Vec<f64>>,
    grid_post: Vec<f64>,
    table: PosteriorTable,
}

fn tabulate_truth(prior: &Prior, lik: &Likelihood, reference: &Reference) -> Result<Truth> {
    let grid_u: Vec<Vec<f64>> = reference
        .grid
        .iter()
        .map(|x| (reference.truth)(x))
        .collect();
    let grid_post = reference
        .grid
        .iter()
        .zip(&grid_u)
        .map(|(x, u)| (prior.ln_density(x) + lik.ln_p(u)).exp())
        .collect();
    let pe = PosteriorEval::new(prior, lik, |x| (reference.truth)(x), Source::TrueModel);
    Ok(Truth {
        grid_u,
        grid_post,
        table: pe.tabulate(&reference.quad)?,
    })
}

fn measure(
    s: &MultiSurrogate,
    prior: &Prior,
    lik: &Likelihood,
    reference: &Reference,
    truth: &Truth,
) -> Result<StudyRecord> {
    let mut sup_model: f64 = 0.0;
    let mut sup_post: f64 = 0.0;
    for ((x, u), p) in reference
        .grid
        .iter()
        .zip(&truth.grid_u)
        .zip(&truth.grid_post)
    {
        let un = s.evaluate(x);
        for (a, b) in un.iter().zip(u) {
            sup_model = sup_model.max((a - b).abs());
        }
        let pn = (prior.ln_density(x) + lik.ln_p(&un)).exp();
        sup_post = sup_post.max((pn - p).abs());
    }
    let pe = PosteriorEval::of_surrogate(prior, lik, s);
    let kl = match pe.tabulate(&reference.quad) {
        Ok(t) => match kl_from_tables(&truth.table, &t, &reference.quad, Some(lik)) {
            Ok(v) => v,
            Err(Error::UnboundedDivergence(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        },
        Err(Error::QuadratureUnderflow(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let n = s.components.first().map_or(0, |c| c.len());
    Ok(StudyRecord {
        n,
        sup_model_error: sup_model,
        sup_posterior_error: sup_post,
        kl,
    })
}

/// Errors of the surrogates built on every prefix of a nested node set.
pub fn study_nested(
    prior: &Prior,
    lik: &Likelihood,
    reference: &Reference,
    nodes: &[Vec<f64>],
    values: &[Vec<f64>],
) -> Result<Vec<StudyRecord>> {
    let truth = tabulate_truth(prior, lik, reference)?;
    let bx = prior.search_box();
    let families = families_for(prior);
    (1..=nodes.len())
        .map(|n| {
            let s = MultiSurrogate::build(&nodes[..n], &values[..n], &families, &bx)?;
            measure(&s, prior, lik, reference, &truth)
        })
        .collect()
}

/// Builds surrogates on N = 1..=n_max nodes of one family and measures
/// model error, posterior error and KL divergence against the reference.
///
/// Leja families are nested, so each model evaluation is reused by every
/// later N; Clenshaw-Curtis sets are rebuilt per N with an evaluation cache.
pub fn study_family(
    model: &dyn ForwardModel,
    prior: &Prior,
    lik: &Likelihood,
    reference: &Reference,
    cfg: &StudyConfig,
) -> Result<FamilyStudy> {
    let truth = tabulate_truth(prior, lik, reference)?;
    let bx = prior.search_box();
    let families = families_for(prior);
    let mut records = Vec::with_capacity(cfg.n_max);
    let mut cache = EvaluationCache::default();
    let nested = |nodes: Vec<Vec<f64>>, cache: &mut EvaluationCache| -> Result<Vec<StudyRecord>> {
        let values = nodes
            .iter()
            .map(|x| cache.get_or_eval(model, x))
            .collect::<Result<Vec<_>>>()?;
        (1..=nodes.len())
            .map(|n| {
                let s = MultiSurrogate::build(&nodes[..n], &values[..n], &families, &bx)?;
                measure(&s, prior, lik, reference, &truth)
            })
            .collect()
    };
    match cfg.family {
        NodalFamily::WeightedLeja => {
            let ccfg = CalibrationConfig {
                zeta0: cfg.zeta,
                budget: cfg.n_max.max(2),
                exhaust_budget: true,
                seed: cfg.seed,
                leja: cfg.leja.clone(),
                ..CalibrationConfig::default()
            };
            let state = run_calibration(model, prior, lik, &ccfg)?;
            cache = state.cache.clone();
            records = nested(state.nodes(), &mut cache)?;
        }
        NodalFamily::Leja => {
            let mut leja = cfg.leja.clone();
            leja.seed = cfg.seed;
            let seq = generate_sequence(prior, cfg.n_max, &leja)?;
            records = nested(seq.nodes, &mut cache)?;
        }
        NodalFamily::ClenshawCurtis => {
            if prior.dim() != 1 {
                return Err(Error::InvalidInput(
                    "Clenshaw-Curtis nodes are univariate only".into(),
                ));
            }
            let iv = prior.quadrature_box()[0];
            for n in 1..=cfg.n_max {
                let nodes = clenshaw_curtis(n, iv).nodes;
                let values = nodes
                    .iter()
                    .map(|x| cache.get_or_eval(model, x))
                    .collect::<Result<Vec<_>>>()?;
                let s = MultiSurrogate::build(&nodes, &values, &families, &bx)?;
                records.push(measure(&s, prior, lik, reference, &truth)?);
            }
        }
    }
    records.truncate(cfg.n_max);
    let zeta = (cfg.family == NodalFamily::WeightedLeja).then_some(cfg.zeta);
    Ok(FamilyStudy {
        family: cfg.family,
        zeta,
        records,
        evaluations: cache.misses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Interval;
    use crate::testmodels::{sinc_model, Cost, FnModel};

    #[test]
    fn zeta_schedule_rule() {
        assert!((zeta_schedule_step(0.01, true, 2.0) - 0.02).abs() < 1e-15);
        assert!((zeta_schedule_step(0.01, false, 2.0) - 0.005).abs() < 1e-15);
        assert_eq!(zeta_schedule_step(1e-8, false, 2.0), 1e-8);
        assert_eq!(zeta_schedule_step(1e8, true, 2.0), 1e8);
    }

    #[test]
    fn constant_model_converges_at_minimum_window() {
        let prior = Prior::uniform(&[Interval::new(0.0, 1.0)]).unwrap();
        let lik = Likelihood::gaussian(vec![0.3, 0.5], 0.1).unwrap();
        let model = FnModel::new(prior.support(), 1, Cost::Explicit, |_x: &[f64]| {
            Ok(vec![0.4])
        });
        let state = run_calibration(&model, &prior, &lik, &CalibrationConfig::default()).unwrap();
        assert!(state.converged);
        // One bootstrap node, then `window` zero changes.
        assert_eq!(state.history.len(), 3);
        assert_eq!(model.evaluations(), 3);
    }

    #[test]
    fn large_zeta_gives_prior_leja_nodes() {
        let model = sinc_model();
        let prior = Prior::uniform(&[Interval::new(-2.0, 2.0)]).unwrap();
        let lik = Likelihood::gaussian(vec![1.0], 0.1).unwrap();
        let cfg = CalibrationConfig {
            zeta0: 100.0,
            budget: 3,
            exhaust_budget: true,
            ..Default::default()
        };
        let state = run_calibration(&model, &prior, &lik, &cfg).unwrap();
        let plain = generate_sequence(&prior, 3, &LejaSettings::default()).unwrap();
        for (a, b) in state.nodes().iter().zip(&plain.nodes) {
            assert!((a[0] - b[0]).abs() < 0.05, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn posterior_change_basics() {
        let prior = Prior::uniform(&[Interval::new(0.0, 1.0)]).unwrap();
        let lik = Likelihood::gaussian(vec![0.0], 0.01).unwrap();
        let grid = change_grid(&prior.support());
        let a = PosteriorEval::new(&prior, &lik, |x| vec![x[0] - 0.2], Source::TrueModel);
        let b = PosteriorEval::new(&prior, &lik, |x| vec![x[0] - 0.8], Source::TrueModel);
        assert_eq!(posterior_change(&a, &a, &grid), 0.0);
        let ab = posterior_change(&a, &b, &grid);
        assert!(ab > 0.0);
        assert_eq!(ab, posterior_change(&b, &a, &grid));
    }

    #[test]
    fn history_is_bounded_by_budget() {
        let model = sinc_model();
        let prior = Prior::uniform(&[Interval::new(-2.0, 2.0)]).unwrap();
        let lik = Likelihood::gaussian(vec![0.9], 0.1).unwrap();
        let cfg = CalibrationConfig {
            budget: 5,
            exhaust_budget: true,
            ..Default::default()
        };
        let state = run_calibration(&model, &prior, &lik, &cfg).unwrap();
        assert_eq!(state.history.len(), 5);
        assert_eq!(state.cache.misses, 5);
        assert_eq!(state.cache.hits, 0);
    }
}
