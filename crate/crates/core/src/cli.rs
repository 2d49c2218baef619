//! Command-line driver: strict TOML configuration, the experiment pipelines
//! and their CSV / JSON-lines artifacts.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibrate::{
    run_calibration_with, study_family, study_nested, CalibrationConfig, ConvergenceCriterion,
    FamilyStudy, NodalFamily, Reference, StudyConfig, StudyRecord,
};
use crate::diagnostics::{
    fit_rate, lebesgue_constant_1d, lebesgue_constant_grid, ConvergenceCurve, RateModel,
};
use crate::domain::{halton_in_box, tensor_grid, Interval};
use crate::error::{Error, Result};
use crate::nodes::{
    clenshaw_curtis, families_for, generate_sequence, LejaSettings, NodalSequence, WeightFn,
};
use crate::sampling::{propagate, run_mcmc, McmcConfig};
use crate::statmodel::{load_data, Likelihood, Marginal, PosteriorEval, Prior, Quadrature};
use crate::testmodels::{
    burgers_tanh_crossing, gauss_model, generate_data, generate_parameter_data, runge_model,
    sinc_model, AnalyticModel, BurgersConfig, BurgersModel, ForwardModel,
};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Gauss,
    Runge,
    Sinc,
    Burgers,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub data: u64,
    pub leja: u64,
    pub mcmc: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            data: 1,
            leja: 0,
            mcmc: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSpec {
    /// One marginal per dimension; defaults to the experiment's box.
    pub marginals: Option<Vec<Marginal>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodKind {
    Gaussian,
    Beta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LikelihoodSpec {
    pub kind: LikelihoodKind,
    /// Noise standard deviation; defaults to 0.1 (0.05 for burgers).
    pub sigma: Option<f64>,
    /// Full noise covariance, overriding `sigma`.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub n_data: usize,
    /// Parameter generating synthetic data; defaults to 1/4 per axis.
    pub truth: Option<Vec<f64>>,
    /// Explicit data values, overriding synthetic data.
    pub data: Option<Vec<f64>>,
    pub data_file: Option<PathBuf>,
}

impl Default for LikelihoodSpec {
    fn default() -> Self {
        LikelihoodSpec {
            kind: LikelihoodKind::Gaussian,
            sigma: None,
            covariance: None,
            n_data: 20,
            truth: None,
            data: None,
            data_file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZetaSpec {
    pub value: f64,
    /// Values compared by `compare` for the weighted-leja family.
    pub compare: Option<Vec<f64>>,
    pub schedule: bool,
    pub k: f64,
}

impl Default for ZetaSpec {
    fn default() -> Self {
        ZetaSpec {
            value: 1e-3,
            compare: None,
            schedule: false,
            k: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataRecipe {
    /// z_k = u(truth) + noise.
    OutputNoise,
    /// z_k = u(delta_k) with delta_k drawn around `delta_mean`.
    ParameterNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurgersSpec {
    pub nu: f64,
    pub cells: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub delta_mean: f64,
    pub recipe: DataRecipe,
}

impl Default for BurgersSpec {
    fn default() -> Self {
        let b = BurgersConfig::default();
        BurgersSpec {
            nu: b.nu,
            cells: b.cells,
            tolerance: b.tolerance,
            max_iterations: b.max_iterations,
            delta_mean: 0.05,
            recipe: DataRecipe::ParameterNoise,
        }
    }
}

impl BurgersSpec {
    fn solver(&self) -> BurgersConfig {
        BurgersConfig {
            nu: self.nu,
            cells: self.cells,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Diagnostics {
    pub lebesgue: bool,
    pub kl_vs_truth: bool,
    pub rate_fit: bool,
    pub mcmc: bool,
    /// KL level used for nodes-to-threshold summaries.
    pub kl_threshold: f64,
    /// Gauss-Legendre points per axis for KL (d <= 2).
    pub quadrature_points: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            lebesgue: false,
            kl_vs_truth: true,
            rate_fit: true,
            mcmc: false,
            kl_threshold: 1e-7,
            quadrature_points: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub experiment: Experiment,
    pub dimension: usize,
    pub family: NodalFamily,
    /// Families run by `compare`.
    pub families: Vec<NodalFamily>,
    pub budget: usize,
    pub output: Option<PathBuf>,
    pub seeds: Seeds,
    pub prior: PriorSpec,
    pub likelihood: LikelihoodSpec,
    pub zeta: ZetaSpec,
    pub criterion: ConvergenceCriterion,
    pub leja: LejaSettings,
    pub burgers: BurgersSpec,
    pub mcmc: McmcConfig,
    pub diagnostics: Diagnostics,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            experiment: Experiment::Gauss,
            dimension: 1,
            family: NodalFamily::WeightedLeja,
            families: vec![
                NodalFamily::WeightedLeja,
                NodalFamily::Leja,
                NodalFamily::ClenshawCurtis,
            ],
            budget: 30,
            output: None,
            seeds: Seeds::default(),
            prior: PriorSpec::default(),
            likelihood: LikelihoodSpec::default(),
            zeta: ZetaSpec::default(),
            criterion: ConvergenceCriterion::default(),
            leja: LejaSettings::default(),
            burgers: BurgersSpec::default(),
            mcmc: McmcConfig::default(),
            diagnostics: Diagnostics::default(),
        }
    }
}

/// Every config key with its default, shown by `--help`.
pub const CONFIG_KEYS: &str = "\
CONFIGURATION KEYS (TOML; unknown keys are rejected)
  version = 1                      schema version
  experiment = \"gauss\"             gauss | runge | sinc | burgers | custom (library only)
  dimension = 1                    parameter dimension (gauss, runge)
  family = \"weighted-leja\"         weighted-leja | leja | clenshaw-curtis
  families = [all three]           families run by `compare`
  budget = 30                      maximum number of model evaluations
  output = \"out\"                   output directory (overridden by --out)
  [seeds]        data = 1, leja = 0, mcmc = 0
  [prior]        marginals = [{type = \"uniform\", lo, hi} | {type = \"normal\", mean, std}
                              | {type = \"beta\", alpha, beta, lo, hi}]
                 default: U[0,1]^d (gauss, runge), U[-2,2] (sinc), U[0,0.1] (burgers)
  [likelihood]   kind = \"gaussian\" | \"beta\"; sigma = 0.1 (0.05 for burgers);
                 covariance = [[..]]; n_data = 20; truth = [0.25, ..];
                 data = [..] (sinc default [1.0]); data_file = \"path.csv\"
  [zeta]         value = 1e-3 (must be > 0); compare = [values]; schedule = false; k = 2.0
  [criterion]    metric = \"sup-norm-posterior-change\" | \"kl-between-consecutive\";
                 tolerance = 1e-6; window = 2; min_nodes = (d+1)(d+2)/2
  [leja]         n_candidates = 20000; seed = 0; subdivisions = 8; polish = 4
  [burgers]      nu = 0.1; cells = 10000; tolerance = 1e-10; max_iterations = 200;
                 delta_mean = 0.05; recipe = \"parameter-noise\" | \"output-noise\"
  [mcmc]         n_samples = 20000; burn_in = 20% of n_samples; thinning = 1;
                 proposal_scale = auto; seed = 0
  [diagnostics]  lebesgue = false; kl_vs_truth = true; rate_fit = true; mcmc = false;
                 kl_threshold = 1e-7; quadrature_points = 200
";

/// 1-based line of a byte offset.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line on which `key` is set inside `[section]` (or at top level when
/// `section` is empty); 0 if the key does not appear.
fn find_key_line(src: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    0
}

fn config_error(src: &str, path: &str, message: impl Into<String>) -> Error {
    let (section, key) = path.rsplit_once('.').unwrap_or(("", path));
    Error::Config {
        key: path.to_string(),
        line: find_key_line(src, section, key),
        message: message.into(),
    }
}

/// Parses a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let src = fs::read_to_string(path)?;
    parse_config_str(&src)
}

/// Strict parse plus validation of a configuration text.
pub fn parse_config_str(src: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(src).map_err(|e| {
        let line = e.span().map_or(0, |s| line_of(src, s.start));
        let key = e
            .span()
            .map(|s| {
                src[s]
                    .split('=')
                    .next()
                    .unwrap_or("")
                    .trim()
                    .trim_matches(['[', ']'])
                    .to_string()
            })
            .filter(|k| !k.is_empty())
            .unwrap_or_else(|| "<document>".into());
        Error::Config {
            key,
            line,
            message: e.message().trim().to_string(),
        }
    })?;
    validate_config(&cfg, src)?;
    Ok(cfg)
}

/// Checks the semantic constraints that the schema cannot express.
pub fn validate_config(cfg: &RunConfig, src: &str) -> Result<()> {
    let err = |path: &str, msg: String| Err(config_error(src, path, msg));
    if cfg.version != CONFIG_VERSION {
        return err(
            "version",
            format!(
                "unsupported version {}, expected {CONFIG_VERSION}",
                cfg.version
            ),
        );
    }
    if cfg.experiment == Experiment::Custom {
        return err(
            "experiment",
            "custom forward models are supported through the library (implement ForwardModel), not the CLI".into(),
        );
    }
    if cfg.dimension == 0 {
        return err("dimension", "dimension must be at least 1".into());
    }
    if cfg.budget < 2 {
        return err(
            "budget",
            format!("budget must be at least 2, got {}", cfg.budget),
        );
    }
    if !(cfg.zeta.value > 0.0) {
        return err(
            "zeta.value",
            format!(
                "zeta must be positive (zeta = 0 removes the tempering), got {}",
                cfg.zeta.value
            ),
        );
    }
    if let Some(zs) = &cfg.zeta.compare {
        if let Some(z) = zs.iter().find(|z| !(**z > 0.0)) {
            return err("zeta.compare", format!("zeta must be positive, got {z}"));
        }
    }
    if !(cfg.zeta.k > 1.0) {
        return err(
            "zeta.k",
            format!("schedule factor must exceed 1, got {}", cfg.zeta.k),
        );
    }
    if let Some(s) = cfg.likelihood.sigma {
        if !(s > 0.0) {
            return err(
                "likelihood.sigma",
                format!("sigma must be positive, got {s}"),
            );
        }
    }
    if cfg.likelihood.n_data == 0 {
        return err("likelihood.n_data", "need at least one datum".into());
    }
    if !(cfg.criterion.tolerance > 0.0) {
        return err("criterion.tolerance", "tolerance must be positive".into());
    }
    if cfg.criterion.window == 0 {
        return err("criterion.window", "window must be at least 1".into());
    }
    if !(cfg.diagnostics.kl_threshold > 0.0) {
        return err(
            "diagnostics.kl_threshold",
            "threshold must be positive".into(),
        );
    }
    if cfg.diagnostics.quadrature_points < 2 {
        return err(
            "diagnostics.quadrature_points",
            "need at least 2 points".into(),
        );
    }
    if let Some(m) = &cfg.prior.marginals {
        for mg in m {
            mg.validate()
                .map_err(|e| config_error(src, "prior.marginals", e.to_string()))?;
        }
    }
    if cfg.experiment == Experiment::Burgers {
        cfg.burgers
            .solver()
            .validate()
            .map_err(|e| config_error(src, "burgers", e.to_string()))?;
    }
    Ok(())
}

/// Everything needed to run one experiment.
pub struct Problem {
    pub model: Box<dyn ForwardModel>,
    pub prior: Prior,
    pub lik: Likelihood,
    /// Reference model for error measurements.
    pub truth: Box<dyn Fn(&[f64]) -> Vec<f64>>,
    pub quad_points: usize,
}

fn analytic(cfg: &RunConfig) -> AnalyticModel {
    match cfg.experiment {
        Experiment::Runge => runge_model(cfg.dimension),
        Experiment::Sinc => sinc_model(),
        _ => gauss_model(cfg.dimension),
    }
}

/// Instantiates model, prior, data and likelihood from a configuration.
pub fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    let d = match cfg.experiment {
        Experiment::Sinc | Experiment::Burgers => 1,
        _ => cfg.dimension,
    };
    let prior = match &cfg.prior.marginals {
        Some(m) => {
            if m.len() != d {
                return Err(Error::InvalidInput(format!(
                    "prior has {} marginals but the model has dimension {d}",
                    m.len()
                )));
            }
            Prior::new(m.clone())?
        }
        None => {
            let iv = match cfg.experiment {
                Experiment::Sinc => Interval::new(-2.0, 2.0),
                Experiment::Burgers => Interval::new(0.0, 0.1),
                _ => Interval::new(0.0, 1.0),
            };
            Prior::uniform(&vec![iv; d])?
        }
    };
    let sigma = cfg
        .likelihood
        .sigma
        .unwrap_or(if cfg.experiment == Experiment::Burgers {
            0.05
        } else {
            0.1
        });
    let (model, truth): (Box<dyn ForwardModel>, Box<dyn Fn(&[f64]) -> Vec<f64>>) =
        match cfg.experiment {
            Experiment::Burgers => {
                let nu = cfg.burgers.nu;
                let m = BurgersModel::new(cfg.burgers.solver(), prior.quadrature_box()[0])?;
                (
                    Box::new(m),
                    Box::new(move |x: &[f64]| vec![burgers_tanh_crossing(nu, x[0])]),
                )
            }
            Experiment::Custom => {
                return Err(Error::InvalidInput(
                    "custom experiments are library-only".into(),
                ))
            }
            _ => {
                let reference = analytic(cfg);
                (
                    Box::new(analytic(cfg)),
                    Box::new(move |x: &[f64]| vec![reference.value(x)]),
                )
            }
        };
    let z = if let Some(z) = &cfg.likelihood.data {
        z.clone()
    } else if let Some(path) = &cfg.likelihood.data_file {
        load_data(path)?.values
    } else if cfg.experiment == Experiment::Sinc {
        vec![1.0]
    } else if cfg.experiment == Experiment::Burgers
        && cfg.burgers.recipe == DataRecipe::ParameterNoise
    {
        // A separate model instance keeps data generation out of the
        // calibration's evaluation count.
        let m = BurgersModel::new(cfg.burgers.solver(), prior.quadrature_box()[0])?;
        generate_parameter_data(
            &m,
            cfg.burgers.delta_mean,
            sigma,
            prior.quadrature_box()[0],
            cfg.likelihood.n_data,
            cfg.seeds.data,
        )?
    } else {
        let t = match (&cfg.likelihood.truth, cfg.experiment) {
            (Some(t), _) => t.clone(),
            (None, Experiment::Burgers) => vec![cfg.burgers.delta_mean],
            (None, _) => vec![0.25; d],
        };
        let data_model: Box<dyn ForwardModel> = match cfg.experiment {
            Experiment::Burgers => Box::new(BurgersModel::new(
                cfg.burgers.solver(),
                prior.quadrature_box()[0],
            )?),
            _ => Box::new(analytic(cfg)),
        };
        generate_data(
            data_model.as_ref(),
            &t,
            sigma,
            cfg.likelihood.n_data,
            cfg.seeds.data,
        )?
    };
    let lik = match (cfg.likelihood.kind, &cfg.likelihood.covariance) {
        (LikelihoodKind::Beta, _) => Likelihood::beta(z)?,
        (LikelihoodKind::Gaussian, Some(c)) => {
            let n = c.len();
            let m =
                nalgebra::DMatrix::from_fn(n, n, |i, j| c[i].get(j).copied().unwrap_or(f64::NAN));
            Likelihood::gaussian_cov(z, m)?
        }
        (LikelihoodKind::Gaussian, None) => Likelihood::gaussian(z, sigma)?,
    };
    let quad_points = if cfg.experiment == Experiment::Burgers {
        cfg.diagnostics.quadrature_points.max(400)
    } else {
        cfg.diagnostics.quadrature_points
    };
    Ok(Problem {
        model,
        prior,
        lik,
        truth,
        quad_points,
    })
}

impl Problem {
    pub fn reference(&self) -> Reference<'_> {
        let mut r = Reference::new(self.truth.as_ref(), &self.prior);
        let bx = self.prior.quadrature_box();
        if bx.len() <= 2 {
            r.quad = Quadrature::gauss_legendre(&bx, self.quad_points, 1);
        }
        r
    }
}

/// Header block carried by every output file. The hash leaves out the
/// output directory, which does not affect results.
pub fn header(cfg: &RunConfig) -> String {
    let json = serde_json::to_string(&RunConfig {
        output: None,
        ..cfg.clone()
    })
    .expect("config serializes");
    let hash = hex::encode(Sha256::digest(json.as_bytes()));
    format!(
        "# leja-bayes {}\n# config-sha256 {hash}\n# seeds data={} leja={} mcmc={}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.seeds.data,
        cfg.seeds.leja,
        cfg.seeds.mcmc
    )
}

fn create(dir: &Path, name: &str, cfg: &RunConfig) -> Result<BufWriter<File>> {
    let mut f = BufWriter::new(File::create(dir.join(name))?);
    f.write_all(header(cfg).as_bytes())?;
    Ok(f)
}

fn write_nodes(
    dir: &Path,
    cfg: &RunConfig,
    nodes: &[Vec<f64>],
    values: Option<&[Vec<f64>]>,
) -> Result<()> {
    let mut f = create(dir, "nodes.csv", cfg)?;
    let d = nodes.first().map_or(1, Vec::len);
    let mut cols: Vec<String> = (1..=d).map(|k| format!("x_{k}")).collect();
    if let Some(v) = values {
        cols.extend((1..=v.first().map_or(0, Vec::len)).map(|k| format!("u_{k}")));
    }
    writeln!(f, "n,{}", cols.join(","))?;
    for (i, x) in nodes.iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
        if let Some(v) = values {
            row.extend(v[i].iter().map(|u| format!("{u:.16e}")));
        }
        writeln!(f, "{},{}", i + 1, row.join(","))?;
    }
    Ok(f.flush()?)
}

fn fmt_e(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6e}")
    } else {
        "inf".into()
    }
}

fn write_convergence(
    dir: &Path,
    name: &str,
    cfg: &RunConfig,
    studies: &[FamilyStudy],
) -> Result<()> {
    let mut f = create(dir, name, cfg)?;
    writeln!(
        f,
        "family,zeta,n,sup_model_error,sup_posterior_error,kl_vs_truth"
    )?;
    for st in studies {
        let zeta = st.zeta.map_or(String::new(), |z| format!("{z:e}"));
        for r in &st.records {
            let kl = if cfg.diagnostics.kl_vs_truth {
                fmt_e(r.kl)
            } else {
                String::new()
            };
            writeln!(
                f,
                "{},{zeta},{},{},{},{kl}",
                st.family.name(),
                r.n,
                fmt_e(r.sup_model_error),
                fmt_e(r.sup_posterior_error)
            )?;
        }
    }
    for st in studies {
        for (tag, fit) in rate_fits(&st.records) {
            writeln!(f, "# rate {} {tag} {fit}", st.family.name())?;
        }
    }
    Ok(f.flush()?)
}

/// Exponential rate fits over the second half of the curve.
fn rate_fits(records: &[StudyRecord]) -> Vec<(&'static str, String)> {
    let lo = records.len() / 2 + 1;
    let curve = |f: fn(&StudyRecord) -> f64| {
        ConvergenceCurve::new(
            records
                .iter()
                .filter(|r| r.n >= lo && f(r).is_finite())
                .map(|r| (r.n, f(r)))
                .collect(),
        )
    };
    let mut out = Vec::new();
    for (tag, c) in [
        ("model", curve(|r| r.sup_model_error)),
        ("kl", curve(|r| r.kl)),
    ] {
        let s = match fit_rate(&c, RateModel::Exponential) {
            Ok(fit) => format!(
                "exponential rate {:.4} (residual {:.3})",
                fit.rate, fit.residual
            ),
            Err(e) => format!("unavailable: {e}"),
        };
        out.push((tag, s));
    }
    out
}

fn write_posterior_grid(
    dir: &Path,
    cfg: &RunConfig,
    p: &Problem,
    pe: &PosteriorEval,
) -> Result<()> {
    let bx = p.prior.quadrature_box();
    let grid = match bx.len() {
        1 => tensor_grid(&bx, 1000),
        2 => tensor_grid(&bx, 200),
        _ => halton_in_box(&bx, 1, 10_000),
    };
    let quad = if bx.len() <= 2 {
        Quadrature::gauss_legendre(&bx, p.quad_points, 1)
    } else {
        Quadrature::default_for(&bx)
    };
    let ln_gamma = pe.tabulate(&quad)?.ln_gamma;
    let mut f = create(dir, "posterior_grid.csv", cfg)?;
    let cols: Vec<String> = (1..=bx.len()).map(|k| format!("x_{k}")).collect();
    writeln!(f, "{},posterior", cols.join(","))?;
    for x in &grid {
        let row: Vec<String> = x.iter().map(|v| format!("{v:.10e}")).collect();
        writeln!(
            f,
            "{},{:.10e}",
            row.join(","),
            (pe.ln_density(x) - ln_gamma).exp()
        )?;
    }
    Ok(f.flush()?)
}

/// Runs `calibrate`: the adaptive loop (or a fixed family with the same
/// budget), then error curves, posterior grid and optional MCMC.
pub fn cmd_calibrate(cfg: &RunConfig, out: &Path) -> Result<String> {
    let p = build_problem(cfg)?;
    let mut summary = String::new();
    let (nodes, values, converged) = match cfg.family {
        NodalFamily::WeightedLeja => {
            let ccfg = CalibrationConfig {
                zeta0: cfg.zeta.value,
                schedule: cfg.zeta.schedule,
                k: cfg.zeta.k,
                budget: cfg.budget,
                criterion: cfg.criterion.clone(),
                exhaust_budget: false,
                seed: cfg.seeds.leja,
                leja: cfg.leja.clone(),
            };
            let mut log = BufWriter::new(File::create(out.join("run_log.jsonl"))?);
            let mut io_err = None;
            let state = run_calibration_with(p.model.as_ref(), &p.prior, &p.lik, &ccfg, |rec| {
                if let Err(e) = serde_json::to_writer(&mut log, rec)
                    .map_err(Error::from)
                    .and_then(|_| Ok(writeln!(log)?))
                {
                    io_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = io_err {
                return Err(e);
            }
            log.flush()?;
            state.surrogate.components[0].save(&out.join("surrogate.json"))?;
            (state.nodes(), state.values(), Some(state.converged))
        }
        fam => {
            let seq = fixed_sequence(fam, &p.prior, cfg.budget, cfg)?;
            let values = seq
                .nodes
                .iter()
                .map(|x| p.model.evaluate(x))
                .collect::<Result<Vec<_>>>()?;
            (seq.nodes, values, None)
        }
    };
    write_nodes(out, cfg, &nodes, Some(&values))?;
    let reference = p.reference();
    let records = study_nested(&p.prior, &p.lik, &reference, &nodes, &values)?;
    let study = FamilyStudy {
        family: cfg.family,
        zeta: (cfg.family == NodalFamily::WeightedLeja).then_some(cfg.zeta.value),
        records,
        evaluations: p.model.evaluations(),
    };
    write_convergence(out, "convergence.csv", cfg, std::slice::from_ref(&study))?;
    let bx = p.prior.search_box();
    let surrogate =
        crate::surrogate::MultiSurrogate::build(&nodes, &values, &families_for(&p.prior), &bx)?;
    let pe = PosteriorEval::of_surrogate(&p.prior, &p.lik, &surrogate);
    write_posterior_grid(out, cfg, &p, &pe)?;
    let last = study.records.last().expect("budget >= 2");
    writeln!(
        summary,
        "experiment {:?}, family {}, {} model evaluations",
        cfg.experiment,
        cfg.family.name(),
        study.evaluations
    )
    .ok();
    if let Some(c) = converged {
        writeln!(summary, "converged: {c}").ok();
    }
    writeln!(
        summary,
        "final N = {}: sup model error {}, sup posterior error {}, KL vs truth {}",
        last.n,
        fmt_e(last.sup_model_error),
        fmt_e(last.sup_posterior_error),
        fmt_e(last.kl)
    )
    .ok();
    if cfg.diagnostics.rate_fit {
        for (tag, s) in rate_fits(&study.records) {
            writeln!(summary, "{tag}: {s}").ok();
        }
    }
    if cfg.diagnostics.mcmc {
        summary.push_str(&mcmc_report(cfg, out, &p, &surrogate)?);
    }
    Ok(summary)
}

fn fixed_sequence(
    fam: NodalFamily,
    prior: &Prior,
    count: usize,
    cfg: &RunConfig,
) -> Result<NodalSequence> {
    match fam {
        NodalFamily::ClenshawCurtis => {
            if prior.dim() != 1 {
                return Err(Error::InvalidInput(
                    "Clenshaw-Curtis nodes are univariate only".into(),
                ));
            }
            Ok(clenshaw_curtis(count, prior.quadrature_box()[0]))
        }
        _ => {
            let mut leja = cfg.leja.clone();
            leja.seed = cfg.seeds.leja;
            generate_sequence(prior, count, &leja)
        }
    }
}

fn mcmc_report(
    cfg: &RunConfig,
    out: &Path,
    p: &Problem,
    s: &crate::surrogate::MultiSurrogate,
) -> Result<String> {
    let pe = PosteriorEval::of_surrogate(&p.prior, &p.lik, s);
    let mcfg = McmcConfig {
        seed: cfg.seeds.mcmc,
        ..cfg.mcmc.clone()
    };
    let chain = run_mcmc(&pe, &mcfg)?;
    let mut f = create(out, "chain.csv", cfg)?;
    chain.write_csv(&mut f)?;
    f.flush()?;
    let prop = propagate(&chain, &s.components[0]);
    let mut r = String::new();
    writeln!(
        r,
        "mcmc: {} samples, acceptance rate {:.3}",
        chain.samples.len(),
        chain.acceptance_rate
    )
    .ok();
    for k in 0..chain.dim() {
        writeln!(
            r,
            "  theta_{} mean {:.6e} (se {:.2e})",
            k + 1,
            chain.mean(k),
            chain.standard_error(k)
        )
        .ok();
    }
    writeln!(
        r,
        "  propagated output mean {:.6e}, std {:.6e}",
        prop.mean, prop.std
    )
    .ok();
    for (q, v) in &prop.quantiles {
        writeln!(r, "    {q:>2}% {v:.6e}").ok();
    }
    fs::write(
        out.join("propagation.json"),
        serde_json::to_string_pretty(&prop)?,
    )?;
    Ok(r)
}

/// Runs `compare`: every listed family on the same problem and data.
pub fn cmd_compare(cfg: &RunConfig, out: &Path) -> Result<String> {
    if cfg.families.len() < 2 {
        return Err(Error::InvalidInput(
            "compare needs at least two families".into(),
        ));
    }
    let p = build_problem(cfg)?;
    let reference = p.reference();
    let mut studies = Vec::new();
    let mut summary = String::new();
    writeln!(summary, "shared data seed {}", cfg.seeds.data).ok();
    for &fam in &cfg.families {
        let zetas = match fam {
            NodalFamily::WeightedLeja => cfg
                .zeta
                .compare
                .clone()
                .unwrap_or_else(|| vec![cfg.zeta.value]),
            _ => vec![cfg.zeta.value],
        };
        for zeta in zetas {
            // Fresh model per family so evaluation counts are per family.
            let fp = build_problem(cfg)?;
            let scfg = StudyConfig {
                family: fam,
                zeta,
                n_max: cfg.budget,
                seed: cfg.seeds.leja,
                leja: cfg.leja.clone(),
            };
            match study_family(fp.model.as_ref(), &p.prior, &p.lik, &reference, &scfg) {
                Ok(st) => {
                    let label = match st.zeta {
                        Some(z) => format!("{} (zeta {z:e})", fam.name()),
                        None => fam.name().to_string(),
                    };
                    let to = st
                        .nodes_to_kl(cfg.diagnostics.kl_threshold)
                        .map_or("not reached".to_string(), |n| n.to_string());
                    let last = st.records.last().expect("n_max >= 2");
                    writeln!(
                        summary,
                        "{label}: nodes to KL < {:e}: {to}; at N = {}: model {}, KL {}",
                        cfg.diagnostics.kl_threshold,
                        last.n,
                        fmt_e(last.sup_model_error),
                        fmt_e(last.kl)
                    )
                    .ok();
                    studies.push(st);
                }
                Err(e) => {
                    writeln!(summary, "{}: failed: {e}", fam.name()).ok();
                }
            }
        }
    }
    write_convergence(out, "compare.csv", cfg, &studies)?;
    Ok(summary)
}

/// Runs `leja`: the prior-weighted sequence (or Clenshaw-Curtis) only.
pub fn cmd_leja(cfg: &RunConfig, out: &Path) -> Result<String> {
    let p = build_problem(cfg)?;
    let seq = fixed_sequence(cfg.family, &p.prior, cfg.budget, cfg)?;
    write_nodes(out, cfg, &seq.nodes, None)?;
    Ok(format!(
        "{} {} nodes written\n",
        seq.len(),
        cfg.family.name()
    ))
}

/// Runs `lebesgue`: prior-weighted Lebesgue constants of the first
/// `budget` nodes of the sequence.
pub fn cmd_lebesgue(cfg: &RunConfig, out: &Path) -> Result<String> {
    let p = build_problem(cfg)?;
    let d = p.prior.dim();
    let tag = weight_tag(&p.prior);
    let mut f = create(out, "lebesgue.csv", cfg)?;
    writeln!(f, "n,value,method,weight")?;
    let mut worst: f64 = 0.0;
    let full = if cfg.family == NodalFamily::ClenshawCurtis {
        None
    } else {
        Some(fixed_sequence(cfg.family, &p.prior, cfg.budget, cfg)?)
    };
    for n in 1..=cfg.budget {
        let nodes = match &full {
            Some(seq) => seq.nodes[..n].to_vec(),
            None => fixed_sequence(cfg.family, &p.prior, n, cfg)?.nodes,
        };
        let est = if d == 1 {
            let x: Vec<f64> = nodes.iter().map(|v| v[0]).collect();
            lebesgue_constant_1d(&x, &p.prior, 64)
        } else {
            lebesgue_constant_grid(
                &nodes,
                &p.prior,
                &families_for(&p.prior),
                &p.prior.quadrature_box(),
                100_000,
            )?
        };
        let method = serde_json::to_value(est.method)?
            .as_str()
            .unwrap_or("")
            .to_string();
        writeln!(f, "{},{:.10e},{method},{tag}", n - 1, est.value)?;
        if n > 2 {
            worst = worst.max(est.value / (n - 1) as f64);
        }
    }
    f.flush()?;
    let mut s = format!(
        "Lebesgue constants for N = 0..{} written; max Lambda_N / N = {worst:.4}\n",
        cfg.budget - 1
    );
    if d > 1 {
        s.push_str("values for d >= 2 are grid maxima, i.e. lower bounds\n");
    }
    Ok(s)
}

fn weight_tag(prior: &Prior) -> String {
    prior
        .marginals
        .iter()
        .map(|m| match m {
            Marginal::Uniform { lo, hi } => format!("uniform[{lo};{hi}]"),
            Marginal::Normal { mean, std } => format!("normal({mean};{std})"),
            Marginal::Beta {
                alpha,
                beta,
                lo,
                hi,
            } => format!("beta({alpha};{beta})[{lo};{hi}]"),
        })
        .collect::<Vec<_>>()
        .join("x")
}

/// Runs `mcmc`: calibrate, then sample the surrogate posterior.
pub fn cmd_mcmc(cfg: &RunConfig, out: &Path) -> Result<String> {
    let mut c = cfg.clone();
    c.diagnostics.mcmc = true;
    cmd_calibrate(&c, out)
}

#[derive(Debug, Parser)]
#[command(name = "leja-bayes", version, about = "Bayesian model calibration with adaptively weighted Leja surrogates", after_help = CONFIG_KEYS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed applied to data generation, node candidates and MCMC.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum number of model evaluations (nodes).
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Nodal family; a comma-separated list for `compare`.
    #[arg(long, global = true)]
    pub family: Option<String>,
}

#[derive(Clone, Copy, Debug, Subcommand)]
pub enum Command {
    /// Run the adaptive calibration loop.
    Calibrate,
    /// Compare nodal families on the same problem.
    Compare,
    /// Generate a nodal sequence only.
    Leja,
    /// Tabulate weighted Lebesgue constants.
    Lebesgue,
    /// Calibrate, then sample the surrogate posterior.
    Mcmc,
}

/// Resolves configuration file and flags into the effective configuration.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seeds = Seeds {
            data: s,
            leja: s,
            mcmc: s,
        };
    }
    if let Some(b) = cli.budget {
        if b < 2 {
            return Err(Error::InvalidInput(format!(
                "--budget must be at least 2, got {b}"
            )));
        }
        cfg.budget = b;
    }
    if let Some(f) = &cli.family {
        let fams = f
            .split(',')
            .map(|s| NodalFamily::parse(s.trim()))
            .collect::<Result<Vec<_>>>()?;
        cfg.family = fams[0];
        cfg.families = fams;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

/// Executes one command; returns the human-readable summary.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<String> {
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let summary = match cmd {
        Command::Calibrate => cmd_calibrate(cfg, &out)?,
        Command::Compare => cmd_compare(cfg, &out)?,
        Command::Leja => cmd_leja(cfg, &out)?,
        Command::Lebesgue => cmd_lebesgue(cfg, &out)?,
        Command::Mcmc => cmd_mcmc(cfg, &out)?,
    };
    let mut f = create(&out, "summary.txt", cfg)?;
    f.write_all(summary.as_bytes())?;
    f.flush()?;
    Ok(summary)
}

/// Entry point shared by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match effective_config(&cli).and_then(|cfg| execute(cli.command, &cfg)) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
