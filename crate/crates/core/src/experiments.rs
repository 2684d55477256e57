//! Verification suites. Each `run_*` takes a config, returns a report with
//! measured points, fitted slopes and pass/fail verdicts, and is a pure
//! function of its config.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{Kernel, ForwardModel, ModelSpec};
use crate::likelihood::{AssumptionItem, AuditReport, NoiseCovariance, Potential};
use crate::math::{fit_log_log, log_space, normal_cdf, LineFit};
use crate::measures1d::Distribution1D;
use crate::posterior::{
    lasso_coordinate_descent, l1_objective, map_estimate_l1, posterior_convexity_test, Estimate, Method, PosteriorSpec,
    PotentialTable, PriorSpec, DEFAULT_QUADRATURE_PANELS,
};
use crate::rng::SeedStream;
use crate::series_prior::{BoxRegion, CoefficientLaw, CoefficientSchedule, Functional, SeriesPrior};

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Built-in model ids, usable without a `models` entry.
pub const SMOOTHING_MODEL: &str = "smoothing_deconvolution";
pub const POINTWISE_MODEL: &str = "pointwise_observation";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Effort {
    pub samples: usize,
    pub quadrature_panels: usize,
}

impl Default for Effort {
    fn default() -> Self {
        Self { samples: DEFAULT_SAMPLES, quadrature_panels: DEFAULT_QUADRATURE_PANELS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub effort: Effort,
    #[serde(default)]
    pub models: BTreeMap<String, ModelSpec>,
    #[serde(flatten)]
    pub kind: ExperimentKind,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self { seed, effort: Effort::default(), models: BTreeMap::new(), kind }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn model(&self, id: &str) -> Result<ModelSpec> {
        resolve_model(&self.models, id)
    }
}

/// Model by id: the given table first, then the built-ins.
pub fn resolve_model(models: &BTreeMap<String, ModelSpec>, id: &str) -> Result<ModelSpec> {
    if let Some(m) = models.get(id) {
        return Ok(m.clone());
    }
    let kernel = match id {
        SMOOTHING_MODEL => Kernel::Algebraic(1.0),
        POINTWISE_MODEL => Kernel::Algebraic(0.0),
        _ => return Err(Error::UnknownKind(id.to_string())),
    };
    Ok(ModelSpec::Deconvolution { kernel, observation_points: ForwardModel::equispaced_points(8), truncation: 16 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentKind {
    Stability(StabilityParams),
    Consistency(ConsistencyParams),
    Convexity(ConvexityParams),
    Metrics(MetricsParams),
    Audit(AuditParams),
    MapDemo(MapDemoParams),
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Stability(_) => "stability",
            Self::Consistency(_) => "consistency",
            Self::Convexity(_) => "convexity",
            Self::Metrics(_) => "metrics",
            Self::Audit(_) => "audit",
            Self::MapDemo(_) => "map_demo",
        }
    }

    /// Default parameters for a named experiment.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "stability" => Self::Stability(StabilityParams::default()),
            "consistency" => Self::Consistency(ConsistencyParams::default()),
            "convexity" => Self::Convexity(ConvexityParams::default()),
            "metrics" => Self::Metrics(MetricsParams::default()),
            "audit" => Self::Audit(AuditParams::default()),
            "map_demo" => Self::MapDemo(MapDemoParams::default()),
            other => return Err(Error::UnknownKind(other.to_string())),
        })
    }
}

/// Where the data vector comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSpec {
    Values(Vec<f64>),
    /// `y = G(u) + eta` with `u` a prior draw and `eta ~ N(0, Gamma)`.
    Synthetic { truth_seed: u64, noise_seed: u64 },
}

/// Prior, forward model id, noise and data of one inverse problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub prior: PriorSpec,
    pub model: String,
    pub noise: NoiseCovariance,
    pub data: DataSpec,
}

impl ProblemSpec {
    pub fn laplace_deconvolution(model: &str, sigma2: f64) -> Self {
        Self {
            prior: PriorSpec::Series(SeriesPrior::laplace_deconvolution()),
            model: model.to_string(),
            noise: NoiseCovariance::Scaled { sigma2 },
            data: DataSpec::Synthetic { truth_seed: 7, noise_seed: 8 },
        }
    }

    pub fn hierarchical_deconvolution(model: &str, sigma2: f64) -> Self {
        Self { prior: PriorSpec::Series(SeriesPrior::hierarchical_deconvolution()), ..Self::laplace_deconvolution(model, sigma2) }
    }

    pub fn forward_model(&self, cfg: &ExperimentConfig, truncation: usize) -> Result<ForwardModel> {
        let model = ForwardModel::new(cfg.model(&self.model)?)?;
        match model.spec() {
            ModelSpec::Deconvolution { .. } => model.with_truncation(truncation),
            ModelSpec::Linear { .. } => Ok(model),
        }
    }

    pub fn data_vector(&self, model: &ForwardModel, truncation: usize) -> Result<Vec<f64>> {
        match &self.data {
            DataSpec::Values(v) => Ok(v.clone()),
            DataSpec::Synthetic { truth_seed, noise_seed } => {
                let dim = self.prior.dim(truncation);
                let mut truth = vec![0.0; dim];
                self.prior.sample_into(&SeedStream::new(*truth_seed), 0, &mut truth);
                let clean = model.apply(&truth)?;
                let noise = sample_noise(&self.noise, clean.len(), *noise_seed)?;
                Ok(clean.iter().zip(noise).map(|(a, b)| a + b).collect())
            }
        }
    }

    pub fn posterior(&self, cfg: &ExperimentConfig, truncation: usize) -> Result<PosteriorSpec> {
        let model = self.forward_model(cfg, truncation)?;
        let y = self.data_vector(&model, truncation)?;
        let phi = Potential::gaussian(model, self.noise.clone(), y)?;
        PosteriorSpec::new(self.prior.clone(), phi, truncation)
    }
}

/// Draw from `N(0, Gamma)`.
pub fn sample_noise(noise: &NoiseCovariance, m: usize, seed: u64) -> Result<Vec<f64>> {
    let stream = SeedStream::new(seed);
    let z: Vec<f64> = (0..m).map(|i| stream.rng(0, i as u64).standard_normal()).collect();
    match noise {
        NoiseCovariance::Scaled { sigma2 } => Ok(z.iter().map(|v| v * sigma2.sqrt()).collect()),
        NoiseCovariance::Dense(rows) => {
            let g = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
            let l = g.cholesky().ok_or(Error::NotPositiveDefinite)?.l();
            Ok((0..m).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityParams {
    pub problem: ProblemSpec,
    pub truncation: usize,
    pub deltas: Vec<f64>,
    /// Data-space coordinate directions `e_j`.
    pub directions: Vec<usize>,
    pub max_ratio_spread: f64,
    pub slope_range: [f64; 2],
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::laplace_deconvolution(SMOOTHING_MODEL, 1.0),
            truncation: 16,
            deltas: log_space(1e-3, 1e-1, 7),
            directions: vec![0, 1, 2],
            max_ratio_spread: 3.0,
            slope_range: [0.8, 1.2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConsistencyParams {
    pub problem: ProblemSpec,
    pub n_grid: Vec<usize>,
    pub n_ref: usize,
    pub drop_smallest: bool,
    pub slope_range: [f64; 2],
    /// Projection-error slope target and half-width.
    pub projection_slope: [f64; 2],
    /// Truncation used for the deterministic projection-error series.
    pub projection_truncation: usize,
    /// Second problem checked for monotone decay only.
    pub hierarchical: Option<ProblemSpec>,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::laplace_deconvolution(POINTWISE_MODEL, 1.0),
            n_grid: vec![2, 4, 8, 16, 32],
            n_ref: 128,
            drop_smallest: false,
            slope_range: [-2.6, -1.5],
            projection_slope: [-2.0, 0.1],
            projection_truncation: 4096,
            hierarchical: Some(ProblemSpec::hierarchical_deconvolution(SMOOTHING_MODEL, 1.0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCase {
    pub label: String,
    pub prior: PriorSpec,
    pub truncation: usize,
    /// When set, the test runs on this posterior instead of the prior.
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    pub functionals: Vec<Functional>,
    pub a: BoxRegion,
    pub b: BoxRegion,
    pub lambda: f64,
    /// Closed-form `(lhs, rhs)` to compare against.
    #[serde(default)]
    pub expected: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvexityParams {
    pub cases: Vec<ConvexityCase>,
    pub log_concavity_tol: f64,
    pub log_concavity_grid: usize,
    pub exp_moment_eps: f64,
    pub exp_moment_truncation: usize,
    pub divergent_eps: f64,
}

impl Default for ConvexityParams {
    fn default() -> Self {
        Self {
            cases: default_convexity_cases(),
            log_concavity_tol: 1e-8,
            log_concavity_grid: 2001,
            exp_moment_eps: 0.1,
            exp_moment_truncation: 64,
            divergent_eps: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsParams {
    pub problem: ProblemSpec,
    pub truncation: usize,
    pub random_pairs: usize,
}

impl Default for MetricsParams {
    fn default() -> Self {
        Self { problem: ProblemSpec::laplace_deconvolution(SMOOTHING_MODEL, 1.0), truncation: 8, random_pairs: 20 }
    }
}

/// Potential to audit; the expected verdict follows from the kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditTarget {
    GaussianAdditive { model: String, truncation: usize, noise: NoiseCovariance, data: Vec<f64> },
    MultiplicativeUniform { threshold: f64, dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditParams {
    pub targets: Vec<AuditTarget>,
    pub radii: Vec<f64>,
    pub samples: usize,
}

impl Default for AuditParams {
    fn default() -> Self {
        Self {
            targets: vec![
                AuditTarget::GaussianAdditive {
                    model: SMOOTHING_MODEL.to_string(),
                    truncation: 8,
                    noise: NoiseCovariance::Scaled { sigma2: 1.0 },
                    data: vec![0.5, -0.2, 0.1, 0.3, -0.4, 0.0, 0.2, -0.1],
                },
                AuditTarget::MultiplicativeUniform { threshold: 1.0, dim: 1 },
            ],
            radii: vec![1.0, 10.0],
            samples: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapDemoParams {
    pub instances: usize,
    pub rows: usize,
    pub cols: usize,
    pub sparsity: usize,
    pub sigma: f64,
    pub lambdas: Vec<f64>,
    pub tol: f64,
    pub objective_tol: f64,
}

impl Default for MapDemoParams {
    fn default() -> Self {
        Self {
            instances: 10,
            rows: 5,
            cols: 10,
            sparsity: 2,
            sigma: 0.1,
            lambdas: vec![0.01, 0.1, 1.0],
            tol: 1e-13,
            objective_tol: 1e-8,
        }
    }
}

/// One measurement; the CSV export writes these rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub series: String,
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
    pub method: String,
    pub effort: usize,
}

impl Point {
    fn from_estimate(series: &str, x: f64, e: &Estimate) -> Self {
        Self { series: series.to_string(), x, value: e.value, stderr: e.stderr, method: e.method.as_str().to_string(), effort: e.effort }
    }

    fn exact(series: &str, x: f64, value: f64) -> Self {
        Self { series: series.to_string(), x, value, stderr: 0.0, method: "exact".to_string(), effort: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub series: String,
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Normal-approximation 95% interval for the slope.
    pub slope_ci95: [f64; 2],
    pub num_points: usize,
}

impl Fit {
    fn new(series: &str, f: LineFit, num_points: usize) -> Self {
        Self {
            series: series.to_string(),
            slope: f.slope,
            intercept: f.intercept,
            slope_stderr: f.slope_stderr,
            slope_ci95: [f.slope - 1.96 * f.slope_stderr, f.slope + 1.96 * f.slope_stderr],
            num_points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub observed: f64,
    pub tolerance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub label: String,
    pub report: AuditReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub points: Vec<Point>,
    pub fits: Vec<Fit>,
    pub verdicts: Vec<Verdict>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audits: Vec<AuditRecord>,
    pub pass: bool,
}

impl ExperimentReport {
    fn new(name: &str, seed: u64) -> Self {
        Self { experiment: name.to_string(), seed, points: Vec::new(), fits: Vec::new(), verdicts: Vec::new(), audits: Vec::new(), pass: true }
    }

    fn verdict(&mut self, name: impl Into<String>, pass: bool, observed: f64, tolerance: impl Into<String>) {
        self.pass &= pass;
        self.verdicts.push(Verdict { name: name.into(), pass, observed, tolerance: tolerance.into() });
    }

    pub fn find(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.pass)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match &cfg.kind {
        ExperimentKind::Stability(p) => run_stability(cfg, p),
        ExperimentKind::Consistency(p) => run_consistency(cfg, p),
        ExperimentKind::Convexity(p) => run_convexity(cfg, p),
        ExperimentKind::Metrics(p) => run_metrics(cfg, p),
        ExperimentKind::Audit(p) => run_audit(cfg, p),
        ExperimentKind::MapDemo(p) => run_map_demo(cfg, p),
    }
}

fn range_str(r: [f64; 2]) -> String {
    format!("in [{}, {}]", r[0], r[1])
}

/// `d_H(mu^y, mu^{y + delta e})` over a grid of `delta`, paired seeds.
pub fn run_stability(cfg: &ExperimentConfig, p: &StabilityParams) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("stability", cfg.seed);
    let base = p.problem.posterior(cfg, p.truncation)?;
    let y = base.potential.data();
    if p.deltas.iter().any(|d| !(*d > 0.0)) || p.deltas.len() < 2 {
        return Err(Error::InvalidArgument("stability needs at least two positive perturbation sizes"));
    }
    let zero = PotentialTable::prior_mc(&[&base, &base], 1000.min(cfg.effort.samples).max(2), cfg.seed, |_, _| {})?.hellinger(0, 1)?;
    report.verdict("zero_perturbation", zero.value == 0.0, zero.value, "d_H == 0 exactly");
    let mut worst_spread = 0.0f64;
    let mut max_ratio = 0.0f64;
    for &dir in &p.directions {
        if dir >= y.len() {
            return Err(Error::InvalidArgument("perturbation direction outside data space"));
        }
        let specs: Vec<PosteriorSpec> = p
            .deltas
            .iter()
            .map(|d| {
                let mut yy = y.clone();
                yy[dir] += d;
                base.with_potential(base.potential.with_data(yy)?)
            })
            .collect::<Result<_>>()?;
        let mut all = vec![&base];
        all.extend(specs.iter());
        let table = PotentialTable::prior_mc(&all, cfg.effort.samples, cfg.seed, |_, _| {})?;
        let series = format!("direction_{dir}");
        let mut values = Vec::new();
        for (j, d) in p.deltas.iter().enumerate() {
            let e = table.hellinger(0, j + 1)?;
            report.points.push(Point::from_estimate(&series, *d, &e));
            values.push(e.value);
        }
        let ratios: Vec<f64> = values.iter().zip(&p.deltas).map(|(v, d)| v / d).collect();
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        worst_spread = worst_spread.max(spread);
        max_ratio = max_ratio.max(hi);
        let fit = fit_log_log(&p.deltas, &values);
        report.fits.push(Fit::new(&series, fit, p.deltas.len()));
        let [lo_s, hi_s] = p.slope_range;
        report.verdict(format!("slope_{series}"), fit.slope >= lo_s && fit.slope <= hi_s, fit.slope, range_str(p.slope_range));
    }
    report.verdict("ratio_spread", worst_spread < p.max_ratio_spread, worst_spread, format!("max/min of d_H/delta < {}", p.max_ratio_spread));
    report.points.push(Point::exact("fitted_lipschitz_constant", 0.0, max_ratio));
    Ok(report)
}

/// Deterministic `||u - P_N u||` for unit coefficients against the tail sum
/// over Fourier indices outside `{-N, ..., N-1}` with an integral remainder.
fn tail_sum_oracle(schedule: &CoefficientSchedule, truncation: usize, cutoff: usize) -> Option<f64> {
    let s = match schedule {
        CoefficientSchedule::AlgebraicFourier { s } => *s,
        _ => return None,
    };
    let term = |k: f64| (1.0 + k * k).powf(-2.0 * s);
    let mut acc = 0.0;
    for k in (truncation..cutoff).rev() {
        acc += term(k as f64);
        if k > truncation {
            acc += term(k as f64);
        }
    }
    // both signs beyond the cutoff: 2 * int_K^inf x^{-4s} dx
    let kc = cutoff as f64;
    acc += 2.0 * kc.powf(1.0 - 4.0 * s) / (4.0 * s - 1.0);
    Some(acc.sqrt())
}

/// `d_H(mu_N, mu_{N_ref})` over a grid of truncations with paired seeds.
pub fn run_consistency(cfg: &ExperimentConfig, p: &ConsistencyParams) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("consistency", cfg.seed);
    if p.n_grid.iter().any(|&n| n == 0 || n > p.n_ref) {
        return Err(Error::CannotRefine { requested: p.n_grid.iter().copied().max().unwrap_or(0), available: p.n_ref });
    }
    let grid: Vec<f64> = p.n_grid.iter().map(|&n| n as f64).collect();
    let fit_from = usize::from(p.drop_smallest);

    let reference = p.problem.posterior(cfg, p.n_ref)?;
    let projected: Vec<PosteriorSpec> =
        p.n_grid.iter().map(|&n| reference.with_potential(reference.potential.projected(n))).collect::<Result<_>>()?;
    let same = reference.with_potential(reference.potential.projected(p.n_ref))?;
    let mut all = vec![&reference, &same];
    all.extend(projected.iter());
    let table = PotentialTable::prior_mc(&all, cfg.effort.samples, cfg.seed, |_, _| {})?;
    let at_ref = table.hellinger(0, 1)?;
    report.verdict("reference_level_zero", at_ref.value == 0.0, at_ref.value, "d_H(mu_Nref, mu_Nref) == 0 exactly");
    report.points.push(Point::from_estimate("hellinger", p.n_ref as f64, &at_ref));
    let mut values = Vec::new();
    for (j, n) in grid.iter().enumerate() {
        let e = table.hellinger(0, j + 2)?;
        report.points.push(Point::from_estimate("hellinger", *n, &e));
        values.push(e.value);
    }
    let fit = fit_log_log(&grid[fit_from..], &values[fit_from..]);
    report.fits.push(Fit::new("hellinger", fit, grid.len() - fit_from));
    let [lo, hi] = p.slope_range;
    report.verdict("hellinger_slope", fit.slope >= lo && fit.slope <= hi, fit.slope, range_str(p.slope_range));

    // potential gap on the fixed truth draw
    let mut truth = vec![0.0; reference.dim()];
    if let DataSpec::Synthetic { truth_seed, .. } = p.problem.data {
        reference.prior.sample_into(&SeedStream::new(truth_seed), 0, &mut truth);
        let mut gaps = Vec::new();
        for n in &p.n_grid {
            let g = reference.potential.potential_gap(*n, &truth, crate::likelihood::GAP_EPS)?;
            report.points.push(Point::exact("potential_gap", *n as f64, g.gap));
            gaps.push(g.gap);
        }
        let gfit = fit_log_log(&grid[fit_from..], &gaps[fit_from..]);
        report.fits.push(Fit::new("potential_gap", gfit, grid.len() - fit_from));
    }

    // deterministic projection error against the tail-sum oracle
    if let PriorSpec::Series(prior) = &p.problem.prior {
        let big = p.projection_truncation;
        let unit: Vec<f64> = (0..crate::series_prior::window_len(big)).map(|q| prior.schedule.gamma(q)).collect();
        let field = crate::series_prior::FieldSample::new(big, unit);
        let mut errors = Vec::new();
        let mut worst_rel = 0.0f64;
        for n in &p.n_grid {
            let e = field.distance(&field.project(*n)?);
            errors.push(e);
            report.points.push(Point::exact("projection_error", *n as f64, e));
            if let Some(oracle) = tail_sum_oracle(&prior.schedule, *n, big) {
                report.points.push(Point::exact("projection_error_oracle", *n as f64, oracle));
                worst_rel = worst_rel.max((e - oracle).abs() / oracle);
            }
        }
        let pfit = fit_log_log(&grid, &errors);
        report.fits.push(Fit::new("projection_error", pfit, grid.len()));
        let [target, half] = p.projection_slope;
        report.verdict(
            "projection_error_slope",
            (pfit.slope - target).abs() <= half,
            pfit.slope,
            format!("{target} ± {half}"),
        );
        report.verdict("projection_error_vs_tail_sum", worst_rel < 1e-3, worst_rel, "relative difference < 1e-3");
    }

    if let Some(h) = &p.hierarchical {
        let href = h.posterior(cfg, p.n_ref)?;
        let hproj: Vec<PosteriorSpec> =
            p.n_grid.iter().map(|&n| href.with_potential(href.potential.projected(n))).collect::<Result<_>>()?;
        let mut hall = vec![&href];
        hall.extend(hproj.iter());
        let t = PotentialTable::prior_mc(&hall, cfg.effort.samples, cfg.seed, |_, _| {})?;
        let mut est = Vec::new();
        for (j, n) in grid.iter().enumerate() {
            let e = t.hellinger(0, j + 1)?;
            report.points.push(Point::from_estimate("hierarchical_hellinger", *n, &e));
            est.push(e);
        }
        // worst normalized increase between successive grid points
        let worst = est
            .windows(2)
            .map(|w| (w[1].value - w[0].value) / (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max);
        report.verdict("hierarchical_monotone", worst <= 3.0, worst, "successive increase <= 3 combined stderr");
    }
    Ok(report)
}

fn flat_spec(prior: PriorSpec, truncation: usize) -> Result<PosteriorSpec> {
    let dim = prior.dim(truncation);
    PosteriorSpec::new(prior, Potential::custom("flat", dim, |_| 0.0), truncation)
}

/// Five parameter settings for each kind of the one-dimensional table.
pub fn table_battery() -> Vec<Distribution1D> {
    use Distribution1D::*;
    let mut v = Vec::new();
    for (m, s) in [(0.0, 1.0), (2.0, 0.5), (-3.0, 4.0), (0.0, 0.1), (10.0, 3.0)] {
        v.push(Gaussian { m, sigma: s });
    }
    for lambda in [0.1, 0.5, 1.0, 2.0, 5.0] {
        v.push(Exponential { lambda });
    }
    for (m, s) in [(0.0, 1.0), (1.0, 0.5), (-2.0, 3.0), (0.0, 0.1), (5.0, 2.0)] {
        v.push(Laplace { m, sigma: s });
    }
    for (m, s) in [(0.0, 1.0), (1.0, 0.5), (-2.0, 3.0), (0.0, 0.2), (4.0, 2.0)] {
        v.push(Logistic { m, s });
    }
    for (k, lambda) in [(1.0, 1.0), (2.0, 1.0), (3.5, 0.5), (1.5, 2.0), (10.0, 0.3)] {
        v.push(Gamma { k, lambda });
    }
    for (a, b) in [(0.0, 1.0), (-1.0, 1.0), (2.0, 5.0), (-10.0, -3.0), (0.0, 0.01)] {
        v.push(Uniform { a, b });
    }
    v
}

/// Laplace oracle cases plus a 1-D and a 2-D marginal per kind and a
/// posterior marginal.
pub fn default_convexity_cases() -> Vec<ConvexityCase> {
    let laplace = PriorSpec::Product(vec![Distribution1D::Laplace { m: 0.0, sigma: 1.0 }]);
    let e1 = (-1.0f64).exp();
    let interval = |lo: f64, hi: f64| BoxRegion { lo: vec![lo], hi: vec![hi] };
    let mut cases = vec![
        ConvexityCase {
            label: "laplace_strict".to_string(),
            prior: laplace.clone(),
            truncation: 1,
            problem: None,
            functionals: vec![Functional::coordinate(0)],
            a: interval(-1.0, 1.0),
            b: interval(1.0, 3.0),
            lambda: 0.5,
            expected: Some([0.5 * (1.0 - (-2.0f64).exp()), ((1.0 - e1) * 0.5 * (e1 - (-3.0f64).exp())).sqrt()]),
        },
        ConvexityCase {
            label: "laplace_equality".to_string(),
            prior: laplace,
            truncation: 1,
            problem: None,
            functionals: vec![Functional::coordinate(0)],
            a: interval(0.0, 1.0),
            b: interval(2.0, 3.0),
            lambda: 0.5,
            expected: Some([0.5 * e1 * (1.0 - e1); 2]),
        },
    ];
    let mut seen = Vec::new();
    for d in table_battery() {
        if seen.contains(&d.kind_name()) {
            continue;
        }
        seen.push(d.kind_name());
        let q = |p: f64| d.quantile(p);
        let (a0, a1, b0, b1) = (q(0.05), q(0.3), q(0.55), q(0.95));
        cases.push(ConvexityCase {
            label: format!("{}_1d", d.kind_name()),
            prior: PriorSpec::Product(vec![d]),
            truncation: 1,
            problem: None,
            functionals: vec![Functional::coordinate(0)],
            a: interval(a0, a1),
            b: interval(b0, b1),
            lambda: 0.3,
            expected: None,
        });
        cases.push(ConvexityCase {
            label: format!("{}_2d", d.kind_name()),
            prior: PriorSpec::Product(vec![d, d]),
            truncation: 1,
            problem: None,
            functionals: vec![Functional::coordinate(0), Functional::coordinate(1)],
            a: BoxRegion { lo: vec![a0, b0], hi: vec![a1, b1] },
            b: BoxRegion { lo: vec![b0, a0], hi: vec![b1, a1] },
            lambda: 0.5,
            expected: None,
        });
        cases.push(ConvexityCase {
            label: format!("{}_sum", d.kind_name()),
            prior: PriorSpec::Product(vec![d, d]),
            truncation: 1,
            problem: None,
            functionals: vec![Functional { terms: vec![(0, 1.0), (1, 1.0)] }],
            a: interval(2.0 * a0, 2.0 * a1),
            b: interval(2.0 * b0, 2.0 * b1),
            lambda: 0.5,
            expected: None,
        });
    }
    cases.push(ConvexityCase {
        label: "deconvolution_posterior_1d".to_string(),
        prior: PriorSpec::Series(SeriesPrior::laplace_deconvolution()),
        truncation: 8,
        problem: Some(ProblemSpec::laplace_deconvolution(SMOOTHING_MODEL, 1.0)),
        functionals: vec![Functional::coordinate(0)],
        a: interval(-1.5, -0.5),
        b: interval(0.5, 2.0),
        lambda: 0.5,
        expected: None,
    });
    cases
}

/// Log-concavity, convexity inequalities on prior and posterior marginals,
/// and the exponential-moment diagnostic.
pub fn run_convexity(cfg: &ExperimentConfig, p: &ConvexityParams) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("convexity", cfg.seed);
    for (i, d) in table_battery().iter().enumerate() {
        let grid = log_concavity_grid(d, p.log_concavity_grid);
        let lc = d.check_log_concavity(&grid, p.log_concavity_tol)?;
        report.verdict(
            format!("log_concave_{}_{}", d.kind_name(), i % 5),
            lc.pass,
            lc.max_second_difference,
            format!("max second difference <= {:e}", p.log_concavity_tol),
        );
    }
    for (i, case) in p.cases.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        let spec = match &case.problem {
            Some(problem) => {
                let spec = problem.posterior(cfg, case.truncation)?;
                if spec.prior != case.prior {
                    return Err(Error::IncompatiblePriors);
                }
                spec
            }
            None => flat_spec(case.prior.clone(), case.truncation)?,
        };
        let r = posterior_convexity_test(&spec, &case.functionals, &case.a, &case.b, case.lambda, cfg.effort.samples, seed)?;
        report.points.push(Point {
            series: case.label.clone(),
            x: case.lambda,
            value: r.margin,
            stderr: r.stderr,
            method: Method::PriorMc.as_str().to_string(),
            effort: r.num_samples,
        });
        report.verdict(format!("convexity_{}", case.label), r.pass, r.margin, "margin >= -3 stderr");
        if let Some([lhs, rhs]) = case.expected {
            let dl = (r.lhs - lhs).abs() / r.lhs_stderr;
            let dr = (r.rhs - rhs).abs() / r.rhs_stderr;
            report.verdict(format!("oracle_lhs_{}", case.label), dl <= 3.0, r.lhs, format!("|lhs - {lhs:.6}| <= 3 stderr"));
            report.verdict(format!("oracle_rhs_{}", case.label), dr <= 3.0, r.rhs, format!("|rhs - {rhs:.6}| <= 3 stderr"));
        }
    }

    let ex2 = SeriesPrior::laplace_deconvolution();
    let em = ex2.estimate_exp_moment(p.exp_moment_eps, p.exp_moment_truncation, cfg.effort.samples, cfg.seed)?;
    report.points.push(Point {
        series: "exp_moment".to_string(),
        x: p.exp_moment_eps,
        value: em.estimate,
        stderr: em.stderr,
        method: Method::PriorMc.as_str().to_string(),
        effort: em.num_samples,
    });
    report.verdict(
        "exp_moment_laplace_series",
        !em.flagged,
        em.doubling_drift,
        format!("doubling drift < {}", crate::series_prior::EXP_MOMENT_DRIFT_TOLERANCE),
    );
    let single = SeriesPrior::new(
        crate::series_prior::Basis::FourierCircle,
        CoefficientSchedule::Explicit { values: vec![1.0] },
        CoefficientLaw::Iid(Distribution1D::Laplace { m: 0.0, sigma: 1.0 }),
    )?;
    let div = single.estimate_exp_moment(p.divergent_eps, 1, cfg.effort.samples, cfg.seed)?;
    report.verdict("exp_moment_divergent_flagged", div.flagged, div.doubling_drift, "flagged (drift >= tolerance or saturated)");
    Ok(report)
}

/// Grid over the bulk of the law that also straddles its support edges.
fn log_concavity_grid(d: &Distribution1D, n: usize) -> Vec<f64> {
    let lo = d.quantile(1e-9);
    let hi = d.quantile(1.0 - 1e-9);
    let pad = 0.05 * (hi - lo);
    let (a, b) = (lo - pad, hi + pad);
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Closed-form Gaussian pair: prior N(0, 2), `y = 0` and `y = 2` with unit
/// forward map and noise variance 2 give posteriors N(0, 1) and N(1, 1).
pub fn gaussian_oracle_pair() -> Result<(PosteriorSpec, PosteriorSpec)> {
    let prior = PriorSpec::Product(vec![Distribution1D::Gaussian { m: 0.0, sigma: 2f64.sqrt() }]);
    let model = ForwardModel::linear(vec![vec![1.0]])?;
    let mk = |y: f64| -> Result<PosteriorSpec> {
        let phi = Potential::gaussian(model.clone(), NoiseCovariance::Scaled { sigma2: 2.0 }, vec![y])?;
        PosteriorSpec::new(prior.clone(), phi, 1)
    };
    Ok((mk(0.0)?, mk(2.0)?))
}

pub fn gaussian_oracle_hellinger() -> f64 {
    (1.0 - (-0.125f64).exp()).sqrt()
}

pub fn gaussian_oracle_tv() -> f64 {
    2.0 * normal_cdf(0.5) - 1.0
}

/// Normalized margins of `d_H^2 <= d_TV <= sqrt(2) d_H`, the chain that holds
/// for the half-normalized metrics.
fn sharp_chain_margins(h: &Estimate, tv: &Estimate) -> (f64, f64) {
    let lower = (tv.value - h.value * h.value) / (tv.stderr.powi(2) + (2.0 * h.value * h.stderr).powi(2)).sqrt().max(f64::MIN_POSITIVE);
    let upper = (2f64.sqrt() * h.value - tv.value) / (2.0 * h.stderr.powi(2) + tv.stderr.powi(2)).sqrt().max(f64::MIN_POSITIVE);
    (lower, upper)
}

fn sandwich_margins(h: &Estimate, tv: &Estimate) -> (f64, f64) {
    let lower = (tv.value - 2.0 * h.value) / (tv.stderr.powi(2) + 4.0 * h.stderr.powi(2)).sqrt().max(f64::MIN_POSITIVE);
    let upper = (8f64.sqrt() * h.value - tv.value) / (8.0 * h.stderr.powi(2) + tv.stderr.powi(2)).sqrt().max(f64::MIN_POSITIVE);
    (lower, upper)
}

/// Metric equivalence and the expectation-gap bound on a battery of pairs.
pub fn run_metrics(cfg: &ExperimentConfig, p: &MetricsParams) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("metrics", cfg.seed);
    let n = cfg.effort.samples;

    // identical pair
    let base = p.problem.posterior(cfg, p.truncation)?;
    let t = PotentialTable::prior_mc(&[&base, &base], n.min(10_000), cfg.seed, |_, _| {})?;
    let h0 = t.hellinger(0, 1)?;
    let tv0 = t.total_variation(0, 1)?;
    report.verdict("identical_pair_zero", h0.value == 0.0 && tv0.value == 0.0, h0.value.max(tv0.value), "d_H == d_TV == 0 exactly");

    // closed-form pair
    let (a, b) = gaussian_oracle_pair()?;
    let exact_h = gaussian_oracle_hellinger();
    let exact_tv = gaussian_oracle_tv();
    let q = PotentialTable::quadrature(&[&a, &b], cfg.effort.quadrature_panels, |_, _| {})?;
    let hq = q.hellinger(0, 1)?;
    let tq = q.total_variation(0, 1)?;
    report.points.push(Point::from_estimate("gaussian_hellinger", 0.0, &hq));
    report.points.push(Point::from_estimate("gaussian_tv", 0.0, &tq));
    report.verdict("gaussian_hellinger_quadrature", (hq.value - exact_h).abs() <= 1e-4, hq.value, format!("|d_H - {exact_h:.6}| <= 1e-4"));
    report.verdict("gaussian_tv_quadrature", (tq.value - exact_tv).abs() <= 1e-4, tq.value, format!("|d_TV - {exact_tv:.6}| <= 1e-4"));
    let mc = PotentialTable::prior_mc(&[&a, &b], n, cfg.seed, |_, _| {})?;
    let hm = mc.hellinger(0, 1)?;
    let tm = mc.total_variation(0, 1)?;
    report.points.push(Point::from_estimate("gaussian_hellinger", 1.0, &hm));
    report.points.push(Point::from_estimate("gaussian_tv", 1.0, &tm));
    report.verdict(
        "gaussian_hellinger_mc",
        (hm.value - exact_h).abs() <= 3.0 * hm.stderr,
        hm.value,
        format!("|d_H - {exact_h:.6}| <= 3 stderr"),
    );
    report.verdict("gaussian_tv_mc", (tm.value - exact_tv).abs() <= 3.0 * tm.stderr, tm.value, format!("|d_TV - {exact_tv:.6}| <= 3 stderr"));
    let (lo, hi) = sandwich_margins(&hm, &tm);
    report.verdict("gaussian_sandwich", lo >= -3.0 && hi >= -3.0, lo.min(hi), "2 d_H <= d_TV <= sqrt(8) d_H within 3 stderr");
    let (slo, shi) = sharp_chain_margins(&hm, &tm);
    report.verdict("gaussian_sharp_chain", slo >= -3.0 && shi >= -3.0, slo.min(shi), "d_H^2 <= d_TV <= sqrt(2) d_H within 3 stderr");

    // random data pairs sharing one prior sample set
    let model = p.problem.forward_model(cfg, p.truncation)?;
    let clean = match &p.problem.data {
        DataSpec::Synthetic { truth_seed, .. } => {
            let mut truth = vec![0.0; base.dim()];
            base.prior.sample_into(&SeedStream::new(*truth_seed), 0, &mut truth);
            model.apply(&truth)?
        }
        DataSpec::Values(v) => v.clone(),
    };
    let pair_stream = SeedStream::new(cfg.seed).fork(0x5041_4952);
    let mut specs = Vec::new();
    for i in 0..p.random_pairs {
        for side in 0..2u64 {
            let noise = sample_noise(&p.problem.noise, clean.len(), pair_stream.rng(i as u64, side).next_u64())?;
            let y: Vec<f64> = clean.iter().zip(noise).map(|(c, e)| c + e).collect();
            specs.push(base.with_potential(base.potential.with_data(y)?)?);
        }
    }
    let refs: Vec<&PosteriorSpec> = specs.iter().collect();
    let mut first = Vec::with_capacity(n);
    let mut indicator = Vec::with_capacity(n);
    let table = PotentialTable::prior_mc(&refs, n, cfg.seed, |_, u| {
        first.push(u[0]);
        indicator.push(if u[0] >= 0.0 { 1.0 } else { 0.0 });
    })?;
    let (mut sharp_lo, mut sharp_hi) = (f64::INFINITY, f64::INFINITY);
    let (mut worst_lo, mut worst_hi, mut worst_gap, mut worst_ind, mut worst_tv) =
        (f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for i in 0..p.random_pairs {
        let (j, k) = (2 * i, 2 * i + 1);
        let h = table.hellinger(j, k)?;
        let tv = table.total_variation(j, k)?;
        report.points.push(Point::from_estimate("pair_hellinger", i as f64, &h));
        report.points.push(Point::from_estimate("pair_tv", i as f64, &tv));
        let (lo, hi) = sandwich_margins(&h, &tv);
        worst_lo = worst_lo.min(lo);
        worst_hi = worst_hi.min(hi);
        let (slo, shi) = sharp_chain_margins(&h, &tv);
        sharp_lo = sharp_lo.min(slo);
        sharp_hi = sharp_hi.min(shi);
        let g = table.expectation_gap(j, k, &first)?;
        let tol = (g.lhs_stderr.powi(2) + g.rhs_stderr.powi(2)).sqrt().max(f64::MIN_POSITIVE);
        worst_gap = worst_gap.min((g.rhs_bound - g.lhs) / tol);
        let gi = table.expectation_gap(j, k, &indicator)?;
        let tol_i = (gi.lhs_stderr.powi(2) + gi.rhs_stderr.powi(2)).sqrt().max(f64::MIN_POSITIVE);
        worst_ind = worst_ind.min((gi.rhs_bound - gi.lhs) / tol_i);
        let tol_tv = (gi.lhs_stderr.powi(2) + tv.stderr.powi(2)).sqrt().max(f64::MIN_POSITIVE);
        worst_tv = worst_tv.min((tv.value - gi.lhs) / tol_tv);
    }
    let tag = format!("{} pairs", p.random_pairs);
    report.verdict("sandwich_lower", worst_lo >= -3.0, worst_lo, format!("min (d_TV - 2 d_H)/stderr >= -3 over {tag}"));
    report.verdict("sandwich_upper", worst_hi >= -3.0, worst_hi, format!("min (sqrt(8) d_H - d_TV)/stderr >= -3 over {tag}"));
    report.verdict("sharp_chain_lower", sharp_lo >= -3.0, sharp_lo, format!("min (d_TV - d_H^2)/stderr >= -3 over {tag}"));
    report.verdict("sharp_chain_upper", sharp_hi >= -3.0, sharp_hi, format!("min (sqrt(2) d_H - d_TV)/stderr >= -3 over {tag}"));
    report.verdict("expectation_gap_first_coefficient", worst_gap >= -3.0, worst_gap, format!("min (bound - gap)/stderr >= -3 over {tag}"));
    report.verdict("expectation_gap_indicator", worst_ind >= -3.0, worst_ind, format!("min (bound - gap)/stderr >= -3 over {tag}"));
    report.verdict("indicator_gap_below_tv", worst_tv >= -3.0, worst_tv, format!("min (d_TV - gap)/stderr >= -3 over {tag}"));
    Ok(report)
}

/// Audit each target potential at each radius.
pub fn run_audit(cfg: &ExperimentConfig, p: &AuditParams) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("audit", cfg.seed);
    for (i, target) in p.targets.iter().enumerate() {
        let (label, phi, expected): (String, Potential, &[AssumptionItem]) = match target {
            AuditTarget::GaussianAdditive { model, truncation, noise, data } => {
                let m = ForwardModel::new(cfg.model(model)?)?;
                let m = match m.spec() {
                    ModelSpec::Deconvolution { .. } => m.with_truncation(*truncation)?,
                    ModelSpec::Linear { .. } => m,
                };
                (format!("gaussian_additive_{i}"), Potential::gaussian(m, noise.clone(), data.clone())?, &[])
            }
            AuditTarget::MultiplicativeUniform { threshold, dim } => (
                format!("multiplicative_{i}"),
                Potential::multiplicative(*threshold, *dim)?,
                &[AssumptionItem::LowerBound, AssumptionItem::BoundedAbove],
            ),
        };
        for &r in &p.radii {
            let a = phi.assumption_audit(r, p.samples, cfg.seed)?;
            let again = phi.assumption_audit(r, p.samples, cfg.seed)?;
            let name = format!("{label}_r{r}");
            let expected_ok = expected.iter().all(|item| a.flags(*item));
            let none_extra = if expected.is_empty() { a.violations.is_empty() } else { !a.lower_bound_ok };
            let items: Vec<&str> = a.violations.iter().map(|v| v.item.roman()).collect();
            let tolerance = if expected.is_empty() {
                "no violations".to_string()
            } else {
                "flags items (i) and (ii)".to_string()
            };
            report.verdict(format!("audit_{name}"), expected_ok && none_extra, items.len() as f64, tolerance);
            report.verdict(format!("audit_reproducible_{name}"), a == again, 0.0, "identical reports under fixed seed");
            report.audits.push(AuditRecord { label: name, report: a });
        }
    }
    Ok(report)
}

/// Sparse recovery with the l1 MAP estimator against coordinate descent.
pub fn run_map_demo(cfg: &ExperimentConfig, p: &MapDemoParams) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new("map_demo", cfg.seed);
    let one = DMatrix::from_row_slice(1, 1, &[1.0]);
    let st = map_estimate_l1(&one, &[2.0], 1.0, 1.0, p.tol)?;
    report.verdict("soft_threshold_closed_form", (st.solution[0] - 1.0).abs() <= 1e-10, st.solution[0], "|u - 1| <= 1e-10");

    let stream = SeedStream::new(cfg.seed).fork(0x4d41_5044);
    let mut worst_gap = 0.0f64;
    let mut worst_increase = 0.0f64;
    let mut strong_zero = true;
    let mut recovered = vec![0usize; p.lambdas.len()];
    for inst in 0..p.instances {
        let mut rng = stream.rng(inst as u64, 0);
        let a = DMatrix::from_fn(p.rows, p.cols, |_, _| rng.standard_normal() / (p.rows as f64).sqrt());
        let mut truth = vec![0.0; p.cols];
        let mut support = Vec::new();
        while support.len() < p.sparsity.min(p.cols) {
            let j = (rng.next_u64() % p.cols as u64) as usize;
            if !support.contains(&j) {
                support.push(j);
                truth[j] = if rng.uniform() < 0.5 { -1.0 } else { 1.0 } * (1.0 + rng.uniform());
            }
        }
        support.sort_unstable();
        let clean = &a * nalgebra::DVector::from_column_slice(&truth);
        let y: Vec<f64> = clean.iter().map(|v| v + p.sigma * rng.standard_normal()).collect();
        for (li, &lambda) in p.lambdas.iter().enumerate() {
            let tau = p.sigma * p.sigma / lambda;
            let ista = map_estimate_l1(&a, &y, p.sigma, lambda, p.tol)?;
            let cd = lasso_coordinate_descent(&a, &y, tau, p.tol)?;
            let gap = (ista.objective - cd.objective).abs();
            worst_gap = worst_gap.max(gap);
            worst_increase = worst_increase.max(ista.max_increase);
            report.points.push(Point::exact(&format!("objective_gap_lambda_{lambda}"), inst as f64, gap));
            let found: Vec<usize> = (0..p.cols).filter(|&j| ista.solution[j].abs() > 1e-8).collect();
            if found == support {
                recovered[li] += 1;
            }
        }
        // tau = sigma^2 / lambda large enough to kill every coordinate
        let aty = a.transpose() * nalgebra::DVector::from_column_slice(&y);
        let tau_max = aty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let strong = map_estimate_l1(&a, &y, p.sigma, p.sigma * p.sigma / (2.0 * tau_max + 1.0), p.tol)?;
        strong_zero &= strong.solution.iter().all(|v| *v == 0.0);
    }
    for (li, &lambda) in p.lambdas.iter().enumerate() {
        report.points.push(Point::exact("support_recovery", lambda, recovered[li] as f64 / p.instances.max(1) as f64));
    }
    report.verdict(
        "objective_matches_coordinate_descent",
        worst_gap <= p.objective_tol,
        worst_gap,
        format!("max |F_ista - F_cd| <= {:e}", p.objective_tol),
    );
    report.verdict("objective_monotone", worst_increase <= 1e-12, worst_increase, "objective increase between iterates <= 1e-12 (rounding)");
    report.verdict("strong_regularization_zero", strong_zero, 0.0, "solution == 0 once sigma^2/lambda >= max |A^T y|");
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(kind, 3);
        cfg.effort.samples = 4000;
        cfg
    }

    #[test]
    fn unknown_model_id_is_an_error() {
        let cfg = small(ExperimentKind::from_name("audit").unwrap());
        assert!(matches!(cfg.model("nope"), Err(Error::UnknownKind(_))));
        assert!(ExperimentKind::from_name("nope").is_err());
    }

    #[test]
    fn tail_sum_oracle_matches_direct_sum() {
        let sched = CoefficientSchedule::AlgebraicFourier { s: 1.25 };
        let o = tail_sum_oracle(&sched, 8, 100_000).unwrap();
        let direct: f64 = (8..200_000).map(|k| (1.0 + (k as f64).powi(2)).powf(-2.5)).sum::<f64>()
            + (9..200_000).map(|k| (1.0 + (k as f64).powi(2)).powf(-2.5)).sum::<f64>();
        assert!((o - direct.sqrt()).abs() / o < 1e-9);
    }

    #[test]
    fn audit_and_map_demo_pass() {
        let mut a = small(ExperimentKind::from_name("audit").unwrap());
        a.kind = ExperimentKind::Audit(AuditParams { samples: 2000, ..AuditParams::default() });
        let r = run(&a).unwrap();
        assert!(r.pass, "{:?}", r.failures().collect::<Vec<_>>());
        let m = run(&small(ExperimentKind::from_name("map_demo").unwrap())).unwrap();
        assert!(m.pass, "{:?}", m.failures().collect::<Vec<_>>());
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = small(ExperimentKind::Stability(StabilityParams { directions: vec![0], ..StabilityParams::default() }));
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }
}
