//! Finite-dimensional posteriors `mu^y(du) ∝ exp(-Phi(u; y)) mu_0(du)`.
//!
//! All estimators reweight draws from the prior, so comparing several
//! posteriors under one seed uses one shared sample set. Low-dimensional
//! specs (at most two coordinates) can also be integrated by tensor
//! Gauss–Legendre quadrature against the prior density.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::Potential;
use crate::math::{pairwise_sum, GaussLegendre};
use crate::measures1d::Distribution1D;
use crate::rng::SeedStream;
use crate::series_prior::{convexity_from_points, window_len, BoxRegion, CoefficientLaw, ConvexityReport, Functional, SeriesPrior};

/// Prior on the coefficient vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorSpec {
    Series(SeriesPrior),
    /// Independent coordinates with the given laws.
    Product(Vec<Distribution1D>),
}

impl PriorSpec {
    /// Number of coefficients at truncation `N`. Product priors ignore `N`.
    pub fn dim(&self, truncation: usize) -> usize {
        match self {
            Self::Series(_) => window_len(truncation),
            Self::Product(laws) => laws.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Series(p) => p.validate(),
            Self::Product(laws) => {
                if laws.is_empty() {
                    return Err(Error::InvalidArgument("product prior needs at least one law"));
                }
                laws.iter().try_for_each(Distribution1D::validate)
            }
        }
    }

    pub fn sample_into(&self, stream: &SeedStream, sample_id: u64, out: &mut [f64]) {
        match self {
            Self::Series(p) => p.sample_into(stream, sample_id, out),
            Self::Product(laws) => {
                for (p, (c, law)) in out.iter_mut().zip(laws).enumerate() {
                    *c = law.sample(&mut stream.rng(sample_id, p as u64));
                }
            }
        }
    }

    pub fn log_density(&self, coeffs: &[f64]) -> f64 {
        match self {
            Self::Series(p) => p.log_density(coeffs),
            Self::Product(laws) => coeffs.iter().zip(laws).map(|(c, l)| l.log_density(*c)).sum(),
        }
    }

    /// Scale used for random-walk proposals on coordinate `p`.
    fn proposal_scale(&self, p: usize) -> f64 {
        match self {
            Self::Series(s) => s.scale(p) * s.law.second_moment().sqrt(),
            Self::Product(laws) => laws[p].variance().sqrt(),
        }
    }

    fn coordinate(&self, p: usize) -> Coordinate {
        match self {
            Self::Series(s) => Coordinate::Scaled(s.law.clone(), s.scale(p)),
            Self::Product(laws) => Coordinate::Plain(laws[p]),
        }
    }
}

/// One-dimensional marginal of a prior coordinate, for quadrature.
enum Coordinate {
    Scaled(CoefficientLaw, f64),
    Plain(Distribution1D),
}

impl Coordinate {
    /// Nodes and weights (density already folded in).
    fn rule(&self, rule: &GaussLegendre, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi, kinks, density): (f64, f64, Vec<f64>, &dyn Fn(f64) -> f64) = match self {
            Self::Scaled(_, s) if *s == 0.0 => return (alloc::vec![0.0], alloc::vec![1.0]),
            Self::Scaled(law, s) => {
                let (lo, hi) = law.effective_range();
                let kinks = law.kink_points().iter().map(|k| k * s).collect();
                (lo * s, hi * s, kinks, &move |x: f64| law.density(x / s) / s)
            }
            Self::Plain(d) => {
                let (lo, hi) = (d.quantile(QUAD_TAIL), d.quantile(1.0 - QUAD_TAIL));
                let kinks = d.kink_points().iter().flatten().copied().collect();
                (lo, hi, kinks, &move |x: f64| d.density(x))
            }
        };
        let (xs, ws) = rule.composite_points(lo, hi, &kinks, panels);
        let ws = xs.iter().zip(ws).map(|(x, w)| w * density(*x)).collect();
        (xs, ws)
    }
}

const QUAD_TAIL: f64 = 1e-13;
const QUAD_ORDER: usize = 16;
/// Default panels per axis for the quadrature path.
pub const DEFAULT_QUADRATURE_PANELS: usize = 256;

/// Prior, potential and truncation level.
#[derive(Clone, Debug)]
pub struct PosteriorSpec {
    pub prior: PriorSpec,
    pub potential: Potential,
    pub truncation: usize,
}

impl PosteriorSpec {
    pub fn new(prior: PriorSpec, potential: Potential, truncation: usize) -> Result<Self> {
        prior.validate()?;
        let dim = prior.dim(truncation);
        if potential.input_dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: potential.input_dim() });
        }
        Ok(Self { prior, potential, truncation })
    }

    pub fn dim(&self) -> usize {
        self.prior.dim(self.truncation)
    }

    /// Same prior, different potential.
    pub fn with_potential(&self, potential: Potential) -> Result<Self> {
        Self::new(self.prior.clone(), potential, self.truncation)
    }

    /// Unnormalized log posterior density w.r.t. Lebesgue measure.
    pub fn log_target(&self, coeffs: &[f64]) -> Result<f64> {
        let lp = self.prior.log_density(coeffs);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        Ok(lp - self.potential.evaluate(coeffs)?)
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.prior != other.prior || self.dim() != other.dim() {
            return Err(Error::IncompatiblePriors);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    PriorMc,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Quadrature => "quadrature",
            Self::PriorMc => "prior_mc",
        }
    }
}

/// Value with its standard error and the effort that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    /// Sample count, or total quadrature nodes.
    pub effort: usize,
    pub seed: u64,
    /// A negative radicand was clamped to zero.
    #[serde(default)]
    pub clamped: bool,
}

pub type HellingerEstimate = Estimate;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub z: f64,
    pub stderr: f64,
    pub log_z: f64,
    pub effective_sample_size: f64,
    pub num_samples: usize,
}

/// Potential values on a shared node set: `phi[j][i]` is spec `j` at node `i`,
/// `weight[i]` the reference weight of node `i`.
#[derive(Clone, Debug)]
pub struct PotentialTable {
    pub phi: Vec<Vec<f64>>,
    pub weight: Vec<f64>,
    pub method: Method,
    pub seed: u64,
}

impl PotentialTable {
    /// Evaluate every spec on `num_samples` shared prior draws. The extra
    /// closure sees each draw, e.g. to record test functions.
    pub fn prior_mc<F>(specs: &[&PosteriorSpec], num_samples: usize, seed: u64, mut visit: F) -> Result<Self>
    where
        F: FnMut(usize, &[f64]),
    {
        let first = specs.first().ok_or(Error::InvalidArgument("no posterior given"))?;
        for s in &specs[1..] {
            first.compatible(s)?;
        }
        if num_samples < 2 {
            return Err(Error::InvalidArgument("need at least two samples"));
        }
        let stream = SeedStream::new(seed);
        let mut buf = alloc::vec![0.0; first.dim()];
        let mut phi: Vec<Vec<f64>> = specs.iter().map(|_| Vec::with_capacity(num_samples)).collect();
        for i in 0..num_samples {
            first.prior.sample_into(&stream, i as u64, &mut buf);
            for (col, s) in phi.iter_mut().zip(specs) {
                col.push(s.potential.evaluate(&buf)?);
            }
            visit(i, &buf);
        }
        Ok(Self { phi, weight: alloc::vec![1.0; num_samples], method: Method::PriorMc, seed })
    }

    /// Tensor Gauss–Legendre nodes over the prior density (dimension <= 2).
    pub fn quadrature<F>(specs: &[&PosteriorSpec], panels: usize, mut visit: F) -> Result<Self>
    where
        F: FnMut(usize, &[f64]),
    {
        let first = specs.first().ok_or(Error::InvalidArgument("no posterior given"))?;
        for s in &specs[1..] {
            first.compatible(s)?;
        }
        let dim = first.dim();
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidArgument("quadrature path supports one or two coordinates"));
        }
        if panels == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one panel"));
        }
        let rule = GaussLegendre::new(QUAD_ORDER);
        let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..dim).map(|p| first.prior.coordinate(p).rule(&rule, panels)).collect();
        let mut nodes: Vec<(Vec<f64>, f64)> = Vec::new();
        if dim == 1 {
            for (x, w) in axes[0].0.iter().zip(&axes[0].1) {
                nodes.push((alloc::vec![*x], *w));
            }
        } else {
            for (x, wx) in axes[0].0.iter().zip(&axes[0].1) {
                for (y, wy) in axes[1].0.iter().zip(&axes[1].1) {
                    nodes.push((alloc::vec![*x, *y], wx * wy));
                }
            }
        }
        let mut phi: Vec<Vec<f64>> = specs.iter().map(|_| Vec::with_capacity(nodes.len())).collect();
        let mut weight = Vec::with_capacity(nodes.len());
        for (i, (u, w)) in nodes.iter().enumerate() {
            for (col, s) in phi.iter_mut().zip(specs) {
                col.push(s.potential.evaluate(u)?);
            }
            weight.push(*w);
            visit(i, u);
        }
        Ok(Self { phi, weight, method: Method::Quadrature, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// Shifted likelihood weights `exp(-(Phi - min Phi))` and the shift.
    pub fn likelihood_weights(&self, j: usize) -> Result<(Vec<f64>, f64)> {
        let shift = self.phi[j].iter().copied().fold(f64::INFINITY, f64::min);
        if !shift.is_finite() {
            return Err(Error::ZeroEffectiveSampleSize);
        }
        Ok((self.phi[j].iter().map(|p| (-(p - shift)).exp()).collect(), shift))
    }

    /// Reference-weighted mean and its standard error given per-node
    /// influence values.
    fn mean(&self, v: &[f64]) -> f64 {
        match self.method {
            Method::PriorMc => pairwise_sum(v) / v.len() as f64,
            Method::Quadrature => {
                let t: Vec<f64> = v.iter().zip(&self.weight).map(|(a, w)| a * w).collect();
                pairwise_sum(&t)
            }
        }
    }

    fn influence_stderr(&self, psi: &[f64]) -> f64 {
        match self.method {
            Method::PriorMc => {
                let n = psi.len() as f64;
                let m = pairwise_sum(psi) / n;
                let ss: Vec<f64> = psi.iter().map(|v| (v - m) * (v - m)).collect();
                (pairwise_sum(&ss) / (n - 1.0) / n).sqrt()
            }
            Method::Quadrature => 0.0,
        }
    }

    fn effort(&self) -> usize {
        self.len()
    }

    pub fn normalization(&self, j: usize) -> Result<Normalization> {
        let (w, shift) = self.likelihood_weights(j)?;
        let zs = self.mean(&w);
        if !(zs > 0.0) {
            return Err(Error::ZeroEffectiveSampleSize);
        }
        let psi: Vec<f64> = w.iter().map(|v| v - zs).collect();
        let se = self.influence_stderr(&psi);
        let scale = (-shift).exp();
        let ess = match self.method {
            Method::PriorMc => {
                let s1 = pairwise_sum(&w);
                let sq: Vec<f64> = w.iter().map(|v| v * v).collect();
                s1 * s1 / pairwise_sum(&sq)
            }
            Method::Quadrature => self.len() as f64,
        };
        Ok(Normalization { z: zs * scale, stderr: se * scale, log_z: zs.ln() - shift, effective_sample_size: ess, num_samples: self.len() })
    }

    pub fn hellinger(&self, j: usize, k: usize) -> Result<Estimate> {
        let (w1, s1) = self.likelihood_weights(j)?;
        let (w2, s2) = self.likelihood_weights(k)?;
        let a: Vec<f64> = self.phi[j]
            .iter()
            .zip(&self.phi[k])
            .map(|(p, q)| (-((p + q) - (s1 + s2)) / 2.0).exp())
            .collect();
        let z1 = self.mean(&w1);
        let z2 = self.mean(&w2);
        if !(z1 > 0.0 && z2 > 0.0) {
            return Err(Error::ZeroEffectiveSampleSize);
        }
        let am = self.mean(&a);
        let root = (z1 * z2).sqrt();
        let ratio = am / root;
        let radicand = 1.0 - ratio;
        let clamped = radicand < 0.0;
        let value = radicand.max(0.0).sqrt();
        let psi: Vec<f64> = (0..self.len())
            .map(|i| (a[i] - am) / root - 0.5 * ratio * (w1[i] - z1) / z1 - 0.5 * ratio * (w2[i] - z2) / z2)
            .collect();
        let se_ratio = self.influence_stderr(&psi);
        let stderr = if value > 0.0 { (se_ratio / (2.0 * value)).min(se_ratio.sqrt()) } else { se_ratio.sqrt() };
        Ok(Estimate { value, stderr, method: self.method, effort: self.effort(), seed: self.seed, clamped })
    }

    pub fn total_variation(&self, j: usize, k: usize) -> Result<Estimate> {
        let (w1, _) = self.likelihood_weights(j)?;
        let (w2, _) = self.likelihood_weights(k)?;
        let z1 = self.mean(&w1);
        let z2 = self.mean(&w2);
        if !(z1 > 0.0 && z2 > 0.0) {
            return Err(Error::ZeroEffectiveSampleSize);
        }
        let diff: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a / z1 - b / z2).collect();
        let t: Vec<f64> = diff.iter().map(|d| 0.5 * d.abs()).collect();
        let value = self.mean(&t);
        let sign_w = |w: &[f64], z: f64| -> f64 {
            let v: Vec<f64> = diff.iter().zip(w).map(|(d, wi)| d.signum() * wi / z).collect();
            self.mean(&v)
        };
        let g1 = -0.5 * sign_w(&w1, z1) / z1;
        let g2 = 0.5 * sign_w(&w2, z2) / z2;
        let psi: Vec<f64> = (0..self.len()).map(|i| t[i] - value + g1 * (w1[i] - z1) + g2 * (w2[i] - z2)).collect();
        let stderr = self.influence_stderr(&psi);
        Ok(Estimate { value: value.min(1.0), stderr, method: self.method, effort: self.effort(), seed: self.seed, clamped: false })
    }

    /// Self-normalized `|E_j h - E_k h|` with `h` recorded per node.
    pub fn expectation_gap(&self, j: usize, k: usize, h: &[f64]) -> Result<ExpectationGap> {
        let (w1, _) = self.likelihood_weights(j)?;
        let (w2, _) = self.likelihood_weights(k)?;
        let z1 = self.mean(&w1);
        let z2 = self.mean(&w2);
        let wh = |w: &[f64], sq: bool| -> f64 {
            let v: Vec<f64> = w.iter().zip(h).map(|(a, b)| if sq { a * b * b } else { a * b }).collect();
            self.mean(&v)
        };
        let e1 = wh(&w1, false) / z1;
        let e2 = wh(&w2, false) / z2;
        let m1 = wh(&w1, true) / z1;
        let m2 = wh(&w2, true) / z2;
        if !(m1.is_finite() && m2.is_finite()) {
            return Err(Error::InvalidArgument("test function is not square integrable on the sample"));
        }
        let psi: Vec<f64> = (0..self.len())
            .map(|i| w1[i] * (h[i] - e1) / z1 - w2[i] * (h[i] - e2) / z2)
            .collect();
        let stderr = self.influence_stderr(&psi);
        let dh = self.hellinger(j, k)?;
        let lhs = (e1 - e2).abs();
        let rhs_bound = 2.0 * (m1 + m2).sqrt() * dh.value;
        let rhs_stderr = 2.0 * (m1 + m2).sqrt() * dh.stderr;
        let tolerance = 3.0 * (stderr * stderr + rhs_stderr * rhs_stderr).sqrt();
        Ok(ExpectationGap {
            lhs,
            rhs_bound,
            lhs_stderr: stderr,
            rhs_stderr,
            mean_1: e1,
            mean_2: e2,
            second_moment_1: m1,
            second_moment_2: m2,
            hellinger: dh.value,
            pass: lhs <= rhs_bound + tolerance,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationGap {
    pub lhs: f64,
    pub rhs_bound: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    pub mean_1: f64,
    pub mean_2: f64,
    pub second_moment_1: f64,
    pub second_moment_2: f64,
    pub hellinger: f64,
    pub pass: bool,
}

fn table(specs: &[&PosteriorSpec], method: Method, effort: usize, seed: u64) -> Result<PotentialTable> {
    match method {
        Method::PriorMc => PotentialTable::prior_mc(specs, effort, seed, |_, _| {}),
        Method::Quadrature => PotentialTable::quadrature(specs, effort, |_, _| {}),
    }
}

/// Prior Monte Carlo estimate of `Z(y) = E_0 exp(-Phi(u; y))`.
pub fn normalization(spec: &PosteriorSpec, num_samples: usize, seed: u64) -> Result<Normalization> {
    if num_samples < 1000 {
        return Err(Error::InvalidArgument("normalization needs at least 1000 samples"));
    }
    PotentialTable::prior_mc(&[spec], num_samples, seed, |_, _| {})?.normalization(0)
}

/// Hellinger distance `sqrt(1 - A / sqrt(Z_1 Z_2))` with the prior as reference.
/// `effort` is the sample count, or panels per axis for quadrature.
pub fn hellinger(s1: &PosteriorSpec, s2: &PosteriorSpec, method: Method, effort: usize, seed: u64) -> Result<Estimate> {
    table(&[s1, s2], method, effort, seed)?.hellinger(0, 1)
}

pub fn total_variation(s1: &PosteriorSpec, s2: &PosteriorSpec, method: Method, effort: usize, seed: u64) -> Result<Estimate> {
    table(&[s1, s2], method, effort, seed)?.total_variation(0, 1)
}

/// Check `|E_1 h - E_2 h| <= 2 (E_1 h^2 + E_2 h^2)^(1/2) d_H` on shared prior draws.
pub fn expectation_gap_check<H>(h: H, s1: &PosteriorSpec, s2: &PosteriorSpec, num_samples: usize, seed: u64) -> Result<ExpectationGap>
where
    H: Fn(&[f64]) -> f64,
{
    let mut values = Vec::with_capacity(num_samples);
    let t = PotentialTable::prior_mc(&[s1, s2], num_samples, seed, |_, u| values.push(h(u)))?;
    t.expectation_gap(0, 1, &values)
}

/// Convexity inequality on a posterior marginal, by reweighting prior draws.
pub fn posterior_convexity_test(
    spec: &PosteriorSpec,
    functionals: &[Functional],
    a: &BoxRegion,
    b: &BoxRegion,
    lambda: f64,
    num_samples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    if functionals.is_empty() || functionals.len() > 2 {
        return Err(Error::InvalidArgument("convexity test takes one or two functionals"));
    }
    if functionals.iter().flat_map(|f| f.terms.iter()).any(|t| t.0 >= spec.dim()) {
        return Err(Error::InvalidArgument("functional coordinate outside truncation window"));
    }
    let mut points = Vec::with_capacity(num_samples);
    let t = PotentialTable::prior_mc(&[spec], num_samples, seed, |_, u| {
        points.push(functionals.iter().map(|f| f.apply(u)).collect::<Vec<f64>>())
    })?;
    let (w, _) = t.likelihood_weights(0)?;
    convexity_from_points(points, Some(&w), a, b, lambda)
}

/// Random-walk Metropolis output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub states: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub step_size: f64,
}

impl Chain {
    pub fn coordinate(&self, p: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[p]).collect()
    }

    /// Mean of coordinate `p` with a batch-means standard error.
    pub fn mean_with_stderr(&self, p: usize) -> (f64, f64) {
        let xs = self.coordinate(p);
        let n = xs.len();
        let batches = ((n as f64).sqrt() as usize).max(2);
        let size = n / batches;
        let means: Vec<f64> = (0..batches).map(|b| pairwise_sum(&xs[b * size..(b + 1) * size]) / size as f64).collect();
        let (m, se) = crate::math::mean_stderr(&means);
        (m, se)
    }
}

const MCMC_TAG: u64 = 0x4d43_4d43;

/// Metropolis–Hastings with Gaussian proposals `u' = u + step * s_p * z`,
/// `s_p` the prior scale of coordinate `p`. Starts from a prior draw.
pub fn rw_metropolis(spec: &PosteriorSpec, num_steps: usize, step_size: f64, seed: u64) -> Result<Chain> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidArgument("step size must be > 0"));
    }
    let dim = spec.dim();
    let scales: Vec<f64> = (0..dim).map(|p| spec.prior.proposal_scale(p)).collect();
    let stream = SeedStream::new(seed).fork(MCMC_TAG);
    let mut current = alloc::vec![0.0; dim];
    spec.prior.sample_into(&SeedStream::new(seed).fork(MCMC_TAG + 1), 0, &mut current);
    let mut current_lp = spec.log_target(&current)?;
    let mut states = Vec::with_capacity(num_steps);
    let mut accepted = 0usize;
    let mut proposal = alloc::vec![0.0; dim];
    for step in 0..num_steps {
        let mut rng = stream.rng(step as u64, 0);
        for ((q, c), s) in proposal.iter_mut().zip(&current).zip(&scales) {
            *q = c + step_size * s * rng.standard_normal();
        }
        let lp = spec.log_target(&proposal)?;
        let log_u = rng.uniform().ln();
        if lp > f64::NEG_INFINITY && log_u < lp - current_lp {
            current.copy_from_slice(&proposal);
            current_lp = lp;
            accepted += 1;
        }
        states.push(current.clone());
    }
    let acceptance_rate = if num_steps == 0 { 0.0 } else { accepted as f64 / num_steps as f64 };
    Ok(Chain { states, acceptance_rate, step_size })
}

/// Pilot runs that adjust the step size toward an acceptance rate of 0.3.
pub fn tune_step_size(spec: &PosteriorSpec, seed: u64) -> Result<f64> {
    let mut step = 2.38 / (spec.dim() as f64).sqrt();
    for round in 0..30 {
        let chain = rw_metropolis(spec, 400, step, seed.wrapping_add(round))?;
        let acc = chain.acceptance_rate;
        if (0.2..=0.4).contains(&acc) {
            break;
        }
        step *= ((acc - 0.3) * 3.0).exp();
    }
    Ok(step)
}

/// Result of an l1-regularized least-squares solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub solution: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest objective increase between successive iterates (0 when monotone).
    pub max_increase: f64,
}

pub const MAP_MAX_ITERATIONS: usize = 1_000_000;

/// `1/2 ||A z - y||^2 + tau ||z||_1`.
pub fn l1_objective(a: &DMatrix<f64>, y: &[f64], tau: f64, z: &[f64]) -> f64 {
    let mut r = 0.0;
    for i in 0..a.nrows() {
        let mut v = -y[i];
        for (j, zj) in z.iter().enumerate() {
            v += a[(i, j)] * zj;
        }
        r += v * v;
    }
    0.5 * r + tau * z.iter().map(|v| v.abs()).sum::<f64>()
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn check_lasso(a: &DMatrix<f64>, y: &[f64], tol: f64) -> Result<()> {
    if y.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: y.len() });
    }
    if a.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix and data must be finite"));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be > 0"));
    }
    Ok(())
}

/// MAP point for a Laplace prior with Gaussian noise: iterative
/// soft-thresholding on `1/2 ||A z - y||^2 + (sigma^2 / lambda) ||z||_1`.
pub fn map_estimate_l1(a: &DMatrix<f64>, y: &[f64], sigma: f64, lambda: f64, tol: f64) -> Result<MapResult> {
    check_lasso(a, y, tol)?;
    if !(sigma > 0.0 && lambda > 0.0) {
        return Err(Error::InvalidArgument("sigma and lambda must be > 0"));
    }
    let tau = sigma * sigma / lambda;
    let n = a.ncols();
    let lip = {
        let s = a.clone().svd(false, false).singular_values;
        let top = s.iter().copied().fold(0.0, f64::max);
        top * top
    };
    let mut z = alloc::vec![0.0; n];
    let mut obj = l1_objective(a, y, tau, &z);
    if lip == 0.0 {
        return Ok(MapResult { solution: z, objective: obj, iterations: 0, max_increase: 0.0 });
    }
    let step = 1.0 / lip;
    let yv = nalgebra::DVector::from_column_slice(y);
    let mut max_increase = 0.0f64;
    let mut delta = f64::INFINITY;
    for it in 1..=MAP_MAX_ITERATIONS {
        let zv = nalgebra::DVector::from_column_slice(&z);
        let grad = a.transpose() * (a * &zv - &yv);
        delta = 0.0;
        for j in 0..n {
            let next = soft_threshold(z[j] - step * grad[j], step * tau);
            delta = delta.max((next - z[j]).abs());
            z[j] = next;
        }
        let next_obj = l1_objective(a, y, tau, &z);
        max_increase = max_increase.max(next_obj - obj);
        obj = next_obj;
        if delta < tol {
            return Ok(MapResult { solution: z, objective: obj, iterations: it, max_increase });
        }
    }
    Err(Error::NotConverged { iterations: MAP_MAX_ITERATIONS, residual: delta })
}

/// Cyclic coordinate descent for `1/2 ||A z - y||^2 + tau ||z||_1`.
pub fn lasso_coordinate_descent(a: &DMatrix<f64>, y: &[f64], tau: f64, tol: f64) -> Result<MapResult> {
    check_lasso(a, y, tol)?;
    let (m, n) = (a.nrows(), a.ncols());
    let col_sq: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
    let mut z = alloc::vec![0.0; n];
    let mut r: Vec<f64> = y.to_vec();
    let start = l1_objective(a, y, tau, &z);
    let mut delta = f64::INFINITY;
    for sweep in 1..=MAP_MAX_ITERATIONS {
        delta = 0.0;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                continue;
            }
            let rho: f64 = (0..m).map(|i| a[(i, j)] * r[i]).sum::<f64>() + col_sq[j] * z[j];
            let next = soft_threshold(rho, tau) / col_sq[j];
            let d = next - z[j];
            if d != 0.0 {
                for i in 0..m {
                    r[i] -= a[(i, j)] * d;
                }
                z[j] = next;
            }
            delta = delta.max(d.abs());
        }
        if delta < tol {
            let objective = l1_objective(a, y, tau, &z);
            return Ok(MapResult { solution: z, objective, iterations: sweep, max_increase: (objective - start).max(0.0) });
        }
    }
    Err(Error::NotConverged { iterations: MAP_MAX_ITERATIONS, residual: delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ForwardModel;
    use crate::likelihood::NoiseCovariance;
    use alloc::vec;

    fn gaussian_pair() -> (PosteriorSpec, PosteriorSpec) {
        let prior = PriorSpec::Product(vec![Distribution1D::Gaussian { m: 0.0, sigma: 2f64.sqrt() }]);
        let model = ForwardModel::linear(vec![vec![1.0]]).unwrap();
        let mk = |y: f64| {
            let phi = Potential::gaussian(model.clone(), NoiseCovariance::Scaled { sigma2: 2.0 }, vec![y]).unwrap();
            PosteriorSpec::new(prior.clone(), phi, 1).unwrap()
        };
        (mk(0.0), mk(2.0))
    }

    #[test]
    fn flat_potential_has_unit_normalization() {
        let prior = PriorSpec::Product(vec![Distribution1D::Laplace { m: 0.0, sigma: 1.0 }]);
        let spec = PosteriorSpec::new(prior, Potential::custom("zero", 1, |_| 0.0), 1).unwrap();
        let z = normalization(&spec, 1000, 3).unwrap();
        assert_eq!(z.z, 1.0);
        assert_eq!(z.stderr, 0.0);
        assert!(normalization(&spec, 10, 3).is_err());
    }

    #[test]
    fn gaussian_oracles_by_quadrature() {
        let (a, b) = gaussian_pair();
        let h = hellinger(&a, &b, Method::Quadrature, DEFAULT_QUADRATURE_PANELS, 0).unwrap();
        assert!((h.value - (1.0 - (-0.125f64).exp()).sqrt()).abs() < 1e-6, "{}", h.value);
        let tv = total_variation(&a, &b, Method::Quadrature, DEFAULT_QUADRATURE_PANELS, 0).unwrap();
        let exact = 2.0 * crate::math::normal_cdf(0.5) - 1.0;
        assert!((tv.value - exact).abs() < 1e-5, "{}", tv.value);
    }

    #[test]
    fn identical_specs_are_exactly_zero_and_symmetric() {
        let (a, b) = gaussian_pair();
        let same = hellinger(&a, &a, Method::PriorMc, 5000, 9).unwrap();
        assert_eq!(same.value, 0.0);
        assert_eq!(same.stderr, 0.0);
        let ab = hellinger(&a, &b, Method::PriorMc, 5000, 9).unwrap();
        let ba = hellinger(&b, &a, Method::PriorMc, 5000, 9).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn incompatible_priors_rejected() {
        let (a, _) = gaussian_pair();
        let prior = PriorSpec::Product(vec![Distribution1D::Laplace { m: 0.0, sigma: 1.0 }]);
        let other = PosteriorSpec::new(prior, a.potential.clone(), 1).unwrap();
        assert_eq!(hellinger(&a, &other, Method::PriorMc, 100, 0), Err(Error::IncompatiblePriors));
    }

    #[test]
    fn disjoint_supports_have_unit_distance() {
        let prior = PriorSpec::Product(vec![Distribution1D::Uniform { a: 0.0, b: 1.0 }]);
        let left = Potential::custom("left", 1, |u| if u[0] < 0.5 { 0.0 } else { f64::INFINITY });
        let right = Potential::custom("right", 1, |u| if u[0] >= 0.5 { 0.0 } else { f64::INFINITY });
        let a = PosteriorSpec::new(prior.clone(), left, 1).unwrap();
        let b = PosteriorSpec::new(prior, right, 1).unwrap();
        assert_eq!(hellinger(&a, &b, Method::PriorMc, 2000, 1).unwrap().value, 1.0);
        assert_eq!(total_variation(&a, &b, Method::PriorMc, 2000, 1).unwrap().value, 1.0);
    }

    #[test]
    fn constant_test_function_has_no_gap() {
        let (a, b) = gaussian_pair();
        let g = expectation_gap_check(|_| 1.0, &a, &b, 2000, 4).unwrap();
        assert!(g.lhs < 1e-12);
        assert!(g.pass);
    }

    #[test]
    fn soft_threshold_closed_form() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let r = map_estimate_l1(&a, &[2.0], 1.0, 1.0, 1e-14).unwrap();
        assert!((r.solution[0] - 1.0).abs() < 1e-12);
        let zero = map_estimate_l1(&a, &[0.0], 1.0, 1.0, 1e-14).unwrap();
        assert_eq!(zero.solution, vec![0.0]);
    }

    #[test]
    fn conjugate_metropolis_mean() {
        // prior N(0, 1), y = 1, sigma^2 = 1: posterior N(1/2, 1/2)
        let prior = PriorSpec::Product(vec![Distribution1D::Gaussian { m: 0.0, sigma: 1.0 }]);
        let model = ForwardModel::linear(vec![vec![1.0]]).unwrap();
        let phi = Potential::gaussian(model, NoiseCovariance::Scaled { sigma2: 1.0 }, vec![1.0]).unwrap();
        let spec = PosteriorSpec::new(prior, phi, 1).unwrap();
        let step = tune_step_size(&spec, 2).unwrap();
        let chain = rw_metropolis(&spec, 40_000, step, 5).unwrap();
        assert!(chain.acceptance_rate > 0.1 && chain.acceptance_rate < 0.7);
        let (m, se) = chain.mean_with_stderr(0);
        assert!((m - 0.5).abs() < 3.0 * se + 1e-3, "{m} ± {se}");
    }
}
