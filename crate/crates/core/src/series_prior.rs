//! Convex priors built as random series `u = c * sum_k gamma_k xi_k x_k`.
//!
//! Coefficients are stored in enumeration order `0, -1, 1, -2, 2, ...`, so
//! the truncation window `{-N, ..., N-1}` is always the first `2N` entries.
//! Every coefficient draw is addressed by `(seed, sample id, position)`,
//! which makes sampling nested: the first `2N` coefficients of a sample at
//! truncation `2N` are the sample at truncation `N`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mean_stderr, pairwise_sum};
use crate::measures1d::Distribution1D;
use crate::rng::{Rng, SeedStream};

/// Integer mode index of an enumeration position.
pub fn mode_index(position: usize) -> i64 {
    let j = position.div_ceil(2) as i64;
    if position % 2 == 1 {
        -j
    } else {
        j
    }
}

/// Enumeration position of an integer mode index.
pub fn position_of(k: i64) -> usize {
    if k <= 0 {
        (2 * (-k)) as usize - usize::from(k < 0)
    } else {
        2 * k as usize
    }
}

/// Number of coefficients in the truncation window `{-N, ..., N-1}`.
pub fn window_len(truncation: usize) -> usize {
    2 * truncation
}

/// Evaluation callback for a user supplied orthonormal basis, indexed by
/// enumeration position.
#[derive(Clone)]
pub struct OrthonormalBasis {
    pub domain: (f64, f64),
    eval: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
}

impl OrthonormalBasis {
    pub fn new<F>(domain: (f64, f64), eval: F) -> Self
    where
        F: Fn(usize, f64) -> f64 + Send + Sync + 'static,
    {
        Self { domain, eval: Arc::new(eval) }
    }
}

impl core::fmt::Debug for OrthonormalBasis {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("OrthonormalBasis").field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl PartialEq for OrthonormalBasis {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && Arc::ptr_eq(&self.eval, &other.eval)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Real trigonometric basis on the circle of circumference 1:
    /// `1`, `sqrt2 sin(2 pi j x)` for mode `-j`, `sqrt2 cos(2 pi j x)` for mode `j`.
    FourierCircle,
    #[serde(skip)]
    Orthonormal(OrthonormalBasis),
}

impl Basis {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Basis::FourierCircle => (0.0, 1.0),
            Basis::Orthonormal(b) => b.domain,
        }
    }

    pub fn eval(&self, position: usize, x: f64) -> f64 {
        match self {
            Basis::FourierCircle => fourier_mode(mode_index(position), x),
            Basis::Orthonormal(b) => (b.eval)(position, x),
        }
    }
}

pub(crate) fn fourier_mode(k: i64, x: f64) -> f64 {
    let arg = 2.0 * PI * (k.unsigned_abs() as f64) * x;
    match k.signum() {
        0 => 1.0,
        -1 => SQRT_2 * arg.sin(),
        _ => SQRT_2 * arg.cos(),
    }
}

/// Decay weights `gamma_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CoefficientSchedule {
    /// `(1 + k^2)^(-s)` over integer mode indices.
    AlgebraicFourier { s: f64 },
    /// `(p + 1)^(-s)` over enumeration positions.
    AlgebraicSequence { s: f64 },
    /// Listed weights; positions past the end have weight zero.
    Explicit { values: Vec<f64> },
}

impl CoefficientSchedule {
    pub fn gamma(&self, position: usize) -> f64 {
        match self {
            Self::AlgebraicFourier { s } => {
                let k = mode_index(position) as f64;
                (1.0 + k * k).powf(-s)
            }
            Self::AlgebraicSequence { s } => ((position + 1) as f64).powf(-s),
            Self::Explicit { values } => values.get(position).copied().unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::AlgebraicFourier { s } | Self::AlgebraicSequence { s } => {
                if !(s.is_finite() && *s > 0.0) {
                    return Err(Error::InvalidParameter {
                        kind: "schedule",
                        name: "s",
                        value: *s,
                        reason: "decay exponent must be > 0",
                    });
                }
            }
            Self::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidArgument("explicit schedule is empty"));
                }
                for (i, v) in values.iter().enumerate() {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(Error::InvalidParameter {
                            kind: "schedule",
                            name: "gamma",
                            value: *v,
                            reason: "weights must be positive",
                        });
                    }
                    if i > 0 && *v > values[i - 1] {
                        return Err(Error::InvalidParameter {
                            kind: "schedule",
                            name: "gamma",
                            value: *v,
                            reason: "weights must be nonincreasing",
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientLaw {
    Iid(Distribution1D),
    /// Coefficient `zeta * xi` with independent scale and mode draws.
    Hierarchical { scale_law: Distribution1D, mode_law: Distribution1D },
}

impl CoefficientLaw {
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Self::Iid(d) => d.sample(rng),
            Self::Hierarchical { scale_law, mode_law } => {
                let zeta = scale_law.sample(rng);
                let xi = mode_law.sample(rng);
                zeta * xi
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            Self::Iid(d) => d.second_moment(),
            Self::Hierarchical { scale_law, mode_law } => scale_law.second_moment() * mode_law.second_moment(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Iid(d) => d.variance(),
            Self::Hierarchical { scale_law, mode_law } => {
                let m = scale_law.mean() * mode_law.mean();
                self.second_moment() - m * m
            }
        }
    }

    /// `Var|xi|` of the unscaled coefficient.
    pub fn abs_variance(&self) -> f64 {
        match self {
            Self::Iid(d) => d.abs_variance(),
            Self::Hierarchical { scale_law, mode_law } => {
                let e = scale_law.abs_mean() * mode_law.abs_mean();
                (self.second_moment() - e * e).max(0.0)
            }
        }
    }

    /// Density of the unscaled coefficient. The hierarchical case integrates
    /// out the scale numerically.
    pub fn density(&self, v: f64) -> f64 {
        match self {
            Self::Iid(d) => d.density(v),
            Self::Hierarchical { scale_law, mode_law } => product_density(scale_law, mode_law, v),
        }
    }

    pub fn log_density(&self, v: f64) -> f64 {
        match self {
            Self::Iid(d) => d.log_density(v),
            Self::Hierarchical { .. } => self.density(v).ln(),
        }
    }

    /// Interval `[lo, hi]` carrying all but a negligible amount of mass.
    pub(crate) fn effective_range(&self) -> (f64, f64) {
        const TAIL: f64 = 1e-13;
        match self {
            Self::Iid(d) => (d.quantile(TAIL), d.quantile(1.0 - TAIL)),
            Self::Hierarchical { scale_law, mode_law } => {
                let z = scale_law.quantile(1.0 - TAIL).abs().max(scale_law.quantile(TAIL).abs());
                let x = mode_law.quantile(1.0 - TAIL).abs().max(mode_law.quantile(TAIL).abs());
                (-z * x, z * x)
            }
        }
    }

    pub(crate) fn kink_points(&self) -> Vec<f64> {
        match self {
            Self::Iid(d) => d.kink_points().iter().flatten().copied().collect(),
            Self::Hierarchical { .. } => alloc::vec![0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Iid(d) => d.validate(),
            Self::Hierarchical { scale_law, mode_law } => {
                scale_law.validate()?;
                mode_law.validate()
            }
        }
    }
}

/// Density of `zeta * xi` for independent `zeta`, `xi`:
/// `int p_zeta(z) p_xi(v / z) / |z| dz`.
fn product_density(scale: &Distribution1D, mode: &Distribution1D, v: f64) -> f64 {
    let lo = scale.quantile(1e-12);
    let hi = scale.quantile(1.0 - 1e-12);
    let breaks: Vec<f64> = scale.kink_points().iter().flatten().copied().chain([0.0]).collect();
    let rule = crate::math::GaussLegendre::new(16);
    let (zs, ws) = rule.composite_points(lo, hi, &breaks, 64);
    let vals: Vec<f64> = zs
        .iter()
        .zip(&ws)
        .map(|(&z, &w)| {
            if z == 0.0 {
                0.0
            } else {
                w * scale.density(z) * mode.density(v / z) / z.abs()
            }
        })
        .collect();
    pairwise_sum(&vals)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPrior {
    pub basis: Basis,
    pub schedule: CoefficientSchedule,
    pub law: CoefficientLaw,
    #[serde(default = "default_dilation")]
    pub dilation: f64,
}

fn default_dilation() -> f64 {
    1.0
}

impl SeriesPrior {
    pub fn new(basis: Basis, schedule: CoefficientSchedule, law: CoefficientLaw) -> Result<Self> {
        let prior = Self { basis, schedule, law, dilation: 1.0 };
        prior.validate()?;
        Ok(prior)
    }

    /// Laplace(0, 1) coefficients with `gamma_k = (1 + k^2)^(-5/4)` on the circle.
    pub fn laplace_deconvolution() -> Self {
        Self {
            basis: Basis::FourierCircle,
            schedule: CoefficientSchedule::AlgebraicFourier { s: 1.25 },
            law: CoefficientLaw::Iid(Distribution1D::Laplace { m: 0.0, sigma: 1.0 }),
            dilation: 1.0,
        }
    }

    /// Gamma(2, 1) scales times N(0, 1) modes with `gamma_k = (1 + k^2)^(-1)`.
    pub fn hierarchical_deconvolution() -> Self {
        Self {
            basis: Basis::FourierCircle,
            schedule: CoefficientSchedule::AlgebraicFourier { s: 1.0 },
            law: CoefficientLaw::Hierarchical {
                scale_law: Distribution1D::Gamma { k: 2.0, lambda: 1.0 },
                mode_law: Distribution1D::Gaussian { m: 0.0, sigma: 1.0 },
            },
            dilation: 1.0,
        }
    }

    pub fn with_dilation(mut self, dilation: f64) -> Result<Self> {
        self.dilation = dilation;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.law.validate()?;
        if !(self.dilation > 0.0 && self.dilation <= 1.0) {
            return Err(Error::InvalidParameter {
                kind: "series prior",
                name: "dilation",
                value: self.dilation,
                reason: "must lie in (0, 1]",
            });
        }
        Ok(())
    }

    /// Effective scale `c * gamma_p` of coefficient `p`.
    pub fn scale(&self, position: usize) -> f64 {
        self.dilation * self.schedule.gamma(position)
    }

    pub fn sample_coefficient(&self, stream: &SeedStream, sample_id: u64, position: usize) -> f64 {
        let scale = self.scale(position);
        if scale == 0.0 {
            return 0.0;
        }
        let mut rng = stream.rng(sample_id, position as u64);
        scale * self.law.sample(&mut rng)
    }

    /// Coefficients of one draw at truncation `N`, written into `out`.
    pub fn sample_into(&self, stream: &SeedStream, sample_id: u64, out: &mut [f64]) {
        for (p, c) in out.iter_mut().enumerate() {
            *c = self.sample_coefficient(stream, sample_id, p);
        }
    }

    pub fn sample_field_with(&self, truncation: usize, stream: &SeedStream, sample_id: u64) -> FieldSample {
        let mut coefficients = alloc::vec![0.0; window_len(truncation)];
        self.sample_into(stream, sample_id, &mut coefficients);
        FieldSample::new(truncation, coefficients)
    }

    pub fn sample_field(&self, truncation: usize, seed: u64) -> FieldSample {
        self.sample_field_with(truncation, &SeedStream::new(seed), 0)
    }

    /// Log density of a coefficient vector w.r.t. Lebesgue measure on the
    /// window (product of scaled one-dimensional laws).
    pub fn log_density(&self, coefficients: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (p, &c) in coefficients.iter().enumerate() {
            let s = self.scale(p);
            if s == 0.0 {
                if c != 0.0 {
                    return f64::NEG_INFINITY;
                }
                continue;
            }
            acc += self.law.log_density(c / s) - s.ln();
        }
        acc
    }

    /// Partial-sum admissibility certificate for `{gamma_k^2} in l^p`,
    /// `{Var|xi_k|} in l^q`. Finite-sample heuristic only.
    pub fn admissibility_check(&self, p: f64, q: f64, terms: usize) -> Result<AdmissibilityReport> {
        let var = self.law.abs_variance();
        admissibility_from_sequences(
            |k| {
                let g = self.scale(k);
                g * g
            },
            |_| var,
            p,
            q,
            terms,
        )
    }

    /// Monte Carlo estimate of `E exp(eps ||P_N u||)`.
    pub fn estimate_exp_moment(&self, eps: f64, truncation: usize, num_samples: usize, seed: u64) -> Result<ExpMomentReport> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument("exponential moment needs eps >= 0"));
        }
        if num_samples < 2 {
            return Err(Error::InvalidArgument("exponential moment needs at least 2 samples"));
        }
        let stream = SeedStream::new(seed);
        let mut buf = alloc::vec![0.0; window_len(truncation)];
        let mut values = Vec::with_capacity(num_samples);
        let mut saturated = false;
        for i in 0..num_samples {
            self.sample_into(&stream, i as u64, &mut buf);
            let norm = crate::math::norm2(&buf);
            let v = (eps * norm).exp();
            if !v.is_finite() {
                saturated = true;
            }
            values.push(v);
        }
        let (estimate, stderr) = mean_stderr(&values);
        let half = crate::math::mean(&values[..num_samples / 2]);
        let doubling_drift = if saturated { f64::INFINITY } else { (estimate - half).abs() / estimate };
        let flagged = saturated || !(doubling_drift < EXP_MOMENT_DRIFT_TOLERANCE);
        Ok(ExpMomentReport { estimate, stderr, doubling_drift, saturated, flagged, num_samples, heuristic: true })
    }

    /// Monte Carlo check of `mu(lambda A + (1 - lambda) B) >= mu(A)^lambda mu(B)^(1 - lambda)`
    /// on the marginal of at most two linear functionals of the coefficients.
    pub fn marginal_convexity_test(
        &self,
        functionals: &[Functional],
        a: &BoxRegion,
        b: &BoxRegion,
        lambda: f64,
        truncation: usize,
        num_samples: usize,
        seed: u64,
    ) -> Result<ConvexityReport> {
        check_functionals(functionals, truncation)?;
        let stream = SeedStream::new(seed);
        let positions: Vec<usize> = {
            let mut ps: Vec<usize> = functionals.iter().flat_map(|f| f.terms.iter().map(|t| t.0)).collect();
            ps.sort_unstable();
            ps.dedup();
            ps
        };
        let mut coeffs = alloc::vec![0.0; window_len(truncation)];
        let points = (0..num_samples).map(|i| {
            for &p in &positions {
                coeffs[p] = self.sample_coefficient(&stream, i as u64, p);
            }
            functionals.iter().map(|f| f.apply(&coeffs)).collect::<Vec<f64>>()
        });
        convexity_from_points(points, None, a, b, lambda)
    }
}

/// Relative last-doubling increment below which a partial-sum sequence is
/// treated as Cauchy.
pub const CAUCHY_TOLERANCE: f64 = 1e-6;
/// Doubling drift above which an exponential-moment estimate is flagged.
pub const EXP_MOMENT_DRIFT_TOLERANCE: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// `sum_{k<K} (gamma_k^2)^p` (running max when `p` is infinite).
    pub gamma_partial_lp: f64,
    pub var_partial_lq: f64,
    pub gamma_increment: f64,
    pub var_increment: f64,
    pub pass: bool,
    pub conjugate_ok: bool,
    pub heuristic: bool,
}

/// Admissibility from explicit sequences (indexed by position).
pub fn admissibility_from_sequences<G, V>(gamma_sq: G, var_abs: V, p: f64, q: f64, terms: usize) -> Result<AdmissibilityReport>
where
    G: Fn(usize) -> f64,
    V: Fn(usize) -> f64,
{
    if !(p >= 1.0 && q >= 1.0) {
        return Err(Error::InvalidExponents { p, q });
    }
    if terms < 100 {
        return Err(Error::InvalidArgument("admissibility needs at least 100 terms"));
    }
    let conjugate_ok = (1.0 / p + 1.0 / q - 1.0).abs() <= 1e-12;
    let (g_full, g_half) = partial_norms(&gamma_sq, p, terms);
    let (v_full, v_half) = partial_norms(&var_abs, q, terms);
    let increment = |full: f64, half: f64| if full == 0.0 { 0.0 } else { (full - half).abs() / full.abs() };
    let gamma_increment = increment(g_full, g_half);
    let var_increment = increment(v_full, v_half);
    let pass = g_full.is_finite() && v_full.is_finite() && gamma_increment < CAUCHY_TOLERANCE && var_increment < CAUCHY_TOLERANCE;
    Ok(AdmissibilityReport {
        gamma_partial_lp: g_full,
        var_partial_lq: v_full,
        gamma_increment,
        var_increment,
        pass,
        conjugate_ok,
        heuristic: true,
    })
}

fn partial_norms<F: Fn(usize) -> f64>(seq: &F, exponent: f64, terms: usize) -> (f64, f64) {
    let half = terms / 2;
    if exponent.is_infinite() {
        let sup = |n: usize| (0..n).map(|k| seq(k).abs()).fold(0.0, f64::max);
        return (sup(terms), sup(half));
    }
    let vals: Vec<f64> = (0..terms).map(|k| seq(k).abs().powf(exponent)).collect();
    (pairwise_sum(&vals), pairwise_sum(&vals[..half]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentReport {
    pub estimate: f64,
    pub stderr: f64,
    /// `|estimate(n) - estimate(n/2)| / estimate(n)`.
    pub doubling_drift: f64,
    pub saturated: bool,
    pub flagged: bool,
    pub num_samples: usize,
    pub heuristic: bool,
}

/// One truncated coefficient vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub truncation: usize,
    pub coefficients: Vec<f64>,
    pub norm_l2: f64,
}

impl FieldSample {
    pub fn new(truncation: usize, coefficients: Vec<f64>) -> Self {
        let norm_l2 = crate::math::norm2(&coefficients);
        Self { truncation, coefficients, norm_l2 }
    }

    /// Coefficient at `position`, zero outside the window.
    pub fn coefficient(&self, position: usize) -> f64 {
        self.coefficients.get(position).copied().unwrap_or(0.0)
    }

    /// `(mode index, coefficient)` pairs in storage order.
    pub fn indexed(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.coefficients.iter().enumerate().map(|(p, &c)| (mode_index(p), c))
    }

    /// `P_M u`.
    pub fn project(&self, truncation: usize) -> Result<FieldSample> {
        if truncation > self.truncation {
            return Err(Error::CannotRefine { requested: truncation, available: self.truncation });
        }
        Ok(FieldSample::new(truncation, self.coefficients[..window_len(truncation)].to_vec()))
    }

    /// L2 distance, treating missing coefficients as zero.
    pub fn distance(&self, other: &FieldSample) -> f64 {
        let n = self.coefficients.len().max(other.coefficients.len());
        let sq: Vec<f64> = (0..n)
            .map(|p| {
                let d = self.coefficient(p) - other.coefficient(p);
                d * d
            })
            .collect();
        pairwise_sum(&sq).sqrt()
    }

    pub fn evaluate(&self, basis: &Basis, x: f64) -> f64 {
        self.coefficients.iter().enumerate().map(|(p, c)| c * basis.eval(p, x)).sum()
    }
}

/// Linear functional `sum_i w_i c_{p_i}` of the coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub terms: Vec<(usize, f64)>,
}

impl Functional {
    pub fn coordinate(position: usize) -> Self {
        Self { terms: alloc::vec![(position, 1.0)] }
    }

    pub fn scaled(position: usize, weight: f64) -> Self {
        Self { terms: alloc::vec![(position, weight)] }
    }

    pub fn apply(&self, coefficients: &[f64]) -> f64 {
        self.terms.iter().map(|&(p, w)| w * coefficients.get(p).copied().unwrap_or(0.0)).sum()
    }
}

pub(crate) fn check_functionals(functionals: &[Functional], truncation: usize) -> Result<()> {
    if functionals.is_empty() || functionals.len() > 2 {
        return Err(Error::InvalidArgument("convexity test takes one or two functionals"));
    }
    let mut coords: Vec<usize> = functionals.iter().flat_map(|f| f.terms.iter().map(|t| t.0)).collect();
    coords.sort_unstable();
    coords.dedup();
    if coords.len() > 2 {
        return Err(Error::InvalidArgument("functionals may touch at most two coordinates"));
    }
    if coords.iter().any(|&p| p >= window_len(truncation)) {
        return Err(Error::InvalidArgument("functional coordinate outside truncation window"));
    }
    Ok(())
}

/// Closed axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(alloc::vec![lo], alloc::vec![hi])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() || self.lo.iter().zip(&self.hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::EmptyBox);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn minkowski(&self, lambda: f64, other: &BoxRegion) -> BoxRegion {
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
        BoxRegion { lo: mix(&self.lo, &other.lo), hi: mix(&self.hi, &other.hi) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// `mu(lambda A + (1 - lambda) B)`.
    pub lhs: f64,
    /// `mu(A)^lambda mu(B)^(1 - lambda)`.
    pub rhs: f64,
    pub prob_a: f64,
    pub prob_b: f64,
    pub margin: f64,
    /// Delta-method standard error of `margin`.
    pub stderr: f64,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    pub pass: bool,
    pub num_samples: usize,
}

/// Convexity inequality from (optionally weighted) marginal points.
pub fn convexity_from_points<I>(points: I, weights: Option<&[f64]>, a: &BoxRegion, b: &BoxRegion, lambda: f64) -> Result<ConvexityReport>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    a.validate()?;
    b.validate()?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument("lambda must lie in [0, 1]"));
    }
    let c = a.minkowski(lambda, b);
    let mut ia = Vec::new();
    let mut ib = Vec::new();
    let mut ic = Vec::new();
    let mut w = Vec::new();
    for (i, x) in points.into_iter().enumerate() {
        if x.len() != a.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: x.len() });
        }
        let wi = weights.map_or(1.0, |ws| ws[i]);
        w.push(wi);
        ia.push(wi * f64::from(u8::from(a.contains(&x))));
        ib.push(wi * f64::from(u8::from(b.contains(&x))));
        ic.push(wi * f64::from(u8::from(c.contains(&x))));
    }
    let n = w.len();
    if n < 2 {
        return Err(Error::InvalidArgument("convexity test needs at least two samples"));
    }
    let wsum = pairwise_sum(&w);
    if wsum <= 0.0 {
        return Err(Error::ZeroEffectiveSampleSize);
    }
    let pa = pairwise_sum(&ia) / wsum;
    let pb = pairwise_sum(&ib) / wsum;
    let pc = pairwise_sum(&ic) / wsum;
    let rhs = if pa > 0.0 && pb > 0.0 { pa.powf(lambda) * pb.powf(1.0 - lambda) } else { 0.0 };
    let wbar = wsum / n as f64;
    // influence functions of the self-normalised ratio estimators
    let mut infl_lhs = Vec::with_capacity(n);
    let mut infl_rhs = Vec::with_capacity(n);
    let mut infl_margin = Vec::with_capacity(n);
    for i in 0..n {
        let wi = w[i] / wbar;
        let ind = |v: f64| if w[i] > 0.0 { v / w[i] } else { 0.0 };
        let dc = wi * (ind(ic[i]) - pc);
        let dr = if rhs > 0.0 {
            rhs * wi * (lambda * (ind(ia[i]) - pa) / pa + (1.0 - lambda) * (ind(ib[i]) - pb) / pb)
        } else {
            0.0
        };
        infl_lhs.push(dc);
        infl_rhs.push(dr);
        infl_margin.push(dc - dr);
    }
    let se = |v: &[f64]| mean_stderr(v).1;
    let stderr = se(&infl_margin);
    let margin = pc - rhs;
    Ok(ConvexityReport {
        lhs: pc,
        rhs,
        prob_a: pa,
        prob_b: pb,
        margin,
        stderr,
        lhs_stderr: se(&infl_lhs),
        rhs_stderr: se(&infl_rhs),
        pass: margin >= -3.0 * stderr,
        num_samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_round_trip_and_window_prefix() {
        let expected = [0, -1, 1, -2, 2, -3, 3];
        for (p, &k) in expected.iter().enumerate() {
            assert_eq!(mode_index(p), k);
            assert_eq!(position_of(k), p);
        }
        // window {-N, ..., N-1} is the first 2N positions
        for n in 1..20usize {
            let mut ks: Vec<i64> = (0..window_len(n)).map(mode_index).collect();
            ks.sort_unstable();
            let want: Vec<i64> = (-(n as i64)..n as i64).collect();
            assert_eq!(ks, want);
        }
    }

    #[test]
    fn near_deterministic_coefficients_follow_schedule() {
        let prior = SeriesPrior::new(
            Basis::FourierCircle,
            CoefficientSchedule::AlgebraicFourier { s: 1.25 },
            CoefficientLaw::Iid(Distribution1D::uniform(0.999_999, 1.000_001).unwrap()),
        )
        .unwrap();
        let u = prior.sample_field(2, 3);
        assert_eq!(u.coefficients.len(), 4);
        for (p, c) in u.coefficients.iter().enumerate() {
            assert!((c - prior.schedule.gamma(p)).abs() < 1e-5);
        }
    }

    #[test]
    fn projection_contract() {
        let prior = SeriesPrior::laplace_deconvolution();
        let u = prior.sample_field(16, 9);
        assert_eq!(u.project(16).unwrap(), u);
        let p = u.project(4).unwrap();
        assert_eq!(p.project(4).unwrap(), p);
        assert!(matches!(u.project(17), Err(Error::CannotRefine { .. })));
        assert!(p.norm_l2 <= u.norm_l2);
    }

    #[test]
    fn nested_sampling() {
        let prior = SeriesPrior::hierarchical_deconvolution();
        let big = prior.sample_field(32, 4);
        let small = prior.sample_field(16, 4);
        assert_eq!(big.project(16).unwrap(), small);
    }

    #[test]
    fn invalid_priors_rejected() {
        assert!(SeriesPrior::laplace_deconvolution().with_dilation(1.5).is_err());
        assert!(SeriesPrior::laplace_deconvolution().with_dilation(0.0).is_err());
        let bad = CoefficientSchedule::Explicit { values: alloc::vec![1.0, 2.0] };
        assert!(bad.validate().is_err());
        assert!(CoefficientSchedule::AlgebraicFourier { s: -1.0 }.validate().is_err());
    }

    #[test]
    fn dilation_scales_samples() {
        let prior = SeriesPrior::laplace_deconvolution();
        let half = prior.clone().with_dilation(0.5).unwrap();
        let a = prior.sample_field(4, 1);
        let b = half.sample_field(4, 1);
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((0.5 * x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn admissibility_examples() {
        let prior = SeriesPrior::laplace_deconvolution();
        let r = prior.admissibility_check(1.0, f64::INFINITY, 10_000).unwrap();
        assert!(r.pass && r.conjugate_ok && r.heuristic);

        let slow = SeriesPrior::new(
            Basis::FourierCircle,
            CoefficientSchedule::AlgebraicSequence { s: 0.25 },
            CoefficientLaw::Iid(Distribution1D::laplace(0.0, 1.0).unwrap()),
        )
        .unwrap();
        assert!(!slow.admissibility_check(1.0, f64::INFINITY, 10_000).unwrap().pass);

        let r = admissibility_from_sequences(
            |k| ((k + 1) as f64).powi(-2),
            |k| ((k + 1) as f64).powi(-2),
            2.0,
            2.0,
            10_000,
        )
        .unwrap();
        assert!(r.pass && r.conjugate_ok);

        assert!(prior.admissibility_check(0.5, 2.0, 1000).is_err());
        assert!(!prior.admissibility_check(2.0, 3.0, 1000).unwrap().conjugate_ok);
        assert!(prior.admissibility_check(1.0, f64::INFINITY, 50).is_err());
    }

    #[test]
    fn exp_moment_at_zero_is_one() {
        let prior = SeriesPrior::laplace_deconvolution();
        let r = prior.estimate_exp_moment(0.0, 8, 100, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.doubling_drift, 0.0);
    }

    #[test]
    fn convexity_identical_boxes_is_equality() {
        let prior = SeriesPrior::laplace_deconvolution();
        let a = BoxRegion::interval(-0.5, 0.5).unwrap();
        let r = prior
            .marginal_convexity_test(&[Functional::coordinate(0)], &a, &a, 0.3, 4, 2000, 2)
            .unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn convexity_rejects_bad_inputs() {
        let prior = SeriesPrior::laplace_deconvolution();
        let a = BoxRegion::interval(0.0, 1.0).unwrap();
        assert!(BoxRegion::interval(1.0, 0.0).is_err());
        let three = [Functional::coordinate(0), Functional::coordinate(1), Functional::coordinate(2)];
        assert!(prior.marginal_convexity_test(&three, &a, &a, 0.5, 4, 10, 0).is_err());
    }

    #[test]
    fn fourier_basis_values() {
        assert_eq!(fourier_mode(0, 0.3), 1.0);
        assert!((fourier_mode(2, 0.0) - SQRT_2).abs() < 1e-15);
        assert!(fourier_mode(-1, 0.0).abs() < 1e-15);
    }
}
