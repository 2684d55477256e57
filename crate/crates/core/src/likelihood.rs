//! Likelihood potentials `Phi(u; y)` and an empirical auditor for the
//! lower-bound / boundedness / continuity conditions a potential must meet
//! for the posterior to be well-posed.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{uniform_in_ball, ForwardModel};
use crate::math::norm2;
use crate::rng::SeedStream;
use crate::series_prior::window_len;

/// Noise covariance `Gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCovariance {
    /// `sigma2 * I`.
    Scaled { sigma2: f64 },
    Dense(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
enum Whitener {
    Scaled(f64),
    /// Lower Cholesky factor `L` with `Gamma = L L^T`.
    Cholesky(DMatrix<f64>),
}

impl Whitener {
    fn new(noise: &NoiseCovariance, m: usize) -> Result<Self> {
        match noise {
            NoiseCovariance::Scaled { sigma2 } => {
                if !(sigma2.is_finite() && *sigma2 > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                Ok(Whitener::Scaled(sigma2.sqrt()))
            }
            NoiseCovariance::Dense(rows) => {
                if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::DimensionMismatch { expected: m, found: rows.len() });
                }
                let g = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
                for i in 0..m {
                    for j in 0..i {
                        if (g[(i, j)] - g[(j, i)]).abs() > 1e-12 * (g[(i, j)].abs() + g[(j, i)].abs() + 1.0) {
                            return Err(Error::NotPositiveDefinite);
                        }
                    }
                }
                let chol = g.cholesky().ok_or(Error::NotPositiveDefinite)?;
                Ok(Whitener::Cholesky(chol.l()))
            }
        }
    }

    /// `0.5 * ||Gamma^{-1/2} r||^2` via forward substitution.
    fn half_norm_sq(&self, r: &mut [f64]) -> f64 {
        match self {
            Whitener::Scaled(sigma) => {
                let s: f64 = r.iter().map(|v| v * v).sum();
                0.5 * s / (sigma * sigma)
            }
            Whitener::Cholesky(l) => {
                self.solve_in_place(l, r);
                0.5 * r.iter().map(|v| v * v).sum::<f64>()
            }
        }
    }

    fn solve_in_place(&self, l: &DMatrix<f64>, r: &mut [f64]) {
        for i in 0..r.len() {
            let mut acc = r[i];
            for j in 0..i {
                acc -= l[(i, j)] * r[j];
            }
            r[i] = acc / l[(i, i)];
        }
    }

    fn whiten(&self, mut r: Vec<f64>) -> Vec<f64> {
        match self {
            Whitener::Scaled(sigma) => r.iter().map(|v| v / sigma).collect(),
            Whitener::Cholesky(l) => {
                self.solve_in_place(l, &mut r);
                r
            }
        }
    }
}

pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PotentialKind {
    GaussianAdditive { model: ForwardModel, noise: NoiseCovariance, data: Vec<f64> },
    /// `log ||u||` while `||u|| < y`, `+inf` otherwise.
    MultiplicativeUniform { data: f64, dim: usize },
    Custom { name: String, dim: usize, eval: PotentialFn },
}

impl core::fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::GaussianAdditive { model, noise, data } => f
                .debug_struct("GaussianAdditive")
                .field("model", model)
                .field("noise", noise)
                .field("data", data)
                .finish(),
            Self::MultiplicativeUniform { data, dim } => {
                f.debug_struct("MultiplicativeUniform").field("data", data).field("dim", dim).finish()
            }
            Self::Custom { name, dim, .. } => f.debug_struct("Custom").field("name", name).field("dim", dim).finish(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Potential {
    kind: PotentialKind,
    projection: Option<usize>,
    whitener: Option<Whitener>,
}

impl Potential {
    pub fn gaussian(model: ForwardModel, noise: NoiseCovariance, data: Vec<f64>) -> Result<Self> {
        if data.len() != model.output_dim() {
            return Err(Error::DimensionMismatch { expected: model.output_dim(), found: data.len() });
        }
        let whitener = Whitener::new(&noise, model.output_dim())?;
        Ok(Self {
            kind: PotentialKind::GaussianAdditive { model, noise, data },
            projection: None,
            whitener: Some(whitener),
        })
    }

    pub fn multiplicative(data: f64, dim: usize) -> Result<Self> {
        if !(data > 0.0) || dim == 0 {
            return Err(Error::InvalidArgument("multiplicative potential needs data > 0 and dim >= 1"));
        }
        Ok(Self { kind: PotentialKind::MultiplicativeUniform { data, dim }, projection: None, whitener: None })
    }

    pub fn custom<F>(name: impl Into<String>, dim: usize, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::Custom { name: name.into(), dim, eval: Arc::new(eval) },
            projection: None,
            whitener: None,
        }
    }

    /// `Phi_N(u; y) = Phi(P_N u; y)`.
    pub fn projected(&self, truncation: usize) -> Self {
        let mut p = self.clone();
        p.projection = Some(truncation);
        p
    }

    pub fn projection(&self) -> Option<usize> {
        self.projection
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        match &self.kind {
            PotentialKind::GaussianAdditive { model, .. } => model.input_dim(),
            PotentialKind::MultiplicativeUniform { dim, .. } | PotentialKind::Custom { dim, .. } => *dim,
        }
    }

    pub fn data(&self) -> Vec<f64> {
        match &self.kind {
            PotentialKind::GaussianAdditive { data, .. } => data.clone(),
            PotentialKind::MultiplicativeUniform { data, .. } => alloc::vec![*data],
            PotentialKind::Custom { .. } => Vec::new(),
        }
    }

    /// Same potential with different data.
    pub fn with_data(&self, y: Vec<f64>) -> Result<Self> {
        let out = match &self.kind {
            PotentialKind::GaussianAdditive { model, noise, .. } => Self::gaussian(model.clone(), noise.clone(), y)?,
            PotentialKind::MultiplicativeUniform { dim, .. } => {
                let [v] = y[..] else {
                    return Err(Error::DimensionMismatch { expected: 1, found: y.len() });
                };
                Self { kind: PotentialKind::MultiplicativeUniform { data: v, dim: *dim }, projection: None, whitener: None }
            }
            PotentialKind::Custom { .. } => return Err(Error::InvalidArgument("custom potentials carry no data")),
        };
        Ok(Self { projection: self.projection, ..out })
    }

    fn active_len(&self, len: usize) -> usize {
        self.projection.map_or(len, |n| window_len(n).min(len))
    }

    /// `Phi(u; y)` on the extended reals.
    pub fn evaluate(&self, coeffs: &[f64]) -> Result<f64> {
        if coeffs.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: coeffs.len() });
        }
        let active = self.active_len(coeffs.len());
        Ok(match &self.kind {
            PotentialKind::GaussianAdditive { model, data, .. } => {
                let mut r = alloc::vec![0.0; data.len()];
                let design = model.design();
                for (p, &c) in coeffs[..active].iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    for (o, a) in r.iter_mut().zip(design.column(p).iter()) {
                        *o += a * c;
                    }
                }
                for (o, y) in r.iter_mut().zip(data) {
                    *o -= y;
                }
                self.whitener.as_ref().expect("gaussian potential has a whitener").half_norm_sq(&mut r)
            }
            PotentialKind::MultiplicativeUniform { data, .. } => {
                let norm = norm2(&coeffs[..active]);
                if norm < *data {
                    norm.ln()
                } else {
                    f64::INFINITY
                }
            }
            PotentialKind::Custom { eval, .. } => {
                if active < coeffs.len() {
                    let mut v = coeffs.to_vec();
                    v[active..].fill(0.0);
                    eval(&v)
                } else {
                    eval(coeffs)
                }
            }
        })
    }

    /// `Gamma^{-1/2} v` for a data-space vector.
    pub fn whiten(&self, v: Vec<f64>) -> Result<Vec<f64>> {
        match &self.whitener {
            Some(w) => Ok(w.whiten(v)),
            None => Err(Error::InvalidArgument("only gaussian potentials have a noise covariance")),
        }
    }

    /// `|Phi(u; y) - Phi(P_N u; y)|` with the certificate ratio
    /// `gap / (||u - P_N u|| exp(eps ||u||))`.
    pub fn potential_gap(&self, truncation: usize, coeffs: &[f64], eps: f64) -> Result<GapReport> {
        let full = self.evaluate(coeffs)?;
        let projected = self.projected(truncation).evaluate(coeffs)?;
        let cut = window_len(truncation).min(coeffs.len());
        let projection_error = norm2(&coeffs[cut..]);
        let gap = if full == projected { 0.0 } else { (full - projected).abs() };
        let certificate_ratio = if projection_error == 0.0 {
            0.0
        } else {
            gap / (projection_error * (eps * norm2(coeffs)).exp())
        };
        Ok(GapReport { gap, projection_error, certificate_ratio, eps })
    }

    /// Sampling-based audit of the four potential conditions with
    /// `alpha_1 = alpha_2 = 0`. Only violations can be certified.
    pub fn assumption_audit(&self, r: f64, num_samples: usize, seed: u64) -> Result<AuditReport> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument("audit radius must be > 0"));
        }
        let n = self.input_dim();
        let own = self.data();
        let m = own.len();
        if m == 0 {
            return Err(Error::InvalidArgument("audit needs a potential with data"));
        }
        let stream = SeedStream::new(seed).fork(AUDIT_TAG);
        let mut violations = Vec::new();

        // data set: the potential's own data plus draws from the data ball
        let mut datasets: Vec<Vec<f64>> = Vec::new();
        if norm2(&own) < r {
            datasets.push(own.clone());
        }
        let data_draws = 16.max(num_samples / 64);
        for i in 0..data_draws {
            let mut rng = stream.rng(0, i as u64);
            datasets.push(uniform_in_ball(&mut rng, m, r));
        }
        let pots: Vec<Potential> = datasets.iter().map(|y| self.with_data(y.clone())).collect::<Result<_>>()?;

        // (i) lower bound, including norm-scaling sequences
        let mut empirical_m = f64::INFINITY;
        let mut lower_bound_ok = true;
        for (d, pot) in pots.iter().enumerate().take(4) {
            let mut rng = stream.rng(1, d as u64);
            let dir = uniform_in_ball(&mut rng, n, 1.0);
            let dn = norm2(&dir);
            let unit: Vec<f64> = dir.iter().map(|v| v / dn).collect();
            for grow in [false, true] {
                let seq: Vec<f64> = (0..SCALING_STEPS)
                    .map(|k| {
                        let t = if grow { 2f64.powi(k as i32) } else { 2f64.powi(-(k as i32)) };
                        let u: Vec<f64> = unit.iter().map(|v| v * t).collect();
                        pot.evaluate(&u)
                    })
                    .collect::<Result<_>>()?;
                for v in &seq {
                    empirical_m = empirical_m.min(*v);
                }
                if trends_to_minus_infinity(&seq) {
                    lower_bound_ok = false;
                    violations.push(Violation {
                        item: AssumptionItem::LowerBound,
                        detail: if grow {
                            String::from("potential decreases without bound along a growing-norm sequence")
                        } else {
                            String::from("potential decreases without bound along a shrinking-norm sequence")
                        },
                    });
                }
            }
        }

        // (ii), (iii), (iv) over the radius-r ball
        let mut empirical_k = f64::NEG_INFINITY;
        let mut empirical_l = 0.0f64;
        let mut empirical_c = f64::NEG_INFINITY;
        let (mut bad_k, mut bad_l, mut bad_c) = (false, false, false);
        for i in 0..num_samples {
            let mut rng = stream.rng(2, i as u64);
            let u1 = uniform_in_ball(&mut rng, n, r);
            let u2 = uniform_in_ball(&mut rng, n, r);
            let pot = &pots[i % pots.len()];
            let other = &pots[(i + 1) % pots.len()];
            let f1 = pot.evaluate(&u1)?;
            let f2 = pot.evaluate(&u2)?;
            empirical_m = empirical_m.min(f1).min(f2);
            for f in [f1, f2] {
                if f.is_finite() {
                    empirical_k = empirical_k.max(f);
                } else if f > 0.0 || f.is_nan() {
                    bad_k = true;
                }
            }
            let du = norm2(&u1.iter().zip(&u2).map(|(a, b)| a - b).collect::<Vec<_>>());
            if du > 0.0 {
                let ratio = (f1 - f2).abs() / du;
                if ratio.is_finite() {
                    empirical_l = empirical_l.max(ratio);
                } else {
                    bad_l = true;
                }
            }
            let g2 = other.evaluate(&u1)?;
            let ya = &datasets[i % pots.len()];
            let yb = &datasets[(i + 1) % pots.len()];
            let dy = norm2(&ya.iter().zip(yb).map(|(a, b)| a - b).collect::<Vec<_>>());
            if dy > 0.0 {
                let diff = (f1 - g2).abs();
                if diff.is_finite() {
                    if diff > 0.0 {
                        empirical_c = empirical_c.max((diff / dy).ln());
                    }
                } else {
                    bad_c = true;
                }
            }
        }
        if !empirical_m.is_finite() && lower_bound_ok {
            lower_bound_ok = false;
            violations.push(Violation {
                item: AssumptionItem::LowerBound,
                detail: String::from("potential takes the value -inf"),
            });
        }
        if bad_k {
            violations.push(Violation {
                item: AssumptionItem::BoundedAbove,
                detail: String::from("potential is +inf inside the radius-r ball"),
            });
        }
        if bad_l {
            violations.push(Violation {
                item: AssumptionItem::ContinuityInU,
                detail: String::from("non-finite difference quotient in u"),
            });
        }
        if bad_c {
            violations.push(Violation {
                item: AssumptionItem::ContinuityInY,
                detail: String::from("non-finite difference quotient in y"),
            });
        }
        Ok(AuditReport {
            radius: r,
            num_samples,
            lower_bound_ok,
            empirical_m,
            empirical_k_r: empirical_k,
            empirical_l_r: empirical_l,
            empirical_c,
            max_data_norm: datasets.iter().map(|y| norm2(y)).fold(0.0, f64::max),
            violations,
        })
    }
}

const AUDIT_TAG: u64 = 0x4155_4449;
const SCALING_STEPS: usize = 60;

/// A sequence trends to `-inf` when it ends far below its start and is
/// still strictly decreasing over its last quarter.
fn trends_to_minus_infinity(seq: &[f64]) -> bool {
    if seq.contains(&f64::NEG_INFINITY) {
        return true;
    }
    let finite: Vec<f64> = seq.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 8 {
        return false;
    }
    let tail = &finite[finite.len() * 3 / 4..];
    let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    decreasing && finite[finite.len() - 1] < finite[0] - 20.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionItem {
    /// (i) `Phi >= M - alpha_1 ||u||`.
    LowerBound,
    /// (ii) `Phi <= K(r)` on bounded sets.
    BoundedAbove,
    /// (iii) Lipschitz in `u` on bounded sets.
    ContinuityInU,
    /// (iv) Lipschitz in `y` with exponential weight.
    ContinuityInY,
}

impl AssumptionItem {
    pub fn roman(self) -> &'static str {
        match self {
            Self::LowerBound => "i",
            Self::BoundedAbove => "ii",
            Self::ContinuityInU => "iii",
            Self::ContinuityInY => "iv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub item: AssumptionItem,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub radius: f64,
    pub num_samples: usize,
    pub lower_bound_ok: bool,
    pub empirical_m: f64,
    pub empirical_k_r: f64,
    pub empirical_l_r: f64,
    pub empirical_c: f64,
    pub max_data_norm: f64,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn flags(&self, item: AssumptionItem) -> bool {
        self.violations.iter().any(|v| v.item == item)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap: f64,
    pub projection_error: f64,
    pub certificate_ratio: f64,
    pub eps: f64,
}

/// Default `eps` for gap certificates.
pub const GAP_EPS: f64 = 0.01;
