//! One-dimensional log-concave laws.
//!
//! Parameterisations follow the usual convex table: Gaussian `(m, sigma)`,
//! Exponential with rate `lambda`, Laplace `(m, sigma)`, Logistic `(m, s)`,
//! Gamma with shape `k >= 1` and *scale* `lambda`, Uniform on `[a, b]`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::f64::consts::PI;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ln_gamma, normal_cdf, regularized_lower_gamma};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub enum Distribution1D {
    Gaussian { m: f64, sigma: f64 },
    Exponential { lambda: f64 },
    Laplace { m: f64, sigma: f64 },
    Logistic { m: f64, s: f64 },
    Gamma { k: f64, lambda: f64 },
    Uniform { a: f64, b: f64 },
}

fn positive(kind: &'static str, name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { kind, name, value, reason: "must be finite and > 0" })
    }
}

fn finite(kind: &'static str, name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { kind, name, value, reason: "must be finite" })
    }
}

impl Distribution1D {
    pub fn gaussian(m: f64, sigma: f64) -> Result<Self> {
        finite("gaussian", "m", m)?;
        positive("gaussian", "sigma", sigma)?;
        Ok(Self::Gaussian { m, sigma })
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        positive("exponential", "lambda", lambda)?;
        Ok(Self::Exponential { lambda })
    }

    pub fn laplace(m: f64, sigma: f64) -> Result<Self> {
        finite("laplace", "m", m)?;
        positive("laplace", "sigma", sigma)?;
        Ok(Self::Laplace { m, sigma })
    }

    pub fn logistic(m: f64, s: f64) -> Result<Self> {
        finite("logistic", "m", m)?;
        positive("logistic", "s", s)?;
        Ok(Self::Logistic { m, s })
    }

    /// Shape `k` must be at least 1 for log-concavity.
    pub fn gamma(k: f64, lambda: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 1.0) {
            return Err(Error::InvalidParameter {
                kind: "gamma",
                name: "k",
                value: k,
                reason: "shape must be >= 1 for a log-concave density",
            });
        }
        positive("gamma", "lambda", lambda)?;
        Ok(Self::Gamma { k, lambda })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        finite("uniform", "a", a)?;
        finite("uniform", "b", b)?;
        if b <= a {
            return Err(Error::InvalidParameter { kind: "uniform", name: "b", value: b, reason: "must exceed a" });
        }
        Ok(Self::Uniform { a, b })
    }

    /// Re-run the constructor checks on an existing value.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { m, sigma } => Self::gaussian(m, sigma).map(drop),
            Self::Exponential { lambda } => Self::exponential(lambda).map(drop),
            Self::Laplace { m, sigma } => Self::laplace(m, sigma).map(drop),
            Self::Logistic { m, s } => Self::logistic(m, s).map(drop),
            Self::Gamma { k, lambda } => Self::gamma(k, lambda).map(drop),
            Self::Uniform { a, b } => Self::uniform(a, b).map(drop),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Exponential { .. } => "exponential",
            Self::Laplace { .. } => "laplace",
            Self::Logistic { .. } => "logistic",
            Self::Gamma { .. } => "gamma",
            Self::Uniform { .. } => "uniform",
        }
    }

    /// Closed support `[lo, hi]` (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Exponential { .. } | Self::Gamma { .. } => (0.0, f64::INFINITY),
            Self::Uniform { a, b } => (a, b),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Points where the density is not smooth.
    pub fn kink_points(&self) -> [Option<f64>; 2] {
        match *self {
            Self::Laplace { m, .. } => [Some(m), None],
            Self::Exponential { .. } | Self::Gamma { .. } => [Some(0.0), None],
            Self::Uniform { a, b } => [Some(a), Some(b)],
            _ => [None, None],
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let l = self.log_density(x);
        if l == f64::NEG_INFINITY {
            0.0
        } else {
            l.exp()
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { m, sigma } => {
                let z = (x - m) / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * PI).ln()
            }
            Self::Exponential { lambda } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    lambda.ln() - lambda * x
                }
            }
            Self::Laplace { m, sigma } => -(x - m).abs() / sigma - (2.0 * sigma).ln(),
            Self::Logistic { m, s } => {
                // symmetric in z, so use -|z| to avoid overflow in exp
                let z = -((x - m) / s).abs();
                z - s.ln() - 2.0 * z.exp().ln_1p()
            }
            Self::Gamma { k, lambda } => {
                if x < 0.0 || (x == 0.0 && k > 1.0) {
                    f64::NEG_INFINITY
                } else if x == 0.0 {
                    -lambda.ln()
                } else {
                    (k - 1.0) * x.ln() - x / lambda - ln_gamma(k) - k * lambda.ln()
                }
            }
            Self::Uniform { a, b } => {
                if x < a || x > b {
                    f64::NEG_INFINITY
                } else {
                    -(b - a).ln()
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { m, sigma } => normal_cdf((x - m) / sigma),
            Self::Exponential { lambda } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-lambda * x).exp_m1()
                }
            }
            Self::Laplace { m, sigma } => {
                let z = (x - m) / sigma;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Self::Logistic { m, s } => {
                let z = (x - m) / s;
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Self::Gamma { k, lambda } => regularized_lower_gamma(k, x / lambda),
            Self::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
        }
    }

    /// Mass of the closed interval `[lo, hi]` (zero when empty).
    pub fn interval_probability(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    /// Inverse CDF for `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Self::Exponential { lambda } => -(-p).ln_1p() / lambda,
            Self::Laplace { m, sigma } => {
                if p < 0.5 {
                    m + sigma * (2.0 * p).ln()
                } else {
                    m - sigma * (2.0 * (1.0 - p)).ln()
                }
            }
            Self::Logistic { m, s } => m + s * (p / (1.0 - p)).ln(),
            Self::Uniform { a, b } => a + (b - a) * p,
            Self::Gaussian { .. } | Self::Gamma { .. } => self.invert_cdf(p),
        }
    }

    fn invert_cdf(&self, p: f64) -> f64 {
        let (lo_s, _) = self.support();
        let scale = self.variance().sqrt();
        let mut lo = if lo_s.is_finite() { lo_s } else { self.mean() - scale };
        let mut hi = self.mean() + scale;
        while self.cdf(lo) > p {
            lo -= 2.0 * (hi - lo);
        }
        while self.cdf(hi) < p {
            hi += 2.0 * (hi - lo);
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.cdf(x) - p;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.density(x);
            let newton = x - f / d;
            x = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Gaussian { m, .. } | Self::Laplace { m, .. } | Self::Logistic { m, .. } => m,
            Self::Exponential { lambda } => 1.0 / lambda,
            Self::Gamma { k, lambda } => k * lambda,
            Self::Uniform { a, b } => 0.5 * (a + b),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Gaussian { sigma, .. } => sigma * sigma,
            Self::Exponential { lambda } => 1.0 / (lambda * lambda),
            Self::Laplace { sigma, .. } => 2.0 * sigma * sigma,
            Self::Logistic { s, .. } => s * s * PI * PI / 3.0,
            Self::Gamma { k, lambda } => k * lambda * lambda,
            Self::Uniform { a, b } => (b - a) * (b - a) / 12.0,
        }
    }

    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// `E|X|`.
    pub fn abs_mean(&self) -> f64 {
        match *self {
            Self::Gaussian { m, sigma } => {
                let z = m / sigma;
                m * (1.0 - 2.0 * normal_cdf(-z)) + 2.0 * sigma * crate::math::normal_pdf(z)
            }
            Self::Exponential { .. } | Self::Gamma { .. } => self.mean(),
            Self::Laplace { m, sigma } => m.abs() + sigma * (-m.abs() / sigma).exp(),
            Self::Logistic { m, s } => s * softplus(m / s) + s * softplus(-m / s),
            Self::Uniform { a, b } => {
                if a >= 0.0 || b <= 0.0 {
                    (0.5 * (a + b)).abs()
                } else {
                    (a * a + b * b) / (2.0 * (b - a))
                }
            }
        }
    }

    /// `Var|X|`.
    pub fn abs_variance(&self) -> f64 {
        let e = self.abs_mean();
        (self.second_moment() - e * e).max(0.0)
    }

    /// One draw. Inverse CDF for Uniform, Exponential, Laplace and Logistic,
    /// Box–Muller for the Gaussian, sums of exponentials for integer-shape
    /// Gamma and Marsaglia–Tsang rejection otherwise.
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            Self::Gaussian { m, sigma } => m + sigma * rng.standard_normal(),
            Self::Gamma { k, lambda } => {
                if k.fract() == 0.0 && k <= 64.0 {
                    let mut acc = 0.0;
                    for _ in 0..k as u32 {
                        acc -= rng.uniform().ln();
                    }
                    lambda * acc
                } else {
                    lambda * marsaglia_tsang(k, rng)
                }
            }
            _ => self.quantile(rng.uniform()),
        }
    }

    /// Log-concavity check by second differences of the log density.
    pub fn check_log_concavity(&self, grid: &[f64], tol: f64) -> Result<LogConcavityReport> {
        if grid.len() < 3 {
            return Err(Error::InvalidArgument("log-concavity grid needs at least 3 points"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("log-concavity grid must be strictly increasing"));
        }
        let values: alloc::vec::Vec<f64> = grid.iter().map(|&x| self.log_density(x)).collect();
        let skipped_points = values.iter().filter(|v| !v.is_finite()).count();
        let mut max_second_difference = f64::NEG_INFINITY;
        let mut checked = 0;
        let mut kink_violation = false;
        for i in 1..grid.len() - 1 {
            let (f0, f1, f2) = (values[i - 1], values[i], values[i + 1]);
            if !(f0.is_finite() && f1.is_finite() && f2.is_finite()) {
                continue;
            }
            let hl = grid[i] - grid[i - 1];
            let hr = grid[i + 1] - grid[i];
            let d = (hl * f2 + hr * f0 - (hl + hr) * f1) * 2.0 / (hl + hr);
            max_second_difference = max_second_difference.max(d);
            checked += 1;
            if self.straddles_kink(grid[i - 1], grid[i + 1]) {
                let left = (f1 - f0) / hl;
                let right = (f2 - f1) / hr;
                if right > left + tol {
                    kink_violation = true;
                }
            }
        }
        let pass = checked > 0 && max_second_difference <= tol && !kink_violation;
        Ok(LogConcavityReport { max_second_difference, pass, checked_triples: checked, skipped_points })
    }

    fn straddles_kink(&self, lo: f64, hi: f64) -> bool {
        self.kink_points().iter().flatten().any(|&k| k > lo && k < hi)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn marsaglia_tsang(k: f64, rng: &mut Rng) -> f64 {
    let d = k - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.standard_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.uniform();
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogConcavityReport {
    pub max_second_difference: f64,
    pub pass: bool,
    pub checked_triples: usize,
    /// Grid points outside the support.
    pub skipped_points: usize,
}

#[derive(Serialize, Deserialize)]
struct DistributionRepr {
    kind: String,
    params: BTreeMap<String, f64>,
}

impl From<Distribution1D> for DistributionRepr {
    fn from(d: Distribution1D) -> Self {
        let pairs: [(&str, f64); 2] = match d {
            Distribution1D::Gaussian { m, sigma } | Distribution1D::Laplace { m, sigma } => [("m", m), ("sigma", sigma)],
            Distribution1D::Exponential { lambda } => [("lambda", lambda), ("", 0.0)],
            Distribution1D::Logistic { m, s } => [("m", m), ("s", s)],
            Distribution1D::Gamma { k, lambda } => [("k", k), ("lambda", lambda)],
            Distribution1D::Uniform { a, b } => [("a", a), ("b", b)],
        };
        let params = pairs
            .iter()
            .filter(|(n, _)| !n.is_empty())
            .map(|(n, v)| (n.to_string(), *v))
            .collect();
        Self { kind: d.kind_name().to_string(), params }
    }
}

impl TryFrom<DistributionRepr> for Distribution1D {
    type Error = Error;

    fn try_from(r: DistributionRepr) -> Result<Self> {
        let get = |name: &'static str| {
            r.params
                .get(name)
                .copied()
                .ok_or_else(|| Error::MissingParameter { kind: r.kind.clone(), name })
        };
        match r.kind.as_str() {
            "gaussian" => Self::gaussian(get("m")?, get("sigma")?),
            "exponential" => Self::exponential(get("lambda")?),
            "laplace" => Self::laplace(get("m")?, get("sigma")?),
            "logistic" => Self::logistic(get("m")?, get("s")?),
            "gamma" => Self::gamma(get("k")?, get("lambda")?),
            "uniform" => Self::uniform(get("a")?, get("b")?),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

impl core::fmt::Display for Distribution1D {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match *self {
            Self::Gaussian { m, sigma } => write!(f, "N({m}, {sigma}^2)"),
            Self::Exponential { lambda } => write!(f, "Exp({lambda})"),
            Self::Laplace { m, sigma } => write!(f, "Lap({m}, {sigma})"),
            Self::Logistic { m, s } => write!(f, "Logistic({m}, {s})"),
            Self::Gamma { k, lambda } => write!(f, "Gamma({k}, {lambda})"),
            Self::Uniform { a, b } => write!(f, "U({a}, {b})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use core::f64::consts::LN_2;

    #[test]
    fn table_values() {
        let lap = Distribution1D::laplace(0.0, 1.0).unwrap();
        assert!((lap.density(0.0) - 0.5).abs() < 1e-15);
        assert!((lap.log_density(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!((lap.cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((lap.cdf(1.0) - (1.0 - 0.5 * (-1.0f64).exp())).abs() < 1e-15);

        let uni = Distribution1D::uniform(0.0, 1.0).unwrap();
        assert_eq!(uni.density(2.0), 0.0);
        assert_eq!(Distribution1D::uniform(0.0, 2.0).unwrap().cdf(1.0), 0.5);

        let gam = Distribution1D::gamma(2.0, 1.0).unwrap();
        assert!((gam.density(1.0) - (-1.0f64).exp()).abs() < 1e-15);

        let g = Distribution1D::gaussian(0.0, 1.0).unwrap();
        assert!((g.log_density(0.0) + 0.918_938_533_204_672_7).abs() < 1e-15);

        let e = Distribution1D::exponential(1.0).unwrap();
        assert_eq!(e.log_density(-1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(Distribution1D::gamma(0.5, 1.0).is_err());
        assert!(Distribution1D::gaussian(0.0, 0.0).is_err());
        assert!(Distribution1D::uniform(1.0, 1.0).is_err());
        assert!(Distribution1D::exponential(-2.0).is_err());
        assert!(Distribution1D::laplace(f64::NAN, 1.0).is_err());
        assert!(Distribution1D::gamma(1.0, 1.0).is_ok());
    }

    #[test]
    fn uniform_driver_is_identity() {
        let uni = Distribution1D::uniform(0.0, 1.0).unwrap();
        assert_eq!(uni.quantile(0.25), 0.25);
    }

    #[test]
    fn gaussian_second_differences_are_minus_h_squared() {
        let g = Distribution1D::gaussian(0.0, 1.0).unwrap();
        let h = 0.05;
        let grid: alloc::vec::Vec<f64> = (0..81).map(|i| -2.0 + h * i as f64).collect();
        let r = g.check_log_concavity(&grid, 1e-8).unwrap();
        assert!(r.pass);
        assert!((r.max_second_difference + h * h).abs() < 1e-12);
    }

    #[test]
    fn laplace_kink_and_gamma_pass() {
        let lap = Distribution1D::laplace(0.0, 1.0).unwrap();
        let grid: alloc::vec::Vec<f64> = (0..40).map(|i| -1.95 + 0.1 * i as f64).collect();
        assert!(lap.check_log_concavity(&grid, 1e-8).unwrap().pass);
        let gam = Distribution1D::gamma(2.0, 1.0).unwrap();
        let grid: alloc::vec::Vec<f64> = (0..100).map(|i| 0.1 + 0.099 * i as f64).collect();
        assert!(gam.check_log_concavity(&grid, 1e-8).unwrap().pass);
    }

    #[test]
    fn grid_outside_support_is_skipped() {
        let e = Distribution1D::exponential(1.0).unwrap();
        let grid = [-2.0, -1.0, 0.5, 1.0, 1.5];
        let r = e.check_log_concavity(&grid, 1e-8).unwrap();
        assert_eq!(r.skipped_points, 2);
        assert!(r.pass);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let laws = [
            Distribution1D::gaussian(1.0, 2.0).unwrap(),
            Distribution1D::gamma(2.5, 0.7).unwrap(),
            Distribution1D::logistic(-1.0, 0.3).unwrap(),
        ];
        for d in laws {
            for &p in &[1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-6] {
                assert!((d.cdf(d.quantile(p)) - p).abs() < 1e-12, "{d} at {p}");
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = SeedStream::new(5);
        let d = Distribution1D::gamma(2.3, 1.0).unwrap();
        let a = d.sample(&mut s.rng(0, 0));
        let b = d.sample(&mut s.rng(0, 0));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn abs_moments_of_symmetric_laws() {
        let g = Distribution1D::gaussian(0.0, 1.0).unwrap();
        assert!((g.abs_mean() - (2.0 / PI).sqrt()).abs() < 1e-14);
        let l = Distribution1D::laplace(0.0, 1.0).unwrap();
        assert!((l.abs_variance() - 1.0).abs() < 1e-14);
        let lo = Distribution1D::logistic(0.0, 1.0).unwrap();
        assert!((lo.abs_mean() - 2.0 * LN_2).abs() < 1e-14);
    }
}
