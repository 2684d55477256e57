//! Parameter-to-observation maps.
//!
//! Both supported models are linear in the coefficients, so each one caches
//! its design matrix. Circular convolution is diagonal on the Fourier basis:
//! mode `k` is multiplied by the kernel multiplier `g_|k|` and then sampled
//! at the observation points.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::norm2;
use crate::rng::{Rng, SeedStream};
use crate::series_prior::{fourier_mode, mode_index, window_len};

/// Fourier multipliers of a symmetric kernel, indexed by frequency `|k|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `g_k = (1 + k^2)^(-s)`; `s = 0` observes `u` itself.
    Algebraic(f64),
    /// Listed multipliers; frequencies past the end are zero.
    Explicit(Vec<f64>),
}

impl Kernel {
    pub fn multiplier(&self, frequency: u64) -> f64 {
        match self {
            Kernel::Algebraic(s) => {
                let k = frequency as f64;
                (1.0 + k * k).powf(-s)
            }
            Kernel::Explicit(v) => v.get(frequency as usize).copied().unwrap_or(0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Kernel::Algebraic(s) if !(s.is_finite() && *s >= 0.0) => Err(Error::InvalidParameter {
                kind: "kernel",
                name: "s",
                value: *s,
                reason: "decay exponent must be >= 0",
            }),
            Kernel::Explicit(v) if v.iter().any(|x| !x.is_finite()) => {
                Err(Error::InvalidArgument("kernel multipliers must be finite"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Dense matrix given by rows.
    Linear { matrix: Vec<Vec<f64>> },
    Deconvolution {
        kernel: Kernel,
        observation_points: Vec<f64>,
        /// Input window `{-N, ..., N-1}`.
        truncation: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct ForwardModel {
    spec: ModelSpec,
    design: DMatrix<f64>,
}

impl TryFrom<ModelSpec> for ForwardModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        ForwardModel::new(spec)
    }
}

impl From<ForwardModel> for ModelSpec {
    fn from(m: ForwardModel) -> Self {
        m.spec
    }
}

impl ForwardModel {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let design = match &spec {
            ModelSpec::Linear { matrix } => {
                let rows = matrix.len();
                let cols = matrix.first().map_or(0, Vec::len);
                if rows == 0 || cols == 0 {
                    return Err(Error::InvalidArgument("linear model needs a non-empty matrix"));
                }
                if let Some(bad) = matrix.iter().find(|r| r.len() != cols) {
                    return Err(Error::DimensionMismatch { expected: cols, found: bad.len() });
                }
                if matrix.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("linear model entries must be finite"));
                }
                DMatrix::from_fn(rows, cols, |i, j| matrix[i][j])
            }
            ModelSpec::Deconvolution { kernel, observation_points, truncation } => {
                kernel.validate()?;
                if *truncation == 0 || observation_points.is_empty() {
                    return Err(Error::InvalidArgument("deconvolution needs a window and observation points"));
                }
                if observation_points.iter().any(|x| !(0.0..1.0).contains(x)) {
                    return Err(Error::InvalidArgument("observation points must lie in [0, 1)"));
                }
                let mut sorted = observation_points.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidArgument("observation points must be distinct"));
                }
                let n = window_len(*truncation);
                DMatrix::from_fn(observation_points.len(), n, |j, p| {
                    let k = mode_index(p);
                    kernel.multiplier(k.unsigned_abs()) * fourier_mode(k, observation_points[j])
                })
            }
        };
        Ok(Self { spec, design })
    }

    pub fn linear(matrix: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(ModelSpec::Linear { matrix })
    }

    pub fn deconvolution(kernel: Kernel, observation_points: Vec<f64>, truncation: usize) -> Result<Self> {
        Self::new(ModelSpec::Deconvolution { kernel, observation_points, truncation })
    }

    /// `m` equispaced observation points `j / m`.
    pub fn equispaced_points(m: usize) -> Vec<f64> {
        (0..m).map(|j| j as f64 / m as f64).collect()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn input_dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.design.nrows()
    }

    /// Same deconvolution model on a different input window.
    pub fn with_truncation(&self, truncation: usize) -> Result<Self> {
        match &self.spec {
            ModelSpec::Deconvolution { kernel, observation_points, .. } => {
                Self::deconvolution(kernel.clone(), observation_points.clone(), truncation)
            }
            ModelSpec::Linear { .. } => Err(Error::InvalidArgument("linear models have a fixed input dimension")),
        }
    }

    /// Deconvolution model whose multipliers vanish outside the window
    /// `{-N, ..., N-1}`, on the same input dimension.
    pub fn with_kernel_window(&self, window: usize) -> Result<Self> {
        if let ModelSpec::Linear { .. } = self.spec {
            return Err(Error::InvalidArgument("kernel window only applies to deconvolution models"));
        }
        let mut out = self.clone();
        let cutoff = window_len(window);
        for p in cutoff..out.design.ncols() {
            out.design.column_mut(p).fill(0.0);
        }
        Ok(out)
    }

    pub fn apply(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let mut out = alloc::vec![0.0; self.output_dim()];
        self.apply_into(coeffs, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, coeffs: &[f64], out: &mut [f64]) -> Result<()> {
        if coeffs.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: coeffs.len() });
        }
        out.fill(0.0);
        for (p, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.design.column(p).iter()) {
                *o += a * c;
            }
        }
        Ok(())
    }

    /// `(g * u)(x)` for a deconvolution model at any point of the circle.
    pub fn convolved_value(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        match &self.spec {
            ModelSpec::Deconvolution { kernel, .. } => {
                if coeffs.len() != self.input_dim() {
                    return Err(Error::DimensionMismatch { expected: self.input_dim(), found: coeffs.len() });
                }
                Ok(coeffs
                    .iter()
                    .enumerate()
                    .map(|(p, c)| {
                        let k = mode_index(p);
                        kernel.multiplier(k.unsigned_abs()) * c * fourier_mode(k, x)
                    })
                    .sum())
            }
            ModelSpec::Linear { .. } => Err(Error::InvalidArgument("convolution only defined for deconvolution models")),
        }
    }

    /// Exact operator 2-norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        self.design.clone().singular_values().max()
    }

    /// Closed-form upper bound on the operator norm (Frobenius norm).
    pub fn operator_norm_bound(&self) -> f64 {
        self.design.norm()
    }

    /// Largest observed `||G(u1) - G(u2)|| / ||u1 - u2||` over pairs drawn
    /// uniformly from the radius-`r` ball.
    pub fn lipschitz_probe(&self, r: f64, num_pairs: usize, seed: u64) -> Result<ProbeReport> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument("probe radius must be > 0"));
        }
        let stream = SeedStream::new(seed).fork(PROBE_TAG);
        let n = self.input_dim();
        let mut best = 0.0f64;
        let mut used = 0;
        for i in 0..num_pairs {
            let mut rng = stream.rng(i as u64, 0);
            let u1 = uniform_in_ball(&mut rng, n, r);
            let u2 = uniform_in_ball(&mut rng, n, r);
            let du: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
            let dn = norm2(&du);
            if dn == 0.0 {
                continue;
            }
            let g1 = self.apply(&u1)?;
            let g2 = self.apply(&u2)?;
            let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
            best = best.max(norm2(&dg) / dn);
            used += 1;
        }
        Ok(ProbeReport { value: best, samples: used })
    }

    /// Largest observed `log ||G(u)|| - eps ||u||` over points drawn
    /// uniformly on the sphere of the given radius. Samples with
    /// `G(u) = 0` are skipped.
    pub fn bound_probe(&self, eps: f64, radius: f64, num_samples: usize, seed: u64) -> Result<ProbeReport> {
        if !(eps >= 0.0 && radius > 0.0) {
            return Err(Error::InvalidArgument("bound probe needs eps >= 0 and radius > 0"));
        }
        let stream = SeedStream::new(seed).fork(PROBE_TAG + 1);
        let n = self.input_dim();
        let mut best = f64::NEG_INFINITY;
        let mut used = 0;
        for i in 0..num_samples {
            let mut rng = stream.rng(i as u64, 0);
            let u = on_sphere(&mut rng, n, radius);
            let g = norm2(&self.apply(&u)?);
            if g == 0.0 {
                continue;
            }
            best = best.max(g.ln() - eps * norm2(&u));
            used += 1;
        }
        Ok(ProbeReport { value: best, samples: used })
    }
}

const PROBE_TAG: u64 = 0x5052_4f42;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Empirical constant (`K` for the Lipschitz probe, `M` for the bound probe).
    pub value: f64,
    pub samples: usize,
}

pub(crate) fn on_sphere(rng: &mut Rng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let norm = norm2(&v);
        if norm > 0.0 {
            return v.into_iter().map(|x| radius * x / norm).collect();
        }
    }
}

pub(crate) fn uniform_in_ball(rng: &mut Rng, n: usize, r: f64) -> Vec<f64> {
    let radius = r * rng.uniform().powf(1.0 / n as f64);
    on_sphere(rng, n, radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_linear_model() {
        let m = ForwardModel::linear(alloc::vec![alloc::vec![1.0]]).unwrap();
        assert_eq!(m.apply(&[2.0]).unwrap(), alloc::vec![2.0]);
        assert!(m.apply(&[1.0, 2.0]).is_err());
        let k = m.lipschitz_probe(1.0, 200, 3).unwrap();
        assert!((k.value - 1.0).abs() < 1e-12);
        let two = ForwardModel::linear(alloc::vec![alloc::vec![2.0]]).unwrap();
        assert!((two.lipschitz_probe(1.0, 200, 3).unwrap().value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bound_probe_identity() {
        let m = ForwardModel::linear(alloc::vec![alloc::vec![1.0]]).unwrap();
        assert_eq!(m.bound_probe(0.0, 1.0, 50, 1).unwrap().value, 0.0);
        assert!(m.bound_probe(1.0, 1.0, 50, 1).unwrap().value <= 0.0);
    }

    #[test]
    fn unit_multiplier_reads_cosine_mode() {
        let m = ForwardModel::deconvolution(Kernel::Explicit(alloc::vec![1.0; 8]), alloc::vec![0.0, 0.25], 4).unwrap();
        let mut u = alloc::vec![0.0; 8];
        u[crate::series_prior::position_of(2)] = 1.0;
        let y = m.apply(&u).unwrap();
        // sqrt2 cos(4 pi x): maximum at x = 0
        assert!((y[0] - core::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn malformed_models_rejected() {
        assert!(ForwardModel::linear(alloc::vec![alloc::vec![1.0], alloc::vec![1.0, 2.0]]).is_err());
        assert!(ForwardModel::linear(alloc::vec![]).is_err());
        assert!(ForwardModel::deconvolution(Kernel::Algebraic(1.0), alloc::vec![0.5, 0.5], 4).is_err());
        assert!(ForwardModel::deconvolution(Kernel::Algebraic(1.0), alloc::vec![1.0], 4).is_err());
    }

    #[test]
    fn deconvolution_bounds() {
        let m = ForwardModel::deconvolution(Kernel::Algebraic(1.0), ForwardModel::equispaced_points(8), 8).unwrap();
        let bound = m.operator_norm_bound();
        assert!(m.operator_norm() <= bound + 1e-12);
        let k = m.lipschitz_probe(1.0, 500, 2).unwrap();
        assert!(k.value <= m.operator_norm() + 1e-12);
        let mb = m.bound_probe(0.0, 1.0, 500, 2).unwrap();
        assert!(mb.value <= bound.ln());
    }
}
