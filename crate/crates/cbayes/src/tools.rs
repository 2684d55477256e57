//! Inputs and outputs of the `sample-prior`, `hellinger` and `map`
//! subcommands.

use std::collections::BTreeMap;

use cbayes_core::experiments::{resolve_model, DEFAULT_SAMPLES};
use cbayes_core::forward::{ForwardModel, ModelSpec};
use cbayes_core::likelihood::{NoiseCovariance, Potential};
use cbayes_core::posterior::{self, Estimate, MapResult, Method, PosteriorSpec, PriorSpec, DEFAULT_QUADRATURE_PANELS};
use cbayes_core::series_prior::{FieldSample, SeriesPrior};
use cbayes_core::SeedStream;
use serde::{Deserialize, Serialize};

use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSampleConfig {
    pub prior: SeriesPrior,
    pub truncation: usize,
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Equispaced points at which to evaluate each draw (0 = none).
    #[serde(default)]
    pub grid: usize,
}

/// `(sample, x, value)`
pub type FieldValue = (usize, f64, f64);

/// Draws and, if a grid is requested, their values on it.
pub fn sample_prior(cfg: &PriorSampleConfig, seed: u64) -> Result<(Vec<FieldSample>, Vec<FieldValue>)> {
    cfg.prior.validate()?;
    let stream = SeedStream::new(seed);
    let draws: Vec<FieldSample> = (0..cfg.samples).map(|i| cfg.prior.sample_field_with(cfg.truncation, &stream, i as u64)).collect();
    let mut values = Vec::new();
    if cfg.grid > 0 {
        let (a, b) = cfg.prior.basis.domain();
        for (i, d) in draws.iter().enumerate() {
            for g in 0..cfg.grid {
                let x = a + (b - a) * g as f64 / cfg.grid as f64;
                values.push((i, x, d.evaluate(&cfg.prior.basis, x)));
            }
        }
    }
    Ok((draws, values))
}

/// Potential referencing a model by id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    GaussianAdditive {
        model: String,
        noise: NoiseCovariance,
        data: Vec<f64>,
        #[serde(default)]
        projection: Option<usize>,
    },
    MultiplicativeUniform { threshold: f64, dim: usize },
}

impl PotentialSpec {
    pub fn build(&self, models: &BTreeMap<String, ModelSpec>, truncation: usize) -> Result<Potential> {
        Ok(match self {
            Self::GaussianAdditive { model, noise, data, projection } => {
                let m = ForwardModel::new(resolve_model(models, model)?)?;
                let m = match m.spec() {
                    ModelSpec::Deconvolution { .. } => m.with_truncation(truncation)?,
                    ModelSpec::Linear { .. } => m,
                };
                let phi = Potential::gaussian(m, noise.clone(), data.clone())?;
                match projection {
                    Some(n) => phi.projected(*n),
                    None => phi,
                }
            }
            Self::MultiplicativeUniform { threshold, dim } => Potential::multiplicative(*threshold, *dim)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HellingerConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub models: BTreeMap<String, ModelSpec>,
    pub prior: PriorSpec,
    pub truncation: usize,
    pub first: PotentialSpec,
    pub second: PotentialSpec,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Samples, or panels per axis for quadrature.
    #[serde(default)]
    pub effort: Option<usize>,
}

fn default_method() -> Method {
    Method::PriorMc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceOutput {
    pub hellinger: Estimate,
    pub total_variation: Estimate,
}

pub fn distances(cfg: &HellingerConfig, seed: u64) -> Result<DistanceOutput> {
    let a = PosteriorSpec::new(cfg.prior.clone(), cfg.first.build(&cfg.models, cfg.truncation)?, cfg.truncation)?;
    let b = PosteriorSpec::new(cfg.prior.clone(), cfg.second.build(&cfg.models, cfg.truncation)?, cfg.truncation)?;
    let effort = cfg.effort.unwrap_or(match cfg.method {
        Method::PriorMc => DEFAULT_SAMPLES,
        Method::Quadrature => DEFAULT_QUADRATURE_PANELS,
    });
    Ok(DistanceOutput {
        hellinger: posterior::hellinger(&a, &b, cfg.method, effort, seed)?,
        total_variation: posterior::total_variation(&a, &b, cfg.method, effort, seed)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapConfig {
    pub matrix: Vec<Vec<f64>>,
    pub data: Vec<f64>,
    pub sigma: f64,
    pub lambda: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-12
}

pub fn map_point(cfg: &MapConfig) -> Result<MapResult> {
    let a = ForwardModel::linear(cfg.matrix.clone())?.design().clone();
    Ok(posterior::map_estimate_l1(&a, &cfg.data, cfg.sigma, cfg.lambda, cfg.tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_model_is_an_error() {
        let spec = PotentialSpec::GaussianAdditive {
            model: "nope".into(),
            noise: NoiseCovariance::Scaled { sigma2: 1.0 },
            data: vec![0.0],
            projection: None,
        };
        assert!(spec.build(&BTreeMap::new(), 4).is_err());
    }

    #[test]
    fn builtin_model_takes_the_requested_window() {
        let spec = PotentialSpec::GaussianAdditive {
            model: "smoothing_deconvolution".into(),
            noise: NoiseCovariance::Scaled { sigma2: 1.0 },
            data: vec![0.0; 8],
            projection: None,
        };
        assert_eq!(spec.build(&BTreeMap::new(), 4).unwrap().input_dim(), 8);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let cfg = MapConfig { matrix: vec![vec![1.0, 2.0], vec![1.0]], data: vec![0.0, 0.0], sigma: 1.0, lambda: 1.0, tol: 1e-12 };
        assert!(map_point(&cfg).is_err());
    }

    #[test]
    fn zero_data_gives_zero_map() {
        let cfg = MapConfig { matrix: vec![vec![1.0, 0.5], vec![0.2, 1.0]], data: vec![0.0, 0.0], sigma: 1.0, lambda: 1.0, tol: 1e-12 };
        assert_eq!(map_point(&cfg).unwrap().solution, vec![0.0, 0.0]);
    }

    #[test]
    fn prior_draws_are_seeded() {
        let cfg = PriorSampleConfig { prior: SeriesPrior::laplace_deconvolution(), truncation: 2, samples: 3, seed: None, grid: 2 };
        let (a, va) = sample_prior(&cfg, 5).unwrap();
        let (b, _) = sample_prior(&cfg, 5).unwrap();
        let (c, _) = sample_prior(&cfg, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(va.len(), 6);
    }
}
