use cbayes_core::experiments::table_battery;
use cbayes_core::forward::{ForwardModel, Kernel};
use cbayes_core::likelihood::{NoiseCovariance, Potential};
use cbayes_core::math::GaussLegendre;
use cbayes_core::posterior::{self, l1_objective, map_estimate_l1, Method, PosteriorSpec, PriorSpec};
use cbayes_core::series_prior::{window_len, Basis, FieldSample};
use cbayes_core::{Distribution1D, SeedStream};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn law() -> impl Strategy<Value = Distribution1D> {
    prop_oneof![
        (-5.0..5.0f64, 0.1..5.0f64).prop_map(|(m, sigma)| Distribution1D::Gaussian { m, sigma }),
        (0.1..5.0f64).prop_map(|lambda| Distribution1D::Exponential { lambda }),
        (-5.0..5.0f64, 0.1..5.0f64).prop_map(|(m, sigma)| Distribution1D::Laplace { m, sigma }),
        (-5.0..5.0f64, 0.1..5.0f64).prop_map(|(m, s)| Distribution1D::Logistic { m, s }),
        (1.0..8.0f64, 0.2..4.0f64).prop_map(|(k, lambda)| Distribution1D::Gamma { k, lambda }),
        (-5.0..0.0f64, 0.1..5.0f64).prop_map(|(a, w)| Distribution1D::Uniform { a, b: a + w }),
    ]
}

/// Integration range covering all but 1e-13 of the mass, with kinks as breaks.
fn mass_range(d: &Distribution1D) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = d.support();
    let lo = if lo.is_finite() { lo } else { d.quantile(1e-14) };
    let hi = if hi.is_finite() { hi } else { d.quantile(1.0 - 1e-14) };
    (lo, hi, d.kink_points().iter().flatten().copied().collect())
}

/// Composite Gauss–Legendre with cuts at `breaks` and geometric refinement
/// towards a finite left support edge, where Gamma densities are not smooth.
fn integrate_density(d: &Distribution1D, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let gl = GaussLegendre::new(16);
    let mut cuts = vec![a, b];
    cuts.extend(breaks.iter().copied().filter(|c| *c > a && *c < b));
    let edge = d.support().0;
    if edge.is_finite() && edge == a {
        cuts.extend((1..50).map(|j| a + (b - a) * 0.5f64.powi(j)));
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.windows(2).map(|w| gl.integrate(|x| d.density(x), w[0], w[1], 4)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_integrates_to_one(d in law()) {
        let (lo, hi, breaks) = mass_range(&d);
        let total = integrate_density(&d, lo, hi, &breaks);
        prop_assert!((total - 1.0).abs() <= 1e-6, "{d:?}: {total}");
    }

    #[test]
    fn cdf_matches_integrated_density(d in law(), p in 0.001..0.999f64) {
        let (lo, _, breaks) = mass_range(&d);
        let x = d.quantile(p);
        let integral = integrate_density(&d, lo, x, &breaks);
        prop_assert!((integral - d.cdf(x)).abs() <= 1e-6, "{d:?} at {x}: {integral} vs {}", d.cdf(x));
    }

    #[test]
    fn quantile_inverts_cdf(d in law(), p in 0.001..0.999f64) {
        prop_assert!((d.cdf(d.quantile(p)) - p).abs() <= 1e-9);
    }

    #[test]
    fn interval_measures_satisfy_convexity_inequality(
        d in law(),
        p in prop::array::uniform4(0.0..1.0f64),
        lambda in prop::sample::select(vec![0.25, 0.5, 0.75]),
    ) {
        let q = |t: f64| d.quantile(0.001 + 0.998 * t);
        let (a0, a1) = (q(p[0].min(p[1])), q(p[0].max(p[1])));
        let (b0, b1) = (q(p[2].min(p[3])), q(p[2].max(p[3])));
        let mix = d.interval_probability(lambda * a0 + (1.0 - lambda) * b0, lambda * a1 + (1.0 - lambda) * b1);
        let bound = d.interval_probability(a0, a1).powf(lambda) * d.interval_probability(b0, b1).powf(1.0 - lambda);
        prop_assert!(mix >= bound - 1e-9, "{d:?}: {mix} < {bound}");
    }

    #[test]
    fn forward_model_is_linear(
        u in prop::collection::vec(-3.0..3.0f64, 8),
        v in prop::collection::vec(-3.0..3.0f64, 8),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        s in 0.0..2.0f64,
    ) {
        let model = ForwardModel::deconvolution(Kernel::Algebraic(s), ForwardModel::equispaced_points(5), 4).unwrap();
        let mixed: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = model.apply(&mixed).unwrap();
        let (fu, fv) = (model.apply(&u).unwrap(), model.apply(&v).unwrap());
        for (i, l) in lhs.iter().enumerate() {
            prop_assert!((l - (a * fu[i] + b * fv[i])).abs() <= 1e-10);
        }
    }

    #[test]
    fn gaussian_potential_is_half_whitened_misfit(
        u in prop::collection::vec(-3.0..3.0f64, 3),
        y in prop::collection::vec(-3.0..3.0f64, 2),
        sigma2 in 0.1..4.0f64,
        c in -0.9..0.9f64,
    ) {
        let rows = vec![vec![1.0, 0.5, -1.0], vec![0.0, 2.0, 0.3]];
        let model = ForwardModel::linear(rows.clone()).unwrap();
        let cov = vec![vec![sigma2, c * sigma2], vec![c * sigma2, sigma2]];
        let phi = Potential::gaussian(model, NoiseCovariance::Dense(cov.clone()), y.clone()).unwrap();
        let r: Vec<f64> = (0..2).map(|i| y[i] - rows[i].iter().zip(&u).map(|(a, b)| a * b).sum::<f64>()).collect();
        let inv = DMatrix::from_fn(2, 2, |i, j| cov[i][j]).try_inverse().unwrap();
        let rv = DVector::from_column_slice(&r);
        let expected = 0.5 * (rv.transpose() * inv * &rv)[0];
        let got = phi.evaluate(&u).unwrap();
        prop_assert!((got - expected).abs() <= 1e-9 * (1.0 + expected), "{got} vs {expected}");
    }

    #[test]
    fn hellinger_is_symmetric_and_bounded(y1 in -3.0..3.0f64, y2 in -3.0..3.0f64, seed in 0u64..1000) {
        let prior = PriorSpec::Product(vec![Distribution1D::Laplace { m: 0.0, sigma: 1.0 }]);
        let mk = |y: f64| {
            let phi = Potential::gaussian(ForwardModel::linear(vec![vec![1.0]]).unwrap(), NoiseCovariance::Scaled { sigma2: 1.0 }, vec![y]).unwrap();
            PosteriorSpec::new(prior.clone(), phi, 1).unwrap()
        };
        let (a, b) = (mk(y1), mk(y2));
        let ab = posterior::hellinger(&a, &b, Method::PriorMc, 2000, seed).unwrap();
        let ba = posterior::hellinger(&b, &a, Method::PriorMc, 2000, seed).unwrap();
        prop_assert_eq!(ab.value, ba.value);
        prop_assert!((0.0..=1.0).contains(&ab.value));
    }

    #[test]
    fn map_estimate_satisfies_optimality(seed in 0u64..10_000, lambda in 0.2..5.0f64) {
        let mut rng = SeedStream::new(seed).rng(0, 0);
        let a = DMatrix::from_fn(5, 10, |_, _| rng.standard_normal());
        let y: Vec<f64> = (0..5).map(|_| 2.0 * rng.standard_normal()).collect();
        let sigma = 1.0;
        let tau = sigma * sigma / lambda;
        let map = map_estimate_l1(&a, &y, sigma, lambda, 1e-13).unwrap();
        let z = DVector::from_column_slice(&map.solution);
        let grad = a.transpose() * (DVector::from_column_slice(&y) - &a * &z);
        for j in 0..10 {
            if map.solution[j] == 0.0 {
                prop_assert!(grad[j].abs() <= tau + 1e-6, "coordinate {j}: {} > {tau}", grad[j]);
            } else {
                prop_assert!((grad[j] - tau * map.solution[j].signum()).abs() <= 1e-6);
            }
        }
        prop_assert!((map.objective - l1_objective(&a, &y, tau, &map.solution)).abs() <= 1e-12 * (1.0 + map.objective));
        prop_assert!(map.max_increase <= 1e-12);
    }
}

/// Kolmogorov–Smirnov statistic of each kind's sampler against its own cdf.
#[test]
fn samplers_pass_ks_at_one_percent() {
    let n = 100_000;
    let critical = 1.628 / (n as f64).sqrt();
    let mut seen = Vec::new();
    for (i, d) in table_battery().iter().enumerate() {
        if seen.contains(&d.kind_name()) {
            continue;
        }
        seen.push(d.kind_name());
        let mut rng = SeedStream::new(11).rng(i as u64, 0);
        let mut x: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ks = x
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let f = d.cdf(*v);
                (f - j as f64 / n as f64).max((j + 1) as f64 / n as f64 - f)
            })
            .fold(0.0, f64::max);
        assert!(ks < critical, "{d:?}: KS {ks} >= {critical}");
    }
}

/// Periodic kernel with multipliers `1 / (1 + k^2)`, summed in closed form.
fn algebraic_one_kernel(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let t = x.rem_euclid(1.0);
    pi * (pi * (1.0 - 2.0 * t)).cosh() / pi.sinh()
}

#[test]
fn deconvolution_matches_quadrature_convolution() {
    let truncation = 6;
    let model = ForwardModel::deconvolution(Kernel::Algebraic(1.0), vec![0.0, 0.3], truncation).unwrap();
    let mut rng = SeedStream::new(3).rng(0, 0);
    let coeffs: Vec<f64> = (0..window_len(truncation)).map(|_| rng.standard_normal()).collect();
    let field = FieldSample::new(truncation, coeffs.clone());
    let gl = GaussLegendre::new(16);
    for x in [0.0, 0.13, 0.5, 0.77] {
        let (nodes, weights) = gl.composite_points(0.0, 1.0, &[x], 64);
        let oracle: f64 =
            nodes.iter().zip(&weights).map(|(t, w)| w * algebraic_one_kernel(x - t) * field.evaluate(&Basis::FourierCircle, *t)).sum();
        let got = model.convolved_value(&coeffs, x).unwrap();
        assert!((got - oracle).abs() <= 1e-8, "x={x}: {got} vs {oracle}");
    }
}

