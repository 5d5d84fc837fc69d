//! Univariate error laws: parametric families, an empirical histogram law,
//! maximum-likelihood fitting and histogram-SSE model selection.

mod fit;

pub use fit::{fit_mle, select_distribution, sse_against_histogram, FitOptions, FittedDistribution};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma, Laplace, Normal, StudentsT};
use thiserror::Error;

use crate::rng::open_unit;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no samples")]
    Empty,
    #[error("invalid parameters for {family}: {detail}")]
    InvalidParameters { family: &'static str, detail: String },
    #[error("{family} fit failed: {detail}")]
    FitFailed { family: &'static str, detail: String },
}

/// Candidate parametric families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Normal,
    Laplace,
    Logistic,
    ShiftedGamma,
    StudentT,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Normal,
        Family::Laplace,
        Family::Logistic,
        Family::ShiftedGamma,
        Family::StudentT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Laplace => "laplace",
            Family::Logistic => "logistic",
            Family::ShiftedGamma => "shifted-gamma",
            Family::StudentT => "student-t",
        }
    }

    pub fn parameter_count(self) -> usize {
        match self {
            Family::Normal | Family::Laplace | Family::Logistic => 2,
            Family::ShiftedGamma | Family::StudentT => 3,
        }
    }
}

/// A fitted law. `Empirical` is a histogram with uniform mass inside each bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Distribution {
    Normal { mu: f64, sigma: f64 },
    Laplace { mu: f64, b: f64 },
    Logistic { mu: f64, s: f64 },
    ShiftedGamma { shift: f64, shape: f64, scale: f64 },
    StudentT { mu: f64, sigma: f64, nu: f64 },
    Empirical { edges: Vec<f64>, mass: Vec<f64> },
}

fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

impl Distribution {
    pub fn family(&self) -> Option<Family> {
        Some(match self {
            Distribution::Normal { .. } => Family::Normal,
            Distribution::Laplace { .. } => Family::Laplace,
            Distribution::Logistic { .. } => Family::Logistic,
            Distribution::ShiftedGamma { .. } => Family::ShiftedGamma,
            Distribution::StudentT { .. } => Family::StudentT,
            Distribution::Empirical { .. } => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        self.family().map_or("empirical", Family::name)
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        let bad = |detail: &str| {
            Err(StatsError::InvalidParameters {
                family: self.name(),
                detail: detail.to_string(),
            })
        };
        let pos = |x: f64| x.is_finite() && x > 0.0;
        match *self {
            Distribution::Normal { mu, sigma } if !(mu.is_finite() && pos(sigma)) => bad("need finite mu, sigma > 0"),
            Distribution::Laplace { mu, b } if !(mu.is_finite() && pos(b)) => bad("need finite mu, b > 0"),
            Distribution::Logistic { mu, s } if !(mu.is_finite() && pos(s)) => bad("need finite mu, s > 0"),
            Distribution::ShiftedGamma { shift, shape, scale } if !(shift.is_finite() && pos(shape) && pos(scale)) => {
                bad("need finite shift, shape > 0, scale > 0")
            }
            Distribution::StudentT { mu, sigma, nu } if !(mu.is_finite() && pos(sigma) && pos(nu)) => {
                bad("need finite mu, sigma > 0, nu > 0")
            }
            Distribution::Empirical { ref edges, ref mass } => {
                if edges.len() != mass.len() + 1 || mass.is_empty() {
                    return bad("edges must have one more entry than mass");
                }
                if edges.windows(2).any(|w| w[1] < w[0]) {
                    return bad("edges must be non-decreasing");
                }
                if mass.iter().any(|&m| !(m >= 0.0)) || (mass.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return bad("mass must be non-negative and sum to 1");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Normal { mu, sigma } => Normal::new(mu, sigma).unwrap().ln_pdf(x),
            Distribution::Laplace { mu, b } => Laplace::new(mu, b).unwrap().ln_pdf(x),
            Distribution::Logistic { mu, s } => {
                let z = (x - mu) / s;
                -s.ln() - z - 2.0 * softplus(-z)
            }
            Distribution::ShiftedGamma { shift, shape, scale } => {
                if x <= shift {
                    f64::NEG_INFINITY
                } else {
                    Gamma::new(shape, 1.0 / scale).unwrap().ln_pdf(x - shift)
                }
            }
            Distribution::StudentT { mu, sigma, nu } => StudentsT::new(mu, sigma, nu).unwrap().ln_pdf(x),
            Distribution::Empirical { .. } => self.pdf(x).ln(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Empirical { edges, mass } => {
                let n = mass.len();
                if x < edges[0] || x > edges[n] {
                    return 0.0;
                }
                let i = edges.partition_point(|&e| e <= x).clamp(1, n) - 1;
                let w = edges[i + 1] - edges[i];
                if w > 0.0 {
                    mass[i] / w
                } else {
                    0.0
                }
            }
            _ => self.ln_pdf(x).exp(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Normal { mu, sigma } => Normal::new(*mu, *sigma).unwrap().cdf(x),
            Distribution::Laplace { mu, b } => Laplace::new(*mu, *b).unwrap().cdf(x),
            Distribution::Logistic { mu, s } => 1.0 / (1.0 + (-(x - mu) / s).exp()),
            Distribution::ShiftedGamma { shift, shape, scale } => {
                if x <= *shift {
                    0.0
                } else {
                    Gamma::new(*shape, 1.0 / scale).unwrap().cdf(x - shift)
                }
            }
            Distribution::StudentT { mu, sigma, nu } => StudentsT::new(*mu, *sigma, *nu).unwrap().cdf(x),
            Distribution::Empirical { edges, mass } => {
                let n = mass.len();
                if x < edges[0] {
                    return 0.0;
                }
                if x >= edges[n] {
                    return 1.0;
                }
                let mut acc = 0.0;
                for i in 0..n {
                    if x < edges[i + 1] {
                        let w = edges[i + 1] - edges[i];
                        return acc + mass[i] * (x - edges[i]) / w;
                    }
                    acc += mass[i];
                }
                1.0
            }
        }
    }

    /// Quantile function for `u ∈ (0, 1)`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            Distribution::Normal { mu, sigma } => Normal::new(*mu, *sigma).unwrap().inverse_cdf(u),
            Distribution::Laplace { mu, b } => {
                if u < 0.5 {
                    mu + b * (2.0 * u).ln()
                } else {
                    mu - b * (2.0 * (1.0 - u)).ln()
                }
            }
            Distribution::Logistic { mu, s } => mu + s * (u / (1.0 - u)).ln(),
            Distribution::ShiftedGamma { shift, shape, scale } => {
                shift + Gamma::new(*shape, 1.0 / scale).unwrap().inverse_cdf(u)
            }
            Distribution::StudentT { mu, sigma, nu } => StudentsT::new(*mu, *sigma, *nu).unwrap().inverse_cdf(u),
            Distribution::Empirical { edges, mass } => {
                let mut acc = 0.0;
                for (i, &m) in mass.iter().enumerate() {
                    if m > 0.0 && u <= acc + m {
                        return edges[i] + (edges[i + 1] - edges[i]) * ((u - acc) / m).clamp(0.0, 1.0);
                    }
                    acc += m;
                }
                let last = mass.iter().rposition(|&m| m > 0.0).unwrap_or(mass.len() - 1);
                edges[last + 1]
            }
        }
    }

    /// Inverse-transform draw.
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        self.inverse_cdf(open_unit(rng))
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Normal { mu, .. } | Distribution::Laplace { mu, .. } | Distribution::Logistic { mu, .. } => *mu,
            Distribution::StudentT { mu, .. } => *mu,
            Distribution::ShiftedGamma { shift, shape, scale } => shift + shape * scale,
            Distribution::Empirical { edges, mass } => mass
                .iter()
                .enumerate()
                .map(|(i, m)| m * 0.5 * (edges[i] + edges[i + 1]))
                .sum(),
        }
    }

    /// Histogram law over `bins` equal-width bins spanning the samples.
    pub fn empirical(samples: &[f64], bins: usize) -> Result<Distribution, StatsError> {
        if samples.is_empty() {
            return Err(StatsError::Empty);
        }
        let bins = bins.max(1);
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            return Ok(Distribution::Empirical {
                edges: vec![lo, hi],
                mass: vec![1.0],
            });
        }
        let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        let mut counts = vec![0usize; bins];
        for &x in samples {
            let i = (((x - lo) / (hi - lo)) * bins as f64).floor() as usize;
            counts[i.min(bins - 1)] += 1;
        }
        let n = samples.len() as f64;
        Ok(Distribution::Empirical {
            edges,
            mass: counts.iter().map(|&c| c as f64 / n).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn all_parametric() -> Vec<Distribution> {
        vec![
            Distribution::Normal { mu: 0.3, sigma: 1.7 },
            Distribution::Laplace { mu: -1.0, b: 0.6 },
            Distribution::Logistic { mu: 2.0, s: 0.8 },
            Distribution::ShiftedGamma { shift: -2.0, shape: 2.5, scale: 0.9 },
            Distribution::StudentT { mu: 0.0, sigma: 1.2, nu: 4.0 },
        ]
    }

    #[test]
    fn pdfs_integrate_to_one() {
        for d in all_parametric() {
            // composite Simpson over a wide window
            let (lo, hi, n) = (-200.0, 200.0, 400_000);
            let h = (hi - lo) / n as f64;
            let mut acc = d.pdf(lo) + d.pdf(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * d.pdf(lo + i as f64 * h);
            }
            let total = acc * h / 3.0;
            // student-t tails beyond ±200 carry about 1e-8
            assert!((total - 1.0).abs() < 1e-6, "{} integrates to {total}", d.name());
        }
    }

    #[test]
    fn inverse_cdf_inverts_cdf() {
        for d in all_parametric() {
            for &u in &[0.001, 0.1, 0.37, 0.5, 0.8, 0.999] {
                let x = d.inverse_cdf(u);
                assert!((d.cdf(x) - u).abs() < 1e-7, "{} at {u}", d.name());
            }
        }
    }

    #[test]
    fn inverse_transform_draws_pass_ks() {
        let n = 10_000;
        for (k, d) in all_parametric().into_iter().enumerate() {
            let mut rng = substream(7, Stream::Synthetic, k as u64);
            let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let ks = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = d.cdf(x);
                    (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
                })
                .fold(0.0, f64::max);
            // Kolmogorov 99.7 % quantile ≈ 1.78 / sqrt(n)
            assert!(ks < 1.78 / (n as f64).sqrt(), "{} KS {ks}", d.name());
        }
    }

    #[test]
    fn logistic_matches_closed_form() {
        let d = Distribution::Logistic { mu: 1.0, s: 2.0 };
        let x: f64 = 2.5;
        let z = (x - 1.0) / 2.0;
        let pdf = (-z).exp() / (2.0 * (1.0 + (-z).exp()).powi(2));
        assert!((d.pdf(x) - pdf).abs() < 1e-14);
    }

    #[test]
    fn empirical_law_round_trips_mass() {
        let xs: Vec<f64> = (0..1000).map(|i| (i % 10) as f64).collect();
        let d = Distribution::empirical(&xs, 10).unwrap();
        d.validate().unwrap();
        assert!((d.cdf(9.0) - 1.0).abs() < 1e-12);
        assert!((d.inverse_cdf(0.05) - 0.45).abs() < 1e-9);
        let point = Distribution::empirical(&[3.0; 5], 10).unwrap();
        assert_eq!(point.inverse_cdf(0.3), 3.0);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(Distribution::Normal { mu: 0.0, sigma: 0.0 }.validate().is_err());
        assert!(Distribution::StudentT { mu: 0.0, sigma: 1.0, nu: -1.0 }.validate().is_err());
        for d in all_parametric() {
            d.validate().unwrap();
        }
    }
}
