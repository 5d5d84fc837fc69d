use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{Distribution, Family, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub families: Vec<Family>,
    /// Histogram bins for the SSE score and for the empirical fallback.
    pub bins: usize,
    /// Fewer samples than this skips parametric fitting.
    pub min_samples: usize,
    /// Relative SSE improvement a family with more parameters needs over a simpler one,
    /// on top of the histogram's expected sampling-noise SSE.
    pub parsimony: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            bins: 50,
            min_samples: 30,
            parsimony: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDistribution {
    pub dist: Distribution,
    /// SSE between the selected PDF and the sample histogram density.
    pub sse: f64,
    pub samples: usize,
    /// True when the histogram itself is used (sample floor unmet or no family fitted).
    pub fallback: bool,
    /// SSE of every family that could be fitted.
    pub scores: Vec<(Family, f64)>,
}

/// Sum of squared differences between `dist`'s PDF at bin centres and the
/// density-normalized histogram of `samples`.
pub fn sse_against_histogram(dist: &Distribution, samples: &[f64], bins: usize) -> f64 {
    let Ok(Distribution::Empirical { edges, mass }) = Distribution::empirical(samples, bins) else {
        return f64::INFINITY;
    };
    if edges.len() < 3 {
        return f64::INFINITY;
    }
    mass.iter()
        .enumerate()
        .map(|(i, m)| {
            let w = edges[i + 1] - edges[i];
            let c = 0.5 * (edges[i] + edges[i + 1]);
            (dist.pdf(c) - m / w).powi(2)
        })
        .sum()
}

/// Expected SSE between the true density and a histogram of `samples` from it
/// (binomial variance of each bin's density estimate).
fn histogram_noise(samples: &[f64], bins: usize) -> f64 {
    let Ok(Distribution::Empirical { edges, mass }) = Distribution::empirical(samples, bins) else {
        return 0.0;
    };
    let n = samples.len() as f64;
    mass.iter()
        .enumerate()
        .map(|(i, m)| {
            let w = edges[i + 1] - edges[i];
            if w > 0.0 {
                m * (1.0 - m) / (n * w * w)
            } else {
                0.0
            }
        })
        .sum()
}

/// Fits every configured family by maximum likelihood and keeps the lowest
/// histogram SSE, subject to the parsimony margin.
pub fn select_distribution(samples: &[f64], opts: &FitOptions) -> Result<FittedDistribution, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    let fallback = |scores| -> Result<FittedDistribution, StatsError> {
        let dist = Distribution::empirical(samples, opts.bins)?;
        // the histogram law reproduces its own histogram exactly
        Ok(FittedDistribution {
            sse: 0.0,
            dist,
            samples: samples.len(),
            fallback: true,
            scores,
        })
    };
    if samples.len() < opts.min_samples {
        return fallback(Vec::new());
    }

    let mut fits: Vec<(Distribution, f64)> = opts
        .families
        .iter()
        .filter_map(|&f| fit_mle(f, samples).ok())
        .map(|d| {
            let s = sse_against_histogram(&d, samples, opts.bins);
            (d, s)
        })
        .filter(|(_, s)| s.is_finite())
        .collect();
    let scores = fits.iter().map(|(d, s)| (d.family().expect("parametric"), *s)).collect();
    if fits.is_empty() {
        return fallback(scores);
    }
    fits.sort_by_key(|(d, _)| d.family().map(|f| (f.parameter_count(), f)));
    let noise = histogram_noise(samples, opts.bins);
    let mut best = 0;
    for i in 1..fits.len() {
        let more = fits[i].0.family().unwrap().parameter_count() > fits[best].0.family().unwrap().parameter_count();
        let bar = if more {
            fits[best].1 - (opts.parsimony * fits[best].1).max(noise)
        } else {
            fits[best].1
        };
        if fits[i].1 < bar {
            best = i;
        }
    }
    let (dist, sse) = fits.swap_remove(best);
    Ok(FittedDistribution {
        dist,
        sse,
        samples: samples.len(),
        fallback: false,
        scores,
    })
}

/// Maximum-likelihood fit of one family.
pub fn fit_mle(family: Family, samples: &[f64]) -> Result<Distribution, StatsError> {
    let n = samples.len();
    let fail = |detail: &str| StatsError::FitFailed {
        family: family.name(),
        detail: detail.to_string(),
    };
    if n < 2 {
        return Err(fail("need at least two samples"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(fail("zero variance"));
    }
    // fit in standardized coordinates, then map location/scale back
    let z: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    let d = match family {
        Family::Normal => Distribution::Normal { mu: mean, sigma: sd },
        Family::Laplace => {
            let mut sorted = samples.to_vec();
            sorted.sort_by(f64::total_cmp);
            let med = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            };
            let b = samples.iter().map(|x| (x - med).abs()).sum::<f64>() / n as f64;
            Distribution::Laplace { mu: med, b }
        }
        Family::Logistic => {
            let p = minimize(Nll { z: &z, family }, vec![0.0, (3f64.sqrt() / std::f64::consts::PI).ln()])
                .map_err(|e| fail(&e))?;
            Distribution::Logistic {
                mu: mean + sd * p[0],
                s: sd * p[1].exp(),
            }
        }
        Family::StudentT => {
            let p = minimize(Nll { z: &z, family }, vec![0.0, 0.0, 5f64.ln()]).map_err(|e| fail(&e))?;
            Distribution::StudentT {
                mu: mean + sd * p[0],
                sigma: sd * p[1].exp(),
                nu: p[2].exp(),
            }
        }
        Family::ShiftedGamma => {
            let skew = z.iter().map(|v| v.powi(3)).sum::<f64>() / n as f64;
            let zmin = z.iter().cloned().fold(f64::INFINITY, f64::min);
            let shape0 = if skew > 0.1 { (4.0 / (skew * skew)).max(1.05) } else { 50.0 };
            let shift0 = (-(shape0.sqrt())).min(zmin - 0.05);
            let start = vec![(zmin - shift0).ln(), (shape0 - 1.0).ln()];
            let p = minimize(Nll { z: &z, family }, start).map_err(|e| fail(&e))?;
            let (shift, shape) = (zmin - p[0].exp(), 1.0 + p[1].exp());
            let scale = z.iter().map(|v| v - shift).sum::<f64>() / (n as f64 * shape);
            Distribution::ShiftedGamma {
                shift: mean + sd * shift,
                shape,
                scale: sd * scale,
            }
        }
    };
    d.validate()?;
    Ok(d)
}

/// Negative log-likelihood on standardized data in unconstrained coordinates.
#[derive(Clone, Copy)]
struct Nll<'a> {
    z: &'a [f64],
    family: Family,
}

impl Nll<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        let n = self.z.len() as f64;
        match self.family {
            Family::Logistic => {
                let (mu, s) = (p[0], p[1].exp());
                let d = Distribution::Logistic { mu, s };
                -self.z.iter().map(|&x| d.ln_pdf(x)).sum::<f64>()
            }
            Family::StudentT => {
                if !(-5.0..=5.0).contains(&p[1]) || !(-3.0..=(1e3f64).ln()).contains(&p[2]) {
                    return f64::INFINITY;
                }
                let (mu, sigma, nu) = (p[0], p[1].exp(), p[2].exp());
                let c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln() - sigma.ln();
                let tail: f64 = self.z.iter().map(|&x| (1.0 + ((x - mu) / sigma).powi(2) / nu).ln()).sum();
                -(n * c - 0.5 * (nu + 1.0) * tail)
            }
            Family::ShiftedGamma => {
                if !(p[0] < 5.0 && p[1] < 8.0) {
                    return f64::INFINITY;
                }
                let zmin = self.z.iter().cloned().fold(f64::INFINITY, f64::min);
                let shift = zmin - p[0].exp();
                let k = 1.0 + p[1].exp();
                let y: Vec<f64> = self.z.iter().map(|x| x - shift).collect();
                let theta = y.iter().sum::<f64>() / (n * k);
                let ln_sum: f64 = y.iter().map(|v| v.ln()).sum();
                n * ln_gamma(k) + n * k * theta.ln() - (k - 1.0) * ln_sum + n * k
            }
            _ => unreachable!("closed-form families are not optimized"),
        }
    }
}

impl CostFunction for Nll<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, ArgminError> {
        let v = self.value(p);
        Ok(if v.is_finite() { v } else { f64::MAX / 4.0 })
    }
}

fn minimize(problem: Nll<'_>, start: Vec<f64>) -> Result<Vec<f64>, String> {
    let mut simplex = vec![start.clone()];
    for i in 0..start.len() {
        let mut v = start.clone();
        v[i] += 0.25;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| e.to_string())?;
    let res = Executor::new(problem, solver)
        .configure(|s| s.max_iters(3000))
        .run()
        .map_err(|e| e.to_string())?;
    let best = res.state().get_best_param().cloned().ok_or("no parameters")?;
    if best.iter().all(|v| v.is_finite()) && problem.value(&best).is_finite() {
        Ok(best)
    } else {
        Err("optimizer diverged".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn draws(d: &Distribution, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, Stream::Synthetic, 0);
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn normal_samples_select_normal() {
        let xs = draws(&Distribution::Normal { mu: 0.0, sigma: 1.0 }, 100_000, 1);
        let fit = select_distribution(&xs, &FitOptions::default()).unwrap();
        let Distribution::Normal { mu, sigma } = fit.dist else {
            panic!("selected {} ({:?})", fit.dist.name(), fit.scores);
        };
        assert!(mu.abs() < 0.05 && (sigma - 1.0).abs() < 0.05);
        assert!(!fit.fallback);
    }

    #[test]
    fn laplace_samples_select_laplace() {
        let xs = draws(&Distribution::Laplace { mu: 0.0, b: 1.0 }, 100_000, 2);
        let fit = select_distribution(&xs, &FitOptions::default()).unwrap();
        assert_eq!(fit.dist.family(), Some(Family::Laplace), "{:?}", fit.scores);
    }

    #[test]
    fn too_few_samples_fall_back_to_histogram() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let fit = select_distribution(&xs, &FitOptions::default()).unwrap();
        assert!(fit.fallback);
        assert_eq!(fit.dist.family(), None);
        assert_eq!(fit.samples, 10);
    }

    #[test]
    fn mle_recovers_parameters() {
        let cases = [
            Distribution::Logistic { mu: 1.0, s: 0.5 },
            Distribution::StudentT { mu: -0.5, sigma: 2.0, nu: 4.0 },
            Distribution::ShiftedGamma { shift: -3.0, shape: 3.0, scale: 1.0 },
        ];
        for (k, truth) in cases.iter().enumerate() {
            let xs = draws(truth, 50_000, 10 + k as u64);
            let fit = fit_mle(truth.family().unwrap(), &xs).unwrap();
            match (truth, &fit) {
                (Distribution::Logistic { mu, s }, Distribution::Logistic { mu: m, s: t }) => {
                    assert!((mu - m).abs() < 0.03 && (s - t).abs() < 0.03, "{fit:?}");
                }
                (Distribution::StudentT { mu, sigma, nu }, Distribution::StudentT { mu: m, sigma: s, nu: v }) => {
                    assert!((mu - m).abs() < 0.05 && (sigma - s).abs() < 0.1 && (nu - v).abs() < 0.6, "{fit:?}");
                }
                (Distribution::ShiftedGamma { .. }, Distribution::ShiftedGamma { .. }) => {
                    assert!((truth.mean() - fit.mean()).abs() < 0.05, "{fit:?}");
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn skewed_samples_select_shifted_gamma() {
        let xs = draws(&Distribution::ShiftedGamma { shift: -2.0, shape: 2.0, scale: 1.0 }, 100_000, 4);
        let fit = select_distribution(&xs, &FitOptions::default()).unwrap();
        assert_eq!(fit.dist.family(), Some(Family::ShiftedGamma), "{:?}", fit.scores);
    }
}
