//! Popularity and network parameters plus the closed-form building blocks:
//! Zipf pmf, per-file transmitter density, volume fraction, coverage-number
//! pmf and the independent-placement hit probability.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::indep::PlacementPmf;
use crate::numeric::poisson_pmf;

/// Zipf popularity over a catalog of `file_count` files with exponent
/// `gamma_r`. The normalization constant and the per-file probabilities are
/// computed once at construction.
#[derive(Debug, Clone)]
pub struct ZipfPopularity {
    file_count: usize,
    gamma_r: f64,
    norm: f64,
    probs: Vec<f64>,
}

impl ZipfPopularity {
    pub fn new(file_count: usize, gamma_r: f64) -> Result<Self> {
        if file_count == 0 {
            return Err(Error::Config("file count must be positive".into()));
        }
        if !gamma_r.is_finite() || gamma_r < 0.0 {
            return Err(Error::Config(format!(
                "Zipf exponent must be a finite nonnegative real, got {gamma_r}"
            )));
        }
        let weights: Vec<f64> = (1..=file_count)
            .map(|m| (m as f64).powf(-gamma_r))
            .collect();
        let norm: f64 = weights.iter().sum();
        let probs = weights.iter().map(|w| w / norm).collect();
        Ok(Self {
            file_count,
            gamma_r,
            norm,
            probs,
        })
    }

    pub fn file_count(&self) -> usize {
        self.file_count
    }

    pub fn gamma_r(&self) -> f64 {
        self.gamma_r
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// p_r(m) = m^{-gamma_r} / norm, files indexed 1..=M.
    pub fn pmf(&self, file: usize) -> Result<f64> {
        self.check_index(file)?;
        Ok(self.probs[file - 1])
    }

    /// All per-file probabilities in popularity order.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub(crate) fn check_index(&self, file: usize) -> Result<()> {
        if file == 0 || file > self.file_count {
            return Err(Error::IndexOutOfRange {
                index: file,
                max: self.file_count,
            });
        }
        Ok(())
    }
}

/// Node density, D2D radius, popularity and cache size for one scenario.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    lambda: f64,
    r_dd: f64,
    popularity: ZipfPopularity,
    cache_size: usize,
}

impl NetworkConfig {
    pub fn new(
        lambda: f64,
        r_dd: f64,
        popularity: ZipfPopularity,
        cache_size: usize,
    ) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Config(format!(
                "node density must be positive, got {lambda}"
            )));
        }
        if !r_dd.is_finite() || r_dd <= 0.0 {
            return Err(Error::Config(format!(
                "D2D radius must be positive, got {r_dd}"
            )));
        }
        if cache_size == 0 {
            return Err(Error::Config("cache size must be positive".into()));
        }
        if cache_size >= popularity.file_count() {
            return Err(Error::Config(format!(
                "cache size {} must be strictly smaller than catalog size {}",
                cache_size,
                popularity.file_count()
            )));
        }
        Ok(Self {
            lambda,
            r_dd,
            popularity,
            cache_size,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn r_dd(&self) -> f64 {
        self.r_dd
    }

    pub fn popularity(&self) -> &ZipfPopularity {
        &self.popularity
    }

    pub fn file_count(&self) -> usize {
        self.popularity.file_count()
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    /// lambda_m = lambda * p_r(m): transmitter density for file m.
    pub fn file_density(&self, file: usize) -> Result<f64> {
        Ok(self.lambda * self.popularity.pmf(file)?)
    }

    /// a_m = lambda_m * pi * r_dd^2, the Poisson mean of the coverage number.
    pub fn coverage_mass(&self, file: usize) -> Result<f64> {
        Ok(self.file_density(file)? * PI * self.r_dd * self.r_dd)
    }

    /// All coverage masses in file order.
    pub fn coverage_masses(&self) -> Vec<f64> {
        let scale = self.lambda * PI * self.r_dd * self.r_dd;
        self.popularity.probs().iter().map(|p| p * scale).collect()
    }

    /// Probability that exactly k transmitters of file m cover the receiver.
    pub fn coverage_pmf(&self, file: usize, k: u64) -> Result<f64> {
        Ok(poisson_pmf(self.coverage_mass(file)?, k))
    }
}

/// Fraction of the plane covered by disks of radius `r` around PPP(lambda)
/// points: 1 - exp(-lambda pi r^2).
pub fn volume_fraction(lambda: f64, r: f64) -> Result<f64> {
    if !lambda.is_finite() && lambda != f64::INFINITY {
        return Err(Error::Domain(format!("invalid density {lambda}")));
    }
    if lambda < 0.0 || r < 0.0 || !r.is_finite() {
        return Err(Error::Domain(format!(
            "volume fraction needs lambda >= 0 and r >= 0, got lambda={lambda}, r={r}"
        )));
    }
    Ok(-f64::exp_m1(-lambda * PI * r * r) )
}

/// Hit probability under independent placement with caching probabilities
/// `pc`: 1 - sum_m p_r(m) exp(-p_c(m) a_m).
pub fn hit_independent(cfg: &NetworkConfig, pc: &PlacementPmf) -> Result<f64> {
    let m = cfg.file_count();
    if pc.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: pc.len(),
        });
    }
    let masses = cfg.coverage_masses();
    let miss: f64 = cfg
        .popularity()
        .probs()
        .iter()
        .zip(pc.probs())
        .zip(&masses)
        .map(|((pr, p), a)| pr * (-p * a).exp())
        .sum();
    Ok(1.0 - miss)
}
