//! Hit probability under spatially exchangeable placement: per-file mixing
//! distributions on [0,1], their Laplace transforms, and the certificate
//! that exchangeable placement never beats independent placement.

use crate::error::{Error, Result};
use crate::indep::PlacementPmf;
use crate::model::{hit_independent, NetworkConfig};
use crate::numeric::{gauss_legendre_64, poisson_pmf};

/// Mixing distribution of the limiting caching frequency for one file.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingDistribution {
    /// Point mass at theta; reduces to independent placement with p_c = theta.
    Degenerate { theta: f64 },
    /// Mass w at theta0, mass 1-w at theta1.
    TwoPoint { theta0: f64, theta1: f64, w: f64 },
    /// Beta(alpha, beta) on [0, 1].
    Beta { alpha: f64, beta: f64 },
}

impl MixingDistribution {
    pub fn degenerate(theta: f64) -> Result<Self> {
        check_prob("theta", theta)?;
        Ok(Self::Degenerate { theta })
    }

    pub fn two_point(theta0: f64, theta1: f64, w: f64) -> Result<Self> {
        check_prob("theta0", theta0)?;
        check_prob("theta1", theta1)?;
        check_prob("w", w)?;
        Ok(Self::TwoPoint { theta0, theta1, w })
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Config(format!(
                "Beta shape parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self::Beta { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Degenerate { theta } => theta,
            Self::TwoPoint { theta0, theta1, w } => w * theta0 + (1.0 - w) * theta1,
            Self::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Degenerate { .. } => 0.0,
            Self::TwoPoint { theta0, theta1, w } => {
                let m = w * theta0 + (1.0 - w) * theta1;
                w * theta0 * theta0 + (1.0 - w) * theta1 * theta1 - m * m
            }
            Self::Beta { alpha, beta } => {
                let s = alpha + beta;
                alpha * beta / (s * s * (s + 1.0))
            }
        }
    }

    /// E[exp(-a X)]. Closed form for the discrete variants, self-normalized
    /// Gauss-Legendre quadrature against the Beta density otherwise.
    pub fn laplace(&self, a: f64) -> Result<f64> {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::Domain(format!("Laplace argument must be >= 0, got {a}")));
        }
        Ok(match *self {
            Self::Degenerate { theta } => (-a * theta).exp(),
            Self::TwoPoint { theta0, theta1, w } => {
                w * (-a * theta0).exp() + (1.0 - w) * (-a * theta1).exp()
            }
            Self::Beta { alpha, beta } => self.beta_expectation(alpha, beta, |t| (-a * t).exp()),
        })
    }

    /// E[(1 - X)^k], the miss probability given k covering caches.
    pub fn miss_prob(&self, k: u64) -> f64 {
        match *self {
            Self::Degenerate { theta } => (1.0 - theta).powi(k as i32),
            Self::TwoPoint { theta0, theta1, w } => {
                w * (1.0 - theta0).powi(k as i32) + (1.0 - w) * (1.0 - theta1).powi(k as i32)
            }
            Self::Beta { alpha, beta } => {
                self.beta_expectation(alpha, beta, |t| (1.0 - t).powi(k as i32))
            }
        }
    }

    /// Quadrature ratio E[f(X)] = int f t^{a-1}(1-t)^{b-1} / int t^{a-1}(1-t)^{b-1};
    /// the Beta normalization cancels.
    fn beta_expectation<F: Fn(f64) -> f64>(&self, alpha: f64, beta: f64, f: F) -> f64 {
        let rule = gauss_legendre_64();
        let mut num = 0.0;
        let mut den = 0.0;
        for &(t, w) in rule.iter() {
            let dens = t.powf(alpha - 1.0) * (1.0 - t).powf(beta - 1.0);
            num += w * dens * f(t);
            den += w * dens;
        }
        num / den
    }
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
        return Err(Error::Config(format!("{name} must lie in [0,1], got {v}")));
    }
    Ok(())
}

fn check_mixes(cfg: &NetworkConfig, mixes: &[MixingDistribution]) -> Result<()> {
    if mixes.len() != cfg.file_count() {
        return Err(Error::DimensionMismatch {
            expected: cfg.file_count(),
            got: mixes.len(),
        });
    }
    let total: f64 = mixes.iter().map(MixingDistribution::mean).sum();
    let n = cfg.cache_size() as f64;
    if total > n + 1e-8 {
        return Err(Error::Constraint(format!(
            "sum of mixing means {total} exceeds cache size {n}"
        )));
    }
    Ok(())
}

/// Hit probability of the exchangeable strategy:
/// 1 - sum_m p_r(m) E[exp(-a_m X_m)].
pub fn hit_exchangeable(cfg: &NetworkConfig, mixes: &[MixingDistribution]) -> Result<f64> {
    check_mixes(cfg, mixes)?;
    let masses = cfg.coverage_masses();
    let mut miss = 0.0;
    for ((pr, mix), a) in cfg.popularity().probs().iter().zip(mixes).zip(&masses) {
        miss += pr * mix.laplace(*a)?;
    }
    Ok(1.0 - miss)
}

/// Series form of the exchangeable hit: Poisson over the coverage number
/// times the conditional miss probability, truncated where the Poisson tail
/// drops below `tail_tol`. Used as the consistency check against the
/// Laplace form.
pub fn hit_exchangeable_series(
    cfg: &NetworkConfig,
    mixes: &[MixingDistribution],
    tail_tol: f64,
) -> Result<f64> {
    check_mixes(cfg, mixes)?;
    let masses = cfg.coverage_masses();
    let mut miss = 0.0;
    for ((pr, mix), &a) in cfg.popularity().probs().iter().zip(mixes).zip(&masses) {
        let mut s = 0.0;
        let mut cum = 0.0;
        let mut k = 0u64;
        loop {
            let pk = poisson_pmf(a, k);
            s += pk * mix.miss_prob(k);
            cum += pk;
            if 1.0 - cum < tail_tol || k > 10_000 {
                break;
            }
            k += 1;
        }
        miss += pr * s;
    }
    Ok(1.0 - miss)
}

/// Jensen slack: hit under independent placement at the mixing means minus
/// the exchangeable hit. Nonnegative for every valid input.
pub fn jensen_gap(cfg: &NetworkConfig, mixes: &[MixingDistribution]) -> Result<f64> {
    check_mixes(cfg, mixes)?;
    let means = PlacementPmf::new(
        mixes
            .iter()
            .map(|m| m.mean().clamp(0.0, 1.0))
            .collect(),
    )?;
    Ok(hit_independent(cfg, &means)? - hit_exchangeable(cfg, mixes)?)
}
