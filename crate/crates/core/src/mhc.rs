//! Matérn hard-core content placement: per-file exclusion masses, the
//! caching-probability budget, the KKT multiplier search and the dominance
//! condition versus independent placement.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::NetworkConfig;

/// Relative tolerance of the inner root-find on the exclusion mass.
const INNER_TOL: f64 = 1e-13;
/// Iteration cap shared by the inner and outer bisections.
const MAX_BISECT: usize = 200;
/// Lower end of the multiplier search interval. The stationarity function
/// decays like e^{-c}, so multipliers can be astronomically small when the
/// cap is large; the floor only needs to stay above underflow.
const ZETA_LO: f64 = 1e-280;

/// Per-file exclusion masses C-bar_m = lambda pi r_m^2 together with the
/// derived radii and the cap lambda pi r_dd^2.
#[derive(Debug, Clone)]
pub struct ExclusionPolicy {
    c_bar: Vec<f64>,
    r: Vec<f64>,
    c_max: f64,
}

impl ExclusionPolicy {
    pub fn new(c_bar: Vec<f64>, cfg: &NetworkConfig) -> Result<Self> {
        if c_bar.len() != cfg.file_count() {
            return Err(Error::DimensionMismatch {
                expected: cfg.file_count(),
                got: c_bar.len(),
            });
        }
        let c_max = cfg.lambda() * PI * cfg.r_dd() * cfg.r_dd();
        for (i, &c) in c_bar.iter().enumerate() {
            if !c.is_finite() || c < 0.0 || c > c_max + 1e-12 {
                return Err(Error::Domain(format!(
                    "exclusion mass at file {} out of [0, {c_max}]: {c}",
                    i + 1
                )));
            }
        }
        for w in c_bar.windows(2) {
            if w[1] > w[0] + 1e-9 {
                return Err(Error::Constraint(
                    "exclusion masses must be non-increasing in file index".into(),
                ));
            }
        }
        let lam_pi = cfg.lambda() * PI;
        let r = c_bar.iter().map(|&c| (c / lam_pi).sqrt()).collect();
        Ok(Self { c_bar, r, c_max })
    }

    pub fn c_bar(&self) -> &[f64] {
        &self.c_bar
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Expected number of cached files per node under this policy.
    pub fn budget(&self) -> f64 {
        self.c_bar.iter().map(|&c| p_cache(c)).sum()
    }
}

/// Caching probability of a typical transmitter: (1 - e^{-c}) / c, with the
/// continuous limit 1 at c = 0.
pub fn p_cache(c_bar: f64) -> f64 {
    debug_assert!(c_bar >= 0.0);
    if c_bar < 1e-8 {
        // series of (1 - e^{-c})/c around 0
        1.0 - c_bar / 2.0 + c_bar * c_bar / 6.0
    } else {
        -f64::exp_m1(-c_bar) / c_bar
    }
}

/// Probability that the exclusion disk of file m holds a retained
/// transmitter: 1 - e^{-c}.
pub fn hit_one_mhc(c_bar: f64) -> f64 {
    -f64::exp_m1(-c_bar)
}

/// Stationarity function h_m(c) = p_r(m) c^2 / (e^c - c - 1), strictly
/// decreasing from 2 p_r(m) at 0+ to 0 at infinity.
pub fn h(cfg: &NetworkConfig, file: usize, c_bar: f64) -> Result<f64> {
    let pr = cfg.popularity().pmf(file)?;
    Ok(pr * h_shape(c_bar))
}

/// c^2 / (e^c - c - 1). The denominator is ~c^2/2 near zero, so the direct
/// form cancels catastrophically there; below 1e-3 a Taylor form of the
/// ratio is exact to machine precision, and above it expm1 keeps the
/// subtraction benign.
fn h_shape(c: f64) -> f64 {
    if c < 1e-3 {
        let c2 = c * c;
        2.0 / (1.0 + c / 3.0 + c2 / 12.0 + c2 * c / 60.0 + c2 * c2 / 360.0)
    } else {
        c * c / (f64::exp_m1(c) - c)
    }
}

/// Invert h_m: 0 on the freeze branch (zeta >= 2 p_r), the cap when even
/// h_m(c_max) sits above zeta, otherwise the unique interior root.
pub fn h_inverse(cfg: &NetworkConfig, file: usize, zeta: f64, c_max: f64) -> Result<f64> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(Error::Domain(format!("zeta must be positive, got {zeta}")));
    }
    let pr = cfg.popularity().pmf(file)?;
    if zeta >= 2.0 * pr {
        return Ok(0.0);
    }
    if pr * h_shape(c_max) >= zeta {
        return Ok(c_max);
    }
    // h is strictly decreasing: h(lo) > zeta > h(hi)
    let mut lo = 0.0f64;
    let mut hi = c_max;
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        if pr * h_shape(mid) >= zeta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= INNER_TOL * hi.max(1.0) {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    if (pr * h_shape(c) - zeta).abs() > 1e-8 * zeta.max(1e-30) + 1e-12 {
        return Err(Error::NonConvergence(format!(
            "h_inverse failed for file {file} at zeta {zeta}"
        )));
    }
    Ok(c)
}

/// Outcome of the multiplier search. `feasible` is false when even the
/// all-capped policy spends more than N on expectation; the capped policy
/// is still returned as the boundary answer, with the residual reported.
#[derive(Debug, Clone)]
pub struct MhcSolution {
    pub policy: ExclusionPolicy,
    pub zeta_star: f64,
    pub hit: f64,
    pub budget: f64,
    pub budget_residual: f64,
    pub feasible: bool,
}

fn policy_of_zeta(cfg: &NetworkConfig, zeta: f64, c_max: f64) -> Result<Vec<f64>> {
    (1..=cfg.file_count())
        .map(|m| h_inverse(cfg, m, zeta, c_max))
        .collect()
}

fn budget_of_zeta(cfg: &NetworkConfig, zeta: f64, c_max: f64) -> Result<f64> {
    Ok(policy_of_zeta(cfg, zeta, c_max)?
        .iter()
        .map(|&c| p_cache(c))
        .sum())
}

/// Optimize the exclusion masses by bisection on the multiplier over
/// (ZETA_LO, 2 p_r(1)]. The budget is continuous and non-decreasing in the
/// multiplier, so the constraint level set is unique. The search runs in
/// log space: near the cap the budget responds exponentially to the
/// multiplier and a linear bisection stalls before reaching the residual
/// tolerance.
pub fn optimize_mhc(cfg: &NetworkConfig, eps: f64) -> Result<MhcSolution> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {eps}")));
    }
    let n = cfg.cache_size() as f64;
    let c_max = cfg.lambda() * PI * cfg.r_dd() * cfg.r_dd();
    let zeta_hi = 2.0 * cfg.popularity().pmf(1)?;

    let budget_lo = budget_of_zeta(cfg, ZETA_LO, c_max)?;
    if budget_lo > n {
        // Even all-capped exclusion spends more than N; return the boundary
        // policy and flag it.
        let c_bar = policy_of_zeta(cfg, ZETA_LO, c_max)?;
        let policy = ExclusionPolicy::new(c_bar, cfg)?;
        let hit = hit_mhc_analytic(cfg, &policy)?;
        let budget = policy.budget();
        return Ok(MhcSolution {
            policy,
            zeta_star: ZETA_LO,
            hit,
            budget,
            budget_residual: budget - n,
            feasible: false,
        });
    }

    let mut lo = ZETA_LO.ln();
    let mut hi = zeta_hi.ln();
    let mut zeta = zeta_hi;
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        let b = budget_of_zeta(cfg, mid.exp(), c_max)?;
        zeta = mid.exp();
        if (b - n).abs() <= eps.min(1e-9) || hi - lo <= 64.0 * f64::EPSILON {
            break;
        }
        if b > n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let c_bar = policy_of_zeta(cfg, zeta, c_max)?;
    let policy = ExclusionPolicy::new(c_bar, cfg)?;
    let budget = policy.budget();
    let residual = budget - n;
    if residual.abs() > 1e-6 {
        return Err(Error::NonConvergence(format!(
            "MHC budget residual {residual:.3e} after {MAX_BISECT} bisections"
        )));
    }
    let hit = hit_mhc_analytic(cfg, &policy)?;
    Ok(MhcSolution {
        policy,
        zeta_star: zeta,
        hit,
        budget,
        budget_residual: residual,
        feasible: true,
    })
}

/// Analytic hit of a policy: sum_m p_r(m) (1 - e^{-C-bar_m}).
pub fn hit_mhc_analytic(cfg: &NetworkConfig, policy: &ExclusionPolicy) -> Result<f64> {
    if policy.c_bar().len() != cfg.file_count() {
        return Err(Error::DimensionMismatch {
            expected: cfg.file_count(),
            got: policy.c_bar().len(),
        });
    }
    Ok(cfg
        .popularity()
        .probs()
        .iter()
        .zip(policy.c_bar())
        .map(|(pr, &c)| pr * hit_one_mhc(c))
        .sum())
}

/// Sufficient per-file condition for the MHC hit to dominate the
/// independent one: r_m >= sqrt(p_c(m)) r_dd.
pub fn dominance_condition(r_m: f64, pc_m: f64, r_dd: f64) -> Result<bool> {
    if !(r_m >= 0.0) || !r_m.is_finite() {
        return Err(Error::Domain(format!("exclusion radius must be >= 0, got {r_m}")));
    }
    if !(0.0..=1.0).contains(&pc_m) {
        return Err(Error::Domain(format!(
            "caching probability must lie in [0,1], got {pc_m}"
        )));
    }
    Ok(r_m >= pc_m.sqrt() * r_dd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ZipfPopularity;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn cfg(m: usize, n: usize, gamma: f64, mass_scale: f64) -> NetworkConfig {
        // mass_scale = lambda * pi * r_dd^2 = c_max
        let pop = ZipfPopularity::new(m, gamma).unwrap();
        NetworkConfig::new(mass_scale / PI, 1.0, pop, n).unwrap()
    }

    #[test]
    fn p_cache_examples() {
        assert_eq!(p_cache(0.0), 1.0);
        let ln2 = std::f64::consts::LN_2;
        assert!((p_cache(ln2) - 0.5 / ln2).abs() < 1e-12);
        // continuity across the series switch
        assert!((p_cache(1e-8) - p_cache(1.0000001e-8)).abs() < 1e-12);
    }

    #[test]
    fn p_cache_matches_monte_carlo_inverse_moment() {
        // E[1/(1+C)], C ~ Poisson(1), 10^6 draws
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pois = Poisson::new(1.0f64).unwrap();
        let n = 1_000_000usize;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let c: f64 = pois.sample(&mut rng);
            let v = 1.0 / (1.0 + c);
            acc += v;
            acc2 += v * v;
        }
        let mean = acc / n as f64;
        let var = (acc2 / n as f64 - mean * mean).max(0.0);
        let stderr = (var / n as f64).sqrt();
        assert!((mean - p_cache(1.0)).abs() <= 3.0 * stderr);
    }

    #[test]
    fn hit_one_mhc_examples() {
        assert_eq!(hit_one_mhc(0.0), 0.0);
        assert!((hit_one_mhc(1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((hit_one_mhc(1e6) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn h_hand_values_and_limit() {
        // single popularity class p_r = 0.1: M=10, gamma=0
        let c = cfg(10, 2, 0.0, 4.0);
        let h1 = h(&c, 1, 1.0).unwrap();
        assert!((h1 - 0.1 / (std::f64::consts::E - 2.0)).abs() < 1e-12);
        let h2 = h(&c, 1, 2.0).unwrap();
        assert!((h2 - 0.4 / (2.0f64.exp() - 3.0)).abs() < 1e-12);
        // limit at 0+ is 2 p_r(m)
        assert!((h(&c, 1, 1e-12).unwrap() - 0.2).abs() < 1e-6);
    }

    #[test]
    fn h_strictly_decreasing_on_grid() {
        let c = cfg(5, 2, 1.0, 4.0);
        let mut prev = f64::INFINITY;
        for i in 1..=1000 {
            let x = i as f64 * 0.01;
            let v = h(&c, 2, x).unwrap();
            assert!(v < prev, "x={x}");
            prev = v;
        }
    }

    #[test]
    fn h_inverse_branches_and_round_trip() {
        let c = cfg(5, 2, 1.0, 8.0);
        let pr1 = c.popularity().pmf(1).unwrap();
        // freeze boundary
        assert_eq!(h_inverse(&c, 1, 2.0 * pr1, 5.0).unwrap(), 0.0);
        // round trip through h at c = 1
        let z = h(&c, 1, 1.0).unwrap();
        let back = h_inverse(&c, 1, z, 5.0).unwrap();
        assert!((back - 1.0).abs() < 1e-9);
        // cap branch for tiny zeta
        assert_eq!(h_inverse(&c, 1, 1e-12, 5.0).unwrap(), 5.0);
        assert!(h_inverse(&c, 1, 0.0, 5.0).is_err());
    }

    #[test]
    fn h_round_trip_across_interior() {
        let c = cfg(6, 2, 0.8, 6.0);
        for m in 1..=6usize {
            for &cb in &[0.05, 0.3, 1.0, 2.5, 5.0] {
                let z = h(&c, m, cb).unwrap();
                let back = h_inverse(&c, m, z, 6.0).unwrap();
                assert!((h(&c, m, back).unwrap() - z).abs() <= 1e-9, "m={m} c={cb}");
            }
        }
    }

    #[test]
    fn optimize_symmetric_masses() {
        // equal popularity, so the optimal masses coincide
        let c = cfg(2, 1, 0.0, 2.0);
        let sol = optimize_mhc(&c, 1e-12).unwrap();
        let cb = sol.policy.c_bar();
        assert!((cb[0] - cb[1]).abs() < 1e-9);
        assert!(sol.feasible);
        assert!(sol.budget_residual.abs() <= 1e-6);
    }

    #[test]
    fn optimize_masses_nonincreasing_and_kkt() {
        let c = cfg(8, 3, 1.0, 4.0);
        let sol = optimize_mhc(&c, 1e-12).unwrap();
        let cb = sol.policy.c_bar();
        for w in cb.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        for (m, &cm) in cb.iter().enumerate() {
            if cm > 0.0 && cm < sol.policy.c_max() {
                let hv = h(&c, m + 1, cm).unwrap();
                assert!((hv - sol.zeta_star).abs() < 1e-8, "file {}", m + 1);
            }
        }
        // active files: p_cache non-decreasing in m
        let active: Vec<f64> = cb.iter().filter(|&&x| x > 0.0).map(|&x| p_cache(x)).collect();
        for w in active.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn optimize_reports_infeasible_capped_model() {
        // M=100, N=10, c_max=pi: minimum budget M * p_cache(pi) ~ 30.5 > N
        let c = cfg(100, 10, 0.8, PI);
        let sol = optimize_mhc(&c, 1e-10).unwrap();
        assert!(!sol.feasible);
        assert!(sol.budget_residual > 0.0);
        assert!(sol.policy.c_bar().iter().all(|&x| (x - PI).abs() < 1e-9));
    }

    #[test]
    fn capped_policy_hit_equals_volume_fraction_mix() {
        let c = cfg(4, 2, 1.0, 2.0);
        let policy = ExclusionPolicy::new(vec![2.0; 4], &c).unwrap();
        let hit = hit_mhc_analytic(&c, &policy).unwrap();
        assert!((hit - (1.0 - (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn zero_policy_has_zero_hit() {
        let c = cfg(4, 2, 1.0, 2.0);
        let policy = ExclusionPolicy::new(vec![0.0; 4], &c).unwrap();
        assert_eq!(hit_mhc_analytic(&c, &policy).unwrap(), 0.0);
    }

    #[test]
    fn dominance_examples() {
        assert!(dominance_condition(0.0, 0.0, 2.0).unwrap());
        assert!(dominance_condition(1.0, 1.0, 1.0).unwrap()); // boundary
        assert!(!dominance_condition(0.9, 0.25, 2.0).unwrap()); // needs r >= 1
        assert!(dominance_condition(-0.5, 0.2, 1.0).is_err());
        assert!(dominance_condition(0.5, 1.2, 1.0).is_err());
    }

    #[test]
    fn dominance_implies_per_file_hit_ordering() {
        // when r_m >= sqrt(pc) r_dd, 1 - e^{-lam_m pi r_m^2} >= 1 - e^{-pc a_m}
        let c = cfg(5, 2, 0.8, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        use rand::Rng;
        for _ in 0..500 {
            let m = rng.random_range(1..=5usize);
            let pc: f64 = rng.random_range(0.0..=1.0);
            let r_m = (pc.sqrt() * c.r_dd()) * rng.random_range(1.0..2.0);
            assert!(dominance_condition(r_m, pc, c.r_dd()).unwrap());
            let lam_m = c.file_density(m).unwrap();
            let mhc_hit = hit_one_mhc(lam_m * PI * r_m * r_m);
            let ind_hit = 1.0 - (-pc * c.coverage_mass(m).unwrap()).exp();
            assert!(mhc_hit >= ind_hit - 1e-12);
        }
    }
}
