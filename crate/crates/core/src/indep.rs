//! Independent-placement hit maximization by bisection on the Lagrange
//! multiplier, plus the L/K linear approximation of the optimal pmf.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{hit_independent, NetworkConfig};

/// Budget residual below which the bisection stops early.
const BUDGET_TOL: f64 = 1e-9;
/// Iteration cap for the multiplier bisection.
const MAX_BISECT: usize = 200;
/// Scale factor for the universal fallback lower bracket endpoint.
const EPS_BRACKET: f64 = 1e-6;

/// Per-file caching probabilities for independent placement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementPmf {
    pc: Vec<f64>,
}

impl PlacementPmf {
    pub fn new(pc: Vec<f64>) -> Result<Self> {
        if pc.is_empty() {
            return Err(Error::Config("placement pmf must be non-empty".into()));
        }
        for (i, &p) in pc.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Domain(format!(
                    "caching probability out of [0,1] at file {}: {p}",
                    i + 1
                )));
            }
        }
        Ok(Self { pc })
    }

    /// Uniform placement p_c(m) = N/M, the natural feasible baseline.
    pub fn uniform(file_count: usize, cache_size: usize) -> Result<Self> {
        Self::new(vec![cache_size as f64 / file_count as f64; file_count])
    }

    pub fn probs(&self) -> &[f64] {
        &self.pc
    }

    pub fn len(&self) -> usize {
        self.pc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pc.is_empty()
    }

    /// Expected number of cached files per node.
    pub fn budget(&self) -> f64 {
        self.pc.iter().sum()
    }
}

/// L = last file always cached, K = largest cached index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearPlacement {
    pub l: usize,
    pub k: usize,
}

impl LinearPlacement {
    pub fn new(l: usize, k: usize, file_count: usize) -> Result<Self> {
        if l == 0 || l > k || k > file_count {
            return Err(Error::Config(format!(
                "need 1 <= L <= K <= M, got L={l}, K={k}, M={file_count}"
            )));
        }
        Ok(Self { l, k })
    }
}

/// Bisection bracket for the multiplier.
#[derive(Debug, Clone, Copy)]
pub struct MultiplierBracket {
    pub mu_min: f64,
    pub mu_max: f64,
    pub c_b: usize,
}

/// Solution of the relaxed hit maximization.
#[derive(Debug, Clone)]
pub struct IndepSolution {
    pub pmf: PlacementPmf,
    pub mu_star: f64,
    pub hit: f64,
    pub budget_residual: f64,
}

/// Stationary pmf for multiplier `mu`: per file, 1 below the lower
/// threshold p_r(m) a_m e^{-a_m}, 0 above the upper threshold p_r(m) a_m,
/// and (1/a_m) ln(p_r(m) a_m / mu) in between.
pub fn pc_of_mu(cfg: &NetworkConfig, mu: f64) -> Result<PlacementPmf> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("multiplier must be positive, got {mu}")));
    }
    let masses = cfg.coverage_masses();
    let pc = cfg
        .popularity()
        .probs()
        .iter()
        .zip(&masses)
        .map(|(&pr, &a)| {
            let upper = pr * a;
            let lower = upper * (-a).exp();
            if mu >= upper {
                0.0
            } else if mu <= lower {
                1.0
            } else {
                (upper / mu).ln() / a
            }
        })
        .collect();
    PlacementPmf::new(pc)
}

/// Total expected cache usage at multiplier `mu`; continuous and
/// non-increasing in `mu`.
pub fn budget_of_mu(cfg: &NetworkConfig, mu: f64) -> Result<f64> {
    Ok(pc_of_mu(cfg, mu)?.budget())
}

/// Bracket the optimal multiplier. Tries the index recipe with c_b = 2 and
/// falls back to the universal bracket built from the per-file thresholds.
pub fn find_bracket(cfg: &NetworkConfig) -> Result<MultiplierBracket> {
    let n = cfg.cache_size();
    let m = cfg.file_count();
    if n >= m {
        return Err(Error::Config(format!(
            "relaxed problem degenerate: N={n} >= M={m}"
        )));
    }
    let c_b = 2usize;

    let recipe = if n % c_b == 0 && n / c_b >= 1 && c_b * n <= m {
        let hi_idx = n / c_b;
        let lo_idx = c_b * n;
        let a_hi = cfg.coverage_mass(hi_idx)?;
        let a_lo = cfg.coverage_mass(lo_idx)?;
        let mu_max = cfg.popularity().pmf(hi_idx)? * a_hi * (-a_hi).exp();
        let mu_min = cfg.popularity().pmf(lo_idx)? * a_lo;
        if mu_min > 0.0
            && mu_min <= mu_max
            && budget_of_mu(cfg, mu_min)? >= n as f64
            && budget_of_mu(cfg, mu_max)? <= n as f64
        {
            Some(MultiplierBracket { mu_min, mu_max, c_b })
        } else {
            None
        }
    } else {
        None
    };
    if let Some(b) = recipe {
        return Ok(b);
    }

    // Universal fallback: below every lower threshold the pmf is all ones
    // (budget M >= N), at the largest upper threshold it is all zeros.
    let masses = cfg.coverage_masses();
    let mut min_lower = f64::INFINITY;
    let mut max_upper: f64 = 0.0;
    for (&pr, &a) in cfg.popularity().probs().iter().zip(&masses) {
        let upper = pr * a;
        min_lower = min_lower.min(upper * (-a).exp());
        max_upper = max_upper.max(upper);
    }
    Ok(MultiplierBracket {
        mu_min: min_lower * EPS_BRACKET,
        mu_max: max_upper,
        c_b,
    })
}

/// Maximize the independent-placement hit under the relaxed budget by
/// bisection on the multiplier.
pub fn optimize_independent(cfg: &NetworkConfig, eps: f64) -> Result<IndepSolution> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {eps}")));
    }
    let n = cfg.cache_size() as f64;
    let bracket = find_bracket(cfg)?;
    // budget(lo) >= N >= budget(hi) throughout.
    let mut lo = bracket.mu_min;
    let mut hi = bracket.mu_max;
    let mut best_mu = hi;
    let mut best_res = (budget_of_mu(cfg, hi)? - n).abs();
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        let b = budget_of_mu(cfg, mid)?;
        let res = (b - n).abs();
        // Prefer the side with budget <= N so the returned pmf never
        // exceeds the relaxed constraint.
        if res < best_res && b <= n + BUDGET_TOL {
            best_res = res;
            best_mu = mid;
        }
        if res < BUDGET_TOL || hi - lo < eps * bracket.mu_max {
            break;
        }
        if b > n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pmf = pc_of_mu(cfg, best_mu)?;
    let residual = pmf.budget() - n;
    if residual.abs() > 1e-6 {
        return Err(Error::NonConvergence(format!(
            "budget residual {residual:.3e} after {MAX_BISECT} bisections"
        )));
    }
    let hit = hit_independent(cfg, &pmf)?;
    Ok(IndepSolution {
        pmf,
        mu_star: best_mu,
        hit,
        budget_residual: residual,
    })
}

/// Read L and K off an exact optimizer output.
pub fn fit_linear_from_exact(pmf: &PlacementPmf) -> Result<LinearPlacement> {
    let ones = pmf.probs().iter().filter(|&&p| p >= 1.0 - 1e-9).count();
    let k = pmf
        .probs()
        .iter()
        .rposition(|&p| p > 1e-9)
        .map(|i| i + 1)
        .ok_or_else(|| Error::Degenerate("all-zero placement pmf".into()))?;
    let l = (1 + ones).min(k);
    LinearPlacement::new(l, k, pmf.len())
}

/// Eq.-style residual for a candidate (L, K) with p_c(K) = 0:
/// A * sum_{m=L}^{K} ln(K/m) m^gamma - (N - L + 1), where
/// A = sum_j (2 gamma / j^gamma) / (lambda pi r_dd^2).
fn lk_residual(cfg: &NetworkConfig, l: usize, k: usize) -> f64 {
    let gamma = cfg.popularity().gamma_r();
    let n = cfg.cache_size() as f64;
    let coeff: f64 = (1..=cfg.file_count())
        .map(|j| 2.0 * gamma * (j as f64).powf(-gamma))
        .sum();
    let a = coeff / (cfg.lambda() * PI * cfg.r_dd() * cfg.r_dd());
    let kf = k as f64;
    let s: f64 = (l..=k)
        .map(|m| {
            let mf = m as f64;
            (kf / mf).ln() * mf.powf(gamma)
        })
        .sum();
    a * s - (n - l as f64 + 1.0)
}

/// Closed-form K for a given L from the boundary relation applied with
/// equality: K = L * exp(lambda_L pi r_dd^2 / (2 gamma)), rounded and
/// clamped to [L, M].
fn k_of_l(cfg: &NetworkConfig, l: usize) -> Result<usize> {
    let gamma = cfg.popularity().gamma_r();
    let a_l = cfg.coverage_mass(l)?;
    let raw = l as f64 * (a_l / (2.0 * gamma)).exp();
    let k = if raw.is_finite() {
        raw.round() as usize
    } else {
        cfg.file_count()
    };
    Ok(k.clamp(l, cfg.file_count()))
}

/// Determine (L, K) from the closed-form boundary relation and the budget
/// residual. Ties resolve to the smallest L. For gamma_r = 0 the closed
/// form is undefined and the exact optimizer output is used instead.
pub fn solve_linear_lk(cfg: &NetworkConfig) -> Result<LinearPlacement> {
    if cfg.popularity().gamma_r() == 0.0 {
        let sol = optimize_independent(cfg, 1e-10)?;
        return fit_linear_from_exact(&sol.pmf);
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for l in 1..=cfg.file_count() {
        let k = k_of_l(cfg, l)?;
        let r = lk_residual(cfg, l, k).abs();
        if !r.is_finite() {
            continue;
        }
        if best.map_or(true, |(br, _, _)| r < br) {
            best = Some((r, l, k));
        }
    }
    let (_, l, k) =
        best.ok_or_else(|| Error::NonConvergence("no (L,K) candidate with finite residual".into()))?;
    LinearPlacement::new(l, k, cfg.file_count())
}

/// Ramp pmf induced by (L, K): min{1, 1 - (m-L)/(K-L)} up to K, zero past K.
/// K = L degenerates to a step at L.
pub fn linear_pmf(lp: &LinearPlacement, file_count: usize) -> Result<PlacementPmf> {
    if lp.k > file_count {
        return Err(Error::Config(format!(
            "linear placement K={} exceeds catalog size {file_count}",
            lp.k
        )));
    }
    let pc = (1..=file_count)
        .map(|m| {
            if m > lp.k {
                0.0
            } else if lp.k == lp.l {
                if m <= lp.l {
                    1.0
                } else {
                    0.0
                }
            } else {
                (1.0 - (m as f64 - lp.l as f64) / (lp.k as f64 - lp.l as f64)).min(1.0)
            }
        })
        .collect();
    PlacementPmf::new(pc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ZipfPopularity;
    use proptest::prelude::*;

    fn cfg(m: usize, n: usize, gamma: f64, mass_scale: f64) -> NetworkConfig {
        // mass_scale = lambda * pi * r_dd^2, so a_m = mass_scale * p_r(m)
        let pop = ZipfPopularity::new(m, gamma).unwrap();
        NetworkConfig::new(mass_scale / PI, 1.0, pop, n).unwrap()
    }

    #[test]
    fn pc_of_mu_rejects_nonpositive() {
        let c = cfg(4, 2, 0.8, 4.0);
        assert!(pc_of_mu(&c, 0.0).is_err());
        assert!(pc_of_mu(&c, -1.0).is_err());
    }

    #[test]
    fn pc_of_mu_all_zero_above_thresholds() {
        let c = cfg(4, 2, 0.8, 4.0);
        let max_upper = (1..=4)
            .map(|m| c.popularity().pmf(m).unwrap() * c.coverage_mass(m).unwrap())
            .fold(0.0f64, f64::max);
        let pmf = pc_of_mu(&c, max_upper).unwrap();
        assert!(pmf.probs().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn pc_of_mu_middle_branch_hand_value() {
        // p_r(m) = 0.5, a_m = 4: mu = 2 e^{-2} gives pc = (1/4) ln(2 / 2e^{-2}) = 0.5
        let c = cfg(2, 1, 0.0, 8.0);
        assert!((c.coverage_mass(1).unwrap() - 4.0).abs() < 1e-12);
        let mu = 2.0 * (-2.0f64).exp();
        let pmf = pc_of_mu(&c, mu).unwrap();
        assert!((pmf.probs()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn budget_trivial_endpoints_and_monotone() {
        let c = cfg(5, 2, 0.8, 4.0);
        let max_upper = (1..=5)
            .map(|m| c.popularity().pmf(m).unwrap() * c.coverage_mass(m).unwrap())
            .fold(0.0f64, f64::max);
        let min_lower = (1..=5)
            .map(|m| {
                let a = c.coverage_mass(m).unwrap();
                c.popularity().pmf(m).unwrap() * a * (-a).exp()
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(budget_of_mu(&c, max_upper).unwrap(), 0.0);
        assert_eq!(budget_of_mu(&c, min_lower * 0.9).unwrap(), 5.0);
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            // geometric grid across the full threshold range
            let t = i as f64 / 99.0;
            let mu = min_lower * 0.5 * (max_upper * 2.0 / (min_lower * 0.5)).powf(t);
            let b = budget_of_mu(&c, mu).unwrap();
            assert!(b <= prev + 1e-12);
            prev = b;
        }
    }

    #[test]
    fn bracket_postconditions_hold() {
        for &(m, n, g, s) in &[
            (10usize, 2usize, 0.8f64, 4.0f64),
            (100, 10, 0.8, std::f64::consts::PI),
            (7, 3, 1.4, 1.0),
            (6, 5, 0.3, 10.0),
        ] {
            let c = cfg(m, n, g, s);
            let b = find_bracket(&c).unwrap();
            assert!(budget_of_mu(&c, b.mu_min).unwrap() >= n as f64, "M={m} N={n}");
            assert!(budget_of_mu(&c, b.mu_max).unwrap() <= n as f64, "M={m} N={n}");
        }
    }

    #[test]
    fn bracket_recipe_indices_in_range() {
        // M=10, N=2, c_b=2: indices N/c_b=1 and c_b*N=4 are both in range.
        let c = cfg(10, 2, 0.8, 4.0);
        let b = find_bracket(&c).unwrap();
        assert_eq!(b.c_b, 2);
        assert!(b.mu_min > 0.0 && b.mu_min <= b.mu_max);
    }

    #[test]
    fn optimize_symmetric_two_files() {
        let c = cfg(2, 1, 0.0, 2.0);
        let sol = optimize_independent(&c, 1e-12).unwrap();
        assert!((sol.pmf.probs()[0] - 0.5).abs() < 1e-7);
        assert!((sol.pmf.probs()[1] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn optimize_beats_uniform_baseline() {
        for &(m, n, g, s) in &[(5usize, 2usize, 0.8f64, 4.0f64), (20, 4, 1.2, 2.0), (8, 3, 0.5, 6.0)] {
            let c = cfg(m, n, g, s);
            let sol = optimize_independent(&c, 1e-12).unwrap();
            let uniform = PlacementPmf::uniform(m, n).unwrap();
            let hu = hit_independent(&c, &uniform).unwrap();
            assert!(sol.hit >= hu - 1e-12, "M={m} N={n}: {} vs {hu}", sol.hit);
        }
    }

    #[test]
    fn optimizer_output_nonincreasing_and_feasible() {
        let c = cfg(30, 6, 0.9, 3.0);
        let sol = optimize_independent(&c, 1e-12).unwrap();
        for w in sol.pmf.probs().windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
        assert!(sol.pmf.budget() <= 6.0 + 1e-8);
        assert!(sol.budget_residual.abs() <= 1e-6);
    }

    #[test]
    fn stationarity_and_threshold_conditions() {
        let c = cfg(30, 6, 0.9, 3.0);
        let sol = optimize_independent(&c, 1e-12).unwrap();
        for m in 1..=30 {
            let pr = c.popularity().pmf(m).unwrap();
            let a = c.coverage_mass(m).unwrap();
            let p = sol.pmf.probs()[m - 1];
            if p > 0.0 && p < 1.0 {
                let grad = pr * a * (-p * a).exp();
                assert!((grad - sol.mu_star).abs() < 1e-6, "file {m}");
            } else if p == 1.0 {
                assert!(sol.mu_star <= pr * a * (-a).exp() + 1e-12);
            } else {
                assert!(sol.mu_star >= pr * a - 1e-12);
            }
        }
    }

    #[test]
    fn fit_linear_examples() {
        let pmf = PlacementPmf::new(vec![1.0, 1.0, 0.5, 0.0, 0.0]).unwrap();
        let lp = fit_linear_from_exact(&pmf).unwrap();
        assert_eq!((lp.l, lp.k), (3, 3));

        let pmf = PlacementPmf::new(vec![0.9, 0.5, 0.1, 0.0, 0.0]).unwrap();
        let lp = fit_linear_from_exact(&pmf).unwrap();
        assert_eq!((lp.l, lp.k), (1, 3));

        let zero = PlacementPmf::new(vec![0.0; 3]).unwrap();
        assert!(fit_linear_from_exact(&zero).is_err());
    }

    #[test]
    fn fit_linear_consistent_with_optimizer_shape() {
        let c = cfg(5, 2, 0.8, 4.0);
        let sol = optimize_independent(&c, 1e-12).unwrap();
        let lp = fit_linear_from_exact(&sol.pmf).unwrap();
        assert!(lp.l >= 1 && lp.l <= lp.k && lp.k <= 5);
        // K covers every positive entry
        for (i, &p) in sol.pmf.probs().iter().enumerate() {
            if p > 1e-9 {
                assert!(i + 1 <= lp.k);
            }
        }
    }

    #[test]
    fn lk_residual_reduces_at_l_equals_k() {
        let c = cfg(20, 5, 0.8, 4.0);
        for l in 1..=20 {
            let r = lk_residual(&c, l, l);
            // sum over m=L..L of ln(L/m) m^gamma vanishes
            assert!((r + (5.0 - l as f64 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_lk_monotone_in_r_dd() {
        let pop = ZipfPopularity::new(100, 0.8).unwrap();
        let mut prev: Option<LinearPlacement> = None;
        for &r in &[0.5, 1.0, 2.0, 4.0] {
            let c = NetworkConfig::new(1.0, r, pop.clone(), 10).unwrap();
            let lp = solve_linear_lk(&c).unwrap();
            if let Some(p) = prev {
                assert!(lp.l <= p.l, "L must not increase with r_dd");
                assert!(lp.k >= p.k, "K must not decrease with r_dd");
            }
            prev = Some(lp);
        }
    }

    #[test]
    fn solve_lk_concentrates_with_gamma() {
        let mut prev_gap: Option<usize> = None;
        for &g in &[0.4, 0.8, 1.2, 2.0] {
            let pop = ZipfPopularity::new(100, g).unwrap();
            let c = NetworkConfig::new(1.0, 1.0, pop, 10).unwrap();
            let lp = solve_linear_lk(&c).unwrap();
            let gap = lp.k - lp.l;
            if let Some(p) = prev_gap {
                assert!(gap <= p, "K-L must shrink or hold as gamma grows");
            }
            prev_gap = Some(gap);
        }
    }

    #[test]
    fn solve_lk_gamma_zero_falls_back_to_exact() {
        let c = cfg(6, 2, 0.0, 3.0);
        let lp = solve_linear_lk(&c).unwrap();
        let sol = optimize_independent(&c, 1e-10).unwrap();
        let direct = fit_linear_from_exact(&sol.pmf).unwrap();
        assert_eq!(lp, direct);
    }

    #[test]
    fn linear_pmf_examples() {
        let lp = LinearPlacement::new(2, 5, 6).unwrap();
        let pmf = linear_pmf(&lp, 6).unwrap();
        assert_eq!(pmf.probs()[1], 1.0); // m = 2
        assert!((pmf.probs()[3] - 1.0 / 3.0).abs() < 1e-15); // m = 4
        assert_eq!(pmf.probs()[5], 0.0); // m = 6

        let step = LinearPlacement::new(3, 3, 5).unwrap();
        let pmf = linear_pmf(&step, 5).unwrap();
        assert_eq!(pmf.probs(), &[1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn pc_of_mu_middle_branch_strictly_interior(
            g in 0.0f64..1.5,
            s in 0.2f64..6.0,
            t in 0.01f64..0.99,
        ) {
            let c = cfg(5, 2, g, s);
            for m in 1..=5usize {
                let pr = c.popularity().pmf(m).unwrap();
                let a = c.coverage_mass(m).unwrap();
                let lower = pr * a * (-a).exp();
                let upper = pr * a;
                let mu = lower + t * (upper - lower);
                let p = pc_of_mu(&c, mu).unwrap().probs()[m - 1];
                prop_assert!(p > 0.0 && p < 1.0);
            }
        }

        #[test]
        fn linear_pmf_is_valid_and_monotone(l in 1usize..10, span in 0usize..10) {
            let k = (l + span).min(12);
            let lp = LinearPlacement::new(l, k, 12).unwrap();
            let pmf = linear_pmf(&lp, 12).unwrap();
            for w in pmf.probs().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            for m in 1..=l {
                prop_assert_eq!(pmf.probs()[m - 1], 1.0);
            }
            for m in (k + 1)..=12 {
                prop_assert_eq!(pmf.probs()[m - 1], 0.0);
            }
        }
    }
}
