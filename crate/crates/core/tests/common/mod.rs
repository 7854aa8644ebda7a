//! Independent reference solvers used by the acceptance suite. They share
//! no code with the production optimizers: the placement oracle climbs by
//! pairwise mass transfers, the exclusion oracle scans a refined grid.

use d2dcache::mhc::p_cache;
use d2dcache::NetworkConfig;

/// Print the per-criterion verdict line and panic on failure.
pub fn verdict(criterion: usize, description: &str, pass: bool) {
    println!(
        "criterion {criterion:2}: {} — {description}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {description}");
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INVPHI * (hi - lo);
    let mut d = lo + INVPHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..120 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INVPHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INVPHI * (hi - lo);
            fd = f(d);
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Best achievable independent-placement hit, found by exchange ascent:
/// repeatedly move cache mass between file pairs to the pairwise optimum.
/// The objective is separable and concave over the budget polytope, so
/// pairwise transfers cannot stall at a non-global point.
pub fn oracle_hit_independent(cfg: &NetworkConfig) -> f64 {
    let m = cfg.file_count();
    let n = cfg.cache_size() as f64;
    let a: Vec<f64> = (1..=m).map(|i| cfg.coverage_mass(i).unwrap()).collect();
    let pr: Vec<f64> = cfg.popularity().probs().to_vec();
    let mut pc = vec![n / m as f64; m];

    for _pass in 0..400 {
        let mut gained = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let lo = (-pc[i]).max(pc[j] - 1.0);
                let hi = (1.0 - pc[i]).min(pc[j]);
                if hi - lo < 1e-15 {
                    continue;
                }
                let g = |t: f64| {
                    -(pr[i] * (-(pc[i] + t) * a[i]).exp()
                        + pr[j] * (-(pc[j] - t) * a[j]).exp())
                };
                let t = golden_max(g, lo, hi).clamp(lo, hi);
                let gain = g(t) - g(0.0);
                if gain > 1e-16 {
                    pc[i] = (pc[i] + t).clamp(0.0, 1.0);
                    pc[j] = (pc[j] - t).clamp(0.0, 1.0);
                    gained += gain;
                }
            }
        }
        if gained < 1e-14 {
            break;
        }
    }
    1.0 - pr
        .iter()
        .zip(&a)
        .zip(&pc)
        .map(|((p, am), x)| p * (-x * am).exp())
        .sum::<f64>()
}

/// Invert p_cache (strictly decreasing) on [0, c_max]; None when the target
/// lies outside its range there.
fn p_cache_inverse(target: f64, c_max: f64) -> Option<f64> {
    if target > 1.0 || target < p_cache(c_max) - 1e-12 {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, c_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p_cache(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Best exclusion-policy hit on the budget-equality manifold, by grid scan
/// over the first M-1 masses with the last mass solved from the budget,
/// followed by local grid refinement.
pub fn oracle_hit_mhc(cfg: &NetworkConfig, c_max: f64) -> f64 {
    let m = cfg.file_count();
    assert!(m >= 2 && m <= 4, "oracle sized for tiny catalogs");
    let n = cfg.cache_size() as f64;
    let pr: Vec<f64> = cfg.popularity().probs().to_vec();

    let eval = |free: &[f64]| -> Option<(f64, f64)> {
        let spent: f64 = free.iter().map(|&c| p_cache(c)).sum();
        let last = p_cache_inverse(n - spent, c_max)?;
        let mut hit = pr[m - 1] * -f64::exp_m1(-last);
        for (k, &c) in free.iter().enumerate() {
            hit += pr[k] * -f64::exp_m1(-c);
        }
        Some((hit, last))
    };

    let steps = 14usize;
    let mut center = vec![0.5 * c_max; m - 1];
    let mut radius = 0.5 * c_max;
    let mut best = f64::NEG_INFINITY;
    for _round in 0..6 {
        let axes: Vec<Vec<f64>> = center
            .iter()
            .map(|&c| {
                (0..=steps)
                    .map(|i| {
                        (c - radius + 2.0 * radius * i as f64 / steps as f64).clamp(0.0, c_max)
                    })
                    .collect()
            })
            .collect();
        let mut best_point = center.clone();
        let mut idx = vec![0usize; m - 1];
        loop {
            let free: Vec<f64> = idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect();
            if let Some((hit, _)) = eval(&free) {
                if hit > best {
                    best = hit;
                    best_point = free;
                }
            }
            // odometer increment over the grid
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
        center = best_point;
        radius *= 2.5 / steps as f64;
    }
    best
}
