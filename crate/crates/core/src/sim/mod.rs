//! Monte Carlo ground truth: Poisson point patterns on a torus, node-level
//! realizations of each placement strategy, and empirical hit rates at a
//! typical receiver placed at the origin.

pub mod grid;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exchangeable::MixingDistribution;
use crate::indep::PlacementPmf;
use crate::mhc::ExclusionPolicy;
use crate::model::NetworkConfig;
use grid::{torus_dist2, CellGrid};

/// Square torus window of the given edge length.
#[derive(Debug, Clone, Copy)]
pub struct SimWindow {
    pub side: f64,
}

impl SimWindow {
    pub fn new(side: f64) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::Config(format!("window side must be positive, got {side}")));
        }
        Ok(Self { side })
    }

    /// Default side for a scenario: max(4 (r_dd + max r_m), 10 r_dd).
    pub fn for_scenario(r_dd: f64, max_exclusion_radius: f64) -> Self {
        Self {
            side: (4.0 * (r_dd + max_exclusion_radius)).max(10.0 * r_dd),
        }
    }
}

/// A realized planar point pattern inside the window.
#[derive(Debug, Clone)]
pub struct PointPattern {
    pub points: Vec<[f64; 2]>,
    pub side: f64,
}

impl PointPattern {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Monte Carlo estimate of a probability with its binomial standard error.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_reps: u64,
    pub seed: u64,
}

impl SimEstimate {
    fn from_counts(hits: u64, n: u64, seed: u64) -> Self {
        if n == 0 {
            return Self {
                mean: 0.0,
                stderr: 0.0,
                n_reps: 0,
                seed,
            };
        }
        let mean = hits as f64 / n as f64;
        Self {
            mean,
            stderr: (mean * (1.0 - mean) / n as f64).sqrt(),
            n_reps: n,
            seed,
        }
    }
}

/// Deterministic substream generator: one ChaCha stream per
/// (master seed, stream index) pair.
pub fn sub_rng(master: u64, stream: u64) -> ChaCha8Rng {
    // splitmix64 finalizer over the combined key
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Sample a homogeneous PPP of the given density on the window.
pub fn sample_ppp(lambda: f64, window: SimWindow, rng: &mut impl Rng) -> Result<PointPattern> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("density must be >= 0, got {lambda}")));
    }
    let side = window.side;
    let mean = lambda * side * side;
    let count = if mean == 0.0 {
        0
    } else {
        let pois = Poisson::new(mean)
            .map_err(|e| Error::Domain(format!("invalid Poisson mean {mean}: {e}")))?;
        pois.sample(rng) as usize
    };
    let points = (0..count)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect();
    Ok(PointPattern { points, side })
}

/// Matérn type-II thinning with exclusion radius `r`: each point gets an
/// i.i.d. uniform mark and survives iff its mark is strictly smallest among
/// all points within torus distance r (ties broken by index). Returns the
/// retained indices in increasing order.
pub fn matern2_thin(pattern: &PointPattern, r: f64, rng: &mut impl Rng) -> Vec<usize> {
    let n = pattern.len();
    if r <= 0.0 {
        return (0..n).collect();
    }
    let marks: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let grid = CellGrid::build(&pattern.points, pattern.side, r);
    let r2 = r * r;
    let mut retained = Vec::new();
    for i in 0..n {
        let mut lowest = true;
        grid.for_each_candidate(&pattern.points[i], |j| {
            if j != i
                && torus_dist2(&pattern.points[i], &pattern.points[j], pattern.side) <= r2
                && (marks[j], j) < (marks[i], i)
            {
                lowest = false;
            }
        });
        if lowest {
            retained.push(i);
        }
    }
    retained
}

/// How independent placement fills a node's cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    /// File m cached with probability p_c(m), independently.
    Bernoulli,
    /// Exactly N distinct files per node via systematic sampling with
    /// inclusion probabilities proportional to p_c.
    ExactN(usize),
}

/// Realize per-node cache sets for independent placement. Files are 1-based
/// in the returned lists.
pub fn realize_independent(
    pattern: &PointPattern,
    pc: &PlacementPmf,
    rng: &mut impl Rng,
    mode: CacheMode,
) -> Result<Vec<Vec<u32>>> {
    match mode {
        CacheMode::Bernoulli => Ok(pattern
            .points
            .iter()
            .map(|_| {
                pc.probs()
                    .iter()
                    .enumerate()
                    .filter(|&(_, &p)| rng.random::<f64>() < p)
                    .map(|(i, _)| (i + 1) as u32)
                    .collect()
            })
            .collect()),
        CacheMode::ExactN(n) => {
            let total = pc.budget();
            if total <= 0.0 {
                return Err(Error::Degenerate(
                    "exact-N mode needs a placement pmf with positive mass".into(),
                ));
            }
            let incl = capped_inclusion_probs(pc.probs(), n, total);
            Ok(pattern
                .points
                .iter()
                .map(|_| systematic_sample(&incl, n, rng))
                .collect())
        }
    }
}

/// Inclusion probabilities p_c(m) N / sum(p_c), capped at 1 with the excess
/// redistributed over the uncapped entries.
fn capped_inclusion_probs(pc: &[f64], n: usize, total: f64) -> Vec<f64> {
    let mut incl: Vec<f64> = pc.iter().map(|&p| p * n as f64 / total).collect();
    loop {
        let capped_mass: f64 = incl.iter().filter(|&&p| p >= 1.0).count() as f64;
        let free_mass: f64 = incl.iter().filter(|&&p| p < 1.0).sum();
        let target = n as f64 - capped_mass;
        if free_mass <= 0.0 || target <= 0.0 {
            for p in incl.iter_mut() {
                *p = p.min(1.0);
            }
            return incl;
        }
        let scale = target / free_mass;
        let mut changed = false;
        for p in incl.iter_mut() {
            if *p < 1.0 {
                *p *= scale;
                if *p >= 1.0 {
                    changed = true;
                }
            }
        }
        for p in incl.iter_mut() {
            if *p > 1.0 {
                *p = 1.0;
            }
        }
        if !changed {
            return incl;
        }
    }
}

/// Systematic (fractional) sampling: one uniform offset, grid points at
/// u, u+1, ..., each interval of cumulative inclusion mass contributing the
/// files it covers. Produces exactly `n` files when the probabilities sum
/// to n.
fn systematic_sample(incl: &[f64], n: usize, rng: &mut impl Rng) -> Vec<u32> {
    let u: f64 = rng.random::<f64>();
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    for (i, &p) in incl.iter().enumerate() {
        let next = cum + p;
        // a grid point u + j lies in [cum, next)?
        let j = (cum - u).ceil();
        if j + u < next - 1e-12 && j >= 0.0 {
            out.push((i + 1) as u32);
        }
        cum = next;
    }
    // guard against floating-point edge effects at interval boundaries
    while out.len() > n {
        out.pop();
    }
    if out.len() < n {
        for (i, &p) in incl.iter().enumerate() {
            if out.len() == n {
                break;
            }
            let f = (i + 1) as u32;
            if p > 0.0 && !out.contains(&f) {
                out.push(f);
            }
        }
        out.sort_unstable();
    }
    out
}

/// Realize exchangeable placement: one frequency draw per file, then
/// i.i.d. Bernoulli caching across nodes.
pub fn realize_exchangeable(
    pattern: &PointPattern,
    mixes: &[MixingDistribution],
    rng: &mut impl Rng,
) -> Result<Vec<Vec<u32>>> {
    let thetas: Vec<f64> = mixes
        .iter()
        .map(|m| sample_mix(m, rng))
        .collect::<Result<_>>()?;
    Ok(pattern
        .points
        .iter()
        .map(|_| {
            thetas
                .iter()
                .enumerate()
                .filter(|&(_, &t)| rng.random::<f64>() < t)
                .map(|(i, _)| (i + 1) as u32)
                .collect()
        })
        .collect())
}

/// Draw a caching frequency from a mixing distribution.
pub fn sample_mix(mix: &MixingDistribution, rng: &mut impl Rng) -> Result<f64> {
    Ok(match *mix {
        MixingDistribution::Degenerate { theta } => theta,
        MixingDistribution::TwoPoint { theta0, theta1, w } => {
            if rng.random::<f64>() < w {
                theta0
            } else {
                theta1
            }
        }
        MixingDistribution::Beta { alpha, beta } => {
            let dist = rand_distr::Beta::new(alpha, beta)
                .map_err(|e| Error::Domain(format!("invalid Beta({alpha},{beta}): {e}")))?;
            dist.sample(rng)
        }
    })
}

/// Realize MHC placement: an independent thinning per file with fresh marks.
/// Returns the retained node index set per file.
pub fn realize_mhc(
    pattern: &PointPattern,
    policy: &ExclusionPolicy,
    rng: &mut impl Rng,
) -> Vec<Vec<usize>> {
    policy
        .radii()
        .iter()
        .map(|&r| matern2_thin(pattern, r, rng))
        .collect()
}

/// Build per-node cache lists from per-file retained sets.
pub fn caches_from_retained(node_count: usize, retained: &[Vec<usize>]) -> Vec<Vec<u32>> {
    let mut caches = vec![Vec::new(); node_count];
    for (file0, nodes) in retained.iter().enumerate() {
        for &i in nodes {
            caches[i].push((file0 + 1) as u32);
        }
    }
    caches
}

/// Content placement strategy to estimate.
#[derive(Debug, Clone)]
pub enum Strategy {
    Independent(PlacementPmf),
    Exchangeable(Vec<MixingDistribution>),
    Mhc(ExclusionPolicy),
}

impl Strategy {
    fn max_exclusion_radius(&self) -> f64 {
        match self {
            Strategy::Mhc(policy) => policy.radii().iter().copied().fold(0.0, f64::max),
            _ => 0.0,
        }
    }
}

/// Empirical hit estimates. For MHC, `total` measures a hit within the
/// per-file exclusion radius (the analytic quantity) and `total_rdd` a hit
/// within the radio range (the physical quantity); for the other
/// strategies only `total` is set.
#[derive(Debug, Clone)]
pub struct HitEstimate {
    pub total: SimEstimate,
    pub total_rdd: Option<SimEstimate>,
    pub per_file: Vec<SimEstimate>,
}

struct RepOutcome {
    file0: usize,
    hit: bool,
    hit_rdd: bool,
}

/// Estimate the hit probability at a typical receiver at the origin over
/// `n_reps` independent replications. Deterministic for a fixed
/// (cfg, strategy, n_reps, seed) regardless of the number of worker
/// threads: each replication owns a substream derived from the master seed
/// and its index, and the reduction is an ordered count.
pub fn estimate_hit(
    cfg: &NetworkConfig,
    strategy: &Strategy,
    n_reps: u64,
    seed: u64,
    window: Option<SimWindow>,
) -> Result<HitEstimate> {
    if n_reps == 0 {
        return Err(Error::Config("need at least one replication".into()));
    }
    match strategy {
        Strategy::Independent(pc) if pc.len() != cfg.file_count() => {
            return Err(Error::DimensionMismatch {
                expected: cfg.file_count(),
                got: pc.len(),
            })
        }
        Strategy::Exchangeable(mixes) if mixes.len() != cfg.file_count() => {
            return Err(Error::DimensionMismatch {
                expected: cfg.file_count(),
                got: mixes.len(),
            })
        }
        _ => {}
    }
    let max_r = strategy.max_exclusion_radius();
    let window = match window {
        Some(w) => {
            if w.side < 4.0 * (cfg.r_dd() + max_r) {
                return Err(Error::Config(format!(
                    "window side {} too small for r_dd + max exclusion radius {}",
                    w.side,
                    cfg.r_dd() + max_r
                )));
            }
            w
        }
        None => SimWindow::for_scenario(cfg.r_dd(), max_r),
    };

    // cumulative request distribution
    let mut cum = Vec::with_capacity(cfg.file_count());
    let mut acc = 0.0;
    for &p in cfg.popularity().probs() {
        acc += p;
        cum.push(acc);
    }

    let outcomes: Vec<Result<RepOutcome>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| run_replication(cfg, strategy, &cum, window, seed, rep))
        .collect();

    let m = cfg.file_count();
    let mut hits = 0u64;
    let mut hits_rdd = 0u64;
    let mut file_hits = vec![0u64; m];
    let mut file_reps = vec![0u64; m];
    for o in outcomes {
        let o = o?;
        file_reps[o.file0] += 1;
        if o.hit {
            hits += 1;
            file_hits[o.file0] += 1;
        }
        if o.hit_rdd {
            hits_rdd += 1;
        }
    }
    let per_file = (0..m)
        .map(|i| SimEstimate::from_counts(file_hits[i], file_reps[i], seed))
        .collect();
    Ok(HitEstimate {
        total: SimEstimate::from_counts(hits, n_reps, seed),
        total_rdd: matches!(strategy, Strategy::Mhc(_))
            .then(|| SimEstimate::from_counts(hits_rdd, n_reps, seed)),
        per_file,
    })
}

fn run_replication(
    cfg: &NetworkConfig,
    strategy: &Strategy,
    cum: &[f64],
    window: SimWindow,
    seed: u64,
    rep: u64,
) -> Result<RepOutcome> {
    let mut rng = sub_rng(seed, rep);
    let origin = [0.0f64, 0.0];
    let r_dd2 = cfg.r_dd() * cfg.r_dd();

    // requested file
    let u: f64 = rng.random::<f64>();
    let file0 = cum.partition_point(|&c| c < u).min(cum.len() - 1);
    let file = file0 + 1;

    match strategy {
        Strategy::Independent(pc) => {
            let pattern = sample_ppp(cfg.file_density(file)?, window, &mut rng)?;
            let p = pc.probs()[file0];
            let mut hit = false;
            for pt in &pattern.points {
                let covered = torus_dist2(&origin, pt, window.side) <= r_dd2;
                let caches = rng.random::<f64>() < p;
                if covered && caches {
                    hit = true;
                }
            }
            Ok(RepOutcome {
                file0,
                hit,
                hit_rdd: hit,
            })
        }
        Strategy::Exchangeable(mixes) => {
            let pattern = sample_ppp(cfg.file_density(file)?, window, &mut rng)?;
            let theta = sample_mix(&mixes[file0], &mut rng)?;
            let mut hit = false;
            for pt in &pattern.points {
                let covered = torus_dist2(&origin, pt, window.side) <= r_dd2;
                let caches = rng.random::<f64>() < theta;
                if covered && caches {
                    hit = true;
                }
            }
            Ok(RepOutcome {
                file0,
                hit,
                hit_rdd: hit,
            })
        }
        Strategy::Mhc(policy) => {
            // The MHC construction thins the full cache process; every node
            // is a candidate holder of every file.
            let pattern = sample_ppp(cfg.lambda(), window, &mut rng)?;
            let r_m = policy.radii()[file0];
            let retained = matern2_thin(&pattern, r_m, &mut rng);
            let rm2 = r_m * r_m;
            let mut hit = false;
            let mut hit_rdd = false;
            for &i in &retained {
                let d2 = torus_dist2(&origin, &pattern.points[i], window.side);
                if d2 <= rm2 {
                    hit = true;
                }
                if d2 <= r_dd2 {
                    hit_rdd = true;
                }
            }
            Ok(RepOutcome {
                file0,
                hit,
                hit_rdd,
            })
        }
    }
}

/// Empirical distribution of per-node cache sizes.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Occupancy {
    /// histogram[s] = number of nodes caching exactly s files
    pub histogram: Vec<u64>,
    /// fraction of nodes holding more than the nominal cache size
    pub frac_exceeding: f64,
    pub mean: f64,
}

/// Summarize per-node cache sizes of a realized placement.
pub fn occupancy_stats(caches: &[Vec<u32>], cache_size: usize) -> Occupancy {
    let max_len = caches.iter().map(Vec::len).max().unwrap_or(0);
    let mut histogram = vec![0u64; max_len + 1];
    let mut exceeding = 0u64;
    let mut total = 0u64;
    for c in caches {
        histogram[c.len()] += 1;
        total += c.len() as u64;
        if c.len() > cache_size {
            exceeding += 1;
        }
    }
    let n = caches.len().max(1) as f64;
    Occupancy {
        histogram,
        frac_exceeding: exceeding as f64 / n,
        mean: total as f64 / n,
    }
}
