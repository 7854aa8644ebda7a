//! Scenario-driven command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exchangeable::{hit_exchangeable, hit_exchangeable_series, jensen_gap, MixingDistribution};
use crate::indep::{
    fit_linear_from_exact, linear_pmf, optimize_independent, solve_linear_lk, PlacementPmf,
};
use crate::mhc::{hit_one_mhc, optimize_mhc, p_cache};
use crate::model::{hit_independent, NetworkConfig};
use crate::report::{fmt_g, write_atomic, CsvReport};
use crate::scenario::{Scenario, StrategySpec, SweepParam, SweepSpec};
use crate::sim::{
    caches_from_retained, estimate_hit, occupancy_stats, realize_exchangeable,
    realize_independent, realize_mhc, sample_ppp, sub_rng, CacheMode, Occupancy, SimWindow,
    Strategy,
};

/// Environment variable consulted for the worker thread count when
/// --threads is not given.
pub const THREADS_ENV: &str = "D2DCACHE_THREADS";

const DEFAULT_COMPARE_SWEEP: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0];

#[derive(Parser)]
#[command(
    name = "d2dcache",
    about = "Optimize and validate D2D cache hit probabilities under independent, exchangeable and Matérn hard-core placement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args)]
pub struct CommonArgs {
    /// Scenario JSON file (built-in defaults when omitted)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory for result files
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Override the scenario master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Override the scenario replication count
    #[arg(long, global = true)]
    pub reps: Option<u64>,

    /// Worker thread count (falls back to D2DCACHE_THREADS, then all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Solve the independent placement optimum and its linear approximation
    OptimizeIndependent,
    /// Solve the Matérn hard-core exclusion policy
    OptimizeMhc,
    /// Evaluate an exchangeable strategy and its Jensen certificate
    EvalExchangeable,
    /// Monte Carlo estimate vs. the analytic hit for one strategy
    Simulate,
    /// Independent vs. MHC hit across a cache-size sweep
    Compare,
    /// Analytic quantities across a parameter sweep
    Sweep,
}

pub fn run(cli: Cli) -> Result<()> {
    init_threads(cli.common.threads)?;
    let mut scenario = match &cli.common.config {
        Some(path) => Scenario::from_path(path)?,
        None => Scenario::default_scenario(),
    };
    if let Some(seed) = cli.common.seed {
        scenario.sim.seed = seed;
    }
    if let Some(reps) = cli.common.reps {
        scenario.sim.n_reps = reps;
    }
    scenario.validate()?;

    match cli.command {
        Command::OptimizeIndependent => cmd_optimize_independent(&scenario, &cli.common.out)?,
        Command::OptimizeMhc => cmd_optimize_mhc(&scenario, &cli.common.out)?,
        Command::EvalExchangeable => cmd_eval_exchangeable(&scenario, &cli.common.out)?,
        Command::Simulate => cmd_simulate(&scenario, &cli.common.out)?,
        Command::Compare => cmd_compare(&scenario, &cli.common.out)?,
        Command::Sweep => cmd_sweep(&scenario, &cli.common.out)?,
    };
    Ok(())
}

fn init_threads(flag: Option<usize>) -> Result<()> {
    let from_env = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(t) = flag.or(from_env) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn scenario_meta(report: &mut CsvReport, scenario: &Scenario) -> Result<()> {
    report.meta("scenario", serde_json::to_string(scenario)?);
    Ok(())
}

pub fn cmd_optimize_independent(scenario: &Scenario, out: &Path) -> Result<PathBuf> {
    let cfg = scenario.network_config()?;
    let sol = optimize_independent(&cfg, 1e-10)?;
    let exact_lk = fit_linear_from_exact(&sol.pmf)?;
    let lk = solve_linear_lk(&cfg)?;
    let lin = linear_pmf(&lk, cfg.file_count())?;
    let hit_linear = hit_independent(&cfg, &lin)?;
    let sup_gap = sol
        .pmf
        .probs()
        .iter()
        .zip(lin.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    let mut rep = CsvReport::new(&["m", "p_r", "p_c_exact", "p_c_linear"]);
    scenario_meta(&mut rep, scenario)?;
    rep.meta_f("mu_star", sol.mu_star)
        .meta("l", lk.l.to_string())
        .meta("k", lk.k.to_string())
        .meta("l_exact", exact_lk.l.to_string())
        .meta("k_exact", exact_lk.k.to_string())
        .meta_f("hit_exact", sol.hit)
        .meta_f("hit_linear", hit_linear)
        .meta_f("sup_norm_gap", sup_gap)
        .meta_f("budget", sol.pmf.budget())
        .meta_f("budget_residual", sol.budget_residual);
    for m in 1..=cfg.file_count() {
        rep.row(vec![
            m.to_string(),
            fmt_g(cfg.popularity().pmf(m)?),
            fmt_g(sol.pmf.probs()[m - 1]),
            fmt_g(lin.probs()[m - 1]),
        ]);
    }
    let path = out.join("placement_independent.csv");
    rep.write_to(&path)?;
    println!(
        "independent optimum: hit={} mu*={} L={} K={} sup_gap={} -> {}",
        fmt_g(sol.hit),
        fmt_g(sol.mu_star),
        lk.l,
        lk.k,
        fmt_g(sup_gap),
        path.display()
    );
    Ok(path)
}

pub fn cmd_optimize_mhc(scenario: &Scenario, out: &Path) -> Result<PathBuf> {
    let cfg = scenario.network_config()?;
    let sol = optimize_mhc(&cfg, 1e-10)?;
    let mut rep = CsvReport::new(&["m", "p_r", "c_bar", "r_m", "p_cache", "hit_m"]);
    scenario_meta(&mut rep, scenario)?;
    rep.meta_f("zeta_star", sol.zeta_star)
        .meta_f("hit_total", sol.hit)
        .meta_f("budget", sol.budget)
        .meta_f("budget_residual", sol.budget_residual)
        .meta("feasible", sol.feasible.to_string());
    for m in 1..=cfg.file_count() {
        let c = sol.policy.c_bar()[m - 1];
        let pr = cfg.popularity().pmf(m)?;
        rep.row(vec![
            m.to_string(),
            fmt_g(pr),
            fmt_g(c),
            fmt_g(sol.policy.radii()[m - 1]),
            fmt_g(p_cache(c)),
            fmt_g(pr * hit_one_mhc(c)),
        ]);
    }
    let path = out.join("policy_mhc.csv");
    rep.write_to(&path)?;
    println!(
        "mhc policy: hit={} zeta*={} feasible={} budget_residual={} -> {}",
        fmt_g(sol.hit),
        fmt_g(sol.zeta_star),
        sol.feasible,
        fmt_g(sol.budget_residual),
        path.display()
    );
    Ok(path)
}

#[derive(Serialize)]
struct ExchangeableReport<'a> {
    scenario: &'a Scenario,
    hit_exchangeable: f64,
    hit_independent_at_means: f64,
    jensen_gap: f64,
    series_laplace_gap: f64,
    sum_of_means: f64,
}

pub fn cmd_eval_exchangeable(scenario: &Scenario, out: &Path) -> Result<PathBuf> {
    let cfg = scenario.network_config()?;
    let mixes = exchangeable_mixes(scenario)?;
    let hit = hit_exchangeable(&cfg, &mixes)?;
    let gap = jensen_gap(&cfg, &mixes)?;
    let series = hit_exchangeable_series(&cfg, &mixes, 1e-12)?;
    let report = ExchangeableReport {
        scenario,
        hit_exchangeable: hit,
        hit_independent_at_means: hit + gap,
        jensen_gap: gap,
        series_laplace_gap: (hit - series).abs(),
        sum_of_means: mixes.iter().map(MixingDistribution::mean).sum(),
    };
    let path = out.join("exchangeable.json");
    write_atomic(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    println!(
        "exchangeable: hit={} jensen_gap={} -> {}",
        fmt_g(hit),
        fmt_g(gap),
        path.display()
    );
    Ok(path)
}

fn exchangeable_mixes(scenario: &Scenario) -> Result<Vec<MixingDistribution>> {
    match &scenario.strategy {
        Some(StrategySpec::Exchangeable { mixes }) => mixes.iter().map(|m| m.build()).collect(),
        _ => Err(Error::Config(
            "this command needs strategy.kind = \"exchangeable\" with per-file mixes".into(),
        )),
    }
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    scenario: &'a Scenario,
    strategy: &'static str,
    analytic_hit: f64,
    sim_hit: f64,
    stderr: f64,
    n_reps: u64,
    seed: u64,
    z_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    analytic_hit_rdd_note: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sim_hit_rdd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr_rdd: Option<f64>,
    occupancy: Occupancy,
}

fn z_score(sim: f64, analytic: f64, stderr: f64) -> f64 {
    if stderr == 0.0 {
        0.0
    } else {
        (sim - analytic) / stderr
    }
}

pub fn cmd_simulate(scenario: &Scenario, out: &Path) -> Result<PathBuf> {
    let cfg = scenario.network_config()?;
    let seed = scenario.sim.seed;
    let n_reps = scenario.sim.n_reps;
    let window = scenario.sim.window_side.map(SimWindow::new).transpose()?;

    let spec = scenario.strategy.as_ref().ok_or_else(|| {
        Error::Config("simulate needs a strategy block in the scenario".into())
    })?;

    let (name, strategy, analytic, occ_mode): (&'static str, Strategy, f64, Option<CacheMode>) =
        match spec {
            StrategySpec::Independent { pc, exact_n } => {
                let pmf = match pc {
                    Some(v) => PlacementPmf::new(v.clone())?,
                    None => optimize_independent(&cfg, 1e-10)?.pmf,
                };
                let analytic = hit_independent(&cfg, &pmf)?;
                let mode = if *exact_n {
                    CacheMode::ExactN(cfg.cache_size())
                } else {
                    CacheMode::Bernoulli
                };
                ("independent", Strategy::Independent(pmf), analytic, Some(mode))
            }
            StrategySpec::Exchangeable { .. } => {
                let mixes = exchangeable_mixes(scenario)?;
                let analytic = hit_exchangeable(&cfg, &mixes)?;
                ("exchangeable", Strategy::Exchangeable(mixes), analytic, None)
            }
            StrategySpec::Mhc => {
                let sol = optimize_mhc(&cfg, 1e-10)?;
                ("mhc", Strategy::Mhc(sol.policy), sol.hit, None)
            }
        };

    let est = estimate_hit(&cfg, &strategy, n_reps, seed, window)?;
    let occupancy = occupancy_for(&cfg, &strategy, occ_mode, seed, window)?;

    let report = SimulateReport {
        scenario,
        strategy: name,
        analytic_hit: analytic,
        sim_hit: est.total.mean,
        stderr: est.total.stderr,
        n_reps,
        seed,
        z_score: z_score(est.total.mean, analytic, est.total.stderr),
        analytic_hit_rdd_note: est
            .total_rdd
            .is_some()
            .then_some("sim_hit measures the exclusion-disk hit; sim_hit_rdd the radio-range hit"),
        sim_hit_rdd: est.total_rdd.map(|e| e.mean),
        stderr_rdd: est.total_rdd.map(|e| e.stderr),
        occupancy,
    };
    let path = out.join("simulation.json");
    write_atomic(&path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    println!(
        "simulate[{name}]: analytic={} sim={} z={} -> {}",
        fmt_g(analytic),
        fmt_g(est.total.mean),
        fmt_g(report.z_score),
        path.display()
    );
    Ok(path)
}

/// Aggregate per-node cache sizes over a few full-placement realizations.
const OCCUPANCY_REALIZATIONS: u64 = 32;
const OCCUPANCY_STREAM_BASE: u64 = 1 << 40;

fn occupancy_for(
    cfg: &NetworkConfig,
    strategy: &Strategy,
    mode: Option<CacheMode>,
    seed: u64,
    window: Option<SimWindow>,
) -> Result<Occupancy> {
    let max_r = match strategy {
        Strategy::Mhc(p) => p.radii().iter().copied().fold(0.0, f64::max),
        _ => 0.0,
    };
    let window = window.unwrap_or_else(|| SimWindow::for_scenario(cfg.r_dd(), max_r));
    let mut all = Vec::new();
    for i in 0..OCCUPANCY_REALIZATIONS {
        let mut rng = sub_rng(seed, OCCUPANCY_STREAM_BASE + i);
        let pattern = sample_ppp(cfg.lambda(), window, &mut rng)?;
        let caches = match strategy {
            Strategy::Independent(pc) => realize_independent(
                &pattern,
                pc,
                &mut rng,
                mode.unwrap_or(CacheMode::Bernoulli),
            )?,
            Strategy::Exchangeable(mixes) => realize_exchangeable(&pattern, mixes, &mut rng)?,
            Strategy::Mhc(policy) => {
                let retained = realize_mhc(&pattern, policy, &mut rng);
                caches_from_retained(pattern.len(), &retained)
            }
        };
        all.extend(caches);
    }
    Ok(occupancy_stats(&all, cfg.cache_size()))
}

pub fn cmd_compare(scenario: &Scenario, out: &Path) -> Result<PathBuf> {
    let sweep = match &scenario.sweep {
        Some(s) if s.parameter == SweepParam::N => s.clone(),
        Some(_) => {
            return Err(Error::Config("compare needs a sweep over n".into()));
        }
        None => SweepSpec {
            parameter: SweepParam::N,
            values: DEFAULT_COMPARE_SWEEP.to_vec(),
        },
    };
    let seed = scenario.sim.seed;
    let n_reps = scenario.sim.n_reps;

    let mut rep = CsvReport::new(&[
        "n",
        "hit_indep_analytic",
        "hit_mhc_analytic",
        "mhc_feasible",
        "hit_indep_sim",
        "stderr_indep",
        "hit_mhc_sim_rm",
        "stderr_mhc_rm",
        "hit_mhc_sim_rdd",
        "stderr_mhc_rdd",
    ]);
    scenario_meta(&mut rep, scenario)?;

    let mut crossover: Option<f64> = None;
    let mut prev_dominates: Option<bool> = None;
    for (i, &nv) in sweep.values.iter().enumerate() {
        let point = scenario.with_sweep_value(SweepParam::N, nv);
        if point.network.n >= point.network.m {
            return Err(Error::Config(format!(
                "sweep value N={nv} not below catalog size {}",
                point.network.m
            )));
        }
        let cfg = point.network_config()?;
        let ind = optimize_independent(&cfg, 1e-10)?;
        let mhc = optimize_mhc(&cfg, 1e-10)?;

        let ind_est = estimate_hit(
            &cfg,
            &Strategy::Independent(ind.pmf.clone()),
            n_reps,
            seed.wrapping_add(2 * i as u64),
            None,
        )?;
        let mhc_est = estimate_hit(
            &cfg,
            &Strategy::Mhc(mhc.policy.clone()),
            n_reps,
            seed.wrapping_add(2 * i as u64 + 1),
            None,
        )?;
        let rdd = mhc_est.total_rdd.expect("mhc estimate carries rdd hit");

        let dominates = mhc.hit >= ind.hit;
        if let Some(prev) = prev_dominates {
            if prev && !dominates && crossover.is_none() {
                crossover = Some(nv);
            }
        }
        prev_dominates = Some(dominates);

        rep.row(vec![
            fmt_g(nv),
            fmt_g(ind.hit),
            fmt_g(mhc.hit),
            mhc.feasible.to_string(),
            fmt_g(ind_est.total.mean),
            fmt_g(ind_est.total.stderr),
            fmt_g(mhc_est.total.mean),
            fmt_g(mhc_est.total.stderr),
            fmt_g(rdd.mean),
            fmt_g(rdd.stderr),
        ]);
    }
    match crossover {
        Some(n) => {
            rep.meta("crossover_n", fmt_g(n));
            println!("analytic MHC ceases to dominate at N = {}", fmt_g(n));
        }
        None => {
            rep.meta("crossover_n", "none");
            println!("no crossover inside the sweep: one strategy dominates throughout");
        }
    }
    let path = out.join("compare.csv");
    rep.write_to(&path)?;
    println!("compare -> {}", path.display());
    Ok(path)
}

pub fn cmd_sweep(scenario: &Scenario, out: &Path) -> Result<PathBuf> {
    let sweep = scenario
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep needs a sweep block in the scenario".into()))?;
    let mut rep = CsvReport::new(&[
        "value",
        "hit_indep_analytic",
        "hit_linear_analytic",
        "hit_mhc_analytic",
        "mhc_feasible",
        "l",
        "k",
        "sup_norm_gap",
    ]);
    scenario_meta(&mut rep, scenario)?;
    rep.meta(
        "parameter",
        serde_json::to_string(&sweep.parameter)?.trim_matches('"').to_string(),
    );
    for &v in &sweep.values {
        let point = scenario.with_sweep_value(sweep.parameter, v);
        let cfg = point.network_config()?;
        let ind = optimize_independent(&cfg, 1e-10)?;
        let lk = solve_linear_lk(&cfg)?;
        let lin = linear_pmf(&lk, cfg.file_count())?;
        let hit_lin = hit_independent(&cfg, &lin)?;
        let sup_gap = ind
            .pmf
            .probs()
            .iter()
            .zip(lin.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let mhc = optimize_mhc(&cfg, 1e-10)?;
        rep.row(vec![
            fmt_g(v),
            fmt_g(ind.hit),
            fmt_g(hit_lin),
            fmt_g(mhc.hit),
            mhc.feasible.to_string(),
            lk.l.to_string(),
            lk.k.to_string(),
            fmt_g(sup_gap),
        ]);
    }
    let path = out.join("sweep.csv");
    rep.write_to(&path)?;
    println!("sweep -> {}", path.display());
    Ok(path)
}
