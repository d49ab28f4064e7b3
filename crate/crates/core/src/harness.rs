//! Experiment runner behind the `erw` binary.
//!
//! Run `i` always draws from substream `i` of the master seed and results are
//! collected in run order, so every output is byte-identical for a given
//! configuration whatever the thread count.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::run_coupled;
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_sigma_direct, estimate_v_direct, estimate_v_sigma_regen, EstimateSummary, Method,
    RegenOptions,
};
use crate::oracle::{
    exact_coupled_y_distribution, exact_distribution, expectation, mc_vs_oracle, total_mass,
    Statistic,
};
use crate::regeneration::{
    extract_blocks, find_regenerations, stopped_blocks, RegenBlock, RegenTracker,
};
use crate::rng::RandomSource;
use crate::scalar::{parse_decimal, Exact, Scalar};
use crate::walk::{make_step_law, walk_step, Recording, StepLaw, WalkState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// Bias as typed, so the oracle can read it exactly.
    pub p_text: String,
    pub d: usize,
    pub steps: u64,
    pub runs: u64,
    pub seed: u64,
    pub confirm_lag: u64,
    pub p_grid: Option<Vec<String>>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub threads: usize,
    pub allow_boundary_p: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p_text: "0.75".into(),
            d: 2,
            steps: 10_000,
            runs: 1000,
            seed: 42,
            confirm_lag: 1000,
            p_grid: None,
            output: None,
            format: Format::Csv,
            threads: 1,
            allow_boundary_p: false,
        }
    }
}

impl ExperimentConfig {
    pub fn p(&self) -> Result<f64> {
        parse_p(&self.p_text)
    }

    pub fn law(&self) -> Result<StepLaw<f64>> {
        make_step_law(self.p()?, self.d, self.allow_boundary_p)
    }

    pub fn exact_law(&self) -> Result<StepLaw<Exact>> {
        let p = parse_decimal(&self.p_text)
            .ok_or_else(|| Error::InvalidInput(format!("cannot parse p = {:?}", self.p_text)))?;
        make_step_law(p, self.d, self.allow_boundary_p)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
    }
}

fn parse_p(text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("cannot parse p = {text:?}")))
}

/// Everything kept from one simulated run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub run_id: u64,
    pub x1_final: i64,
    pub j_count: u64,
    pub r_max: i64,
    pub n_confirmed: usize,
    pub kappa1: Option<u64>,
    pub blocks: Vec<RegenBlock>,
    /// `(dk, dx1)` after the last confirmed regeneration.
    pub trailing: (u64, i64),
}

/// Simulates `runs` independent walks of `steps` steps, tracking regeneration
/// times on the fly.
pub fn simulate_runs(
    law: &StepLaw<f64>,
    steps: u64,
    runs: u64,
    seed: u64,
    confirm_lag: u64,
    pool: &rayon::ThreadPool,
) -> Vec<RunResult> {
    let compiled = law.compile();
    let source = RandomSource::new(seed, 0);
    pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map_init(
                || WalkState::new(law.d(), Recording::Off),
                |state, run_id| {
                    state.reset();
                    let mut rng = source.substream(run_id).rng();
                    let mut tracker = RegenTracker::new(confirm_lag);
                    tracker.observe(0).expect("origin");
                    for _ in 0..steps {
                        walk_step(state, &compiled, &mut rng);
                        tracker.observe(state.position().e1()).expect("unit steps");
                    }
                    let record = tracker.record();
                    let blocks = extract_blocks(&record);
                    RunResult {
                        run_id,
                        x1_final: state.position().e1(),
                        j_count: state.fresh_count(),
                        r_max: state.running_max(),
                        n_confirmed: record.kappa_times.len(),
                        kappa1: record.first_kappa(),
                        blocks,
                        trailing: record.trailing_segment(),
                    }
                },
            )
            .collect()
    })
}

/// Final e1-coordinates only, without regeneration tracking.
pub fn simulate_final_x1(
    law: &StepLaw<f64>,
    steps: u64,
    runs: u64,
    seed: u64,
    pool: &rayon::ThreadPool,
) -> Vec<i64> {
    let compiled = law.compile();
    let source = RandomSource::new(seed, 0);
    pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map_init(
                || WalkState::new(law.d(), Recording::Off),
                |state, run_id| {
                    state.reset();
                    let mut rng = source.substream(run_id).rng();
                    for _ in 0..steps {
                        walk_step(state, &compiled, &mut rng);
                    }
                    state.position().e1()
                },
            )
            .collect()
    })
}

/// Runs until the first regeneration is confirmed (or `max_steps`), returning
/// `κ_1` per run.
pub fn simulate_first_kappa(
    law: &StepLaw<f64>,
    max_steps: u64,
    runs: u64,
    seed: u64,
    confirm_lag: u64,
    pool: &rayon::ThreadPool,
) -> Vec<Option<u64>> {
    let compiled = law.compile();
    let source = RandomSource::new(seed, 0);
    pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map_init(
                || WalkState::new(law.d(), Recording::Off),
                |state, run_id| {
                    state.reset();
                    let mut rng = source.substream(run_id).rng();
                    let mut tracker = RegenTracker::new(confirm_lag);
                    tracker.observe(0).expect("origin");
                    for _ in 0..max_steps {
                        walk_step(state, &compiled, &mut rng);
                        tracker.observe(state.position().e1()).expect("unit steps");
                        if let Some(k) = tracker.first_confirmed() {
                            return Some(k);
                        }
                    }
                    None
                },
            )
            .collect()
    })
}

/// Summary line shared by `simulate`, `regen` and `sweep`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub p: f64,
    pub d: usize,
    pub n_steps: u64,
    pub n_runs: usize,
    pub method: Method,
    pub v_hat: f64,
    pub v_se: f64,
    pub sigma_hat: f64,
    pub sigma_se: f64,
    pub n_blocks: usize,
    pub censored_fraction: f64,
}

impl From<&EstimateSummary<f64>> for SummaryRow {
    fn from(s: &EstimateSummary<f64>) -> Self {
        Self {
            p: s.p,
            d: s.d,
            n_steps: s.n_steps,
            n_runs: s.n_runs,
            method: s.method,
            v_hat: s.v_hat,
            v_se: s.v_se,
            sigma_hat: s.sigma_hat(),
            sigma_se: s.sigma_se(),
            n_blocks: s.n_blocks,
            censored_fraction: s.censored_fraction,
        }
    }
}

fn censored_fraction(results: &[RunResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.kappa1.is_none()).count() as f64 / results.len() as f64
}

/// Direct estimate from final positions.
pub fn direct_summary(
    p: f64,
    d: usize,
    steps: u64,
    final_x1: &[i64],
    censored_fraction: f64,
) -> Result<EstimateSummary<f64>> {
    let v = estimate_v_direct::<f64>(final_x1, steps)?;
    let s = estimate_sigma_direct::<f64>(final_x1, steps)?;
    Ok(EstimateSummary {
        p,
        d,
        method: Method::Direct,
        n_runs: final_x1.len(),
        n_steps: steps,
        n_blocks: 0,
        v_hat: v.value,
        v_se: v.se,
        sigma2_hat: s.sigma2,
        sigma2_se: s.sigma2_se,
        censored_fraction,
    })
}

/// Default cutoff of the block stopping rule: half of the part of the horizon
/// where regenerations can be confirmed.
pub fn default_block_cutoff(steps: u64, confirm_lag: u64) -> u64 {
    steps.saturating_sub(confirm_lag) / 2
}

/// Regeneration estimate from the blocks of all runs, in run order, each run
/// cut by [`stopped_blocks`] at `cutoff`.
pub fn regen_summary(
    p: f64,
    d: usize,
    steps: u64,
    cutoff: u64,
    results: &[RunResult],
) -> Result<EstimateSummary<f64>> {
    let blocks: Vec<RegenBlock> = results
        .iter()
        .flat_map(|r| stopped_blocks(&r.blocks, cutoff).0.iter().copied())
        .collect();
    let e = estimate_v_sigma_regen::<f64>(&blocks, RegenOptions::default())?;
    Ok(EstimateSummary {
        p,
        d,
        method: Method::Regeneration,
        n_runs: results.len(),
        n_steps: steps,
        n_blocks: e.n_blocks,
        v_hat: e.v.value,
        v_se: e.v.se,
        sigma2_hat: e.sigma2.value,
        sigma2_se: e.sigma2.se,
        censored_fraction: censored_fraction(results),
    })
}

fn unavailable_summary(p: f64, d: usize, steps: u64, n_runs: usize, method: Method) -> SummaryRow {
    SummaryRow {
        p,
        d,
        n_steps: steps,
        n_runs,
        method,
        v_hat: f64::NAN,
        v_se: f64::NAN,
        sigma_hat: f64::NAN,
        sigma_se: f64::NAN,
        n_blocks: 0,
        censored_fraction: f64::NAN,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulateRow {
    pub run_id: u64,
    pub seed: u64,
    pub p: f64,
    pub d: usize,
    pub steps: u64,
    pub x1_final: i64,
    pub j_count: u64,
    pub r_max: i64,
    pub n_confirmed_regens: usize,
    pub kappa1_or_censored: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockRow {
    pub run_id: u64,
    pub block_index: usize,
    pub dk: u64,
    pub dx1: i64,
    pub is_first: bool,
    pub censored: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoupleRow {
    pub run_id: u64,
    pub seed: u64,
    pub p: f64,
    pub d: usize,
    pub steps: u64,
    pub y_x1: i64,
    pub z_x1: i64,
    pub gap: i64,
    pub h_count: u64,
    pub tan_count: u64,
    pub j_count: u64,
    pub violations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub v_hat: f64,
    pub v_se: f64,
    pub sigma_hat: f64,
    pub sigma_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    pub statistic: String,
    pub value: String,
    pub probability: f64,
    pub exact: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

/// Serialises rows as CSV (with header) or JSON lines.
pub fn write_rows<S: Serialize, W: Write>(rows: &[S], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = BufWriter::new(out);
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Writes to `path` through a `.partial` file renamed on success, so an
/// interrupted run never leaves a complete-looking file.
pub fn write_file_atomically<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut File) -> Result<()>,
{
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    let mut file = File::create(&partial)?;
    fill(&mut file)?;
    file.sync_all()?;
    fs::rename(&partial, path)?;
    Ok(())
}

/// Path of the summary file written next to a main output file.
pub fn summary_path(output: &Path, format: Format) -> PathBuf {
    let ext = match format {
        Format::Csv => "summary.csv",
        Format::Jsonl => "summary.jsonl",
    };
    let mut s = output.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn emit<S: Serialize>(rows: &[S], cfg: &ExperimentConfig, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_file_atomically(p, |f| write_rows(rows, cfg.format, f)),
        None => write_rows(rows, cfg.format, io::stdout().lock()),
    }
}

fn emit_summary(rows: &[SummaryRow], cfg: &ExperimentConfig) -> Result<()> {
    match cfg.output.as_deref() {
        Some(out) => {
            let path = summary_path(out, cfg.format);
            write_file_atomically(&path, |f| write_rows(rows, cfg.format, f))
        }
        None => write_rows(rows, cfg.format, io::stderr().lock()),
    }
}

fn summaries(p: f64, cfg: &ExperimentConfig, results: &[RunResult]) -> Vec<SummaryRow> {
    let x1: Vec<i64> = results.iter().map(|r| r.x1_final).collect();
    let n = results.len();
    let direct = direct_summary(p, cfg.d, cfg.steps, &x1, censored_fraction(results))
        .map(|s| SummaryRow::from(&s))
        .unwrap_or_else(|_| unavailable_summary(p, cfg.d, cfg.steps, n, Method::Direct));
    let regen = regen_summary(
        p,
        cfg.d,
        cfg.steps,
        default_block_cutoff(cfg.steps, cfg.confirm_lag),
        results,
    )
    .map(|s| SummaryRow::from(&s))
    .unwrap_or_else(|_| unavailable_summary(p, cfg.d, cfg.steps, n, Method::Regeneration));
    vec![direct, regen]
}

/// Per-run rows plus both summaries.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<(Vec<SimulateRow>, Vec<SummaryRow>)> {
    let law = cfg.law()?;
    let p = cfg.p()?;
    let results = simulate_runs(
        &law,
        cfg.steps,
        cfg.runs,
        cfg.seed,
        cfg.confirm_lag,
        &cfg.pool()?,
    );
    let rows = results
        .iter()
        .map(|r| SimulateRow {
            run_id: r.run_id,
            seed: cfg.seed,
            p,
            d: cfg.d,
            steps: cfg.steps,
            x1_final: r.x1_final,
            j_count: r.j_count,
            r_max: r.r_max,
            n_confirmed_regens: r.n_confirmed,
            kappa1_or_censored: r
                .kappa1
                .map_or_else(|| "censored".to_string(), |k| k.to_string()),
        })
        .collect();
    Ok((rows, summaries(p, cfg, &results)))
}

/// Regeneration blocks of every run; the trailing unconfirmed segment of each
/// run is listed with `censored = true` and never enters the estimates.
pub fn cmd_regen(cfg: &ExperimentConfig) -> Result<(Vec<BlockRow>, Vec<SummaryRow>)> {
    let law = cfg.law()?;
    let p = cfg.p()?;
    let results = simulate_runs(
        &law,
        cfg.steps,
        cfg.runs,
        cfg.seed,
        cfg.confirm_lag,
        &cfg.pool()?,
    );
    let mut rows = Vec::new();
    for r in &results {
        for (i, b) in r.blocks.iter().enumerate() {
            rows.push(BlockRow {
                run_id: r.run_id,
                block_index: i,
                dk: b.dk,
                dx1: b.dx1,
                is_first: b.is_first,
                censored: false,
            });
        }
        if r.trailing.0 > 0 {
            rows.push(BlockRow {
                run_id: r.run_id,
                block_index: r.blocks.len(),
                dk: r.trailing.0,
                dx1: r.trailing.1,
                is_first: r.blocks.is_empty(),
                censored: true,
            });
        }
    }
    let cutoff = default_block_cutoff(cfg.steps, cfg.confirm_lag);
    let summary = regen_summary(p, cfg.d, cfg.steps, cutoff, &results)
        .map(|s| SummaryRow::from(&s))
        .unwrap_or_else(|_| {
            unavailable_summary(p, cfg.d, cfg.steps, results.len(), Method::Regeneration)
        });
    Ok((rows, vec![summary]))
}

/// Coupled runs; the second value is the total number of invariant violations.
pub fn cmd_couple(cfg: &ExperimentConfig) -> Result<(Vec<CoupleRow>, u64)> {
    cfg.law()?;
    let p = cfg.p()?;
    let source = RandomSource::new(cfg.seed, 0);
    let rows: Vec<CoupleRow> = cfg.pool()?.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|run_id| {
                let run = run_coupled(p, cfg.d, cfg.steps, source.substream(run_id), false);
                let st = &run.state;
                CoupleRow {
                    run_id,
                    seed: cfg.seed,
                    p,
                    d: cfg.d,
                    steps: cfg.steps,
                    y_x1: st.y().position().e1(),
                    z_x1: st.z().e1(),
                    gap: st.gap(),
                    h_count: st.h_count(),
                    tan_count: st.tan_count(),
                    j_count: st.y().fresh_count(),
                    violations: run.violations.total(),
                }
            })
            .collect()
    });
    let violations = rows.iter().map(|r| r.violations).sum();
    Ok((rows, violations))
}

/// One direct-method row per grid point. Grid point `i` uses master seed
/// `seed + i`.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let grid = cfg
        .p_grid
        .as_ref()
        .filter(|g| !g.is_empty())
        .ok_or_else(|| Error::InvalidInput("sweep requires --p-grid".into()))?;
    let laws = grid
        .iter()
        .map(|text| make_step_law(parse_p(text)?, cfg.d, cfg.allow_boundary_p))
        .collect::<Result<Vec<_>>>()?;
    let pool = cfg.pool()?;
    laws.iter()
        .enumerate()
        .map(|(i, law)| {
            let x1 = simulate_final_x1(
                law,
                cfg.steps,
                cfg.runs,
                cfg.seed.wrapping_add(i as u64),
                &pool,
            );
            let s = direct_summary(*law.p(), cfg.d, cfg.steps, &x1, f64::NAN)?;
            Ok(SweepRow {
                p: *law.p(),
                v_hat: s.v_hat,
                v_se: s.v_se,
                sigma_hat: s.sigma_hat(),
                sigma_se: s.sigma_se(),
            })
        })
        .collect()
}

/// Plot script for a sweep CSV.
pub fn sweep_plot_script(csv_path: &Path) -> String {
    format!(
        r#"#!/usr/bin/env python3
# Plots v_hat and sigma_hat against p from an `erw sweep` CSV.
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {path:?}
rows = list(csv.DictReader(open(path)))
p = [float(r["p"]) for r in rows]
fig, axes = plt.subplots(1, 2, figsize=(10, 4))
for ax, col in zip(axes, ["v", "sigma"]):
    y = [float(r[col + "_hat"]) for r in rows]
    e = [2 * float(r[col + "_se"]) for r in rows]
    ax.errorbar(p, y, yerr=e, marker="o", capsize=3)
    ax.set_xlabel("p")
    ax.set_ylabel(col + "_hat")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#,
        path = csv_path.display().to_string()
    )
}

pub fn parse_statistic(name: &str, lag: u64) -> Result<Statistic> {
    Ok(match name {
        "x1" => Statistic::X1,
        "J" | "j" => Statistic::FreshCount,
        "D" | "d" => Statistic::FirstReturn,
        "T0" | "t0" => Statistic::FirstExceed,
        "kappa" | "kappa_confirmed_by" => Statistic::KappaConfirmedBy { lag },
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown statistic {other:?} (expected x1, J, D, T0 or kappa)"
            )))
        }
    })
}

fn oracle_rows<T: Scalar>(law: &StepLaw<T>, n: u32, stat: Statistic) -> Result<Vec<OracleRow>> {
    let dist = exact_distribution(law, n, stat)?;
    Ok(dist
        .iter()
        .map(|(o, w)| OracleRow {
            statistic: stat.name().to_string(),
            value: o.to_string(),
            probability: w.to_f64_lossy(),
            exact: w.as_fraction().unwrap_or_default(),
        })
        .collect())
}

/// Exact distribution table. `steps` is the horizon.
pub fn cmd_oracle(cfg: &ExperimentConfig, statistic: &str, exact: bool) -> Result<Vec<OracleRow>> {
    let stat = parse_statistic(statistic, cfg.confirm_lag)?;
    let n = u32::try_from(cfg.steps)
        .map_err(|_| Error::InvalidInput(format!("horizon {} too large", cfg.steps)))?;
    if exact {
        oracle_rows(&cfg.exact_law()?, n, stat)
    } else {
        oracle_rows(&cfg.law()?, n, stat)
    }
}

/// Fault injection for the self-test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SelftestHooks {
    /// Run the excited half of the coupled chain with a wrong bias.
    pub corrupt_step_law: bool,
}

/// Reduced-scale invariant suite. With zero runs every check is vacuous.
pub fn cmd_selftest(cfg: &ExperimentConfig, hooks: SelftestHooks) -> Result<Vec<CheckRow>> {
    let law = cfg.law()?;
    let exact_law = cfg.exact_law()?;
    let p = cfg.p()?;
    let d = cfg.d;
    if cfg.runs == 0 {
        return Ok(vec![CheckRow {
            check: "all".into(),
            passed: true,
            detail: "warning: zero runs requested, checks are vacuous".into(),
        }]);
    }
    let runs = cfg.runs;
    let steps = 2000u64;
    let horizon = 6u32;
    let mut checks = Vec::new();
    let pool = cfg.pool()?;
    let source = RandomSource::new(cfg.seed, 0);

    let violations: u64 = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                run_coupled(p, d, steps, source.substream(i), false)
                    .violations
                    .total()
            })
            .sum()
    });
    checks.push(CheckRow {
        check: "coupling_invariants".into(),
        passed: violations == 0,
        detail: format!("{violations} violations over {runs} runs x {steps} steps"),
    });

    let compiled = law.compile();
    let mismatches: u64 = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let mut st = WalkState::new(d, Recording::E1);
                let mut rng = source.substream(i).rng();
                let mut tracker = RegenTracker::new(100);
                tracker.observe(0).expect("origin");
                for _ in 0..steps {
                    walk_step(&mut st, &compiled, &mut rng);
                    tracker.observe(st.position().e1()).expect("unit steps");
                }
                let path = &st.trajectory().expect("recorded").e1;
                let offline = find_regenerations(path, 100).expect("valid path");
                u64::from(offline != tracker.record())
            })
            .sum()
    });
    checks.push(CheckRow {
        check: "regen_online_offline".into(),
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatching records over {runs} runs"),
    });

    let mut mass_ok = true;
    for stat in [Statistic::X1, Statistic::FreshCount, Statistic::FirstReturn] {
        mass_ok &= total_mass(&exact_distribution(&exact_law, horizon, stat)?)
            == Exact::from_integer(1.into());
    }
    checks.push(CheckRow {
        check: "oracle_mass".into(),
        passed: mass_ok,
        detail: format!("exact total mass at n = {horizon}"),
    });

    let samples = runs * 50;
    let report = mc_vs_oracle(&exact_law, &law, horizon, samples, cfg.seed)?;
    let worst = report.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    checks.push(CheckRow {
        check: "mc_vs_oracle".into(),
        passed: worst <= 4.0,
        detail: format!("max |z| = {worst:.3} over {samples} runs at n = {horizon}"),
    });

    // Y-marginal of the coupled chain against the exact excited-walk law.
    let y_p = if hooks.corrupt_step_law {
        if p < 0.9 {
            1.0
        } else {
            0.55
        }
    } else {
        p
    };
    let exact_mean = expectation(&exact_distribution(&exact_law, horizon, Statistic::X1)?)
        .0
        .to_f64_lossy();
    let y_values: Vec<f64> = pool.install(|| {
        (0..samples)
            .into_par_iter()
            .map(|i| {
                let run = run_coupled(
                    y_p,
                    d,
                    u64::from(horizon),
                    RandomSource::new(cfg.seed ^ 0x5eed, i),
                    false,
                );
                run.state.y().position().e1() as f64
            })
            .collect()
    });
    let n = y_values.len() as f64;
    let mean = y_values.iter().sum::<f64>() / n;
    let var = y_values.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let z = (mean - exact_mean) / (var / n).sqrt();
    checks.push(CheckRow {
        check: "coupling_marginal".into(),
        passed: z.abs() <= 4.0,
        detail: format!("z = {z:.3} for E[Y_{horizon}.e1], exact {exact_mean:.6}"),
    });

    // Exact coupled enumeration agrees with the walk oracle.
    let pe = parse_decimal(&cfg.p_text).expect("already parsed");
    let coupled_exact = exact_coupled_y_distribution(pe, d, 4, Statistic::X1)?;
    let walk_exact = exact_distribution(&exact_law, 4, Statistic::X1)?;
    checks.push(CheckRow {
        check: "coupling_exact_marginal".into(),
        passed: coupled_exact == walk_exact,
        detail: "exact Y-law of the coupled chain at n = 4".into(),
    });

    Ok(checks)
}

/// Writes the main rows (to the output path or stdout).
pub fn emit_rows<S: Serialize>(rows: &[S], cfg: &ExperimentConfig) -> Result<()> {
    emit(rows, cfg, cfg.output.as_deref())
}

pub fn emit_summaries(rows: &[SummaryRow], cfg: &ExperimentConfig) -> Result<()> {
    emit_summary(rows, cfg)
}
